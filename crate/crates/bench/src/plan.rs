//! Experiment plans: which drops, modes and weights to run, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use doma_core::allocation::{AllocationOptions, AssignmentStrategy};
use doma_core::network::SystemConfig;
use doma_core::polyblock::SolverOptions;
use doma_core::scalarization::{OverlapMode, DEFAULT_PENALTY};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Multiple-access scheme under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    /// Overlap optimized separately on every subband edge.
    #[serde(rename = "POD", alias = "pod")]
    Pod,
    /// One overlap shared by every edge.
    #[serde(rename = "NPOD", alias = "npod")]
    Npod,
    /// No overlap.
    #[serde(rename = "NOMA-OFDM", alias = "noma-ofdm", alias = "noma_ofdm")]
    NomaOfdm,
    /// No overlap and one UE per cluster.
    #[serde(rename = "OFDMA", alias = "ofdma")]
    Ofdma,
}

impl Mode {
    /// Legend order.
    pub const ALL: [Mode; 4] = [Mode::Pod, Mode::Npod, Mode::NomaOfdm, Mode::Ofdma];
    /// Order in which a solved mode warm-starts the next: each feasible set
    /// contains the previous one.
    pub const NESTING: [Mode; 4] = [Mode::Ofdma, Mode::NomaOfdm, Mode::Npod, Mode::Pod];

    pub fn overlap_mode(self) -> OverlapMode {
        match self {
            Mode::Pod => OverlapMode::PerSubband,
            Mode::Npod => OverlapMode::Shared,
            Mode::NomaOfdm | Mode::Ofdma => OverlapMode::Disabled,
        }
    }

    /// Cluster capacity forced by the mode, if any.
    pub fn capacity_override(self) -> Option<usize> {
        (self == Mode::Ofdma).then_some(1)
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Pod => "POD",
            Mode::Npod => "NPOD",
            Mode::NomaOfdm => "NOMA-OFDM",
            Mode::Ofdma => "OFDMA",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mode {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        Mode::ALL
            .into_iter()
            .find(|m| m.label().to_ascii_lowercase().replace('-', "") == key)
            .ok_or_else(|| {
                BenchError::Plan(format!(
                    "unknown mode {s:?}; expected one of POD, NPOD, NOMA-OFDM, OFDMA"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Tiny,
    Desk,
    Paper,
}

impl Preset {
    pub fn config(self) -> SystemConfig {
        match self {
            Preset::Tiny => SystemConfig::tiny(),
            Preset::Desk => SystemConfig::desk_scale(),
            Preset::Paper => SystemConfig::paper_scale(),
        }
    }
}

impl FromStr for Preset {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny" => Ok(Preset::Tiny),
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(BenchError::Plan(format!(
                "unknown preset {s:?}; expected tiny, desk or paper"
            ))),
        }
    }
}

/// Scalar overrides applied on top of a preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemOverrides {
    pub num_subbands: Option<usize>,
    pub qos_rate_bps_hz: Option<f64>,
    pub max_tx_power_w: Option<f64>,
    pub circuit_power_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Iteration cap of each pinned power/overlap solve.
    pub max_iter: usize,
    /// Iteration cap of the relaxed stage.
    pub relaxed_max_iter: usize,
    pub tol_gap: f64,
    pub tol_bisect: f64,
    /// Penalty weight `alpha`.
    pub penalty: f64,
    /// Upper bound `Lambda` on `lambda`; derived from the utopia point when absent.
    pub lambda_bound: Option<f64>,
    pub strategy: AssignmentStrategy,
    pub enumerate_cap: usize,
    /// Lifted dimension above which a warning is logged.
    pub dimension_budget: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let a = AllocationOptions::default();
        Self {
            max_iter: a.pinned.max_iter,
            relaxed_max_iter: a.relaxed.max_iter,
            tol_gap: a.pinned.tol_gap,
            tol_bisect: a.pinned.tol_bisect,
            penalty: DEFAULT_PENALTY,
            lambda_bound: None,
            strategy: a.strategy,
            enumerate_cap: a.enumerate_cap,
            dimension_budget: 64,
        }
    }
}

impl SolverSettings {
    pub fn allocation_options(&self) -> AllocationOptions {
        let base = SolverOptions {
            tol_gap: self.tol_gap,
            tol_bisect: self.tol_bisect,
            ..SolverOptions::default()
        };
        AllocationOptions {
            relaxed: base.with_max_iter(self.relaxed_max_iter),
            pinned: base.with_max_iter(self.max_iter),
            strategy: self.strategy,
            enumerate_cap: self.enumerate_cap,
            ..AllocationOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub preset: Preset,
    #[serde(default)]
    pub system: SystemOverrides,
    #[serde(default = "all_modes")]
    pub modes: Vec<Mode>,
    pub weights: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// UEs per AP at each sweep point; empty means the preset's count only.
    #[serde(default)]
    pub ue_sweep: Vec<usize>,
    /// Cluster capacity `L` for every AP and subband; the preset's when absent.
    pub capacity: Option<usize>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// CSV file name inside `output_dir`; `<name>.csv` when absent.
    pub csv: Option<String>,
}

fn all_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text).map_err(|e| BenchError::Plan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Plan(m));
        if self.modes.is_empty() {
            return bad("no modes".into());
        }
        if self.weights.is_empty() || self.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return bad(format!(
                "weights must be a non-empty list in [0, 1], got {:?}",
                self.weights
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.ue_sweep.contains(&0) {
            return bad("ue_sweep entries must be positive".into());
        }
        if self.capacity == Some(0) {
            return bad("capacity must be at least 1".into());
        }
        for point in self.sweep_points() {
            self.system_config(point, 0).validate()?;
        }
        Ok(())
    }

    /// UEs per AP of every sweep point.
    pub fn sweep_points(&self) -> Vec<usize> {
        if self.ue_sweep.is_empty() {
            let cfg = self.preset.config();
            vec![cfg.ues_per_ap.iter().copied().max().unwrap_or(1)]
        } else {
            self.ue_sweep.clone()
        }
    }

    /// Configuration of one drop at `ues_per_ap` UEs per AP.
    pub fn system_config(&self, ues_per_ap: usize, seed: u64) -> SystemConfig {
        let mut cfg = self.preset.config();
        let o = &self.system;
        if let Some(n) = o.num_subbands {
            let per = cfg.subband_bandwidth_hz();
            cfg.num_subbands = n;
            cfg.total_bandwidth_hz = per * n as f64;
            let l = cfg.cluster_capacity[0][0];
            cfg = cfg.with_capacity(l);
        }
        if let Some(v) = o.qos_rate_bps_hz {
            cfg.qos_rate_bps_hz = v;
        }
        if let Some(v) = o.max_tx_power_w {
            cfg.max_tx_power_w = v;
        }
        if let Some(v) = o.circuit_power_w {
            cfg.circuit_power_w = v;
        }
        if let Some(l) = self.capacity {
            cfg = cfg.with_capacity(l);
        }
        cfg.with_ues_per_ap(ues_per_ap).with_seed(seed)
    }

    pub fn seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    pub fn csv_path(&self) -> PathBuf {
        self.output_dir.join(
            self.csv
                .clone()
                .unwrap_or_else(|| format!("{}.csv", self.name)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = r#"
name = "t"
preset = "tiny"
weights = [0.5]
trials = 1
"#;

    #[test]
    fn minimal_plan_fills_defaults() {
        let p = ExperimentPlan::from_toml(PLAN).unwrap();
        assert_eq!(p.modes, Mode::ALL.to_vec());
        assert_eq!(p.sweep_points(), vec![2]);
        assert_eq!(p.csv_path(), PathBuf::from("out/t.csv"));
        assert_eq!(p.solver, SolverSettings::default());
    }

    #[test]
    fn bad_plans_are_rejected() {
        for bad in [
            PLAN.replace("[0.5]", "[1.5]"),
            PLAN.replace("trials = 1", "trials = 0"),
            format!("{PLAN}capacity = 0\n"),
            format!("{PLAN}unknown = 1\n"),
            format!("{PLAN}ue_sweep = [9]\ncapacity = 1\n"),
        ] {
            assert!(ExperimentPlan::from_toml(&bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn mode_names_parse_loosely() {
        assert_eq!("noma-ofdm".parse::<Mode>().unwrap(), Mode::NomaOfdm);
        assert_eq!("NOMA_OFDM".parse::<Mode>().unwrap(), Mode::NomaOfdm);
        assert_eq!("pod".parse::<Mode>().unwrap(), Mode::Pod);
        assert!("ofdm".parse::<Mode>().is_err());
    }

    #[test]
    fn plan_overrides_reach_the_system_config() {
        let p = ExperimentPlan::from_toml(&format!(
            "{PLAN}capacity = 10\n[system]\nnum_subbands = 3\n"
        ))
        .unwrap();
        let cfg = p.system_config(4, 9);
        assert_eq!(cfg.num_subbands, 3);
        assert_eq!(cfg.total_bandwidth_hz, 3.0 * 180e3);
        assert_eq!(cfg.cluster_capacity, vec![vec![10; 3]]);
        assert_eq!(cfg.ues_per_ap, vec![4]);
        assert_eq!(cfg.rng_seed, 9);
    }
}
