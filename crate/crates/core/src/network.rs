//! Network instance generation: AP/UE geometry, channel power gains and
//! system constants.
//!
//! UEs are indexed globally, AP by AP: the UEs served by AP 0 come first,
//! then those of AP 1, and so on. Channel gains are stored per
//! `(ue, receiving ap, subband)` and are power gains `|g|^2 = beta * |h|^2`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum UE-to-AP distance in metres. Closer draws are resampled.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Which bandwidth the per-UE QoS target (given in bps/Hz) is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QosReference {
    /// Rate divided by the nominal subband width `B`.
    #[default]
    Subband,
    /// Rate divided by the total system bandwidth `W`.
    Total,
}

/// Physical and geometric constants of one network.
///
/// Units: Hz, W, m, dB / dBm/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub total_bandwidth_hz: f64,
    pub num_subbands: usize,
    pub num_aps: usize,
    pub ues_per_ap: Vec<usize>,
    /// `cluster_capacity[k][n]`: max UEs of AP `k` sharing subband `n`.
    pub cluster_capacity: Vec<Vec<usize>>,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub circuit_power_w: f64,
    pub max_tx_power_w: f64,
    pub qos_rate_bps_hz: f64,
    #[serde(default)]
    pub qos_reference: QosReference,
    /// Side of the square deployment area.
    pub area_m: f64,
    pub coverage_diameter_m: f64,
    pub ap_positions: Vec<[f64; 2]>,
    pub rng_seed: u64,
}

impl SystemConfig {
    /// Full-size network: 2 APs, 6 UEs each, 4 subbands of 180 kHz.
    pub fn paper_scale() -> Self {
        Self::uniform(2, 6, 4, 2)
    }

    /// Shrunk network that keeps the lifted problem small: 2 APs, 2 UEs each,
    /// 2 subbands, clusters of up to 2 UEs.
    pub fn desk_scale() -> Self {
        Self::uniform(2, 2, 2, 2)
    }

    /// Single AP with 2 UEs and 2 subbands.
    pub fn tiny() -> Self {
        let mut cfg = Self::uniform(1, 2, 2, 2);
        cfg.ap_positions = vec![[100.0, 100.0]];
        cfg
    }

    /// Table defaults with the given sizes. AP positions follow the
    /// two-AP layout and continue along the x axis every 200 m.
    pub fn uniform(
        num_aps: usize,
        ues_per_ap: usize,
        num_subbands: usize,
        capacity: usize,
    ) -> Self {
        let subband_bw = 180e3;
        Self {
            total_bandwidth_hz: subband_bw * num_subbands as f64,
            num_subbands,
            num_aps,
            ues_per_ap: vec![ues_per_ap; num_aps],
            cluster_capacity: vec![vec![capacity; num_subbands]; num_aps],
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 3.0,
            circuit_power_w: 0.03,
            max_tx_power_w: 0.2,
            qos_rate_bps_hz: 0.1,
            qos_reference: QosReference::Subband,
            area_m: 400.0,
            coverage_diameter_m: 200.0,
            ap_positions: (0..num_aps)
                .map(|k| [100.0 + 200.0 * k as f64, 100.0])
                .collect(),
            rng_seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.cluster_capacity = vec![vec![capacity; self.num_subbands]; self.num_aps];
        self
    }

    pub fn with_ues_per_ap(mut self, ues: usize) -> Self {
        self.ues_per_ap = vec![ues; self.num_aps];
        self
    }

    /// Nominal subband width `B = W / N`.
    pub fn subband_bandwidth_hz(&self) -> f64 {
        self.total_bandwidth_hz / self.num_subbands as f64
    }

    /// Noise power over one nominal subband, in watts.
    pub fn noise_power_w(&self) -> f64 {
        10f64.powf((self.noise_psd_dbm_hz + self.noise_figure_db) / 10.0) / 1000.0
            * self.subband_bandwidth_hz()
    }

    pub fn total_ues(&self) -> usize {
        self.ues_per_ap.iter().sum()
    }

    /// Bandwidth the QoS target is normalized by.
    pub fn qos_reference_hz(&self) -> f64 {
        match self.qos_reference {
            QosReference::Subband => self.subband_bandwidth_hz(),
            QosReference::Total => self.total_bandwidth_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.total_bandwidth_hz.is_finite() && self.total_bandwidth_hz > 0.0) {
            return bad("total bandwidth must be positive".into());
        }
        if self.num_subbands < 2 {
            return bad(format!(
                "need at least 2 subbands, got {}",
                self.num_subbands
            ));
        }
        if self.num_aps == 0 {
            return bad("need at least one AP".into());
        }
        if self.ues_per_ap.len() != self.num_aps {
            return bad(format!(
                "ues_per_ap has {} entries for {} APs",
                self.ues_per_ap.len(),
                self.num_aps
            ));
        }
        if self.ap_positions.len() != self.num_aps {
            return bad(format!(
                "ap_positions has {} entries for {} APs",
                self.ap_positions.len(),
                self.num_aps
            ));
        }
        if self.cluster_capacity.len() != self.num_aps
            || self
                .cluster_capacity
                .iter()
                .any(|row| row.len() != self.num_subbands)
        {
            return bad("cluster_capacity must be num_aps x num_subbands".into());
        }
        for (k, row) in self.cluster_capacity.iter().enumerate() {
            if row.iter().any(|&l| l == 0) {
                return bad(format!("AP {k}: cluster capacity must be at least 1"));
            }
            let total: usize = row.iter().sum();
            if total < self.ues_per_ap[k] {
                return bad(format!(
                    "AP {k}: {} UEs cannot fit in total cluster capacity {total}",
                    self.ues_per_ap[k]
                ));
            }
        }
        for (name, v) in [
            ("circuit_power_w", self.circuit_power_w),
            ("max_tx_power_w", self.max_tx_power_w),
            ("coverage_diameter_m", self.coverage_diameter_m),
            ("area_m", self.area_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.qos_rate_bps_hz.is_finite() && self.qos_rate_bps_hz >= 0.0) {
            return bad("qos_rate_bps_hz must be non-negative".into());
        }
        if !(self.noise_psd_dbm_hz.is_finite() && self.noise_figure_db.is_finite()) {
            return bad("noise parameters must be finite".into());
        }
        Ok(())
    }
}

/// Path loss in dB at distance `d` metres.
pub fn path_loss_db(distance_m: f64) -> f64 {
    34.53 + 38.0 * distance_m.log10()
}

/// Linear large-scale power gain at distance `d` metres.
pub fn path_gain(distance_m: f64) -> f64 {
    10f64.powf(-path_loss_db(distance_m) / 10.0)
}

/// An immutable network instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: SystemConfig,
    /// `ue_positions[k][m]`: position of local UE `m` of AP `k`.
    pub ue_positions: Vec<Vec<[f64; 2]>>,
    /// Flat `(ue, ap, subband)` power gains.
    gains: Vec<f64>,
    pub noise_power_w: f64,
    #[serde(skip)]
    home: Vec<usize>,
    #[serde(skip)]
    offsets: Vec<usize>,
}

impl Scenario {
    /// Builds a scenario from explicit gains, `gain(ue, ap, subband)`.
    /// Positions are left at the serving AP.
    pub fn from_gains<F>(config: SystemConfig, mut gain: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> f64,
    {
        config.validate()?;
        let (k_aps, n_sub, total) = (config.num_aps, config.num_subbands, config.total_ues());
        let mut gains = Vec::with_capacity(total * k_aps * n_sub);
        for ue in 0..total {
            for ap in 0..k_aps {
                for n in 0..n_sub {
                    gains.push(gain(ue, ap, n));
                }
            }
        }
        let ue_positions = config
            .ues_per_ap
            .iter()
            .zip(&config.ap_positions)
            .map(|(&u, &pos)| vec![pos; u])
            .collect();
        Self::assemble(config, ue_positions, gains)
    }

    fn assemble(
        config: SystemConfig,
        ue_positions: Vec<Vec<[f64; 2]>>,
        gains: Vec<f64>,
    ) -> Result<Self> {
        let mut scenario = Self {
            noise_power_w: config.noise_power_w(),
            config,
            ue_positions,
            gains,
            home: Vec::new(),
            offsets: Vec::new(),
        };
        scenario.rebuild_index()?;
        Ok(scenario)
    }

    fn rebuild_index(&mut self) -> Result<()> {
        self.config.validate()?;
        let expected = self.config.total_ues() * self.config.num_aps * self.config.num_subbands;
        if self.gains.len() != expected {
            return Err(Error::InvalidScenario(format!(
                "gain array has {} entries, expected {expected}",
                self.gains.len()
            )));
        }
        if let Some(bad) = self.gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::InvalidScenario(format!(
                "invalid channel gain {bad}"
            )));
        }
        if !(self.noise_power_w.is_finite() && self.noise_power_w > 0.0) {
            return Err(Error::InvalidScenario(
                "noise power must be positive".into(),
            ));
        }
        self.home.clear();
        self.offsets.clear();
        let mut offset = 0;
        for (k, &u) in self.config.ues_per_ap.iter().enumerate() {
            self.offsets.push(offset);
            self.home.extend(std::iter::repeat_n(k, u));
            offset += u;
        }
        self.offsets.push(offset);
        Ok(())
    }

    pub fn num_ues(&self) -> usize {
        self.home.len()
    }

    pub fn num_aps(&self) -> usize {
        self.config.num_aps
    }

    pub fn num_subbands(&self) -> usize {
        self.config.num_subbands
    }

    /// Serving AP of a global UE index.
    pub fn home_ap(&self, ue: usize) -> usize {
        self.home[ue]
    }

    /// Local index of a UE within its serving AP.
    pub fn local_index(&self, ue: usize) -> usize {
        ue - self.offsets[self.home[ue]]
    }

    /// Global UE indices served by AP `ap`.
    pub fn ues_of(&self, ap: usize) -> std::ops::Range<usize> {
        self.offsets[ap]..self.offsets[ap + 1]
    }

    /// Power gain from `ue` to AP `ap` on subband `n`.
    pub fn gain(&self, ue: usize, ap: usize, n: usize) -> f64 {
        let (k, nn) = (self.config.num_aps, self.config.num_subbands);
        self.gains[(ue * k + ap) * nn + n]
    }

    /// Gain from `ue` to its own AP on subband `n`.
    pub fn own_gain(&self, ue: usize, n: usize) -> f64 {
        self.gain(ue, self.home[ue], n)
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn subband_bandwidth_hz(&self) -> f64 {
        self.config.subband_bandwidth_hz()
    }

    /// Sum of the per-UE power limits.
    pub fn total_max_power_w(&self) -> f64 {
        self.config.max_tx_power_w * self.num_ues() as f64
    }

    pub fn total_circuit_power_w(&self) -> f64 {
        self.config.circuit_power_w * self.num_ues() as f64
    }

    /// The sub-drop keeping the first `ues_per_ap[k]` UEs of every AP `k`,
    /// with their positions and gains unchanged.
    pub fn restrict_ues(&self, ues_per_ap: &[usize]) -> Result<Self> {
        if ues_per_ap.len() != self.num_aps()
            || ues_per_ap
                .iter()
                .enumerate()
                .any(|(k, &u)| u > self.ues_of(k).len())
        {
            return Err(Error::InvalidConfig(format!(
                "cannot keep {ues_per_ap:?} UEs of a drop with {:?}",
                self.config.ues_per_ap
            )));
        }
        let mut config = self.config.clone();
        config.ues_per_ap = ues_per_ap.to_vec();
        let kept: Vec<usize> = (0..self.num_aps())
            .flat_map(|k| self.ues_of(k).take(ues_per_ap[k]))
            .collect();
        let block = self.num_aps() * self.num_subbands();
        let gains = kept
            .iter()
            .flat_map(|&ue| self.gains[ue * block..(ue + 1) * block].iter().copied())
            .collect();
        let ue_positions = self
            .ue_positions
            .iter()
            .zip(ues_per_ap)
            .map(|(p, &u)| p[..u].to_vec())
            .collect();
        Self::assemble(config, ue_positions, gains)
    }

    /// The same drop with cluster capacity `capacity` everywhere.
    pub fn with_capacity(&self, capacity: usize) -> Result<Self> {
        let config = self.config.clone().with_capacity(capacity);
        config.validate()?;
        Ok(Self {
            config,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut scenario: Scenario = serde_json::from_str(text)?;
        scenario.rebuild_index()?;
        Ok(scenario)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Draws a network instance. UEs are placed uniformly in the coverage disc
/// of their serving AP; fading is i.i.d. unit-mean exponential per
/// `(ue, ap, subband)`.
pub fn generate_scenario(config: &SystemConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let radius = config.coverage_diameter_m / 2.0;

    let mut ue_positions = Vec::with_capacity(config.num_aps);
    for (k, &count) in config.ues_per_ap.iter().enumerate() {
        let ap = config.ap_positions[k];
        let mut positions = Vec::with_capacity(count);
        while positions.len() < count {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            let pos = [ap[0] + r * theta.cos(), ap[1] + r * theta.sin()];
            if distance(pos, ap) >= MIN_DISTANCE_M {
                positions.push(pos);
            }
        }
        ue_positions.push(positions);
    }

    let n_sub = config.num_subbands;
    let mut gains = Vec::with_capacity(config.total_ues() * config.num_aps * n_sub);
    for pos in ue_positions.iter().flatten() {
        for ap in &config.ap_positions {
            let beta = path_gain(distance(*pos, *ap).max(MIN_DISTANCE_M));
            for _ in 0..n_sub {
                let fading: f64 = Exp1.sample(&mut rng);
                gains.push(beta * fading);
            }
        }
    }
    Scenario::assemble(config.clone(), ue_positions, gains)
}

/// Decoding order on one `(ap, subband)` cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SicOrder {
    num_subbands: usize,
    orders: Vec<Vec<usize>>,
}

impl SicOrder {
    /// UEs (global indices) decoded at AP `ap` on subband `n`, strongest first.
    pub fn order(&self, ap: usize, n: usize) -> &[usize] {
        &self.orders[ap * self.num_subbands + n]
    }
}

/// Orders UEs of `ap` by descending own-AP gain on subband `n`; ties go to the
/// lower UE index.
pub fn decoding_order(
    scenario: &Scenario,
    ap: usize,
    n: usize,
    ues: impl Iterator<Item = usize>,
) -> Vec<usize> {
    let mut order: Vec<usize> = ues.collect();
    order.sort_by(|&a, &b| {
        scenario
            .gain(b, ap, n)
            .total_cmp(&scenario.gain(a, ap, n))
            .then(a.cmp(&b))
    });
    order
}

/// Per-cluster SIC decoding order of the UEs assigned (`rho > 0`) to each
/// `(ap, subband)`.
pub fn sort_for_sic(scenario: &Scenario, assignment: &crate::rates::Assignment) -> SicOrder {
    let n_sub = scenario.num_subbands();
    let mut orders = Vec::with_capacity(scenario.num_aps() * n_sub);
    for ap in 0..scenario.num_aps() {
        for n in 0..n_sub {
            let assigned = scenario
                .ues_of(ap)
                .filter(|&ue| assignment.get(ue, n) > 0.0);
            orders.push(decoding_order(scenario, ap, n, assigned));
        }
    }
    SicOrder {
        num_subbands: n_sub,
        orders,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::Assignment;

    #[test]
    fn path_gain_at_100m() {
        let expected = 10f64.powf(-11.053);
        assert!((path_gain(100.0) / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn path_gain_strictly_decreasing() {
        let mut prev = path_gain(1.0);
        for i in 2..500 {
            let g = path_gain(i as f64 * 0.7);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn noise_power_matches_psd() {
        let cfg = SystemConfig::paper_scale();
        let expected = 10f64.powf(-20.1) * 180e3;
        assert!((cfg.noise_power_w() / expected - 1.0).abs() < 1e-12);
        let mut wide = cfg.clone();
        wide.total_bandwidth_hz *= 2.0;
        assert!((wide.noise_power_w() / cfg.noise_power_w() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn paper_scale_shape() {
        let s = generate_scenario(&SystemConfig::paper_scale()).unwrap();
        assert_eq!(s.num_ues(), 12);
        assert_eq!(s.gains().len(), 12 * 2 * 4);
        assert_eq!(s.subband_bandwidth_hz(), 180e3);
        assert!(s.gains().iter().all(|g| g.is_finite() && *g > 0.0));
        for (k, ues) in s.ue_positions.iter().enumerate() {
            for pos in ues {
                let d = distance(*pos, s.config.ap_positions[k]);
                assert!((MIN_DISTANCE_M..=100.0).contains(&d));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SystemConfig::paper_scale().with_seed(17);
        assert_eq!(
            generate_scenario(&cfg).unwrap(),
            generate_scenario(&cfg).unwrap()
        );
        let other = generate_scenario(&cfg.clone().with_seed(18)).unwrap();
        assert_ne!(generate_scenario(&cfg).unwrap().gains(), other.gains());
    }

    #[test]
    fn restricted_drop_keeps_gains() {
        let full =
            generate_scenario(&SystemConfig::desk_scale().with_ues_per_ap(3).with_seed(8)).unwrap();
        let sub = full.restrict_ues(&[1, 2]).unwrap();
        assert_eq!(sub.num_ues(), 3);
        assert_eq!(sub.home_ap(1), 1);
        for n in 0..2 {
            for ap in 0..2 {
                assert_eq!(sub.gain(0, ap, n), full.gain(0, ap, n));
                assert_eq!(sub.gain(2, ap, n), full.gain(4, ap, n));
            }
        }
        assert_eq!(sub.ue_positions[1], full.ue_positions[1][..2].to_vec());
        assert!(full.restrict_ues(&[4, 1]).is_err());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let s = generate_scenario(&SystemConfig::desk_scale().with_seed(3)).unwrap();
        let back = Scenario::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
        assert_eq!(back.home_ap(3), 1);
        assert_eq!(back.local_index(3), 1);
    }

    #[test]
    fn rejects_invalid_configs() {
        let mut cfg = SystemConfig::desk_scale();
        cfg.num_subbands = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = SystemConfig::desk_scale();
        cfg.cluster_capacity = vec![vec![1, 0]; 2];
        assert!(cfg.validate().is_err());
        let cfg = SystemConfig::desk_scale()
            .with_capacity(1)
            .with_ues_per_ap(3);
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let mut cfg = SystemConfig::desk_scale();
        cfg.max_tx_power_w = 0.0;
        assert!(generate_scenario(&cfg).is_err());
    }

    fn two_ue(g0: f64, g1: f64) -> Scenario {
        Scenario::from_gains(
            SystemConfig::tiny(),
            |ue, _, _| if ue == 0 { g0 } else { g1 },
        )
        .unwrap()
    }

    #[test]
    fn sic_order_descending_gain() {
        let mut asg = Assignment::zeros(2, 2);
        asg.set(0, 0, 1.0);
        asg.set(1, 0, 1.0);
        assert_eq!(sort_for_sic(&two_ue(0.9, 0.4), &asg).order(0, 0), &[0, 1]);
        assert_eq!(sort_for_sic(&two_ue(0.4, 0.9), &asg).order(0, 0), &[1, 0]);
        assert_eq!(sort_for_sic(&two_ue(0.5, 0.5), &asg).order(0, 0), &[0, 1]);
        assert!(sort_for_sic(&two_ue(0.5, 0.5), &asg).order(0, 1).is_empty());
    }
}
