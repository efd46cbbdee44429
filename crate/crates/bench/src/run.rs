//! Executes an experiment plan: one drop per (trial, sweep point), one
//! utopia per drop, and a solve per (mode, weight).

use std::path::PathBuf;
use std::time::Instant;

use doma_core::allocation::{solve_allocation, Allocation, AllocationOutcome};
use doma_core::network::{generate_scenario, Scenario};
use doma_core::polyblock::SolveStatus;
use doma_core::scalarization::{
    lift_to_p4, utopia_points, DecisionLayout, OverlapMode, ProblemKind, ScalarizationConfig,
    Utopia, UtopiaOptions,
};
use log::{info, warn};
use rayon::prelude::*;

use crate::error::Result;
use crate::plan::{ExperimentPlan, Mode, SolverSettings};
use crate::record::{sort_records, write_csv, RunRecord};

/// Utopia options matching the plan's solver settings. Both extremes use
/// the freest overlap so that every mode is measured against one point.
pub fn utopia_options(settings: &SolverSettings) -> UtopiaOptions {
    UtopiaOptions {
        overlap_mode: OverlapMode::PerSubband,
        allocation: settings.allocation_options(),
        ..UtopiaOptions::default()
    }
}

pub fn scalarization(
    settings: &SolverSettings,
    omega: f64,
    utopia: Utopia,
    scenario: &Scenario,
) -> Result<ScalarizationConfig> {
    let mut cfg = ScalarizationConfig::for_scenario(omega, utopia, scenario)?
        .with_penalty(settings.penalty)?;
    if let Some(bound) = settings.lambda_bound {
        cfg = cfg.with_lambda_bound(bound, scenario.total_max_power_w())?;
    }
    Ok(cfg)
}

/// One scalarized solve of `mode` on `scenario`, which must already carry
/// the mode's cluster capacity.
pub fn solve_mode(
    scenario: &Scenario,
    mode: Mode,
    config: &ScalarizationConfig,
    settings: &SolverSettings,
    warm: &[Allocation],
) -> Result<AllocationOutcome> {
    let dim = lift_to_p4(
        scenario,
        config,
        DecisionLayout::relaxed(scenario, mode.overlap_mode(), Some(config.lambda_bound)),
    )
    .layout()
    .len();
    if dim > settings.dimension_budget {
        warn!(
            "{mode}: lifted dimension {dim} exceeds the budget of {}; the relaxed stage will be coarse",
            settings.dimension_budget
        );
    }
    Ok(solve_allocation(
        scenario,
        config,
        ProblemKind::Tchebycheff,
        mode.overlap_mode(),
        &settings.allocation_options(),
        warm,
    )?)
}

struct Job {
    trial: usize,
    seed: u64,
    ues_per_ap: usize,
}

struct Drop<'p> {
    plan: &'p ExperimentPlan,
    job: Job,
    scenario: Scenario,
}

impl Drop<'_> {
    fn record(
        &self,
        mode: Mode,
        omega: f64,
        capacity: usize,
        utopia: Option<&Utopia>,
    ) -> RunRecord {
        let nan = f64::NAN;
        RunRecord {
            plan: self.plan.name.clone(),
            trial: self.job.trial,
            seed: self.job.seed,
            ues_per_ap: self.job.ues_per_ap,
            total_ues: self.scenario.num_ues(),
            capacity,
            mode,
            omega,
            status: SolveStatus::Infeasible.as_str().into(),
            se_bps_hz: nan,
            sr_bps: nan,
            sp_w: nan,
            cp_w: self.scenario.total_circuit_power_w(),
            ee_bit_per_j: nan,
            lambda: nan,
            iterations: 0,
            work: 0,
            utopia_se: utopia.map_or(nan, |u| u.spectral_efficiency),
            utopia_sp: utopia.map_or(nan, |u| u.sum_power_w),
            utopia_se_method: utopia.map_or("none", |u| u.se_method.as_str()).into(),
            utopia_sp_method: utopia.map_or("none", |u| u.sp_method.as_str()).into(),
            wall_time_s: 0.0,
        }
    }

    fn run(&self) -> Result<Vec<RunRecord>> {
        let plan = self.plan;
        let base_capacity = self.scenario.config.cluster_capacity[0][0];
        let utopia = match utopia_points(&self.scenario, &utopia_options(&plan.solver)) {
            Ok(u) => u,
            Err(e) => {
                warn!(
                    "seed {} at {} UEs/AP: no utopia point ({e}); recording as infeasible",
                    self.job.seed, self.job.ues_per_ap
                );
                return Ok(plan
                    .weights
                    .iter()
                    .flat_map(|&w| plan.modes.iter().map(move |&m| (m, w)))
                    .map(|(m, w)| {
                        self.record(m, w, m.capacity_override().unwrap_or(base_capacity), None)
                    })
                    .collect());
            }
        };

        // The OFDMA drop may not exist (too many UEs for one per cluster).
        let ofdma = self.scenario.with_capacity(1);
        let mut out = Vec::new();
        for &omega in &plan.weights {
            let mut warm: Vec<Allocation> = Vec::new();
            for mode in Mode::NESTING {
                let capacity = mode.capacity_override().unwrap_or(base_capacity);
                let scenario = match (mode.capacity_override(), &ofdma) {
                    (None, _) => &self.scenario,
                    (Some(_), Ok(s)) => s,
                    (Some(_), Err(_)) => {
                        if plan.modes.contains(&mode) {
                            out.push(self.record(mode, omega, capacity, Some(&utopia)));
                        }
                        continue;
                    }
                };
                // Modes outside the plan still run when a later one needs
                // their solution as a warm start.
                let needed = plan.modes.contains(&mode)
                    || Mode::NESTING
                        .iter()
                        .skip_while(|m| **m != mode)
                        .skip(1)
                        .any(|m| plan.modes.contains(m));
                if !needed {
                    continue;
                }
                let config = scalarization(&plan.solver, omega, utopia, scenario)?;
                let start = Instant::now();
                let outcome = solve_mode(scenario, mode, &config, &plan.solver, &warm)?;
                let elapsed = start.elapsed().as_secs_f64();
                let mut rec = self.record(mode, omega, capacity, Some(&utopia));
                rec.status = outcome.status.as_str().into();
                rec.iterations = outcome.iterations;
                rec.work = outcome.work;
                rec.wall_time_s = elapsed;
                if let Some(a) = &outcome.allocation {
                    rec.se_bps_hz = a.metrics.spectral_efficiency;
                    rec.sr_bps = a.metrics.sum_rate_bps;
                    rec.sp_w = a.metrics.sum_power_w;
                    rec.cp_w = a.metrics.circuit_power_w;
                    rec.ee_bit_per_j = a.metrics.energy_efficiency;
                    rec.lambda = a.lambda;
                    warm.push(a.clone());
                }
                info!(
                    "seed {} ues/ap {} omega {omega} {mode}: {} lambda {:.4} in {elapsed:.2}s",
                    self.job.seed, self.job.ues_per_ap, rec.status, rec.lambda
                );
                if plan.modes.contains(&mode) {
                    out.push(rec);
                }
            }
        }
        Ok(out)
    }
}

/// Runs every job of `plan` and returns the records in canonical order.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<RunRecord>> {
    plan.validate()?;
    let points = plan.sweep_points();
    let largest = points.iter().copied().max().unwrap_or(1);
    let jobs: Vec<Job> = (0..plan.trials)
        .flat_map(|trial| {
            points.iter().map(move |&u| Job {
                trial,
                seed: plan.seed(trial),
                ues_per_ap: u,
            })
        })
        .collect();
    let chunks: Vec<Vec<RunRecord>> = jobs
        .into_par_iter()
        .map(|job| {
            // Every sweep point of a trial keeps a prefix of the same UEs.
            let full = generate_scenario(&plan.system_config(largest, job.seed))?;
            let scenario = full.restrict_ues(&vec![job.ues_per_ap; full.num_aps()])?;
            Drop {
                plan,
                job,
                scenario,
            }
            .run()
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<RunRecord> = chunks.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

/// Runs `plan` and writes its CSV, returning the path written.
pub fn run_and_write(plan: &ExperimentPlan) -> Result<PathBuf> {
    let records = run_experiment(plan)?;
    let path = plan.csv_path();
    write_csv(&path, &records)?;
    info!("wrote {} records to {}", records.len(), path.display());
    Ok(path)
}
