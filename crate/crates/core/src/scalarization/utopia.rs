//! Utopia point: best achievable SE and least SP under QoS.

use super::{OverlapMode, ProblemKind, ScalarizationConfig, Utopia, UtopiaMethod, DEFAULT_PENALTY};
use crate::allocation::{evaluate_allocation, solve_allocation, Allocation, AllocationOptions};
use crate::error::{Error, Result};
use crate::network::Scenario;
use crate::oracle::{assignments, exhaustive_best, GridSpec, OracleObjective};
use crate::rates::{Assignment, OverlapProfile, PowerAllocation, RateModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtopiaOptions {
    /// Overlap freedom under which both extremes are computed.
    pub overlap_mode: OverlapMode,
    /// Points per axis of the exhaustive SE search.
    pub grid_points: usize,
    /// Largest grid searched exhaustively; bigger instances use the solver.
    pub exhaustive_cap: u64,
    pub allocation: AllocationOptions,
    /// Levels per overlap variable in the minimum-power search.
    pub overlap_levels: usize,
}

impl Default for UtopiaOptions {
    fn default() -> Self {
        Self {
            overlap_mode: OverlapMode::PerSubband,
            grid_points: 51,
            exhaustive_cap: 2_000_000,
            allocation: AllocationOptions::default(),
            overlap_levels: 11,
        }
    }
}

/// Minimal powers meeting every UE's QoS target for a fixed assignment and
/// overlap, by the monotone fixed-point iteration `p <- gamma * I(p) / g`
/// started from zero. `None` when a power would exceed `P_max`.
fn min_power_fixed_point(
    model: &RateModel<'_>,
    assignment: &Assignment,
    overlap: &OverlapProfile,
) -> Option<PowerAllocation> {
    let s = model.scenario();
    let n_sub = s.num_subbands();
    let cfg = &s.config;
    let target_bits = cfg.qos_rate_bps_hz * cfg.qos_reference_hz();
    let served: Vec<(usize, usize, f64)> = (0..s.num_ues())
        .filter_map(|ue| {
            let n = assignment.subband_of(ue)?;
            let bw = s.subband_bandwidth_hz() * overlap.bandwidth_factor(s.home_ap(ue), n);
            Some((ue, n, (target_bits / bw).exp2() - 1.0))
        })
        .collect();
    if served.len() < s.num_ues() {
        return None;
    }
    let mut p = PowerAllocation::zeros(s.num_ues(), n_sub);
    for _ in 0..100_000 {
        let terms = model.all_terms(&p, overlap);
        let mut change: f64 = 0.0;
        let mut next = p.clone();
        for &(ue, n, gamma) in &served {
            let value = gamma * terms[ue * n_sub + n].total() / s.own_gain(ue, n);
            if value > cfg.max_tx_power_w {
                return None;
            }
            change = change.max((value - p.get(ue, n)).abs() / value.max(f64::MIN_POSITIVE));
            next.set(ue, n, value);
        }
        p = next;
        if change <= 1e-14 {
            return Some(p);
        }
    }
    None
}

fn overlap_candidates(
    scenario: &Scenario,
    mode: OverlapMode,
    levels: usize,
) -> Vec<OverlapProfile> {
    let (k_aps, n_sub) = (scenario.num_aps(), scenario.num_subbands());
    let grid: Vec<f64> = (0..levels)
        .map(|i| i as f64 / (levels - 1).max(1) as f64)
        .collect();
    let vars = mode.num_variables(k_aps, n_sub);
    if mode == OverlapMode::Disabled || vars == 0 {
        return vec![OverlapProfile::zero(k_aps, n_sub)];
    }
    if mode == OverlapMode::Shared || vars > 2 {
        return grid
            .iter()
            .map(|&d| OverlapProfile::uniform(k_aps, n_sub, d))
            .collect();
    }
    let edges = n_sub - 1;
    let mut out = Vec::new();
    let mut idx = vec![0usize; vars];
    loop {
        let mut ov = if mode == OverlapMode::PerSubbandAsymmetric {
            OverlapProfile::asymmetric(k_aps, n_sub)
        } else {
            OverlapProfile::zero(k_aps, n_sub)
        };
        for (v, &i) in idx.iter().enumerate() {
            if v < k_aps * edges {
                ov.set_right(v / edges, v % edges, grid[i]);
            } else {
                let w = v - k_aps * edges;
                ov.set_left(w / edges, w % edges + 1, grid[i]);
            }
        }
        out.push(ov);
        let mut carry = true;
        for d in idx.iter_mut().rev() {
            *d += 1;
            if *d < levels {
                carry = false;
                break;
            }
            *d = 0;
        }
        if carry {
            break;
        }
    }
    out
}

/// Least total power meeting QoS over every assignment and a grid of
/// overlap profiles (all edges share one level when there are more than two
/// overlap variables). `None` when QoS is unreachable.
pub fn min_sum_power(
    scenario: &Scenario,
    mode: OverlapMode,
    overlap_levels: usize,
) -> Result<Option<Allocation>> {
    let model = RateModel::new(scenario);
    let candidates = overlap_candidates(scenario, mode, overlap_levels);
    let dummy = sum_rate_config();
    let mut best: Option<Allocation> = None;
    for choices in assignments(scenario) {
        let assignment = Assignment::from_choices(scenario.num_subbands(), &choices);
        for ov in &candidates {
            let Some(p) = min_power_fixed_point(&model, &assignment, ov) else {
                continue;
            };
            if best
                .as_ref()
                .is_some_and(|b| b.metrics.sum_power_w <= p.total())
            {
                continue;
            }
            if let Some(a) =
                evaluate_allocation(scenario, &dummy, ProblemKind::SumRate, &assignment, &p, ov)?
            {
                best = Some(a);
            }
        }
    }
    Ok(best)
}

/// Config for single-objective sum-rate problems, where weight and utopia
/// play no role.
pub(crate) fn sum_rate_config() -> ScalarizationConfig {
    ScalarizationConfig {
        weight: 1.0,
        penalty: DEFAULT_PENALTY,
        lambda_bound: 1.0,
        utopia: Utopia::supplied(0.0, 0.0),
        qos_form: Default::default(),
    }
}

/// Computes `(U1*, U2*)`. SE uses an exhaustive grid search when the grid
/// fits the cap, otherwise the polyblock solver on the sum-rate problem.
pub fn utopia_points(scenario: &Scenario, options: &UtopiaOptions) -> Result<Utopia> {
    let unreachable = || Error::Infeasible("QoS targets are unreachable at maximum power".into());
    let min_power = min_sum_power(scenario, options.overlap_mode, options.overlap_levels)?;
    let qos = scenario.config.qos_rate_bps_hz > 0.0;
    let (sum_power_w, sp_method) = match (&min_power, qos) {
        (_, false) => (0.0, UtopiaMethod::Trivial),
        (Some(a), true) => (a.metrics.sum_power_w, UtopiaMethod::FixedPoint),
        (None, true) => return Err(unreachable()),
    };

    let grid =
        GridSpec::new(options.grid_points, options.overlap_mode).with_cap(options.exhaustive_cap);
    let (mut se, se_method) = if grid.size(scenario) <= options.exhaustive_cap as u128 {
        let best = exhaustive_best(scenario, &grid, &OracleObjective::SumRateMax)?;
        (best.map(|b| b.value), UtopiaMethod::Exhaustive)
    } else {
        let warm: Vec<Allocation> = min_power.iter().cloned().collect();
        let out = solve_allocation(
            scenario,
            &sum_rate_config(),
            ProblemKind::SumRate,
            options.overlap_mode,
            &options.allocation,
            &warm,
        )?;
        (
            out.allocation.map(|a| a.metrics.spectral_efficiency),
            UtopiaMethod::Polyblock,
        )
    };
    if let Some(a) = &min_power {
        se = Some(se.map_or(a.metrics.spectral_efficiency, |v| {
            v.max(a.metrics.spectral_efficiency)
        }));
    }
    let spectral_efficiency = se.ok_or_else(unreachable)?;
    Ok(Utopia {
        spectral_efficiency,
        sum_power_w,
        se_method,
        sp_method,
    })
}
