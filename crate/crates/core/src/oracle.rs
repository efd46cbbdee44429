//! Brute-force references: a separately written rate evaluator and an
//! exhaustive search over binary assignments with gridded powers and
//! overlap fractions.

use crate::error::{Error, Result};
use crate::network::Scenario;
use crate::rates::{Assignment, Metrics, OverlapProfile, PowerAllocation};
use crate::scalarization::{OverlapMode, ScalarizationConfig};

pub const DEFAULT_GRID_CAP: u64 = 10_000_000;

/// Metrics computed straight from the SINR expression, one UE at a time.
pub fn recompute_metrics(
    scenario: &Scenario,
    assignment: &Assignment,
    powers: &PowerAllocation,
    overlap: &OverlapProfile,
) -> Result<Metrics> {
    let m_ues = scenario.num_ues();
    let n_sub = scenario.num_subbands();
    if assignment.values().len() != m_ues * n_sub || powers.values().len() != m_ues * n_sub {
        return Err(Error::Shape("allocation does not match scenario".into()));
    }
    if overlap.num_aps() != scenario.num_aps() || overlap.num_subbands() != n_sub {
        return Err(Error::Shape(
            "overlap profile does not match scenario".into(),
        ));
    }
    let rates: Vec<f64> = (0..m_ues * n_sub)
        .map(|i| {
            let (m, n) = (i / n_sub, i % n_sub);
            if assignment.values()[i] > 0.0 {
                single_rate(scenario, powers, overlap, m, n)
            } else {
                0.0
            }
        })
        .collect();
    let mut sum_rate = 0.0;
    for (rho, r) in assignment.values().iter().zip(&rates) {
        sum_rate += rho * r;
    }
    let mut sum_power = 0.0;
    for p in powers.values() {
        sum_power += p;
    }
    let circuit = scenario.config.circuit_power_w * m_ues as f64;
    Ok(Metrics::from_rates(
        n_sub,
        rates,
        sum_rate,
        scenario.config.total_bandwidth_hz,
        sum_power,
        circuit,
    ))
}

fn single_rate(
    scenario: &Scenario,
    powers: &PowerAllocation,
    overlap: &OverlapProfile,
    m: usize,
    n: usize,
) -> f64 {
    let n_sub = scenario.num_subbands();
    let k = scenario.home_ap(m);
    let g = |j: usize, sub: usize| scenario.gain(j, k, sub);
    let p = |j: usize, sub: usize| powers.get(j, sub);
    let dl = |ap: usize, sub: usize| overlap.left(ap, sub);
    let dr = |ap: usize, sub: usize| overlap.right(ap, sub);
    let my_gain = g(m, n);

    let mut denom = scenario.noise_power_w * (1.0 + dl(k, n) + dr(k, n));
    for j in 0..scenario.num_ues() {
        if j == m {
            continue;
        }
        let kj = scenario.home_ap(j);
        if kj == k {
            // Same cluster: only users decoded later interfere.
            let gj = g(j, n);
            if gj < my_gain || (gj == my_gain && j > m) {
                denom += p(j, n) * gj;
            }
        } else {
            denom += p(j, n) * g(j, n);
        }
    }
    for j in 0..scenario.num_ues() {
        let kj = scenario.home_ap(j);
        if n + 1 < n_sub {
            let wt = (dl(kj, n + 1).sqrt() + dr(kj, n).sqrt()).powi(2);
            denom += wt * p(j, n + 1) * g(j, n + 1);
        }
        if n >= 1 {
            let wt = (dl(kj, n).sqrt() + dr(kj, n - 1).sqrt()).powi(2);
            denom += wt * p(j, n - 1) * g(j, n - 1);
        }
    }
    let bandwidth = scenario.subband_bandwidth_hz() * (1.0 + dl(k, n) + dr(k, n));
    bandwidth * (1.0 + p(m, n) * my_gain / denom).log2()
}

/// Grid resolution for the exhaustive search. Powers take
/// `power_points` evenly spaced levels in `[0, P_max]`, every overlap
/// variable `overlap_points` levels in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub power_points: usize,
    pub overlap_points: usize,
    pub overlap_mode: OverlapMode,
    pub cap: u64,
}

impl GridSpec {
    pub fn new(points: usize, overlap_mode: OverlapMode) -> Self {
        Self {
            power_points: points,
            overlap_points: points,
            overlap_mode,
            cap: DEFAULT_GRID_CAP,
        }
    }

    pub fn with_overlap_points(mut self, points: usize) -> Self {
        self.overlap_points = points;
        self
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn power_levels(&self, max_power: f64) -> Vec<f64> {
        levels(self.power_points, max_power)
    }

    pub fn overlap_levels(&self) -> Vec<f64> {
        if self.overlap_mode == OverlapMode::Disabled {
            vec![0.0]
        } else {
            levels(self.overlap_points, 1.0)
        }
    }

    /// Grid step of the power axis.
    pub fn power_step(&self, max_power: f64) -> f64 {
        if self.power_points > 1 {
            max_power / (self.power_points - 1) as f64
        } else {
            0.0
        }
    }

    /// Number of grid points, counting stops once `cap` is exceeded.
    pub fn size(&self, scenario: &Scenario) -> u128 {
        let vars = self
            .overlap_mode
            .num_variables(scenario.num_aps(), scenario.num_subbands()) as u32;
        let overlap = (self.overlap_levels().len() as u128).saturating_pow(vars);
        let power = self.power_points.max(1) as u128;
        let mut total: u128 = 0;
        let cap = self.cap as u128;
        for_each_assignment(scenario, &mut |choices| {
            let assigned = choices.iter().filter(|c| c.is_some()).count() as u32;
            total = total.saturating_add(power.saturating_pow(assigned).saturating_mul(overlap));
            total <= cap
        });
        total
    }
}

fn levels(points: usize, top: f64) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![top],
        _ => (0..points)
            .map(|i| top * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Every capacity-feasible binary choice, in enumeration order.
pub fn assignments(scenario: &Scenario) -> Vec<Vec<Option<usize>>> {
    let mut out = Vec::new();
    for_each_assignment(scenario, &mut |c| {
        out.push(c.to_vec());
        true
    });
    out
}

/// Number of capacity-feasible choices, counting no further than `limit`.
pub fn count_assignments(scenario: &Scenario, limit: usize) -> usize {
    let mut count = 0;
    for_each_assignment(scenario, &mut |_| {
        count += 1;
        count < limit
    });
    count
}

/// Calls `visit` on every capacity-feasible choice of at most one subband
/// per UE (every UE served when the QoS target is positive). Stops early
/// when `visit` returns false.
fn for_each_assignment(scenario: &Scenario, visit: &mut dyn FnMut(&[Option<usize>]) -> bool) {
    let must_serve = scenario.config.qos_rate_bps_hz > 0.0;
    let mut load = vec![0usize; scenario.num_aps() * scenario.num_subbands()];
    let mut choices = vec![None; scenario.num_ues()];
    recurse(scenario, must_serve, 0, &mut load, &mut choices, visit);
}

fn recurse(
    scenario: &Scenario,
    must_serve: bool,
    ue: usize,
    load: &mut [usize],
    choices: &mut [Option<usize>],
    visit: &mut dyn FnMut(&[Option<usize>]) -> bool,
) -> bool {
    if ue == choices.len() {
        return visit(choices);
    }
    let n_sub = scenario.num_subbands();
    let ap = scenario.home_ap(ue);
    if !must_serve {
        choices[ue] = None;
        if !recurse(scenario, must_serve, ue + 1, load, choices, visit) {
            return false;
        }
    }
    for n in 0..n_sub {
        if load[ap * n_sub + n] < scenario.config.cluster_capacity[ap][n] {
            load[ap * n_sub + n] += 1;
            choices[ue] = Some(n);
            let go_on = recurse(scenario, must_serve, ue + 1, load, choices, visit);
            load[ap * n_sub + n] -= 1;
            if !go_on {
                return false;
            }
        }
    }
    choices[ue] = None;
    true
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleObjective {
    /// Largest SE meeting QoS.
    SumRateMax,
    /// Least SP meeting QoS.
    SumPowerMin,
    /// Least `lambda = max(0, omega (U1* - SE), (1 - omega)(SP - U2*))` meeting QoS.
    Tchebycheff(ScalarizationConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub assignment: Assignment,
    pub powers: PowerAllocation,
    pub overlap: OverlapProfile,
    /// SE for sum-rate search, SP for power search, `lambda` for Tchebycheff.
    pub value: f64,
    pub metrics: Metrics,
    pub evaluated: u64,
}

fn meets_qos(scenario: &Scenario, metrics: &Metrics) -> bool {
    let need = scenario.config.qos_rate_bps_hz;
    if need <= 0.0 {
        return true;
    }
    let reference = scenario.config.qos_reference_hz();
    (0..scenario.num_ues()).all(|m| {
        let served: f64 = (0..scenario.num_subbands())
            .map(|n| metrics.rate(m, n))
            .sum();
        need - served / reference <= 1e-9
    })
}

fn overlap_profile(scenario: &Scenario, mode: OverlapMode, values: &[f64]) -> OverlapProfile {
    let (k_aps, n_sub) = (scenario.num_aps(), scenario.num_subbands());
    let edges = n_sub - 1;
    match mode {
        OverlapMode::Disabled => OverlapProfile::zero(k_aps, n_sub),
        OverlapMode::Shared => OverlapProfile::uniform(k_aps, n_sub, values[0]),
        OverlapMode::PerSubband => {
            let mut ov = OverlapProfile::zero(k_aps, n_sub);
            for (i, v) in values.iter().enumerate() {
                ov.set_right(i / edges, i % edges, *v);
            }
            ov
        }
        OverlapMode::PerSubbandAsymmetric => {
            let mut ov = OverlapProfile::asymmetric(k_aps, n_sub);
            let half = k_aps * edges;
            for (i, v) in values[..half].iter().enumerate() {
                ov.set_right(i / edges, i % edges, *v);
            }
            for (i, v) in values[half..].iter().enumerate() {
                ov.set_left(i / edges, i % edges + 1, *v);
            }
            ov
        }
    }
}

/// Steps an odometer of `digits` each in `0..base`; false once it wraps.
fn advance(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Global optimum of `objective` over the grid. Ties keep the first point
/// in enumeration order, which is lexicographic in (assignment, powers,
/// overlap) indices. `Ok(None)` when no grid point meets QoS.
pub fn exhaustive_best(
    scenario: &Scenario,
    grid: &GridSpec,
    objective: &OracleObjective,
) -> Result<Option<OracleResult>> {
    let points = grid.size(scenario);
    if points > grid.cap as u128 {
        return Err(Error::GridTooLarge {
            points,
            cap: grid.cap,
        });
    }
    let n_sub = scenario.num_subbands();
    let m_ues = scenario.num_ues();
    let p_levels = grid.power_levels(scenario.config.max_tx_power_w);
    let d_levels = grid.overlap_levels();
    let n_vars = grid.overlap_mode.num_variables(scenario.num_aps(), n_sub);

    let mut best: Option<OracleResult> = None;
    let mut evaluated = 0u64;
    let score = |metrics: &Metrics| -> f64 {
        match objective {
            OracleObjective::SumRateMax => -metrics.spectral_efficiency,
            OracleObjective::SumPowerMin => metrics.sum_power_w,
            OracleObjective::Tchebycheff(cfg) => tchebycheff_lambda(cfg, metrics),
        }
    };

    for_each_assignment(scenario, &mut |choices| {
        let assignment = Assignment::from_choices(n_sub, choices);
        let served: Vec<usize> = (0..m_ues).filter(|&m| choices[m].is_some()).collect();
        let mut p_idx = vec![0usize; served.len()];
        loop {
            let mut powers = PowerAllocation::zeros(m_ues, n_sub);
            for (slot, &m) in served.iter().enumerate() {
                powers.set(m, choices[m].unwrap(), p_levels[p_idx[slot]]);
            }
            let mut d_idx = vec![0usize; n_vars];
            loop {
                let values: Vec<f64> = d_idx.iter().map(|&i| d_levels[i]).collect();
                let overlap = overlap_profile(scenario, grid.overlap_mode, &values);
                let metrics = recompute_metrics(scenario, &assignment, &powers, &overlap)
                    .expect("shapes match");
                evaluated += 1;
                if meets_qos(scenario, &metrics) {
                    let s = score(&metrics);
                    if best.as_ref().is_none_or(|b| s < score(&b.metrics)) {
                        best = Some(OracleResult {
                            assignment: assignment.clone(),
                            powers: powers.clone(),
                            overlap,
                            value: 0.0,
                            metrics,
                            evaluated: 0,
                        });
                    }
                }
                if !advance(&mut d_idx, d_levels.len()) {
                    break;
                }
            }
            if !advance(&mut p_idx, p_levels.len()) {
                break;
            }
        }
        true
    });

    Ok(best.map(|mut b| {
        b.value = match objective {
            OracleObjective::SumRateMax => b.metrics.spectral_efficiency,
            OracleObjective::SumPowerMin => b.metrics.sum_power_w,
            OracleObjective::Tchebycheff(cfg) => tchebycheff_lambda(cfg, &b.metrics),
        };
        b.evaluated = evaluated;
        b
    }))
}

/// Smallest admissible `lambda` for given metrics.
pub fn tchebycheff_lambda(config: &ScalarizationConfig, metrics: &Metrics) -> f64 {
    let w = config.weight;
    let se_gap = w * (config.utopia.spectral_efficiency - metrics.spectral_efficiency);
    let sp_gap = (1.0 - w) * (metrics.sum_power_w - config.utopia.sum_power_w);
    se_gap.max(sp_gap).max(0.0)
}
