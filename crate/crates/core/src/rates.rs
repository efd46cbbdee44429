//! Physical-layer quantities for a candidate decision: interference terms,
//! per-UE rates, network totals and the constraint set.
//!
//! Powers are the lifted per-subband powers `p~[ue][n]`, which already carry
//! the subband association (`p~ = rho * p` for a binary `rho`). Interference
//! is therefore computed from `p~` alone; `rho` masks rates and weights the
//! sum rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{decoding_order, Scenario};

/// Absolute slack used when declaring a constraint satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RelaxationMode {
    /// Entries must be 0 or 1.
    #[default]
    Binary,
    /// Entries may take any value in `[0, 1]`.
    Relaxed,
}

/// Subband association `rho[ue][n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    num_subbands: usize,
    rho: Vec<f64>,
    pub mode: RelaxationMode,
}

impl Assignment {
    pub fn zeros(num_ues: usize, num_subbands: usize) -> Self {
        Self {
            num_subbands,
            rho: vec![0.0; num_ues * num_subbands],
            mode: RelaxationMode::Binary,
        }
    }

    pub fn relaxed(num_ues: usize, num_subbands: usize, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != num_ues * num_subbands {
            return Err(Error::Shape(format!(
                "rho has {} entries, expected {}",
                rho.len(),
                num_ues * num_subbands
            )));
        }
        Ok(Self {
            num_subbands,
            rho,
            mode: RelaxationMode::Relaxed,
        })
    }

    /// Binary assignment from one optional subband per UE.
    pub fn from_choices(num_subbands: usize, choices: &[Option<usize>]) -> Self {
        let mut asg = Self::zeros(choices.len(), num_subbands);
        for (ue, choice) in choices.iter().enumerate() {
            if let Some(n) = choice {
                asg.set(ue, *n, 1.0);
            }
        }
        asg
    }

    pub fn num_ues(&self) -> usize {
        self.rho.len() / self.num_subbands.max(1)
    }

    pub fn num_subbands(&self) -> usize {
        self.num_subbands
    }

    pub fn get(&self, ue: usize, n: usize) -> f64 {
        self.rho[ue * self.num_subbands + n]
    }

    pub fn set(&mut self, ue: usize, n: usize, value: f64) {
        self.rho[ue * self.num_subbands + n] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    /// Subband of a UE under a binary assignment, if any.
    pub fn subband_of(&self, ue: usize) -> Option<usize> {
        (0..self.num_subbands).find(|&n| self.get(ue, n) >= 0.5)
    }

    /// Rounds every entry to the nearest of 0 and 1.
    pub fn rounded(&self) -> Self {
        Self {
            num_subbands: self.num_subbands,
            rho: self
                .rho
                .iter()
                .map(|r| if *r >= 0.5 { 1.0 } else { 0.0 })
                .collect(),
            mode: RelaxationMode::Binary,
        }
    }

    /// Largest distance of any entry from `{0, 1}`.
    pub fn integrality_gap(&self) -> f64 {
        self.rho
            .iter()
            .map(|r| r.min(1.0 - r).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Lifted per-subband transmit powers `p~[ue][n]` in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    num_subbands: usize,
    p_tilde: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(num_ues: usize, num_subbands: usize) -> Self {
        Self {
            num_subbands,
            p_tilde: vec![0.0; num_ues * num_subbands],
        }
    }

    pub fn from_values(num_subbands: usize, p_tilde: Vec<f64>) -> Self {
        Self {
            num_subbands,
            p_tilde,
        }
    }

    pub fn get(&self, ue: usize, n: usize) -> f64 {
        self.p_tilde[ue * self.num_subbands + n]
    }

    pub fn set(&mut self, ue: usize, n: usize, value: f64) {
        self.p_tilde[ue * self.num_subbands + n] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.p_tilde
    }

    pub fn num_ues(&self) -> usize {
        self.p_tilde.len() / self.num_subbands.max(1)
    }

    /// Total transmit power of one UE, `p = sum_n p~`.
    pub fn ue_total(&self, ue: usize) -> f64 {
        self.p_tilde[ue * self.num_subbands..(ue + 1) * self.num_subbands]
            .iter()
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.p_tilde.iter().sum()
    }
}

/// Right/left overlap fractions of every subband at every AP.
///
/// `right(k, N-1)` and `left(k, 0)` are always zero. In symmetric mode the
/// left overlap of subband `n + 1` equals the right overlap of subband `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapProfile {
    num_aps: usize,
    num_subbands: usize,
    right: Vec<f64>,
    left: Vec<f64>,
    symmetric: bool,
}

impl OverlapProfile {
    pub fn zero(num_aps: usize, num_subbands: usize) -> Self {
        Self {
            num_aps,
            num_subbands,
            right: vec![0.0; num_aps * num_subbands],
            left: vec![0.0; num_aps * num_subbands],
            symmetric: true,
        }
    }

    /// One shared overlap `delta` on every existing edge.
    pub fn uniform(num_aps: usize, num_subbands: usize, delta: f64) -> Self {
        let mut ov = Self::zero(num_aps, num_subbands);
        for k in 0..num_aps {
            for n in 0..num_subbands - 1 {
                ov.set_right(k, n, delta);
            }
        }
        ov
    }

    /// Independent left/right fractions (no symmetry tie).
    pub fn asymmetric(num_aps: usize, num_subbands: usize) -> Self {
        Self {
            symmetric: false,
            ..Self::zero(num_aps, num_subbands)
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_subbands(&self) -> usize {
        self.num_subbands
    }

    /// Sets `delta^r_{n,k}`. Ignored for the last subband.
    pub fn set_right(&mut self, ap: usize, n: usize, value: f64) {
        if n + 1 < self.num_subbands {
            self.right[ap * self.num_subbands + n] = value;
        }
    }

    /// Sets `delta^l_{n,k}`. In symmetric mode this writes `delta^r_{n-1,k}`.
    /// Ignored for the first subband.
    pub fn set_left(&mut self, ap: usize, n: usize, value: f64) {
        if n == 0 {
            return;
        }
        if self.symmetric {
            self.set_right(ap, n - 1, value);
        } else {
            self.left[ap * self.num_subbands + n] = value;
        }
    }

    pub fn right(&self, ap: usize, n: usize) -> f64 {
        if n + 1 >= self.num_subbands {
            0.0
        } else {
            self.right[ap * self.num_subbands + n]
        }
    }

    pub fn left(&self, ap: usize, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else if self.symmetric {
            self.right(ap, n - 1)
        } else {
            self.left[ap * self.num_subbands + n]
        }
    }

    /// `B_n / B = 1 + delta^r + delta^l`.
    pub fn bandwidth_factor(&self, ap: usize, n: usize) -> f64 {
        1.0 + self.right(ap, n) + self.left(ap, n)
    }

    /// Weight of the partial interference that subband `n + 1` of AP `ap`
    /// leaks into subband `n`: `(sqrt(delta^l_{n+1}) + sqrt(delta^r_n))^2`.
    pub fn upper_leak_weight(&self, ap: usize, n: usize) -> f64 {
        (self.left(ap, n + 1).sqrt() + self.right(ap, n).sqrt()).powi(2)
    }

    /// Weight of the leak from subband `n - 1` into `n`:
    /// `(sqrt(delta^l_n) + sqrt(delta^r_{n-1}))^2`.
    pub fn lower_leak_weight(&self, ap: usize, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        (self.left(ap, n).sqrt() + self.right(ap, n - 1).sqrt()).powi(2)
    }

    /// Every stored fraction within `[0, 1]`.
    pub fn in_bounds(&self) -> bool {
        self.right
            .iter()
            .chain(&self.left)
            .all(|d| (0.0..=1.0).contains(d))
    }

    pub fn max_violation(&self) -> f64 {
        self.right
            .iter()
            .chain(&self.left)
            .map(|d| (d - 1.0).max(-d).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Denominator terms of the SINR of one UE on one subband, in watts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InterferenceTerms {
    pub intra: f64,
    pub inter: f64,
    pub partial: f64,
    pub noise: f64,
}

impl InterferenceTerms {
    pub fn total(&self) -> f64 {
        self.intra + self.inter + self.partial + self.noise
    }
}

/// Precomputed decoding ranks for fast repeated evaluation on one scenario.
#[derive(Debug, Clone)]
pub struct RateModel<'a> {
    scenario: &'a Scenario,
    /// `orders[ap * N + n]`: all UEs of `ap`, strongest own-gain first.
    orders: Vec<Vec<usize>>,
}

impl<'a> RateModel<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let n_sub = scenario.num_subbands();
        let mut orders = Vec::with_capacity(scenario.num_aps() * n_sub);
        for ap in 0..scenario.num_aps() {
            for n in 0..n_sub {
                orders.push(decoding_order(scenario, ap, n, scenario.ues_of(ap)));
            }
        }
        Self { scenario, orders }
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    /// Interference terms for every `(ue, n)`, flattened as `ue * N + n`.
    pub fn all_terms(
        &self,
        powers: &PowerAllocation,
        overlap: &OverlapProfile,
    ) -> Vec<InterferenceTerms> {
        let s = self.scenario;
        let n_sub = s.num_subbands();
        let k_aps = s.num_aps();
        let num_ues = s.num_ues();
        let mut out = vec![InterferenceTerms::default(); num_ues * n_sub];

        // Received power of every UE at every AP on every subband.
        let rx = |ue: usize, ap: usize, n: usize| powers.get(ue, n) * s.gain(ue, ap, n);

        for ap in 0..k_aps {
            for n in 0..n_sub {
                // Aggregate received power per transmitting AP on subbands n, n±1.
                let mut same = vec![0.0; k_aps];
                let mut upper = vec![0.0; k_aps];
                let mut lower = vec![0.0; k_aps];
                for ue in 0..num_ues {
                    let src = s.home_ap(ue);
                    same[src] += rx(ue, ap, n);
                    if n + 1 < n_sub {
                        upper[src] += rx(ue, ap, n + 1);
                    }
                    if n > 0 {
                        lower[src] += rx(ue, ap, n - 1);
                    }
                }
                let inter: f64 = (0..k_aps).filter(|&k| k != ap).map(|k| same[k]).sum();
                let partial: f64 = (0..k_aps)
                    .map(|k| {
                        let mut leak = 0.0;
                        if n + 1 < n_sub {
                            leak += overlap.upper_leak_weight(k, n) * upper[k];
                        }
                        if n > 0 {
                            leak += overlap.lower_leak_weight(k, n) * lower[k];
                        }
                        leak
                    })
                    .sum();
                let noise = s.noise_power_w * overlap.bandwidth_factor(ap, n);

                let mut after = 0.0;
                for &ue in self.orders[ap * n_sub + n].iter().rev() {
                    out[ue * n_sub + n] = InterferenceTerms {
                        intra: after,
                        inter,
                        partial,
                        noise,
                    };
                    after += rx(ue, ap, n);
                }
            }
        }
        out
    }

    /// Per-`(ue, n)` rates in bps, masked by `rho > 0`.
    pub fn rates(
        &self,
        assignment: &Assignment,
        powers: &PowerAllocation,
        overlap: &OverlapProfile,
    ) -> Vec<f64> {
        let s = self.scenario;
        let n_sub = s.num_subbands();
        let b = s.subband_bandwidth_hz();
        let terms = self.all_terms(powers, overlap);
        let mut rates = vec![0.0; terms.len()];
        for ue in 0..s.num_ues() {
            let ap = s.home_ap(ue);
            for n in 0..n_sub {
                if assignment.get(ue, n) > 0.0 {
                    let sinr =
                        powers.get(ue, n) * s.own_gain(ue, n) / terms[ue * n_sub + n].total();
                    rates[ue * n_sub + n] =
                        b * overlap.bandwidth_factor(ap, n) * (1.0 + sinr).log2();
                }
            }
        }
        rates
    }

    pub fn metrics(
        &self,
        assignment: &Assignment,
        powers: &PowerAllocation,
        overlap: &OverlapProfile,
    ) -> Metrics {
        let s = self.scenario;
        let per_ue_rate = self.rates(assignment, powers, overlap);
        let sum_rate_bps: f64 = per_ue_rate
            .iter()
            .zip(assignment.values())
            .map(|(r, rho)| rho * r)
            .sum();
        let sum_power_w = powers.total();
        let circuit_power_w = s.total_circuit_power_w();
        Metrics {
            num_subbands: s.num_subbands(),
            per_ue_rate,
            sum_rate_bps,
            spectral_efficiency: sum_rate_bps / s.config.total_bandwidth_hz,
            sum_power_w,
            circuit_power_w,
            energy_efficiency: sum_rate_bps / (sum_power_w + circuit_power_w),
        }
    }

    pub fn check_constraints(
        &self,
        assignment: &Assignment,
        powers: &PowerAllocation,
        overlap: &OverlapProfile,
    ) -> ConstraintReport {
        let s = self.scenario;
        let cfg = &s.config;
        let n_sub = s.num_subbands();
        let rates = self.rates(assignment, powers, overlap);

        let mut qos: f64 = 0.0;
        let mut single: f64 = 0.0;
        let mut power: f64 = 0.0;
        let mut integrality: f64 = 0.0;
        for ue in 0..s.num_ues() {
            let served: f64 = (0..n_sub)
                .map(|n| assignment.get(ue, n) * rates[ue * n_sub + n])
                .sum();
            qos = qos.max(cfg.qos_rate_bps_hz - served / cfg.qos_reference_hz());
            single = single.max((0..n_sub).map(|n| assignment.get(ue, n)).sum::<f64>() - 1.0);
            for n in 0..n_sub {
                let rho = assignment.get(ue, n);
                let p = powers.get(ue, n);
                power = power.max(p - rho * cfg.max_tx_power_w).max(-p);
                integrality = integrality.max(match assignment.mode {
                    RelaxationMode::Binary => rho.abs().min((rho - 1.0).abs()),
                    RelaxationMode::Relaxed => (rho - 1.0).max(-rho),
                });
            }
        }
        let mut capacity: f64 = 0.0;
        for ap in 0..s.num_aps() {
            for n in 0..n_sub {
                let load: f64 = s.ues_of(ap).map(|ue| assignment.get(ue, n)).sum();
                capacity = capacity.max(load - cfg.cluster_capacity[ap][n] as f64);
            }
        }
        let (mut left, mut right): (f64, f64) = (0.0, 0.0);
        for ap in 0..s.num_aps() {
            for n in 0..n_sub {
                let bound = |d: f64| (d - 1.0).max(-d);
                left = left.max(bound(overlap.left(ap, n)));
                right = right.max(bound(overlap.right(ap, n)));
            }
        }

        let checks = [
            (Constraint::Qos, qos),
            (Constraint::OverlapLeft, left),
            (Constraint::OverlapRight, right),
            (Constraint::ClusterCapacity, capacity),
            (Constraint::SingleSubband, single),
            (Constraint::PowerCap, power),
            (Constraint::Integrality, integrality),
        ]
        .into_iter()
        .map(|(constraint, v)| {
            let violation = v.max(0.0);
            ConstraintCheck {
                constraint,
                violation,
                satisfied: violation <= FEASIBILITY_TOL,
            }
        })
        .collect();
        ConstraintReport { checks }
    }
}

/// Network-level outcome of one decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    num_subbands: usize,
    /// Rate of every `(ue, n)` pair in bps, `ue * N + n`.
    pub per_ue_rate: Vec<f64>,
    pub sum_rate_bps: f64,
    /// `SR / W` in bps/Hz.
    pub spectral_efficiency: f64,
    pub sum_power_w: f64,
    pub circuit_power_w: f64,
    /// Bits per joule.
    pub energy_efficiency: f64,
}

impl Metrics {
    /// Aggregates per-`(ue, n)` rates (already weighted by `rho`) and powers.
    pub fn from_rates(
        num_subbands: usize,
        per_ue_rate: Vec<f64>,
        sum_rate_bps: f64,
        total_bandwidth_hz: f64,
        sum_power_w: f64,
        circuit_power_w: f64,
    ) -> Self {
        Self {
            num_subbands,
            per_ue_rate,
            sum_rate_bps,
            spectral_efficiency: sum_rate_bps / total_bandwidth_hz,
            sum_power_w,
            circuit_power_w,
            energy_efficiency: sum_rate_bps / (sum_power_w + circuit_power_w),
        }
    }

    pub fn rate(&self, ue: usize, n: usize) -> f64 {
        self.per_ue_rate[ue * self.num_subbands + n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// C1: per-UE minimum rate.
    Qos,
    /// C2: `0 <= delta^l <= 1`.
    OverlapLeft,
    /// C3: `0 <= delta^r <= 1`.
    OverlapRight,
    /// C4: cluster size per `(subband, AP)`.
    ClusterCapacity,
    /// C5: at most one subband per UE.
    SingleSubband,
    /// C6: `0 <= p~ <= rho * P_max`.
    PowerCap,
    /// C7: binary (or unit-interval, when relaxed) association.
    Integrality,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub constraint: Constraint,
    /// Worst violation over all instances of this constraint, in its natural unit.
    pub violation: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn feasible(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn get(&self, constraint: Constraint) -> &ConstraintCheck {
        self.checks
            .iter()
            .find(|c| c.constraint == constraint)
            .expect("every constraint is reported")
    }
}

fn check_indices(scenario: &Scenario, ue: usize, n: usize) -> Result<()> {
    if ue >= scenario.num_ues() || n >= scenario.num_subbands() {
        return Err(Error::IndexOutOfRange(format!(
            "(ue {ue}, subband {n}) with {} UEs and {} subbands",
            scenario.num_ues(),
            scenario.num_subbands()
        )));
    }
    Ok(())
}

fn check_shapes(
    scenario: &Scenario,
    assignment: &Assignment,
    powers: &PowerAllocation,
    overlap: &OverlapProfile,
) -> Result<()> {
    let (m, n, k) = (
        scenario.num_ues(),
        scenario.num_subbands(),
        scenario.num_aps(),
    );
    if assignment.num_ues() != m || assignment.num_subbands() != n {
        return Err(Error::Shape("assignment does not match scenario".into()));
    }
    if powers.num_ues() != m || powers.values().len() != m * n {
        return Err(Error::Shape(
            "power allocation does not match scenario".into(),
        ));
    }
    if overlap.num_aps() != k || overlap.num_subbands() != n {
        return Err(Error::Shape(
            "overlap profile does not match scenario".into(),
        ));
    }
    Ok(())
}

/// The four SINR denominator terms seen by `ue` on subband `n`.
pub fn interference_terms(
    scenario: &Scenario,
    assignment: &Assignment,
    powers: &PowerAllocation,
    overlap: &OverlapProfile,
    ue: usize,
    n: usize,
) -> Result<InterferenceTerms> {
    check_indices(scenario, ue, n)?;
    check_shapes(scenario, assignment, powers, overlap)?;
    Ok(RateModel::new(scenario).all_terms(powers, overlap)[ue * scenario.num_subbands() + n])
}

/// Achievable rate of `ue` on subband `n` in bps (zero when unassigned).
pub fn ue_rate(
    scenario: &Scenario,
    assignment: &Assignment,
    powers: &PowerAllocation,
    overlap: &OverlapProfile,
    ue: usize,
    n: usize,
) -> Result<f64> {
    check_indices(scenario, ue, n)?;
    check_shapes(scenario, assignment, powers, overlap)?;
    Ok(RateModel::new(scenario).rates(assignment, powers, overlap)
        [ue * scenario.num_subbands() + n])
}

pub fn network_metrics(
    scenario: &Scenario,
    assignment: &Assignment,
    powers: &PowerAllocation,
    overlap: &OverlapProfile,
) -> Result<Metrics> {
    check_shapes(scenario, assignment, powers, overlap)?;
    Ok(RateModel::new(scenario).metrics(assignment, powers, overlap))
}

pub fn check_constraints(
    scenario: &Scenario,
    assignment: &Assignment,
    powers: &PowerAllocation,
    overlap: &OverlapProfile,
) -> Result<ConstraintReport> {
    check_shapes(scenario, assignment, powers, overlap)?;
    Ok(RateModel::new(scenario).check_constraints(assignment, powers, overlap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::SystemConfig;

    fn flat(gain: f64) -> Scenario {
        Scenario::from_gains(SystemConfig::tiny(), |_, _, _| gain).unwrap()
    }

    #[test]
    fn zero_overlap_has_no_partial_term() {
        let s = flat(1e-10);
        let asg = Assignment::from_choices(2, &[Some(0), Some(1)]);
        let pw = PowerAllocation::from_values(2, vec![0.1, 0.0, 0.0, 0.2]);
        let t = interference_terms(&s, &asg, &pw, &OverlapProfile::zero(1, 2), 0, 0).unwrap();
        assert_eq!(t.partial, 0.0);
        assert_eq!(t.noise, s.noise_power_w);
    }

    #[test]
    fn symmetric_leak_weight_is_four_delta() {
        let ov = OverlapProfile::uniform(1, 3, 0.3);
        assert!((ov.upper_leak_weight(0, 0) - 1.2).abs() < 1e-15);
        assert!((ov.lower_leak_weight(0, 2) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn lone_ue_rate_is_shannon() {
        let s = flat(1e-10);
        let sigma = s.noise_power_w;
        let asg = Assignment::from_choices(2, &[Some(0), None]);
        let mut pw = PowerAllocation::zeros(2, 2);
        pw.set(0, 0, sigma / 1e-10);
        let t = interference_terms(&s, &asg, &pw, &OverlapProfile::zero(1, 2), 0, 0).unwrap();
        assert_eq!(t.intra + t.inter + t.partial, 0.0);
        let r = ue_rate(&s, &asg, &pw, &OverlapProfile::zero(1, 2), 0, 0).unwrap();
        assert!((r - 180e3).abs() < 1e-6);
    }

    #[test]
    fn full_overlap_triples_bandwidth() {
        let mut ov = OverlapProfile::asymmetric(1, 3);
        ov.set_right(0, 1, 1.0);
        ov.set_left(0, 1, 1.0);
        assert_eq!(ov.bandwidth_factor(0, 1), 3.0);
        assert_eq!(180e3 * ov.bandwidth_factor(0, 1), 3.0 * 180e3);
    }

    #[test]
    fn edge_fractions_are_zero() {
        let mut ov = OverlapProfile::asymmetric(1, 2);
        ov.set_right(0, 1, 0.7);
        ov.set_left(0, 0, 0.7);
        assert_eq!(ov.right(0, 1), 0.0);
        assert_eq!(ov.left(0, 0), 0.0);
        assert_eq!(ov.lower_leak_weight(0, 0), 0.0);
    }

    #[test]
    fn zero_power_metrics() {
        let s = Scenario::from_gains(SystemConfig::paper_scale(), |_, _, _| 1e-11).unwrap();
        let asg = Assignment::from_choices(4, &[Some(0); 12]);
        let m = network_metrics(
            &s,
            &asg,
            &PowerAllocation::zeros(12, 4),
            &OverlapProfile::zero(2, 4),
        )
        .unwrap();
        assert_eq!(m.sum_rate_bps, 0.0);
        assert_eq!(m.energy_efficiency, 0.0);
        assert_eq!(m.sum_power_w, 0.0);
        assert!((m.circuit_power_w - 12.0 * 0.03).abs() < 1e-15);
    }

    #[test]
    fn zero_power_violates_qos() {
        let s = flat(1e-10);
        let asg = Assignment::from_choices(2, &[Some(0), Some(1)]);
        let r = check_constraints(
            &s,
            &asg,
            &PowerAllocation::zeros(2, 2),
            &OverlapProfile::zero(1, 2),
        )
        .unwrap();
        assert!(!r.get(Constraint::Qos).satisfied);
        assert!((r.get(Constraint::Qos).violation - 0.1).abs() < 1e-12);
        assert!(!r.feasible());
    }

    #[test]
    fn double_association_violates_single_subband() {
        let s = flat(1e-10);
        let mut asg = Assignment::zeros(2, 2);
        asg.set(0, 0, 1.0);
        asg.set(0, 1, 1.0);
        let r = check_constraints(
            &s,
            &asg,
            &PowerAllocation::zeros(2, 2),
            &OverlapProfile::zero(1, 2),
        )
        .unwrap();
        assert!((r.get(Constraint::SingleSubband).violation - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fractional_rho_flags_integrality_only_in_binary_mode() {
        let s = flat(1e-10);
        let rho = vec![0.5, 0.0, 0.0, 0.0];
        let relaxed = Assignment::relaxed(2, 2, rho.clone()).unwrap();
        let mut binary = relaxed.clone();
        binary.mode = RelaxationMode::Binary;
        let (pw, ov) = (PowerAllocation::zeros(2, 2), OverlapProfile::zero(1, 2));
        assert!(
            check_constraints(&s, &relaxed, &pw, &ov)
                .unwrap()
                .get(Constraint::Integrality)
                .satisfied
        );
        let r = check_constraints(&s, &binary, &pw, &ov).unwrap();
        assert!((r.get(Constraint::Integrality).violation - 0.5).abs() < 1e-15);
    }

    #[test]
    fn power_above_rho_cap_is_flagged() {
        let s = flat(1e-10);
        let asg = Assignment::from_choices(2, &[Some(0), None]);
        let pw = PowerAllocation::from_values(2, vec![0.1, 0.05, 0.0, 0.0]);
        let r = check_constraints(&s, &asg, &pw, &OverlapProfile::zero(1, 2)).unwrap();
        assert!((r.get(Constraint::PowerCap).violation - 0.05).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_index() {
        let s = flat(1e-10);
        let asg = Assignment::zeros(2, 2);
        let err = interference_terms(
            &s,
            &asg,
            &PowerAllocation::zeros(2, 2),
            &OverlapProfile::zero(1, 2),
            2,
            0,
        );
        assert!(matches!(err, Err(Error::IndexOutOfRange(_))));
    }
}
