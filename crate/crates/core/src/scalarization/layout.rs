//! Flat decision vectors `(rho, p~, delta, lambda)` and their index map.

use serde::{Deserialize, Serialize};

use crate::network::Scenario;
use crate::rates::{Assignment, OverlapProfile, PowerAllocation, RelaxationMode};

/// How the overlap fractions are parametrized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    /// One `delta^r_{n,k}` per edge and AP, with `delta^l_{n+1,k} = delta^r_{n,k}`.
    PerSubband,
    /// Independent `delta^r_{n,k}` and `delta^l_{n,k}`.
    PerSubbandAsymmetric,
    /// A single `delta` shared by every edge and AP.
    Shared,
    /// No overlap.
    Disabled,
}

impl OverlapMode {
    pub fn num_variables(&self, num_aps: usize, num_subbands: usize) -> usize {
        let edges = num_aps * (num_subbands - 1);
        match self {
            Self::PerSubband => edges,
            Self::PerSubbandAsymmetric => 2 * edges,
            Self::Shared => 1,
            Self::Disabled => 0,
        }
    }
}

/// Where one `rho` or `p~` entry lives: a decision coordinate or a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Free(usize),
    Fixed(f64),
}

impl Slot {
    fn read(&self, x: &[f64]) -> f64 {
        match *self {
            Slot::Free(i) => x[i],
            Slot::Fixed(v) => v,
        }
    }
}

/// A decoded decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub assignment: Assignment,
    pub powers: PowerAllocation,
    pub overlap: OverlapProfile,
    pub lambda: f64,
}

/// Index map of a decision vector. Coordinates are laid out as free `rho`
/// entries, free `p~` entries, overlap variables, then `lambda` (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionLayout {
    num_ues: usize,
    num_subbands: usize,
    num_aps: usize,
    rho: Vec<Slot>,
    power: Vec<Slot>,
    overlap_mode: OverlapMode,
    overlap_offset: usize,
    lambda: Option<usize>,
    upper: Vec<f64>,
}

impl DecisionLayout {
    /// Every `rho` and `p~` entry free.
    pub fn relaxed(
        scenario: &Scenario,
        overlap_mode: OverlapMode,
        lambda_bound: Option<f64>,
    ) -> Self {
        let entries = scenario.num_ues() * scenario.num_subbands();
        let rho = (0..entries).map(Slot::Free).collect();
        let power = (0..entries).map(|i| Slot::Free(entries + i)).collect();
        Self::build(
            scenario,
            rho,
            power,
            2 * entries,
            overlap_mode,
            lambda_bound,
        )
    }

    /// `rho` pinned to a binary assignment; `p~` free only where `rho = 1`.
    pub fn pinned(
        scenario: &Scenario,
        assignment: &Assignment,
        overlap_mode: OverlapMode,
        lambda_bound: Option<f64>,
    ) -> Self {
        let rho: Vec<Slot> = assignment
            .values()
            .iter()
            .map(|&r| Slot::Fixed(r))
            .collect();
        let mut next = 0;
        let power = assignment
            .values()
            .iter()
            .map(|&r| {
                if r > 0.0 {
                    next += 1;
                    Slot::Free(next - 1)
                } else {
                    Slot::Fixed(0.0)
                }
            })
            .collect();
        Self::build(scenario, rho, power, next, overlap_mode, lambda_bound)
    }

    fn build(
        scenario: &Scenario,
        rho: Vec<Slot>,
        power: Vec<Slot>,
        overlap_offset: usize,
        overlap_mode: OverlapMode,
        lambda_bound: Option<f64>,
    ) -> Self {
        let (num_aps, num_subbands) = (scenario.num_aps(), scenario.num_subbands());
        let n_overlap = overlap_mode.num_variables(num_aps, num_subbands);
        let lambda = lambda_bound.map(|_| overlap_offset + n_overlap);
        let len = overlap_offset + n_overlap + usize::from(lambda.is_some());
        let mut upper = vec![0.0; len];
        for slot in &rho {
            if let Slot::Free(i) = slot {
                upper[*i] = 1.0;
            }
        }
        for slot in &power {
            if let Slot::Free(i) = slot {
                upper[*i] = scenario.config.max_tx_power_w;
            }
        }
        for u in &mut upper[overlap_offset..overlap_offset + n_overlap] {
            *u = 1.0;
        }
        if let (Some(i), Some(bound)) = (lambda, lambda_bound) {
            upper[i] = bound;
        }
        Self {
            num_ues: scenario.num_ues(),
            num_subbands,
            num_aps,
            rho,
            power,
            overlap_mode,
            overlap_offset,
            lambda,
            upper,
        }
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn overlap_mode(&self) -> OverlapMode {
        self.overlap_mode
    }

    pub fn lambda_index(&self) -> Option<usize> {
        self.lambda
    }

    pub fn num_entries(&self) -> usize {
        self.rho.len()
    }

    /// True when some `rho` entry is a decision coordinate.
    pub fn has_free_rho(&self) -> bool {
        self.rho.iter().any(|s| matches!(s, Slot::Free(_)))
    }

    pub fn rho_slot(&self, entry: usize) -> Slot {
        self.rho[entry]
    }

    pub fn power_slot(&self, entry: usize) -> Slot {
        self.power[entry]
    }

    pub fn rho_value(&self, x: &[f64], entry: usize) -> f64 {
        self.rho[entry].read(x)
    }

    pub fn power_value(&self, x: &[f64], entry: usize) -> f64 {
        self.power[entry].read(x)
    }

    pub fn lambda_value(&self, x: &[f64]) -> f64 {
        self.lambda.map_or(0.0, |i| x[i])
    }

    /// Indices of the overlap coordinates.
    pub fn overlap_range(&self) -> std::ops::Range<usize> {
        let n = self
            .overlap_mode
            .num_variables(self.num_aps, self.num_subbands);
        self.overlap_offset..self.overlap_offset + n
    }

    pub fn assignment(&self, x: &[f64]) -> Assignment {
        let rho = (0..self.rho.len()).map(|e| self.rho_value(x, e)).collect();
        let mut asg =
            Assignment::relaxed(self.num_ues, self.num_subbands, rho).expect("layout shape");
        if !self.has_free_rho() {
            asg.mode = RelaxationMode::Binary;
        }
        asg
    }

    pub fn powers(&self, x: &[f64]) -> PowerAllocation {
        PowerAllocation::from_values(
            self.num_subbands,
            (0..self.power.len())
                .map(|e| self.power_value(x, e))
                .collect(),
        )
    }

    pub fn overlap(&self, x: &[f64]) -> OverlapProfile {
        let (k_aps, n_sub) = (self.num_aps, self.num_subbands);
        let vars = &x[self.overlap_range()];
        let edges = n_sub - 1;
        match self.overlap_mode {
            OverlapMode::Disabled => OverlapProfile::zero(k_aps, n_sub),
            OverlapMode::Shared => OverlapProfile::uniform(k_aps, n_sub, vars[0]),
            OverlapMode::PerSubband => {
                let mut ov = OverlapProfile::zero(k_aps, n_sub);
                for k in 0..k_aps {
                    for n in 0..edges {
                        ov.set_right(k, n, vars[k * edges + n]);
                    }
                }
                ov
            }
            OverlapMode::PerSubbandAsymmetric => {
                let mut ov = OverlapProfile::asymmetric(k_aps, n_sub);
                for k in 0..k_aps {
                    for n in 0..edges {
                        ov.set_right(k, n, vars[k * edges + n]);
                        ov.set_left(k, n + 1, vars[k_aps * edges + k * edges + n]);
                    }
                }
                ov
            }
        }
    }

    pub fn decode(&self, x: &[f64]) -> Decision {
        Decision {
            assignment: self.assignment(x),
            powers: self.powers(x),
            overlap: self.overlap(x),
            lambda: self.lambda_value(x),
        }
    }

    /// Writes the free coordinates of a decision. Overlap values are read
    /// from the profile according to the layout's mode (for `Shared`, the
    /// first right fraction).
    pub fn encode(&self, decision: &Decision) -> Vec<f64> {
        let mut x = vec![0.0; self.len()];
        for (e, slot) in self.rho.iter().enumerate() {
            if let Slot::Free(i) = slot {
                x[*i] = decision.assignment.values()[e];
            }
        }
        for (e, slot) in self.power.iter().enumerate() {
            if let Slot::Free(i) = slot {
                x[*i] = decision.powers.values()[e];
            }
        }
        let (k_aps, edges) = (self.num_aps, self.num_subbands - 1);
        let off = self.overlap_offset;
        let ov = &decision.overlap;
        match self.overlap_mode {
            OverlapMode::Disabled => {}
            OverlapMode::Shared => x[off] = ov.right(0, 0),
            OverlapMode::PerSubband => {
                for k in 0..k_aps {
                    for n in 0..edges {
                        x[off + k * edges + n] = ov.right(k, n);
                    }
                }
            }
            OverlapMode::PerSubbandAsymmetric => {
                for k in 0..k_aps {
                    for n in 0..edges {
                        x[off + k * edges + n] = ov.right(k, n);
                        x[off + k_aps * edges + k * edges + n] = ov.left(k, n + 1);
                    }
                }
            }
        }
        if let Some(i) = self.lambda {
            x[i] = decision.lambda;
        }
        x
    }

    /// True when `0 <= x <= upper` coordinatewise (with a relative slack).
    pub fn in_box(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.upper)
            .all(|(v, u)| *v >= 0.0 && *v <= u * (1.0 + 1e-12))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::SystemConfig;

    fn desk() -> Scenario {
        Scenario::from_gains(SystemConfig::desk_scale(), |_, _, _| 1e-11).unwrap()
    }

    #[test]
    fn relaxed_layout_dimensions() {
        let s = desk();
        let l = DecisionLayout::relaxed(&s, OverlapMode::PerSubband, Some(3.0));
        assert_eq!(l.len(), 8 + 8 + 2 + 1);
        assert_eq!(l.upper()[0], 1.0);
        assert_eq!(l.upper()[8], 0.2);
        assert_eq!(l.upper()[18], 3.0);
        assert_eq!(
            DecisionLayout::relaxed(&s, OverlapMode::Shared, None).len(),
            17
        );
        assert_eq!(
            DecisionLayout::relaxed(&s, OverlapMode::PerSubbandAsymmetric, None).len(),
            20
        );
    }

    #[test]
    fn pinned_layout_frees_assigned_powers_only() {
        let s = desk();
        let asg = Assignment::from_choices(2, &[Some(0), Some(1), Some(0), None]);
        let l = DecisionLayout::pinned(&s, &asg, OverlapMode::Disabled, Some(1.0));
        assert_eq!(l.len(), 3 + 1);
        let d = l.decode(&[0.1, 0.2, 0.05, 0.5]);
        assert_eq!(d.powers.get(0, 0), 0.1);
        assert_eq!(d.powers.get(1, 1), 0.2);
        assert_eq!(d.powers.get(2, 0), 0.05);
        assert_eq!(d.powers.get(3, 0), 0.0);
        assert_eq!(d.assignment, asg);
        assert_eq!(d.lambda, 0.5);
    }

    #[test]
    fn encode_decode_round_trip() {
        let s = desk();
        for mode in [
            OverlapMode::PerSubband,
            OverlapMode::PerSubbandAsymmetric,
            OverlapMode::Shared,
        ] {
            let l = DecisionLayout::relaxed(&s, mode, Some(2.0));
            let x: Vec<f64> = l
                .upper()
                .iter()
                .enumerate()
                .map(|(i, u)| u * ((i as f64 * 0.37) % 1.0))
                .collect();
            assert_eq!(l.encode(&l.decode(&x)), x);
        }
    }

    #[test]
    fn shared_mode_sets_every_edge() {
        let s = Scenario::from_gains(SystemConfig::uniform(2, 2, 3, 2), |_, _, _| 1e-11).unwrap();
        let l = DecisionLayout::relaxed(&s, OverlapMode::Shared, None);
        let mut x = vec![0.0; l.len()];
        x[l.overlap_range().start] = 0.4;
        let ov = l.overlap(&x);
        for k in 0..2 {
            assert_eq!(ov.right(k, 0), 0.4);
            assert_eq!(ov.left(k, 2), 0.4);
            assert!((ov.bandwidth_factor(k, 1) - 1.8).abs() < 1e-15);
        }
    }
}
