//! Lifting of the penalized problem to canonical monotonic form.
//!
//! Each difference constraint `q+(x) - q-(x) >= 0` gets an auxiliary `s` with
//! `s + q-(x) <= q-(b)` (normal part) and `q+(x) + s >= q-(b)` (co-normal
//! part). The objective difference `f+ - f-` becomes `f+(x) + t` with
//! `t + f-(x) <= f-(b)`, so lifted objective values exceed the penalized
//! ones by the constant `f-(b)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::dif::{DifFunctions, DifValues};
use super::layout::{DecisionLayout, Slot};
use super::ScalarizationConfig;
use crate::network::Scenario;
use crate::polyblock::DifProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    /// Minimize `lambda` against both utopia deviations.
    Tchebycheff,
    /// Maximize lifted SE subject to QoS (no `lambda` coordinate).
    SumRate,
}

/// Decision coordinates followed by the auxiliaries. Groups that cannot
/// bind on the instance are omitted: `w` (SE deviation) when `omega = 0`,
/// `u` (SP deviation) when `omega = 1`, `l` (QoS) when the QoS target is
/// zero, `v` (power cap) when every `rho` is pinned.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedLayout {
    pub decision: DecisionLayout,
    pub t: usize,
    pub w: Option<usize>,
    pub l: Option<usize>,
    pub u: Option<usize>,
    pub v: Option<usize>,
    upper: Vec<f64>,
}

impl LiftedLayout {
    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn decision_part<'x>(&self, x: &'x [f64]) -> &'x [f64] {
        &x[..self.decision.len()]
    }
}

/// `q-` values at the top corner of the decision box.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bounds {
    objective: f64,
    se: f64,
    qos: f64,
    power: f64,
    cap: f64,
}

struct Inner<'a> {
    dif: DifFunctions<'a>,
    kind: ProblemKind,
    layout: LiftedLayout,
    bounds: Bounds,
}

/// The lifted problem with its oracles; cheap to clone.
#[derive(Clone)]
pub struct LiftedProblem<'a> {
    inner: Arc<Inner<'a>>,
}

const COMPASS_MAX_SWEEPS: usize = 400;
/// Random poll directions per coordinate after a failed axis sweep.
const COMPASS_RANDOM_FACTOR: usize = 16;
const COMPASS_SEED: u64 = 0x5eed;
/// Compass search stops once every step is below this fraction of its range.
const COMPASS_MIN_STEP: f64 = 1e-6;

fn slack(rhs: f64) -> f64 {
    1e-12 * rhs.abs().max(1.0)
}

impl<'a> Inner<'a> {
    fn objective_minus(&self, v: &DifValues) -> f64 {
        match self.kind {
            ProblemKind::Tchebycheff => v.q0_minus,
            ProblemKind::SumRate => v.q0_minus + v.interference_log_sum,
        }
    }

    fn objective_plus(&self, v: &DifValues) -> f64 {
        match self.kind {
            ProblemKind::Tchebycheff => v.q0_plus,
            ProblemKind::SumRate => v.q0_plus + v.signal_log_sum,
        }
    }

    /// `(index, q-, bound, q+)` of every included difference constraint.
    fn groups(&self, v: &DifValues) -> [(Option<usize>, f64, f64, f64); 4] {
        let (l, b) = (&self.layout, &self.bounds);
        [
            (l.w, v.q1_minus, b.se, v.q1_plus),
            (l.l, v.q2_minus, b.qos, v.q2_plus),
            (l.u, v.q3_minus, b.power, v.q3_plus),
            (l.v, v.q4_minus, b.cap, v.q4_plus),
        ]
    }

    fn combinatorial_ok(&self, d: &[f64]) -> bool {
        let s = self.dif.scenario();
        let layout = self.dif.layout();
        let n_sub = s.num_subbands();
        for ue in 0..s.num_ues() {
            let total: f64 = (0..n_sub)
                .map(|n| layout.rho_value(d, ue * n_sub + n))
                .sum();
            if total > 1.0 + 1e-12 {
                return false;
            }
        }
        for ap in 0..s.num_aps() {
            for n in 0..n_sub {
                let load: f64 = s
                    .ues_of(ap)
                    .map(|ue| layout.rho_value(d, ue * n_sub + n))
                    .sum();
                if load > s.config.cluster_capacity[ap][n] as f64 + 1e-12 {
                    return false;
                }
            }
        }
        true
    }

    fn in_box(&self, x: &[f64]) -> bool {
        x.len() == self.layout.len()
            && x.iter()
                .zip(&self.layout.upper)
                .all(|(v, u)| *v >= 0.0 && *v <= u * (1.0 + 1e-12))
    }

    fn in_normal(&self, x: &[f64]) -> bool {
        if !self.in_box(x) {
            return false;
        }
        let d = self.layout.decision_part(x);
        if !self.combinatorial_ok(d) {
            return false;
        }
        let v = self.dif.evaluate(d);
        let obj_bound = self.bounds.objective;
        if x[self.layout.t] + self.objective_minus(&v) > obj_bound + slack(obj_bound) {
            return false;
        }
        self.groups(&v)
            .iter()
            .all(|&(idx, minus, bound, _)| idx.is_none_or(|i| x[i] + minus <= bound + slack(bound)))
    }

    fn in_conormal(&self, x: &[f64]) -> bool {
        if x.len() != self.layout.len() {
            return false;
        }
        let v = self.dif.evaluate(self.layout.decision_part(x));
        self.groups(&v)
            .iter()
            .all(|&(idx, _, bound, plus)| idx.is_none_or(|i| plus + x[i] >= bound - slack(bound)))
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let v = self.dif.evaluate(self.layout.decision_part(x));
        self.objective_plus(&v) + x[self.layout.t]
    }

    /// Smallest admissible `lambda` at the powers and overlaps of `d`.
    fn min_lambda(&self, v: &DifValues) -> f64 {
        let cfg = self.dif.config();
        let w = cfg.weight;
        let se = w * (cfg.utopia.spectral_efficiency - v.lifted_spectral_efficiency());
        let sp = (1.0 - w) * (v.q4_minus - cfg.utopia.sum_power_w);
        se.max(sp).max(0.0)
    }

    fn tighten(&self, d: &mut [f64]) {
        let layout = self.dif.layout();
        if let Some(i) = layout.lambda_index() {
            let v = self.dif.evaluate(d);
            d[i] = self.min_lambda(&v).min(layout.upper()[i]);
        }
    }

    /// Lifted point of decision `d` with `lambda` and auxiliaries tight, and
    /// its objective when feasible.
    fn tight_candidate(&self, d: &[f64]) -> (Vec<f64>, Option<f64>) {
        let mut d = d.to_vec();
        self.tighten(&mut d);
        let x = self.lift(&d);
        let value = (self.in_normal(&x) && self.in_conormal(&x)).then(|| self.objective(&x));
        (x, value)
    }

    /// Feasible improvement of a boundary point, if any beats `best`.
    ///
    /// Candidates are the point with `lambda` lowered to its least
    /// admissible value, and the same with `rho` rounded to {0, 1} (powers
    /// of dropped entries cleared). The better feasible one is refined by a
    /// compass search over powers and overlaps.
    fn polish(&self, x: &[f64], best: f64) -> Option<Vec<f64>> {
        let layout = self.dif.layout();
        let d = self.layout.decision_part(x).to_vec();
        let mut candidates = vec![d.clone()];
        if layout.has_free_rho() {
            let mut r = d;
            for e in 0..layout.num_entries() {
                if let Slot::Free(i) = layout.rho_slot(e) {
                    r[i] = r[i].round();
                    if let (0.0, Slot::Free(j)) = (r[i], layout.power_slot(e)) {
                        r[j] = 0.0;
                    }
                }
            }
            candidates.push(r);
        }
        let (start, value) = candidates
            .iter()
            .filter_map(|c| {
                let (x, v) = self.tight_candidate(c);
                v.map(|v| (x, v))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        if value <= best {
            return None;
        }
        Some(self.compass_search(start, value))
    }

    /// Pattern search over free powers and overlaps, keeping `rho` fixed
    /// and every iterate feasible. Each sweep polls the coordinate axes; when
    /// they fail, a batch of pseudo-random directions is polled before the
    /// step shrinks, so that descent along the ridge where both deviation
    /// constraints bind is still found.
    fn compass_search(&self, start: Vec<f64>, value: f64) -> Vec<f64> {
        let layout = self.dif.layout();
        let coords: Vec<usize> = (0..layout.num_entries())
            .filter_map(|e| match layout.power_slot(e) {
                Slot::Free(i) => Some(i),
                Slot::Fixed(_) => None,
            })
            .chain(layout.overlap_range())
            .collect();
        if coords.is_empty() {
            return start;
        }
        let up = layout.upper();
        let mut rng = ChaCha8Rng::seed_from_u64(COMPASS_SEED);
        let mut scale = 0.25;
        let (mut x, mut value) = (start, value);
        let poll = |x: &mut Vec<f64>, value: &mut f64, dir: &[f64], scale: f64| -> bool {
            let mut d = self.layout.decision_part(x).to_vec();
            let mut moved = false;
            for (k, &i) in coords.iter().enumerate() {
                let next = (d[i] + dir[k] * scale * up[i]).clamp(0.0, up[i]);
                moved |= next != d[i];
                d[i] = next;
            }
            if !moved {
                return false;
            }
            match self.tight_candidate(&d) {
                (cand, Some(v)) if v > *value => {
                    *x = cand;
                    *value = v;
                    true
                }
                _ => false,
            }
        };
        for _ in 0..COMPASS_MAX_SWEEPS {
            let mut improved = false;
            for k in 0..coords.len() {
                for sign in [1.0, -1.0] {
                    let mut dir = vec![0.0; coords.len()];
                    dir[k] = sign;
                    improved |= poll(&mut x, &mut value, &dir, scale);
                }
            }
            if !improved {
                for _ in 0..COMPASS_RANDOM_FACTOR * coords.len() {
                    let mut dir: Vec<f64> = (0..coords.len())
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    let norm = dir
                        .iter()
                        .map(|v| v * v)
                        .sum::<f64>()
                        .sqrt()
                        .max(f64::MIN_POSITIVE);
                    dir.iter_mut().for_each(|v| *v /= norm);
                    improved |= poll(&mut x, &mut value, &dir, scale);
                }
            }
            if !improved {
                scale *= 0.5;
                if scale < COMPASS_MIN_STEP {
                    break;
                }
            }
        }
        x
    }

    fn lift(&self, d: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.layout.len()];
        x[..d.len()].copy_from_slice(d);
        let v = self.dif.evaluate(d);
        let up = &self.layout.upper;
        let t = self.layout.t;
        x[t] = (self.bounds.objective - self.objective_minus(&v)).clamp(0.0, up[t]);
        for (idx, minus, bound, _) in self.groups(&v) {
            if let Some(i) = idx {
                x[i] = (bound - minus).clamp(0.0, up[i]);
            }
        }
        x
    }
}

impl<'a> LiftedProblem<'a> {
    pub fn new(
        scenario: &'a Scenario,
        config: &ScalarizationConfig,
        decision: DecisionLayout,
        kind: ProblemKind,
    ) -> Self {
        let omega = config.weight;
        let dif = DifFunctions::new(scenario, decision.clone(), config.clone());
        let top = dif.evaluate(decision.upper());
        let bottom = dif.evaluate(&vec![0.0; decision.len()]);

        let tchebycheff = kind == ProblemKind::Tchebycheff;
        let include = [
            tchebycheff && omega > 0.0,
            scenario.config.qos_rate_bps_hz > 0.0,
            tchebycheff && omega < 1.0,
            decision.has_free_rho(),
        ];
        let minus_top = [top.q1_minus, top.q2_minus, top.q3_minus, top.q4_minus];
        let minus_bottom = [
            bottom.q1_minus,
            bottom.q2_minus,
            bottom.q3_minus,
            bottom.q4_minus,
        ];

        let mut upper = decision.upper().to_vec();
        let objective_minus = |v: &DifValues| match kind {
            ProblemKind::Tchebycheff => v.q0_minus,
            ProblemKind::SumRate => v.q0_minus + v.interference_log_sum,
        };
        let t = upper.len();
        upper.push(objective_minus(&top) - objective_minus(&bottom));
        let mut aux = [None; 4];
        for g in 0..4 {
            if include[g] {
                aux[g] = Some(upper.len());
                upper.push(minus_top[g] - minus_bottom[g]);
            }
        }
        let layout = LiftedLayout {
            decision,
            t,
            w: aux[0],
            l: aux[1],
            u: aux[2],
            v: aux[3],
            upper,
        };
        let bounds = Bounds {
            objective: objective_minus(&top),
            se: minus_top[0],
            qos: minus_top[1],
            power: minus_top[2],
            cap: minus_top[3],
        };
        Self {
            inner: Arc::new(Inner {
                dif,
                kind,
                layout,
                bounds,
            }),
        }
    }

    pub fn kind(&self) -> ProblemKind {
        self.inner.kind
    }

    pub fn layout(&self) -> &LiftedLayout {
        &self.inner.layout
    }

    pub fn dif(&self) -> &DifFunctions<'a> {
        &self.inner.dif
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.inner.objective(x)
    }

    pub fn in_normal(&self, x: &[f64]) -> bool {
        self.inner.in_normal(x)
    }

    pub fn in_conormal(&self, x: &[f64]) -> bool {
        self.inner.in_conormal(x)
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.in_normal(x) && self.in_conormal(x)
    }

    /// Constant by which lifted objective values exceed the unlifted ones.
    pub fn objective_offset(&self) -> f64 {
        self.inner.bounds.objective
    }

    /// Unlifted objective at a lifted point, `objective(x) - offset`.
    pub fn unlifted_value(&self, x: &[f64]) -> f64 {
        self.objective(x) - self.objective_offset()
    }

    /// Lifts a decision vector with every auxiliary at its largest
    /// normal-feasible value.
    pub fn lift(&self, decision: &[f64]) -> Vec<f64> {
        self.inner.lift(decision)
    }

    /// Local improvement of a lifted point: `lambda` and the auxiliaries are
    /// tightened, `rho` rounded, then powers and overlaps refined by pattern
    /// search. `None` when no feasible point could be formed.
    pub fn refine(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.inner.polish(x, f64::NEG_INFINITY)
    }

    /// Canonical problem for the polyblock solver. Boundary projections are
    /// also tried with tightened auxiliaries and `lambda`.
    pub fn dif_problem(&self) -> DifProblem<'a> {
        let (a, b, c, d) = (
            self.inner.clone(),
            self.inner.clone(),
            self.inner.clone(),
            self.inner.clone(),
        );
        DifProblem::new(
            self.inner.layout.upper.clone(),
            move |x| a.objective(x),
            move |x| b.in_normal(x),
            move |x| c.in_conormal(x),
        )
        .with_reference(self.objective_offset())
        .with_polish(move |x, best| d.polish(x, best))
    }
}

/// Lifts the penalized Tchebycheff problem over `layout`.
pub fn lift_to_p4<'a>(
    scenario: &'a Scenario,
    config: &ScalarizationConfig,
    layout: DecisionLayout,
) -> LiftedProblem<'a> {
    LiftedProblem::new(scenario, config, layout, ProblemKind::Tchebycheff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_scenario, SystemConfig};
    use crate::scalarization::{penalized_objective, OverlapMode, Utopia};

    fn setup(seed: u64) -> (Scenario, ScalarizationConfig) {
        let scn = generate_scenario(&SystemConfig::tiny().with_seed(seed)).unwrap();
        let cfg =
            ScalarizationConfig::for_scenario(0.5, Utopia::supplied(20.0, 0.001), &scn).unwrap();
        (scn, cfg)
    }

    #[test]
    fn t_bound_is_penalty_count_plus_lambda_bound() {
        let (scn, cfg) = setup(1);
        let layout = DecisionLayout::relaxed(&scn, OverlapMode::PerSubband, Some(cfg.lambda_bound));
        let p = lift_to_p4(&scn, &cfg, layout);
        let t = p.layout().t;
        let expected = cfg.penalty * 4.0 + cfg.lambda_bound;
        assert!((p.layout().upper()[t] - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn origin_is_normal_but_not_conormal() {
        let (scn, cfg) = setup(2);
        let layout = DecisionLayout::relaxed(&scn, OverlapMode::PerSubband, Some(cfg.lambda_bound));
        let p = lift_to_p4(&scn, &cfg, layout);
        let zero = vec![0.0; p.layout().len()];
        assert!(p.in_normal(&zero));
        assert!(!p.in_conormal(&zero));
        assert!(p.in_conormal(p.layout().upper()));
    }

    #[test]
    fn lifted_objective_differs_from_penalized_by_offset() {
        let (scn, cfg) = setup(3);
        let layout = DecisionLayout::relaxed(&scn, OverlapMode::PerSubband, Some(cfg.lambda_bound));
        let p = lift_to_p4(&scn, &cfg, layout.clone());
        for k in 0..20 {
            let d: Vec<f64> = layout
                .upper()
                .iter()
                .enumerate()
                .map(|(i, u)| u * (((k * 13 + i * 7) % 11) as f64 / 10.0))
                .collect();
            let x = p.lift(&d);
            let direct = penalized_objective(&d, &layout, &cfg).unwrap();
            assert!((p.unlifted_value(&x) - direct).abs() < 1e-9 * p.objective_offset());
        }
    }

    #[test]
    fn vacuous_groups_are_omitted() {
        let (scn, _) = setup(4);
        let cfg =
            ScalarizationConfig::for_scenario(1.0, Utopia::supplied(20.0, 0.0), &scn).unwrap();
        let layout = DecisionLayout::relaxed(&scn, OverlapMode::Disabled, Some(cfg.lambda_bound));
        let p = lift_to_p4(&scn, &cfg, layout);
        assert!(p.layout().u.is_none());
        assert!(p.layout().w.is_some() && p.layout().l.is_some() && p.layout().v.is_some());
    }
}
