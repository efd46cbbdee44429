//! Difference-of-increasing decomposition of the penalized Tchebycheff
//! problem. Every `q` below is non-decreasing in each decision coordinate.
//!
//! Rate logs are taken relative to the nominal noise power `sigma^2`, so
//! `log2((S + I) / sigma^2)` and `log2(I / sigma^2)` are both non-negative
//! (every denominator contains at least `sigma^2 (1 + delta^l + delta^r)`).
//! Their difference is the usual `log2(1 + S / I)`.

use serde::{Deserialize, Serialize};

use super::layout::DecisionLayout;
use super::ScalarizationConfig;
use crate::network::Scenario;
use crate::rates::RateModel;

/// How the QoS constraint is decomposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QosForm {
    /// One constraint per UE on its rate summed over subbands.
    #[default]
    PerUser,
    /// One constraint per `(ue, n)` pair, complement over every other pair.
    PerSubbandTuple,
    /// One constraint per `(ue, n)` pair; the subtracted sum only runs over
    /// pairs that differ from it in local UE index, subband and AP at once.
    PerSubbandDisjoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DifTerm {
    Q0Plus,
    Q0Minus,
    Q1Plus,
    Q1Minus,
    Q2Plus,
    Q2Minus,
    Q3Plus,
    Q3Minus,
    Q4Plus,
    Q4Minus,
}

impl DifTerm {
    pub const ALL: [DifTerm; 10] = [
        DifTerm::Q0Plus,
        DifTerm::Q0Minus,
        DifTerm::Q1Plus,
        DifTerm::Q1Minus,
        DifTerm::Q2Plus,
        DifTerm::Q2Minus,
        DifTerm::Q3Plus,
        DifTerm::Q3Minus,
        DifTerm::Q4Plus,
        DifTerm::Q4Minus,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DifTerm::Q0Plus => "q0+",
            DifTerm::Q0Minus => "q0-",
            DifTerm::Q1Plus => "q1+",
            DifTerm::Q1Minus => "q1-",
            DifTerm::Q2Plus => "q2+",
            DifTerm::Q2Minus => "q2-",
            DifTerm::Q3Plus => "q3+",
            DifTerm::Q3Minus => "q3-",
            DifTerm::Q4Plus => "q4+",
            DifTerm::Q4Minus => "q4-",
        }
    }
}

/// All ten functions at one point, plus the raw rate sums they are built from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DifValues {
    pub q0_plus: f64,
    pub q0_minus: f64,
    pub q1_plus: f64,
    pub q1_minus: f64,
    pub q2_plus: f64,
    pub q2_minus: f64,
    pub q3_plus: f64,
    pub q3_minus: f64,
    pub q4_plus: f64,
    pub q4_minus: f64,
    /// `sum (B_n / W) log2((S + I) / sigma^2)` over every `(ue, n)`.
    pub signal_log_sum: f64,
    /// `sum (B_n / W) log2(I / sigma^2)` over every `(ue, n)`.
    pub interference_log_sum: f64,
}

impl DifValues {
    pub fn get(&self, term: DifTerm) -> f64 {
        match term {
            DifTerm::Q0Plus => self.q0_plus,
            DifTerm::Q0Minus => self.q0_minus,
            DifTerm::Q1Plus => self.q1_plus,
            DifTerm::Q1Minus => self.q1_minus,
            DifTerm::Q2Plus => self.q2_plus,
            DifTerm::Q2Minus => self.q2_minus,
            DifTerm::Q3Plus => self.q3_plus,
            DifTerm::Q3Minus => self.q3_minus,
            DifTerm::Q4Plus => self.q4_plus,
            DifTerm::Q4Minus => self.q4_minus,
        }
    }

    /// Lifted spectral efficiency `sum_{ue,n} (B_n / W) log2(1 + SINR)`
    /// without the `rho` weight.
    pub fn lifted_spectral_efficiency(&self) -> f64 {
        self.signal_log_sum - self.interference_log_sum
    }
}

/// Evaluator for the ten functions on one scenario and decision layout.
#[derive(Debug, Clone)]
pub struct DifFunctions<'a> {
    model: RateModel<'a>,
    layout: DecisionLayout,
    config: ScalarizationConfig,
}

impl<'a> DifFunctions<'a> {
    pub fn new(
        scenario: &'a Scenario,
        layout: DecisionLayout,
        config: ScalarizationConfig,
    ) -> Self {
        Self {
            model: RateModel::new(scenario),
            layout,
            config,
        }
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.model.scenario()
    }

    pub fn layout(&self) -> &DecisionLayout {
        &self.layout
    }

    pub fn config(&self) -> &ScalarizationConfig {
        &self.config
    }

    /// Evaluates all ten functions at decision vector `x`.
    pub fn evaluate(&self, x: &[f64]) -> DifValues {
        let s = self.scenario();
        let cfg = &self.config;
        let layout = &self.layout;
        let n_sub = s.num_subbands();
        let entries = layout.num_entries();
        let powers = layout.powers(x);
        let overlap = layout.overlap(x);
        let lambda = layout.lambda_value(x);
        let terms = self.model.all_terms(&powers, &overlap);

        let sigma2 = s.noise_power_w;
        let b = s.subband_bandwidth_hz();
        let w = s.config.total_bandwidth_hz;
        let b_ref = s.config.qos_reference_hz();
        let rq = s.config.qos_rate_bps_hz;

        // Per-entry log terms: `a` with the signal, `c` interference only.
        let mut a = vec![0.0; entries];
        let mut c = vec![0.0; entries];
        for ue in 0..s.num_ues() {
            let ap = s.home_ap(ue);
            for n in 0..n_sub {
                let e = ue * n_sub + n;
                let interference = terms[e].total();
                debug_assert!(interference >= terms[e].noise * (1.0 - 1e-12));
                let signal = powers.get(ue, n) * s.own_gain(ue, n);
                let bw = b * overlap.bandwidth_factor(ap, n);
                a[e] = bw * ((signal + interference) / sigma2).log2();
                c[e] = bw * (interference / sigma2).log2();
            }
        }
        let signal_log_sum = a.iter().sum::<f64>() / w;
        let interference_log_sum = c.iter().sum::<f64>() / w;

        let rho: Vec<f64> = (0..entries).map(|e| layout.rho_value(x, e)).collect();
        let p: Vec<f64> = (0..entries).map(|e| layout.power_value(x, e)).collect();

        let alpha = cfg.penalty;
        let omega = cfg.weight;
        let q0_plus = alpha * rho.iter().map(|r| r * r).sum::<f64>();
        let q0_minus = alpha * rho.iter().sum::<f64>() + lambda;
        let q1_plus = omega * signal_log_sum + lambda;
        let q1_minus = omega * interference_log_sum + omega * cfg.utopia.spectral_efficiency;

        let (q2_plus, q2_minus) = self.qos_terms(&a, &c, b_ref, rq);

        let total_power: f64 = p.iter().sum();
        let q3_plus = lambda + (1.0 - omega) * cfg.utopia.sum_power_w;
        let q3_minus = (1.0 - omega) * total_power;

        let pmax = s.config.max_tx_power_w;
        let q4_plus = (0..entries)
            .map(|e| rho[e] * pmax + total_power - p[e])
            .fold(f64::INFINITY, f64::min);
        let q4_minus = total_power;

        DifValues {
            q0_plus,
            q0_minus,
            q1_plus,
            q1_minus,
            q2_plus,
            q2_minus,
            q3_plus,
            q3_minus,
            q4_plus,
            q4_minus,
            signal_log_sum,
            interference_log_sum,
        }
    }

    fn qos_terms(&self, a: &[f64], c: &[f64], b_ref: f64, rq: f64) -> (f64, f64) {
        let s = self.scenario();
        let n_sub = s.num_subbands();
        match self.config.qos_form {
            QosForm::PerUser => {
                let f: Vec<f64> = (0..s.num_ues())
                    .map(|u| a[u * n_sub..(u + 1) * n_sub].iter().sum::<f64>() / b_ref)
                    .collect();
                let g: Vec<f64> = (0..s.num_ues())
                    .map(|u| c[u * n_sub..(u + 1) * n_sub].iter().sum::<f64>() / b_ref + rq)
                    .collect();
                let total: f64 = g.iter().sum();
                let plus = f
                    .iter()
                    .zip(&g)
                    .map(|(fu, gu)| fu + (total - gu))
                    .fold(f64::INFINITY, f64::min);
                (plus, total)
            }
            QosForm::PerSubbandTuple => {
                let g: Vec<f64> = c.iter().map(|ci| ci / b_ref + rq).collect();
                let total: f64 = g.iter().sum();
                let plus = a
                    .iter()
                    .zip(&g)
                    .map(|(ai, gi)| ai / b_ref + (total - gi))
                    .fold(f64::INFINITY, f64::min);
                (plus, total)
            }
            QosForm::PerSubbandDisjoint => {
                let g: Vec<f64> = c.iter().map(|ci| ci / b_ref + rq).collect();
                let total: f64 = g.iter().sum();
                let mut plus = f64::INFINITY;
                for ue in 0..s.num_ues() {
                    for n in 0..n_sub {
                        let others: f64 = (0..s.num_ues())
                            .flat_map(|u2| (0..n_sub).map(move |n2| (u2, n2)))
                            .filter(|&(u2, n2)| {
                                s.local_index(u2) != s.local_index(ue)
                                    && n2 != n
                                    && s.home_ap(u2) != s.home_ap(ue)
                            })
                            .map(|(u2, n2)| g[u2 * n_sub + n2])
                            .sum();
                        plus = plus.min(a[ue * n_sub + n] / b_ref + others);
                    }
                }
                (plus, total)
            }
        }
    }

    pub fn eval(&self, term: DifTerm, x: &[f64]) -> f64 {
        self.evaluate(x).get(term)
    }

    /// The ten functions as standalone closures.
    pub fn closures(&self) -> Vec<(DifTerm, Box<dyn Fn(&[f64]) -> f64 + '_>)> {
        DifTerm::ALL
            .iter()
            .map(|&term| {
                (
                    term,
                    Box::new(move |x: &[f64]| self.eval(term, x)) as Box<dyn Fn(&[f64]) -> f64>,
                )
            })
            .collect()
    }
}
