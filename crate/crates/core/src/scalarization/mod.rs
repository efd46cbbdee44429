//! Tchebycheff scalarization of the (SE, SP) trade-off, its penalized
//! relaxation, and the lifting to canonical monotonic form.

mod dif;
mod layout;
mod lift;
mod utopia;

pub use dif::{DifFunctions, DifTerm, DifValues, QosForm};
pub use layout::{Decision, DecisionLayout, OverlapMode, Slot};
pub use lift::{lift_to_p4, LiftedLayout, LiftedProblem, ProblemKind};
pub use utopia::{min_sum_power, utopia_points, UtopiaOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Scenario;
use crate::rates::{network_metrics, Assignment, OverlapProfile, PowerAllocation};

pub const DEFAULT_PENALTY: f64 = 1e3;
/// Relative margin of the default `lambda` bound over the largest value
/// either scalarized constraint can demand.
pub const LAMBDA_MARGIN: f64 = 0.1;
/// Distance to {0, 1} below which a relaxed `rho` counts as integral.
pub const BINARY_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtopiaMethod {
    /// Known in closed form (for example zero power when QoS is zero).
    Trivial,
    /// Exhaustive grid search.
    Exhaustive,
    /// Minimum-power fixed point over enumerated assignments.
    FixedPoint,
    /// The polyblock solver run on the single-objective problem.
    Polyblock,
    /// Given by the caller.
    Supplied,
}

impl UtopiaMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Trivial => "trivial",
            Self::Exhaustive => "exhaustive",
            Self::FixedPoint => "fixed_point",
            Self::Polyblock => "polyblock",
            Self::Supplied => "supplied",
        }
    }
}

/// Ideal objective vector: best SE (bps/Hz) and least SP (W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utopia {
    pub spectral_efficiency: f64,
    pub sum_power_w: f64,
    pub se_method: UtopiaMethod,
    pub sp_method: UtopiaMethod,
}

impl Utopia {
    pub fn supplied(spectral_efficiency: f64, sum_power_w: f64) -> Self {
        Self {
            spectral_efficiency,
            sum_power_w,
            se_method: UtopiaMethod::Supplied,
            sp_method: UtopiaMethod::Supplied,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarizationConfig {
    /// `omega`: weight of the SE deviation.
    pub weight: f64,
    /// `alpha`: weight of the integrality penalty.
    pub penalty: f64,
    /// `Lambda`: upper end of the `lambda` box.
    pub lambda_bound: f64,
    pub utopia: Utopia,
    pub qos_form: QosForm,
}

impl ScalarizationConfig {
    /// Builds a config with the default penalty and `lambda` bound.
    /// `total_max_power_w` is the sum of every UE's power budget.
    pub fn new(weight: f64, utopia: Utopia, total_max_power_w: f64) -> Result<Self> {
        let demand = Self::lambda_demand(weight, &utopia, total_max_power_w);
        let lambda_bound = ((1.0 + LAMBDA_MARGIN) * (demand.0 + demand.1)).max(1e-6);
        let cfg = Self {
            weight,
            penalty: DEFAULT_PENALTY,
            lambda_bound,
            utopia,
            qos_form: QosForm::default(),
        };
        cfg.validate(total_max_power_w)?;
        Ok(cfg)
    }

    pub fn for_scenario(weight: f64, utopia: Utopia, scenario: &Scenario) -> Result<Self> {
        Self::new(weight, utopia, scenario.total_max_power_w())
    }

    /// Largest `lambda` either scalarized constraint can require on the box:
    /// `(omega U1*, (1 - omega)(sum Pmax - U2*))`.
    fn lambda_demand(weight: f64, utopia: &Utopia, total_max_power_w: f64) -> (f64, f64) {
        (
            weight * utopia.spectral_efficiency,
            (1.0 - weight) * (total_max_power_w - utopia.sum_power_w),
        )
    }

    pub fn with_penalty(mut self, penalty: f64) -> Result<Self> {
        if !(penalty > 0.0 && penalty.is_finite()) {
            return Err(Error::InvalidScalarization(format!(
                "penalty must be positive, got {penalty}"
            )));
        }
        self.penalty = penalty;
        Ok(self)
    }

    pub fn with_lambda_bound(mut self, lambda_bound: f64, total_max_power_w: f64) -> Result<Self> {
        self.lambda_bound = lambda_bound;
        self.validate(total_max_power_w)?;
        Ok(self)
    }

    pub fn with_qos_form(mut self, form: QosForm) -> Self {
        self.qos_form = form;
        self
    }

    pub fn validate(&self, total_max_power_w: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScalarization(msg));
        if !(0.0..=1.0).contains(&self.weight) {
            return bad(format!("weight must lie in [0, 1], got {}", self.weight));
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return bad(format!("penalty must be positive, got {}", self.penalty));
        }
        let u = &self.utopia;
        if !(u.spectral_efficiency.is_finite() && u.spectral_efficiency >= 0.0) {
            return bad(format!(
                "utopia SE must be finite and non-negative, got {}",
                u.spectral_efficiency
            ));
        }
        if !(u.sum_power_w.is_finite() && u.sum_power_w >= 0.0) {
            return bad(format!(
                "utopia SP must be finite and non-negative, got {}",
                u.sum_power_w
            ));
        }
        if !(self.lambda_bound > 0.0 && self.lambda_bound.is_finite()) {
            return bad(format!(
                "lambda bound must be positive, got {}",
                self.lambda_bound
            ));
        }
        let (se_demand, sp_demand) = Self::lambda_demand(self.weight, u, total_max_power_w);
        if self.lambda_bound < se_demand || self.lambda_bound < sp_demand {
            return bad(format!(
                "lambda bound {} is below the largest demand (SE {se_demand}, SP {sp_demand})",
                self.lambda_bound
            ));
        }
        Ok(())
    }
}

/// `lambda` and the slacks `lambda - omega (U1* - SE)` and
/// `lambda - (1 - omega)(SP - U2*)` of a concrete decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TchebycheffEval {
    pub lambda: f64,
    pub se_slack: f64,
    pub sp_slack: f64,
    pub spectral_efficiency: f64,
    pub sum_power_w: f64,
}

impl TchebycheffEval {
    pub fn satisfied(&self) -> bool {
        self.se_slack >= -1e-12 && self.sp_slack >= -1e-12
    }

    /// Smallest `lambda >= 0` meeting both constraints at this decision.
    pub fn min_lambda(&self) -> f64 {
        (self.lambda - self.se_slack)
            .max(self.lambda - self.sp_slack)
            .max(0.0)
    }
}

/// Tchebycheff deviations of an explicit decision.
pub fn tchebycheff_eval(
    scenario: &Scenario,
    config: &ScalarizationConfig,
    assignment: &Assignment,
    powers: &PowerAllocation,
    overlap: &OverlapProfile,
    lambda: f64,
) -> Result<TchebycheffEval> {
    let m = network_metrics(scenario, assignment, powers, overlap)?;
    let w = config.weight;
    Ok(TchebycheffEval {
        lambda,
        se_slack: lambda - w * (config.utopia.spectral_efficiency - m.spectral_efficiency),
        sp_slack: lambda - (1.0 - w) * (m.sum_power_w - config.utopia.sum_power_w),
        spectral_efficiency: m.spectral_efficiency,
        sum_power_w: m.sum_power_w,
    })
}

/// Tchebycheff deviations of a point of `layout`.
pub fn tchebycheff_objective(
    point: &[f64],
    layout: &DecisionLayout,
    scenario: &Scenario,
    config: &ScalarizationConfig,
) -> Result<TchebycheffEval> {
    check_point(point, layout)?;
    let d = layout.decode(point);
    tchebycheff_eval(
        scenario,
        config,
        &d.assignment,
        &d.powers,
        &d.overlap,
        d.lambda,
    )
}

/// `-lambda + alpha * sum(rho^2 - rho)`.
pub fn penalized_objective(
    point: &[f64],
    layout: &DecisionLayout,
    config: &ScalarizationConfig,
) -> Result<f64> {
    check_point(point, layout)?;
    let penalty: f64 = (0..layout.num_entries())
        .map(|e| {
            let r = layout.rho_value(point, e);
            r * r - r
        })
        .sum();
    Ok(-layout.lambda_value(point) + config.penalty * penalty)
}

fn check_point(point: &[f64], layout: &DecisionLayout) -> Result<()> {
    if point.len() != layout.len() {
        return Err(Error::Shape(format!(
            "decision vector has {} entries, layout expects {}",
            point.len(),
            layout.len()
        )));
    }
    Ok(())
}

/// The ten DIF functions of `config` over decision vectors of `layout`.
pub fn dif_functions<'a>(
    scenario: &'a Scenario,
    layout: DecisionLayout,
    config: &ScalarizationConfig,
) -> DifFunctions<'a> {
    DifFunctions::new(scenario, layout, config.clone())
}
