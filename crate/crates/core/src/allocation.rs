//! End-to-end allocation: relaxed polyblock solve, rounding of `rho`, and a
//! power/overlap re-solve with the assignment pinned.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::Scenario;
use crate::oracle::count_assignments;
use crate::polyblock::{solve_with_incumbent, SolveStatus, SolverOptions};
use crate::rates::{
    check_constraints, network_metrics, Assignment, Metrics, OverlapProfile, PowerAllocation,
};
use crate::scalarization::{
    tchebycheff_eval, Decision, DecisionLayout, LiftedProblem, OverlapMode, ProblemKind,
    ScalarizationConfig, BINARY_TOLERANCE,
};

/// How the binary association is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentStrategy {
    /// Enumerate while the number of assignments is at most
    /// `enumerate_cap`; beyond it, relax and then improve the rounded
    /// assignment by single-UE moves.
    #[default]
    Auto,
    /// Solve the penalized relaxation, then round.
    Relaxed,
    /// Solve the pinned problem for every feasible assignment.
    Enumerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationOptions {
    /// Solver settings of the relaxed stage.
    pub relaxed: SolverOptions,
    /// Solver settings of the pinned re-solve.
    pub pinned: SolverOptions,
    pub binary_tolerance: f64,
    pub strategy: AssignmentStrategy,
    pub enumerate_cap: usize,
}

impl Default for AllocationOptions {
    fn default() -> Self {
        Self {
            relaxed: SolverOptions::default().with_max_iter(2000),
            pinned: SolverOptions::default().with_max_iter(200),
            binary_tolerance: BINARY_TOLERANCE,
            strategy: AssignmentStrategy::default(),
            enumerate_cap: 64,
        }
    }
}

/// A binary decision with its evaluated outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub assignment: Assignment,
    pub powers: PowerAllocation,
    pub overlap: OverlapProfile,
    /// Smallest admissible `lambda` (zero for sum-rate problems).
    pub lambda: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationOutcome {
    pub allocation: Option<Allocation>,
    pub status: SolveStatus,
    /// `lambda` for Tchebycheff problems, SE for sum-rate problems.
    pub objective: f64,
    /// Outer polyblock iterations over every stage.
    pub iterations: usize,
    pub work: u64,
    /// Largest distance of a relaxed `rho` to {0, 1} before rounding.
    pub integrality_gap: f64,
    /// Whether every relaxed `rho` was within the binary tolerance.
    pub integral: bool,
    /// SR after the pinned re-solve minus SR of the rounded relaxed point.
    pub rounding_sr_change: Option<f64>,
}

impl AllocationOutcome {
    fn infeasible(iterations: usize, work: u64) -> Self {
        Self {
            allocation: None,
            status: SolveStatus::Infeasible,
            objective: f64::NAN,
            iterations,
            work,
            integrality_gap: f64::NAN,
            integral: false,
            rounding_sr_change: None,
        }
    }
}

/// Rounds relaxed `rho` to a capacity-feasible assignment: entries are taken
/// in decreasing order of `rho`; a UE takes its entry if it is unserved, the
/// cluster has room, and either `rho >= 1/2` or the UE must be served.
pub fn round_assignment(scenario: &Scenario, relaxed: &Assignment) -> Assignment {
    let n_sub = scenario.num_subbands();
    let must_serve = scenario.config.qos_rate_bps_hz > 0.0;
    let mut entries: Vec<usize> = (0..relaxed.values().len()).collect();
    entries.sort_by(|&a, &b| {
        relaxed.values()[b]
            .total_cmp(&relaxed.values()[a])
            .then(a.cmp(&b))
    });
    let mut load = vec![0usize; scenario.num_aps() * n_sub];
    let mut choices = vec![None; scenario.num_ues()];
    for e in entries {
        let (ue, n) = (e / n_sub, e % n_sub);
        let ap = scenario.home_ap(ue);
        if choices[ue].is_some() || load[ap * n_sub + n] >= scenario.config.cluster_capacity[ap][n]
        {
            continue;
        }
        if relaxed.values()[e] >= 0.5 || must_serve {
            choices[ue] = Some(n);
            load[ap * n_sub + n] += 1;
        }
    }
    Assignment::from_choices(n_sub, &choices)
}

fn lambda_bound(kind: ProblemKind, config: &ScalarizationConfig) -> Option<f64> {
    (kind == ProblemKind::Tchebycheff).then_some(config.lambda_bound)
}

/// Evaluates a binary decision; `None` when it violates a constraint.
pub fn evaluate_allocation(
    scenario: &Scenario,
    config: &ScalarizationConfig,
    kind: ProblemKind,
    assignment: &Assignment,
    powers: &PowerAllocation,
    overlap: &OverlapProfile,
) -> Result<Option<Allocation>> {
    if !check_constraints(scenario, assignment, powers, overlap)?.feasible() {
        return Ok(None);
    }
    let metrics = network_metrics(scenario, assignment, powers, overlap)?;
    let lambda = match kind {
        ProblemKind::Tchebycheff => {
            let e = tchebycheff_eval(scenario, config, assignment, powers, overlap, 0.0)?;
            let lambda = e.min_lambda();
            if lambda > config.lambda_bound {
                return Ok(None);
            }
            lambda
        }
        ProblemKind::SumRate => 0.0,
    };
    Ok(Some(Allocation {
        assignment: assignment.clone(),
        powers: powers.clone(),
        overlap: overlap.clone(),
        lambda,
        metrics,
    }))
}

fn objective_of(kind: ProblemKind, a: &Allocation) -> f64 {
    match kind {
        ProblemKind::Tchebycheff => a.lambda,
        ProblemKind::SumRate => a.metrics.spectral_efficiency,
    }
}

/// True when `a` is strictly better than `b`.
fn better(kind: ProblemKind, a: &Allocation, b: &Allocation) -> bool {
    match kind {
        ProblemKind::Tchebycheff => a.lambda < b.lambda,
        ProblemKind::SumRate => a.metrics.spectral_efficiency > b.metrics.spectral_efficiency,
    }
}

/// Lifted incumbent for `problem` built from a binary decision, if feasible.
fn incumbent_for(
    problem: &LiftedProblem<'_>,
    layout: &DecisionLayout,
    start: &Allocation,
) -> Option<Vec<f64>> {
    let decision = Decision {
        assignment: start.assignment.clone(),
        powers: start.powers.clone(),
        overlap: start.overlap.clone(),
        lambda: start.lambda,
    };
    let x = problem.lift(&layout.encode(&decision));
    problem.is_feasible(&x).then_some(x)
}

struct Stage {
    allocation: Option<Allocation>,
    status: SolveStatus,
    iterations: usize,
    work: u64,
}

/// Power and overlap optimization with the assignment pinned.
fn solve_pinned(
    scenario: &Scenario,
    config: &ScalarizationConfig,
    kind: ProblemKind,
    mode: OverlapMode,
    assignment: &Assignment,
    options: &SolverOptions,
    starts: &[&Allocation],
) -> Result<Stage> {
    let layout = DecisionLayout::pinned(scenario, assignment, mode, lambda_bound(kind, config));
    let problem = LiftedProblem::new(scenario, config, layout.clone(), kind);
    // Warm starts are refined on their own: as a polyblock incumbent they
    // would keep weaker harvested points from being polished.
    let result = solve_with_incumbent(&problem.dif_problem(), options, None)?;
    let refined: Vec<Vec<f64>> = starts
        .iter()
        .filter(|s| s.assignment == *assignment)
        .filter_map(|s| incumbent_for(&problem, &layout, s))
        .filter_map(|x| problem.refine(&x).filter(|r| problem.is_feasible(r)))
        .collect();
    let mut allocation: Option<Allocation> = None;
    for x in result.point.iter().chain(&refined) {
        let d = layout.decode(problem.layout().decision_part(x));
        if let Some(a) =
            evaluate_allocation(scenario, config, kind, assignment, &d.powers, &d.overlap)?
        {
            if allocation.as_ref().is_none_or(|b| better(kind, &a, b)) {
                allocation = Some(a);
            }
        }
    }
    for s in starts.iter().filter(|s| s.assignment == *assignment) {
        if allocation.as_ref().is_none_or(|a| better(kind, s, a)) {
            allocation = Some((*s).clone());
        }
    }
    Ok(Stage {
        allocation,
        status: result.status,
        iterations: result.state.iterations,
        work: result.state.work,
    })
}

/// Solves the scalarized problem of `kind` for overlap `mode`. `warm` holds
/// binary decisions known to be feasible for this instance (for example the
/// optimum of a nested mode); they seed the search and are never lost.
pub fn solve_allocation(
    scenario: &Scenario,
    config: &ScalarizationConfig,
    kind: ProblemKind,
    mode: OverlapMode,
    options: &AllocationOptions,
    warm: &[Allocation],
) -> Result<AllocationOutcome> {
    let warm: Vec<Allocation> = warm
        .iter()
        .filter_map(|w| {
            let ov = project_overlap(scenario, mode, &w.overlap);
            evaluate_allocation(scenario, config, kind, &w.assignment, &w.powers, &ov)
                .ok()
                .flatten()
        })
        .collect();
    let enumerate = match options.strategy {
        AssignmentStrategy::Auto => {
            count_assignments(scenario, options.enumerate_cap + 1) <= options.enumerate_cap
        }
        AssignmentStrategy::Relaxed => false,
        AssignmentStrategy::Enumerate => true,
    };
    if enumerate {
        solve_enumerated(scenario, config, kind, mode, options, &warm)
    } else if options.strategy == AssignmentStrategy::Auto {
        let relaxed = solve_relaxed(scenario, config, kind, mode, options, &warm)?;
        local_search(scenario, config, kind, mode, options, &warm, relaxed)
    } else {
        solve_relaxed(scenario, config, kind, mode, options, &warm)
    }
}

/// Re-expresses an overlap profile in the variables of `mode`.
fn project_overlap(
    scenario: &Scenario,
    mode: OverlapMode,
    overlap: &OverlapProfile,
) -> OverlapProfile {
    let layout = DecisionLayout::relaxed(scenario, mode, None);
    let decision = Decision {
        assignment: Assignment::zeros(scenario.num_ues(), scenario.num_subbands()),
        powers: PowerAllocation::zeros(scenario.num_ues(), scenario.num_subbands()),
        overlap: overlap.clone(),
        lambda: 0.0,
    };
    layout.overlap(&layout.encode(&decision))
}

fn finish(
    kind: ProblemKind,
    stage: Stage,
    integrality_gap: f64,
    binary_tolerance: f64,
    rounding: Option<f64>,
) -> AllocationOutcome {
    match stage.allocation {
        Some(a) => AllocationOutcome {
            objective: objective_of(kind, &a),
            allocation: Some(a),
            status: if stage.status == SolveStatus::Infeasible {
                SolveStatus::IterLimit
            } else {
                stage.status
            },
            iterations: stage.iterations,
            work: stage.work,
            integrality_gap,
            integral: integrality_gap <= binary_tolerance,
            rounding_sr_change: rounding,
        },
        None => AllocationOutcome::infeasible(stage.iterations, stage.work),
    }
}

fn solve_relaxed(
    scenario: &Scenario,
    config: &ScalarizationConfig,
    kind: ProblemKind,
    mode: OverlapMode,
    options: &AllocationOptions,
    warm: &[Allocation],
) -> Result<AllocationOutcome> {
    let layout = DecisionLayout::relaxed(scenario, mode, lambda_bound(kind, config));
    let problem = LiftedProblem::new(scenario, config, layout.clone(), kind);
    let incumbent = warm
        .iter()
        .filter_map(|w| incumbent_for(&problem, &layout, w))
        .max_by(|a, b| problem.objective(a).total_cmp(&problem.objective(b)));
    let relaxed = solve_with_incumbent(
        &problem.dif_problem(),
        &options.relaxed,
        incumbent.as_deref(),
    )?;
    let (mut iterations, mut work) = (relaxed.state.iterations, relaxed.state.work);

    let Some(x) = relaxed.point else {
        return Ok(AllocationOutcome::infeasible(iterations, work));
    };
    let d = layout.decode(problem.layout().decision_part(&x));
    let gap = d.assignment.integrality_gap();
    let rounded = round_assignment(scenario, &d.assignment);

    // The relaxed powers restricted to the rounded assignment.
    let mut powers = PowerAllocation::zeros(scenario.num_ues(), scenario.num_subbands());
    for ue in 0..scenario.num_ues() {
        if let Some(n) = rounded.subband_of(ue) {
            powers.set(
                ue,
                n,
                d.powers.get(ue, n).min(scenario.config.max_tx_power_w),
            );
        }
    }
    let direct = evaluate_allocation(scenario, config, kind, &rounded, &powers, &d.overlap)?;

    let mut starts: Vec<&Allocation> = warm.iter().collect();
    if let Some(a) = &direct {
        starts.push(a);
    }
    let stage = solve_pinned(
        scenario,
        config,
        kind,
        mode,
        &rounded,
        &options.pinned,
        &starts,
    )?;
    iterations += stage.iterations;
    work += stage.work;
    let rounding = match (&direct, &stage.allocation) {
        (Some(a), Some(b)) => Some(b.metrics.sum_rate_bps - a.metrics.sum_rate_bps),
        _ => None,
    };

    // A warm start with a different assignment may still be better.
    let mut stage = Stage {
        iterations,
        work,
        ..stage
    };
    for w in warm {
        if stage.allocation.as_ref().is_none_or(|a| better(kind, w, a)) {
            stage.allocation = Some(w.clone());
        }
    }
    if stage.status == SolveStatus::Converged && relaxed.status != SolveStatus::Converged {
        stage.status = relaxed.status;
    }
    Ok(finish(kind, stage, gap, options.binary_tolerance, rounding))
}

fn solve_enumerated(
    scenario: &Scenario,
    config: &ScalarizationConfig,
    kind: ProblemKind,
    mode: OverlapMode,
    options: &AllocationOptions,
    warm: &[Allocation],
) -> Result<AllocationOutcome> {
    let starts: Vec<&Allocation> = warm.iter().collect();
    let mut total = Stage {
        allocation: None,
        status: SolveStatus::Converged,
        iterations: 0,
        work: 0,
    };
    let mut seen_feasible = false;
    for choices in crate::oracle::assignments(scenario) {
        let assignment = Assignment::from_choices(scenario.num_subbands(), &choices);
        let stage = solve_pinned(
            scenario,
            config,
            kind,
            mode,
            &assignment,
            &options.pinned,
            &starts,
        )?;
        total.iterations += stage.iterations;
        total.work += stage.work;
        if stage.status != SolveStatus::Infeasible {
            seen_feasible = true;
            if stage.status != SolveStatus::Converged {
                total.status = stage.status;
            }
        }
        if let Some(a) = stage.allocation {
            if total
                .allocation
                .as_ref()
                .is_none_or(|b| better(kind, &a, b))
            {
                total.allocation = Some(a);
            }
        }
    }
    if !seen_feasible && total.allocation.is_some() {
        total.status = SolveStatus::IterLimit;
    }
    Ok(finish(kind, total, 0.0, options.binary_tolerance, None))
}

/// Each UE on its strongest subband with room left in the cluster.
fn strongest_subbands(scenario: &Scenario) -> Option<Assignment> {
    let n_sub = scenario.num_subbands();
    let mut load = vec![0usize; scenario.num_aps() * n_sub];
    let mut choices = vec![None; scenario.num_ues()];
    for (ue, choice) in choices.iter_mut().enumerate() {
        let ap = scenario.home_ap(ue);
        let mut order: Vec<usize> = (0..n_sub).collect();
        order.sort_by(|&a, &b| {
            scenario
                .own_gain(ue, b)
                .total_cmp(&scenario.own_gain(ue, a))
        });
        let n = order
            .into_iter()
            .find(|&n| load[ap * n_sub + n] < scenario.config.cluster_capacity[ap][n])?;
        load[ap * n_sub + n] += 1;
        *choice = Some(n);
    }
    Some(Assignment::from_choices(n_sub, &choices))
}

/// `from` with UE `ue` moved to `to`, keeping its power where possible.
fn moved(
    scenario: &Scenario,
    config: &ScalarizationConfig,
    kind: ProblemKind,
    from: &Allocation,
    ue: usize,
    to: Option<usize>,
) -> Result<(Assignment, Option<Allocation>)> {
    let n_sub = scenario.num_subbands();
    let mut choices: Vec<Option<usize>> = (0..scenario.num_ues())
        .map(|m| from.assignment.subband_of(m))
        .collect();
    let power = choices[ue].map_or(0.0, |n| from.powers.get(ue, n));
    let mut powers = from.powers.clone();
    if let Some(n) = choices[ue] {
        powers.set(ue, n, 0.0);
    }
    if let Some(n) = to {
        powers.set(ue, n, power);
    }
    choices[ue] = to;
    let assignment = Assignment::from_choices(n_sub, &choices);
    let start = evaluate_allocation(scenario, config, kind, &assignment, &powers, &from.overlap)?;
    Ok((assignment, start))
}

fn fits(scenario: &Scenario, assignment: &Assignment) -> bool {
    let n_sub = scenario.num_subbands();
    let mut load = vec![0usize; scenario.num_aps() * n_sub];
    for ue in 0..scenario.num_ues() {
        if let Some(n) = assignment.subband_of(ue) {
            load[scenario.home_ap(ue) * n_sub + n] += 1;
        }
    }
    (0..scenario.num_aps()).all(|ap| {
        (0..n_sub).all(|n| load[ap * n_sub + n] <= scenario.config.cluster_capacity[ap][n])
    })
}

/// Steepest descent over single-UE assignment moves, run from each
/// of `outcome`, the warm starts and the strongest-subband assignment. Pinned
/// solves are shared between the descents.
fn local_search(
    scenario: &Scenario,
    config: &ScalarizationConfig,
    kind: ProblemKind,
    mode: OverlapMode,
    options: &AllocationOptions,
    warm: &[Allocation],
    outcome: AllocationOutcome,
) -> Result<AllocationOutcome> {
    let key = |a: &Assignment| {
        (0..scenario.num_ues())
            .map(|m| a.subband_of(m))
            .collect::<Vec<_>>()
    };
    let (mut iterations, mut work) = (outcome.iterations, outcome.work);
    let mut cache: HashMap<Vec<Option<usize>>, Option<Allocation>> = HashMap::new();
    let mut pinned =
        |assignment: &Assignment, start: Option<&Allocation>| -> Result<Option<Allocation>> {
            if let Some(hit) = cache.get(&key(assignment)) {
                return Ok(hit.clone());
            }
            let mut starts: Vec<&Allocation> = warm.iter().collect();
            starts.extend(start);
            let stage = solve_pinned(
                scenario,
                config,
                kind,
                mode,
                assignment,
                &options.pinned,
                &starts,
            )?;
            iterations += stage.iterations;
            work += stage.work;
            cache.insert(key(assignment), stage.allocation.clone());
            Ok(stage.allocation)
        };

    let mut seeds: Vec<Allocation> = outcome.allocation.iter().chain(warm).cloned().collect();
    if let Some(greedy) = strongest_subbands(scenario) {
        seeds.extend(pinned(&greedy, None)?);
    }
    let must_serve = scenario.config.qos_rate_bps_hz > 0.0;
    let targets: Vec<Option<usize>> = (!must_serve)
        .then_some(None)
        .into_iter()
        .chain((0..scenario.num_subbands()).map(Some))
        .collect();
    let mut best: Option<Allocation> = None;
    for seed in seeds {
        let mut current = seed;
        loop {
            let mut step: Option<Allocation> = None;
            for ue in 0..scenario.num_ues() {
                for &to in &targets {
                    if to == current.assignment.subband_of(ue) {
                        continue;
                    }
                    let (assignment, start) = moved(scenario, config, kind, &current, ue, to)?;
                    if !fits(scenario, &assignment) {
                        continue;
                    }
                    if let Some(a) = pinned(&assignment, start.as_ref())? {
                        if better(kind, &a, step.as_ref().unwrap_or(&current)) {
                            step = Some(a);
                        }
                    }
                }
            }
            match step {
                Some(a) => current = a,
                None => break,
            }
        }
        if best.as_ref().is_none_or(|b| better(kind, &current, b)) {
            best = Some(current);
        }
    }
    let Some(a) = best else {
        return Ok(AllocationOutcome {
            iterations,
            work,
            ..outcome
        });
    };
    let status = if outcome.status == SolveStatus::Infeasible {
        SolveStatus::IterLimit
    } else {
        outcome.status
    };
    Ok(AllocationOutcome {
        objective: objective_of(kind, &a),
        allocation: Some(a),
        status,
        iterations,
        work,
        ..outcome
    })
}
