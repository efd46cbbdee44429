use doma_core::allocation::{solve_allocation, AllocationOptions, AssignmentStrategy};
use doma_core::network::{generate_scenario, Scenario, SystemConfig};
use doma_core::oracle::{exhaustive_best, GridSpec, OracleObjective};
use doma_core::polyblock::SolveStatus;
use doma_core::rates::check_constraints;
use doma_core::scalarization::{
    utopia_points, OverlapMode, ProblemKind, ScalarizationConfig, UtopiaOptions,
};

fn setup(cfg: SystemConfig, weight: f64) -> (Scenario, ScalarizationConfig) {
    let scn = generate_scenario(&cfg).unwrap();
    let u = utopia_points(&scn, &UtopiaOptions::default()).unwrap();
    let cfg = ScalarizationConfig::for_scenario(weight, u, &scn).unwrap();
    (scn, cfg)
}

#[test]
fn both_assignment_paths_reach_the_grid_optimum_on_tiny_drops() {
    let grid = GridSpec::new(21, OverlapMode::PerSubband);
    for seed in [0, 4, 12] {
        let (scn, cfg) = setup(SystemConfig::tiny().with_seed(seed), 0.5);
        let oracle = exhaustive_best(&scn, &grid, &OracleObjective::Tchebycheff(cfg.clone()))
            .unwrap()
            .unwrap();
        for cap in [64, 0] {
            let opts = AllocationOptions {
                strategy: AssignmentStrategy::Auto,
                enumerate_cap: cap,
                ..Default::default()
            };
            let out = solve_allocation(
                &scn,
                &cfg,
                ProblemKind::Tchebycheff,
                OverlapMode::PerSubband,
                &opts,
                &[],
            )
            .unwrap();
            let a = out.allocation.expect("feasible");
            assert!(
                check_constraints(&scn, &a.assignment, &a.powers, &a.overlap)
                    .unwrap()
                    .feasible()
            );
            assert!(
                a.lambda <= oracle.value * 1.01,
                "seed {seed} cap {cap}: {} vs {}",
                a.lambda,
                oracle.value
            );
        }
    }
}

#[test]
fn warm_start_from_a_nested_mode_is_never_lost() {
    let (scn, cfg) = setup(SystemConfig::desk_scale().with_seed(7), 0.5);
    let opts = AllocationOptions::default();
    let mut warm = Vec::new();
    let mut previous = f64::INFINITY;
    for mode in [
        OverlapMode::Disabled,
        OverlapMode::Shared,
        OverlapMode::PerSubband,
    ] {
        let out =
            solve_allocation(&scn, &cfg, ProblemKind::Tchebycheff, mode, &opts, &warm).unwrap();
        let a = out.allocation.unwrap();
        assert!(
            a.lambda <= previous + 1e-12,
            "{mode:?}: {} after {previous}",
            a.lambda
        );
        previous = a.lambda;
        warm.push(a);
    }
}

#[test]
fn disabled_mode_keeps_every_overlap_at_zero() {
    let (scn, cfg) = setup(SystemConfig::tiny().with_seed(2), 0.5);
    let out = solve_allocation(
        &scn,
        &cfg,
        ProblemKind::Tchebycheff,
        OverlapMode::Disabled,
        &AllocationOptions::default(),
        &[],
    )
    .unwrap();
    let ov = out.allocation.unwrap().overlap;
    for n in 0..scn.num_subbands() {
        assert_eq!(ov.bandwidth_factor(0, n), 1.0);
    }
}

#[test]
fn sum_rate_never_falls_below_the_utopia_search() {
    let scn = generate_scenario(&SystemConfig::tiny().with_seed(9)).unwrap();
    let u = utopia_points(&scn, &UtopiaOptions::default()).unwrap();
    let cfg = ScalarizationConfig::for_scenario(1.0, u, &scn).unwrap();
    let out = solve_allocation(
        &scn,
        &cfg,
        ProblemKind::SumRate,
        OverlapMode::PerSubband,
        &AllocationOptions::default(),
        &[],
    )
    .unwrap();
    // The utopia search is a 51-point grid, so the solver may beat it slightly.
    assert!(out.objective >= u.spectral_efficiency * 0.99);
    assert_ne!(out.status, SolveStatus::Infeasible);
}
