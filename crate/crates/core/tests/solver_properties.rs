use doma_core::polyblock::{solve, DifProblem, SolveResult, SolveStatus, SolverOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Maximize `w . x` over `{a . x^2 <= 1} ∩ {sum x >= c}` inside `[0, 1]^d`.
#[derive(Debug, Clone)]
struct Family {
    w: Vec<f64>,
    a: Vec<f64>,
    c: f64,
}

impl Family {
    fn objective(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, x)| w * x).sum()
    }

    fn normal(&self, x: &[f64]) -> bool {
        self.a.iter().zip(x).map(|(a, x)| a * x * x).sum::<f64>() <= 1.0
    }

    fn conormal(&self, x: &[f64]) -> bool {
        x.iter().sum::<f64>() >= self.c
    }

    fn problem(&self) -> DifProblem<'_> {
        DifProblem::new(
            vec![1.0; self.w.len()],
            |x| self.objective(x),
            |x| self.normal(x),
            |x| self.conormal(x),
        )
    }
}

fn family() -> impl Strategy<Value = Family> {
    (2usize..=3).prop_flat_map(|d| {
        (
            prop::collection::vec(0.1f64..2.0, d),
            prop::collection::vec(0.5f64..4.0, d),
            0.0f64..0.5,
        )
            .prop_map(|(w, a, c)| Family { w, a, c })
    })
}

fn run(f: &Family, max_iter: usize) -> SolveResult {
    solve(
        &f.problem(),
        &SolverOptions::default()
            .with_max_iter(max_iter)
            .with_trace(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bounds_and_incumbent_move_monotonically(f in family()) {
        let r = run(&f, 300);
        for pair in r.state.upper_bound_history.windows(2) {
            prop_assert!(pair[1] <= pair[0]);
        }
        for pair in r.state.trace.windows(2) {
            prop_assert!(pair[1].best_value >= pair[0].best_value);
        }
        if let Some(x) = &r.point {
            prop_assert!(f.normal(x) && f.conormal(x));
        }
    }

    #[test]
    fn identical_inputs_give_identical_results(f in family()) {
        prop_assert_eq!(run(&f, 150), run(&f, 150));
    }

    #[test]
    fn vertices_cover_every_better_feasible_point(f in family(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Vec<f64>> = std::iter::repeat_with(|| (0..f.w.len()).map(|_| rng.random::<f64>()).collect::<Vec<f64>>())
            .filter(|x| f.normal(x) && f.conormal(x))
            .take(200)
            .collect();
        for iters in [0, 1, 2, 5, 10, 25] {
            let r = run(&f, iters);
            if r.status != SolveStatus::IterLimit {
                continue;
            }
            let best = r.state.best_value();
            for z in samples.iter().filter(|z| f.objective(z) > best) {
                let covered = r.state.vertices.iter().any(|v| v.point.iter().zip(z.iter()).all(|(a, b)| a >= b));
                prop_assert!(covered, "{z:?} escaped after {iters} iterations");
            }
        }
    }
}

#[test]
fn two_dimensional_problems_match_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let points = 401;
    let step = 1.0 / (points - 1) as f64;
    for _ in 0..20 {
        let f = Family {
            w: vec![rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)],
            a: vec![rng.random_range(0.5..4.0), rng.random_range(0.5..4.0)],
            c: rng.random_range(0.0..0.5),
        };
        let mut grid = f64::NEG_INFINITY;
        for i in 0..points {
            for j in 0..points {
                let x = [i as f64 * step, j as f64 * step];
                if f.normal(&x) && f.conormal(&x) {
                    grid = grid.max(f.objective(&x));
                }
            }
        }
        let r = solve(&f.problem(), &SolverOptions::default().with_max_iter(5000)).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        let tol = (1e-3 * r.value.abs().max(1.0)).max(f.w.iter().sum::<f64>() * step);
        assert!(
            (r.value - grid).abs() <= tol,
            "solver {} grid {grid}",
            r.value
        );
    }
}
