//! Outer polyblock approximation for monotonic optimization.
//!
//! Maximizes an increasing objective over `Xi ∩ Xi_c ∩ [0, b]`, where `Xi` is
//! a normal (downward-closed) set and `Xi_c` a co-normal (upward-closed) set,
//! both given as membership oracles. The search keeps a set of vertices whose
//! boxes `[0, v]` jointly cover the feasible set. Each iteration takes the
//! vertex with the largest objective, projects it onto the upper boundary of
//! `Xi` along the ray through the origin, and replaces it with its children.

use std::cmp::Ordering;
use std::fmt::Write as _;

use thiserror::Error;

type Objective<'a> = Box<dyn Fn(&[f64]) -> f64 + Send + Sync + 'a>;
type Oracle<'a> = Box<dyn Fn(&[f64]) -> bool + Send + Sync + 'a>;
type Polish<'a> = Box<dyn Fn(&[f64], f64) -> Option<Vec<f64>> + Send + Sync + 'a>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("non-finite objective value {value} at {point:?}")]
    NonFinite { value: f64, point: Vec<f64> },
    #[error("the origin is not in the normal set")]
    OriginOutsideNormalSet,
    #[error("box upper bound must be finite and non-negative, got {0:?}")]
    InvalidBox(Vec<f64>),
    #[error("incumbent of length {got} for a problem of dimension {expected}")]
    IncumbentShape { got: usize, expected: usize },
}

/// A canonical monotonic problem: increasing objective, normal and co-normal
/// membership oracles, and the box `[0, upper]`.
pub struct DifProblem<'a> {
    upper: Vec<f64>,
    objective: Objective<'a>,
    normal: Oracle<'a>,
    conormal: Oracle<'a>,
    /// Subtracted from objective values when judging the relative gap.
    reference: f64,
    /// Maps a boundary point and the incumbent value to a nearby candidate
    /// worth testing as well.
    polish: Option<Polish<'a>>,
}

impl<'a> DifProblem<'a> {
    pub fn new(
        upper: Vec<f64>,
        objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'a,
        normal: impl Fn(&[f64]) -> bool + Send + Sync + 'a,
        conormal: impl Fn(&[f64]) -> bool + Send + Sync + 'a,
    ) -> Self {
        Self {
            upper,
            objective: Box::new(objective),
            normal: Box::new(normal),
            conormal: Box::new(conormal),
            reference: 0.0,
            polish: None,
        }
    }

    /// Problem whose co-normal set is the whole box.
    pub fn with_normal_only(
        upper: Vec<f64>,
        objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'a,
        normal: impl Fn(&[f64]) -> bool + Send + Sync + 'a,
    ) -> Self {
        Self::new(upper, objective, normal, |_| true)
    }

    /// Objective level treated as zero by the relative gap test.
    pub fn with_reference(mut self, reference: f64) -> Self {
        self.reference = reference;
        self
    }

    /// Every boundary projection is also passed through `polish` together
    /// with the incumbent value; a returned point becomes the incumbent
    /// whenever it is feasible and better. Bounds are unaffected.
    pub fn with_polish(
        mut self,
        polish: impl Fn(&[f64], f64) -> Option<Vec<f64>> + Send + Sync + 'a,
    ) -> Self {
        self.polish = Some(Box::new(polish));
        self
    }

    pub fn polished(&self, x: &[f64], best: f64) -> Option<Vec<f64>> {
        self.polish.as_ref().and_then(|p| p(x, best))
    }

    pub fn dim(&self) -> usize {
        self.upper.len()
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn reference(&self) -> f64 {
        self.reference
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }

    pub fn in_normal(&self, x: &[f64]) -> bool {
        (self.normal)(x)
    }

    pub fn in_conormal(&self, x: &[f64]) -> bool {
        (self.conormal)(x)
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.in_normal(x) && self.in_conormal(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative gap (against `max(1, |best - reference|)`) at which to stop.
    pub tol_gap: f64,
    pub tol_bisect: f64,
    pub max_iter: usize,
    pub max_vertices: usize,
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_gap: 1e-3,
            tol_bisect: 1e-6,
            max_iter: 500,
            max_vertices: 100_000,
            trace: false,
        }
    }
}

impl SolverOptions {
    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = true;
        self
    }

    /// Bisection steps per projection, `ceil(log2(1 / tol_bisect))`.
    pub fn bisection_steps(&self) -> usize {
        (1.0 / self.tol_bisect).log2().ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    IterLimit,
    Infeasible,
    MemoryLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::IterLimit => "iter_limit",
            Self::Infeasible => "infeasible",
            Self::MemoryLimit => "memory_limit",
        }
    }
}

/// A box corner with its cached objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasiblePoint {
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceLine {
    pub iter: usize,
    pub vertices: usize,
    pub upper_bound: f64,
    pub best_value: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyblockState {
    pub vertices: Vec<Vertex>,
    pub best: Option<FeasiblePoint>,
    pub upper_bound: f64,
    /// Outer iterations performed so far.
    pub iterations: usize,
    pub bisection_steps: usize,
    pub peak_vertices: usize,
    /// Vertex visits during selection plus bisection steps.
    pub work: u64,
    pub upper_bound_history: Vec<f64>,
    pub trace: Vec<TraceLine>,
}

impl PolyblockState {
    fn new(root: Vertex) -> Self {
        Self {
            upper_bound: root.value,
            vertices: vec![root],
            best: None,
            iterations: 0,
            bisection_steps: 0,
            peak_vertices: 1,
            work: 0,
            upper_bound_history: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn best_value(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.value)
    }

    pub fn gap(&self) -> f64 {
        self.upper_bound - self.best_value()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub point: Option<Vec<f64>>,
    pub value: f64,
    pub status: SolveStatus,
    pub state: PolyblockState,
}

/// Writes the iteration trace as whitespace-separated columns.
pub fn format_trace(trace: &[TraceLine]) -> String {
    let mut out = String::from("# iter vertices upper_bound best_value gap\n");
    for t in trace {
        let _ = writeln!(
            out,
            "{} {} {:.12e} {:.12e} {:.12e}",
            t.iter, t.vertices, t.upper_bound, t.best_value, t.gap
        );
    }
    out
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn dominated_by(x: &[f64], y: &[f64]) -> bool {
    x.iter().zip(y).all(|(a, b)| a <= b)
}

/// Index of the vertex with the largest objective; ties go to the
/// lexicographically smaller point. `None` when the set is empty.
pub fn select_vertex(vertices: &[Vertex]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in vertices.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(j) => {
                let w = &vertices[j];
                match v.value.total_cmp(&w.value) {
                    Ordering::Greater => Some(i),
                    Ordering::Equal if lex_cmp(&v.point, &w.point).is_lt() => Some(i),
                    _ => Some(j),
                }
            }
        };
    }
    best
}

/// Result of a boundary projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub scale: f64,
    pub steps: usize,
}

/// Projects `vertex` onto the upper boundary of the normal set along the ray
/// through the origin, returning `mu * vertex` with `mu` the largest scale in
/// `[0, 1]` whose image is normal-feasible (to within `tol_bisect`).
pub fn project_to_boundary(
    vertex: &[f64],
    normal: impl Fn(&[f64]) -> bool,
    tol_bisect: f64,
) -> Result<Projection, SolverError> {
    let zero = vec![0.0; vertex.len()];
    if !normal(&zero) {
        return Err(SolverError::OriginOutsideNormalSet);
    }
    if normal(vertex) {
        return Ok(Projection {
            point: vertex.to_vec(),
            scale: 1.0,
            steps: 0,
        });
    }
    let steps = (1.0 / tol_bisect).log2().ceil().max(0.0) as usize;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut probe = vec![0.0; vertex.len()];
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        for (p, v) in probe.iter_mut().zip(vertex) {
            *p = mid * v;
        }
        if normal(&probe) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Projection {
        point: vertex.iter().map(|v| lo * v).collect(),
        scale: lo,
        steps,
    })
}

/// Children `vertex - (vertex_i - projection_i) e_i` for every coordinate
/// where the projection is strictly below the vertex.
pub fn vertex_children(vertex: &[f64], projection: &[f64]) -> Vec<Vec<f64>> {
    (0..vertex.len())
        .filter(|&i| projection[i] < vertex[i])
        .map(|i| {
            let mut child = vertex.to_vec();
            child[i] = projection[i];
            child
        })
        .collect()
}

/// Replaces `vertices[index]` by its children, dropping children outside the
/// co-normal set, children whose objective cannot beat `best`, and children
/// dominated by a remaining vertex. Returns the number of objective
/// evaluations performed.
pub fn refine_vertices(
    problem: &DifProblem<'_>,
    vertices: &mut Vec<Vertex>,
    index: usize,
    projection: &[f64],
    best: f64,
) -> Result<usize, SolverError> {
    let parent = vertices.swap_remove(index);
    let mut evaluated = 0;
    let mut fresh: Vec<Vertex> = Vec::new();
    for child in vertex_children(&parent.point, projection) {
        if !problem.in_conormal(&child) {
            continue;
        }
        let value = problem.objective(&child);
        evaluated += 1;
        if !value.is_finite() {
            return Err(SolverError::NonFinite {
                value,
                point: child,
            });
        }
        if value <= best {
            continue;
        }
        if vertices.iter().any(|v| dominated_by(&child, &v.point)) {
            continue;
        }
        fresh.push(Vertex {
            point: child,
            value,
        });
    }
    vertices.extend(fresh);
    Ok(evaluated)
}

fn offer(
    state: &mut PolyblockState,
    problem: &DifProblem<'_>,
    point: Vec<f64>,
) -> Result<(), SolverError> {
    let value = problem.objective(&point);
    if !value.is_finite() {
        return Err(SolverError::NonFinite { value, point });
    }
    if value > state.best_value() {
        state.best = Some(FeasiblePoint { point, value });
    }
    Ok(())
}

fn converged(state: &PolyblockState, reference: f64, tol_gap: f64) -> bool {
    match &state.best {
        Some(best) => {
            state.upper_bound - best.value <= tol_gap * (best.value - reference).abs().max(1.0)
        }
        None => false,
    }
}

/// Runs the polyblock algorithm from the full box.
pub fn solve(
    problem: &DifProblem<'_>,
    options: &SolverOptions,
) -> Result<SolveResult, SolverError> {
    solve_with_incumbent(problem, options, None)
}

/// Runs the polyblock algorithm, optionally seeded with a known feasible
/// point whose value acts as an initial lower bound.
pub fn solve_with_incumbent(
    problem: &DifProblem<'_>,
    options: &SolverOptions,
    incumbent: Option<&[f64]>,
) -> Result<SolveResult, SolverError> {
    let upper = problem.upper().to_vec();
    if upper.iter().any(|u| !u.is_finite() || *u < 0.0) {
        return Err(SolverError::InvalidBox(upper));
    }
    if !problem.in_normal(&vec![0.0; upper.len()]) {
        return Err(SolverError::OriginOutsideNormalSet);
    }
    let root_value = problem.objective(&upper);
    if !root_value.is_finite() {
        return Err(SolverError::NonFinite {
            value: root_value,
            point: upper,
        });
    }
    let mut state = PolyblockState::new(Vertex {
        point: upper.clone(),
        value: root_value,
    });

    if !problem.in_conormal(&upper) {
        state.vertices.clear();
        return Ok(SolveResult {
            point: None,
            value: f64::NEG_INFINITY,
            status: SolveStatus::Infeasible,
            state,
        });
    }

    if let Some(x) = incumbent {
        if x.len() != upper.len() {
            return Err(SolverError::IncumbentShape {
                got: x.len(),
                expected: upper.len(),
            });
        }
        if problem.is_feasible(x) {
            let value = problem.objective(x);
            state.best = Some(FeasiblePoint {
                point: x.to_vec(),
                value,
            });
        }
    }

    let status = loop {
        let best_value = state.best_value();
        let visited = state.vertices.len();
        state.vertices.retain(|v| v.value > best_value);
        state.work += visited as u64;

        let Some(index) = select_vertex(&state.vertices) else {
            // Every box is exhausted: the incumbent is optimal.
            state.upper_bound = state.upper_bound.min(best_value.max(f64::NEG_INFINITY));
            break if state.best.is_some() {
                SolveStatus::Converged
            } else {
                SolveStatus::Infeasible
            };
        };
        state.upper_bound = state.vertices[index].value;
        state.upper_bound_history.push(state.upper_bound);

        if converged(&state, problem.reference(), options.tol_gap) {
            break SolveStatus::Converged;
        }
        if state.iterations >= options.max_iter {
            break SolveStatus::IterLimit;
        }
        state.iterations += 1;

        let vertex = state.vertices[index].point.clone();
        let projection =
            project_to_boundary(&vertex, |x| problem.in_normal(x), options.tol_bisect)?;
        state.bisection_steps += projection.steps;
        state.work += projection.steps as u64;

        if problem.in_conormal(&projection.point) {
            offer(&mut state, problem, projection.point.clone())?;
        }
        if let Some(candidate) = problem.polished(&projection.point, state.best_value()) {
            if candidate.len() == upper.len() && problem.is_feasible(&candidate) {
                offer(&mut state, problem, candidate)?;
            }
        }

        if projection.scale >= 1.0 {
            // The vertex itself is feasible, so its box holds nothing better.
            state.vertices.swap_remove(index);
        } else {
            let best_value = state.best_value();
            refine_vertices(
                problem,
                &mut state.vertices,
                index,
                &projection.point,
                best_value,
            )?;
        }
        state.peak_vertices = state.peak_vertices.max(state.vertices.len());

        if options.trace {
            state.trace.push(TraceLine {
                iter: state.iterations,
                vertices: state.vertices.len(),
                upper_bound: state.upper_bound,
                best_value: state.best_value(),
                gap: state.gap(),
            });
        }
        if state.vertices.len() > options.max_vertices {
            break SolveStatus::MemoryLimit;
        }
    };

    let (point, value) = match &state.best {
        Some(b) => (Some(b.point.clone()), b.value),
        None => (None, f64::NEG_INFINITY),
    };
    Ok(SolveResult {
        point,
        value,
        status,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex(dim: usize) -> DifProblem<'static> {
        DifProblem::with_normal_only(
            vec![1.0; dim],
            |x| x.iter().sum(),
            |x| x.iter().sum::<f64>() <= 1.0,
        )
    }

    #[test]
    fn selects_largest_value() {
        let vs = vec![
            Vertex {
                point: vec![1.0],
                value: 3.0,
            },
            Vertex {
                point: vec![2.0],
                value: 5.0,
            },
        ];
        assert_eq!(select_vertex(&vs), Some(1));
    }

    #[test]
    fn ties_go_to_lexicographically_smaller() {
        let vs = vec![
            Vertex {
                point: vec![1.0, 0.5],
                value: 2.0,
            },
            Vertex {
                point: vec![0.5, 1.0],
                value: 2.0,
            },
        ];
        assert_eq!(select_vertex(&vs), Some(1));
        assert_eq!(select_vertex(&[]), None);
    }

    #[test]
    fn projection_onto_simplex() {
        let p = project_to_boundary(&[1.0, 1.0], |x| x[0] + x[1] <= 1.0, 1e-6).unwrap();
        assert!((p.point[0] - 0.5).abs() < 1e-6 && (p.point[1] - 0.5).abs() < 1e-6);
        assert_eq!(p.steps, 20);
    }

    #[test]
    fn projection_of_inner_point_is_identity() {
        let p = project_to_boundary(&[0.2, 0.3], |x| x[0] + x[1] <= 1.0, 1e-6).unwrap();
        assert_eq!(p.point, vec![0.2, 0.3]);
        assert_eq!(p.scale, 1.0);
    }

    #[test]
    fn bisection_step_count() {
        let p = project_to_boundary(&[1.0, 1.0], |x| x[0] + x[1] <= 1.0, 2f64.powi(-20)).unwrap();
        assert_eq!(p.steps, 20);
        assert_eq!(
            SolverOptions {
                tol_bisect: 2f64.powi(-20),
                ..Default::default()
            }
            .bisection_steps(),
            20
        );
    }

    #[test]
    fn projection_requires_origin() {
        let err = project_to_boundary(&[1.0], |x| x[0] >= 0.5, 1e-6);
        assert_eq!(err, Err(SolverError::OriginOutsideNormalSet));
    }

    #[test]
    fn child_rule() {
        let kids = vertex_children(&[1.0, 1.0], &[0.5, 0.5]);
        assert_eq!(kids, vec![vec![0.5, 1.0], vec![1.0, 0.5]]);
    }

    #[test]
    fn children_below_best_are_dropped() {
        let p = simplex(2);
        let mut vs = vec![Vertex {
            point: vec![1.0, 1.0],
            value: 2.0,
        }];
        refine_vertices(&p, &mut vs, 0, &[0.5, 0.5], 1.6).unwrap();
        assert!(vs.is_empty());
        let mut vs = vec![Vertex {
            point: vec![1.0, 1.0],
            value: 2.0,
        }];
        refine_vertices(&p, &mut vs, 0, &[0.5, 0.5], 1.0).unwrap();
        assert_eq!(vs.len(), 2);
    }

    #[test]
    fn infeasible_when_box_corner_not_conormal() {
        let p = DifProblem::new(vec![1.0, 1.0], |x| x[0] + x[1], |_| true, |x| x[0] >= 2.0);
        let r = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.point.is_none());
        assert_eq!(r.state.iterations, 0);
    }

    #[test]
    fn simplex_cap_optimum() {
        let r = solve(&simplex(3), &SolverOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-3);
        let x = r.point.unwrap();
        assert!(x.iter().sum::<f64>() <= 1.0);
    }

    #[test]
    fn vertex_count_bounded_by_iterations() {
        let opts = SolverOptions::default().with_max_iter(200).with_trace();
        let r = solve(&simplex(3), &opts).unwrap();
        for t in &r.state.trace {
            assert!(t.vertices <= t.iter * 3 + 1);
        }
    }

    #[test]
    fn upper_bound_non_increasing() {
        let r = solve(&simplex(4), &SolverOptions::default().with_max_iter(300)).unwrap();
        for w in r.state.upper_bound_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn non_finite_objective_is_reported() {
        let p = DifProblem::with_normal_only(vec![1.0], |_| f64::NAN, |x| x[0] <= 0.5);
        assert!(matches!(
            solve(&p, &SolverOptions::default()),
            Err(SolverError::NonFinite { .. })
        ));
    }

    #[test]
    fn trace_format() {
        let r = solve(
            &simplex(2),
            &SolverOptions::default().with_max_iter(3).with_trace(),
        )
        .unwrap();
        let text = format_trace(&r.state.trace);
        assert!(text.starts_with("# iter vertices upper_bound best_value gap\n"));
        assert_eq!(text.lines().count(), r.state.trace.len() + 1);
    }
}
