//! Strongly convergent primal-dual solver for the best-approximation problem
//! over the Kuhn-Tucker set of a composite inclusion `0 in Ax + L*BLx`.
//!
//! The Kuhn-Tucker set is `Z = {(x, v*) : -L*v* in Ax and Lx in B^{-1}v*}`;
//! its members solve the primal and dual inclusions simultaneously. Starting
//! from a reference pair `(x0, v0*)`, each iteration selects graph points of
//! `A` and `B` through resolvent evaluations, takes the induced half-step, and
//! projects the reference point onto the intersection of the two running
//! half-spaces (the Haugazeau update). The iterates converge strongly to the
//! projection of `(x0, v0*)` onto `Z`. Bypassing the projection yields the
//! classical Fejer-monotone variant, which only reaches an unspecified
//! Kuhn-Tucker point.
//!
//! Neither mode needs the operator norm `||L||` or any inversion of `L`; the
//! norm enters diagnostics only.

use thiserror::Error;

use crate::haugazeau::{project_q_with_scalars, EmptyIntersection, QScalars};
use crate::operators::{GraphPoint, MonotoneOp, OperatorError};
use crate::space::{InnerSpace, LinearMap, SpaceError, Vector};

/// Iterations the step-size stop must fire consecutively before it counts.
const STEP_TOL_PATIENCE: usize = 5;

/// A primal-dual pair `(x, v*)` in `H (+) G`, the iterate of every algorithm
/// here. Inner products add the primal part first, then the dual part,
/// matching the blockwise reductions of the update formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDual {
    pub x: Vector,
    pub v_star: Vector,
}

impl PrimalDual {
    pub fn new(x: Vector, v_star: Vector) -> Self {
        PrimalDual { x, v_star }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.v_star.is_finite()
    }
}

impl InnerSpace for PrimalDual {
    fn dot(&self, other: &Self) -> f64 {
        self.x.dot(&other.x) + self.v_star.dot(&other.v_star)
    }
    fn add(&self, other: &Self) -> Self {
        PrimalDual {
            x: self.x.add(&other.x),
            v_star: self.v_star.add(&other.v_star),
        }
    }
    fn sub(&self, other: &Self) -> Self {
        PrimalDual {
            x: self.x.sub(&other.x),
            v_star: self.v_star.sub(&other.v_star),
        }
    }
    fn scale(&self, factor: f64) -> Self {
        PrimalDual {
            x: self.x.scale(factor),
            v_star: self.v_star.scale(factor),
        }
    }
}

/// The composite inclusion data: `A` on `H`, `B` on `G`, the coupling `L`,
/// and the reference point the solver projects onto the Kuhn-Tucker set.
/// Solvability of the primal inclusion is a documented precondition, not
/// something the solver checks.
#[derive(Debug, Clone)]
pub struct KTProblem {
    pub a: MonotoneOp,
    pub b: MonotoneOp,
    pub l: LinearMap,
    pub x0: Vector,
    pub v0_star: Vector,
}

impl KTProblem {
    pub fn validate(&self) -> Result<(), SolverError> {
        let checks = [
            (self.a.dim(), self.l.domain_dim(), "A dimension vs L domain"),
            (
                self.b.dim(),
                self.l.codomain_dim(),
                "B dimension vs L codomain",
            ),
            (
                self.x0.dim(),
                self.l.domain_dim(),
                "x0 dimension vs L domain",
            ),
            (
                self.v0_star.dim(),
                self.l.codomain_dim(),
                "v0* dimension vs L codomain",
            ),
        ];
        for (got, want, what) in checks {
            if got != want {
                return Err(SolverError::Dimension(format!("{what}: {got} != {want}")));
            }
        }
        if !self.x0.is_finite() || !self.v0_star.is_finite() {
            return Err(SolverError::Dimension(
                "reference point has non-finite coordinates".into(),
            ));
        }
        Ok(())
    }
}

/// Output of one selection step: graph points of `A` and `B` together with
/// the derived residual directions.
///
/// Invariants (enforced by construction, re-checked by the diagnostics
/// suites): `(a, a*) in gra A`, `(b, b*) in gra B`, `s* = a* + L*b*`,
/// `t = b - La`, `tau = ||s*||^2 + ||t||^2`, and the numerator feeding the
/// relaxation step equals `<x-a, a* + L*v*> + <Lx-b, b* - v*>` at the iterate
/// that produced the selection.
#[derive(Debug, Clone)]
pub struct GraphSelection {
    pub a: Vector,
    pub b: Vector,
    pub a_star: Vector,
    pub b_star: Vector,
    pub s_star: Vector,
    pub t: Vector,
    pub tau: f64,
    pub theta_numerator: f64,
}

impl GraphSelection {
    /// Builds a selection from arbitrary graph points, computing the step
    /// numerator by its defining inner-product formula. Custom selection
    /// oracles route through here.
    pub fn from_graph_points(
        l: &LinearMap,
        x_n: &Vector,
        v_n_star: &Vector,
        a: GraphPoint,
        b: GraphPoint,
    ) -> Self {
        let s_star = a.a_star.add(&l.adjoint_apply(&b.a_star));
        let t = b.a.sub(&l.apply(&a.a));
        let tau = s_star.norm_sq() + t.norm_sq();
        let theta_numerator =
            x_n.dot(&s_star) + t.dot(v_n_star) - a.a.dot(&a.a_star) - b.a.dot(&b.a_star);
        GraphSelection {
            a: a.a,
            b: b.a,
            a_star: a.a_star,
            b_star: b.a_star,
            s_star,
            t,
            tau,
            theta_numerator,
        }
    }
}

/// Resolvent-based selection:
///
/// ```text
/// a = J_{gamma A}(x - gamma L* v*)        a* = (x - a)/gamma - L* v*
/// b = J_{mu B}(Lx + mu v*)                b* = (Lx - b)/mu + v*
/// s* = (x - a)/gamma + L*(Lx - b)/mu      t  = b - La
/// ```
///
/// with step numerator `||x - a||^2 / gamma + ||Lx - b||^2 / mu`.
pub fn select_resolvent(
    problem: &KTProblem,
    x_n: &Vector,
    v_n_star: &Vector,
    gamma: f64,
    mu: f64,
) -> Result<GraphSelection, OperatorError> {
    let l_adj_v = problem.l.adjoint_apply(v_n_star);
    let a = problem
        .a
        .resolvent(gamma, &x_n.sub(&l_adj_v.scale(gamma)))?;
    let l_n = problem.l.apply(x_n);
    let b = problem.b.resolvent(mu, &l_n.add(&v_n_star.scale(mu)))?;

    let x_minus_a = x_n.sub(&a);
    let l_minus_b = l_n.sub(&b);
    let s_star = x_minus_a
        .scale(1.0 / gamma)
        .add(&problem.l.adjoint_apply(&l_minus_b).scale(1.0 / mu));
    let t = b.sub(&problem.l.apply(&a));
    let a_star = x_minus_a.scale(1.0 / gamma).sub(&l_adj_v);
    let b_star = l_minus_b.scale(1.0 / mu).add(v_n_star);
    let tau = s_star.norm_sq() + t.norm_sq();
    let theta_numerator = x_minus_a.norm_sq() / gamma + l_minus_b.norm_sq() / mu;

    Ok(GraphSelection {
        a,
        b,
        a_star,
        b_star,
        s_star,
        t,
        tau,
        theta_numerator,
    })
}

/// One full update of the strongly convergent iteration: relaxation half-step
/// followed by the two-half-space projection of the reference point, with the
/// case scalars accumulated over the primal and dual blocks.
pub fn projection_step(
    reference: &PrimalDual,
    current: &PrimalDual,
    selection: &GraphSelection,
    lambda: f64,
) -> Result<PrimalDual, EmptyIntersection> {
    let (_, _, _, next) = step_detail(reference, current, selection, lambda, Mode::Haugazeau);
    next
}

/// Shared step internals: computes theta, the half-step, the case scalars,
/// and the next iterate for either mode.
fn step_detail(
    reference: &PrimalDual,
    current: &PrimalDual,
    selection: &GraphSelection,
    lambda: f64,
    mode: Mode,
) -> (
    f64,
    PrimalDual,
    QScalars,
    Result<PrimalDual, EmptyIntersection>,
) {
    let theta = if selection.tau == 0.0 {
        0.0
    } else {
        lambda * selection.theta_numerator / selection.tau
    };
    let half = PrimalDual {
        x: current.x.sub(&selection.s_star.scale(theta)),
        v_star: current.v_star.sub(&selection.t.scale(theta)),
    };
    match mode {
        Mode::Haugazeau => {
            let (scalars, next) = project_q_with_scalars(reference, current, &half);
            (theta, half, scalars, next)
        }
        Mode::Fejer => {
            // The projection is bypassed; the scalars are still recorded for
            // diagnostics.
            let scalars = QScalars::compute(reference, current, &half);
            (theta, half.clone(), scalars, Ok(half))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Project back after each half-step; converges strongly to the best
    /// Kuhn-Tucker approximation of the reference point.
    Haugazeau,
    /// Keep the half-step; Fejer-monotone, converges to an unspecified
    /// Kuhn-Tucker point.
    Fejer,
}

/// Parameter schedule `n -> value`.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// Cycles through the listed values.
    Cycle(Vec<f64>),
}

impl Schedule {
    pub fn value(&self, n: usize) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::Cycle(vs) => vs[n % vs.len()],
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Schedule::Constant(v) => std::slice::from_ref(v),
            Schedule::Cycle(vs) => vs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mode: Mode,
    /// The range parameter `epsilon in (0, 1)` bounding every schedule.
    pub epsilon: f64,
    /// Relaxation: `[epsilon, 1]` in Haugazeau mode, `[epsilon, 2 - epsilon]`
    /// in Fejer mode.
    pub lambda: Schedule,
    /// Resolvent parameters, both in `[epsilon, 1/epsilon]`.
    pub gamma: Schedule,
    pub mu: Schedule,
    pub max_iters: usize,
    /// Stop with a certified Kuhn-Tucker point once `tau <= tau_tol`; only
    /// this stop certifies the projection.
    pub tau_tol: f64,
    /// Secondary stop once the iterate moves by at most this much for
    /// [`STEP_TOL_PATIENCE`] consecutive iterations.
    pub dist_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: Mode::Haugazeau,
            epsilon: 0.1,
            lambda: Schedule::Constant(1.0),
            gamma: Schedule::Constant(1.0),
            mu: Schedule::Constant(1.0),
            max_iters: 5000,
            tau_tol: 1e-16,
            dist_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn fejer() -> Self {
        SolverConfig {
            mode: Mode::Fejer,
            lambda: Schedule::Constant(1.8),
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let eps = self.epsilon;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(SolverError::Config(format!(
                "epsilon must lie in (0, 1), got {eps}"
            )));
        }
        for (name, sched) in [
            ("lambda", &self.lambda),
            ("gamma", &self.gamma),
            ("mu", &self.mu),
        ] {
            if sched.values().is_empty() {
                return Err(SolverError::Config(format!(
                    "{name} cycle must list at least one value"
                )));
            }
        }
        let lambda_hi = match self.mode {
            Mode::Haugazeau => 1.0,
            Mode::Fejer => 2.0 - eps,
        };
        for &v in self.lambda.values() {
            if !(v >= eps && v <= lambda_hi) {
                return Err(SolverError::Config(format!(
                    "lambda value {v} outside [{eps}, {lambda_hi}]"
                )));
            }
        }
        for (name, sched) in [("gamma", &self.gamma), ("mu", &self.mu)] {
            for &v in sched.values() {
                if !(v >= eps && v <= 1.0 / eps) {
                    return Err(SolverError::Config(format!(
                        "{name} value {v} outside [{eps}, {}]",
                        1.0 / eps
                    )));
                }
            }
        }
        if self.max_iters == 0 {
            return Err(SolverError::Config("max_iters must be positive".into()));
        }
        for (name, value) in [("tau_tol", self.tau_tol), ("dist_tol", self.dist_tol)] {
            if value.is_nan() || value < 0.0 {
                return Err(SolverError::Config(format!(
                    "{name} must be nonnegative, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-iteration record: the state at iteration `n` and everything computed
/// during it. Rows where a stop fired before the half-step keep the
/// stationary values (`theta = 0`, half-step equal to the iterate).
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub n: usize,
    pub gamma: f64,
    pub mu: f64,
    pub lambda: f64,
    pub selection: GraphSelection,
    pub theta: f64,
    pub scalars: QScalars,
    /// `||(x0, v0*) - (x_n, v_n*)||`; nondecreasing in Haugazeau mode.
    pub start_distance: f64,
    pub s_norm: f64,
    pub t_norm: f64,
    /// `||x_n - a_n||`
    pub primal_residual: f64,
    /// `||L x_n - b_n||`
    pub dual_residual: f64,
    pub x: Vector,
    pub v_star: Vector,
    pub x_half: Vector,
    pub v_half: Vector,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// `tau` fell below `tau_tol`: the iterate is a Kuhn-Tucker point and, in
    /// Haugazeau mode, the projection of the reference point.
    KtPointReached,
    /// The iterate stalled below `dist_tol` for the patience window.
    StepTolerance,
    MaxIters,
    /// Empty half-space intersection: numerical breakdown (a nonempty
    /// Kuhn-Tucker set makes this impossible in exact arithmetic).
    Breakdown,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::KtPointReached => "kt_point_reached",
            SolveStatus::StepTolerance => "step_tolerance",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::Breakdown => "breakdown",
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(
            self,
            SolveStatus::KtPointReached | SolveStatus::StepTolerance
        )
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vector,
    pub v_star: Vector,
    pub status: SolveStatus,
    /// Scalars of the failed projection when `status` is `Breakdown`.
    pub breakdown: Option<QScalars>,
    pub trace: Trace,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("inconsistent problem dimensions: {0}")]
    Dimension(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite { iteration: usize, trace: Box<Trace> },
}

/// Runs the iteration with the shipped resolvent-based selection.
pub fn solve(problem: &KTProblem, config: &SolverConfig) -> Result<Solution, SolverError> {
    solve_with_selection(problem, config, |n, x, v| {
        select_resolvent(problem, x, v, config.gamma.value(n), config.mu.value(n))
            .map_err(SolverError::from)
    })
}

/// Fejer baseline: the projection step is bypassed and the relaxation range
/// widens to `[epsilon, 2 - epsilon]`. The limit is some Kuhn-Tucker point,
/// not necessarily the nearest one.
pub fn fejer_solve(problem: &KTProblem, config: &SolverConfig) -> Result<Solution, SolverError> {
    if config.mode != Mode::Fejer {
        return Err(SolverError::Config(
            "fejer_solve requires config.mode = Fejer".into(),
        ));
    }
    solve(problem, config)
}

/// Generic iteration over a pluggable selection oracle. The oracle must
/// return selections satisfying the graph and inequality invariants of
/// [`GraphSelection`]; the shipped resolvent rule is the only oracle provided
/// here.
pub fn solve_with_selection<F>(
    problem: &KTProblem,
    config: &SolverConfig,
    mut select: F,
) -> Result<Solution, SolverError>
where
    F: FnMut(usize, &Vector, &Vector) -> Result<GraphSelection, SolverError>,
{
    config.validate()?;
    problem.validate()?;

    let reference = PrimalDual::new(problem.x0.clone(), problem.v0_star.clone());
    let mut current = reference.clone();
    let mut trace = Trace::default();
    let mut quiet_steps = 0usize;

    for n in 0..config.max_iters {
        let gamma = config.gamma.value(n);
        let mu = config.mu.value(n);
        let lambda = config.lambda.value(n);
        let selection = select(n, &current.x, &current.v_star)?;

        let s_norm = selection.s_star.norm();
        let t_norm = selection.t.norm();
        let primal_residual = current.x.sub(&selection.a).norm();
        let dual_residual = problem.l.apply(&current.x).sub(&selection.b).norm();
        let start_distance = reference.sub(&current).norm();

        let stop_on_tau = selection.tau <= config.tau_tol;
        let (theta, half, scalars, next) = if stop_on_tau {
            let scalars = QScalars::compute(&reference, &current, &current);
            (0.0, current.clone(), scalars, Ok(current.clone()))
        } else {
            step_detail(&reference, &current, &selection, lambda, config.mode)
        };

        trace.records.push(IterationRecord {
            n,
            gamma,
            mu,
            lambda,
            selection,
            theta,
            scalars,
            start_distance,
            s_norm,
            t_norm,
            primal_residual,
            dual_residual,
            x: current.x.clone(),
            v_star: current.v_star.clone(),
            x_half: half.x.clone(),
            v_half: half.v_star.clone(),
        });

        if stop_on_tau {
            return Ok(Solution {
                x: current.x,
                v_star: current.v_star,
                status: SolveStatus::KtPointReached,
                breakdown: None,
                trace,
            });
        }

        let next = match next {
            Ok(p) => p,
            Err(empty) => {
                return Ok(Solution {
                    x: current.x,
                    v_star: current.v_star,
                    status: SolveStatus::Breakdown,
                    breakdown: Some(empty.scalars),
                    trace,
                });
            }
        };

        if !next.is_finite() {
            return Err(SolverError::NonFinite {
                iteration: n,
                trace: Box::new(trace),
            });
        }

        let step = next.sub(&current).norm();
        current = next;
        if step <= config.dist_tol {
            quiet_steps += 1;
            if quiet_steps >= STEP_TOL_PATIENCE {
                return Ok(Solution {
                    x: current.x,
                    v_star: current.v_star,
                    status: SolveStatus::StepTolerance,
                    breakdown: None,
                    trace,
                });
            }
        } else {
            quiet_steps = 0;
        }
    }

    Ok(Solution {
        x: current.x,
        v_star: current.v_star,
        status: SolveStatus::MaxIters,
        breakdown: None,
        trace,
    })
}

/// Kuhn-Tucker residual norms `(||s*||, ||t||)` from a fresh selection at
/// `(x, v*)`; both small certifies approximate membership in the Kuhn-Tucker
/// set.
pub fn kt_residual(
    problem: &KTProblem,
    x: &Vector,
    v_star: &Vector,
    gamma: f64,
    mu: f64,
) -> Result<(f64, f64), OperatorError> {
    let sel = select_resolvent(problem, x, v_star, gamma, mu)?;
    Ok((sel.s_star.norm(), sel.t.norm()))
}
