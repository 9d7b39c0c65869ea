//! Runtime verification of the convergence-theory invariants and the operator
//! catalog properties. The solver never needs any of this to run; the checks
//! exist so traces and catalog entries can be audited against the guarantees
//! they are supposed to satisfy.

use rand::Rng;

use crate::operators::{graph_residual, GraphPoint, MonotoneOp, OperatorError, ProxFn};
use crate::solver::{KTProblem, Mode, PrimalDual, Trace};
use crate::space::{operator_norm_estimate, InnerSpace, Vector};

/// The selection-quality constant `alpha` certified by the resolvent rule:
/// `epsilon / (1 + ||L||^2 + 2 (1 - epsilon^2) max(1, ||L||^2))`.
pub fn alpha_bound(epsilon: f64, l_norm: f64) -> f64 {
    let n2 = l_norm * l_norm;
    epsilon / (1.0 + n2 + 2.0 * (1.0 - epsilon * epsilon) * n2.max(1.0))
}

/// Conservative `alpha` from a power-iteration norm estimate: the estimate is
/// a lower bound on `||L||`, so it gets inflated by 10% before entering the
/// (decreasing) formula.
pub fn alpha_from_estimate(problem: &KTProblem, epsilon: f64) -> f64 {
    let estimate = operator_norm_estimate(&problem.l, 200);
    alpha_bound(epsilon, 1.1 * estimate)
}

/// One failed invariant, with enough context to locate it in the trace.
#[derive(Debug, Clone)]
pub struct InvariantViolation {
    pub iteration: usize,
    pub what: String,
}

impl std::fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "iteration {}: {}", self.iteration, self.what)
    }
}

/// Full per-iteration audit of a solve trace against the convergence-theory
/// guarantees:
///
/// - the distance from the reference point never shrinks (Haugazeau mode),
///   slack 1e-12;
/// - both running half-spaces contain the known Kuhn-Tucker point `z`,
///   slack 1e-9;
/// - `theta_n >= epsilon * alpha` whenever `tau_n > 0`, with `alpha` from the
///   norm estimate (10% slack absorbed in [`alpha_from_estimate`]);
/// - the selection inequality `<x-a, a* + L*v*> + <Lx-b, b* - v*> >=
///   alpha (||a* + L*b*||^2 + ||La - b||^2)` holds at every iteration;
/// - the partial sums of `||s*||^2`, `||t||^2`, `||w_{n+1} - w_n||^2`,
///   `||x_n - a_n||^2`, and `||Lx_n - b_n||^2` stay below their theoretical
///   bounds derived from the start distance `||w_0 - z||`.
pub fn check_trace_invariants(
    problem: &KTProblem,
    trace: &Trace,
    mode: Mode,
    epsilon: f64,
    z_oracle: &PrimalDual,
) -> Vec<InvariantViolation> {
    let mut violations = Vec::new();
    let mut push =
        |n: usize, what: String| violations.push(InvariantViolation { iteration: n, what });

    let reference = PrimalDual::new(problem.x0.clone(), problem.v0_star.clone());
    let l_estimate = operator_norm_estimate(&problem.l, 200);
    let l_upper = 1.1 * l_estimate;
    let alpha = alpha_bound(epsilon, l_upper);
    let d0 = reference.sub(z_oracle).norm();
    let d0_sq = d0 * d0;

    let mut prev_distance = 0.0;
    let mut sum_s = 0.0;
    let mut sum_t = 0.0;
    let mut sum_steps = 0.0;
    let mut sum_primal = 0.0;
    let mut sum_dual = 0.0;

    for (idx, rec) in trace.records.iter().enumerate() {
        let n = rec.n;
        if mode == Mode::Haugazeau {
            if rec.start_distance < prev_distance - 1e-12 {
                push(
                    n,
                    format!(
                        "start distance shrank: {} after {}",
                        rec.start_distance, prev_distance
                    ),
                );
            }
            if rec.start_distance > d0 + 1e-9 {
                push(
                    n,
                    format!(
                        "start distance {} exceeds distance to the oracle point {}",
                        rec.start_distance, d0
                    ),
                );
            }
        }
        prev_distance = rec.start_distance;

        let w_n = PrimalDual::new(rec.x.clone(), rec.v_star.clone());
        let w_half = PrimalDual::new(rec.x_half.clone(), rec.v_half.clone());
        // The selection's cut H(w_n, w_half) contains Z in both modes.
        let cut = z_oracle.sub(&w_half).dot(&w_n.sub(&w_half));
        if cut > 1e-9 {
            push(
                n,
                format!("half-space H(w_n, w_half) misses the oracle point by {cut:.3e}"),
            );
        }
        // The anchor half-space H(w_0, w_n) contains Z only under the
        // projection update.
        if mode == Mode::Haugazeau {
            let anchor = z_oracle.sub(&w_n).dot(&reference.sub(&w_n));
            if anchor > 1e-9 {
                push(
                    n,
                    format!("half-space H(w_0, w_n) misses the oracle point by {anchor:.3e}"),
                );
            }
        }

        // Rows where a stop fired keep theta = 0 and a stationary half-step.
        let stop_row = rec.theta == 0.0 && rec.scalars.q_nu == 0.0;
        if rec.selection.tau > 0.0 && !stop_row && rec.theta < epsilon * alpha - 1e-15 {
            push(
                n,
                format!(
                    "theta {} fell below epsilon * alpha = {:.6e}",
                    rec.theta,
                    epsilon * alpha
                ),
            );
        }

        // Selection-quality inequality at the iterate that produced it.
        let lx = problem.l.apply(&rec.x);
        let lhs = rec.x.sub(&rec.selection.a).dot(
            &rec.selection
                .a_star
                .add(&problem.l.adjoint_apply(&rec.v_star)),
        ) + lx
            .sub(&rec.selection.b)
            .dot(&rec.selection.b_star.sub(&rec.v_star));
        let rhs = alpha * rec.selection.tau;
        if lhs < rhs - 1e-10 * (1.0 + rhs.abs()) {
            push(
                n,
                format!("selection inequality violated: {lhs:.6e} < alpha tau = {rhs:.6e}"),
            );
        }

        sum_s += rec.s_norm * rec.s_norm;
        sum_t += rec.t_norm * rec.t_norm;
        sum_primal += rec.primal_residual * rec.primal_residual;
        sum_dual += rec.dual_residual * rec.dual_residual;
        if let Some(next) = trace.records.get(idx + 1) {
            let step = PrimalDual::new(next.x.clone(), next.v_star.clone())
                .sub(&w_n)
                .norm_sq();
            sum_steps += step;
        }
    }

    if mode == Mode::Haugazeau {
        let last = trace.records.len().saturating_sub(1);
        if sum_steps > d0_sq + 1e-6 {
            push(
                last,
                format!("sum of squared steps {sum_steps:.6e} exceeds {d0_sq:.6e}"),
            );
        }
        let ae = alpha * epsilon;
        let residual_bound = d0_sq / (ae * ae) + 1e-6;
        if sum_s + sum_t > residual_bound {
            push(
                last,
                format!(
                    "sum of squared residual directions {:.6e} exceeds {residual_bound:.6e}",
                    sum_s + sum_t
                ),
            );
        }
        let eps_sq = epsilon * epsilon;
        let primal_bound = 2.0 / eps_sq * (sum_s + l_upper * l_upper / eps_sq * sum_t) + 1e-6;
        if sum_primal > primal_bound {
            push(
                last,
                format!(
                    "sum of squared primal residuals {sum_primal:.6e} exceeds {primal_bound:.6e}"
                ),
            );
        }
        let dual_bound = 2.0 * (l_upper * l_upper * sum_primal + sum_t) + 1e-6;
        if sum_dual > dual_bound {
            push(
                last,
                format!("sum of squared dual residuals {sum_dual:.6e} exceeds {dual_bound:.6e}"),
            );
        }
    }

    violations
}

/// Fejer monotonicity: the distance to any fixed Kuhn-Tucker point must be
/// nonincreasing along a bypassed-projection run, slack 1e-10.
pub fn check_fejer_monotonicity(trace: &Trace, z_oracle: &PrimalDual) -> Vec<InvariantViolation> {
    let mut violations = Vec::new();
    let mut prev = f64::INFINITY;
    for rec in &trace.records {
        let d = PrimalDual::new(rec.x.clone(), rec.v_star.clone())
            .sub(z_oracle)
            .norm();
        if d > prev + 1e-10 {
            violations.push(InvariantViolation {
                iteration: rec.n,
                what: format!("distance to the Kuhn-Tucker point grew: {d} after {prev}"),
            });
        }
        prev = d;
    }
    violations
}

/// Certifies the graph membership of a trace's selections after the fact.
pub fn check_selection_graphs(
    problem: &KTProblem,
    trace: &Trace,
    tol: f64,
) -> Result<(), InvariantViolation> {
    for rec in &trace.records {
        let ga = GraphPoint {
            a: rec.selection.a.clone(),
            a_star: rec.selection.a_star.clone(),
        };
        let ra = graph_residual(&problem.a, 1.0, &ga).map_err(|e| InvariantViolation {
            iteration: rec.n,
            what: e.to_string(),
        })?;
        let gb = GraphPoint {
            a: rec.selection.b.clone(),
            a_star: rec.selection.b_star.clone(),
        };
        let rb = graph_residual(&problem.b, 1.0, &gb).map_err(|e| InvariantViolation {
            iteration: rec.n,
            what: e.to_string(),
        })?;
        if ra > tol || rb > tol {
            return Err(InvariantViolation {
                iteration: rec.n,
                what: format!("selection left the operator graphs: residuals {ra:.3e}, {rb:.3e}"),
            });
        }
    }
    Ok(())
}

fn random_vector(dim: usize, scale: f64, rng: &mut impl Rng) -> Vector {
    Vector::new((0..dim).map(|_| rng.gen_range(-scale..scale)).collect())
        .expect("bounded samples are finite")
}

fn random_gamma(rng: &mut impl Rng) -> f64 {
    // Log-uniform over [0.1, 10].
    10f64.powf(rng.gen_range(-1.0..1.0))
}

/// Firm nonexpansiveness of the resolvent on random pairs:
/// `||Jw1 - Jw2||^2 <= <Jw1 - Jw2, w1 - w2>`, tolerance 1e-10.
pub fn check_firm_nonexpansiveness(
    op: &MonotoneOp,
    pairs: usize,
    rng: &mut impl Rng,
) -> Result<(), OperatorError> {
    let dim = op.dim();
    for _ in 0..pairs {
        let gamma = random_gamma(rng);
        let w1 = random_vector(dim, 5.0, rng);
        let w2 = random_vector(dim, 5.0, rng);
        let j1 = op.resolvent(gamma, &w1)?;
        let j2 = op.resolvent(gamma, &w2)?;
        let diff = j1.sub(&j2);
        let lhs = diff.norm_sq();
        let rhs = diff.dot(&w1.sub(&w2));
        if lhs > rhs + 1e-10 * (1.0 + rhs.abs()) {
            return Err(OperatorError::InvalidParameter(format!(
                "resolvent is not firmly nonexpansive: {lhs:.6e} > {rhs:.6e} at gamma {gamma:.3}"
            )));
        }
    }
    Ok(())
}

/// Moreau identity `J_{gamma A}(w) + gamma J_{A^{-1}/gamma}(w / gamma) = w`
/// on random inputs, tolerance 1e-10.
pub fn check_moreau_identity(
    op: &MonotoneOp,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<(), OperatorError> {
    let dim = op.dim();
    for _ in 0..trials {
        let gamma = random_gamma(rng);
        let w = random_vector(dim, 5.0, rng);
        let j = op.resolvent(gamma, &w)?;
        let ji = crate::operators::inverse_resolvent(op, 1.0 / gamma, &w.scale(1.0 / gamma))?;
        let recomposed = j.add(&ji.scale(gamma));
        if recomposed.sub(&w).norm() > 1e-10 * (1.0 + w.norm()) {
            return Err(OperatorError::InvalidParameter(format!(
                "Moreau identity violated at gamma {gamma:.3}"
            )));
        }
    }
    Ok(())
}

/// Prox optimality: `gamma f(prox(w)) + ||prox(w) - w||^2 / 2` must not exceed
/// the same expression at random probe points, slack 1e-9. Probes are drawn
/// near the prox output so indicator entries get informative (finite)
/// comparisons.
pub fn check_prox_optimality(
    f: &ProxFn,
    probches: usize,
    rng: &mut impl Rng,
) -> Result<(), OperatorError> {
    let op = f.operator()?;
    let dim = f.dim();
    for _ in 0..probches {
        let gamma = random_gamma(rng);
        let w = random_vector(dim, 3.0, rng);
        let p = op.resolvent(gamma, &w)?;
        let p_value = gamma * f.eval(&p) + 0.5 * p.sub(&w).norm_sq();
        let probe = p.add(&random_vector(dim, 1.5, rng));
        let probe_value = gamma * f.eval(&probe) + 0.5 * probe.sub(&w).norm_sq();
        if p_value > probe_value + 1e-9 {
            return Err(OperatorError::InvalidParameter(format!(
                "prox output is not the minimizer: {p_value:.9e} > {probe_value:.9e}"
            )));
        }
    }
    Ok(())
}

/// The standard catalog sample the property suites run over.
pub fn catalog_sample() -> Vec<MonotoneOp> {
    let v = |c: &[f64]| Vector::new(c.to_vec()).expect("finite literals");
    vec![
        MonotoneOp::zero(2),
        MonotoneOp::affine(&[vec![2.0, 0.5], vec![0.5, 1.0]], v(&[0.3, -0.7])).expect("SPD matrix"),
        MonotoneOp::box_normal_cone(vec![-1.0, 0.0], vec![1.0, 2.0]).expect("valid box"),
        MonotoneOp::box_normal_cone(vec![0.0], vec![f64::INFINITY]).expect("half-line box"),
        MonotoneOp::affine_set_normal_cone(&[vec![1.0, 1.0]], v(&[1.0])).expect("full row rank"),
        MonotoneOp::l1_subgradient(3, 0.75).expect("positive weight"),
        MonotoneOp::sq_dist_gradient(v(&[1.0, -2.0])),
        MonotoneOp::ball_normal_cone(v(&[0.5, 0.5]), 1.5).expect("positive radius"),
        MonotoneOp::scale(2, 2.5).expect("positive factor"),
        MonotoneOp::translated(
            MonotoneOp::l1_subgradient(2, 1.0).expect("positive weight"),
            v(&[1.0, -1.0]),
            v(&[0.5, 0.0]),
        )
        .expect("matching dimensions"),
        MonotoneOp::product(vec![
            MonotoneOp::box_normal_cone(vec![0.0], vec![1.0]).expect("valid box"),
            MonotoneOp::sq_dist_gradient(v(&[2.0])),
        ]),
        MonotoneOp::inverse(MonotoneOp::l1_subgradient(2, 1.0).expect("positive weight")),
    ]
}

/// The prox-capable entries the optimality suite runs over.
pub fn prox_sample() -> Vec<ProxFn> {
    let v = |c: &[f64]| Vector::new(c.to_vec()).expect("finite literals");
    vec![
        ProxFn::L1 {
            dim: 3,
            weight: 0.75,
        },
        ProxFn::SqDistance {
            target: v(&[1.0, -2.0]),
        },
        ProxFn::BoxIndicator {
            lo: vec![-1.0, 0.0],
            hi: vec![1.0, 2.0],
        },
        ProxFn::BallIndicator {
            center: v(&[0.5, 0.5]),
            radius: 1.5,
        },
    ]
}
