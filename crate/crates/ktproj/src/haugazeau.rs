//! Haugazeau outer approximation: the projector onto the intersection of two
//! half-spaces and the abstract best-approximation loop built on it.
//!
//! `H(x, y) = {h : <h - y, x - y> <= 0}` and `Q(x, y, z)` is the projection of
//! `x` onto `H(x, y) ∩ H(y, z)`, computed by exact case analysis on the
//! scalars chi, mu, nu, rho (named `q_*` here because the solver layer reuses
//! `mu` for a resolvent parameter). Iterating
//! `x_{n+1} = Q(x0, x_n, x_{n+1/2})` against half-steps whose half-spaces
//! contain the target set drives `x_n` strongly to the projection of `x0`.

use thiserror::Error;

use crate::space::InnerSpace;

/// Relative threshold under which `q_rho` counts as zero. `q_rho >= 0` holds
/// mathematically (Cauchy-Schwarz); rounding may cross zero.
const RHO_ZERO_RTOL: f64 = 1e-12;

/// Sign tolerance for `q_chi` in the emptiness case, relative to the
/// Cauchy-Schwarz bound `sqrt(q_mu q_nu)`. Near-stationary iterates produce
/// `q_chi` values a few ulps below zero that must not read as an empty
/// intersection.
const CHI_SIGN_RTOL: f64 = 1e-12;

/// The case-analysis scalars of the two-half-space projector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QScalars {
    /// `<x - y, y - z>`
    pub q_chi: f64,
    /// `||x - y||^2`
    pub q_mu: f64,
    /// `||y - z||^2`
    pub q_nu: f64,
    /// `q_mu * q_nu - q_chi^2`, clamped below at zero.
    pub q_rho: f64,
}

impl QScalars {
    pub fn compute<P: InnerSpace>(x: &P, y: &P, z: &P) -> Self {
        let d1 = x.sub(y);
        let d2 = y.sub(z);
        let q_chi = d1.dot(&d2);
        let q_mu = d1.norm_sq();
        let q_nu = d2.norm_sq();
        let raw = q_mu * q_nu - q_chi * q_chi;
        QScalars {
            q_chi,
            q_mu,
            q_nu,
            q_rho: raw.max(0.0),
        }
    }

    /// Floating-point classification of the `rho = 0` branch.
    pub fn rho_is_zero(&self) -> bool {
        self.q_rho <= RHO_ZERO_RTOL * (self.q_mu * self.q_nu).max(f64::MIN_POSITIVE)
    }

    /// Sign of `q_chi` with rounding tolerance scaled by its Cauchy-Schwarz
    /// bound.
    pub fn chi_is_nonnegative(&self) -> bool {
        self.q_chi >= -CHI_SIGN_RTOL * (self.q_mu * self.q_nu).sqrt()
    }
}

/// `H(x, y) ∩ H(y, z)` is empty; carries the scalars that witnessed it.
/// Inside the solver this signals numerical breakdown, since the outer loop
/// guarantees nonemptiness whenever the target set is nonempty.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error(
    "empty half-space intersection (q_chi={q_chi:.6e}, q_mu={q_mu:.6e}, q_nu={q_nu:.6e}, q_rho={q_rho:.6e})",
    q_chi = scalars.q_chi, q_mu = scalars.q_mu, q_nu = scalars.q_nu, q_rho = scalars.q_rho
)]
pub struct EmptyIntersection {
    pub scalars: QScalars,
}

/// Half-space `H(x, y) = {h : <h - y, x - y> <= 0}`; degenerate (the whole
/// space) when `x = y`.
#[derive(Debug, Clone)]
pub struct HalfSpace<P: InnerSpace> {
    pub anchor_x: P,
    pub anchor_y: P,
}

impl<P: InnerSpace> HalfSpace<P> {
    pub fn new(anchor_x: P, anchor_y: P) -> Self {
        HalfSpace { anchor_x, anchor_y }
    }

    pub fn contains(&self, h: &P, tol: f64) -> bool {
        halfspace_contains(self, h, tol)
    }
}

/// True iff `<h - y, x - y> <= tol`.
pub fn halfspace_contains<P: InnerSpace>(hs: &HalfSpace<P>, h: &P, tol: f64) -> bool {
    h.sub(&hs.anchor_y).dot(&hs.anchor_x.sub(&hs.anchor_y)) <= tol
}

/// Projects `x` onto `H(x, y) ∩ H(y, z)` by the four-case formula, returning
/// the scalars alongside the projection.
pub fn project_q_with_scalars<P: InnerSpace>(
    x: &P,
    y: &P,
    z: &P,
) -> (QScalars, Result<P, EmptyIntersection>) {
    let q = QScalars::compute(x, y, z);
    let point = if q.rho_is_zero() {
        if q.chi_is_nonnegative() {
            Ok(z.clone())
        } else {
            Err(EmptyIntersection { scalars: q })
        }
    } else if q.q_chi * q.q_nu >= q.q_rho {
        // q_nu > 0 here: q_nu = 0 forces q_rho = 0, handled above.
        Ok(x.add(&z.sub(y).scale(1.0 + q.q_chi / q.q_nu)))
    } else {
        let dir = x.sub(y).scale(q.q_chi).add(&z.sub(y).scale(q.q_mu));
        Ok(y.add(&dir.scale(q.q_nu / q.q_rho)))
    };
    (q, point)
}

/// Projection of `x` onto `H(x, y) ∩ H(y, z)`, the point of the intersection
/// nearest to `x`; `EmptyIntersection` when the intersection is empty.
pub fn project_q<P: InnerSpace>(x: &P, y: &P, z: &P) -> Result<P, EmptyIntersection> {
    project_q_with_scalars(x, y, z).1
}

/// One outer-approximation update `Q(x0, x_n, x_half)`.
pub fn outer_step<P: InnerSpace>(x0: &P, x_n: &P, x_half: &P) -> Result<P, EmptyIntersection> {
    project_q(x0, x_n, x_half)
}

/// Stopping control for [`run_outer_loop`].
#[derive(Debug, Clone, Copy)]
pub struct StoppingSpec {
    pub max_iters: usize,
    /// Stop once `||x_half - x_n|| <= halfstep_tol`; at an exact fixed point
    /// of the oracle the iterate has reached the projection.
    pub halfstep_tol: f64,
}

impl Default for StoppingSpec {
    fn default() -> Self {
        StoppingSpec {
            max_iters: 10_000,
            halfstep_tol: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterStatus {
    HalfstepFixedPoint,
    MaxIters,
}

/// Per-iteration record of the abstract loop.
#[derive(Debug, Clone)]
pub struct OuterRecord<P: InnerSpace> {
    pub n: usize,
    pub x: P,
    pub x_half: P,
    pub scalars: QScalars,
    pub start_distance: f64,
    pub step_norm: f64,
    pub halfstep_norm: f64,
}

/// Runs the abstract outer loop from `x0` against a half-step oracle.
///
/// The oracle receives the iteration index and current iterate and must
/// return a half-step whose half-space `H(x_n, x_half)` contains the target
/// set. Returns the final iterate, the per-iteration trace, and which stop
/// fired; an empty intersection propagates as breakdown.
pub fn run_outer_loop<P, F>(
    x0: &P,
    mut halfstep_oracle: F,
    stop: StoppingSpec,
) -> Result<(P, Vec<OuterRecord<P>>, OuterStatus), EmptyIntersection>
where
    P: InnerSpace,
    F: FnMut(usize, &P) -> P,
{
    let mut x = x0.clone();
    let mut trace = Vec::new();
    for n in 0..stop.max_iters {
        let x_half = halfstep_oracle(n, &x);
        let halfstep_norm = x_half.sub(&x).norm();
        let (scalars, next) = project_q_with_scalars(x0, &x, &x_half);
        let next = next?;
        trace.push(OuterRecord {
            n,
            x: x.clone(),
            x_half,
            scalars,
            start_distance: x0.sub(&x).norm(),
            step_norm: next.sub(&x).norm(),
            halfstep_norm,
        });
        if halfstep_norm <= stop.halfstep_tol {
            return Ok((x, trace, OuterStatus::HalfstepFixedPoint));
        }
        x = next;
    }
    Ok((x, trace, OuterStatus::MaxIters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::project_two_halfspaces;
    use crate::space::Vector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::new(vec![a, b]).unwrap()
    }

    #[test]
    fn contains_degenerate_and_sided() {
        let whole = HalfSpace::new(v2(0.0, 0.0), v2(0.0, 0.0));
        assert!(whole.contains(&v2(17.0, -3.0), 0.0));

        let hs = HalfSpace::new(v2(0.0, 0.0), v2(1.0, 0.0));
        assert!(hs.contains(&v2(2.0, 0.0), 0.0));
        assert!(!hs.contains(&v2(0.0, 5.0), 0.0));
    }

    #[test]
    fn project_q_degenerate_returns_z() {
        let x = v2(0.0, 0.0);
        let z = v2(1.0, 1.0);
        assert_eq!(project_q(&x, &x, &z).unwrap(), z);
    }

    #[test]
    fn project_q_two_dimensional_cases() {
        // chi*nu >= rho branch; oracle value is the projection of the origin
        // onto {h1 >= 1} ∩ {2 h1 + h2 >= 7}.
        let got = project_q(&v2(0.0, 0.0), &v2(1.0, 0.0), &v2(3.0, 1.0)).unwrap();
        assert!((got.coords()[0] - 2.8).abs() < 1e-12);
        assert!((got.coords()[1] - 1.4).abs() < 1e-12);

        // chi*nu < rho branch; both constraints active at z.
        let got = project_q(&v2(0.0, 0.0), &v2(1.0, 0.0), &v2(1.0, 1.0)).unwrap();
        assert!((got.coords()[0] - 1.0).abs() < 1e-12);
        assert!((got.coords()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn project_q_empty_intersection() {
        // Colinear with chi < 0: half-lines {h <= 0} and {h >= 1} in 1-D.
        let x = Vector::new(vec![1.0]).unwrap();
        let y = Vector::new(vec![0.0]).unwrap();
        let z = Vector::new(vec![1.0]).unwrap();
        let err = project_q(&x, &y, &z).unwrap_err();
        assert!(err.scalars.q_chi < 0.0);
    }

    #[test]
    fn outer_step_degenerate_cases() {
        let x0 = v2(2.0, 1.0);
        let x_n = v2(0.5, -0.25);
        // Stationary half-step returns x_n.
        assert_eq!(outer_step(&x0, &x_n, &x_n).unwrap(), x_n);
        // x0 = x_n returns the half-step.
        let x_half = v2(0.1, 0.2);
        assert_eq!(outer_step(&x0, &x0, &x_half).unwrap(), x_half);
    }

    #[test]
    fn project_q_matches_qp_oracle_on_random_triplets() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..1000 {
            let dim = 1 + trial % 5;
            let mut draw =
                || Vector::new((0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).unwrap();
            let (x, y, z) = (draw(), draw(), draw());
            let expected = project_two_halfspaces(&x, &y, &z);
            match (project_q(&x, &y, &z), expected) {
                (Ok(p), Some(q)) => {
                    assert!(
                        p.sub(&q).norm() <= 1e-9,
                        "trial {trial}: projector {:?} vs oracle {:?}",
                        p.coords(),
                        q.coords()
                    );
                }
                (Err(_), None) => {}
                (got, want) => panic!("trial {trial}: emptiness disagreement {got:?} vs {want:?}"),
            }
        }
    }

    #[test]
    fn outer_loop_single_halfspace() {
        // Oracle projects onto C = {h : h1 <= 0}; P_C(1, 0) = (0, 0).
        let project_c = |p: &Vector| {
            let mut c = p.coords().to_vec();
            if c[0] > 0.0 {
                c[0] = 0.0;
            }
            Vector::new(c).unwrap()
        };
        let x0 = v2(1.0, 0.0);
        let (limit, trace, status) = run_outer_loop(
            &x0,
            |_, p| project_c(p),
            StoppingSpec {
                max_iters: 50,
                halfstep_tol: 0.0,
            },
        )
        .unwrap();
        assert_eq!(status, OuterStatus::HalfstepFixedPoint);
        assert!(limit.sub(&v2(0.0, 0.0)).norm() <= 1e-12);
        assert!(trace.len() <= 2, "expected convergence in <= 2 iterations");
    }

    #[test]
    fn outer_loop_identity_oracle_stops_immediately() {
        let x0 = v2(3.0, -1.0);
        let (limit, trace, status) =
            run_outer_loop(&x0, |_, p: &Vector| p.clone(), StoppingSpec::default()).unwrap();
        assert_eq!(status, OuterStatus::HalfstepFixedPoint);
        assert_eq!(limit, x0);
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn outer_loop_alternating_halfspaces() {
        // C = {h1 <= 0} ∩ {h2 <= 0}; P_C(1, 1) = (0, 0).
        let x0 = v2(1.0, 1.0);
        let oracle = |n: usize, p: &Vector| {
            let mut c = p.coords().to_vec();
            let axis = n % 2;
            if c[axis] > 0.0 {
                c[axis] = 0.0;
            }
            Vector::new(c).unwrap()
        };
        let (limit, trace, _) = run_outer_loop(
            &x0,
            oracle,
            StoppingSpec {
                max_iters: 200,
                halfstep_tol: 1e-12,
            },
        )
        .unwrap();
        let target = v2(0.0, 0.0);
        assert!(
            limit.sub(&target).norm() <= 1e-8,
            "limit {:?} not within 1e-8 of the projection",
            limit.coords()
        );

        // Loop invariants with the known target point z = (0,0) in C.
        let p_c_dist = x0.sub(&target).norm();
        let mut prev = 0.0;
        let mut step_sum = 0.0;
        let mut half_sum = 0.0;
        for rec in &trace {
            assert!(
                rec.start_distance >= prev - 1e-12,
                "distance must not shrink"
            );
            prev = rec.start_distance;
            assert!(rec.start_distance <= p_c_dist + 1e-9, "boundedness");
            step_sum += rec.step_norm * rec.step_norm;
            half_sum += rec.halfstep_norm * rec.halfstep_norm;
            let h0 = HalfSpace::new(x0.clone(), rec.x.clone());
            assert!(h0.contains(&target, 1e-9), "H(x0, x_n) must contain z");
            let h1 = HalfSpace::new(rec.x.clone(), rec.x_half.clone());
            assert!(h1.contains(&target, 1e-9), "H(x_n, x_half) must contain z");
        }
        assert!(
            step_sum <= p_c_dist * p_c_dist + 1e-6,
            "step summability proxy"
        );
        assert!(
            half_sum <= p_c_dist * p_c_dist + 1e-6,
            "half-step summability proxy"
        );
    }
}
