//! Catalog of maximally monotone operators with exact resolvent evaluation.
//!
//! Every entry evaluates `J_{gamma A} = (Id + gamma A)^{-1}` in closed form or
//! through a cached direct factorization; no inner iterative solves. The
//! catalog is a pragmatic subset of the maximally monotone operators (the
//! theory admits any of them): zero, PSD-affine, normal cones to boxes, affine
//! subspaces and Euclidean balls, the l1 and squared-distance subdifferentials,
//! positive scalings, shift/translation wrappers, finite products, and
//! inverses. Strictly monotone relaxation kernels are covered by `Scale`
//! (rho > 0) and offset-free positive-definite `Affine` entries.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::space::{InnerSpace, SpaceError, Vector};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("invalid operator parameter: {0}")]
    InvalidParameter(String),
    #[error("resolvent parameter gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

fn to_dvector(v: &Vector) -> DVector<f64> {
    DVector::from_column_slice(v.coords())
}

fn from_dvector(v: DVector<f64>) -> Vector {
    Vector::new(v.as_slice().to_vec()).expect("factorized solve produced non-finite values")
}

/// PSD-affine operator `x -> Mx + c`.
///
/// Resolvents solve the SPD system `(I + gamma M) a = w - gamma c`; the
/// Cholesky factor is cached per distinct `gamma`, keyed on its bit pattern,
/// and shared across clones.
#[derive(Debug, Clone)]
pub struct AffineOp {
    matrix: DMatrix<f64>,
    offset: Vector,
    cache: Arc<Mutex<HashMap<u64, Cholesky<f64, Dyn>>>>,
}

impl AffineOp {
    pub fn new(rows: &[Vec<f64>], offset: Vector) -> Result<Self, OperatorError> {
        let n = offset.dim();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(OperatorError::InvalidParameter(format!(
                "affine operator needs a {n}x{n} matrix matching the offset dimension"
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(OperatorError::InvalidParameter(
                "affine matrix has non-finite entries".into(),
            ));
        }
        let matrix = DMatrix::from_row_slice(n, n, &flat);
        let scale = flat.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        if (&matrix - matrix.transpose()).amax() > 1e-10 * scale {
            return Err(OperatorError::InvalidParameter(
                "affine matrix must be symmetric".into(),
            ));
        }
        let min_eig = matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, &e| m.min(e));
        if min_eig < -1e-10 * scale {
            return Err(OperatorError::InvalidParameter(format!(
                "affine matrix must be positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(AffineOp {
            matrix,
            offset,
            cache: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    pub fn dim(&self) -> usize {
        self.offset.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }

    /// Smallest eigenvalue, used when a kernel must be strictly monotone.
    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, &e| m.min(e))
    }

    fn resolvent(&self, gamma: f64, w: &Vector) -> Vector {
        let n = self.dim();
        let rhs = to_dvector(&w.sub(&self.offset.scale(gamma)));
        let mut cache = self.cache.lock().expect("affine resolvent cache poisoned");
        let chol = cache.entry(gamma.to_bits()).or_insert_with(|| {
            let system = DMatrix::identity(n, n) + self.matrix.scale(gamma);
            Cholesky::new(system).expect("I + gamma M is SPD for PSD M and gamma > 0")
        });
        from_dvector(chol.solve(&rhs))
    }
}

impl PartialEq for AffineOp {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix && self.offset == other.offset
    }
}

/// Projector onto the affine subspace `{x : Ex = e}`; `E` must have full row
/// rank (validated through the Cholesky factorization of `E E^T`).
#[derive(Debug, Clone)]
pub struct AffineSetProjector {
    e: DMatrix<f64>,
    rhs: Vector,
    gram_chol: Arc<Cholesky<f64, Dyn>>,
}

impl AffineSetProjector {
    pub fn new(rows: &[Vec<f64>], rhs: Vector) -> Result<Self, OperatorError> {
        let m = rhs.dim();
        if rows.len() != m {
            return Err(OperatorError::InvalidParameter(format!(
                "affine set needs {m} constraint rows to match the right-hand side"
            )));
        }
        let n = rows.first().map_or(0, |r| r.len());
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(OperatorError::InvalidParameter(
                "affine set rows must be non-empty and of equal length".into(),
            ));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let e = DMatrix::from_row_slice(m, n, &flat);
        let gram = &e * e.transpose();
        let gram_chol = Cholesky::new(gram).ok_or_else(|| {
            OperatorError::InvalidParameter(
                "affine set constraint matrix must have full row rank".into(),
            )
        })?;
        Ok(AffineSetProjector {
            e,
            rhs,
            gram_chol: Arc::new(gram_chol),
        })
    }

    pub fn domain_dim(&self) -> usize {
        self.e.ncols()
    }

    pub fn constraint_rows(&self) -> (Vec<Vec<f64>>, &Vector) {
        let rows = (0..self.e.nrows())
            .map(|i| self.e.row(i).iter().copied().collect())
            .collect();
        (rows, &self.rhs)
    }

    fn project(&self, w: &Vector) -> Vector {
        let wv = to_dvector(w);
        let residual = &self.e * &wv - to_dvector(&self.rhs);
        let mult = self.gram_chol.solve(&residual);
        from_dvector(wv - self.e.transpose() * mult)
    }
}

impl PartialEq for AffineSetProjector {
    fn eq(&self, other: &Self) -> bool {
        self.e == other.e && self.rhs == other.rhs
    }
}

/// Maximally monotone operator exposing exact resolvent evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneOp {
    /// Zero operator; resolvent is the identity.
    Zero { dim: usize },
    /// `x -> Mx + c` with `M` PSD.
    Affine(AffineOp),
    /// Normal cone to the box `[lo, hi]` (bounds may be infinite); resolvent
    /// clamps componentwise.
    BoxNormalCone { lo: Vec<f64>, hi: Vec<f64> },
    /// Normal cone to `{x : Ex = e}`; resolvent is the affine projection.
    AffineSetNormalCone(AffineSetProjector),
    /// Subdifferential of `weight * ||.||_1`; resolvent soft-thresholds.
    L1Subgradient { dim: usize, weight: f64 },
    /// Subdifferential of `(1/2) ||. - target||^2`.
    SqDistGradient { target: Vector },
    /// Normal cone to the closed Euclidean ball; resolvent projects radially.
    BallNormalCone { center: Vector, radius: f64 },
    /// `x -> rho x` with `rho > 0`; strictly monotone relaxation kernel.
    Scale { dim: usize, rho: f64 },
    /// `x -> A(x - input_shift) + output_shift`; resolvent by shift identities.
    Translated {
        inner: Box<MonotoneOp>,
        input_shift: Vector,
        output_shift: Vector,
    },
    /// Product operator acting blockwise on concatenated coordinates.
    Product { parts: Vec<MonotoneOp> },
    /// Inverse operator; resolvent via the Moreau identity
    /// `J_{gamma A^{-1}}(w) = w - gamma J_{A/gamma}(w/gamma)`.
    Inverse { inner: Box<MonotoneOp> },
}

/// A certified point `(a, a*)` on the graph of an operator.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPoint {
    pub a: Vector,
    pub a_star: Vector,
}

impl MonotoneOp {
    pub fn zero(dim: usize) -> Self {
        MonotoneOp::Zero { dim }
    }

    pub fn affine(rows: &[Vec<f64>], offset: Vector) -> Result<Self, OperatorError> {
        Ok(MonotoneOp::Affine(AffineOp::new(rows, offset)?))
    }

    /// Box normal cone; bounds may be infinite but must satisfy `lo < hi`
    /// componentwise so the box has nonempty interior.
    pub fn box_normal_cone(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, OperatorError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(OperatorError::InvalidParameter(
                "box bounds must be nonempty and of matching dimensions".into(),
            ));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if l.is_nan() || h.is_nan() || *l == f64::INFINITY || *h == f64::NEG_INFINITY {
                return Err(OperatorError::InvalidParameter(
                    "box bounds malformed".into(),
                ));
            }
            if l >= h {
                return Err(OperatorError::InvalidParameter(format!(
                    "box needs lo < hi componentwise, got [{l}, {h}]; use an affine set for degenerate boxes"
                )));
            }
        }
        Ok(MonotoneOp::BoxNormalCone { lo, hi })
    }

    pub fn affine_set_normal_cone(rows: &[Vec<f64>], rhs: Vector) -> Result<Self, OperatorError> {
        Ok(MonotoneOp::AffineSetNormalCone(AffineSetProjector::new(
            rows, rhs,
        )?))
    }

    pub fn l1_subgradient(dim: usize, weight: f64) -> Result<Self, OperatorError> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(OperatorError::InvalidParameter(format!(
                "l1 weight must be positive and finite, got {weight}"
            )));
        }
        Ok(MonotoneOp::L1Subgradient { dim, weight })
    }

    pub fn sq_dist_gradient(target: Vector) -> Self {
        MonotoneOp::SqDistGradient { target }
    }

    pub fn ball_normal_cone(center: Vector, radius: f64) -> Result<Self, OperatorError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(OperatorError::InvalidParameter(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        Ok(MonotoneOp::BallNormalCone { center, radius })
    }

    pub fn scale(dim: usize, rho: f64) -> Result<Self, OperatorError> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(OperatorError::InvalidParameter(format!(
                "scale factor must be positive and finite, got {rho}"
            )));
        }
        Ok(MonotoneOp::Scale { dim, rho })
    }

    pub fn translated(
        inner: MonotoneOp,
        input_shift: Vector,
        output_shift: Vector,
    ) -> Result<Self, OperatorError> {
        if input_shift.dim() != inner.dim() || output_shift.dim() != inner.dim() {
            return Err(OperatorError::InvalidParameter(
                "translation shifts must match the inner operator dimension".into(),
            ));
        }
        Ok(MonotoneOp::Translated {
            inner: Box::new(inner),
            input_shift,
            output_shift,
        })
    }

    pub fn product(parts: Vec<MonotoneOp>) -> Self {
        MonotoneOp::Product { parts }
    }

    pub fn inverse(inner: MonotoneOp) -> Self {
        MonotoneOp::Inverse {
            inner: Box::new(inner),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MonotoneOp::Zero { dim }
            | MonotoneOp::L1Subgradient { dim, .. }
            | MonotoneOp::Scale { dim, .. } => *dim,
            MonotoneOp::Affine(op) => op.dim(),
            MonotoneOp::BoxNormalCone { lo, .. } => lo.len(),
            MonotoneOp::AffineSetNormalCone(p) => p.domain_dim(),
            MonotoneOp::SqDistGradient { target } => target.dim(),
            MonotoneOp::BallNormalCone { center, .. } => center.dim(),
            MonotoneOp::Translated { inner, .. } => inner.dim(),
            MonotoneOp::Product { parts } => parts.iter().map(|p| p.dim()).sum(),
            MonotoneOp::Inverse { inner } => inner.dim(),
        }
    }

    /// Evaluates the resolvent `J_{gamma A}(w)`. For subdifferential entries
    /// this is the proximity operator of the scaled function.
    pub fn resolvent(&self, gamma: f64, w: &Vector) -> Result<Vector, OperatorError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(OperatorError::NonPositiveGamma(gamma));
        }
        if w.dim() != self.dim() {
            return Err(SpaceError::DimensionMismatch {
                context: "resolvent argument",
                expected: self.dim(),
                found: w.dim(),
            }
            .into());
        }
        Ok(self.resolvent_unchecked(gamma, w))
    }

    fn resolvent_unchecked(&self, gamma: f64, w: &Vector) -> Vector {
        match self {
            MonotoneOp::Zero { .. } => w.clone(),
            MonotoneOp::Affine(op) => op.resolvent(gamma, w),
            MonotoneOp::BoxNormalCone { lo, hi } => w.clamp(lo, hi),
            MonotoneOp::AffineSetNormalCone(p) => p.project(w),
            MonotoneOp::L1Subgradient { weight, .. } => {
                let t = gamma * weight;
                Vector::new(
                    w.coords()
                        .iter()
                        .map(|&c| c.signum() * (c.abs() - t).max(0.0))
                        .collect(),
                )
                .expect("soft threshold keeps coordinates finite")
            }
            MonotoneOp::SqDistGradient { target } => {
                w.add(&target.scale(gamma)).scale(1.0 / (1.0 + gamma))
            }
            MonotoneOp::BallNormalCone { center, radius } => {
                let d = w.sub(center);
                let n = d.norm();
                if n <= *radius {
                    w.clone()
                } else {
                    center.add(&d.scale(radius / n))
                }
            }
            MonotoneOp::Scale { rho, .. } => w.scale(1.0 / (1.0 + gamma * rho)),
            MonotoneOp::Translated {
                inner,
                input_shift,
                output_shift,
            } => {
                let arg = w.sub(input_shift).sub(&output_shift.scale(gamma));
                input_shift.add(&inner.resolvent_unchecked(gamma, &arg))
            }
            MonotoneOp::Product { parts } => {
                let mut out = Vec::with_capacity(w.dim());
                let mut offset = 0;
                for part in parts {
                    let d = part.dim();
                    let block =
                        Vector::new(w.coords()[offset..offset + d].to_vec()).expect("finite block");
                    out.extend_from_slice(part.resolvent_unchecked(gamma, &block).coords());
                    offset += d;
                }
                Vector::new(out).expect("blockwise resolvent keeps coordinates finite")
            }
            MonotoneOp::Inverse { inner } => {
                let j = inner.resolvent_unchecked(1.0 / gamma, &w.scale(1.0 / gamma));
                w.sub(&j.scale(gamma))
            }
        }
    }
}

/// Resolvent `J_{gamma A}(w)` as a free function.
pub fn resolvent(op: &MonotoneOp, gamma: f64, w: &Vector) -> Result<Vector, OperatorError> {
    op.resolvent(gamma, w)
}

/// Resolvent of the inverse operator, `J_{gamma A^{-1}}(w)`, evaluated through
/// the Moreau identity. Used for dual-side graph membership checks.
pub fn inverse_resolvent(op: &MonotoneOp, gamma: f64, w: &Vector) -> Result<Vector, OperatorError> {
    MonotoneOp::inverse(op.clone()).resolvent(gamma, w)
}

/// Constructs a certified graph point from one resolvent evaluation:
/// `a = J_{gamma A}(w)` and `a* = (w - a)/gamma`, so `(a, a*) in gra A` holds
/// by construction.
pub fn graph_point(op: &MonotoneOp, gamma: f64, w: &Vector) -> Result<GraphPoint, OperatorError> {
    use crate::space::InnerSpace;
    let a = op.resolvent(gamma, w)?;
    let a_star = w.sub(&a).scale(1.0 / gamma);
    Ok(GraphPoint { a, a_star })
}

/// Membership residual `||a - J_{gamma A}(a + gamma a*)||`; zero (up to
/// arithmetic) exactly when `(a, a*) in gra A`.
pub fn graph_residual(
    op: &MonotoneOp,
    gamma: f64,
    point: &GraphPoint,
) -> Result<f64, OperatorError> {
    use crate::space::InnerSpace;
    let w = point.a.add(&point.a_star.scale(gamma));
    let j = op.resolvent(gamma, &w)?;
    Ok(point.a.sub(&j).norm())
}

/// Prox-capable function descriptor for the minimization front end.
///
/// `operator()` yields the subdifferential from the catalog; `eval` supports
/// the prox-optimality checks and primal objective values (indicators return
/// `f64::INFINITY` outside their set).
#[derive(Debug, Clone, PartialEq)]
pub enum ProxFn {
    /// `weight * ||x||_1`
    L1 { dim: usize, weight: f64 },
    /// `(1/2) ||x - target||^2`
    SqDistance { target: Vector },
    /// Indicator of the box `[lo, hi]` (bounds may be infinite).
    BoxIndicator { lo: Vec<f64>, hi: Vec<f64> },
    /// Indicator of the closed Euclidean ball.
    BallIndicator { center: Vector, radius: f64 },
}

impl ProxFn {
    pub fn dim(&self) -> usize {
        match self {
            ProxFn::L1 { dim, .. } => *dim,
            ProxFn::SqDistance { target } => target.dim(),
            ProxFn::BoxIndicator { lo, .. } => lo.len(),
            ProxFn::BallIndicator { center, .. } => center.dim(),
        }
    }

    pub fn operator(&self) -> Result<MonotoneOp, OperatorError> {
        match self {
            ProxFn::L1 { dim, weight } => MonotoneOp::l1_subgradient(*dim, *weight),
            ProxFn::SqDistance { target } => Ok(MonotoneOp::sq_dist_gradient(target.clone())),
            ProxFn::BoxIndicator { lo, hi } => MonotoneOp::box_normal_cone(lo.clone(), hi.clone()),
            ProxFn::BallIndicator { center, radius } => {
                MonotoneOp::ball_normal_cone(center.clone(), *radius)
            }
        }
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        match self {
            ProxFn::L1 { weight, .. } => weight * x.coords().iter().map(|c| c.abs()).sum::<f64>(),
            ProxFn::SqDistance { target } => 0.5 * x.sub(target).norm_sq(),
            ProxFn::BoxIndicator { lo, hi } => {
                let tol = 1e-12;
                let inside = x
                    .coords()
                    .iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .all(|(&c, (&l, &h))| c >= l - tol && c <= h + tol);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFn::BallIndicator { center, radius } => {
                if x.sub(center).norm() <= radius + 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}
