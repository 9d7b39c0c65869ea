//! Coupled systems of monotone inclusions: product-space lifting, the
//! `m + K` block solve, the relaxation of inconsistent common-zero problems,
//! and the multivariate convex-minimization front end.
//!
//! A system couples operators `A_i` on spaces `H_i` and `B_k` on `G_k`
//! through a `K x m` grid of linear maps, with constant shifts `z_i`, `r_k`:
//!
//! ```text
//! find x_1, ..., x_m with  z_i in A_i x_i + sum_k L_ki* B_k(sum_j L_kj x_j - r_k)
//! ```
//!
//! Solving goes through [`lift`]: the blocks concatenate into one primal and
//! one dual space, the shifted operators combine into products whose
//! resolvents split blockwise, and the grid becomes a single block map. The
//! lifted run *is* the block algorithm, so `solve_system` and a direct solve
//! of the lifted problem agree bitwise.

use thiserror::Error;

use crate::operators::{graph_residual, GraphPoint, MonotoneOp, OperatorError, ProxFn};
use crate::solver::{solve, Solution, SolveStatus, SolverConfig, SolverError, Trace};
use crate::space::{BlockVec, InnerSpace, LinearMap, SpaceError, Vector};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("inconsistent system dimensions: {0}")]
    Dimension(String),
    #[error("invalid relaxation kernel: {0}")]
    InvalidKernel(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Solver(#[from] Box<SolverError>),
}

impl From<SolverError> for SystemError {
    fn from(e: SolverError) -> Self {
        SystemError::Solver(Box::new(e))
    }
}

/// A coupled system: `m` primal operators, `K` dual operators, constant
/// shifts, the coupling grid (row `k`, column `i` maps `H_i` into `G_k`;
/// structured zeros allowed), and the reference start blocks.
#[derive(Debug, Clone)]
pub struct SystemProblem {
    pub a_ops: Vec<MonotoneOp>,
    pub b_ops: Vec<MonotoneOp>,
    pub z: Vec<Vector>,
    pub r: Vec<Vector>,
    pub couplings: Vec<Vec<LinearMap>>,
    pub start_x: Vec<Vector>,
    pub start_v: Vec<Vector>,
}

impl SystemProblem {
    pub fn m(&self) -> usize {
        self.a_ops.len()
    }

    pub fn k(&self) -> usize {
        self.b_ops.len()
    }

    pub fn h_dims(&self) -> Vec<usize> {
        self.a_ops.iter().map(|a| a.dim()).collect()
    }

    pub fn g_dims(&self) -> Vec<usize> {
        self.b_ops.iter().map(|b| b.dim()).collect()
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        let (m, k) = (self.m(), self.k());
        if m == 0 || k == 0 {
            return Err(SystemError::Dimension(
                "a system needs at least one primal and one dual operator".into(),
            ));
        }
        let h_dims = self.h_dims();
        let g_dims = self.g_dims();
        for (name, vecs, dims) in [
            ("z", &self.z, &h_dims),
            ("start x", &self.start_x, &h_dims),
            ("r", &self.r, &g_dims),
            ("start v", &self.start_v, &g_dims),
        ] {
            if vecs.len() != dims.len() {
                return Err(SystemError::Dimension(format!(
                    "{name} has {} blocks, expected {}",
                    vecs.len(),
                    dims.len()
                )));
            }
            for (i, (v, &d)) in vecs.iter().zip(dims.iter()).enumerate() {
                if v.dim() != d {
                    return Err(SystemError::Dimension(format!(
                        "{name} block {i} has dimension {}, expected {d}",
                        v.dim()
                    )));
                }
            }
        }
        if self.couplings.len() != k {
            return Err(SystemError::Dimension(format!(
                "coupling grid has {} rows, expected {k}",
                self.couplings.len()
            )));
        }
        for (row_idx, row) in self.couplings.iter().enumerate() {
            if row.len() != m {
                return Err(SystemError::Dimension(format!(
                    "coupling row {row_idx} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (col_idx, map) in row.iter().enumerate() {
                if map.domain_dim() != h_dims[col_idx] || map.codomain_dim() != g_dims[row_idx] {
                    return Err(SystemError::Dimension(format!(
                        "coupling row {row_idx}, column {col_idx}: map is {}x{}, expected {}x{}",
                        map.codomain_dim(),
                        map.domain_dim(),
                        g_dims[row_idx],
                        h_dims[col_idx]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Row sums `sum_i L_ki x_i` of the coupling grid, ascending `i`.
    pub fn apply_couplings(&self, x: &[Vector]) -> Vec<Vector> {
        let g_dims = self.g_dims();
        self.couplings
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let mut acc = Vector::zeros(g_dims[k]);
                for (i, map) in row.iter().enumerate() {
                    if !map.is_zero() {
                        acc = acc.add(&map.apply(&x[i]));
                    }
                }
                acc
            })
            .collect()
    }
}

/// Lifts a system into a single composite-inclusion problem.
///
/// The lifted operators absorb the constant shifts, so their resolvents obey
/// the blockwise identities
/// `J_{gamma A}(x)_i = J_{gamma A_i}(x_i + gamma z_i)` and
/// `J_{mu B}(y)_k = r_k + J_{mu B_k}(y_k - r_k)`.
pub fn lift(sys: &SystemProblem) -> Result<crate::solver::KTProblem, SystemError> {
    sys.validate()?;
    let mut a_parts = Vec::with_capacity(sys.m());
    for (a_i, z_i) in sys.a_ops.iter().zip(&sys.z) {
        // A_i' = -z_i + A_i(.)
        a_parts.push(MonotoneOp::translated(
            a_i.clone(),
            Vector::zeros(a_i.dim()),
            z_i.scale(-1.0),
        )?);
    }
    let mut b_parts = Vec::with_capacity(sys.k());
    for (b_k, r_k) in sys.b_ops.iter().zip(&sys.r) {
        // B_k' = B_k(. - r_k)
        b_parts.push(MonotoneOp::translated(
            b_k.clone(),
            r_k.clone(),
            Vector::zeros(b_k.dim()),
        )?);
    }
    let l = LinearMap::block(sys.couplings.clone(), sys.g_dims(), sys.h_dims())?;
    Ok(crate::solver::KTProblem {
        a: MonotoneOp::product(a_parts),
        b: MonotoneOp::product(b_parts),
        l,
        x0: BlockVec::new(sys.start_x.clone()).flatten(),
        v0_star: BlockVec::new(sys.start_v.clone()).flatten(),
    })
}

/// Per-iteration residual norms split back into blocks.
#[derive(Debug, Clone)]
pub struct BlockResiduals {
    /// `||x_{i,n} - a_{i,n}||` for each primal block.
    pub primal: Vec<f64>,
    /// `||sum_i L_ki x_{i,n} - b_{k,n}||` for each dual block.
    pub dual: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SystemSolution {
    pub x: Vec<Vector>,
    pub v_star: Vec<Vector>,
    pub status: SolveStatus,
    pub breakdown: Option<crate::haugazeau::QScalars>,
    /// The trace of the lifted run, bitwise identical to solving
    /// `lift(sys)` directly.
    pub trace: Trace,
    pub block_residuals: Vec<BlockResiduals>,
}

/// Solves the coupled system by lifting and running the core iteration.
pub fn solve_system(
    sys: &SystemProblem,
    config: &SolverConfig,
) -> Result<SystemSolution, SystemError> {
    let lifted = lift(sys)?;
    let solution = solve(&lifted, config)?;
    Ok(split_solution(sys, solution))
}

fn split_solution(sys: &SystemProblem, solution: Solution) -> SystemSolution {
    let h_dims = sys.h_dims();
    let g_dims = sys.g_dims();
    let block_residuals = solution
        .trace
        .records
        .iter()
        .map(|rec| {
            let x_blocks = BlockVec::split(&rec.x, &h_dims).expect("trace block signature");
            let a_blocks =
                BlockVec::split(&rec.selection.a, &h_dims).expect("trace block signature");
            let b_blocks =
                BlockVec::split(&rec.selection.b, &g_dims).expect("trace block signature");
            let l_rows = sys.apply_couplings(x_blocks.blocks());
            BlockResiduals {
                primal: x_blocks
                    .blocks()
                    .iter()
                    .zip(a_blocks.blocks())
                    .map(|(x, a)| x.sub(a).norm())
                    .collect(),
                dual: l_rows
                    .iter()
                    .zip(b_blocks.blocks())
                    .map(|(l, b)| l.sub(b).norm())
                    .collect(),
            }
        })
        .collect();
    let x = BlockVec::split(&solution.x, &h_dims)
        .expect("solution block signature")
        .blocks()
        .to_vec();
    let v_star = BlockVec::split(&solution.v_star, &g_dims)
        .expect("solution block signature")
        .blocks()
        .to_vec();
    SystemSolution {
        x,
        v_star,
        status: solution.status,
        breakdown: solution.breakdown,
        trace: solution.trace,
        block_residuals,
    }
}

/// Kuhn-Tucker membership residuals of a candidate block solution: the
/// primal residuals certify `z_i - sum_k L_ki* v_k* in A_i x_i`, the dual
/// ones certify `sum_i L_ki x_i - r_k in B_k^{-1} v_k*` (checked through the
/// inverse resolvent).
pub fn kt_membership_residuals(
    sys: &SystemProblem,
    x: &[Vector],
    v_star: &[Vector],
) -> Result<(Vec<f64>, Vec<f64>), SystemError> {
    sys.validate()?;
    let mut primal = Vec::with_capacity(sys.m());
    for (i, (x_i, z_i)) in x.iter().zip(&sys.z).enumerate() {
        let mut shift = z_i.clone();
        for (row, v_k) in sys.couplings.iter().zip(v_star) {
            let map = &row[i];
            if !map.is_zero() {
                shift = shift.sub(&map.adjoint_apply(v_k));
            }
        }
        let point = GraphPoint {
            a: x_i.clone(),
            a_star: shift,
        };
        primal.push(graph_residual(&sys.a_ops[i], 1.0, &point)?);
    }
    let l_rows = sys.apply_couplings(x);
    let mut dual = Vec::with_capacity(sys.k());
    for k in 0..sys.k() {
        let point = GraphPoint {
            a: v_star[k].clone(),
            a_star: l_rows[k].sub(&sys.r[k]),
        };
        dual.push(graph_residual(
            &MonotoneOp::inverse(sys.b_ops[k].clone()),
            1.0,
            &point,
        )?);
    }
    Ok((primal, dual))
}

/// Relaxation of the possibly inconsistent common-zero problem
/// `0 in Ax (intersect) B_k x` into `0 in Ax + sum_k (B_k parallel-sum S_k) x`,
/// where `B_k [] S_k = (B_k^{-1} + S_k^{-1})^{-1}`.
///
/// Each kernel `S_k` must be strictly monotone with `S_k^{-1}0 = {0}`; the
/// admissible entries here are positive scalings and offset-free
/// positive-definite affine operators. When the original problem is
/// consistent, the relaxed solutions coincide with the common zeros.
#[derive(Debug, Clone)]
pub struct RelaxationSpec {
    pub a: MonotoneOp,
    pub b_ops: Vec<MonotoneOp>,
    pub s_ops: Vec<MonotoneOp>,
}

fn validate_kernel(s: &MonotoneOp, dim: usize, k: usize) -> Result<(), SystemError> {
    if s.dim() != dim {
        return Err(SystemError::Dimension(format!(
            "kernel {k} has dimension {}, expected {dim}",
            s.dim()
        )));
    }
    match s {
        MonotoneOp::Scale { .. } => Ok(()),
        MonotoneOp::Affine(op) => {
            if op.offset().coords().iter().any(|&c| c != 0.0) {
                return Err(SystemError::InvalidKernel(format!(
                    "kernel {k}: affine kernels must have zero offset so that S^-1(0) = {{0}}"
                )));
            }
            if op.min_eigenvalue() <= 0.0 {
                return Err(SystemError::InvalidKernel(format!(
                    "kernel {k}: affine kernels must be positive definite (strictly monotone)"
                )));
            }
            Ok(())
        }
        other => Err(SystemError::InvalidKernel(format!(
            "kernel {k}: unsupported operator {other:?}; use a positive scaling or a positive-definite affine map"
        ))),
    }
}

/// Builds the `(K+1)`-block system realizing the relaxation: primal blocks
/// `(A, S_1, ..., S_K)`, dual blocks `B_k`, zero shifts, and coupling rows
/// `L_k = [Id, 0, ..., -Id (slot k+1), ..., 0]`. Starts default to zero;
/// override the `start_x` / `start_v` fields to project a different
/// reference point.
pub fn build_relaxation(spec: &RelaxationSpec) -> Result<SystemProblem, SystemError> {
    let dim = spec.a.dim();
    let kk = spec.b_ops.len();
    if kk == 0 || spec.s_ops.len() != kk {
        return Err(SystemError::Dimension(format!(
            "relaxation needs matching, nonempty operator lists (got {} B's, {} S's)",
            kk,
            spec.s_ops.len()
        )));
    }
    for (k, b) in spec.b_ops.iter().enumerate() {
        if b.dim() != dim {
            return Err(SystemError::Dimension(format!(
                "operator B_{k} has dimension {}, expected {dim}",
                b.dim()
            )));
        }
    }
    for (k, s) in spec.s_ops.iter().enumerate() {
        validate_kernel(s, dim, k)?;
    }

    let mut a_ops = Vec::with_capacity(kk + 1);
    a_ops.push(spec.a.clone());
    a_ops.extend(spec.s_ops.iter().cloned());

    let couplings = (0..kk)
        .map(|k| {
            (0..kk + 1)
                .map(|i| {
                    if i == 0 {
                        LinearMap::Identity { dim }
                    } else if i == k + 1 {
                        LinearMap::NegIdentity { dim }
                    } else {
                        LinearMap::Zero {
                            rows: dim,
                            cols: dim,
                        }
                    }
                })
                .collect()
        })
        .collect();

    Ok(SystemProblem {
        a_ops,
        b_ops: spec.b_ops.clone(),
        z: vec![Vector::zeros(dim); kk + 1],
        r: vec![Vector::zeros(dim); kk],
        couplings,
        start_x: vec![Vector::zeros(dim); kk + 1],
        start_v: vec![Vector::zeros(dim); kk],
    })
}

/// Multivariate minimization data:
///
/// ```text
/// minimize sum_i (f_i(x_i) - <x_i, z_i>) + sum_k g_k(sum_i L_ki x_i - r_k)
/// ```
///
/// The range qualification making Kuhn-Tucker points primal-dual optimal is
/// assumed, not verified.
#[derive(Debug, Clone)]
pub struct MinimizationSpec {
    pub f: Vec<ProxFn>,
    pub g: Vec<ProxFn>,
    pub z: Vec<Vector>,
    pub r: Vec<Vector>,
    pub couplings: Vec<Vec<LinearMap>>,
    pub start_x: Vec<Vector>,
    pub start_v: Vec<Vector>,
}

/// Realizes the minimization as a system with `A_i = df_i` and `B_k = dg_k`,
/// so every resolvent evaluation is a proximity operator.
pub fn build_minimization(spec: &MinimizationSpec) -> Result<SystemProblem, SystemError> {
    let a_ops = spec
        .f
        .iter()
        .map(|f| f.operator())
        .collect::<Result<Vec<_>, _>>()?;
    let b_ops = spec
        .g
        .iter()
        .map(|g| g.operator())
        .collect::<Result<Vec<_>, _>>()?;
    let sys = SystemProblem {
        a_ops,
        b_ops,
        z: spec.z.clone(),
        r: spec.r.clone(),
        couplings: spec.couplings.clone(),
        start_x: spec.start_x.clone(),
        start_v: spec.start_v.clone(),
    };
    sys.validate()?;
    Ok(sys)
}

/// Primal objective value of a minimization candidate.
pub fn minimization_objective(spec: &MinimizationSpec, x: &[Vector]) -> f64 {
    let mut value = 0.0;
    for ((f, x_i), z_i) in spec.f.iter().zip(x).zip(&spec.z) {
        value += f.eval(x_i) - x_i.dot(z_i);
    }
    let sys_rows: Vec<Vector> = spec
        .couplings
        .iter()
        .map(|row| {
            let mut acc = Vector::zeros(row[0].codomain_dim());
            for (i, map) in row.iter().enumerate() {
                if !map.is_zero() {
                    acc = acc.add(&map.apply(&x[i]));
                }
            }
            acc
        })
        .collect();
    for ((g, row), r_k) in spec.g.iter().zip(&sys_rows).zip(&spec.r) {
        value += g.eval(&row.sub(r_k));
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::KTProblem;

    fn vec1(x: f64) -> Vector {
        Vector::new(vec![x]).unwrap()
    }

    fn interval_system(x0: f64, v0: f64) -> SystemProblem {
        SystemProblem {
            a_ops: vec![MonotoneOp::box_normal_cone(vec![0.0], vec![1.0]).unwrap()],
            b_ops: vec![MonotoneOp::box_normal_cone(vec![1.0], vec![2.0]).unwrap()],
            z: vec![Vector::zeros(1)],
            r: vec![Vector::zeros(1)],
            couplings: vec![vec![LinearMap::Identity { dim: 1 }]],
            start_x: vec![vec1(x0)],
            start_v: vec![vec1(v0)],
        }
    }

    #[test]
    fn lift_shift_identities() {
        // J_{gamma A'}(x) = J_{gamma A}(x + gamma z) for A = d(1/2 x^2), z = 1.
        let sys = SystemProblem {
            a_ops: vec![MonotoneOp::sq_dist_gradient(vec1(0.0))],
            b_ops: vec![MonotoneOp::box_normal_cone(vec![0.0], vec![f64::INFINITY]).unwrap()],
            z: vec![vec1(1.0)],
            r: vec![vec1(1.0)],
            couplings: vec![vec![LinearMap::Identity { dim: 1 }]],
            start_x: vec![vec1(0.0)],
            start_v: vec![vec1(0.0)],
        };
        let lifted = lift(&sys).unwrap();
        for &(gamma, x) in &[(1.0, 0.3), (0.5, -2.0), (2.0, 4.0)] {
            // Direct 1-D minimization of gamma/2 a^2 + 1/2 (a - (x + gamma))^2
            // gives a = (x + gamma) / (1 + gamma).
            let got = lifted.a.resolvent(gamma, &vec1(x)).unwrap().coords()[0];
            let want = (x + gamma) / (1.0 + gamma);
            assert!((got - want).abs() < 1e-12, "gamma={gamma}, x={x}");
        }
        for &(mu, y) in &[(1.0, 0.3), (1.0, 3.0), (0.7, -1.0)] {
            // r + clamp(y - r) against the clamp oracle: 1 + max(y - 1, 0).
            let got = lifted.b.resolvent(mu, &vec1(y)).unwrap().coords()[0];
            let want = 1.0 + (y - 1.0).max(0.0);
            assert!((got - want).abs() < 1e-12, "mu={mu}, y={y}");
        }
    }

    #[test]
    fn lift_resolvents_split_blockwise_on_random_inputs() {
        use rand::Rng;
        use rand::SeedableRng;
        let sys = SystemProblem {
            a_ops: vec![
                MonotoneOp::l1_subgradient(2, 0.5).unwrap(),
                MonotoneOp::box_normal_cone(vec![-1.0], vec![1.0]).unwrap(),
            ],
            b_ops: vec![MonotoneOp::sq_dist_gradient(
                Vector::new(vec![1.0, -1.0]).unwrap(),
            )],
            z: vec![Vector::new(vec![0.4, -0.2]).unwrap(), vec1(1.5)],
            r: vec![Vector::new(vec![-0.3, 0.7]).unwrap()],
            couplings: vec![vec![
                LinearMap::dense(&[vec![1.0, 0.0], vec![0.5, -1.0]]).unwrap(),
                LinearMap::dense(&[vec![2.0], vec![0.0]]).unwrap(),
            ]],
            start_x: vec![Vector::zeros(2), Vector::zeros(1)],
            start_v: vec![Vector::zeros(2)],
        };
        let lifted = lift(&sys).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let gamma = 10f64.powf(rng.gen_range(-1.0..1.0));
            let w = Vector::new((0..3).map(|_| rng.gen_range(-5.0..5.0)).collect()).unwrap();
            let full = lifted.a.resolvent(gamma, &w).unwrap();
            // Component-wise direct evaluation of J_{gamma A_i}(w_i + gamma z_i).
            let w_blocks = BlockVec::split(&w, &[2, 1]).unwrap();
            for (i, dims) in [(0usize, 0usize..2), (1, 2..3)] {
                let arg = w_blocks.block(i).add(&sys.z[i].scale(gamma));
                let direct = sys.a_ops[i].resolvent(gamma, &arg).unwrap();
                for (j, c) in dims.clone().enumerate() {
                    assert!(
                        (full.coords()[c] - direct.coords()[j]).abs() <= 1e-12,
                        "primal block {i} mismatch"
                    );
                }
            }
            let y = Vector::new((0..2).map(|_| rng.gen_range(-5.0..5.0)).collect()).unwrap();
            let full_b = lifted.b.resolvent(gamma, &y).unwrap();
            let arg = y.sub(&sys.r[0]);
            let direct = sys.r[0].add(&sys.b_ops[0].resolvent(gamma, &arg).unwrap());
            for c in 0..2 {
                assert!(
                    (full_b.coords()[c] - direct.coords()[c]).abs() <= 1e-12,
                    "dual block mismatch"
                );
            }
        }
    }

    #[test]
    fn affine_blocks_reach_the_block_linear_solve() {
        // All-affine system with nonzero constant shifts; the lifted problem
        // has a singleton Kuhn-Tucker set computable by a direct solve.
        let sys = SystemProblem {
            a_ops: vec![
                MonotoneOp::affine(
                    &[vec![2.0, 0.3], vec![0.3, 1.4]],
                    Vector::new(vec![0.2, -0.1]).unwrap(),
                )
                .unwrap(),
                MonotoneOp::affine(&[vec![1.1]], vec1(0.5)).unwrap(),
            ],
            b_ops: vec![
                MonotoneOp::affine(&[vec![1.5, -0.2], vec![-0.2, 2.2]], Vector::zeros(2)).unwrap(),
            ],
            z: vec![Vector::new(vec![0.3, 0.3]).unwrap(), vec1(-0.4)],
            r: vec![Vector::new(vec![0.1, -0.6]).unwrap()],
            couplings: vec![vec![
                LinearMap::dense(&[vec![1.0, -0.5], vec![0.2, 0.8]]).unwrap(),
                LinearMap::dense(&[vec![0.7], vec![-0.4]]).unwrap(),
            ]],
            start_x: vec![Vector::new(vec![1.0, -1.0]).unwrap(), vec1(0.5)],
            start_v: vec![Vector::new(vec![-0.2, 0.9]).unwrap()],
        };
        let lifted = lift(&sys).unwrap();
        let (ox, ov) = crate::oracle::project_kt_affine(&lifted).unwrap();
        let config = SolverConfig {
            max_iters: 60_000,
            tau_tol: 1e-13,
            dist_tol: 0.0,
            ..SolverConfig::default()
        };
        let solution = solve_system(&sys, &config).unwrap();
        let flat_x = BlockVec::new(solution.x.clone()).flatten();
        let flat_v = BlockVec::new(solution.v_star.clone()).flatten();
        assert!(
            flat_x.sub(&ox).norm() <= 1e-5 && flat_v.sub(&ov).norm() <= 1e-5,
            "block affine limit {:?} / {:?} vs oracle {:?} / {:?}",
            flat_x.coords(),
            flat_v.coords(),
            ox.coords(),
            ov.coords()
        );
    }

    #[test]
    fn degenerate_system_matches_kt_solver_bitwise() {
        let sys = interval_system(3.0, 0.5);
        let config = SolverConfig::default();
        let system_solution = solve_system(&sys, &config).unwrap();

        let direct = KTProblem {
            a: MonotoneOp::translated(sys.a_ops[0].clone(), Vector::zeros(1), Vector::zeros(1))
                .unwrap(),
            b: MonotoneOp::translated(sys.b_ops[0].clone(), Vector::zeros(1), Vector::zeros(1))
                .unwrap(),
            l: LinearMap::block(vec![vec![LinearMap::Identity { dim: 1 }]], vec![1], vec![1])
                .unwrap(),
            x0: vec1(3.0),
            v0_star: vec1(0.5),
        };
        let direct_solution = solve(&direct, &config).unwrap();
        assert_eq!(system_solution.trace.len(), direct_solution.trace.len());
        for (a, b) in system_solution
            .trace
            .records
            .iter()
            .zip(&direct_solution.trace.records)
        {
            assert_eq!(a.x, b.x, "bitwise iterate mismatch at n={}", a.n);
            assert_eq!(a.v_star, b.v_star);
            assert_eq!(a.theta.to_bits(), b.theta.to_bits());
            assert_eq!(a.scalars, b.scalars);
        }
        assert_eq!(system_solution.x[0], direct_solution.x);
        assert_eq!(system_solution.v_star[0], direct_solution.v_star);
    }

    #[test]
    fn two_block_system_converges_to_coupled_solution() {
        // A_1 = A_2 = N_{[0,1]}, B = N_{{2}} via an affine set; the primal
        // solution is x_1 = x_2 = 1.
        let sys = SystemProblem {
            a_ops: vec![
                MonotoneOp::box_normal_cone(vec![0.0], vec![1.0]).unwrap(),
                MonotoneOp::box_normal_cone(vec![0.0], vec![1.0]).unwrap(),
            ],
            b_ops: vec![MonotoneOp::affine_set_normal_cone(&[vec![1.0]], vec1(2.0)).unwrap()],
            z: vec![Vector::zeros(1); 2],
            r: vec![Vector::zeros(1)],
            couplings: vec![vec![
                LinearMap::Identity { dim: 1 },
                LinearMap::Identity { dim: 1 },
            ]],
            start_x: vec![vec1(2.0), vec1(-0.5)],
            start_v: vec![vec1(0.3)],
        };
        let solution = solve_system(&sys, &SolverConfig::default()).unwrap();
        assert!(solution.status.is_success(), "status {:?}", solution.status);
        assert!((solution.x[0].coords()[0] - 1.0).abs() <= 1e-6);
        assert!((solution.x[1].coords()[0] - 1.0).abs() <= 1e-6);

        let (primal, dual) = kt_membership_residuals(&sys, &solution.x, &solution.v_star).unwrap();
        for r in primal.iter().chain(&dual) {
            assert!(*r <= 1e-6, "membership residuals {primal:?} / {dual:?}");
        }
    }

    #[test]
    fn relaxation_grid_structure() {
        let spec = RelaxationSpec {
            a: MonotoneOp::box_normal_cone(vec![0.0], vec![1.0]).unwrap(),
            b_ops: vec![
                MonotoneOp::box_normal_cone(vec![3.0], vec![4.0]).unwrap(),
                MonotoneOp::box_normal_cone(vec![-1.0], vec![0.5]).unwrap(),
            ],
            s_ops: vec![
                MonotoneOp::scale(1, 1.0).unwrap(),
                MonotoneOp::scale(1, 2.0).unwrap(),
            ],
        };
        let sys = build_relaxation(&spec).unwrap();
        assert_eq!(sys.m(), 3);
        assert_eq!(sys.k(), 2);
        for k in 0..2 {
            for i in 0..3 {
                let map = &sys.couplings[k][i];
                if i == 0 {
                    assert!(matches!(map, LinearMap::Identity { .. }), "row {k} head");
                } else if i == k + 1 {
                    assert!(matches!(map, LinearMap::NegIdentity { .. }), "row {k} slot");
                } else {
                    assert!(map.is_zero(), "row {k}, column {i} should be zero");
                }
            }
        }
    }

    #[test]
    fn relaxation_rejects_bad_kernels() {
        let base = RelaxationSpec {
            a: MonotoneOp::zero(1),
            b_ops: vec![MonotoneOp::zero(1)],
            s_ops: vec![MonotoneOp::box_normal_cone(vec![0.0], vec![1.0]).unwrap()],
        };
        assert!(matches!(
            build_relaxation(&base),
            Err(SystemError::InvalidKernel(_))
        ));

        let psd_only = RelaxationSpec {
            s_ops: vec![MonotoneOp::affine(&[vec![0.0]], vec1(0.0)).unwrap()],
            ..base.clone()
        };
        assert!(matches!(
            build_relaxation(&psd_only),
            Err(SystemError::InvalidKernel(_))
        ));

        let pd = RelaxationSpec {
            s_ops: vec![MonotoneOp::affine(&[vec![2.0]], vec1(0.0)).unwrap()],
            ..base
        };
        assert!(build_relaxation(&pd).is_ok());
    }

    #[test]
    fn relaxation_inconsistent_fixture_solves_relaxed_inclusion() {
        // A = N_{[0,1]}, B = N_{[3,4]}, S = Id: B [] S = x - P_{[3,4]} x and
        // the relaxed solution is the right endpoint x = 1.
        let spec = RelaxationSpec {
            a: MonotoneOp::box_normal_cone(vec![0.0], vec![1.0]).unwrap(),
            b_ops: vec![MonotoneOp::box_normal_cone(vec![3.0], vec![4.0]).unwrap()],
            s_ops: vec![MonotoneOp::scale(1, 1.0).unwrap()],
        };
        let sys = build_relaxation(&spec).unwrap();
        // The residual decays roughly like 1/n on this fixture; the 1e-6
        // target needs tens of thousands of the cheap 1-D iterations.
        let config = SolverConfig {
            max_iters: 60_000,
            ..SolverConfig::default()
        };
        let solution = solve_system(&sys, &config).unwrap();
        assert_ne!(solution.status, SolveStatus::Breakdown);
        assert!(
            (solution.x[0].coords()[0] - 1.0).abs() <= 1e-6,
            "relaxed solution should be 1, got {:?}",
            solution.x[0]
        );
    }

    #[test]
    fn relaxation_consistent_fixture_hits_common_zero() {
        // A = N_{[1,3]}, B = N_{[0,2]}: common zeros fill [1, 2].
        let spec = RelaxationSpec {
            a: MonotoneOp::box_normal_cone(vec![1.0], vec![3.0]).unwrap(),
            b_ops: vec![MonotoneOp::box_normal_cone(vec![0.0], vec![2.0]).unwrap()],
            s_ops: vec![MonotoneOp::scale(1, 1.0).unwrap()],
        };
        let sys = build_relaxation(&spec).unwrap();
        let config = SolverConfig {
            max_iters: 60_000,
            ..SolverConfig::default()
        };
        let solution = solve_system(&sys, &config).unwrap();
        assert_ne!(solution.status, SolveStatus::Breakdown);
        let x1 = solution.x[0].coords()[0];
        assert!(
            (1.0 - 1e-6..=2.0 + 1e-6).contains(&x1),
            "limit {x1} should land in the common-zero interval [1, 2]"
        );
    }

    #[test]
    fn minimization_indicator_reduction_is_interval_problem() {
        // f = i_{[0,1]}, g = i_{[1,2]}, L = Id reduces to normal cones.
        let spec = MinimizationSpec {
            f: vec![ProxFn::BoxIndicator {
                lo: vec![0.0],
                hi: vec![1.0],
            }],
            g: vec![ProxFn::BoxIndicator {
                lo: vec![1.0],
                hi: vec![2.0],
            }],
            z: vec![Vector::zeros(1)],
            r: vec![Vector::zeros(1)],
            couplings: vec![vec![LinearMap::Identity { dim: 1 }]],
            start_x: vec![vec1(3.0)],
            start_v: vec![vec1(0.5)],
        };
        let sys = build_minimization(&spec).unwrap();
        let solution = solve_system(&sys, &SolverConfig::default()).unwrap();
        assert!(solution.status.is_success());
        assert!((solution.x[0].coords()[0] - 1.0).abs() <= 1e-6);
        assert!(solution.v_star[0].coords()[0].abs() <= 1e-6);
        assert!(minimization_objective(&spec, &solution.x).abs() <= 1e-9);
    }

    #[test]
    fn minimization_quadratic_plus_l1() {
        // minimize 1/2 x^2 + |x|: minimizer 0, dual minimizer 0.
        let spec = MinimizationSpec {
            f: vec![ProxFn::SqDistance { target: vec1(0.0) }],
            g: vec![ProxFn::L1 {
                dim: 1,
                weight: 1.0,
            }],
            z: vec![Vector::zeros(1)],
            r: vec![Vector::zeros(1)],
            couplings: vec![vec![LinearMap::Identity { dim: 1 }]],
            start_x: vec![vec1(2.0)],
            start_v: vec![vec1(-0.4)],
        };
        let sys = build_minimization(&spec).unwrap();
        let config = SolverConfig {
            max_iters: 60_000,
            ..SolverConfig::default()
        };
        let solution = solve_system(&sys, &config).unwrap();
        assert!(solution.status.is_success(), "status {:?}", solution.status);
        assert!(solution.x[0].coords()[0].abs() <= 1e-6);
        assert!(solution.v_star[0].coords()[0].abs() <= 1e-6);
    }

    #[test]
    fn validate_names_offending_coupling_row() {
        let mut sys = interval_system(0.0, 0.0);
        sys.couplings = vec![vec![LinearMap::Identity { dim: 2 }]];
        let err = sys.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 0"), "error should name the row: {msg}");
    }
}
