//! Problem-file ingestion and emission.
//!
//! Problems are described in TOML with named sections. The schema, documented
//! field by field in the README, covers four kinds:
//!
//! - `kt`: a single composite inclusion (one `A`, one `B`, one coupling);
//! - `system`: `m + K` coupled blocks with constant shifts;
//! - `relaxation`: common-zero relaxation built from `A`, `B_k`, and kernels
//!   `S_k` on one space;
//! - `minimization`: prox-capable objectives `f_i`, `g_k`.
//!
//! Parsing validates the whole file and reports every failure at once;
//! `emit_problem` writes the canonical form, round-tripping all numeric
//! literals exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{MonotoneOp, ProxFn};
use crate::solver::{KTProblem, Mode, Schedule, SolverConfig};
use crate::space::{LinearMap, Vector};
use crate::systems::{
    build_minimization, build_relaxation, MinimizationSpec, RelaxationSpec, SystemProblem,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read problem file: {0}")]
    Io(#[from] std::io::Error),
    #[error("problem file parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("problem file validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Kt,
    System,
    Relaxation,
    Minimization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spaces {
    /// Dimensions of the primal factor spaces `H_1, ..., H_m`. Relaxation
    /// files list the single underlying space here.
    pub primal: Vec<usize>,
    /// Dimensions of the dual factor spaces `G_1, ..., G_K` (empty for
    /// relaxation files; the lift derives them).
    #[serde(default)]
    pub dual: Vec<usize>,
}

/// Operator descriptor; dimensions come from the surrounding space
/// declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum OpSpec {
    Zero,
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    AffineSet {
        rows: Vec<Vec<f64>>,
        rhs: Vec<f64>,
    },
    L1 {
        weight: f64,
    },
    SqDist {
        target: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Scale {
        rho: f64,
    },
    Translated {
        input_shift: Vec<f64>,
        output_shift: Vec<f64>,
        inner: Box<OpSpec>,
    },
}

impl OpSpec {
    fn build(&self, dim: usize) -> Result<MonotoneOp, String> {
        let vector = |coords: &[f64], what: &str| {
            Vector::new(coords.to_vec()).map_err(|e| format!("{what}: {e}"))
        };
        let op = match self {
            OpSpec::Zero => MonotoneOp::zero(dim),
            OpSpec::Affine { matrix, offset } => {
                MonotoneOp::affine(matrix, vector(offset, "affine offset")?)
                    .map_err(|e| e.to_string())?
            }
            OpSpec::Box { lo, hi } => {
                MonotoneOp::box_normal_cone(lo.clone(), hi.clone()).map_err(|e| e.to_string())?
            }
            OpSpec::AffineSet { rows, rhs } => {
                MonotoneOp::affine_set_normal_cone(rows, vector(rhs, "affine set rhs")?)
                    .map_err(|e| e.to_string())?
            }
            OpSpec::L1 { weight } => {
                MonotoneOp::l1_subgradient(dim, *weight).map_err(|e| e.to_string())?
            }
            OpSpec::SqDist { target } => {
                MonotoneOp::sq_dist_gradient(vector(target, "squared-distance target")?)
            }
            OpSpec::Ball { center, radius } => {
                MonotoneOp::ball_normal_cone(vector(center, "ball center")?, *radius)
                    .map_err(|e| e.to_string())?
            }
            OpSpec::Scale { rho } => MonotoneOp::scale(dim, *rho).map_err(|e| e.to_string())?,
            OpSpec::Translated {
                input_shift,
                output_shift,
                inner,
            } => MonotoneOp::translated(
                inner.build(dim)?,
                vector(input_shift, "input shift")?,
                vector(output_shift, "output shift")?,
            )
            .map_err(|e| e.to_string())?,
        };
        if op.dim() != dim {
            return Err(format!(
                "operator dimension {} does not match the declared space dimension {dim}",
                op.dim()
            ));
        }
        Ok(op)
    }
}

/// Box bounds may be written as `inf` / `-inf`; everything else must be
/// finite, which `OpSpec::build` enforces through the vector constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum ProxSpec {
    L1 { weight: f64 },
    SqDist { target: Vec<f64> },
    BoxIndicator { lo: Vec<f64>, hi: Vec<f64> },
    BallIndicator { center: Vec<f64>, radius: f64 },
}

impl ProxSpec {
    fn build(&self, dim: usize) -> Result<ProxFn, String> {
        let vector = |coords: &[f64], what: &str| {
            Vector::new(coords.to_vec()).map_err(|e| format!("{what}: {e}"))
        };
        let f = match self {
            ProxSpec::L1 { weight } => {
                if weight.is_nan() || *weight <= 0.0 {
                    return Err(format!("l1 weight must be positive, got {weight}"));
                }
                ProxFn::L1 {
                    dim,
                    weight: *weight,
                }
            }
            ProxSpec::SqDist { target } => ProxFn::SqDistance {
                target: vector(target, "squared-distance target")?,
            },
            ProxSpec::BoxIndicator { lo, hi } => {
                // Reuse the box validation (lo < hi, NaN rejection, inf allowed).
                MonotoneOp::box_normal_cone(lo.clone(), hi.clone()).map_err(|e| e.to_string())?;
                ProxFn::BoxIndicator {
                    lo: lo.clone(),
                    hi: hi.clone(),
                }
            }
            ProxSpec::BallIndicator { center, radius } => ProxFn::BallIndicator {
                center: vector(center, "ball center")?,
                radius: *radius,
            },
        };
        if f.dim() != dim {
            return Err(format!(
                "function dimension {} does not match the declared space dimension {dim}",
                f.dim()
            ));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum MapSpec {
    Identity,
    NegIdentity,
    Zero,
    Scaled { factor: f64 },
    Dense { rows: Vec<Vec<f64>> },
}

impl MapSpec {
    fn build(&self, codomain: usize, domain: usize) -> Result<LinearMap, String> {
        match self {
            MapSpec::Identity => {
                if codomain != domain {
                    return Err(format!(
                        "identity coupling needs matching dimensions, got {codomain}x{domain}"
                    ));
                }
                Ok(LinearMap::Identity { dim: domain })
            }
            MapSpec::NegIdentity => {
                if codomain != domain {
                    return Err(format!(
                        "negated identity coupling needs matching dimensions, got {codomain}x{domain}"
                    ));
                }
                Ok(LinearMap::NegIdentity { dim: domain })
            }
            MapSpec::Zero => Ok(LinearMap::Zero {
                rows: codomain,
                cols: domain,
            }),
            MapSpec::Scaled { factor } => {
                if codomain != domain {
                    return Err(format!(
                        "scaled coupling needs matching dimensions, got {codomain}x{domain}"
                    ));
                }
                if !factor.is_finite() {
                    return Err("scaled coupling factor must be finite".into());
                }
                Ok(LinearMap::Scaled {
                    dim: domain,
                    factor: *factor,
                })
            }
            MapSpec::Dense { rows } => {
                if rows.len() != codomain || rows.iter().any(|r| r.len() != domain) {
                    return Err(format!(
                        "dense coupling must be {codomain}x{domain} (row-major)"
                    ));
                }
                LinearMap::dense(rows).map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Couplings {
    /// `K x m` grid, row-major: `rows[k][i]` maps `H_i` into `G_k`.
    pub rows: Vec<Vec<MapSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub z: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Start {
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    Haugazeau,
    Fejer,
}

impl From<ModeSpec> for Mode {
    fn from(m: ModeSpec) -> Mode {
        match m {
            ModeSpec::Haugazeau => Mode::Haugazeau,
            ModeSpec::Fejer => Mode::Fejer,
        }
    }
}

/// Solver overrides; unset fields fall back to the mode's defaults
/// (`gamma = mu = 1`, `lambda = 1` in Haugazeau mode, `1.8` in Fejer mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_tol: Option<f64>,
}

impl ConfigOverrides {
    pub fn apply(&self) -> SolverConfig {
        let mode = self.mode.map(Mode::from).unwrap_or(Mode::Haugazeau);
        let mut config = match mode {
            Mode::Haugazeau => SolverConfig::default(),
            Mode::Fejer => SolverConfig::fejer(),
        };
        if let Some(e) = self.epsilon {
            config.epsilon = e;
        }
        if let Some(g) = self.gamma {
            config.gamma = Schedule::Constant(g);
        }
        if let Some(m) = self.mu {
            config.mu = Schedule::Constant(m);
        }
        if let Some(l) = self.lambda {
            config.lambda = Schedule::Constant(l);
        }
        if let Some(n) = self.max_iters {
            config.max_iters = n;
        }
        if let Some(t) = self.tau_tol {
            config.tau_tol = t;
        }
        if let Some(d) = self.dist_tol {
            config.dist_tol = d;
        }
        config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: ProblemKind,
    pub spaces: Spaces,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a: Vec<OpSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<OpSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s: Vec<OpSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub f: Vec<ProxSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub g: Vec<ProxSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Couplings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<Constants>,
    pub start: Start,
    #[serde(default, skip_serializing_if = "is_default_config")]
    pub config: ConfigOverrides,
}

fn is_default_config(c: &ConfigOverrides) -> bool {
    *c == ConfigOverrides::default()
}

/// A fully built problem plus the solver configuration from the file.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub instance: ProblemInstance,
    pub config: SolverConfig,
    pub file: ProblemFile,
}

#[derive(Debug, Clone)]
pub enum ProblemInstance {
    Kt(KTProblem),
    System(SystemProblem),
}

struct Validator {
    failures: Vec<String>,
}

impl Validator {
    fn new() -> Self {
        Validator {
            failures: Vec::new(),
        }
    }

    fn fail(&mut self, message: impl Into<String>) {
        self.failures.push(message.into());
    }

    fn take<T>(&mut self, context: &str, result: Result<T, String>) -> Option<T> {
        match result {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail(format!("{context}: {e}"));
                None
            }
        }
    }

    fn finish(self) -> Result<(), ProblemError> {
        if self.failures.is_empty() {
            Ok(())
        } else {
            Err(ProblemError::Validation(self.failures))
        }
    }
}

fn build_vectors(v: &mut Validator, raw: &[Vec<f64>], dims: &[usize], what: &str) -> Vec<Vector> {
    if raw.len() != dims.len() {
        v.fail(format!(
            "{what}: expected {} blocks, found {}",
            dims.len(),
            raw.len()
        ));
        return Vec::new();
    }
    let mut out = Vec::with_capacity(raw.len());
    for (i, (coords, &dim)) in raw.iter().zip(dims).enumerate() {
        if coords.len() != dim {
            v.fail(format!(
                "{what} block {i}: expected dimension {dim}, found {}",
                coords.len()
            ));
            continue;
        }
        match Vector::new(coords.clone()) {
            Ok(vector) => out.push(vector),
            Err(e) => v.fail(format!("{what} block {i}: {e}")),
        }
    }
    out
}

fn zeros_or(
    v: &mut Validator,
    raw: Option<&Vec<Vec<f64>>>,
    dims: &[usize],
    what: &str,
) -> Vec<Vector> {
    match raw {
        Some(blocks) if !blocks.is_empty() => build_vectors(v, blocks, dims, what),
        _ => dims.iter().map(|&d| Vector::zeros(d)).collect(),
    }
}

fn build_couplings(
    v: &mut Validator,
    couplings: Option<&Couplings>,
    g_dims: &[usize],
    h_dims: &[usize],
) -> Vec<Vec<LinearMap>> {
    let Some(c) = couplings else {
        v.fail("couplings section is required for this problem kind");
        return Vec::new();
    };
    if c.rows.len() != g_dims.len() {
        v.fail(format!(
            "couplings: expected {} rows, found {}",
            g_dims.len(),
            c.rows.len()
        ));
        return Vec::new();
    }
    let mut grid = Vec::with_capacity(c.rows.len());
    for (k, row) in c.rows.iter().enumerate() {
        if row.len() != h_dims.len() {
            v.fail(format!(
                "couplings row {k}: expected {} entries, found {}",
                h_dims.len(),
                row.len()
            ));
            continue;
        }
        let mut built = Vec::with_capacity(row.len());
        for (i, spec) in row.iter().enumerate() {
            match spec.build(g_dims[k], h_dims[i]) {
                Ok(map) => built.push(map),
                Err(e) => v.fail(format!("couplings row {k}, column {i}: {e}")),
            }
        }
        if built.len() == row.len() {
            grid.push(built);
        }
    }
    grid
}

/// Builds the problem a file describes, collecting every validation failure.
pub fn build_problem(file: &ProblemFile) -> Result<Parsed, ProblemError> {
    let mut v = Validator::new();
    let config = file.config.apply();
    if let Err(e) = config.validate() {
        v.fail(e.to_string());
    }

    let instance = match file.kind {
        ProblemKind::Kt => build_kt(&mut v, file),
        ProblemKind::System => build_system(&mut v, file).map(ProblemInstance::System),
        ProblemKind::Relaxation => build_relaxation_kind(&mut v, file).map(ProblemInstance::System),
        ProblemKind::Minimization => {
            build_minimization_kind(&mut v, file).map(ProblemInstance::System)
        }
    };
    v.finish()?;
    Ok(Parsed {
        instance: instance.expect("validated build produces an instance"),
        config,
        file: file.clone(),
    })
}

fn expect_ops(v: &mut Validator, specs: &[OpSpec], dims: &[usize], what: &str) -> Vec<MonotoneOp> {
    if specs.len() != dims.len() {
        v.fail(format!(
            "{what}: expected {} operators, found {}",
            dims.len(),
            specs.len()
        ));
        return Vec::new();
    }
    specs
        .iter()
        .zip(dims)
        .enumerate()
        .filter_map(|(i, (spec, &dim))| v.take(&format!("{what}[{i}]"), spec.build(dim)))
        .collect()
}

fn build_kt(v: &mut Validator, file: &ProblemFile) -> Option<ProblemInstance> {
    if file.spaces.primal.len() != 1 || file.spaces.dual.len() != 1 {
        v.fail("kt problems declare exactly one primal and one dual space");
        return None;
    }
    if !file.s.is_empty() || !file.f.is_empty() || !file.g.is_empty() {
        v.fail("kt problems use only the a/b operator sections");
    }
    if let Some(c) = &file.constants {
        let zero = |blocks: &Vec<Vec<f64>>| blocks.iter().all(|b| b.iter().all(|&x| x == 0.0));
        if !(zero(&c.z) && zero(&c.r)) {
            v.fail("kt problems take no constant shifts; use kind = \"system\"");
        }
    }
    let h = file.spaces.primal[0];
    let g = file.spaces.dual[0];
    let a = expect_ops(v, &file.a, &[h], "a");
    let b = expect_ops(v, &file.b, &[g], "b");
    let grid = build_couplings(v, file.couplings.as_ref(), &[g], &[h]);
    let x = build_vectors(v, &file.start.x, &[h], "start x");
    let vd = build_vectors(v, &file.start.v, &[g], "start v");
    if a.len() == 1 && b.len() == 1 && grid.len() == 1 && x.len() == 1 && vd.len() == 1 {
        let problem = KTProblem {
            a: a.into_iter().next().expect("checked length"),
            b: b.into_iter().next().expect("checked length"),
            l: grid.into_iter().next().expect("checked length").remove(0),
            x0: x.into_iter().next().expect("checked length"),
            v0_star: vd.into_iter().next().expect("checked length"),
        };
        if let Err(e) = problem.validate() {
            v.fail(e.to_string());
            return None;
        }
        Some(ProblemInstance::Kt(problem))
    } else {
        None
    }
}

fn build_system(v: &mut Validator, file: &ProblemFile) -> Option<SystemProblem> {
    let h_dims = &file.spaces.primal;
    let g_dims = &file.spaces.dual;
    if h_dims.is_empty() || g_dims.is_empty() {
        v.fail("system problems need at least one primal and one dual space");
        return None;
    }
    if !file.s.is_empty() || !file.f.is_empty() || !file.g.is_empty() {
        v.fail("system problems use only the a/b operator sections");
    }
    let a_ops = expect_ops(v, &file.a, h_dims, "a");
    let b_ops = expect_ops(v, &file.b, g_dims, "b");
    let grid = build_couplings(v, file.couplings.as_ref(), g_dims, h_dims);
    let z = zeros_or(
        v,
        file.constants.as_ref().map(|c| &c.z),
        h_dims,
        "constants z",
    );
    let r = zeros_or(
        v,
        file.constants.as_ref().map(|c| &c.r),
        g_dims,
        "constants r",
    );
    let start_x = build_vectors(v, &file.start.x, h_dims, "start x");
    let start_v = build_vectors(v, &file.start.v, g_dims, "start v");
    if a_ops.len() != h_dims.len()
        || b_ops.len() != g_dims.len()
        || grid.len() != g_dims.len()
        || start_x.len() != h_dims.len()
        || start_v.len() != g_dims.len()
    {
        return None;
    }
    let sys = SystemProblem {
        a_ops,
        b_ops,
        z,
        r,
        couplings: grid,
        start_x,
        start_v,
    };
    if let Err(e) = sys.validate() {
        v.fail(e.to_string());
        return None;
    }
    Some(sys)
}

fn build_relaxation_kind(v: &mut Validator, file: &ProblemFile) -> Option<SystemProblem> {
    if file.spaces.primal.len() != 1 {
        v.fail("relaxation problems declare the single underlying space in spaces.primal");
        return None;
    }
    if !file.spaces.dual.is_empty() {
        v.fail("relaxation problems leave spaces.dual empty; the lift derives it");
    }
    if !file.f.is_empty() || !file.g.is_empty() {
        v.fail("relaxation problems use the a/b/s operator sections, not f/g");
    }
    if file.couplings.is_some() {
        v.fail("relaxation problems generate their coupling grid; drop the couplings section");
    }
    if file.constants.is_some() {
        v.fail("relaxation problems have zero constant shifts; drop the constants section");
    }
    let dim = file.spaces.primal[0];
    let kk = file.b.len();
    if kk == 0 {
        v.fail("relaxation problems need at least one b operator");
        return None;
    }
    if file.s.len() != kk {
        v.fail(format!(
            "relaxation problems need one kernel per b operator ({} b's, {} s's)",
            kk,
            file.s.len()
        ));
        return None;
    }
    let a = expect_ops(v, &file.a, &[dim], "a");
    let b_ops = expect_ops(v, &file.b, &vec![dim; kk], "b");
    let s_ops = expect_ops(v, &file.s, &vec![dim; kk], "s");
    if a.len() != 1 || b_ops.len() != kk || s_ops.len() != kk {
        return None;
    }
    let spec = RelaxationSpec {
        a: a.into_iter().next().expect("checked length"),
        b_ops,
        s_ops,
    };
    let mut sys = match build_relaxation(&spec) {
        Ok(sys) => sys,
        Err(e) => {
            v.fail(e.to_string());
            return None;
        }
    };
    let start_x = build_vectors(v, &file.start.x, &vec![dim; kk + 1], "start x");
    let start_v = build_vectors(v, &file.start.v, &vec![dim; kk], "start v");
    if start_x.len() != kk + 1 || start_v.len() != kk {
        return None;
    }
    sys.start_x = start_x;
    sys.start_v = start_v;
    Some(sys)
}

fn build_minimization_kind(v: &mut Validator, file: &ProblemFile) -> Option<SystemProblem> {
    let h_dims = &file.spaces.primal;
    let g_dims = &file.spaces.dual;
    if h_dims.is_empty() || g_dims.is_empty() {
        v.fail("minimization problems need at least one primal and one dual space");
        return None;
    }
    if !file.a.is_empty() || !file.b.is_empty() || !file.s.is_empty() {
        v.fail("minimization problems use the f/g function sections, not a/b/s");
    }
    if file.f.len() != h_dims.len() || file.g.len() != g_dims.len() {
        v.fail(format!(
            "minimization problems need one f per primal space and one g per dual space (found {} f's, {} g's)",
            file.f.len(),
            file.g.len()
        ));
        return None;
    }
    let f: Vec<ProxFn> = file
        .f
        .iter()
        .zip(h_dims)
        .enumerate()
        .filter_map(|(i, (spec, &dim))| v.take(&format!("f[{i}]"), spec.build(dim)))
        .collect();
    let g: Vec<ProxFn> = file
        .g
        .iter()
        .zip(g_dims)
        .enumerate()
        .filter_map(|(i, (spec, &dim))| v.take(&format!("g[{i}]"), spec.build(dim)))
        .collect();
    let grid = build_couplings(v, file.couplings.as_ref(), g_dims, h_dims);
    let z = zeros_or(
        v,
        file.constants.as_ref().map(|c| &c.z),
        h_dims,
        "constants z",
    );
    let r = zeros_or(
        v,
        file.constants.as_ref().map(|c| &c.r),
        g_dims,
        "constants r",
    );
    let start_x = build_vectors(v, &file.start.x, h_dims, "start x");
    let start_v = build_vectors(v, &file.start.v, g_dims, "start v");
    if f.len() != h_dims.len()
        || g.len() != g_dims.len()
        || grid.len() != g_dims.len()
        || start_x.len() != h_dims.len()
        || start_v.len() != g_dims.len()
    {
        return None;
    }
    let spec = MinimizationSpec {
        f,
        g,
        z,
        r,
        couplings: grid,
        start_x,
        start_v,
    };
    match build_minimization(&spec) {
        Ok(sys) => Some(sys),
        Err(e) => {
            v.fail(e.to_string());
            None
        }
    }
}

/// Parses a problem file from TOML text.
pub fn parse_problem_str(text: &str) -> Result<Parsed, ProblemError> {
    let file: ProblemFile = toml::from_str(text)?;
    build_problem(&file)
}

/// Parses a problem file from disk.
pub fn parse_problem(path: &Path) -> Result<Parsed, ProblemError> {
    let text = std::fs::read_to_string(path)?;
    parse_problem_str(&text)
}

/// Emits the canonical form of a problem description.
pub fn emit_problem(file: &ProblemFile) -> String {
    toml::to_string(file).expect("problem files serialize to TOML")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(name: &str) -> std::path::PathBuf {
        std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/fixtures")
            .join(name)
    }

    #[test]
    fn parses_interval_fixture_to_kt_problem() {
        let parsed = parse_problem(&fixture("interval.prob")).unwrap();
        let ProblemInstance::Kt(p) = &parsed.instance else {
            panic!("interval fixture should parse to a single inclusion");
        };
        assert!(matches!(p.a, MonotoneOp::BoxNormalCone { .. }));
        assert!(matches!(p.b, MonotoneOp::BoxNormalCone { .. }));
        assert!(matches!(p.l, LinearMap::Identity { .. }));
        assert_eq!(p.x0.coords(), &[3.0]);
        assert_eq!(p.v0_star.coords(), &[0.5]);
        assert_eq!(parsed.config.max_iters, 5000);
    }

    #[test]
    fn parses_minimization_fixture() {
        let parsed = parse_problem(&fixture("lasso.prob")).unwrap();
        let ProblemInstance::System(sys) = &parsed.instance else {
            panic!("minimization fixture should parse to a system");
        };
        assert_eq!(sys.m(), 1);
        assert_eq!(sys.k(), 1);
        assert!(matches!(sys.a_ops[0], MonotoneOp::L1Subgradient { .. }));
        assert!(matches!(sys.b_ops[0], MonotoneOp::SqDistGradient { .. }));
        assert_eq!(parsed.config.max_iters, 150_000);
    }

    #[test]
    fn validation_error_names_coupling_row() {
        let err = parse_problem(&fixture("bad_dims.prob")).unwrap_err();
        let message = err.to_string();
        assert!(
            message.contains("row 0"),
            "validation message should name the offending row: {message}"
        );
    }

    #[test]
    fn parse_reports_all_failures_at_once() {
        let text = r#"
kind = "kt"

[spaces]
primal = [1]
dual = [1]

[[a]]
tag = "box"
lo = [1.0]
hi = [0.0]

[[b]]
tag = "l1"
weight = -2.0

[couplings]
rows = [[{ tag = "identity" }]]

[start]
x = [[0.0]]
v = [[0.0, 0.0]]
"#;
        let err = parse_problem_str(text).unwrap_err();
        let ProblemError::Validation(failures) = err else {
            panic!("expected a validation error, got {err}");
        };
        assert!(failures.len() >= 3, "collected failures: {failures:?}");
    }

    #[test]
    fn unknown_catalog_tag_rejected_with_position() {
        let text = r#"
kind = "kt"

[spaces]
primal = [1]
dual = [1]

[[a]]
tag = "mystery"

[[b]]
tag = "zero"

[couplings]
rows = [[{ tag = "identity" }]]

[start]
x = [[0.0]]
v = [[0.0]]
"#;
        let err = parse_problem_str(text).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("mystery"), "{message}");
        assert!(message.contains("line 9"), "{message}");
    }

    #[test]
    fn parse_rejects_malformed_toml_with_position() {
        let err = parse_problem_str("kind = \"kt\"\n[spaces\n").unwrap_err();
        assert!(matches!(err, ProblemError::Parse(_)));
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn emit_parse_round_trip_is_structural_identity() {
        for name in [
            "interval.prob",
            "quadratic.prob",
            "affine_mini.prob",
            "system_m2k1.prob",
            "relax_inconsistent.prob",
            "relax_consistent.prob",
            "lasso.prob",
        ] {
            let text = std::fs::read_to_string(fixture(name)).unwrap();
            let file: ProblemFile = toml::from_str(&text).unwrap();
            let emitted = emit_problem(&file);
            let reparsed: ProblemFile = toml::from_str(&emitted).unwrap();
            assert_eq!(reparsed, file, "round trip changed {name}");
            // The canonical form is a fixed point of emit(parse(.)).
            assert_eq!(
                emit_problem(&reparsed),
                emitted,
                "emit not canonical for {name}"
            );
        }
    }

    #[test]
    fn numeric_literals_round_trip_exactly() {
        let mut file: ProblemFile =
            toml::from_str(&std::fs::read_to_string(fixture("interval.prob")).unwrap()).unwrap();
        file.start.x[0][0] = 0.1 + 0.2; // not representable in short decimal
        file.start.v[0][0] = f64::MIN_POSITIVE;
        let reparsed: ProblemFile = toml::from_str(&emit_problem(&file)).unwrap();
        assert_eq!(
            reparsed.start.x[0][0].to_bits(),
            file.start.x[0][0].to_bits()
        );
        assert_eq!(
            reparsed.start.v[0][0].to_bits(),
            file.start.v[0][0].to_bits()
        );
    }

    #[test]
    fn infinite_box_bounds_round_trip() {
        let text = r#"
kind = "kt"

[spaces]
primal = [1]
dual = [1]

[[a]]
tag = "box"
lo = [0.0]
hi = [inf]

[[b]]
tag = "box"
lo = [-inf]
hi = [0.0]

[couplings]
rows = [[{ tag = "identity" }]]

[start]
x = [[0.0]]
v = [[0.0]]
"#;
        let parsed = parse_problem_str(text).unwrap();
        let ProblemInstance::Kt(p) = &parsed.instance else {
            panic!("expected kt problem");
        };
        let MonotoneOp::BoxNormalCone { hi, .. } = &p.a else {
            panic!("expected box cone");
        };
        assert_eq!(hi[0], f64::INFINITY);
        let emitted = emit_problem(&parsed.file);
        assert!(emitted.contains("inf"), "{emitted}");
        assert!(parse_problem_str(&emitted).is_ok());
    }

    #[test]
    fn kt_kind_rejects_constant_shifts() {
        let text = r#"
kind = "kt"

[spaces]
primal = [1]
dual = [1]

[[a]]
tag = "zero"

[[b]]
tag = "zero"

[couplings]
rows = [[{ tag = "identity" }]]

[constants]
z = [[1.0]]

[start]
x = [[0.0]]
v = [[0.0]]
"#;
        let err = parse_problem_str(text).unwrap_err();
        assert!(err.to_string().contains("system"), "{err}");
    }

    #[test]
    fn kinds_reject_foreign_sections() {
        let text = r#"
kind = "relaxation"

[spaces]
primal = [1]
dual = []

[[a]]
tag = "zero"

[[b]]
tag = "zero"

[[s]]
tag = "scale"
rho = 1.0

[couplings]
rows = [[{ tag = "identity" }]]

[start]
x = [[0.0], [0.0]]
v = [[0.0]]
"#;
        let err = parse_problem_str(text).unwrap_err();
        assert!(err.to_string().contains("couplings"), "{err}");
    }

    #[test]
    fn config_overrides_apply_mode_defaults() {
        let overrides = ConfigOverrides {
            mode: Some(ModeSpec::Fejer),
            ..ConfigOverrides::default()
        };
        let config = overrides.apply();
        assert_eq!(config.mode, Mode::Fejer);
        assert_eq!(config.lambda, Schedule::Constant(1.8));

        let overrides = ConfigOverrides {
            mode: Some(ModeSpec::Fejer),
            lambda: Some(1.0),
            gamma: Some(2.5),
            ..ConfigOverrides::default()
        };
        let config = overrides.apply();
        assert_eq!(config.lambda, Schedule::Constant(1.0));
        assert_eq!(config.gamma, Schedule::Constant(2.5));
    }
}
