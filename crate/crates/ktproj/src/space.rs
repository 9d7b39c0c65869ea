//! Finite-dimensional real inner-product spaces: vectors, block (product-space)
//! vectors, and linear operators with exact adjoints.
//!
//! Everything here is immutable after construction and safe to share across
//! threads. Reductions over coordinates run in fixed sequential order so that
//! results are bitwise reproducible.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
}

/// Element of a real inner-product space.
///
/// Implemented by [`Vector`], [`BlockVec`], and the solver's primal-dual
/// pairs, so the Haugazeau projector can operate on any of them. Inner
/// products of composite elements are the sums of the parts' inner products,
/// accumulated in declaration order.
pub trait InnerSpace: Clone {
    fn dot(&self, other: &Self) -> f64;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn scale(&self, factor: f64) -> Self;

    fn norm_sq(&self) -> f64 {
        self.dot(self)
    }
    fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

/// Dense coordinate vector over `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Builds a vector, rejecting NaN/Inf coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self, SpaceError> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(SpaceError::NonFinite("vector coordinates"));
        }
        Ok(Vector(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Componentwise clamp against (possibly infinite) bounds.
    pub fn clamp(&self, lo: &[f64], hi: &[f64]) -> Vector {
        assert_eq!(self.dim(), lo.len(), "clamp: lower bound dimension");
        assert_eq!(self.dim(), hi.len(), "clamp: upper bound dimension");
        Vector(
            self.0
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .map(|(&c, (&l, &h))| c.max(l).min(h))
                .collect(),
        )
    }
}

impl InnerSpace for Vector {
    fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dot: mismatched dimensions");
        let mut acc = 0.0;
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            acc += a * b;
        }
        acc
    }

    fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "add: mismatched dimensions");
        Vector(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "sub: mismatched dimensions");
        Vector(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    fn scale(&self, factor: f64) -> Self {
        Vector(self.0.iter().map(|a| a * factor).collect())
    }
}

/// Checked inner product; errors on signature mismatch instead of panicking.
pub fn inner(u: &Vector, v: &Vector) -> Result<f64, SpaceError> {
    if u.dim() != v.dim() {
        return Err(SpaceError::DimensionMismatch {
            context: "inner product",
            expected: u.dim(),
            found: v.dim(),
        });
    }
    Ok(u.dot(v))
}

/// Checked blockwise inner product; the signatures must match block by block.
pub fn inner_blocks(u: &BlockVec, v: &BlockVec) -> Result<f64, SpaceError> {
    if u.signature() != v.signature() {
        return Err(SpaceError::DimensionMismatch {
            context: "block inner product",
            expected: u.signature().iter().sum(),
            found: v.signature().iter().sum(),
        });
    }
    Ok(u.dot(v))
}

/// Element of a product space H_1 x ... x H_p, stored blockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVec {
    blocks: Vec<Vector>,
}

impl BlockVec {
    pub fn new(blocks: Vec<Vector>) -> Self {
        BlockVec { blocks }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        BlockVec {
            blocks: dims.iter().map(|&d| Vector::zeros(d)).collect(),
        }
    }

    pub fn blocks(&self) -> &[Vector] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Vector {
        &self.blocks[i]
    }

    pub fn signature(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim()).collect()
    }

    /// Concatenates the blocks into a single vector, block order preserved.
    pub fn flatten(&self) -> Vector {
        let mut coords = Vec::with_capacity(self.blocks.iter().map(|b| b.dim()).sum());
        for b in &self.blocks {
            coords.extend_from_slice(b.coords());
        }
        Vector(coords)
    }

    /// Splits a flat vector back into blocks of the given dimensions.
    pub fn split(flat: &Vector, dims: &[usize]) -> Result<Self, SpaceError> {
        let total: usize = dims.iter().sum();
        if flat.dim() != total {
            return Err(SpaceError::DimensionMismatch {
                context: "block split",
                expected: total,
                found: flat.dim(),
            });
        }
        let mut blocks = Vec::with_capacity(dims.len());
        let mut offset = 0;
        for &d in dims {
            blocks.push(Vector(flat.coords()[offset..offset + d].to_vec()));
            offset += d;
        }
        Ok(BlockVec { blocks })
    }
}

impl InnerSpace for BlockVec {
    /// Sum of blockwise inner products, ascending block index.
    fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.blocks.len(), other.blocks.len(), "dot: block count");
        let mut acc = 0.0;
        for (a, b) in self.blocks.iter().zip(other.blocks.iter()) {
            acc += a.dot(b);
        }
        acc
    }

    fn add(&self, other: &Self) -> Self {
        assert_eq!(self.blocks.len(), other.blocks.len(), "add: block count");
        BlockVec {
            blocks: self
                .blocks
                .iter()
                .zip(other.blocks.iter())
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.blocks.len(), other.blocks.len(), "sub: block count");
        BlockVec {
            blocks: self
                .blocks
                .iter()
                .zip(other.blocks.iter())
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    fn scale(&self, factor: f64) -> Self {
        BlockVec {
            blocks: self.blocks.iter().map(|b| b.scale(factor)).collect(),
        }
    }
}

/// Dense matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, SpaceError> {
        if data.len() != rows * cols {
            return Err(SpaceError::DimensionMismatch {
                context: "dense matrix storage",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(SpaceError::NonFinite("matrix entries"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpaceError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            if r.len() != ncols {
                return Err(SpaceError::DimensionMismatch {
                    context: "dense matrix row",
                    expected: ncols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        DenseMatrix::new(nrows, ncols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row_slices(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].to_vec())
            .collect()
    }

    fn matvec(&self, x: &Vector) -> Vector {
        assert_eq!(x.dim(), self.cols, "matvec: domain dimension");
        let out = self
            .data
            .chunks_exact(self.cols)
            .map(|row| {
                let mut acc = 0.0;
                for (m, c) in row.iter().zip(x.coords()) {
                    acc += m * c;
                }
                acc
            })
            .collect();
        Vector(out)
    }

    fn matvec_transpose(&self, y: &Vector) -> Vector {
        assert_eq!(y.dim(), self.rows, "matvec_transpose: codomain dimension");
        let out = (0..self.cols)
            .map(|j| {
                let mut acc = 0.0;
                for (i, c) in y.coords().iter().enumerate() {
                    acc += self.data[i * self.cols + j] * c;
                }
                acc
            })
            .collect();
        Vector(out)
    }
}

/// Bounded linear operator with exact adjoint.
///
/// Structured variants keep the sparse coupling patterns of product-space
/// problems at O(dim) cost; `to_dense` provides the reference realization the
/// tests compare against.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearMap {
    Identity {
        dim: usize,
    },
    NegIdentity {
        dim: usize,
    },
    Zero {
        rows: usize,
        cols: usize,
    },
    /// Scaled identity `x -> factor * x`.
    Scaled {
        dim: usize,
        factor: f64,
    },
    Dense(DenseMatrix),
    /// Block matrix of maps; entry `(k, i)` maps factor `i` of the domain
    /// into factor `k` of the codomain.
    Block {
        entries: Vec<Vec<LinearMap>>,
        row_dims: Vec<usize>,
        col_dims: Vec<usize>,
    },
}

impl LinearMap {
    pub fn dense(rows: &[Vec<f64>]) -> Result<Self, SpaceError> {
        Ok(LinearMap::Dense(DenseMatrix::from_rows(rows)?))
    }

    /// Builds a block map from a grid of entries, validating every entry
    /// against the factor dimensions. Errors name the offending row/column.
    pub fn block(
        entries: Vec<Vec<LinearMap>>,
        row_dims: Vec<usize>,
        col_dims: Vec<usize>,
    ) -> Result<Self, SpaceError> {
        if entries.len() != row_dims.len() {
            return Err(SpaceError::DimensionMismatch {
                context: "block map row count",
                expected: row_dims.len(),
                found: entries.len(),
            });
        }
        for (k, row) in entries.iter().enumerate() {
            if row.len() != col_dims.len() {
                return Err(SpaceError::DimensionMismatch {
                    context: "block map column count",
                    expected: col_dims.len(),
                    found: row.len(),
                });
            }
            for (i, e) in row.iter().enumerate() {
                if e.domain_dim() != col_dims[i] || e.codomain_dim() != row_dims[k] {
                    return Err(SpaceError::DimensionMismatch {
                        context: "block map entry",
                        expected: col_dims[i],
                        found: e.domain_dim().max(e.codomain_dim()),
                    });
                }
            }
        }
        Ok(LinearMap::Block {
            entries,
            row_dims,
            col_dims,
        })
    }

    pub fn domain_dim(&self) -> usize {
        match self {
            LinearMap::Identity { dim }
            | LinearMap::NegIdentity { dim }
            | LinearMap::Scaled { dim, .. } => *dim,
            LinearMap::Zero { cols, .. } => *cols,
            LinearMap::Dense(m) => m.cols(),
            LinearMap::Block { col_dims, .. } => col_dims.iter().sum(),
        }
    }

    pub fn codomain_dim(&self) -> usize {
        match self {
            LinearMap::Identity { dim }
            | LinearMap::NegIdentity { dim }
            | LinearMap::Scaled { dim, .. } => *dim,
            LinearMap::Zero { rows, .. } => *rows,
            LinearMap::Dense(m) => m.rows(),
            LinearMap::Block { row_dims, .. } => row_dims.iter().sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, LinearMap::Zero { .. })
    }

    /// Applies the map. Panics on dimension mismatch; use [`LinearMap::try_apply`]
    /// at validation boundaries.
    pub fn apply(&self, x: &Vector) -> Vector {
        assert_eq!(x.dim(), self.domain_dim(), "apply: domain dimension");
        match self {
            LinearMap::Identity { .. } => x.clone(),
            LinearMap::NegIdentity { .. } => x.scale(-1.0),
            LinearMap::Zero { rows, .. } => Vector::zeros(*rows),
            LinearMap::Scaled { factor, .. } => x.scale(*factor),
            LinearMap::Dense(m) => m.matvec(x),
            LinearMap::Block {
                entries,
                row_dims,
                col_dims,
            } => {
                let xs = BlockVec::split(x, col_dims).expect("block apply: signature");
                let mut out_blocks = Vec::with_capacity(row_dims.len());
                for (k, row) in entries.iter().enumerate() {
                    // Structured zeros are skipped; accumulation runs in
                    // ascending column index for determinism.
                    let mut acc = Vector::zeros(row_dims[k]);
                    for (i, e) in row.iter().enumerate() {
                        if !e.is_zero() {
                            acc = acc.add(&e.apply(xs.block(i)));
                        }
                    }
                    out_blocks.push(acc);
                }
                BlockVec::new(out_blocks).flatten()
            }
        }
    }

    /// Applies the adjoint. For block maps this is the transposed block
    /// pattern of entry adjoints.
    pub fn adjoint_apply(&self, y: &Vector) -> Vector {
        assert_eq!(y.dim(), self.codomain_dim(), "adjoint: codomain dimension");
        match self {
            LinearMap::Identity { .. } => y.clone(),
            LinearMap::NegIdentity { .. } => y.scale(-1.0),
            LinearMap::Zero { cols, .. } => Vector::zeros(*cols),
            LinearMap::Scaled { factor, .. } => y.scale(*factor),
            LinearMap::Dense(m) => m.matvec_transpose(y),
            LinearMap::Block {
                entries,
                row_dims,
                col_dims,
            } => {
                let ys = BlockVec::split(y, row_dims).expect("block adjoint: signature");
                let mut out_blocks = Vec::with_capacity(col_dims.len());
                for i in 0..col_dims.len() {
                    let mut acc = Vector::zeros(col_dims[i]);
                    for (k, row) in entries.iter().enumerate() {
                        let e = &row[i];
                        if !e.is_zero() {
                            acc = acc.add(&e.adjoint_apply(ys.block(k)));
                        }
                    }
                    out_blocks.push(acc);
                }
                BlockVec::new(out_blocks).flatten()
            }
        }
    }

    pub fn try_apply(&self, x: &Vector) -> Result<Vector, SpaceError> {
        if x.dim() != self.domain_dim() {
            return Err(SpaceError::DimensionMismatch {
                context: "linear map application",
                expected: self.domain_dim(),
                found: x.dim(),
            });
        }
        Ok(self.apply(x))
    }

    pub fn try_adjoint_apply(&self, y: &Vector) -> Result<Vector, SpaceError> {
        if y.dim() != self.codomain_dim() {
            return Err(SpaceError::DimensionMismatch {
                context: "adjoint application",
                expected: self.codomain_dim(),
                found: y.dim(),
            });
        }
        Ok(self.adjoint_apply(y))
    }

    /// Densifies the map, column by column.
    pub fn to_dense(&self) -> DenseMatrix {
        let (m, n) = (self.codomain_dim(), self.domain_dim());
        let mut data = vec![0.0; m * n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.apply(&Vector(e));
            for i in 0..m {
                data[i * n + j] = col.coords()[i];
            }
        }
        DenseMatrix {
            rows: m,
            cols: n,
            data,
        }
    }
}

/// Power-iteration estimate of the operator norm `||L||`.
///
/// Returns a monotonically nondecreasing lower bound (the Rayleigh quotient
/// of `L*L` is nondecreasing along power iterations). The solver itself never
/// needs this; it feeds the `alpha` diagnostic only.
pub fn operator_norm_estimate(map: &LinearMap, iters: usize) -> f64 {
    let n = map.domain_dim();
    if n == 0 {
        return 0.0;
    }
    // Deterministic pseudo-random start so repeated calls agree bitwise.
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut coords = Vec::with_capacity(n);
    for _ in 0..n {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        coords.push(((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5);
    }
    let mut v = Vector(coords);
    let nv = v.norm();
    if nv == 0.0 {
        return 0.0;
    }
    v = v.scale(1.0 / nv);
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let w = map.adjoint_apply(&map.apply(&v));
        let rayleigh = v.dot(&w);
        if rayleigh <= 0.0 {
            return estimate;
        }
        estimate = rayleigh.sqrt();
        let wn = w.norm();
        if wn == 0.0 {
            return estimate;
        }
        v = w.scale(1.0 / wn);
    }
    estimate
}
