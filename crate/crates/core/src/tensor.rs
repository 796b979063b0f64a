//! Dense complex-matrix kernel.
//!
//! Everything downstream computes on [`ComplexMatrix`], a row-major dense
//! matrix of `Complex64`. Multi-party indices follow a most-significant-first
//! convention: for subsystems with dimensions `(d_0, d_1, …, d_{n-1})` the
//! basis state `|i_0 i_1 … i_{n-1}⟩` sits at linear index
//! `((i_0·d_1 + i_1)·d_2 + …)`. [`kron`] therefore puts its left factor in the
//! most significant position.
//!
//! Eigen-, singular-value and QR decompositions are delegated to `faer`; the
//! contract here is the reconstruction residual and the descending ordering.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest matrix side handled densely.
pub const MAX_SIDE: usize = 4096;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Numerical thresholds used wherever an exact algebraic statement (rank,
/// Hermiticity, positivity, purity) has to be decided in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Singular values at or below `rank_rtol · max(1, σ_max)` count as zero.
    pub rank_rtol: f64,
    pub herm_atol: f64,
    pub psd_atol: f64,
    pub purity_atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rank_rtol: 1e-9,
            herm_atol: 1e-9,
            psd_atol: 1e-9,
            purity_atol: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn uniform(value: f64) -> Result<Self> {
        let tol = Self {
            rank_rtol: value,
            herm_atol: value,
            psd_atol: value,
            purity_atol: value,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank_rtol", self.rank_rtol),
            ("herm_atol", self.herm_atol),
            ("psd_atol", self.psd_atol),
            ("purity_atol", self.purity_atol),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidTolerance(format!(
                    "{name} = {v} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }

    /// Absolute cutoff for singular values given the largest one.
    pub fn rank_cutoff(&self, largest: f64) -> f64 {
        self.rank_rtol * largest.max(1.0)
    }
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Real row-major literal, handy for small fixed operators.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self {
            rows,
            cols,
            data: data.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn from_columns(columns: &[Vec<C64>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        Self::from_fn(rows, cols, |r, c| columns[c][r])
    }

    /// `|a⟩⟨b|`
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        Self::from_fn(a.len(), b.len(), |r, c| a[r] * b[c].conj())
    }

    pub fn projector(v: &[C64]) -> Self {
        Self::outer(v, v)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Entrywise max-norm of the difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                dev = dev.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        dev
    }

    /// `(m + m†)/2`; removes rounding asymmetry after products like `MρM†`.
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()) * 0.5
        })
    }

    pub fn unitary_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.rows))
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Principal-style submatrix on the given row and column indices.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |r, c| self[(rows[r], cols[c])])
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        svd(self).singulars.first().copied().unwrap_or(0.0)
    }

    pub(crate) fn to_faer(&self) -> Mat<C64> {
        Mat::from_fn(self.rows, self.cols, |r, c| self[(r, c)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matrix product {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/* Vector helpers *************************************************************/

/// `⟨a|b⟩`
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn basis_vector(dim: usize, index: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[index] = ONE;
    v
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x * y))
        .collect()
}

/// Largest deviation of the Gram matrix of `vectors` from the identity.
pub fn orthonormality_deviation(vectors: &[Vec<C64>]) -> f64 {
    let mut dev = 0.0f64;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate().skip(i) {
            let target = if i == j { ONE } else { ZERO };
            dev = dev.max((inner(a, b) - target).norm());
        }
    }
    dev
}

/* Tensor products and partial traces *****************************************/

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows.saturating_mul(b.rows);
    let cols = a.cols.saturating_mul(b.cols);
    let side = rows.max(cols);
    if side > MAX_SIDE {
        return Err(Error::DimensionCap {
            side,
            cap: MAX_SIDE,
        });
    }
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a[(ar, ac)];
            if x == ZERO {
                continue;
            }
            for br in 0..b.rows {
                for bc in 0..b.cols {
                    out[(ar * b.rows + br, ac * b.cols + bc)] = x * b[(br, bc)];
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of a sequence, leftmost factor most significant.
pub fn kron_all<'a, I>(factors: I) -> Result<ComplexMatrix>
where
    I: IntoIterator<Item = &'a ComplexMatrix>,
{
    let mut acc: Option<ComplexMatrix> = None;
    for f in factors {
        acc = Some(match acc {
            None => f.clone(),
            Some(m) => kron(&m, f)?,
        });
    }
    acc.ok_or_else(|| Error::InvalidMatrix("empty Kronecker product".into()))
}

/// Digits of `index` in the mixed radix `dims`, most significant first.
pub fn unravel(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; dims.len()];
    for (k, &d) in dims.iter().enumerate().rev() {
        digits[k] = index % d;
        index /= d;
    }
    digits
}

pub fn ravel(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

fn check_square_side(m: &ComplexMatrix, dims: &[usize]) -> Result<usize> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows != total {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix for subsystem dimensions {:?} (total {})",
            m.rows, m.cols, dims, total
        )));
    }
    Ok(total)
}

/// Reduced matrix on the subsystems in `keep` (order of `dims` is preserved).
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    check_square_side(m, dims)?;
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::ShapeMismatch(format!(
            "subsystem {bad} out of range for {} subsystems",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let keep_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let dk: usize = keep_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    // full[a * dt + t] = linear index of (kept digits a, traced digits t)
    let mut full = vec![0usize; dk * dt];
    let mut digits = vec![0usize; dims.len()];
    for a in 0..dk {
        let ad = unravel(a, &keep_dims);
        for (&k, &v) in keep.iter().zip(&ad) {
            digits[k] = v;
        }
        for t in 0..dt {
            let td = unravel(t, &traced_dims);
            for (&k, &v) in traced.iter().zip(&td) {
                digits[k] = v;
            }
            full[a * dt + t] = ravel(&digits, dims);
        }
    }

    Ok(ComplexMatrix::from_fn(dk, dk, |a, b| {
        (0..dt)
            .map(|t| m[(full[a * dt + t], full[b * dt + t])])
            .sum()
    }))
}

/// Index map for reordering subsystems: position `k` of the result holds old
/// subsystem `perm[k]`. Returns `map[new_index] = old_index`.
pub fn permutation_index_map(dims: &[usize], perm: &[usize]) -> Result<Vec<usize>> {
    let mut seen = vec![false; dims.len()];
    if perm.len() != dims.len() {
        return Err(Error::ShapeMismatch(format!(
            "permutation of length {} for {} subsystems",
            perm.len(),
            dims.len()
        )));
    }
    for &p in perm {
        if p >= dims.len() || std::mem::replace(&mut seen[p], true) {
            return Err(Error::ShapeMismatch(format!(
                "{perm:?} is not a permutation"
            )));
        }
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let total: usize = dims.iter().product();
    let mut old_digits = vec![0usize; dims.len()];
    Ok((0..total)
        .map(|new| {
            let nd = unravel(new, &new_dims);
            for (k, &p) in perm.iter().enumerate() {
                old_digits[p] = nd[k];
            }
            ravel(&old_digits, dims)
        })
        .collect())
}

pub fn permute_subsystems(
    m: &ComplexMatrix,
    dims: &[usize],
    perm: &[usize],
) -> Result<ComplexMatrix> {
    check_square_side(m, dims)?;
    let map = permutation_index_map(dims, perm)?;
    Ok(ComplexMatrix::from_fn(m.rows, m.cols, |r, c| {
        m[(map[r], map[c])]
    }))
}

/* Decompositions *************************************************************/

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: ComplexMatrix,
}

pub fn eig_hermitian(m: &ComplexMatrix, tol: &Tolerance) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let deviation = m.hermitian_deviation();
    if deviation > tol.herm_atol {
        return Err(Error::NotHermitian {
            deviation,
            tol: tol.herm_atol,
        });
    }
    let eig = m
        .hermitian_part()
        .to_faer()
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("eigendecomposition of a finite Hermitian matrix converges");
    let raw: Vec<f64> = eig.S().column_vector().iter().map(|z| z.re).collect();
    let u = eig.U();
    let mut order: Vec<usize> = (0..m.rows).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    let values = order.iter().map(|&i| raw[i]).collect();
    let vectors = ComplexMatrix::from_fn(m.rows, m.rows, |r, c| u[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows × k` with `k = min(rows, cols)`.
    pub left: ComplexMatrix,
    /// Descending, length `k`.
    pub singulars: Vec<f64>,
    /// `cols × k`; the input equals `left · diag(singulars) · right†`.
    pub right: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let k = self.singulars.len();
        let scaled = ComplexMatrix::from_fn(self.left.rows, k, |r, c| {
            self.left[(r, c)] * self.singulars[c]
        });
        &scaled * &self.right.adjoint()
    }
}

pub fn svd(m: &ComplexMatrix) -> Svd {
    let dec = m
        .to_faer()
        .thin_svd()
        .expect("SVD of a finite matrix converges");
    let raw: Vec<f64> = dec.S().column_vector().iter().map(|z| z.re).collect();
    let (u, v) = (dec.U(), dec.V());
    let k = raw.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    Svd {
        left: ComplexMatrix::from_fn(m.rows, k, |r, c| u[(r, order[c])]),
        singulars: order.iter().map(|&i| raw[i].max(0.0)).collect(),
        right: ComplexMatrix::from_fn(m.cols, k, |r, c| v[(r, order[c])]),
    }
}

/// Count of singular values strictly above `rank_rtol · max(1, σ_max)`.
pub fn numerical_rank(m: &ComplexMatrix, tol: &Tolerance) -> usize {
    rank_of_singulars(&svd(m).singulars, tol)
}

pub fn rank_of_singulars(singulars: &[f64], tol: &Tolerance) -> usize {
    let largest = singulars.iter().copied().fold(0.0, f64::max);
    let cutoff = tol.rank_cutoff(largest);
    singulars.iter().filter(|&&s| s > cutoff).count()
}

/// Extends `vectors` (assumed orthonormal) to an orthonormal basis of the
/// whole space by Gram–Schmidt over the standard basis in index order.
pub fn complete_orthonormal(vectors: &[Vec<C64>], dim: usize) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = vectors.to_vec();
    for i in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = basis_vector(dim, i);
        // two passes of classical Gram–Schmidt keep the result orthogonal to
        // working precision
        for _ in 0..2 {
            for b in &basis {
                let overlap = inner(b, &v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= overlap * y;
                }
            }
        }
        let n = norm(&v);
        if n > 1e-6 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}
