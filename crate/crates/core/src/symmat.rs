//! Dense symmetric matrices stored as a packed lower triangle, their Cholesky
//! factorization, and symmetric support patterns over node pairs.
//!
//! Matrix accessors use 0-based `(row, col)` indices. Support patterns speak
//! in 1-based node labels `(i, j)` with `i >= j`, the same labels used by
//! every file format and report.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetry tolerance applied when a full matrix is converted to packed form.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

#[inline]
pub(crate) fn packed_index(row: usize, col: usize) -> usize {
    let (r, c) = if row >= col { (row, col) } else { (col, row) };
    r * (r + 1) / 2 + c
}

/// Iterates `(row, col)` with `row >= col` in packed storage order, which is
/// also lexicographic order on `(row, col)`.
pub(crate) fn lower_indices(dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..dim).flat_map(|r| (0..=r).map(move |c| (r, c)))
}

#[derive(Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for SymmetricMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SymmetricMatrix({}x{})", self.dim, self.dim)?;
        for r in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|c| format!("{:>12.6e}", self.get(r, c))).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        SymmetricMatrix { dim, data: vec![0.0; packed_len(dim)] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for r in 0..dim {
            m.set(r, r, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (r, &v) in diag.iter().enumerate() {
            m.set(r, r, v);
        }
        m
    }

    /// Builds a matrix from a function evaluated on the lower triangle.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        let data = lower_indices(dim).map(|(r, c)| f(r, c)).collect();
        SymmetricMatrix { dim, data }
    }

    pub fn from_packed(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        Error::check_dim(packed_len(dim), data.len())?;
        Ok(SymmetricMatrix { dim, data })
    }

    /// Converts a full square matrix, rejecting it when `|a_ij - a_ji|`
    /// exceeds [`SYMMETRY_TOL`] anywhere.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        for row in rows {
            Error::check_dim(dim, row.len())?;
        }
        for r in 0..dim {
            for c in 0..r {
                if (rows[r][c] - rows[c][r]).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({}, {}): {} vs {}",
                        r + 1,
                        c + 1,
                        rows[r][c],
                        rows[c][r]
                    )));
                }
            }
        }
        Ok(Self::from_fn(dim, |r, c| rows[r][c]))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[packed_index(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[packed_index(row, col)] = value;
    }

    /// Packed lower triangle in row-major order.
    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    pub fn packed_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_packed(self) -> Vec<f64> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|r| (0..self.dim).map(|c| self.get(r, c)).collect()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, r)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|r| self.get(r, r)).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SymmetricMatrix { dim: self.dim, data: self.data.iter().map(|v| v * factor).collect() }
    }

    /// `D A D` for the diagonal matrix `D = diag(d)`.
    pub fn diagonal_congruence(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.dim);
        Self::from_fn(self.dim, |r, c| d[r] * self.get(r, c) * d[c])
    }

    /// `tr(A B)`, the trace inner product of two symmetric matrices.
    pub fn trace_product(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "trace_product dimension mismatch");
        lower_indices(self.dim)
            .zip(self.data.iter().zip(&other.data))
            .map(|((r, c), (a, b))| if r == c { a * b } else { 2.0 * a * b })
            .sum()
    }

    /// Full product `A B` as a dense row-major matrix (not symmetric in general).
    pub fn matmul_dense(&self, other: &Self) -> Vec<f64> {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let a = self.to_rows();
        let b = other.to_rows();
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for k in 0..n {
                let ark = a[r][k];
                if ark == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out[r * n + c] += ark * b[k][c];
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm of the full matrix; off-diagonal entries count twice.
    pub fn frobenius_norm(&self) -> f64 {
        self.trace_product(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::factor(self)
    }

    pub fn log_det(&self) -> Result<f64> {
        Ok(self.cholesky()?.log_det())
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(self.cholesky()?.inverse())
    }

    /// Keeps entries whose position is in `support`, zeroes the rest.
    pub fn project(&self, support: &SupportPattern) -> Result<Self> {
        Error::check_dim(self.dim, support.dim())?;
        let data = self
            .data
            .iter()
            .zip(support.mask())
            .map(|(&v, &keep)| if keep { v } else { 0.0 })
            .collect();
        Ok(SymmetricMatrix { dim: self.dim, data })
    }

    /// Positions with `|a_ij| > zero_tol`.
    pub fn support(&self, zero_tol: f64) -> SupportPattern {
        SupportPattern {
            dim: self.dim,
            mask: self.data.iter().map(|v| v.abs() > zero_tol).collect(),
        }
    }
}

/// Orthogonal projection onto matrices supported on `support`.
pub fn project_support(a: &SymmetricMatrix, support: &SupportPattern) -> Result<SymmetricMatrix> {
    a.project(support)
}

pub fn cholesky(a: &SymmetricMatrix) -> Result<Cholesky> {
    a.cholesky()
}

pub fn log_det(a: &SymmetricMatrix) -> Result<f64> {
    a.log_det()
}

pub fn inverse(a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    a.inverse()
}

pub fn frobenius_norm(a: &SymmetricMatrix) -> f64 {
    a.frobenius_norm()
}

pub fn support_of(a: &SymmetricMatrix, zero_tol: f64) -> Result<SupportPattern> {
    if !(zero_tol >= 0.0) {
        return Err(Error::invalid("zero_tol must be nonnegative"));
    }
    Ok(a.support(zero_tol))
}

macro_rules! elementwise_op {
    ($trait:ident, $method:ident, $assign_trait:ident, $assign_method:ident, $op:tt) => {
        impl $trait<&SymmetricMatrix> for &SymmetricMatrix {
            type Output = SymmetricMatrix;
            fn $method(self, rhs: &SymmetricMatrix) -> SymmetricMatrix {
                assert_eq!(self.dim, rhs.dim, "dimension mismatch");
                SymmetricMatrix {
                    dim: self.dim,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| a $op b).collect(),
                }
            }
        }

        impl $trait<SymmetricMatrix> for SymmetricMatrix {
            type Output = SymmetricMatrix;
            fn $method(self, rhs: SymmetricMatrix) -> SymmetricMatrix {
                (&self).$method(&rhs)
            }
        }

        impl $trait<&SymmetricMatrix> for SymmetricMatrix {
            type Output = SymmetricMatrix;
            fn $method(self, rhs: &SymmetricMatrix) -> SymmetricMatrix {
                (&self).$method(rhs)
            }
        }

        impl $assign_trait<&SymmetricMatrix> for SymmetricMatrix {
            fn $assign_method(&mut self, rhs: &SymmetricMatrix) {
                assert_eq!(self.dim, rhs.dim, "dimension mismatch");
                for (a, b) in self.data.iter_mut().zip(&rhs.data) {
                    *a = *a $op *b;
                }
            }
        }
    };
}

elementwise_op!(Add, add, AddAssign, add_assign, +);
elementwise_op!(Sub, sub, SubAssign, sub_assign, -);

impl Mul<f64> for &SymmetricMatrix {
    type Output = SymmetricMatrix;
    fn mul(self, rhs: f64) -> SymmetricMatrix {
        self.scaled(rhs)
    }
}

impl Neg for &SymmetricMatrix {
    type Output = SymmetricMatrix;
    fn neg(self) -> SymmetricMatrix {
        self.scaled(-1.0)
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`, packed like
/// [`SymmetricMatrix`].
#[derive(Clone, Debug)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Fails with [`Error::NotPositiveDefinite`] on any non-positive or
    /// non-finite pivot.
    pub fn factor(a: &SymmetricMatrix) -> Result<Self> {
        let n = a.dim;
        let mut l = vec![0.0; packed_len(n)];
        for i in 0..n {
            let row_i = i * (i + 1) / 2;
            for j in 0..=i {
                let row_j = j * (j + 1) / 2;
                let mut s = a.data[row_i + j];
                for k in 0..j {
                    s -= l[row_i + k] * l[row_j + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite);
                    }
                    l[row_i + i] = s.sqrt();
                } else {
                    l[row_i + j] = s / l[row_j + j];
                }
            }
        }
        Ok(Cholesky { dim: n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if col > row {
            0.0
        } else {
            self.lower[packed_index(row, col)]
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|r| (0..self.dim).map(|c| self.get(r, c)).collect()).collect()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.get(i, i).ln()).sum::<f64>()
    }

    /// `L z`; maps standard normal draws to draws with covariance `L Lᵀ`.
    pub fn lower_mul(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.dim);
        (0..self.dim).map(|r| (0..=r).map(|c| self.get(r, c) * z[c]).sum()).collect()
    }

    fn lower_inverse(&self) -> Vec<f64> {
        // forward substitution, column by column
        let n = self.dim;
        let mut inv = vec![0.0; packed_len(n)];
        for c in 0..n {
            inv[packed_index(c, c)] = 1.0 / self.get(c, c);
            for r in (c + 1)..n {
                let mut s = 0.0;
                for k in c..r {
                    s -= self.get(r, k) * inv[packed_index(k, c)];
                }
                inv[packed_index(r, c)] = s / self.get(r, r);
            }
        }
        inv
    }

    /// `A⁻¹ = L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> SymmetricMatrix {
        let n = self.dim;
        let linv = self.lower_inverse();
        SymmetricMatrix::from_fn(n, |r, c| {
            // r >= c; sum over k >= r of Linv[k][r] * Linv[k][c]
            (r..n).map(|k| linv[packed_index(k, r)] * linv[packed_index(k, c)]).sum()
        })
    }
}

/// An unordered node pair with 1-based labels, stored as `i >= j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Pair {
    pub i: usize,
    pub j: usize,
}

impl Pair {
    pub fn new(a: usize, b: usize) -> Self {
        if a >= b {
            Pair { i: a, j: b }
        } else {
            Pair { i: b, j: a }
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.i == self.j
    }
}

impl From<[usize; 2]> for Pair {
    fn from(p: [usize; 2]) -> Self {
        Pair::new(p[0], p[1])
    }
}

impl From<Pair> for [usize; 2] {
    fn from(p: Pair) -> Self {
        [p.i, p.j]
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// Symmetric set of node pairs, diagonal pairs included.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SupportPattern {
    dim: usize,
    mask: Vec<bool>,
}

impl fmt::Debug for SupportPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs: Vec<String> = self.pairs().map(|p| p.to_string()).collect();
        write!(f, "SupportPattern(dim={}, {{{}}})", self.dim, pairs.join(" "))
    }
}

impl SupportPattern {
    pub fn empty(dim: usize) -> Self {
        assert!(dim >= 1, "support dimension must be at least 1");
        SupportPattern { dim, mask: vec![false; packed_len(dim)] }
    }

    pub fn full(dim: usize) -> Self {
        assert!(dim >= 1, "support dimension must be at least 1");
        SupportPattern { dim, mask: vec![true; packed_len(dim)] }
    }

    pub fn diagonal(dim: usize) -> Self {
        let mut s = Self::empty(dim);
        for i in 1..=dim {
            s.insert(i, i);
        }
        s
    }

    /// Accepts pairs in either orientation; labels must lie in `1..=dim`.
    pub fn from_pairs<I>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if dim == 0 {
            return Err(Error::invalid("support dimension must be at least 1"));
        }
        let mut s = Self::empty(dim);
        for (a, b) in pairs {
            if a == 0 || b == 0 || a > dim || b > dim {
                return Err(Error::invalid(format!("pair ({a},{b}) out of range 1..={dim}")));
            }
            s.insert(a, b);
        }
        Ok(s)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Membership by 1-based labels, in either orientation.
    #[inline]
    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.mask[packed_index(a - 1, b - 1)]
    }

    #[inline]
    pub(crate) fn contains_index(&self, row: usize, col: usize) -> bool {
        self.mask[packed_index(row, col)]
    }

    pub fn insert(&mut self, a: usize, b: usize) {
        self.mask[packed_index(a - 1, b - 1)] = true;
    }

    pub fn remove(&mut self, a: usize, b: usize) {
        self.mask[packed_index(a - 1, b - 1)] = false;
    }

    /// Stored pairs in lexicographic `(i, j)` order.
    pub fn pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        lower_indices(self.dim)
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|((r, c), _)| Pair { i: r + 1, j: c + 1 })
    }

    pub fn off_diagonal_pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.pairs().filter(|p| !p.is_diagonal())
    }

    /// Off-diagonal pairs not in the pattern, lexicographic.
    pub fn off_diagonal_complement(&self) -> impl Iterator<Item = Pair> + '_ {
        lower_indices(self.dim)
            .zip(&self.mask)
            .filter(|((r, c), &m)| r != c && !m)
            .map(|((r, c), _)| Pair { i: r + 1, j: c + 1 })
    }

    /// Number of stored pairs (`i >= j`).
    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.off_diagonal_pairs().count()
    }

    /// Entries of the full symmetric pattern, so each edge counts twice.
    pub fn symmetric_entry_count(&self) -> usize {
        self.pairs().map(|p| if p.is_diagonal() { 1 } else { 2 }).sum()
    }

    fn combine(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Self {
        assert_eq!(self.dim, other.dim, "support dimension mismatch");
        SupportPattern {
            dim: self.dim,
            mask: self.mask.iter().zip(&other.mask).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a && !b)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.dim == other.dim && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    pub fn with_diagonal(&self) -> Self {
        self.union(&Self::diagonal(self.dim))
    }

    /// Sets of neighbours per node (0-based), from off-diagonal pairs only.
    pub fn neighbourhoods(&self) -> Vec<Vec<bool>> {
        let mut nb = vec![vec![false; self.dim]; self.dim];
        for p in self.off_diagonal_pairs() {
            nb[p.i - 1][p.j - 1] = true;
            nb[p.j - 1][p.i - 1] = true;
        }
        nb
    }
}

impl Serialize for SupportPattern {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            dim: usize,
            pairs: Vec<Pair>,
        }
        Repr { dim: self.dim, pairs: self.pairs().collect() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SupportPattern {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            dim: usize,
            pairs: Vec<Pair>,
        }
        let r = Repr::deserialize(deserializer)?;
        SupportPattern::from_pairs(r.dim, r.pairs.into_iter().map(|p| (p.i, p.j))).map_err(serde::de::Error::custom)
    }
}
