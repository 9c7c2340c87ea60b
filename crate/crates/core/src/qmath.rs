//! Dense complex linear algebra for small quantum systems.
//!
//! Everything in the crate is built on [`ComplexMatrix`]: a row-major dense
//! matrix of `Complex64` entries. Tensor factors are tracked by a separate
//! [`TensorLayout`] so that partial traces, partial transposes and embeddings
//! of local operators can address factors by label (`"A"`, `"B'"`, ...).
//!
//! Supported dimensions are small: the largest object materialised anywhere
//! in the crate is 256 x 256.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Largest matrix dimension the kernel is exercised at.
pub const MAX_DIM: usize = 256;

/// Tolerance used when checking that an input is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixJson", try_from = "MatrixJson")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// Wire format: `{"rows":r,"cols":c,"re":[...],"im":[...]}` (row-major).
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl From<ComplexMatrix> for MatrixJson {
    fn from(m: ComplexMatrix) -> Self {
        Self {
            rows: m.rows,
            cols: m.cols,
            re: m.data.iter().map(|z| z.re).collect(),
            im: m.data.iter().map(|z| z.im).collect(),
        }
    }
}

impl TryFrom<MatrixJson> for ComplexMatrix {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        if j.re.len() != j.im.len() {
            return Err(Error::Dimension("re and im arrays differ in length".into()));
        }
        let data = j.re.iter().zip(&j.im).map(|(&r, &i)| C64::new(r, i)).collect();
        ComplexMatrix::from_vec(j.rows, j.cols, data)
    }
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
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!("{} entries cannot fill a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
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

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &z) in entries.iter().enumerate() {
            m.data[i * n + i] = z;
        }
        m
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        let v: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&v)
    }

    /// `|v><v|` for a (not necessarily normalised) vector.
    pub fn projector(v: &[C64]) -> Self {
        Self::outer(v, v)
    }

    /// `|u><v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |r, c| u[r] * v[c].conj())
    }

    pub fn column(v: &[C64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
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

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn col(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * z).collect() }
    }

    pub fn scale_real(&self, x: f64) -> Self {
        self.scale(C64::new(x, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Matrix product. Panics on mismatched inner dimensions; use
    /// [`ComplexMatrix::try_matmul`] when the shapes come from user input.
    pub fn matmul(&self, other: &Self) -> Self {
        self.try_matmul(other).expect("matmul shape mismatch")
    }

    pub fn try_matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut out = vec![ZERO; n * p];
        for i in 0..n {
            let row = &self.data[i * m..(i + 1) * m];
            let dst = &mut out[i * p..(i + 1) * p];
            for (k, &a) in row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let src = &other.data[k * p..(k + 1) * p];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(Self { rows: n, cols: p, data: out })
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "apply: dimension mismatch");
        (0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `self * m * self^dagger`.
    pub fn conjugate(&self, m: &Self) -> Self {
        self.matmul(m).matmul(&self.adjoint())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise distance to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// `(m + m^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_real(0.5)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && self.matmul(&self.adjoint()).max_abs_diff(&Self::identity(self.rows)) <= tol
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add: shape");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub: shape");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut data = vec![ZERO; rows * cols];
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a[(ar, ac)];
            if x == ZERO {
                continue;
            }
            for br in 0..b.rows {
                let base = (ar * b.rows + br) * cols + ac * b.cols;
                for bc in 0..b.cols {
                    data[base + bc] = x * b[(br, bc)];
                }
            }
        }
    }
    ComplexMatrix { rows, cols, data }
}

pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    factors.into_iter().fold(ComplexMatrix::identity(1), |acc, f| kron(&acc, f))
}

/// Kronecker product of state vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Pauli matrices

pub fn pauli_i() -> ComplexMatrix {
    ComplexMatrix::identity(2)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![ZERO, -I, I, ZERO]).unwrap()
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::diag_real(&[1.0, -1.0])
}

/// Single-qubit Pauli by index: 0 = I, 1 = X, 2 = Y, 3 = Z.
pub fn pauli(index: usize) -> ComplexMatrix {
    match index {
        0 => pauli_i(),
        1 => pauli_x(),
        2 => pauli_y(),
        3 => pauli_z(),
        _ => panic!("pauli index {index} out of range"),
    }
}

// ---------------------------------------------------------------------------
// Tensor layouts

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labelled tensor factors. The first factor is the most
/// significant one in the row-major index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TensorLayout {
    factors: Vec<Factor>,
}

impl TensorLayout {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let factors: Vec<Factor> = factors.into_iter().map(|(l, d)| Factor { label: l.into(), dim: d }).collect();
        for (i, f) in factors.iter().enumerate() {
            if f.dim == 0 {
                return Err(Error::Dimension(format!("factor {} has dimension 0", f.label)));
            }
            if factors[..i].iter().any(|g| g.label == f.label) {
                return Err(Error::Layout(format!("duplicate factor label {}", f.label)));
            }
        }
        Ok(Self { factors })
    }

    /// Four-qubit layout `A B A' B'`, the internal ordering used for one copy.
    pub fn abab() -> Self {
        Self::new([("A", 2), ("B", 2), ("A'", 2), ("B'", 2)]).unwrap()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn labels(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.label.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors.iter().position(|f| f.label == label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.factors.iter().any(|f| f.label == label)
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.position(label)?].dim)
    }

    /// Product of dimensions of the named factors.
    pub fn dim_of_all(&self, labels: &[&str]) -> Result<usize> {
        labels.iter().map(|l| self.dim_of(l)).product()
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        Self::new(self.factors.iter().chain(other.factors.iter()).map(|f| (f.label.clone(), f.dim)))
    }

    pub fn select(&self, labels: &[&str]) -> Result<Self> {
        Self::new(labels.iter().map(|l| self.dim_of(l).map(|d| (l.to_string(), d))).collect::<Result<Vec<_>>>()?)
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        let pos = self.position(from)?;
        let mut f = self.factors.clone();
        f[pos].label = to.to_string();
        Self::new(f.into_iter().map(|f| (f.label, f.dim)))
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.factors.len()];
        for i in (0..self.factors.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.factors[i + 1].dim;
        }
        s
    }

    fn check_square(&self, m: &ComplexMatrix) -> Result<()> {
        if !m.is_square() {
            return Err(Error::Dimension(format!("expected a square matrix, got {}x{}", m.rows, m.cols)));
        }
        if m.rows != self.total_dim() {
            return Err(Error::Dimension(format!(
                "matrix dimension {} does not match layout dimension {}",
                m.rows,
                self.total_dim()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for TensorLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|x| format!("{}({})", x.label, x.dim)).collect();
        write!(f, "{}", parts.join(" x "))
    }
}

fn split_index(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        digits[i] = idx % dims[i];
        idx /= dims[i];
    }
    digits
}

/// Traces out every factor not listed in `keep`. The result keeps the
/// original relative order of the retained factors.
pub fn partial_trace(m: &ComplexMatrix, layout: &TensorLayout, keep: &[&str]) -> Result<(ComplexMatrix, TensorLayout)> {
    layout.check_square(m)?;
    let mut keep_pos = Vec::with_capacity(keep.len());
    for l in keep {
        keep_pos.push(layout.position(l)?);
    }
    keep_pos.sort_unstable();
    keep_pos.dedup();
    let traced: Vec<usize> = (0..layout.len()).filter(|i| !keep_pos.contains(i)).collect();
    let strides = layout.strides();
    let dims = layout.dims();
    let kept_dims: Vec<usize> = keep_pos.iter().map(|&i| dims[i]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let kd: usize = kept_dims.iter().product();
    let td: usize = traced_dims.iter().product();

    let offset =
        |digits: &[usize], pos: &[usize]| -> usize { digits.iter().zip(pos).map(|(&d, &p)| d * strides[p]).sum() };
    let kept_off: Vec<usize> = (0..kd).map(|k| offset(&split_index(k, &kept_dims), &keep_pos)).collect();
    let traced_off: Vec<usize> = (0..td).map(|t| offset(&split_index(t, &traced_dims), &traced)).collect();

    let mut out = ComplexMatrix::zeros(kd, kd);
    for (r, &ro) in kept_off.iter().enumerate() {
        for (c, &co) in kept_off.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &traced_off {
                acc += m[(ro + t, co + t)];
            }
            out[(r, c)] = acc;
        }
    }
    let new_layout = TensorLayout::new(keep_pos.iter().map(|&i| (layout.factors[i].label.clone(), dims[i])))?;
    Ok((out, new_layout))
}

/// Transposes the named factor only.
pub fn partial_transpose(m: &ComplexMatrix, layout: &TensorLayout, factor: &str) -> Result<ComplexMatrix> {
    partial_transpose_many(m, layout, &[factor])
}

/// Transposes every listed factor (e.g. both of Bob's systems `B`, `B'`).
pub fn partial_transpose_many(m: &ComplexMatrix, layout: &TensorLayout, factors: &[&str]) -> Result<ComplexMatrix> {
    layout.check_square(m)?;
    let pos: Vec<usize> = factors.iter().map(|l| layout.position(l)).collect::<Result<_>>()?;
    let dims = layout.dims();
    let strides = layout.strides();
    let n = m.rows;
    let mut out = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        let rd = split_index(r, &dims);
        for c in 0..n {
            let cd = split_index(c, &dims);
            let (mut r2, mut c2) = (r, c);
            for &p in &pos {
                // swap digit p between row and column index
                r2 = r2 - rd[p] * strides[p] + cd[p] * strides[p];
                c2 = c2 - cd[p] * strides[p] + rd[p] * strides[p];
            }
            out[(r2, c2)] = m[(r, c)];
        }
    }
    Ok(out)
}

/// Reorders the tensor factors of `m` to `order` (which must be a
/// permutation of the layout's labels).
pub fn permute(m: &ComplexMatrix, layout: &TensorLayout, order: &[&str]) -> Result<(ComplexMatrix, TensorLayout)> {
    layout.check_square(m)?;
    if order.len() != layout.len() {
        return Err(Error::Layout(format!("permutation {:?} does not cover layout {}", order, layout)));
    }
    let target = layout.select(order)?;
    let src_pos: Vec<usize> = order.iter().map(|l| layout.position(l)).collect::<Result<_>>()?;
    let src_strides = layout.strides();
    let tdims = target.dims();
    let n = m.rows;
    let map: Vec<usize> =
        (0..n).map(|i| split_index(i, &tdims).iter().zip(&src_pos).map(|(&d, &p)| d * src_strides[p]).sum()).collect();
    let out = ComplexMatrix::from_fn(n, n, |r, c| m[(map[r], map[c])]);
    Ok((out, target))
}

/// Lifts `op`, acting on `targets` (in that order), to the full space
/// described by `layout`, with identity on all other factors.
pub fn embed(op: &ComplexMatrix, layout: &TensorLayout, targets: &[&str]) -> Result<ComplexMatrix> {
    let tdim = layout.dim_of_all(targets)?;
    if !op.is_square() || op.rows != tdim {
        return Err(Error::Dimension(format!(
            "operator of dimension {}x{} cannot act on {:?} (dimension {tdim})",
            op.rows, op.cols, targets
        )));
    }
    let rest: Vec<&str> = layout.labels().into_iter().filter(|l| !targets.contains(l)).collect();
    let rest_dim = layout.dim_of_all(&rest)?;
    let full = kron(op, &ComplexMatrix::identity(rest_dim));
    let mut order: Vec<&str> = targets.to_vec();
    order.extend(rest.iter().copied());
    let staged = layout.select(&order)?;
    let labels = layout.labels();
    let (out, _) = permute(&full, &staged, &labels)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition (cyclic complex Jacobi)

#[derive(Debug, Clone)]
pub struct HermEig {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermEig {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.col(k)
    }

    /// Rebuilds `V diag(values) V^dagger`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = ComplexMatrix::diag_real(&self.values);
        self.vectors.matmul(&d).matmul(&self.vectors.adjoint())
    }
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrised
/// before the iteration; inputs further than [`HERMITIAN_TOL`] from
/// Hermitian (scaled by their magnitude) are rejected.
pub fn herm_eig(m: &ComplexMatrix) -> Result<HermEig> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("eigendecomposition needs a square matrix, got {}x{}", m.rows, m.cols)));
    }
    let scale = m.max_abs().max(1.0);
    let asym = m.max_abs_diff(&m.adjoint());
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(asym));
    }
    let n = m.rows;
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let total = a.frobenius_norm();

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * total.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = a[(p, q)];
                let gabs = g.norm();
                if gabs <= 1e-300 {
                    continue;
                }
                let phase = g / gabs; // e^{i phi}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * gabs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let ph_c = phase.conj();
                // columns: A <- A J with J = [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * ph_c * s;
                    a[(k, q)] = akp * s + akq * ph_c * c;
                }
                // rows: A <- J^dagger A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * phase * s;
                    a[(q, k)] = apk * s + aqk * phase * c;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * ph_c * s;
                    v[(k, q)] = vkp * s + vkq * ph_c * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermEig { values, vectors })
}

/// Eigenvalues only.
pub fn herm_eigvals(m: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(herm_eig(m)?.values)
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(herm_eigvals(m)?.first().copied().unwrap_or(0.0))
}

/// Spectral projectors of a Hermitian operator, grouped by (numerically)
/// equal eigenvalues. Returned in ascending eigenvalue order.
pub fn spectral_projectors(m: &ComplexMatrix, tol: f64) -> Result<Vec<(f64, ComplexMatrix)>> {
    let eig = herm_eig(m)?;
    let n = m.rows;
    let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
    for (k, &lambda) in eig.values.iter().enumerate() {
        match out.last_mut() {
            Some((val, members)) if (lambda - *val).abs() <= tol => members.push(k),
            _ => out.push((lambda, vec![k])),
        }
    }
    Ok(out
        .into_iter()
        .map(|(_, members)| {
            let mean = members.iter().map(|&k| eig.values[k]).sum::<f64>() / members.len() as f64;
            let mut p = ComplexMatrix::zeros(n, n);
            for &k in &members {
                p = &p + &ComplexMatrix::projector(&eig.vector(k));
            }
            (mean, p)
        })
        .collect())
}

fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if m.is_hermitian(1e-12 * m.max_abs().max(1.0)) {
        return Ok(herm_eigvals(m)?.into_iter().map(f64::abs).collect());
    }
    let g = m.adjoint().matmul(m);
    Ok(herm_eigvals(&g)?.into_iter().map(|x| x.max(0.0).sqrt()).collect())
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    Ok(singular_values(m)?.into_iter().sum())
}

/// Largest singular value.
pub fn op_norm(m: &ComplexMatrix) -> Result<f64> {
    Ok(singular_values(m)?.into_iter().fold(0.0, f64::max))
}

/// `Tr(a^dagger b)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    assert_eq!((a.rows, a.cols), (b.rows, b.cols), "hs_inner: shape");
    a.data.iter().zip(&b.data).map(|(x, y)| x.conj() * y).sum()
}

pub fn hs_norm(a: &ComplexMatrix) -> f64 {
    a.frobenius_norm()
}

/// `||a - b||_tr`.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    trace_norm(&(a - b))
}

// ---------------------------------------------------------------------------
// Random objects

/// Haar-random unitary via Gram-Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<C64> = (0..dim)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64::new(re, im)
            })
            .collect();
        for u in &cols {
            let proj = inner(u, &v);
            for (x, y) in v.iter_mut().zip(u) {
                *x -= proj * y;
            }
        }
        let nrm = vec_norm(&v);
        if nrm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / nrm).collect());
        }
    }
    ComplexMatrix::from_fn(dim, dim, |r, c| cols[c][r])
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    g.hermitian_part()
}

/// Random full-rank density matrix `G G^dagger / Tr`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let p = g.matmul(&g.adjoint());
    let tr = p.trace().re;
    p.scale_real(1.0 / tr).hermitian_part()
}

/// Completes a partial isometry `inputs[k] -> outputs[k]` (orthonormal
/// lists of equal length) to a unitary. The residual input and output
/// subspaces are each spanned by Gram-Schmidt over the computational basis
/// in index order and matched in that order.
pub fn complete_unitary(inputs: &[Vec<C64>], outputs: &[Vec<C64>], dim: usize) -> Result<ComplexMatrix> {
    if inputs.len() != outputs.len() || inputs.len() > dim {
        return Err(Error::Dimension("unitary completion needs equally many inputs and outputs".into()));
    }
    let extend = |seed: &[Vec<C64>]| -> Result<Vec<Vec<C64>>> {
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(dim);
        for v in seed {
            if v.len() != dim {
                return Err(Error::Dimension("completion vector has wrong length".into()));
            }
            let mut w = v.clone();
            for u in &basis {
                let proj = inner(u, &w);
                for (x, y) in w.iter_mut().zip(u) {
                    *x -= proj * y;
                }
            }
            if (vec_norm(&w) - 1.0).abs() > 1e-9 {
                return Err(Error::Invariant("completion inputs are not orthonormal".into()));
            }
            basis.push(v.clone());
        }
        for e in 0..dim {
            if basis.len() == dim {
                break;
            }
            let mut w = vec![ZERO; dim];
            w[e] = ONE;
            for u in &basis {
                let proj = inner(u, &w);
                for (x, y) in w.iter_mut().zip(u) {
                    *x -= proj * y;
                }
            }
            let nrm = vec_norm(&w);
            if nrm > 1e-9 {
                basis.push(w.into_iter().map(|x| x / nrm).collect());
            }
        }
        Ok(basis)
    };
    let ins = extend(inputs)?;
    let outs = extend(outputs)?;
    let mut u = ComplexMatrix::zeros(dim, dim);
    for (i, o) in ins.iter().zip(&outs) {
        u = &u + &ComplexMatrix::outer(o, i);
    }
    Ok(u)
}
