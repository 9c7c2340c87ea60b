//! Concrete states: Bell states, the chi pair, maximally entangled states,
//! private states, the worked-example family `rho_H` and its untwisted
//! key part `sigma_AB`, plus Pauli error patterns acting on Bob's qubits.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{self, kron, kron_all, pauli_x, pauli_z, ComplexMatrix, TensorLayout, C64, ONE, ZERO};
use crate::twist::TwistingOp;

pub const STATE_HERMITIAN_TOL: f64 = 1e-10;
pub const STATE_TRACE_TOL: f64 = 1e-10;
pub const STATE_MIN_EIG: f64 = -1e-9;

/// The PPT point `sqrt(2) / (1 + sqrt(2))` of the worked example.
pub fn p_star() -> f64 {
    std::f64::consts::SQRT_2 / (1.0 + std::f64::consts::SQRT_2)
}

pub fn check_probability(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(Error::Probability { name: name.to_string(), value });
    }
    Ok(())
}

fn real_vec(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

/// Computational basis vector `|index>` in dimension `dim`.
pub fn ket(index: usize, dim: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[index] = ONE;
    v
}

/// Bell states: 0,1 = (|00> +- |11>)/sqrt2 and 2,3 = (|01> +- |10>)/sqrt2.
pub fn bell(i: usize) -> Result<Vec<C64>> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v = match i {
        0 => [h, 0.0, 0.0, h],
        1 => [h, 0.0, 0.0, -h],
        2 => [0.0, h, h, 0.0],
        3 => [0.0, h, -h, 0.0],
        _ => return Err(Error::IndexOutOfRange { index: i, limit: 4 }),
    };
    Ok(real_vec(&v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// `|chi+-> = (sqrt(2 +- sqrt2)|00> +- sqrt(2 -+ sqrt2)|11>) / 2`.
pub fn chi(sign: Sign) -> Vec<C64> {
    let r2 = std::f64::consts::SQRT_2;
    let a = (2.0 + r2).sqrt() / 2.0;
    let b = (2.0 - r2).sqrt() / 2.0;
    match sign {
        Sign::Plus => real_vec(&[a, 0.0, 0.0, b]),
        Sign::Minus => real_vec(&[b, 0.0, 0.0, -a]),
    }
}

/// `|Phi_d> = d^{-1/2} sum_i |i>|i>`.
pub fn max_entangled(d: usize) -> Result<Vec<C64>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("maximally entangled state needs d >= 2, got {d}")));
    }
    let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut v = vec![ZERO; d * d];
    for i in 0..d {
        v[i * d + i] = amp;
    }
    Ok(v)
}

/// Positive unit-trace operator on a labelled tensor product.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    matrix: ComplexMatrix,
    layout: TensorLayout,
}

impl DensityState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: ComplexMatrix, layout: TensorLayout) -> Result<Self> {
        let s = Self::from_parts(matrix, layout)?;
        s.validate()?;
        Ok(s)
    }

    /// Checks shapes only. Use for intermediate objects whose positivity is
    /// guaranteed by construction (callers can still run [`validate`]).
    ///
    /// [`validate`]: DensityState::validate
    pub fn from_parts(matrix: ComplexMatrix, layout: TensorLayout) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != layout.total_dim() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix does not fit layout {}",
                matrix.rows(),
                matrix.cols(),
                layout
            )));
        }
        Ok(Self { matrix, layout })
    }

    pub fn pure(vector: &[C64], layout: TensorLayout) -> Result<Self> {
        let n = qmath::vec_norm(vector);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("state vector has norm {n}")));
        }
        Self::new(ComplexMatrix::projector(vector), layout)
    }

    pub fn maximally_mixed(layout: TensorLayout) -> Self {
        let d = layout.total_dim();
        Self { matrix: ComplexMatrix::identity(d).scale_real(1.0 / d as f64), layout }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.matrix;
        if !m.is_hermitian(STATE_HERMITIAN_TOL) {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {:.3e})", m.max_abs_diff(&m.adjoint()))));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TRACE_TOL || tr.im.abs() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let min = qmath::min_eigenvalue(m)?;
        if min < STATE_MIN_EIG {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &TensorLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn into_parts(self) -> (ComplexMatrix, TensorLayout) {
        (self.matrix, self.layout)
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        let (m, l) = qmath::partial_trace(&self.matrix, &self.layout, keep)?;
        Ok(Self { matrix: m, layout: l })
    }

    /// Partial transpose over every listed factor.
    pub fn partial_transpose(&self, factors: &[&str]) -> Result<ComplexMatrix> {
        qmath::partial_transpose_many(&self.matrix, &self.layout, factors)
    }

    pub fn permute(&self, order: &[&str]) -> Result<Self> {
        let (m, l) = qmath::permute(&self.matrix, &self.layout, order)?;
        Ok(Self { matrix: m, layout: l })
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self { matrix: kron(&self.matrix, &other.matrix), layout: self.layout.concat(&other.layout)? })
    }

    /// `U rho U^dagger` with `U` acting on the whole space.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.rows() != self.dim() || !u.is_square() {
            return Err(Error::Dimension(format!(
                "operator of dimension {} cannot act on a state of dimension {}",
                u.rows(),
                self.dim()
            )));
        }
        Ok(Self { matrix: u.conjugate(&self.matrix), layout: self.layout.clone() })
    }

    /// `Tr(rho O)` for an operator on the full space; real part only.
    pub fn expectation(&self, obs: &ComplexMatrix) -> f64 {
        qmath::hs_inner(&obs.adjoint(), &self.matrix).re
    }

    /// Convex combination `sum w_k rho_k` over states sharing one layout.
    pub fn mixture(parts: &[(f64, &DensityState)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Empty("mixture of zero states".into()))?;
        let layout = first.1.layout.clone();
        let mut m = ComplexMatrix::zeros(layout.total_dim(), layout.total_dim());
        for (w, s) in parts {
            if s.layout != layout {
                return Err(Error::Layout(format!("cannot mix states on {} and {}", layout, s.layout)));
            }
            m = &m + &s.matrix.scale_real(*w);
        }
        Self::from_parts(m, layout)
    }

    /// Probability of each computational basis state.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct DensityJson {
    dims: IndexMap<String, usize>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for DensityState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DensityJson {
            dims: self.layout.factors().iter().map(|f| (f.label.clone(), f.dim)).collect(),
            re: self.matrix.data().iter().map(|z| z.re).collect(),
            im: self.matrix.data().iter().map(|z| z.im).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = DensityJson::deserialize(deserializer)?;
        let layout = TensorLayout::new(j.dims).map_err(D::Error::custom)?;
        if j.re.len() != j.im.len() {
            return Err(D::Error::custom("re and im arrays differ in length"));
        }
        let d = layout.total_dim();
        let data = j.re.iter().zip(&j.im).map(|(&r, &i)| C64::new(r, i)).collect();
        let m = ComplexMatrix::from_vec(d, d, data).map_err(D::Error::custom)?;
        DensityState::new(m, layout).map_err(D::Error::custom)
    }
}

/// `gamma = U (Phi_d (x) rho_anc) U^dagger`, laid out as `A B` followed by
/// the ancilla's own factors.
pub fn make_pdit(tw: &TwistingOp, rho_anc: &DensityState, d: usize) -> Result<DensityState> {
    if tw.d() != d {
        return Err(Error::Dimension(format!("twisting has key dimension {} but d = {d}", tw.d())));
    }
    if tw.d_prime() != rho_anc.dim() {
        return Err(Error::Dimension(format!(
            "twisting acts on a shield of dimension {} but the ancilla has dimension {}",
            tw.d_prime(),
            rho_anc.dim()
        )));
    }
    let key = DensityState::pure(&max_entangled(d)?, TensorLayout::new([("A", d), ("B", d)])?)?;
    let raw = key.tensor(rho_anc)?;
    raw.conjugate_by(&tw.assemble())
}

/// Shield states `rho^(i)` of the worked example on `A'B'`.
pub fn rho_h_ancilla(i: usize) -> Result<ComplexMatrix> {
    let p = |v: &[C64]| ComplexMatrix::projector(v);
    Ok(match i {
        0 => (&p(&ket(0, 4)) + &p(&bell(2)?)).scale_real(0.5),
        1 => (&p(&ket(3, 4)) + &p(&bell(3)?)).scale_real(0.5),
        2 => p(&chi(Sign::Plus)),
        3 => p(&chi(Sign::Minus)),
        _ => return Err(Error::IndexOutOfRange { index: i, limit: 4 }),
    })
}

/// `rho_H(p, kappa) = (1-kappa) sum_i q_i psi_i (x) rho^(i) + kappa I/16` on
/// `A B A' B'`, with `q_0 = q_1 = p/2` and `q_2 = q_3 = (1-p)/2`.
pub fn rho_h(p: f64, kappa: f64) -> Result<DensityState> {
    check_probability("p", p)?;
    check_probability("kappa", kappa)?;
    let q = [p / 2.0, p / 2.0, (1.0 - p) / 2.0, (1.0 - p) / 2.0];
    let mut m = ComplexMatrix::identity(16).scale_real(kappa / 16.0);
    for (i, &qi) in q.iter().enumerate() {
        let term = kron(&ComplexMatrix::projector(&bell(i)?), &rho_h_ancilla(i)?);
        m = &m + &term.scale_real((1.0 - kappa) * qi);
    }
    DensityState::new(m, TensorLayout::abab())
}

/// `sigma_AB(p, kappa) = (1-kappa)(p psi_0 + (1-p) psi_2) + kappa I/4`.
pub fn sigma_ab(p: f64, kappa: f64) -> Result<DensityState> {
    check_probability("p", p)?;
    check_probability("kappa", kappa)?;
    let m = &(&ComplexMatrix::projector(&bell(0)?).scale_real(p)
        + &ComplexMatrix::projector(&bell(2)?).scale_real(1.0 - p))
        .scale_real(1.0 - kappa)
        + &ComplexMatrix::identity(4).scale_real(kappa / 4.0);
    DensityState::new(m, TensorLayout::new([("A", 2), ("B", 2)])?)
}

/// X- and Z-components of an n-qubit Pauli operator on Bob's side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauliPattern {
    pub x_bits: Vec<bool>,
    pub z_bits: Vec<bool>,
}

impl PauliPattern {
    pub fn new(x_bits: Vec<bool>, z_bits: Vec<bool>) -> Result<Self> {
        if x_bits.len() != z_bits.len() {
            return Err(Error::Dimension(format!(
                "x component has {} bits but z component has {}",
                x_bits.len(),
                z_bits.len()
            )));
        }
        Ok(Self { x_bits, z_bits })
    }

    pub fn zeros(n: usize) -> Self {
        Self { x_bits: vec![false; n], z_bits: vec![false; n] }
    }

    pub fn single(x: bool, z: bool) -> Self {
        Self { x_bits: vec![x], z_bits: vec![z] }
    }

    pub fn len(&self) -> usize {
        self.x_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_bits.is_empty()
    }

    pub fn weight_x(&self) -> usize {
        self.x_bits.iter().filter(|&&b| b).count()
    }

    pub fn weight_z(&self) -> usize {
        self.z_bits.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, i: usize) -> (bool, bool) {
        (self.x_bits[i], self.z_bits[i])
    }

    /// `sigma_x^x sigma_z^z` for copy `i`.
    pub fn operator(&self, i: usize) -> ComplexMatrix {
        single_pauli(self.x_bits[i], self.z_bits[i])
    }
}

/// `sigma_x^x sigma_z^z`.
pub fn single_pauli(x: bool, z: bool) -> ComplexMatrix {
    match (x, z) {
        (false, false) => ComplexMatrix::identity(2),
        (true, false) => pauli_x(),
        (false, true) => pauli_z(),
        (true, true) => pauli_x().matmul(&pauli_z()),
    }
}

/// Conjugates Bob's key qubits (named by `bob`, one per pattern entry) by
/// the pattern's Pauli operators.
pub fn pauli_apply(pattern: &PauliPattern, state: &DensityState, bob: &[&str]) -> Result<DensityState> {
    if pattern.len() != bob.len() {
        return Err(Error::Dimension(format!(
            "pattern covers {} qubits but {} of Bob's qubits were named",
            pattern.len(),
            bob.len()
        )));
    }
    for l in bob {
        if state.layout().dim_of(l)? != 2 {
            return Err(Error::Dimension(format!("factor {l} is not a qubit")));
        }
    }
    let local = kron_all(&(0..pattern.len()).map(|i| pattern.operator(i)).collect::<Vec<_>>());
    let op = qmath::embed(&local, state.layout(), bob)?;
    state.conjugate_by(&op)
}
