//! Twisting operators `U = sum_ij |ij><ij| (x) U_ij`, the worked-example
//! untwisting, twisted observables and their product decomposition.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{
    self, complete_unitary, kron, kron_all, pauli, pauli_x, pauli_z, ComplexMatrix, TensorLayout, C64, ZERO,
};
use crate::states::{bell, chi, ket, DensityState, Sign};

pub const UNITARY_TOL: f64 = 1e-10;

/// Controlled unitary on `A B (shield)`, stored as `d*d` blocks in
/// row-major `(i, j)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistingOp {
    d: usize,
    d_prime: usize,
    blocks: Vec<ComplexMatrix>,
}

fn block_key(d: usize, i: usize, j: usize) -> String {
    if d <= 10 {
        format!("{i}{j}")
    } else {
        format!("{i},{j}")
    }
}

impl TwistingOp {
    pub fn new(d: usize, blocks: Vec<ComplexMatrix>) -> Result<Self> {
        if d == 0 || blocks.len() != d * d {
            return Err(Error::Dimension(format!("key dimension {d} needs {} blocks, got {}", d * d, blocks.len())));
        }
        let d_prime = blocks[0].rows();
        for (k, b) in blocks.iter().enumerate() {
            let key = block_key(d, k / d, k % d);
            if !b.is_square() || b.rows() != d_prime {
                return Err(Error::Dimension(format!(
                    "block {key} is {}x{}, expected {d_prime}x{d_prime}",
                    b.rows(),
                    b.cols()
                )));
            }
            if !b.is_unitary(UNITARY_TOL) {
                return Err(Error::NotUnitary(key));
            }
        }
        Ok(Self { d, d_prime, blocks })
    }

    /// Builds from a keyed map; every `(i, j)` key must be present.
    pub fn from_map(d: usize, mut map: BTreeMap<String, ComplexMatrix>) -> Result<Self> {
        let mut blocks = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let key = block_key(d, i, j);
                blocks.push(map.remove(&key).ok_or(Error::MissingBlock(key))?);
            }
        }
        if let Some(extra) = map.keys().next() {
            return Err(Error::InvalidArgument(format!("unexpected block key {extra}")));
        }
        Self::new(d, blocks)
    }

    pub fn identity(d: usize, d_prime: usize) -> Self {
        Self { d, d_prime, blocks: vec![ComplexMatrix::identity(d_prime); d * d] }
    }

    /// Haar-random blocks.
    pub fn random<R: Rng + ?Sized>(d: usize, d_prime: usize, rng: &mut R) -> Self {
        Self { d, d_prime, blocks: (0..d * d).map(|_| qmath::random_unitary(d_prime, rng)).collect() }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn d_prime(&self) -> usize {
        self.d_prime
    }

    pub fn block(&self, i: usize, j: usize) -> &ComplexMatrix {
        &self.blocks[i * self.d + j]
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    /// The twisting with every block replaced by its adjoint.
    pub fn inverse(&self) -> Self {
        Self { d: self.d, d_prime: self.d_prime, blocks: self.blocks.iter().map(ComplexMatrix::adjoint).collect() }
    }

    /// Full operator on `A B (shield)`, dimension `d^2 d'`.
    pub fn assemble(&self) -> ComplexMatrix {
        let dp = self.d_prime;
        let n = self.d * self.d * dp;
        let mut u = ComplexMatrix::zeros(n, n);
        for (k, b) in self.blocks.iter().enumerate() {
            for r in 0..dp {
                for c in 0..dp {
                    u[(k * dp + r, k * dp + c)] = b[(r, c)];
                }
            }
        }
        u
    }

    /// Standard layout `A B A' B'` for a qubit key with a two-qubit shield.
    pub fn layout(&self) -> Result<TensorLayout> {
        if self.d_prime == 4 {
            TensorLayout::new([("A", self.d), ("B", self.d), ("A'", 2), ("B'", 2)])
        } else {
            TensorLayout::new([("A", self.d), ("B", self.d), ("S", self.d_prime)])
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TwistJson {
    d: usize,
    blocks: BTreeMap<String, ComplexMatrix>,
}

impl Serialize for TwistingOp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut blocks = BTreeMap::new();
        for i in 0..self.d {
            for j in 0..self.d {
                blocks.insert(block_key(self.d, i, j), self.block(i, j).clone());
            }
        }
        TwistJson { d: self.d, blocks }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TwistingOp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = TwistJson::deserialize(deserializer)?;
        TwistingOp::from_map(j.d, j.blocks).map_err(D::Error::custom)
    }
}

/// `V1`: `|00> -> |00>`, `|11> -> |11>`, `psi_2 -> |01>`, `psi_3 -> |10>`.
pub fn v1() -> ComplexMatrix {
    let b2 = bell(2).expect("bell index");
    let b3 = bell(3).expect("bell index");
    &(&(&ComplexMatrix::outer(&ket(0, 4), &ket(0, 4)) + &ComplexMatrix::outer(&ket(3, 4), &ket(3, 4)))
        + &ComplexMatrix::outer(&ket(1, 4), &b2))
        + &ComplexMatrix::outer(&ket(2, 4), &b3)
}

/// `V2`: `chi+ -> |00>`, `chi- -> |11>`, completed on the orthogonal
/// complement by Gram-Schmidt over the computational basis.
pub fn v2() -> ComplexMatrix {
    complete_unitary(&[chi(Sign::Plus), chi(Sign::Minus)], &[ket(0, 4), ket(3, 4)], 4).expect("chi pair is orthonormal")
}

/// Twisting operator of the worked example. Its adjoint is the untwisting
/// map with blocks `V1` on `|00>, |11>`, `V2` on `|01>, |10>`, followed by
/// a `sigma_z` on `A'` controlled by `A = 1`.
pub fn build_u_h() -> TwistingOp {
    let (v1, v2) = (v1(), v2());
    let za = kron(&pauli_z(), &ComplexMatrix::identity(2));
    let untwist = [v1.clone(), v2.clone(), za.matmul(&v2), za.matmul(&v1)];
    TwistingOp::new(2, untwist.iter().map(ComplexMatrix::adjoint).collect()).expect("U_H blocks are unitary")
}

fn sigma_pair_times_identity(p: &ComplexMatrix, d_prime: usize) -> ComplexMatrix {
    kron(&kron(p, p), &ComplexMatrix::identity(d_prime))
}

fn require_qubit_key(tw: &TwistingOp) -> Result<()> {
    if tw.d() != 2 {
        return Err(Error::InvalidArgument(format!("twisted error observables need a qubit key, got d = {}", tw.d())));
    }
    Ok(())
}

/// `Gamma_x = U (sigma_x (x) sigma_x (x) I) U^dagger`.
pub fn gamma_x(tw: &TwistingOp) -> Result<ComplexMatrix> {
    require_qubit_key(tw)?;
    let u = tw.assemble();
    Ok(u.conjugate(&sigma_pair_times_identity(&pauli_x(), tw.d_prime())))
}

/// `Gamma_z = U (sigma_z (x) sigma_z (x) I) U^dagger`, equal to the untwisted
/// operator for every twisting.
pub fn gamma_z(tw: &TwistingOp) -> Result<ComplexMatrix> {
    require_qubit_key(tw)?;
    let u = tw.assemble();
    Ok(u.conjugate(&sigma_pair_times_identity(&pauli_z(), tw.d_prime())))
}

/// `O = sum s_{ja jb} O_ja (x) O_jb` over normalised Pauli products.
#[derive(Debug, Clone)]
pub struct ProductDecomposition {
    pub alice_labels: Vec<String>,
    pub bob_labels: Vec<String>,
    /// Pauli index digits (0 = I, 1 = X, 2 = Y, 3 = Z) per local basis element.
    pub paulis_a: Vec<Vec<usize>>,
    pub paulis_b: Vec<Vec<usize>>,
    pub basis_a: Vec<ComplexMatrix>,
    pub basis_b: Vec<ComplexMatrix>,
    pub coeffs: Vec<Vec<f64>>,
}

fn pauli_basis(qubits: usize) -> (Vec<Vec<usize>>, Vec<ComplexMatrix>) {
    let count = 4usize.pow(qubits as u32);
    let norm = 1.0 / (2f64.powi(qubits as i32)).sqrt();
    let mut digits = Vec::with_capacity(count);
    let mut ops = Vec::with_capacity(count);
    for j in 0..count {
        let mut d = vec![0; qubits];
        let mut x = j;
        for slot in d.iter_mut().rev() {
            *slot = x % 4;
            x /= 4;
        }
        let factors: Vec<ComplexMatrix> = d.iter().map(|&k| pauli(k)).collect();
        ops.push(kron_all(&factors).scale_real(norm));
        digits.push(d);
    }
    (digits, ops)
}

pub fn pauli_label(digits: &[usize]) -> String {
    digits.iter().map(|&k| ['I', 'X', 'Y', 'Z'][k]).collect()
}

impl ProductDecomposition {
    /// Number of local basis elements per side.
    pub fn t(&self) -> usize {
        self.basis_a.len()
    }

    pub fn sum_sq(&self) -> f64 {
        self.coeffs.iter().flatten().map(|s| s * s).sum()
    }

    /// Coefficients with `|s| > tol`, as `(ja, jb, s)`.
    pub fn nonzero(&self, tol: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (ja, row) in self.coeffs.iter().enumerate() {
            for (jb, &s) in row.iter().enumerate() {
                if s.abs() > tol {
                    out.push((ja, jb, s));
                }
            }
        }
        out
    }

    /// Rebuilds the observable in the order `alice (x) bob`.
    pub fn reconstruct_local_order(&self) -> ComplexMatrix {
        let n = self.basis_a[0].rows() * self.basis_b[0].rows();
        let mut m = ComplexMatrix::zeros(n, n);
        for (ja, jb, s) in self.nonzero(0.0) {
            m = &m + &kron(&self.basis_a[ja], &self.basis_b[jb]).scale_real(s);
        }
        m
    }

    /// Rebuilds the observable in the given layout's order.
    pub fn reconstruct(&self, layout: &TensorLayout) -> Result<ComplexMatrix> {
        let local = self.reconstruct_local_order();
        let mut order: Vec<&str> = self.alice_labels.iter().map(String::as_str).collect();
        order.extend(self.bob_labels.iter().map(String::as_str));
        let staged = layout.select(&order)?;
        let (m, _) = qmath::permute(&local, &staged, &layout.labels())?;
        Ok(m)
    }
}

/// Decomposes a Hermitian observable into Alice/Bob product terms. Factors
/// whose label starts with `A` belong to Alice, those starting with `B` to
/// Bob; all factors must be qubits.
pub fn decompose(obs: &ComplexMatrix, layout: &TensorLayout) -> Result<ProductDecomposition> {
    let scale = obs.max_abs().max(1.0);
    if !obs.is_hermitian(qmath::HERMITIAN_TOL * scale) {
        return Err(Error::NotHermitian(obs.max_abs_diff(&obs.adjoint())));
    }
    if obs.rows() != layout.total_dim() {
        return Err(Error::Dimension(format!("observable dimension {} does not match layout {}", obs.rows(), layout)));
    }
    let mut alice = Vec::new();
    let mut bob = Vec::new();
    for f in layout.factors() {
        if f.dim != 2 {
            return Err(Error::Dimension(format!("factor {} is not a qubit", f.label)));
        }
        match f.label.chars().next() {
            Some('A') => alice.push(f.label.as_str()),
            Some('B') => bob.push(f.label.as_str()),
            _ => return Err(Error::Layout(format!("factor {} belongs to neither Alice nor Bob", f.label))),
        }
    }
    let mut order = alice.clone();
    order.extend(bob.iter().copied());
    let (local, _) = qmath::permute(obs, layout, &order)?;
    let (paulis_a, basis_a) = pauli_basis(alice.len());
    let (paulis_b, basis_b) = pauli_basis(bob.len());
    let db = basis_b[0].rows();
    let da = basis_a[0].rows();

    // s_{ja,jb} = Tr((O_ja (x) O_jb) obs) = sum_{ab,a'b'} Oa[a',a] Ob[b',b] obs[(a,b),(a',b')]
    let mut coeffs = vec![vec![0.0; basis_b.len()]; basis_a.len()];
    for (ja, oa) in basis_a.iter().enumerate() {
        // contract Alice's indices first: R[b, b'] = sum_{a,a'} Oa[a',a] obs[(a,b),(a',b')]
        let mut reduced = ComplexMatrix::zeros(db, db);
        for a in 0..da {
            for ap in 0..da {
                let w = oa[(ap, a)];
                if w == ZERO {
                    continue;
                }
                for b in 0..db {
                    for bp in 0..db {
                        reduced[(b, bp)] += w * local[(a * db + b, ap * db + bp)];
                    }
                }
            }
        }
        for (jb, ob) in basis_b.iter().enumerate() {
            let s: C64 = qmath::hs_inner(&ob.adjoint(), &reduced);
            coeffs[ja][jb] = s.re;
        }
    }
    Ok(ProductDecomposition {
        alice_labels: alice.iter().map(|s| s.to_string()).collect(),
        bob_labels: bob.iter().map(|s| s.to_string()).collect(),
        paulis_a,
        paulis_b,
        basis_a,
        basis_b,
        coeffs,
    })
}

/// `Tr_shield(U^dagger rho U)`, returned on `A B`.
pub fn untwist_and_trace(state: &DensityState, tw: &TwistingOp) -> Result<DensityState> {
    let u = tw.assemble();
    if u.rows() != state.dim() {
        return Err(Error::Dimension(format!(
            "twisting of dimension {} cannot act on a state of dimension {}",
            u.rows(),
            state.dim()
        )));
    }
    let untwisted = state.conjugate_by(&u.adjoint())?;
    untwisted.partial_trace(&["A", "B"])
}

/// Canonical purification `sum_k sqrt(l_k) |v_k>|k>_E` with `dim E` equal
/// to the numerical rank. Returns the state vector and its layout.
pub fn purify(state: &DensityState) -> Result<(Vec<C64>, TensorLayout)> {
    if state.layout().contains("E") {
        return Err(Error::Layout("state already carries an E factor".into()));
    }
    let eig = qmath::herm_eig(state.matrix())?;
    let kept: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > 1e-13).collect();
    let r = kept.len().max(1);
    let n = state.dim();
    let mut psi = vec![ZERO; n * r];
    for (e, &k) in kept.iter().enumerate() {
        let amp = eig.values[k].sqrt();
        for i in 0..n {
            psi[i * r + e] = eig.vectors[(i, k)] * amp;
        }
    }
    let layout = state.layout().concat(&TensorLayout::new([("E", r)])?)?;
    Ok((psi, layout))
}

/// Purified state as a density operator.
pub fn purification(state: &DensityState) -> Result<DensityState> {
    let (psi, layout) = purify(state)?;
    DensityState::from_parts(ComplexMatrix::projector(&psi), layout)
}

/// Dephases `A B` in the computational basis and traces out everything but
/// `A`, `B`, `E`.
pub fn ccq_reduce(state: &DensityState) -> Result<DensityState> {
    let layout = state.layout();
    if !layout.contains("E") {
        return Err(Error::Layout("ccq reduction needs an E factor".into()));
    }
    let (m, l) = qmath::permute(state.matrix(), layout, &reorder_key_first(layout)?)?;
    let key = l.dim_of("A")? * l.dim_of("B")?;
    let rest = m.rows() / key;
    let mut deph = ComplexMatrix::zeros(m.rows(), m.rows());
    for k in 0..key {
        for r in 0..rest {
            for c in 0..rest {
                deph[(k * rest + r, k * rest + c)] = m[(k * rest + r, k * rest + c)];
            }
        }
    }
    let (out, ol) = qmath::partial_trace(&deph, &l, &["A", "B", "E"])?;
    DensityState::from_parts(out, ol)
}

fn reorder_key_first(layout: &TensorLayout) -> Result<Vec<&str>> {
    layout.position("A")?;
    layout.position("B")?;
    let mut order = vec!["A", "B"];
    order.extend(layout.labels().into_iter().filter(|l| *l != "A" && *l != "B"));
    Ok(order)
}

/// `U (x) I_E` applied to a purification vector over `A B (shield) E`.
pub fn twist_purification(psi: &[C64], tw: &TwistingOp, e_dim: usize) -> Vec<C64> {
    let u = tw.assemble();
    let n = u.rows();
    let mut out = vec![ZERO; psi.len()];
    for i in 0..n {
        for k in 0..n {
            let w = u[(i, k)];
            if w == ZERO {
                continue;
            }
            for e in 0..e_dim {
                out[i * e_dim + e] += w * psi[k * e_dim + e];
            }
        }
    }
    out
}

/// Reduced ccq state on `A B E` computed straight from a purification
/// vector ordered `A B (shield) E` without forming the full projector.
pub fn ccq_from_purification(psi: &[C64], d: usize, d_prime: usize, e_dim: usize) -> Result<DensityState> {
    if psi.len() != d * d * d_prime * e_dim {
        return Err(Error::Dimension("purification vector has the wrong length".into()));
    }
    let key = d * d;
    let n = key * e_dim;
    let mut out = ComplexMatrix::zeros(n, n);
    for k in 0..key {
        for s in 0..d_prime {
            let base = (k * d_prime + s) * e_dim;
            for e in 0..e_dim {
                let x = psi[base + e];
                if x == ZERO {
                    continue;
                }
                for f in 0..e_dim {
                    out[(k * e_dim + e, k * e_dim + f)] += x * psi[base + f].conj();
                }
            }
        }
    }
    let layout = TensorLayout::new([("A", d), ("B", d), ("E", e_dim)])?;
    DensityState::from_parts(out, layout)
}
