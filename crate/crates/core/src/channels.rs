//! Pauli error channels sampled at pattern level, Kraus maps, and the
//! entanglement-binding channel of the worked example as a six-branch
//! instrument on Bob's systems `B B'`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{self, kron, pauli, pauli_x, pauli_y, pauli_z, ComplexMatrix, TensorLayout};
use crate::states::{check_probability, max_entangled, single_pauli, DensityState, PauliPattern};
use crate::twist::TwistingOp;

pub const KRAUS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Independent flips per qubit.
    #[default]
    Iid,
    /// Uniformly random pattern with exactly `floor(n * eps)` flips.
    FixedWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliNoiseModel {
    pub eps_x: f64,
    pub eps_z: f64,
    #[serde(default)]
    pub mode: NoiseMode,
}

impl PauliNoiseModel {
    pub fn new(eps_x: f64, eps_z: f64, mode: NoiseMode) -> Result<Self> {
        check_probability("eps_x", eps_x)?;
        check_probability("eps_z", eps_z)?;
        Ok(Self { eps_x, eps_z, mode })
    }

    pub fn noiseless() -> Self {
        Self { eps_x: 0.0, eps_z: 0.0, mode: NoiseMode::Iid }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("eps_x", self.eps_x)?;
        check_probability("eps_z", self.eps_z)
    }

    pub fn is_noiseless(&self) -> bool {
        self.eps_x == 0.0 && self.eps_z == 0.0
    }
}

fn fixed_weight_bits<R: Rng + ?Sized>(n: usize, eps: f64, rng: &mut R) -> Vec<bool> {
    let w = ((n as f64) * eps).floor() as usize;
    let mut bits = vec![false; n];
    for i in index::sample(rng, n, w.min(n)) {
        bits[i] = true;
    }
    bits
}

/// Draws one element of the attack class for `n` copies.
pub fn sample_pattern<R: Rng + ?Sized>(model: &PauliNoiseModel, n: usize, rng: &mut R) -> PauliPattern {
    match model.mode {
        NoiseMode::Iid => {
            let mut x = Vec::with_capacity(n);
            let mut z = Vec::with_capacity(n);
            for _ in 0..n {
                x.push(rng.random_bool(model.eps_x));
                z.push(rng.random_bool(model.eps_z));
            }
            PauliPattern { x_bits: x, z_bits: z }
        }
        NoiseMode::FixedWeight => {
            let x = fixed_weight_bits(n, model.eps_x, rng);
            let z = fixed_weight_bits(n, model.eps_z, rng);
            PauliPattern { x_bits: x, z_bits: z }
        }
    }
}

/// `U (P Phi P^dagger (x) anc) U^dagger` for one copy, with `P` on `B`.
pub fn twisted_copy_state(tw: &TwistingOp, anc: &DensityState, x: bool, z: bool) -> Result<DensityState> {
    if tw.d() != 2 {
        return Err(Error::InvalidArgument("per-copy Pauli errors need a qubit key".into()));
    }
    if anc.dim() != tw.d_prime() {
        return Err(Error::Dimension(format!(
            "ancilla dimension {} does not match shield dimension {}",
            anc.dim(),
            tw.d_prime()
        )));
    }
    let phi = ComplexMatrix::projector(&max_entangled(2)?);
    let p = kron(&ComplexMatrix::identity(2), &single_pauli(x, z));
    let key = DensityState::from_parts(p.conjugate(&phi), TensorLayout::new([("A", 2), ("B", 2)])?)?;
    key.tensor(anc)?.conjugate_by(&tw.assemble())
}

/// Checks `sum E^dagger E = I`.
pub fn check_kraus(kraus: &[ComplexMatrix]) -> Result<()> {
    let first = kraus.first().ok_or_else(|| Error::Empty("Kraus list".into()))?;
    let d = first.cols();
    let mut acc = ComplexMatrix::zeros(d, d);
    for k in kraus {
        if k.cols() != d {
            return Err(Error::Dimension("Kraus operators differ in input dimension".into()));
        }
        acc = &acc + &k.adjoint().matmul(k);
    }
    let dev = acc.max_abs_diff(&ComplexMatrix::identity(d));
    if dev > KRAUS_TOL {
        return Err(Error::KrausIncomplete(dev));
    }
    Ok(())
}

/// `sum E rho E^dagger` with the Kraus operators acting on `targets`.
pub fn apply_kraus(state: &DensityState, kraus: &[ComplexMatrix], targets: &[&str]) -> Result<DensityState> {
    check_kraus(kraus)?;
    let n = state.dim();
    let mut out = ComplexMatrix::zeros(n, n);
    for k in kraus {
        let e = qmath::embed(k, state.layout(), targets)?;
        out = &out + &e.conjugate(state.matrix());
    }
    DensityState::from_parts(out, state.layout().clone())
}

/// Diagonal entries `(a, b)` of the binding channel's POVM.
fn povm_amplitudes() -> (f64, f64) {
    let r2 = std::f64::consts::SQRT_2;
    ((2.0 + r2).sqrt() / 2.0, (2.0 - r2).sqrt() / 2.0)
}

/// POVM elements `M0 = diag(a, b)` and `M1 = diag(b, a)` on `B'`.
pub fn povm() -> (ComplexMatrix, ComplexMatrix) {
    let (a, b) = povm_amplitudes();
    (ComplexMatrix::diag_real(&[a, b]), ComplexMatrix::diag_real(&[b, a]))
}

/// One branch of the binding instrument: a single Kraus operator on
/// `B B'` carrying the square root of its mixing weight.
#[derive(Debug, Clone)]
pub struct InstrumentBranch {
    pub label: &'static str,
    pub action: &'static str,
    pub kraus: ComplexMatrix,
}

impl InstrumentBranch {
    /// Unnormalised post-state and its probability.
    pub fn apply(&self, state: &DensityState, targets: &[&str]) -> Result<(f64, DensityState)> {
        let e = qmath::embed(&self.kraus, state.layout(), targets)?;
        let m = e.conjugate(state.matrix());
        let p = m.trace().re;
        Ok((p, DensityState::from_parts(m, state.layout().clone())?))
    }
}

/// Outcome of sampling the binding channel once.
#[derive(Debug, Clone)]
pub struct BindingSample {
    /// Branch label, or `"randomize"` for the depolarising component.
    pub branch: &'static str,
    pub state: DensityState,
}

/// Channel on `B B'` whose Choi state is `rho_H(p, kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BindingChannel {
    pub p: f64,
    pub kappa: f64,
}

impl BindingChannel {
    pub fn new(p: f64, kappa: f64) -> Result<Self> {
        check_probability("p", p)?;
        check_probability("kappa", kappa)?;
        Ok(Self { p, kappa })
    }

    /// The six branches `(1a) (1b) (2) (3) (4a) (4b)` without the `kappa`
    /// admixture. Operators are ordered `B (x) B'`.
    pub fn branches(&self) -> Vec<InstrumentBranch> {
        let p = self.p;
        let id = ComplexMatrix::identity(2);
        let e0 = ComplexMatrix::diag_real(&[1.0, 0.0]);
        let e1 = ComplexMatrix::diag_real(&[0.0, 1.0]);
        let (m0, m1) = povm();
        let s = |w: f64, m: ComplexMatrix| m.scale_real(w.sqrt());
        vec![
            InstrumentBranch {
                label: "1a",
                action: "measure B' in computational basis, outcome 0: do nothing",
                kraus: s(p / 2.0, kron(&id, &e0)),
            },
            InstrumentBranch {
                label: "1b",
                action: "measure B' in computational basis, outcome 1: apply sigma_z on B",
                kraus: s(p / 2.0, kron(&pauli_z(), &e1)),
            },
            InstrumentBranch {
                label: "2",
                action: "apply sigma_z on B and sigma_y on B'",
                kraus: s(p / 4.0, kron(&pauli_z(), &pauli_y())),
            },
            InstrumentBranch { label: "3", action: "apply sigma_x on B'", kraus: s(p / 4.0, kron(&id, &pauli_x())) },
            InstrumentBranch {
                label: "4a",
                action: "POVM on B', outcome 0: apply sigma_x on B",
                kraus: s(1.0 - p, kron(&pauli_x(), &m0)),
            },
            InstrumentBranch {
                label: "4b",
                action: "POVM on B', outcome 1: apply sigma_y on B and sigma_z on B'",
                kraus: s(1.0 - p, kron(&pauli_y(), &pauli_z().matmul(&m1))),
            },
        ]
    }

    /// Complete Kraus set: the branches scaled by `sqrt(1 - kappa)` plus the
    /// completely randomising channel on `B B'` scaled by `sqrt(kappa)`.
    pub fn kraus(&self) -> Vec<ComplexMatrix> {
        let mut out: Vec<ComplexMatrix> =
            self.branches().into_iter().map(|b| b.kraus.scale_real((1.0 - self.kappa).sqrt())).collect();
        if self.kappa > 0.0 {
            let w = self.kappa.sqrt() / 4.0;
            for i in 0..4 {
                for j in 0..4 {
                    out.push(kron(&pauli(i), &pauli(j)).scale_real(w));
                }
            }
        }
        out
    }

    /// Full mixture over all branches.
    pub fn apply(&self, state: &DensityState, targets: [&str; 2]) -> Result<DensityState> {
        apply_kraus(state, &self.kraus(), &targets)
    }

    /// Branch probabilities and normalised post-states for the `kappa = 0`
    /// part of the channel.
    pub fn branch_outcomes(&self, state: &DensityState, targets: [&str; 2]) -> Result<Vec<(f64, DensityState)>> {
        self.branches()
            .iter()
            .map(|b| {
                let (p, s) = b.apply(state, &targets)?;
                let m = if p > 0.0 { s.matrix().scale_real(1.0 / p) } else { s.matrix().clone() };
                Ok((p, DensityState::from_parts(m, state.layout().clone())?))
            })
            .collect()
    }

    /// Runs the instrument once: with probability `kappa` a uniformly random
    /// two-qubit Pauli, otherwise a branch drawn by its Born probability.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        state: &DensityState,
        targets: [&str; 2],
        rng: &mut R,
    ) -> Result<BindingSample> {
        if rng.random_bool(self.kappa) {
            let (i, j) = (rng.random_range(0..4), rng.random_range(0..4));
            let op = qmath::embed(&kron(&pauli(i), &pauli(j)), state.layout(), &targets)?;
            return Ok(BindingSample { branch: "randomize", state: state.conjugate_by(&op)? });
        }
        let outcomes = self.branch_outcomes(state, targets)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let labels = ["1a", "1b", "2", "3", "4a", "4b"];
        let last = outcomes.iter().rposition(|(p, _)| *p > 0.0).unwrap_or(0);
        for (k, (p, s)) in outcomes.into_iter().enumerate() {
            acc += p;
            if u < acc || k == last {
                return Ok(BindingSample { branch: labels[k], state: s });
            }
        }
        unreachable!("branch probabilities sum to one")
    }
}
