use serde::{Deserialize, Serialize};

use crate::channels::PauliNoiseModel;
use crate::error::{Error, Result};
use crate::qmath::{ComplexMatrix, TensorLayout};
use crate::states::{self, DensityState};
use crate::twist::{self, TwistingOp};

/// A twisting given by name or explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwistingSpec {
    Identity,
    UH,
    Explicit(TwistingOp),
}

impl TwistingSpec {
    pub fn build(&self) -> TwistingOp {
        match self {
            Self::Identity => TwistingOp::identity(2, 4),
            Self::UH => twist::build_u_h(),
            Self::Explicit(tw) => tw.clone(),
        }
    }
}

/// Shield state on `A'B'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AncillaSpec {
    /// Computational basis state such as `"00"`.
    Basis(String),
    /// One of the four shield states of the worked example.
    RhoH(usize),
    Explicit(DensityState),
}

impl AncillaSpec {
    pub fn build(&self) -> Result<DensityState> {
        let layout = TensorLayout::new([("A'", 2), ("B'", 2)])?;
        match self {
            Self::Basis(bits) => {
                let idx = usize::from_str_radix(bits, 2)
                    .ok()
                    .filter(|&i| bits.len() == 2 && i < 4)
                    .ok_or_else(|| Error::UnknownLabel(format!("ancilla basis state {bits:?}")))?;
                DensityState::pure(&states::ket(idx, 4), layout)
            }
            Self::RhoH(i) => DensityState::new(states::rho_h_ancilla(*i)?, layout),
            Self::Explicit(s) => {
                if s.dim() != 4 {
                    return Err(Error::Dimension(format!("ancilla must be 4-dimensional, got {}", s.dim())));
                }
                DensityState::new(s.matrix().clone(), layout)
            }
        }
    }
}

/// Where the per-copy states come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceConfig {
    /// Twisted copies `U (P Phi P (x) anc) U^dagger` with Pauli errors `P`
    /// drawn from `noise`.
    Pbit {
        twisting: TwistingSpec,
        ancilla: AncillaSpec,
        #[serde(default = "PauliNoiseModel::noiseless")]
        noise: PauliNoiseModel,
    },
    /// `Phi (x) Phi` with the `BB'` halves sent through the binding channel.
    BindingChannel { p: f64, kappa: f64 },
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self::BindingChannel { p: states::p_star(), kappa: 0.001 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EcConfig {
    /// Block length of the parity-check code (at most 24).
    pub block: usize,
    /// Extra syndrome bits per block above the coset-count estimate.
    pub slack_bits: usize,
    /// Target probability that a block carries more errors than the code
    /// is sized for.
    pub tail: f64,
}

impl Default for EcConfig {
    fn default() -> Self {
        Self { block: 24, slack_bits: 2, tail: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PmConfig {
    /// Channel uses assigned to each non-computational basis, per party.
    pub uses_per_basis: Option<u64>,
    /// Samples kept per `(j_a, j_b)` group.
    pub m_prime: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub n: u64,
    pub s: u32,
    pub delta: f64,
    pub seed: u64,
    pub source: SourceConfig,
    pub candidates: Vec<TwistingSpec>,
    /// Extra per-copy Pauli layer on `B`, applied after the source.
    pub eve: Option<PauliNoiseModel>,
    /// Defaults to `2^{-s}`.
    pub beta_b: Option<f64>,
    /// Sample sizes; the solver's values are used when it is feasible and
    /// these are unset, otherwise `n/20` and `n/2`.
    pub m_x: Option<u64>,
    pub m_z: Option<u64>,
    /// Fail instead of falling back when the solver is infeasible.
    pub strict_solver: bool,
    pub ec: EcConfig,
    pub pa_seed: Option<u64>,
    /// Bits removed from the final key on top of the syndrome; defaults to `2s`.
    pub hash_buffer_bits: Option<u64>,
    pub pm: PmConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n: 100_000,
            s: 40,
            delta: 0.05,
            seed: 0,
            source: SourceConfig::default(),
            candidates: vec![TwistingSpec::Identity, TwistingSpec::UH],
            eve: None,
            beta_b: None,
            m_x: None,
            m_z: None,
            strict_solver: false,
            ec: EcConfig::default(),
            pa_seed: None,
            hash_buffer_bits: None,
            pm: PmConfig::default(),
        }
    }
}

impl ProtocolConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.candidates.is_empty() {
            return Err(Error::Empty("candidate twistings".into()));
        }
        if self.ec.block == 0 || self.ec.block > 24 {
            return Err(Error::InvalidArgument(format!("EC block must be in 1..=24, got {}", self.ec.block)));
        }
        if !(self.ec.tail > 0.0 && self.ec.tail < 1.0) {
            return Err(Error::InvalidArgument("EC tail target must lie in (0, 1)".into()));
        }
        match &self.source {
            SourceConfig::Pbit { noise, .. } => noise.validate()?,
            SourceConfig::BindingChannel { p, kappa } => {
                states::check_probability("p", *p)?;
                states::check_probability("kappa", *kappa)?;
            }
        }
        if let Some(eve) = &self.eve {
            eve.validate()?;
        }
        if let Some(b) = self.beta_b {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::Probability { name: "beta_b".into(), value: b });
            }
        }
        for c in &self.candidates {
            let tw = c.build();
            if tw.d() != 2 || tw.d_prime() != 4 {
                return Err(Error::Dimension("candidate twistings must act on d = 2, d' = 4".into()));
            }
        }
        Ok(())
    }

    pub fn beta_b(&self) -> f64 {
        self.beta_b.unwrap_or_else(|| crate::bounds::default_beta_b(self.s))
    }

    pub fn hash_buffer_bits(&self) -> u64 {
        self.hash_buffer_bits.unwrap_or(2 * self.s as u64)
    }
}

/// `rho_0` on `A B A' B'` for prepare-and-measure runs, with the
/// single-use channel it is sent through.
pub(crate) fn pm_physical_model(source: &SourceConfig) -> Result<(DensityState, PmChannel)> {
    match source {
        SourceConfig::Pbit { twisting, ancilla, noise } => {
            let rho0 = states::make_pdit(&twisting.build(), &ancilla.build()?, 2)?;
            let rho0 = rho0.permute(&["A", "B", "A'", "B'"])?;
            Ok((rho0, PmChannel::Pauli(*noise)))
        }
        SourceConfig::BindingChannel { p, kappa } => {
            let phi = states::max_entangled(2)?;
            let v = crate::qmath::kron_vec(&phi, &phi);
            // Phi_AB (x) Phi_A'B' in order A B A' B'
            let rho0 = DensityState::pure(&v, TensorLayout::abab())?;
            Ok((rho0, PmChannel::Binding(crate::channels::BindingChannel::new(*p, *kappa)?)))
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum PmChannel {
    Pauli(PauliNoiseModel),
    Binding(crate::channels::BindingChannel),
}

pub(crate) fn pauli_on_b(state: &DensityState, x: bool, z: bool) -> Result<DensityState> {
    if !x && !z {
        return Ok(state.clone());
    }
    let op: ComplexMatrix = states::single_pauli(x, z);
    let u = crate::qmath::embed(&op, state.layout(), &["B"])?;
    state.conjugate_by(&u)
}
