//! Purification-based run: shared per-copy states, sampled estimation,
//! key measurement and EC/PA.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{pauli_on_b, ProtocolConfig, SourceConfig};
use super::transcript::{EstimationRecord, EventLog, Transcript, SCHEMA_VERSION};
use super::{candidate_decompositions, finish, key_observable, resolve_sampling, security_report};
use crate::channels::{sample_pattern, twisted_copy_state, BindingChannel, PauliNoiseModel};
use crate::error::Result;
use crate::estimation::{self, basis_spectra, local_order, GroupMeans, GroupSampler, JointDistribution, Spectrum};
use crate::qmath::{kron_vec, TensorLayout};
use crate::states::{max_entangled, DensityState, PauliPattern};

/// Per-copy state classes indexed by `x1 | z1 << 1 | x2 << 2 | z2 << 3`,
/// where `(x1, z1)` is the source's own error and `(x2, z2)` Eve's.
struct CopyModel {
    base: Base,
    key_a: Spectrum,
    key_b: Spectrum,
    basis_a: Vec<Spectrum>,
    basis_b: Vec<Spectrum>,
    key: BTreeMap<u8, JointDistribution>,
    groups: BTreeMap<u8, GroupSampler>,
}

enum Base {
    Pbit { tw: crate::twist::TwistingOp, anc: DensityState },
    Channel(DensityState),
}

impl CopyModel {
    fn state(&self, class: u8) -> Result<DensityState> {
        let bit = |k: u8| class >> k & 1 == 1;
        let base = match &self.base {
            Base::Pbit { tw, anc } => twisted_copy_state(tw, anc, bit(0), bit(1))?,
            Base::Channel(s) => s.clone(),
        };
        pauli_on_b(&base, bit(2), bit(3))
    }

    fn key_dist(&mut self, class: u8) -> Result<&JointDistribution> {
        if !self.key.contains_key(&class) {
            let (local, _, _) = local_order(&self.state(class)?)?;
            let dist = JointDistribution::new(&local, &self.key_a, &self.key_b)?;
            self.key.insert(class, dist);
        }
        Ok(&self.key[&class])
    }

    fn sampler(&mut self, class: u8) -> Result<&GroupSampler> {
        if !self.groups.contains_key(&class) {
            let s = GroupSampler::new(&self.state(class)?, &self.basis_a, &self.basis_b)?;
            self.groups.insert(class, s);
        }
        Ok(&self.groups[&class])
    }
}

fn classes<R: Rng + ?Sized>(
    source_noise: &PauliNoiseModel,
    eve: Option<&PauliNoiseModel>,
    n: usize,
    rng: &mut R,
) -> Vec<u8> {
    let src = sample_pattern(source_noise, n, rng);
    let eve = eve.map_or_else(|| PauliPattern::zeros(n), |m| sample_pattern(m, n, rng));
    (0..n)
        .map(|i| {
            let (x1, z1) = src.get(i);
            let (x2, z2) = eve.get(i);
            x1 as u8 | (z1 as u8) << 1 | (x2 as u8) << 2 | (z2 as u8) << 3
        })
        .collect()
}

/// Runs the purification-based protocol with a generator seeded from
/// `config.seed`.
pub fn run_ppp(config: &ProtocolConfig) -> Result<Transcript> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    run_ppp_with_rng(config, &mut rng)
}

pub fn run_ppp_with_rng<R: Rng + ?Sized>(cfg: &ProtocolConfig, rng: &mut R) -> Result<Transcript> {
    cfg.validate()?;
    let mut log = EventLog(Vec::new());
    let (m_x, m_z, solver) = resolve_sampling(cfg, &mut log)?;
    let n = cfg.n as usize;

    let decomps = candidate_decompositions(cfg)?;
    let (basis_a, basis_b) = basis_spectra(&decomps[0])?;
    let t = decomps[0].t();
    let key_obs = key_observable();
    let (base, source_noise) = match &cfg.source {
        SourceConfig::Pbit { twisting, ancilla, noise } => {
            (Base::Pbit { tw: twisting.build(), anc: ancilla.build()? }, *noise)
        }
        SourceConfig::BindingChannel { p, kappa } => {
            let phi = max_entangled(2)?;
            let pair = DensityState::pure(&kron_vec(&phi, &phi), TensorLayout::abab())?;
            let state = BindingChannel::new(*p, *kappa)?.apply(&pair, ["B", "B'"])?;
            (Base::Channel(state), PauliNoiseModel::noiseless())
        }
    };
    let mut model = CopyModel {
        base,
        key_a: Spectrum::of(&key_obs)?,
        key_b: Spectrum::of(&key_obs)?,
        basis_a,
        basis_b,
        key: BTreeMap::new(),
        groups: BTreeMap::new(),
    };
    let class = classes(&source_noise, cfg.eve.as_ref(), n, rng);
    log.push("source", format!("{n} copies; {} carry an Eve error", class.iter().filter(|&&c| c >> 2 != 0).count()));

    let picked = estimation::sample_without_replacement(n, (m_x + m_z) as usize, rng)?;
    let (pos_x, pos_z) = picked.split_at(m_x as usize);
    let mut in_sample = vec![false; n];
    for &i in &picked {
        in_sample[i] = true;
    }
    let key_positions: Vec<usize> = (0..n).filter(|&i| !in_sample[i]).collect();
    log.push(
        "select",
        format!(
            "{} bit-error positions, {} phase-error positions, {} key positions",
            pos_x.len(),
            pos_z.len(),
            key_positions.len()
        ),
    );

    let mut x_out = Vec::with_capacity(pos_x.len());
    for &i in pos_x {
        let (a, b) = model.key_dist(class[i])?.sample(rng);
        x_out.push(a * b);
    }
    let eps_x = estimation::estimate_eps_x(&x_out)?;
    log.push("estimate_x", format!("eps_x = {eps_x:.6} from {} samples", x_out.len()));

    let groups = t * t;
    let m_prime = pos_z.len() / groups;
    let used = m_prime * groups;
    if used < pos_z.len() {
        log.push(
            "groups",
            format!("{} phase-error positions left over after {groups} groups of {m_prime}", pos_z.len() - used),
        );
    }
    let mut outcomes = vec![Vec::with_capacity(m_prime); groups];
    for (g, chunk) in pos_z[..used].chunks(m_prime.max(1)).enumerate().take(groups) {
        for &i in chunk {
            let v = model.sampler(class[i])?.sample(g, rng);
            outcomes[g].push(v);
        }
    }
    let means = GroupMeans::from_outcomes(t, &outcomes)?;
    let (chosen, eps_z, estimates) = estimation::optimal_untwist(&means, &decomps)?;
    log.push(
        "estimate_z",
        format!(
            "m' = {m_prime}; candidate eps_z = [{}]; chose {chosen}",
            estimates.iter().map(|e| format!("{:.6}", e.eps_z_raw)).collect::<Vec<_>>().join(", ")
        ),
    );

    let mut sifted_a = Vec::with_capacity(key_positions.len());
    let mut sifted_b = Vec::with_capacity(key_positions.len());
    for &i in &key_positions {
        let (a, b) = model.key_dist(class[i])?.sample(rng);
        sifted_a.push(a < 0.0);
        sifted_b.push(b < 0.0);
    }
    log.push("measure_key", format!("{} sifted bits", sifted_a.len()));

    let outcome = finish(cfg, eps_x, eps_z, m_x, m_z, cfg.n, &sifted_a, &sifted_b, &mut log, rng)?;
    let record = EstimationRecord {
        positions_x: pos_x.iter().map(|&i| i as u64).collect(),
        positions_z: pos_z[..used].iter().map(|&i| i as u64).collect(),
        discarded_z: pos_z[used..].iter().map(|&i| i as u64).collect(),
        m_x,
        m_z,
        m_prime: m_prime as u64,
        group_means: means,
        eps_x_hat: eps_x,
        candidates: estimates,
        chosen,
        eps_z_hat: eps_z,
    };
    Ok(Transcript {
        schema: SCHEMA_VERSION,
        kind: "ppp".into(),
        seed: cfg.seed,
        config: cfg.clone(),
        events: log.0,
        solver,
        estimation: Some(record),
        pm: None,
        eps_x_hat: Some(eps_x),
        eps_z_hat: Some(eps_z),
        key_rate: Some(outcome.key_rate),
        net_key_rate: Some(outcome.net_key_rate),
        abort: outcome.abort,
        abort_reason: outcome.abort_reason,
        key: outcome.key,
        security: security_report(cfg, m_x, m_z),
    })
}
