//! Prepare-and-measure conversion: Alice measures her half of `rho_0`
//! before sending, so each channel use carries one signal state.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{pauli_on_b, pm_physical_model, PmChannel, ProtocolConfig};
use super::transcript::{EstimationRecord, EventLog, PmReport, Transcript, SCHEMA_VERSION};
use super::{candidate_decompositions, finish, resolve_sampling, security_report};
use crate::channels::sample_pattern;
use crate::error::{Error, Result};
use crate::estimation::{self, GroupMeans};
use crate::qmath::{self, kron_vec, ComplexMatrix, C64};
use crate::states::{DensityState, PauliPattern};
use crate::twist::pauli_label;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Signal {
    /// Basis label `j_a`.
    pub basis: String,
    /// Eigenvector index `l` within the basis.
    pub index: usize,
    pub eigenvalue: f64,
    pub prob: f64,
    /// Normalised state on Bob's factors.
    pub state: DensityState,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalEnsemble {
    pub signals: Vec<Signal>,
}

impl SignalEnsemble {
    /// Largest deviation from one of the per-basis probability sums.
    pub fn normalisation_residual(&self) -> f64 {
        let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
        for s in &self.signals {
            *sums.entry(&s.basis).or_default() += s.prob;
        }
        sums.values().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// `tr_{Alice}[(|psi><psi| (x) I) rho_0]` for each vector, with its trace.
fn conditional_states(rho0: &DensityState, vectors: &[(Vec<C64>, f64)], basis: &str) -> Result<Vec<Signal>> {
    let (local, da, db) = estimation::local_order(rho0)?;
    let (_, bob) = estimation::split_parties(rho0.layout())?;
    let bob_layout = rho0.layout().select(&bob)?;
    let mut out = Vec::with_capacity(vectors.len());
    for (index, (psi, value)) in vectors.iter().enumerate() {
        if psi.len() != da {
            return Err(Error::Dimension(format!("eigenvector of length {} for Alice's dimension {da}", psi.len())));
        }
        let m = ComplexMatrix::from_fn(db, db, |b, b2| {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..da {
                for a2 in 0..da {
                    acc += psi[a].conj() * psi[a2] * local[(a * db + b, a2 * db + b2)];
                }
            }
            acc
        });
        let prob = m.trace().re.max(0.0);
        let state = if prob > 1e-15 {
            DensityState::from_parts(m.scale_real(1.0 / prob), bob_layout.clone())?
        } else {
            DensityState::maximally_mixed(bob_layout.clone())
        };
        out.push(Signal { basis: basis.to_string(), index, eigenvalue: *value, prob, state });
    }
    Ok(out)
}

/// Signal ensemble for Alice measuring the eigenbasis of `obs_a` on her
/// factors of `rho0`. Degenerate eigenspaces use whatever orthonormal
/// basis the eigensolver returns.
pub fn pm_signal_ensemble(rho0: &DensityState, obs_a: &ComplexMatrix) -> Result<SignalEnsemble> {
    let eig = qmath::herm_eig(obs_a)?;
    let vectors: Vec<_> = (0..eig.values.len()).map(|k| (eig.vector(k), eig.values[k])).collect();
    Ok(SignalEnsemble { signals: conditional_states(rho0, &vectors, "obs")? })
}

/// Signal ensemble for a product of single-qubit Paulis (digits `I X Y Z`)
/// on Alice's factors, using the product eigenbasis.
pub fn pm_signal_ensemble_local(rho0: &DensityState, digits: &[usize]) -> Result<SignalEnsemble> {
    let basis = LocalBasis::pauli(digits)?;
    let vectors: Vec<_> = basis.vectors.iter().cloned().zip(basis.values.iter().copied()).collect();
    Ok(SignalEnsemble { signals: conditional_states(rho0, &vectors, &pauli_label(digits))? })
}

/// Product eigenbasis of a normalised Pauli product.
#[derive(Debug, Clone)]
pub(crate) struct LocalBasis {
    pub vectors: Vec<Vec<C64>>,
    /// Eigenvalues of `P / sqrt(2^k)`.
    pub values: Vec<f64>,
}

impl LocalBasis {
    pub fn pauli(digits: &[usize]) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| C64::new(re, im);
        let mut vectors = vec![vec![c(1.0, 0.0)]];
        let mut values = vec![1.0];
        for &dg in digits {
            let (pair, signs): ([Vec<C64>; 2], [f64; 2]) = match dg {
                0 => ([vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]], [1.0, 1.0]),
                1 => ([vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]], [1.0, -1.0]),
                2 => ([vec![c(h, 0.0), c(0.0, h)], vec![c(h, 0.0), c(0.0, -h)]], [1.0, -1.0]),
                3 => ([vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]], [1.0, -1.0]),
                _ => return Err(Error::UnknownLabel(format!("Pauli digit {dg}"))),
            };
            let mut nv = Vec::with_capacity(vectors.len() * 2);
            let mut nval = Vec::with_capacity(vectors.len() * 2);
            for (v, val) in vectors.iter().zip(&values) {
                for k in 0..2 {
                    nv.push(kron_vec(v, &pair[k]));
                    nval.push(val * signs[k]);
                }
            }
            vectors = nv;
            values = nval;
        }
        let norm = (2f64).powi(digits.len() as i32).sqrt();
        Ok(Self { vectors, values: values.into_iter().map(|v| v / norm).collect() })
    }

    fn outcome_probs(&self, state: &ComplexMatrix) -> Vec<f64> {
        let mut p: Vec<f64> = self.vectors.iter().map(|v| qmath::inner(v, &state.apply(v)).re.max(0.0)).collect();
        let total: f64 = p.iter().sum();
        for x in &mut p {
            *x /= total;
        }
        p
    }
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// `min(ceil(sqrt(n s) log2(n) / delta), floor(n / (2t)))`.
pub fn default_uses_per_basis(n: u64, s: u32, delta: f64, t: u64) -> u64 {
    let nf = n as f64;
    let schedule = ((nf * s as f64).sqrt() * nf.log2() / delta).ceil() as u64;
    schedule.min(n / (2 * t)).max(1)
}

/// Four standard deviations below the expected matched count `k^2 / n`.
pub fn default_pm_m_prime(n: u64, k: u64) -> u64 {
    let mu = (k as f64).powi(2) / n as f64;
    (mu - 4.0 * mu.sqrt()).floor().max(1.0) as u64
}

pub fn run_pm(config: &ProtocolConfig) -> Result<Transcript> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    run_pm_with_rng(config, &mut rng)
}

/// Basis assignment: `k` random uses for every non-computational basis,
/// the rest computational (index 0).
fn assign_bases<R: Rng + ?Sized>(n: usize, t: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let mut bases = vec![0usize; n];
    let picked = estimation::sample_without_replacement(n, k * (t - 1), rng)?;
    for (c, chunk) in picked.chunks(k).enumerate() {
        for &i in chunk {
            bases[i] = c + 1;
        }
    }
    Ok(bases)
}

pub fn run_pm_with_rng<R: Rng + ?Sized>(cfg: &ProtocolConfig, rng: &mut R) -> Result<Transcript> {
    cfg.validate()?;
    let mut log = EventLog(Vec::new());
    let (m_x, m_z_cfg, solver) = resolve_sampling(cfg, &mut log)?;
    let n = cfg.n as usize;
    let decomps = candidate_decompositions(cfg)?;
    let t = decomps[0].t();
    let (rho0, channel) = pm_physical_model(&cfg.source)?;

    let k = cfg.pm.uses_per_basis.unwrap_or_else(|| default_uses_per_basis(cfg.n, cfg.s, cfg.delta, t as u64)) as usize;
    if k * (t - 1) > n {
        return Err(Error::InvalidArgument(format!("{k} uses for each of {} bases exceed n = {n}", t - 1)));
    }
    let m_prime = cfg.pm.m_prime.unwrap_or_else(|| default_pm_m_prime(cfg.n, k as u64)) as usize;
    log.push("schedule", format!("{k} uses per non-computational basis, m' = {m_prime}"));

    let bases_a: Vec<LocalBasis> = decomps[0].paulis_a.iter().map(|d| LocalBasis::pauli(d)).collect::<Result<_>>()?;
    let bases_b: Vec<LocalBasis> = decomps[0].paulis_b.iter().map(|d| LocalBasis::pauli(d)).collect::<Result<_>>()?;
    let ensembles: Vec<Vec<Signal>> = decomps[0]
        .paulis_a
        .iter()
        .map(|d| pm_signal_ensemble_local(&rho0, d).map(|e| e.signals))
        .collect::<Result<_>>()?;
    let signal_probs: Vec<Vec<f64>> = ensembles.iter().map(|e| e.iter().map(|s| s.prob).collect()).collect();

    // Alice's choices
    let alice_basis = assign_bases(n, t, k, rng)?;
    let alice_signal: Vec<usize> = alice_basis.iter().map(|&j| draw(&signal_probs[j], rng)).collect();
    log.push("prepare", format!("Alice prepared {n} signals"));

    // channel, with Eve's layer on B
    let noise = match &channel {
        PmChannel::Pauli(m) => sample_pattern(m, n, rng),
        PmChannel::Binding(_) => PauliPattern::zeros(n),
    };
    let eve = cfg.eve.as_ref().map_or_else(|| PauliPattern::zeros(n), |m| sample_pattern(m, n, rng));
    log.push("transmit", format!("{n} channel uses"));

    let bob_basis = assign_bases(n, t, k, rng)?;
    let mut cache: BTreeMap<(usize, usize, u8), ComplexMatrix> = BTreeMap::new();
    let mut bob_outcome = Vec::with_capacity(n);
    for i in 0..n {
        let (ja, l) = (alice_basis[i], alice_signal[i]);
        let (x1, z1) = noise.get(i);
        let (x2, z2) = eve.get(i);
        let err = (x1 ^ x2) as u8 | ((z1 ^ z2) as u8) << 1;
        let key = (ja, l, err);
        if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(key) {
            let sent = &ensembles[ja][l].state;
            let out = match &channel {
                PmChannel::Binding(ch) => ch.apply(sent, ["B", "B'"])?,
                PmChannel::Pauli(_) => sent.clone(),
            };
            let out = pauli_on_b(&out, err & 1 == 1, err & 2 == 2)?;
            e.insert(out.matrix().clone());
        }
        let probs = bases_b[bob_basis[i]].outcome_probs(&cache[&key]);
        bob_outcome.push(draw(&probs, rng));
    }
    log.push("measure", "Bob measured every output on arrival");
    log.push("receipt_confirmed", "Bob confirmed receipt of all signals");
    log.push("basis_reconciliation", "bases announced after receipt");

    // sifting into (j_a, j_b) groups
    let mut by_pair: Vec<Vec<usize>> = vec![Vec::new(); t * t];
    for i in 0..n {
        by_pair[alice_basis[i] * t + bob_basis[i]].push(i);
    }
    let matched_counts: Vec<u64> = by_pair.iter().map(|v| v.len() as u64).collect();
    let key_pool = std::mem::take(&mut by_pair[0]);
    log.push(
        "sifting",
        format!(
            "{} computational-basis pairs; smallest matched group {}",
            key_pool.len(),
            matched_counts[1..].iter().min().copied().unwrap_or(0)
        ),
    );

    let base = |reason: String, log: &mut EventLog| {
        log.push("abort", reason.clone());
        reason
    };
    let short_pair = by_pair.iter().enumerate().skip(1).find(|(_, v)| v.len() < m_prime).map(|(g, v)| (g, v.len()));
    let need_pool = m_x as usize + m_prime;
    let abort_reason = if let Some((g, c)) = short_pair {
        Some(base(
            format!(
                "insufficient matched samples for pair ({}, {}): {c} < m' = {m_prime}",
                pauli_label(&decomps[0].paulis_a[g / t]),
                pauli_label(&decomps[0].paulis_b[g % t])
            ),
            &mut log,
        ))
    } else if key_pool.len() < need_pool {
        Some(base(
            format!("insufficient computational-basis pairs: {} < m_x + m' = {need_pool}", key_pool.len()),
            &mut log,
        ))
    } else {
        None
    };
    let pm_report = |surplus| PmReport {
        uses_per_basis: k as u64,
        matched_counts: matched_counts.clone(),
        surplus_discarded: surplus,
    };
    if let Some(reason) = abort_reason {
        return Ok(Transcript {
            schema: SCHEMA_VERSION,
            kind: "pm".into(),
            seed: cfg.seed,
            config: cfg.clone(),
            events: log.0,
            solver,
            estimation: None,
            pm: Some(pm_report(0)),
            eps_x_hat: None,
            eps_z_hat: None,
            key_rate: None,
            net_key_rate: None,
            abort: true,
            abort_reason: Some(reason),
            key: None,
            security: security_report(cfg, m_x, m_z_cfg),
        });
    }

    // dedicated positions from the computational pool
    let mut pool = key_pool;
    pool.shuffle(rng);
    let pos_x: Vec<usize> = pool[..m_x as usize].to_vec();
    by_pair[0] = pool[m_x as usize..need_pool].to_vec();
    let mut key_positions: Vec<usize> = pool[need_pool..].to_vec();
    key_positions.sort_unstable();

    // key and bit-error outcomes come from the first qubit of each side
    let key_bits = |i: usize| {
        let a = alice_signal[i] >> 1 & 1 == 1;
        let b = bob_outcome[i] >> 1 & 1 == 1;
        (a, b)
    };
    let x_out: Vec<f64> = pos_x
        .iter()
        .map(|&i| {
            let (a, b) = key_bits(i);
            if a == b {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let eps_x = estimation::estimate_eps_x(&x_out)?;
    log.push("estimate_x", format!("eps_x = {eps_x:.6} from {} samples", x_out.len()));

    let mut outcomes = vec![Vec::with_capacity(m_prime); t * t];
    let mut positions_z = Vec::with_capacity(m_prime * t * t);
    let mut surplus = 0u64;
    for (g, members) in by_pair.iter().enumerate() {
        let chosen: Vec<usize> = if g == 0 {
            members.clone()
        } else {
            let idx = estimation::sample_without_replacement(members.len(), m_prime, rng)?;
            surplus += (members.len() - m_prime) as u64;
            idx.into_iter().map(|j| members[j]).collect()
        };
        let (ja, jb) = (g / t, g % t);
        for &i in &chosen {
            let la = bases_a[ja].values[alice_signal[i]];
            let lb = bases_b[jb].values[bob_outcome[i]];
            outcomes[g].push(la * lb);
            positions_z.push(i as u64);
        }
    }
    let means = GroupMeans::from_outcomes(t, &outcomes)?;
    let (chosen, eps_z, estimates) = estimation::optimal_untwist(&means, &decomps)?;
    log.push(
        "estimate_z",
        format!(
            "m' = {m_prime}; candidate eps_z = [{}]; chose {chosen}; {surplus} surplus pairs discarded",
            estimates.iter().map(|e| format!("{:.6}", e.eps_z_raw)).collect::<Vec<_>>().join(", ")
        ),
    );

    let (sifted_a, sifted_b): (Vec<bool>, Vec<bool>) = key_positions.iter().map(|&i| key_bits(i)).unzip();
    log.push("measure_key", format!("{} sifted bits", sifted_a.len()));
    let m_z_used = (m_prime * t * t) as u64;
    let outcome = finish(cfg, eps_x, eps_z, m_x, m_z_used, cfg.n, &sifted_a, &sifted_b, &mut log, rng)?;

    let record = EstimationRecord {
        positions_x: pos_x.iter().map(|&i| i as u64).collect(),
        positions_z,
        discarded_z: Vec::new(),
        m_x,
        m_z: m_z_used,
        m_prime: m_prime as u64,
        group_means: means,
        eps_x_hat: eps_x,
        candidates: estimates,
        chosen,
        eps_z_hat: eps_z,
    };
    Ok(Transcript {
        schema: SCHEMA_VERSION,
        kind: "pm".into(),
        seed: cfg.seed,
        config: cfg.clone(),
        events: log.0,
        solver,
        estimation: Some(record),
        pm: Some(pm_report(surplus)),
        eps_x_hat: Some(eps_x),
        eps_z_hat: Some(eps_z),
        key_rate: Some(outcome.key_rate),
        net_key_rate: Some(outcome.net_key_rate),
        abort: outcome.abort,
        abort_reason: outcome.abort_reason,
        key: outcome.key,
        security: security_report(cfg, m_x, m_z_used),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{kron, pauli, TensorLayout};

    #[test]
    fn local_basis_diagonalises() {
        for d0 in 0..4 {
            for d1 in 0..4 {
                let b = LocalBasis::pauli(&[d0, d1]).unwrap();
                let op = kron(&pauli(d0), &pauli(d1)).scale_real(0.5);
                for (v, &val) in b.vectors.iter().zip(&b.values) {
                    let w = op.apply(v);
                    for (x, y) in w.iter().zip(v) {
                        assert!((x - y * val).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn computational_basis_ensemble() {
        let phi = crate::states::max_entangled(2).unwrap();
        let rho0 = DensityState::pure(&kron_vec(&phi, &phi), TensorLayout::abab()).unwrap();
        let zz = kron(&pauli(3), &pauli(3));
        let e = pm_signal_ensemble(&rho0, &zz).unwrap();
        assert_eq!(e.signals.len(), 4);
        for s in &e.signals {
            assert!((s.prob - 0.25).abs() < 1e-12);
            let diag = s.state.diagonal();
            assert!(diag.iter().any(|&d| (d - 1.0).abs() < 1e-12));
        }
        assert!(e.normalisation_residual() < 1e-12);
    }
}
