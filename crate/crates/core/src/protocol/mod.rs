//! End-to-end protocol runs: the purification-based scheme, its
//! prepare-and-measure conversion, toy EC/PA and the worked-example report.

pub mod config;
pub mod ecpa;
pub mod example;
pub mod pm;
pub mod ppp;
pub mod transcript;

pub use config::{AncillaSpec, EcConfig, PmConfig, ProtocolConfig, SourceConfig, TwistingSpec};
pub use ecpa::{ec_pa, EcPaOutcome};
pub use example::{verify_example, ExampleCheck, ExampleReport};
pub use pm::{pm_signal_ensemble, pm_signal_ensemble_local, run_pm, run_pm_with_rng, Signal, SignalEnsemble};
pub use ppp::{run_ppp, run_ppp_with_rng};
pub use transcript::{EstimationRecord, Event, KeyReport, Transcript};

use rand::Rng;

use crate::bounds::{self, BoundParams};
use crate::error::{Error, Result};
use crate::qmath::{kron, pauli_z, ComplexMatrix};
use crate::twist::{self, ProductDecomposition};
use transcript::{bits_to_hex, EventLog, SecurityReport, SolverStatus};

/// Key dimension and shield dimension of every run.
pub(crate) const D: u64 = 2;
pub(crate) const D_PRIME: u64 = 4;

/// Resolves `m_x` and `m_z`: explicit values win, then the solver, then
/// the desk-scale defaults `n/20` and `n/2`.
pub(crate) fn resolve_sampling(cfg: &ProtocolConfig, log: &mut EventLog) -> Result<(u64, u64, SolverStatus)> {
    let solved = bounds::choose_params(cfg.s, cfg.delta, D, D_PRIME, cfg.n);
    let (feasible, detail) = match &solved {
        Ok(sol) => (
            true,
            format!(
                "m_x = {}, m_z = {}, r = {} (r bound by {}, m' bound by {})",
                sol.params.m_x, sol.params.m_z, sol.params.r, sol.binding_r, sol.binding_m_prime
            ),
        ),
        Err(e) => (false, e.to_string()),
    };
    log.push("solver", detail.clone());
    let (m_x, m_z, used) = match (cfg.m_x, cfg.m_z, &solved) {
        (Some(x), Some(z), _) => (x, z, false),
        (None, None, Ok(sol)) => (sol.params.m_x, sol.params.m_z, true),
        (mx, mz, Ok(sol)) => (mx.unwrap_or(sol.params.m_x), mz.unwrap_or(sol.params.m_z), false),
        (_, _, Err(e)) if cfg.strict_solver => return Err(e.clone()),
        (mx, mz, Err(_)) => (mx.unwrap_or(cfg.n / 20), mz.unwrap_or(cfg.n / 2), false),
    };
    if m_x == 0 || m_x + m_z > cfg.n {
        return Err(Error::InvalidArgument(format!("sample sizes m_x = {m_x}, m_z = {m_z} do not fit n = {}", cfg.n)));
    }
    log.push("sampling", format!("m_x = {m_x}, m_z = {m_z}{}", if used { " (solver)" } else { "" }));
    Ok((m_x, m_z, SolverStatus { feasible, detail, used }))
}

/// Evaluates the estimation failure bound at the sizes actually used.
pub(crate) fn security_report(cfg: &ProtocolConfig, m_x: u64, m_z: u64) -> SecurityReport {
    let t2 = (D * D * D_PRIME).pow(2) as f64;
    let r = (4 * cfg.s as u64).max((t2 * (cfg.n as f64).ln()).ceil() as u64);
    let beta_b = cfg.beta_b();
    let evaluated = BoundParams::new(cfg.n, m_x, m_z, r, cfg.delta, D, D_PRIME, cfg.s).and_then(|p| bounds::finalf(&p));
    match evaluated {
        Ok(f) => {
            let ins = bounds::insecurity(&f.total, beta_b);
            let note = if f.total.vacuous { "bound is vacuous at these sizes".to_string() } else { String::new() };
            SecurityReport { r, finalf: Some(f.total), insecurity: Some(ins), beta_b, note }
        }
        Err(e) => SecurityReport { r, finalf: None, insecurity: None, beta_b, note: e.to_string() },
    }
}

/// Decompositions of `Gamma_x` for every candidate, all over the same
/// Pauli product basis.
pub(crate) fn candidate_decompositions(cfg: &ProtocolConfig) -> Result<Vec<ProductDecomposition>> {
    let out = cfg
        .candidates
        .iter()
        .map(|c| {
            let tw = c.build();
            twist::decompose(&twist::gamma_x(&tw)?, &tw.layout()?)
        })
        .collect::<Result<Vec<_>>>()?;
    let t = out[0].t();
    if out.iter().any(|d| d.t() != t || d.paulis_a != out[0].paulis_a || d.paulis_b != out[0].paulis_b) {
        return Err(Error::Invariant("candidate decompositions use different bases".into()));
    }
    Ok(out)
}

/// `sigma_z (x) I` on a qubit plus a qubit shield.
pub(crate) fn key_observable() -> ComplexMatrix {
    kron(&pauli_z(), &ComplexMatrix::identity(2))
}

pub(crate) struct Outcome {
    pub key_rate: f64,
    pub net_key_rate: f64,
    pub abort: bool,
    pub abort_reason: Option<String>,
    pub key: Option<KeyReport>,
}

/// Abort decision followed by EC/PA on the sifted key.
#[allow(clippy::too_many_arguments)]
pub(crate) fn finish<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    eps_x: f64,
    eps_z: f64,
    m_x: u64,
    m_z: u64,
    n: u64,
    sifted_a: &[bool],
    sifted_b: &[bool],
    log: &mut EventLog,
    rng: &mut R,
) -> Result<Outcome> {
    let key_rate = bounds::key_rate(eps_x, eps_z)?;
    let net_key_rate = bounds::net_key_rate(eps_x, eps_z, m_x, m_z, n)?;
    if key_rate <= 0.0 {
        let reason = format!("key rate 1 - H({eps_x:.4}) - H({eps_z:.4}) is not positive");
        log.push("abort", reason.clone());
        return Ok(Outcome { key_rate, net_key_rate, abort: true, abort_reason: Some(reason), key: None });
    }
    log.push("decision", format!("continue with asymptotic rate {key_rate:.6}"));
    let pa_seed = cfg.pa_seed.unwrap_or_else(|| rng.random());
    let out = ec_pa(sifted_a, sifted_b, eps_x, eps_z, cfg.hash_buffer_bits(), &cfg.ec, pa_seed, rng)?;
    log.push(
        "ec",
        format!(
            "{} syndrome bits ({} per block of {}), errors {} -> {}",
            out.syndrome_bits, out.syndrome_bits_per_block, out.block, out.errors_before, out.errors_after
        ),
    );
    log.push(
        "pa",
        if out.exhausted {
            "length formula leaves no key".to_string()
        } else {
            format!("hashed {} bits to {}", out.raw_len, out.final_len)
        },
    );
    let agreement = out.agreement();
    if !agreement {
        log.push("agreement", "final keys differ");
    }
    Ok(Outcome {
        key_rate,
        net_key_rate,
        abort: false,
        abort_reason: None,
        key: Some(KeyReport {
            sifted_len: sifted_a.len(),
            sifted_errors: out.errors_before,
            sifted_a: bits_to_hex(sifted_a),
            sifted_b: bits_to_hex(sifted_b),
            syndrome_bits: out.syndrome_bits,
            syndrome_bits_per_block: out.syndrome_bits_per_block,
            leak_above_shannon: out.leak_above_shannon,
            errors_after_ec: out.errors_after,
            final_len: out.final_len,
            pa_exhausted: out.exhausted,
            final_a: bits_to_hex(&out.key_a),
            final_b: bits_to_hex(&out.key_b),
            agreement,
        }),
    })
}
