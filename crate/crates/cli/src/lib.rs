//! Command-line front end for `twistqkd`.
//!
//! Every subcommand prints JSON (CSV for `sweep`) to stdout or to `--out`;
//! logs go to stderr. Exit codes: 0 success, 1 failed check, 2 usage or
//! configuration error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use twistqkd::bounds::{self, choose_params, finalf, insecurity, BoundParams, FinalF};
use twistqkd::channels::{twisted_copy_state, NoiseMode, PauliNoiseModel};
use twistqkd::estimation::CopyFamily;
use twistqkd::protocol::example::six_state_residual;
use twistqkd::protocol::{
    pm_signal_ensemble_local, run_pm, run_ppp, verify_example, ProtocolConfig, SourceConfig, Transcript,
};
use twistqkd::qmath::{kron, kron_vec, pauli_z, ComplexMatrix, TensorLayout};
use twistqkd::states::{self, max_entangled, pauli_apply, DensityState, PauliPattern};
use twistqkd::twist::{gamma_x, pauli_label};

#[derive(Parser, Debug)]
#[command(name = "twistqkd", version, about = "Twisted-pbit QKD simulator and bound calculator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check every identity of the bound-entangled worked example.
    VerifyExample {
        /// Mixing weight; defaults to the PPT point.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        kappa: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the finite-size failure probability and insecurity.
    Bounds(BoundsArgs),
    /// Solve for sample sizes that make every bound term at most 2^-s.
    SolveParams(SolveArgs),
    /// Run sampling and estimation once and compare with exact values.
    Estimate(RunArgs),
    /// Purification-based protocol run.
    RunPpp(RunArgs),
    /// Prepare-and-measure protocol run.
    RunPm(RunArgs),
    /// Signal ensembles Alice prepares for each Pauli-pair basis.
    PmEnsemble(EnsembleArgs),
    /// Grid of purification-based runs, written as CSV.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, default_value_t = 40)]
    s: u32,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 2)]
    d: u64,
    #[arg(long, default_value_t = 4)]
    dprime: u64,
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    base: SolveArgs,
    /// Explicit bit-error sample size (skips the solver when all three
    /// of `--m-x`, `--m-z`, `--r` are given).
    #[arg(long)]
    m_x: Option<u64>,
    #[arg(long)]
    m_z: Option<u64>,
    #[arg(long)]
    r: Option<u64>,
    #[arg(long)]
    beta_b: Option<f64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<u64>,
    /// Binding-channel mixing weight (switches the source to the channel).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Top-level config override `key=value`; the value is parsed as JSON
    /// when possible.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// A single basis such as `XZ`; all nine pairs when omitted.
    #[arg(long)]
    basis: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    kappa: Vec<f64>,
    /// Eve's iid bit-flip rates.
    #[arg(long, value_delimiter = ',')]
    eve_x: Vec<f64>,
    /// Eve's iid phase-flip rates.
    #[arg(long, value_delimiter = ',')]
    eve_z: Vec<f64>,
    /// Seeds as `a..b` (half open) or a comma list.
    #[arg(long)]
    seeds: String,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Check(String),
}

impl From<twistqkd::Error> for CliError {
    fn from(e: twistqkd::Error) -> Self {
        Self::Usage(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

/// Parses `argv` (program name first) and runs the subcommand.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::VerifyExample { p, kappa, out } => cmd_verify(p.unwrap_or_else(states::p_star), kappa, out.as_deref()),
        Command::Bounds(a) => cmd_bounds(&a),
        Command::SolveParams(a) => cmd_solve(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::RunPpp(a) => cmd_run(&a, run_ppp),
        Command::RunPm(a) => cmd_run(&a, run_pm),
        Command::PmEnsemble(a) => cmd_ensemble(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Check(msg)) => {
            log::error!("check failed: {msg}");
            1
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn emit_text(text: &str, out: Option<&Path>) -> CliResult {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{}", text.trim_end()).and_then(|_| stdout.flush()) {
                // a closed pipe (e.g. `| head`) is not an error of ours
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Usage(e.to_string())),
                _ => Ok(()),
            }
        }
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    emit_text(&(text + "\n"), out)
}

fn cmd_verify(p: f64, kappa: f64, out: Option<&Path>) -> CliResult {
    let report = verify_example(p, kappa)?;
    emit(&report, out)?;
    if report.all_passed {
        Ok(())
    } else {
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(CliError::Check(format!("failed checks: {}", failed.join(", "))))
    }
}

fn dominant_term(f: &FinalF) -> &'static str {
    let names = ["eps_x sampling", "de Finetti", "Chernoff", "eps_z sampling"];
    let terms = f.terms();
    let mut best = 0;
    for (i, t) in terms.iter().enumerate() {
        if t.log2 > terms[best].log2 {
            best = i;
        }
    }
    names[best]
}

fn cmd_bounds(a: &BoundsArgs) -> CliResult {
    let b = &a.base;
    let t = b.d * b.d * b.dprime;
    let (params, solver) = match (a.m_x, a.m_z, a.r) {
        (Some(mx), Some(mz), Some(r)) => (
            BoundParams::new(b.n, mx, mz, r, b.delta, b.d, b.dprime, b.s)?,
            json!({ "used": false, "detail": "explicit sample sizes" }),
        ),
        _ => match choose_params(b.s, b.delta, b.d, b.dprime, b.n) {
            Ok(sol) => (
                sol.params,
                json!({
                    "used": true,
                    "feasible": true,
                    "binding_r": sol.binding_r,
                    "binding_m_prime": sol.binding_m_prime,
                    "all_checks_hold": sol.all_hold(),
                }),
            ),
            Err(e) => {
                let r = a.r.unwrap_or_else(|| (4 * b.s as u64).max(((t * t) as f64 * (b.n as f64).ln()).ceil() as u64));
                let p = BoundParams::new(
                    b.n,
                    a.m_x.unwrap_or(b.n / 20),
                    a.m_z.unwrap_or(b.n / 2),
                    r,
                    b.delta,
                    b.d,
                    b.dprime,
                    b.s,
                )?;
                log::warn!("solver infeasible at n = {}: {e}; using fallback sample sizes", b.n);
                (p, json!({ "used": false, "feasible": false, "detail": e.to_string() }))
            }
        },
    };
    let f = finalf(&params)?;
    let beta = a.beta_b.unwrap_or_else(|| bounds::default_beta_b(b.s));
    let ins = insecurity(&f.total, beta);
    let out = json!({
        "params": params,
        "f": f.total.value,
        "log2_f": f.total.log2,
        "insecurity": ins.value,
        "log2_insecurity": ins.log2,
        "beta_b": beta,
        "vacuous": { "f": f.total.vacuous, "insecurity": ins.vacuous },
        "in_domain": f.in_domain,
        "terms": f,
        "binding_constraint": dominant_term(&f),
        "solver": solver,
    });
    emit(&out, b.out.as_deref())
}

fn cmd_solve(a: &SolveArgs) -> CliResult {
    match choose_params(a.s, a.delta, a.d, a.dprime, a.n) {
        Ok(sol) => {
            emit(&json!({ "feasible": true, "solution": sol, "all_checks_hold": sol.all_hold() }), a.out.as_deref())?;
            if sol.all_hold() {
                Ok(())
            } else {
                Err(CliError::Check("solver output fails its own re-check".into()))
            }
        }
        Err(e) => {
            emit(&json!({ "feasible": false, "error": e.to_string() }), a.out.as_deref())?;
            Err(CliError::Check(e.to_string()))
        }
    }
}

fn parse_override(set: &str) -> Result<(String, Value), CliError> {
    let (k, v) = set.split_once('=').ok_or_else(|| CliError::Usage(format!("override {set:?} is not key=value")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Merges the config file, `--set` overrides and explicit flags. A seed
/// must come from somewhere; there is no wall-clock seeding.
fn load_config(
    path: Option<&Path>,
    sets: &[String],
    seed: Option<u64>,
    n: Option<u64>,
    channel: (Option<f64>, Option<f64>),
    require_seed: bool,
) -> Result<ProtocolConfig, CliError> {
    let mut obj: Map<String, Value> = match path {
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(CliError::Usage("config must be a JSON object".into())),
                Err(e) => return Err(CliError::Usage(format!("invalid config JSON: {e}"))),
            }
        }
        None => Map::new(),
    };
    for s in sets {
        let (k, v) = parse_override(s)?;
        obj.insert(k, v);
    }
    if let Some(s) = seed {
        obj.insert("seed".into(), json!(s));
    }
    if let Some(n) = n {
        obj.insert("n".into(), json!(n));
    }
    if require_seed && !obj.contains_key("seed") {
        return Err(CliError::Usage("a seed is required: pass --seed or set \"seed\" in the config".into()));
    }
    let mut cfg = ProtocolConfig::from_json(&Value::Object(obj).to_string())?;
    if channel.0.is_some() || channel.1.is_some() {
        let (p0, k0) = match cfg.source {
            SourceConfig::BindingChannel { p, kappa } => (p, kappa),
            SourceConfig::Pbit { .. } => (states::p_star(), 0.001),
        };
        cfg.source = SourceConfig::BindingChannel { p: channel.0.unwrap_or(p0), kappa: channel.1.unwrap_or(k0) };
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run_config(a: &RunArgs) -> Result<ProtocolConfig, CliError> {
    load_config(a.config.as_deref(), &a.sets, a.seed, a.n, (a.p, a.kappa), true)
}

fn cmd_run(a: &RunArgs, run: fn(&ProtocolConfig) -> twistqkd::Result<Transcript>) -> CliResult {
    let cfg = run_config(a)?;
    let t = run(&cfg)?;
    emit_text(&(t.to_json()? + "\n"), a.out.as_deref())?;
    if t.check_invariants() {
        Ok(())
    } else {
        Err(CliError::Check("transcript invariants violated".into()))
    }
}

/// Per-copy classes of the configured source (including Eve) with weights.
fn copy_family(cfg: &ProtocolConfig) -> Result<CopyFamily, CliError> {
    let flips = |m: &PauliNoiseModel| {
        let mut out = Vec::new();
        for (x, wx) in [(false, 1.0 - m.eps_x), (true, m.eps_x)] {
            for (z, wz) in [(false, 1.0 - m.eps_z), (true, m.eps_z)] {
                if wx * wz > 0.0 {
                    out.push((x, z, wx * wz));
                }
            }
        }
        out
    };
    let mut classes: Vec<(f64, DensityState)> = match &cfg.source {
        SourceConfig::Pbit { twisting, ancilla, noise } => {
            let (tw, anc) = (twisting.build(), ancilla.build()?);
            flips(noise)
                .into_iter()
                .map(|(x, z, w)| Ok((w, twisted_copy_state(&tw, &anc, x, z)?)))
                .collect::<twistqkd::Result<_>>()?
        }
        SourceConfig::BindingChannel { p, kappa } => vec![(1.0, states::rho_h(*p, *kappa)?)],
    };
    if let Some(eve) = &cfg.eve {
        let mut next = Vec::new();
        for (w, s) in &classes {
            for (x, z, we) in flips(eve) {
                next.push((w * we, pauli_apply(&PauliPattern::single(x, z), s, &["B"])?));
            }
        }
        classes = next;
    }
    Ok(CopyFamily { classes })
}

fn cmd_estimate(a: &RunArgs) -> CliResult {
    let cfg = run_config(a)?;
    let t = run_ppp(&cfg)?;
    let est = t.estimation.as_ref().ok_or_else(|| CliError::Check("run produced no estimation record".into()))?;
    let family = copy_family(&cfg)?;
    let zz = kron(&kron(&pauli_z(), &pauli_z()), &ComplexMatrix::identity(4));
    let exact_x = (1.0 - family.expectation(&zz)) / 2.0;
    let candidates: Vec<Value> = cfg
        .candidates
        .iter()
        .zip(&est.candidates)
        .map(|(spec, e)| {
            let gx = gamma_x(&spec.build())?;
            Ok(json!({
                "twisting": spec,
                "out_value": e.out_value,
                "eps_z_hat": e.eps_z_hat,
                "eps_z_exact": (1.0 - family.expectation(&gx)) / 2.0,
            }))
        })
        .collect::<twistqkd::Result<_>>()?;
    let out = json!({
        "seed": cfg.seed,
        "n": cfg.n,
        "m_x": est.m_x,
        "m_z": est.m_z,
        "m_prime": est.m_prime,
        "eps_x_hat": est.eps_x_hat,
        "eps_x_exact": exact_x,
        "chosen": est.chosen,
        "eps_z_hat": est.eps_z_hat,
        "candidates": candidates,
    });
    emit(&out, a.out.as_deref())
}

fn cmd_ensemble(a: &EnsembleArgs) -> CliResult {
    let cfg = load_config(a.config.as_deref(), &[], None, None, (None, None), false)?;
    let (rho0, from_pair) = match &cfg.source {
        SourceConfig::Pbit { twisting, ancilla, .. } => {
            (twisted_copy_state(&twisting.build(), &ancilla.build()?, false, false)?, false)
        }
        SourceConfig::BindingChannel { .. } => {
            let phi = max_entangled(2)?;
            (DensityState::pure(&kron_vec(&phi, &phi), TensorLayout::abab())?, true)
        }
    };
    let bases: Vec<[usize; 2]> = match &a.basis {
        Some(label) => {
            let digits: Vec<usize> = label
                .chars()
                .map(|c| match c.to_ascii_uppercase() {
                    'I' => Ok(0),
                    'X' => Ok(1),
                    'Y' => Ok(2),
                    'Z' => Ok(3),
                    _ => Err(CliError::Usage(format!("basis {label:?} must use I, X, Y, Z"))),
                })
                .collect::<Result<_, _>>()?;
            let pair: [usize; 2] =
                digits.try_into().map_err(|_| CliError::Usage(format!("basis {label:?} must name two qubits")))?;
            vec![pair]
        }
        None => (1..4).flat_map(|i| (1..4).map(move |j| [i, j])).collect(),
    };
    let mut worst: f64 = 0.0;
    let mut ensembles = Vec::new();
    for b in &bases {
        let ens = pm_signal_ensemble_local(&rho0, b)?;
        let resid = ens.normalisation_residual();
        worst = worst.max(resid);
        ensembles.push(json!({
            "basis": pauli_label(b),
            "normalisation_residual": resid,
            "signals": ens.signals,
        }));
    }
    let six = if from_pair && a.basis.is_none() {
        let (r, unmatched) = six_state_residual()?;
        Some(json!({ "residual": r, "unmatched": unmatched }))
    } else {
        None
    };
    let six_ok = six.as_ref().is_none_or(|v| v["residual"].as_f64().unwrap_or(1.0) <= 1e-12 && v["unmatched"] == 0);
    emit(&json!({ "ensembles": ensembles, "six_state": six }), a.out.as_deref())?;
    if worst <= 1e-12 && six_ok {
        Ok(())
    } else {
        Err(CliError::Check(format!("normalisation residual {worst:.3e} or six-state mismatch")))
    }
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse seeds {text:?}"));
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        return Ok((a..b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

#[derive(Serialize)]
struct SweepRow {
    seed: u64,
    p: f64,
    kappa: f64,
    eve_x: f64,
    eve_z: f64,
    eps_x_hat: Option<f64>,
    eps_z_hat: Option<f64>,
    rate: Option<f64>,
    net_rate: Option<f64>,
    final_len: usize,
    abort: bool,
}

fn cmd_sweep(a: &SweepArgs) -> CliResult {
    let base = load_config(a.config.as_deref(), &a.sets, Some(0), a.n, (None, None), false)?;
    let (p0, k0) = match base.source {
        SourceConfig::BindingChannel { p, kappa } => (p, kappa),
        SourceConfig::Pbit { .. } => (states::p_star(), 0.001),
    };
    let or = |v: &[f64], d: f64| if v.is_empty() { vec![d] } else { v.to_vec() };
    let seeds = parse_seeds(&a.seeds)?;
    let mut grid = Vec::new();
    for &p in &or(&a.p, p0) {
        for &kappa in &or(&a.kappa, k0) {
            for &ex in &or(&a.eve_x, 0.0) {
                for &ez in &or(&a.eve_z, 0.0) {
                    for &seed in &seeds {
                        grid.push((seed, p, kappa, ex, ez));
                    }
                }
            }
        }
    }
    let run_one = |&(seed, p, kappa, ex, ez): &(u64, f64, f64, f64, f64)| -> Result<SweepRow, CliError> {
        let eve = if ex > 0.0 || ez > 0.0 { Some(PauliNoiseModel::new(ex, ez, NoiseMode::Iid)?) } else { None };
        let cfg = ProtocolConfig { seed, source: SourceConfig::BindingChannel { p, kappa }, eve, ..base.clone() };
        cfg.validate()?;
        let t = run_ppp(&cfg)?;
        Ok(SweepRow {
            seed,
            p,
            kappa,
            eve_x: ex,
            eve_z: ez,
            eps_x_hat: t.eps_x_hat,
            eps_z_hat: t.eps_z_hat,
            rate: t.key_rate,
            net_rate: t.net_key_rate,
            final_len: t.final_key_len(),
            abort: t.abort,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    // rows keep grid order whatever the thread count
    let rows: Vec<SweepRow> = pool.install(|| grid.par_iter().map(run_one).collect::<Result<_, _>>())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    emit_text(&String::from_utf8_lossy(&bytes), a.out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_parse() {
        assert_eq!(parse_seeds("2..5").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_seeds("7, 1").unwrap(), vec![7, 1]);
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn overrides_parse_json_or_text() {
        assert_eq!(parse_override("n=10").unwrap(), ("n".into(), json!(10)));
        assert_eq!(parse_override("k=abc").unwrap(), ("k".into(), json!("abc")));
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn seed_is_mandatory_for_runs() {
        let err = load_config(None, &[], None, None, (None, None), true).unwrap_err();
        assert!(matches!(err, CliError::Usage(m) if m.contains("seed")));
        let cfg = load_config(None, &["seed=9".into()], None, Some(500), (Some(0.5), None), true).unwrap();
        assert_eq!((cfg.seed, cfg.n), (9, 500));
        assert!(matches!(cfg.source, SourceConfig::BindingChannel { p, .. } if p == 0.5));
    }

    #[test]
    fn family_weights_sum_to_one() {
        let cfg = ProtocolConfig {
            eve: Some(PauliNoiseModel::new(0.1, 0.2, NoiseMode::Iid).unwrap()),
            ..ProtocolConfig::default()
        };
        let f = copy_family(&cfg).unwrap();
        assert_eq!(f.classes.len(), 4);
        assert!((f.classes.iter().map(|c| c.0).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
