//! Numerical checks of the bound-entangled worked example.

use serde::{Deserialize, Serialize};

use super::pm::pm_signal_ensemble_local;
use crate::bounds::key_rate;
use crate::channels::{povm, BindingChannel};
use crate::error::Result;
use crate::qmath::{self, kron, kron_vec, pauli, ComplexMatrix, TensorLayout, C64};
use crate::states::{self, DensityState};
use crate::twist::{build_u_h, untwist_and_trace};

pub const ANALYTIC_TOL: f64 = 1e-9;
pub const RATE_TOL: f64 = 5e-4;
/// Rate at `kappa = 0` and the PPT point.
pub const REFERENCE_RATE: f64 = 0.0213;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleCheck {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub p: f64,
    pub kappa: f64,
    pub checks: Vec<ExampleCheck>,
    /// `1 - H(eps_x) - H(eps_z)` of `sigma_AB(p, kappa)`.
    pub key_rate: f64,
    pub all_passed: bool,
}

fn check(name: &str, residual: f64, tolerance: f64, note: impl Into<String>) -> ExampleCheck {
    ExampleCheck { name: name.into(), passed: residual <= tolerance, residual, tolerance, note: note.into() }
}

fn phi_phi() -> Result<DensityState> {
    let phi = states::max_entangled(2)?;
    DensityState::pure(&kron_vec(&phi, &phi), TensorLayout::abab())
}

/// Bit and phase error rates of a two-qubit key state.
pub fn key_error_rates(sigma: &DensityState) -> (f64, f64) {
    let zz = kron(&pauli(3), &pauli(3));
    let xx = kron(&pauli(1), &pauli(1));
    (((1.0 - sigma.expectation(&zz)) / 2.0).clamp(0.0, 1.0), ((1.0 - sigma.expectation(&xx)) / 2.0).clamp(0.0, 1.0))
}

/// Largest deviation of the union of the nine Pauli-pair ensembles of
/// `Phi (x) Phi` from the uniform six-state product ensemble, together with
/// the number of signals that match no six-state product.
pub fn six_state_residual() -> Result<(f64, usize)> {
    let rho0 = phi_phi()?;
    let eig: Vec<Vec<Vec<C64>>> = (1..4)
        .map(|k| {
            let e = qmath::herm_eig(&pauli(k)).expect("Pauli is Hermitian");
            vec![e.vector(0), e.vector(1)]
        })
        .collect();
    let six: Vec<ComplexMatrix> = eig.iter().flatten().map(|v| ComplexMatrix::projector(v)).collect();
    let mut acc = [[0.0f64; 6]; 6];
    let mut unmatched = 0;
    for i in 1..4 {
        for j in 1..4 {
            for s in pm_signal_ensemble_local(&rho0, &[i, j])?.signals {
                let w = s.prob / 9.0;
                let mut hit = false;
                'search: for (u, pu) in six.iter().enumerate() {
                    for (v, pv) in six.iter().enumerate() {
                        if s.state.matrix().max_abs_diff(&kron(pu, pv)) <= 1e-12 {
                            acc[u][v] += w;
                            hit = true;
                            break 'search;
                        }
                    }
                }
                if !hit && w > 0.0 {
                    unmatched += 1;
                }
            }
        }
    }
    let resid = acc.iter().flatten().map(|a| (a - 1.0 / 36.0).abs()).fold(0.0, f64::max);
    Ok((resid, unmatched))
}

/// Runs every identity of the worked example at `(p, kappa)`.
pub fn verify_example(p: f64, kappa: f64) -> Result<ExampleReport> {
    let rho = states::rho_h(p, kappa)?;
    let sigma = states::sigma_ab(p, kappa)?;
    let mut checks = Vec::new();

    let min_eig = qmath::min_eigenvalue(&rho.partial_transpose(&["B", "B'"])?)?;
    let mut ppt = check("ppt", (-min_eig).max(0.0), 1e-10, format!("min eigenvalue {min_eig:.3e}"));
    if !ppt.passed {
        ppt.note = format!("partial transpose has a negative eigenvalue {min_eig:.3e}; the state is NPT here");
    }
    checks.push(ppt);

    let untwisted = untwist_and_trace(&rho, &build_u_h())?;
    checks.push(check(
        "untwisting",
        qmath::trace_distance(untwisted.matrix(), sigma.matrix())?,
        ANALYTIC_TOL,
        "trace norm of tr_{A'B'}(U_H^dagger rho_H U_H) - sigma_AB",
    ));

    let channel = BindingChannel::new(p, kappa)?;
    let out = channel.apply(&phi_phi()?, ["B", "B'"])?;
    checks.push(check(
        "channel_mixture",
        qmath::trace_norm(&(out.matrix() - rho.matrix()))?,
        ANALYTIC_TOL,
        "trace norm of (I (x) N)(Phi (x) Phi) - rho_H",
    ));

    let (m0, m1) = povm();
    let completeness = &(&m0.adjoint().matmul(&m0) + &m1.adjoint().matmul(&m1)) - &ComplexMatrix::identity(2);
    checks.push(check("povm_completeness", completeness.max_abs(), 1e-12, "M0^dagger M0 + M1^dagger M1 - I"));

    let (ex0, ez0) = key_error_rates(&states::sigma_ab(p, 0.0)?);
    let rate0 = key_rate(ex0, ez0)?;
    checks.push(check(
        "key_rate",
        (rate0 - REFERENCE_RATE).abs(),
        RATE_TOL,
        format!("rate {rate0:.6} at kappa = 0 against {REFERENCE_RATE}"),
    ));

    let (six, unmatched) = six_state_residual()?;
    checks.push(check(
        "six_state",
        if unmatched > 0 { 1.0 } else { six },
        1e-12,
        format!("{unmatched} signals outside the six-state product set"),
    ));

    let (ex, ez) = key_error_rates(&sigma);
    let rate = key_rate(ex, ez)?;
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(ExampleReport { p, kappa, checks, key_rate: rate, all_passed })
}
