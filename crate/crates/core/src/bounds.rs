//! Finite-size security bounds and a parameter solver.
//!
//! Every exponential is evaluated in log space; results carry both
//! `log2(value)` and a finite `value` capped at `f64::MAX`. Bounds above one
//! are reported as vacuous rather than hidden.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bound value in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub log2: f64,
    pub value: f64,
    pub vacuous: bool,
}

impl BoundValue {
    pub fn from_log2(log2: f64) -> Self {
        let value = if log2 >= f64::MAX_EXP as f64 { f64::MAX } else { log2.exp2() };
        Self { log2, value, vacuous: log2 > 0.0 }
    }

    /// `prefactor * e^{exponent}`.
    pub fn from_exp(prefactor: f64, exponent: f64) -> Self {
        Self::from_log2(prefactor.log2() + exponent / LN_2)
    }

    /// `prefactor * 2^{exponent}`.
    pub fn from_pow2(prefactor: f64, exponent: f64) -> Self {
        Self::from_log2(prefactor.log2() + exponent)
    }

    pub fn sum(terms: &[BoundValue]) -> Self {
        let max = terms.iter().map(|t| t.log2).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Self::from_log2(max);
        }
        let s: f64 = terms.iter().map(|t| (t.log2 - max).exp2()).sum();
        Self::from_log2(max + s.log2())
    }
}

/// `-x log2 x - (1-x) log2 (1-x)`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Probability { name: "entropy argument".into(), value: x });
    }
    Ok(entropy_unchecked(x))
}

fn entropy_unchecked(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    // ln_1p keeps log2(1 - x) accurate for tiny ratios
    -x * x.log2() - (1.0 - x) * (-x).ln_1p() / LN_2
}

/// Entropy of a ratio that the bound theorems require to lie in `[0, 1/2]`.
/// Ratios above one half are evaluated at one half (entropy 1) and flagged.
fn entropy_of_ratio(x: f64) -> (f64, bool) {
    if x > 0.5 {
        (1.0, false)
    } else {
        (entropy_unchecked(x.max(0.0)), true)
    }
}

/// `f(m, delta) = 2 exp(-2 m delta^2)`.
pub fn f_lca(m: f64, delta: f64) -> BoundValue {
    BoundValue::from_exp(2.0, -2.0 * m * delta * delta)
}

/// `|Z| exp(-k eps^2 / (8 |Z|))`.
pub fn srodka_bound(k: f64, eps: f64, z_size: f64) -> BoundValue {
    BoundValue::from_exp(z_size, -k * eps * eps / (8.0 * z_size))
}

/// `2^{-n [delta^2/4 - H(r/n)] + |W| log2(n/2 + 1)}`.
pub fn chernoff_e(delta: f64, n: f64, r: f64, w_size: f64) -> Result<BoundValue> {
    if r < 0.0 || r > n / 2.0 {
        return Err(Error::InvalidArgument(format!("need 0 <= r <= n/2, got r = {r}, n = {n}")));
    }
    let h = entropy_unchecked(r / n);
    Ok(BoundValue::from_pow2(1.0, -n * (delta * delta / 4.0 - h) + w_size * (n / 2.0 + 1.0).log2()))
}

/// Which power of the dimension enters the de Finetti exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DimPower {
    /// `dim^2 ln k`, as in the finite de Finetti plus Chernoff theorem.
    #[default]
    Squared,
    /// `dim ln k`, as in the convex-hull theorem for pure symmetric states.
    Linear,
}

/// `2 exp(-k (r+1) / (2 (n+k)) + dim^{1 or 2} ln(k) / 2)`.
pub fn definetti_bound(n: f64, k: f64, r: f64, dim: f64, power: DimPower) -> BoundValue {
    let dim_term = match power {
        DimPower::Squared => dim * dim,
        DimPower::Linear => dim,
    };
    BoundValue::from_exp(2.0, -k * (r + 1.0) / (2.0 * (n + k)) + 0.5 * dim_term * k.ln())
}

/// Parameters in the notation of the three-term appendix theorem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2Params {
    /// Systems left after the `2m` test systems.
    pub n: f64,
    pub m: f64,
    pub m_prime: f64,
    pub r: f64,
    pub delta: f64,
    pub d: f64,
    pub t: f64,
    pub hs_norm_sq: f64,
}

impl Box2Params {
    /// Substitutes protocol quantities: `d -> d^2 d'`, `t -> (d^2 d')^2`,
    /// `n + 2m -> n`, `m -> m_z`, `delta -> delta/3`, `||Gamma_x||^2 = d^2 d'`.
    pub fn from_protocol(n: f64, m_z: f64, r: f64, delta: f64, d: f64, d_prime: f64) -> Self {
        let dd = d * d * d_prime;
        let t = dd * dd;
        Self { n: n - 2.0 * m_z, m: m_z, m_prime: m_z / t, r, delta: delta / 3.0, d: dd, t, hs_norm_sq: dd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2Bounds {
    pub e1: BoundValue,
    pub e2: BoundValue,
    pub e3: BoundValue,
    pub total: BoundValue,
    /// False when `r / m'` exceeds one half.
    pub in_domain: bool,
}

/// `e1 = 2 e^{-n(r+1)/(2(2m+n)) + d^2 ln(n)/2}`,
/// `e2 = (t+1) 2^{-(delta^2/(4t||S||^2) - H(r/m')) m' + d log2(m'/2+1)}`,
/// `e3 = d e^{-m delta^2 / (8 d ||S||^2)}`.
pub fn box2_bounds(p: &Box2Params) -> Result<Box2Bounds> {
    if p.delta < 0.0 || p.n <= 0.0 || p.m <= 0.0 || p.m_prime <= 0.0 {
        return Err(Error::InvalidArgument(format!("invalid box2 parameters {p:?}")));
    }
    let e1 = definetti_bound(2.0 * p.m, p.n, p.r, p.d, DimPower::Squared);
    let (h, in_domain) = entropy_of_ratio(p.r / p.m_prime);
    let e2 = BoundValue::from_pow2(
        p.t + 1.0,
        -(p.delta * p.delta / (4.0 * p.t * p.hs_norm_sq) - h) * p.m_prime + p.d * (p.m_prime / 2.0 + 1.0).log2(),
    );
    let e3 = BoundValue::from_exp(p.d, -p.m * p.delta * p.delta / (8.0 * p.d * p.hs_norm_sq));
    Ok(Box2Bounds { e1, e2, e3, total: BoundValue::sum(&[e1, e2, e3]), in_domain })
}

/// Protocol-level parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: u64,
    pub m_x: u64,
    pub m_z: u64,
    /// `m_z / t^2`.
    pub m_prime: u64,
    pub r: u64,
    pub delta: f64,
    pub d: u64,
    pub d_prime: u64,
    /// Local basis size `d^2 d'`.
    pub t: u64,
    pub s: u32,
}

impl BoundParams {
    /// Fills in `t` and `m'` from the dimensions.
    #[allow(clippy::too_many_arguments)]
    pub fn new(n: u64, m_x: u64, m_z: u64, r: u64, delta: f64, d: u64, d_prime: u64, s: u32) -> Result<Self> {
        if delta <= 0.0 {
            return Err(Error::InvalidArgument("delta must be positive".into()));
        }
        if d < 2 || d_prime < 1 {
            return Err(Error::InvalidArgument(format!("invalid dimensions d = {d}, d' = {d_prime}")));
        }
        let t = d * d * d_prime;
        Ok(Self { n, m_x, m_z, m_prime: m_z / (t * t), r, delta, d, d_prime, t, s })
    }

    fn validate(&self) -> Result<()> {
        if self.m_x + self.m_z >= self.n {
            return Err(Error::InvalidArgument(format!(
                "m_x + m_z = {} must be below n = {}",
                self.m_x + self.m_z,
                self.n
            )));
        }
        if self.m_x == 0 || self.m_z == 0 {
            return Err(Error::InvalidArgument("sample sizes must be positive".into()));
        }
        Ok(())
    }

    /// `d^4 d'^2`, the de Finetti dimension of one copy (`t^2`).
    pub fn finetti_dim(&self) -> f64 {
        (self.t * self.t) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalF {
    /// Bit-error sampling term.
    pub eps_x_term: BoundValue,
    pub definetti_term: BoundValue,
    pub chernoff_term: BoundValue,
    pub sampling_term: BoundValue,
    pub total: BoundValue,
    pub in_domain: bool,
}

impl FinalF {
    pub fn terms(&self) -> [BoundValue; 4] {
        [self.eps_x_term, self.definetti_term, self.chernoff_term, self.sampling_term]
    }
}

/// The four-term failure probability of the estimation step.
pub fn finalf(p: &BoundParams) -> Result<FinalF> {
    p.validate()?;
    let (n, mx, mz, r, dl) = (p.n as f64, p.m_x as f64, p.m_z as f64, p.r as f64, p.delta);
    let (d, dp) = (p.d as f64, p.d_prime as f64);
    let dd = d * d * dp;
    let t2 = (p.t * p.t) as f64;

    let eps_x_term = BoundValue::from_exp(2.0, -mx * dl * dl / 16.0);
    let definetti_term =
        BoundValue::from_exp(2.0, -(n - mz) * (r + 1.0) / (2.0 * n) + 0.5 * p.finetti_dim() * (n - mz).ln());
    let (h, in_domain) = entropy_of_ratio(r * t2 / mz);
    let chernoff_term = BoundValue::from_pow2(
        t2 + 1.0,
        -(dl * dl / (36.0 * t2 * dd) - h) * (mz / t2) + dd * (mz / (2.0 * t2) + 1.0).log2(),
    );
    let sampling_term = BoundValue::from_exp(2.0, -mz * dl * dl / (144.0 * dd));
    let total = BoundValue::sum(&[eps_x_term, definetti_term, chernoff_term, sampling_term]);
    Ok(FinalF { eps_x_term, definetti_term, chernoff_term, sampling_term, total, in_domain })
}

/// `sqrt(4 f + beta_b^2)`.
pub fn insecurity(f: &BoundValue, beta_b: f64) -> BoundValue {
    // log2(4f + b^2) = log2(2^{2+log2 f} + 2^{2 log2 b})
    let terms = [BoundValue::from_log2(2.0 + f.log2), BoundValue::from_log2(2.0 * beta_b.log2())];
    let inner = BoundValue::sum(&terms);
    BoundValue::from_log2(inner.log2 / 2.0)
}

/// Default `beta_b = 2^{-s}`.
pub fn default_beta_b(s: u32) -> f64 {
    (-(s as f64)).exp2()
}

/// `sqrt(t) ||L||_HS max_i ||P_i - Q_i||`.
pub fn closeaverages_bound(coeffs: &[f64], hs_norm: f64, max_dist: f64) -> Result<f64> {
    if coeffs.is_empty() {
        return Err(Error::Empty("coefficient list".into()));
    }
    Ok((coeffs.len() as f64).sqrt() * hs_norm * max_dist)
}

/// `max(0, 1 - H(eps_x) - H(eps_z))`.
pub fn key_rate(eps_x: f64, eps_z: f64) -> Result<f64> {
    Ok((1.0 - binary_entropy(eps_x)? - binary_entropy(eps_z)?).max(0.0))
}

/// `(1 - (m_x + m_z)/n) * key_rate`.
pub fn net_key_rate(eps_x: f64, eps_z: f64, m_x: u64, m_z: u64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let frac = 1.0 - (m_x + m_z) as f64 / n as f64;
    Ok((frac.max(0.0)) * key_rate(eps_x, eps_z)?)
}

/// One re-checked solver constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedParams {
    pub params: BoundParams,
    /// Constraint that fixed `r`.
    pub binding_r: String,
    /// Constraint that fixed `m'`.
    pub binding_m_prime: String,
    pub checks: Vec<ConstraintCheck>,
    pub finalf: FinalF,
}

impl SolvedParams {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

struct Dims {
    dd: f64,
    t: f64,
    t2: f64,
    s: f64,
    delta: f64,
}

impl Dims {
    fn c72(&self) -> f64 {
        self.delta * self.delta / (72.0 * self.t2 * self.dd)
    }

    fn m_prime_constraints(&self, r: f64, mp: f64) -> [(&'static str, f64, f64); 6] {
        let (h, _) = entropy_of_ratio(r / mp);
        let target = -self.s;
        let chern = (self.t2 + 1.0).log2() - (self.delta * self.delta / (36.0 * self.t2 * self.dd) - h) * mp
            + self.dd * (mp / 2.0 + 1.0).log2();
        let sampling = 1.0 - mp * self.t2 * self.delta * self.delta / (144.0 * self.dd) / LN_2;
        [
            ("r/m' <= 1/2", r / mp, 0.5),
            ("H(r/m') <= delta^2/(72 t^2 d^2 d')", h, self.c72()),
            (
                "m' delta^2/(72 t^2 d^2 d') >= 2 d' d^2 log2(m'/2+1)",
                -(mp * self.c72()),
                -(2.0 * self.dd * (mp / 2.0 + 1.0).log2()),
            ),
            (
                "m' >= s 144 t^2 d^2 d'/delta^2 - 2 log2 t",
                -mp,
                -(self.s * 144.0 * self.t2 * self.dd / (self.delta * self.delta) - 2.0 * self.t.log2()),
            ),
            ("log2 chernoff term <= -s", chern, target),
            ("log2 sampling term <= -s", sampling, target),
        ]
    }
}

/// Smallest integer `x >= lo` with `pred(x)`, assuming `pred` is monotone.
fn min_satisfying(lo: u64, limit: u64, pred: impl Fn(u64) -> bool) -> Option<u64> {
    let mut hi = lo.max(1);
    while !pred(hi) {
        if hi >= limit {
            return None;
        }
        hi = hi.saturating_mul(2).min(limit);
    }
    let mut lo = (hi / 2).max(lo);
    if pred(lo) {
        return Some(lo);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Chooses `m_x`, `r` and `m_z = m' t^2` so that every term of the
/// estimation failure probability is at most `2^{-s}`.
pub fn choose_params(s: u32, delta: f64, d: u64, d_prime: u64, n: u64) -> Result<SolvedParams> {
    if delta <= 0.0 || delta >= 1.0 {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if s == 0 {
        return Err(Error::InvalidArgument("security parameter must be positive".into()));
    }
    let t = d * d * d_prime;
    let dims = Dims { dd: t as f64, t: t as f64, t2: (t * t) as f64, s: s as f64, delta };
    let sf = s as f64;
    let nf = n as f64;
    let m_x = (sf * 16.0 / (delta * delta)).ceil() as u64;
    if m_x >= n {
        return Err(Error::Infeasible { constraint: "m_x < n".into(), detail: format!("m_x = {m_x} for n = {n}") });
    }
    let r_4s = 4 * s as u64;
    let r_dim = (dims.t2 * nf.ln()).ceil() as u64;
    let (mut r, mut binding_r) =
        if r_4s >= r_dim { (r_4s, "r = 4s".to_string()) } else { (r_dim, "r >= d^4 d'^2 ln n".to_string()) };

    let limit = u64::MAX / (t * t).max(1) / 4;
    let mut m_prime;
    let mut binding_m_prime;
    let mut m_z;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let rf = r as f64;
        let pred = |mp: u64| dims.m_prime_constraints(rf, mp as f64).iter().all(|(_, lhs, rhs)| lhs <= rhs);
        let item4 = ((sf + 1.0) / dims.t2 * 144.0 * dims.dd / (delta * delta)).ceil() as u64;
        m_prime = min_satisfying(item4.max(1), limit, pred).ok_or_else(|| Error::Infeasible {
            constraint: "m' search".into(),
            detail: "no m' below the search limit satisfies the sampling constraints".into(),
        })?;
        // name the constraint with the largest individual threshold
        binding_m_prime = "m' >= (s+1) 144 d' d^2 / (t^2 delta^2)".to_string();
        let mut best = item4;
        for k in 0..6 {
            let single = |mp: u64| {
                let c = dims.m_prime_constraints(rf, mp as f64);
                c[k].1 <= c[k].2
            };
            if let Some(v) = min_satisfying(1, limit, single) {
                if v > best {
                    best = v;
                    binding_m_prime = dims.m_prime_constraints(rf, 1.0)[k].0.to_string();
                }
            }
        }
        m_z = m_prime * t * t;
        if m_x + m_z >= n {
            return Err(Error::Infeasible {
                constraint: "m_x + m_z < n".into(),
                detail: format!("m_x = {m_x}, m_z = {m_z} (m' = {m_prime}) but n = {n}"),
            });
        }
        let rest = (n - m_z) as f64;
        let r_df = (2.0 * nf / rest * (0.5 * dims.t2 * rest.ln() + (sf + 1.0) * LN_2) - 1.0).ceil() as u64;
        if r_df > r {
            r = r_df;
            binding_r = "de Finetti term <= 2^-s".to_string();
            if rounds > 64 {
                return Err(Error::Infeasible {
                    constraint: "r / m' fixed point".into(),
                    detail: "solver did not converge".into(),
                });
            }
            continue;
        }
        break;
    }
    if r as f64 > (n - m_z) as f64 / 2.0 {
        return Err(Error::Infeasible {
            constraint: "r <= (n - m_z)/2".into(),
            detail: format!("r = {r}, n - m_z = {}", n - m_z),
        });
    }

    let params = BoundParams::new(n, m_x, m_z, r, delta, d, d_prime, s)?;
    let f = finalf(&params)?;
    let checks = recheck(&params, &dims);
    Ok(SolvedParams { params, binding_r, binding_m_prime, checks, finalf: f })
}

fn recheck(p: &BoundParams, dims: &Dims) -> Vec<ConstraintCheck> {
    let sf = p.s as f64;
    let mut out = Vec::new();
    let mut push = |name: &str, lhs: f64, rhs: f64| {
        out.push(ConstraintCheck { name: name.to_string(), lhs, rhs, holds: lhs <= rhs })
    };
    push("m_x >= 16 s / delta^2", -(p.m_x as f64), -(sf * 16.0 / (p.delta * p.delta)));
    push("r >= 4s", -(p.r as f64), -(4.0 * sf));
    push("r >= d^4 d'^2 ln n", -(p.r as f64), -(dims.t2 * (p.n as f64).ln()));
    for (name, lhs, rhs) in dims.m_prime_constraints(p.r as f64, p.m_prime as f64) {
        push(name, lhs, rhs);
    }
    push(
        "m' >= (s+1) 144 d' d^2 / (t^2 delta^2)",
        -(p.m_prime as f64),
        -((sf + 1.0) / dims.t2 * 144.0 * dims.dd / (p.delta * p.delta)),
    );
    push("m_x + m_z < n", (p.m_x + p.m_z) as f64, p.n as f64 - 1.0);
    if let Ok(f) = finalf(p) {
        for (name, term) in [
            ("log2 eps_x term <= -s", f.eps_x_term),
            ("log2 de Finetti term <= -s", f.definetti_term),
            ("log2 Chernoff term <= -s", f.chernoff_term),
            ("log2 sampling term <= -s", f.sampling_term),
        ] {
            push(name, term.log2, -sf);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5858).unwrap() - 0.9787).abs() < 5e-5);
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn simple_bounds() {
        assert_eq!(f_lca(10.0, 0.0).value, 2.0);
        assert!(close(f_lca(100.0, 0.1).value, 2.0 * (-2.0f64).exp(), 1e-14));
        assert!(f_lca(200.0, 0.1).value < f_lca(100.0, 0.1).value);
        assert!(close(srodka_bound(800.0, 0.1, 2.0).value, 2.0 * (-0.5f64).exp(), 1e-14));
        assert!(srodka_bound(800.0, 0.1, 2.0).vacuous);
        assert_eq!(srodka_bound(5.0, 0.0, 3.0).value, 3.0);
    }

    #[test]
    fn chernoff_cases() {
        let n = 1000.0;
        let e = chernoff_e(0.0, n, 0.0, 2.0).unwrap();
        assert!(close(e.value, (n / 2.0 + 1.0).powi(2), 1e-12));
        let e = chernoff_e(0.1, n, 0.0, 2.0).unwrap();
        assert!(close(e.log2, -2.5 + 2.0 * 501f64.log2(), 1e-12));
        assert!(e.vacuous);
        assert!(chernoff_e(0.1, n, 10.0, 2.0).unwrap().log2 > e.log2);
        assert!(chernoff_e(0.1, n, 600.0, 2.0).is_err());
    }

    #[test]
    fn definetti_cases() {
        let b = definetti_bound(10.0, 1.0, 3.0, 4.0, DimPower::Squared);
        assert!(close(b.value, 2.0 * (-4.0f64 / 22.0).exp(), 1e-14));
        let lo = definetti_bound(1e4, 1e4, 160.0, 4.0, DimPower::Squared);
        let hi = definetti_bound(1e4, 1e4, 160.0, 16.0, DimPower::Squared);
        assert!(hi.log2 > lo.log2);
        let lin = definetti_bound(1e4, 1e4, 160.0, 16.0, DimPower::Linear);
        assert!(lin.log2 < hi.log2);
    }

    #[test]
    fn box2_limits() {
        let mut p = Box2Params::from_protocol(1e9, 1e6, 100.0, 0.05, 2.0, 4.0);
        p.delta = 0.0;
        let b = box2_bounds(&p).unwrap();
        assert!(close(b.e3.value, 16.0, 1e-14));
        let p = Box2Params::from_protocol(1e9, 1e6, 100.0, 0.05, 2.0, 4.0);
        let b = box2_bounds(&p).unwrap();
        let e1 = definetti_bound(2.0 * p.m, p.n, p.r, p.d, DimPower::Squared);
        assert_eq!(b.e1, e1);
    }

    #[test]
    fn box2_e2_matches_chernoff_term() {
        let (n, mz, r, dl) = (1e12, 5.12e8, 100.0, 0.05);
        let p = BoundParams::new(n as u64, 1000, mz as u64, r as u64, dl, 2, 4, 40).unwrap();
        let f = finalf(&p).unwrap();
        let b = box2_bounds(&Box2Params::from_protocol(n, mz, r, dl, 2.0, 4.0)).unwrap();
        assert!(close(b.e2.log2, f.chernoff_term.log2, 1e-12));
    }

    #[test]
    fn key_rates() {
        assert!((key_rate(0.5858, 0.0).unwrap() - 0.0213).abs() < 5e-4);
        assert_eq!(key_rate(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(key_rate(0.0, 0.0).unwrap(), 1.0);
        assert!((net_key_rate(0.0, 0.0, 10, 40, 100).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn insecurity_combines() {
        let f = BoundValue::from_log2(-40.0);
        let b = 2f64.powi(-40);
        let v = insecurity(&f, b);
        assert!(close(v.value, (4.0 * 2f64.powi(-40) + b * b).sqrt(), 1e-12));
    }

    #[test]
    fn closeaverages() {
        assert_eq!(closeaverages_bound(&[1.0], 2.0, 0.0).unwrap(), 0.0);
        assert_eq!(closeaverages_bound(&[1.0], 2.0, 0.3).unwrap(), 0.6);
        assert!(closeaverages_bound(&[], 1.0, 1.0).is_err());
    }

    #[test]
    fn solver_small_n_is_infeasible() {
        match choose_params(40, 0.05, 2, 4, 100_000) {
            Err(Error::Infeasible { constraint, .. }) => assert!(constraint.contains("n")),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn solver_large_n() {
        let sol = choose_params(40, 0.05, 2, 4, 1_000_000_000_000_000_000).unwrap();
        assert_eq!(sol.params.m_x, 256_000);
        assert!(sol.all_hold(), "{:#?}", sol.checks);
        for term in sol.finalf.terms() {
            assert!(term.log2 <= -40.0 + 1e-6);
        }
        assert!(sol.finalf.total.value <= 4.0 * 2f64.powi(-40) * (1.0 + 1e-3));
    }

    #[test]
    fn bound_value_sum() {
        let a = BoundValue::from_log2(-3.0);
        let s = BoundValue::sum(&[a, a]);
        assert!(close(s.log2, -2.0, 1e-14));
        let huge = BoundValue::from_log2(5000.0);
        assert!(huge.value.is_finite() && huge.vacuous);
    }
}
