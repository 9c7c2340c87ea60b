//! Parameter estimation: local product measurements, random sampling
//! without replacement, direct bit-error estimation and the LOCC estimate
//! of the twisted phase error.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{self, kron, ComplexMatrix, TensorLayout};
use crate::states::DensityState;
use crate::twist::ProductDecomposition;

/// Eigenvalue tolerance used to merge degenerate outcomes.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Distinct eigenvalues of an observable with their spectral projectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub projectors: Vec<ComplexMatrix>,
}

impl Spectrum {
    pub fn of(obs: &ComplexMatrix) -> Result<Self> {
        let (values, projectors) = qmath::spectral_projectors(obs, DEGENERACY_TOL)?.into_iter().unzip();
        Ok(Self { values, projectors })
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].rows()
    }
}

/// Splits a layout into Alice's (`A...`) and Bob's (`B...`) factor labels.
pub fn split_parties(layout: &TensorLayout) -> Result<(Vec<&str>, Vec<&str>)> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for l in layout.labels() {
        match l.chars().next() {
            Some('A') => a.push(l),
            Some('B') => b.push(l),
            _ => return Err(Error::Layout(format!("factor {l} belongs to neither party"))),
        }
    }
    Ok((a, b))
}

/// Reorders a state so that Alice's factors come first.
pub fn local_order(state: &DensityState) -> Result<(ComplexMatrix, usize, usize)> {
    let (a, b) = split_parties(state.layout())?;
    let da = state.layout().dim_of_all(&a)?;
    let db = state.layout().dim_of_all(&b)?;
    let mut order = a;
    order.extend(b);
    let (m, _) = qmath::permute(state.matrix(), state.layout(), &order)?;
    Ok((m, da, db))
}

/// Exact distribution of a pair of local measurement outcomes.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    pub outcomes: Vec<(f64, f64)>,
    pub probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl JointDistribution {
    /// `p(l_a, l_b) = Tr(rho Pi_la (x) Pi_lb)` for a state already in
    /// Alice-first order.
    pub fn new(local_state: &ComplexMatrix, a: &Spectrum, b: &Spectrum) -> Result<Self> {
        if a.dim() * b.dim() != local_state.rows() {
            return Err(Error::Dimension(format!(
                "observables act on {}x{} but the state has dimension {}",
                a.dim(),
                b.dim(),
                local_state.rows()
            )));
        }
        let mut outcomes = Vec::new();
        let mut probs = Vec::new();
        for (la, pa) in a.values.iter().zip(&a.projectors) {
            for (lb, pb) in b.values.iter().zip(&b.projectors) {
                let p = qmath::hs_inner(&kron(pa, pb), local_state).re.max(0.0);
                outcomes.push((*la, *lb));
                probs.push(p);
            }
        }
        Ok(Self::from_probs(outcomes, probs))
    }

    fn from_probs(outcomes: Vec<(f64, f64)>, mut probs: Vec<f64>) -> Self {
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { outcomes, probs, cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u).min(self.outcomes.len() - 1);
        if self.probs[k] > 0.0 {
            return self.outcomes[k];
        }
        // rounding in the cdf can land on an impossible outcome
        let k = (k..self.probs.len())
            .find(|&j| self.probs[j] > 0.0)
            .or_else(|| self.probs.iter().rposition(|&p| p > 0.0))
            .unwrap_or(k);
        self.outcomes[k]
    }

    pub fn mean_product(&self) -> f64 {
        self.outcomes.iter().zip(&self.probs).map(|((a, b), p)| a * b * p).sum()
    }
}

/// Samples one joint outcome of local measurements of `obs_a` (on Alice's
/// factors) and `obs_b` (on Bob's factors). Degenerate eigenspaces are
/// measured as a whole, so outcomes are eigenvalues.
pub fn measure_sample<R: Rng + ?Sized>(
    state: &DensityState,
    obs_a: &ComplexMatrix,
    obs_b: &ComplexMatrix,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let (local, _, _) = local_order(state)?;
    let dist = JointDistribution::new(&local, &Spectrum::of(obs_a)?, &Spectrum::of(obs_b)?)?;
    Ok(dist.sample(rng))
}

/// Uniformly random `k`-subset of `0..n`, returned in uniformly random order.
pub fn sample_without_replacement<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::InvalidArgument(format!("cannot draw {k} of {n} items")));
    }
    let mut v = index::sample(rng, n, k).into_vec();
    v.shuffle(rng);
    Ok(v)
}

/// `(1 - mean) / 2` for a list of +-1 outcomes.
pub fn estimate_eps_x(outcomes: &[f64]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Empty("bit-error outcomes".into()));
    }
    let mean = outcomes.iter().sum::<f64>() / outcomes.len() as f64;
    Ok(((1.0 - mean) / 2.0).clamp(0.0, 1.0))
}

/// Per-group averages of the product outcomes `l_a * l_b`. Group `(ja, jb)`
/// is stored at `ja * t + jb`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub t: usize,
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GroupMeans {
    pub fn from_outcomes(t: usize, groups: &[Vec<f64>]) -> Result<Self> {
        if groups.len() != t * t {
            return Err(Error::Dimension(format!("expected {} groups, got {}", t * t, groups.len())));
        }
        let mut means = Vec::with_capacity(t * t);
        let mut counts = Vec::with_capacity(t * t);
        for g in groups {
            counts.push(g.len());
            means.push(if g.is_empty() { 0.0 } else { g.iter().sum::<f64>() / g.len() as f64 });
        }
        Ok(Self { t, means, counts })
    }

    pub fn mean(&self, ja: usize, jb: usize) -> f64 {
        self.means[ja * self.t + jb]
    }

    pub fn count(&self, ja: usize, jb: usize) -> usize {
        self.counts[ja * self.t + jb]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoccEstimate {
    /// `sum s_{ja jb} * mean_{ja jb}`.
    pub out_value: f64,
    /// `(1 - out) / 2` before clamping.
    pub eps_z_raw: f64,
    /// Clamped to `[0, 1]`.
    pub eps_z_hat: f64,
    /// Set when `|out| > 1`.
    pub out_of_range: bool,
}

pub fn estimate_eps_z_locc(means: &GroupMeans, decomp: &ProductDecomposition) -> Result<LoccEstimate> {
    if decomp.t() != means.t {
        return Err(Error::Dimension(format!(
            "decomposition has t = {} but the record has t = {}",
            decomp.t(),
            means.t
        )));
    }
    let mut out = 0.0;
    for (ja, jb, s) in decomp.nonzero(1e-12) {
        if means.count(ja, jb) == 0 {
            return Err(Error::Empty(format!("no samples in group ({ja}, {jb}) with coefficient {s:.4}")));
        }
        out += s * means.mean(ja, jb);
    }
    let raw = (1.0 - out) / 2.0;
    Ok(LoccEstimate { out_value: out, eps_z_raw: raw, eps_z_hat: raw.clamp(0.0, 1.0), out_of_range: out.abs() > 1.0 })
}

/// Picks the candidate with the smallest clamped phase-error estimate from
/// one shared set of group means. Ties go to the lowest index.
pub fn optimal_untwist(
    means: &GroupMeans,
    candidates: &[ProductDecomposition],
) -> Result<(usize, f64, Vec<LoccEstimate>)> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate twistings".into()));
    }
    let estimates = candidates.iter().map(|c| estimate_eps_z_locc(means, c)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, e) in estimates.iter().enumerate() {
        if e.eps_z_hat < estimates[best].eps_z_hat {
            best = i;
        }
    }
    Ok((best, estimates[best].eps_z_hat, estimates))
}

/// Product-measurement distributions for every `(ja, jb)` pair of a
/// decomposition basis, for one per-copy state.
#[derive(Debug, Clone)]
pub struct GroupSampler {
    pub t: usize,
    dists: Vec<JointDistribution>,
}

impl GroupSampler {
    pub fn new(state: &DensityState, basis_a: &[Spectrum], basis_b: &[Spectrum]) -> Result<Self> {
        let (local, _, _) = local_order(state)?;
        let mut dists = Vec::with_capacity(basis_a.len() * basis_b.len());
        for a in basis_a {
            for b in basis_b {
                dists.push(JointDistribution::new(&local, a, b)?);
            }
        }
        Ok(Self { t: basis_a.len(), dists })
    }

    /// Product outcome for group `g = ja * t + jb`.
    pub fn sample<R: Rng + ?Sized>(&self, g: usize, rng: &mut R) -> f64 {
        let (a, b) = self.dists[g].sample(rng);
        a * b
    }

    pub fn exact_mean(&self, g: usize) -> f64 {
        self.dists[g].mean_product()
    }
}

/// Spectra of a decomposition's local basis elements.
pub fn basis_spectra(decomp: &ProductDecomposition) -> Result<(Vec<Spectrum>, Vec<Spectrum>)> {
    let a = decomp.basis_a.iter().map(Spectrum::of).collect::<Result<_>>()?;
    let b = decomp.basis_b.iter().map(Spectrum::of).collect::<Result<_>>()?;
    Ok((a, b))
}

/// Source of per-copy states for estimation experiments: a palette of
/// state classes with sampling weights (a single class is a tensor power).
#[derive(Debug, Clone)]
pub struct CopyFamily {
    pub classes: Vec<(f64, DensityState)>,
}

impl CopyFamily {
    pub fn tensor_power(state: DensityState) -> Self {
        Self { classes: vec![(1.0, state)] }
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.classes.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, (w, _)) in self.classes.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.classes.len() - 1
    }

    /// Weighted average of `Tr(rho O)`.
    pub fn expectation(&self, obs: &ComplexMatrix) -> f64 {
        self.classes.iter().map(|(w, s)| w * s.expectation(obs)).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub trials: usize,
    pub m_z: usize,
    pub m_prime: usize,
    pub delta: f64,
    pub exceed: usize,
    pub empirical_prob: f64,
    /// Exact `Tr(Gamma rho)` averaged over the family.
    pub exact_mean: f64,
    pub locc_mean: f64,
    pub locc_var: f64,
    pub ideal_mean: f64,
    pub ideal_var: f64,
}

/// Monte Carlo estimate of `Pr(|mean_ideal - mean_locc| > delta)`, where
/// the ideal mean measures the nonproduct observable directly on `m_z`
/// copies and the LOCC mean runs the grouped product estimator on another
/// `m_z` copies of the same family.
pub fn ideal_vs_locc_experiment<R: Rng + ?Sized>(
    family: &CopyFamily,
    observable: &ComplexMatrix,
    decomp: &ProductDecomposition,
    m_z: usize,
    trials: usize,
    delta: f64,
    rng: &mut R,
) -> Result<ExperimentResult> {
    let t = decomp.t();
    let m_prime = m_z / (t * t);
    if m_prime == 0 {
        return Err(Error::InvalidArgument(format!("m_z = {m_z} leaves no samples for {} groups", t * t)));
    }
    let (sa, sb) = basis_spectra(decomp)?;
    let ideal_spec = Spectrum::of(observable)?;
    let samplers = family.classes.iter().map(|(_, s)| GroupSampler::new(s, &sa, &sb)).collect::<Result<Vec<_>>>()?;
    let ideal: Vec<JointDistribution> = family
        .classes
        .iter()
        .map(|(_, s)| {
            let p: Vec<f64> = ideal_spec.projectors.iter().map(|pr| s.expectation(pr).max(0.0)).collect();
            JointDistribution::from_probs(ideal_spec.values.iter().map(|&v| (v, 1.0)).collect(), p)
        })
        .collect();
    let terms = decomp.nonzero(1e-12);

    let mut exceed = 0;
    let (mut ls, mut lss, mut is, mut iss) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..trials {
        let mut ideal_sum = 0.0;
        for _ in 0..m_z {
            ideal_sum += ideal[family.pick(rng)].sample(rng).0;
        }
        let ideal_mean = ideal_sum / m_z as f64;
        let mut locc = 0.0;
        for &(ja, jb, s) in &terms {
            let g = ja * t + jb;
            let mut acc = 0.0;
            for _ in 0..m_prime {
                acc += samplers[family.pick(rng)].sample(g, rng);
            }
            locc += s * acc / m_prime as f64;
        }
        if (ideal_mean - locc).abs() > delta {
            exceed += 1;
        }
        ls += locc;
        lss += locc * locc;
        is += ideal_mean;
        iss += ideal_mean * ideal_mean;
    }
    let n = trials.max(1) as f64;
    Ok(ExperimentResult {
        trials,
        m_z,
        m_prime,
        delta,
        exceed,
        empirical_prob: exceed as f64 / n,
        exact_mean: family.expectation(observable),
        locc_mean: ls / n,
        locc_var: (lss / n - (ls / n).powi(2)).max(0.0),
        ideal_mean: is / n,
        ideal_var: (iss / n - (is / n).powi(2)).max(0.0),
    })
}

/// Classical sampling experiment: `population` is a fixed string over
/// `0..z_size`, its positions are permuted uniformly (a symmetric joint
/// distribution) and the first `k` form the sample. Returns, per entry of
/// `eps`, the empirical frequency of `||Q_all - Q_sample||_1 >= eps`.
pub fn sampling_deviation<R: Rng + ?Sized>(
    population: &[usize],
    z_size: usize,
    k: usize,
    eps: &[f64],
    trials: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if k == 0 || k > population.len() {
        return Err(Error::InvalidArgument(format!("sample size {k} must lie in 1..={}", population.len())));
    }
    if let Some(&z) = population.iter().find(|&&z| z >= z_size) {
        return Err(Error::IndexOutOfRange { index: z, limit: z_size });
    }
    let total = population.len() as f64;
    let mut q_all = vec![0.0; z_size];
    for &z in population {
        q_all[z] += 1.0 / total;
    }
    let mut hits = vec![0usize; eps.len()];
    for _ in 0..trials {
        let mut q = vec![0.0; z_size];
        for i in index::sample(rng, population.len(), k) {
            q[population[i]] += 1.0 / k as f64;
        }
        let dist: f64 = q.iter().zip(&q_all).map(|(a, b)| (a - b).abs()).sum();
        for (h, &e) in hits.iter_mut().zip(eps) {
            if dist >= e {
                *h += 1;
            }
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / trials.max(1) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{pauli_x, pauli_z};
    use crate::states::{bell, ket, p_star, sigma_ab};
    use crate::twist::{decompose, gamma_x, TwistingOp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ab() -> TensorLayout {
        TensorLayout::new([("A", 2), ("B", 2)]).unwrap()
    }

    #[test]
    fn deterministic_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = DensityState::pure(&ket(0, 4), ab()).unwrap();
        for _ in 0..20 {
            assert_eq!(measure_sample(&s, &pauli_z(), &pauli_z(), &mut rng).unwrap(), (1.0, 1.0));
        }
        let phi = DensityState::pure(&bell(0).unwrap(), ab()).unwrap();
        for _ in 0..50 {
            let (a, b) = measure_sample(&phi, &pauli_z(), &pauli_z(), &mut rng).unwrap();
            assert_eq!(a * b, 1.0);
        }
    }

    #[test]
    fn xx_on_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = sigma_ab(p_star(), 0.0).unwrap();
        let (local, _, _) = local_order(&s).unwrap();
        let d = JointDistribution::new(&local, &Spectrum::of(&pauli_x()).unwrap(), &Spectrum::of(&pauli_x()).unwrap())
            .unwrap();
        let mean: f64 = (0..10_000)
            .map(|_| {
                let (a, b) = d.sample(&mut rng);
                a * b
            })
            .sum::<f64>()
            / 1e4;
        assert!((mean - 1.0).abs() <= 0.02);
    }

    #[test]
    fn sampling_without_replacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut all = sample_without_replacement(10, 10, &mut rng).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(sample_without_replacement(5, 0, &mut rng).unwrap().is_empty());
        assert!(sample_without_replacement(3, 4, &mut rng).is_err());
    }

    #[test]
    fn eps_x_estimates() {
        assert_eq!(estimate_eps_x(&[1.0; 8]).unwrap(), 0.0);
        assert_eq!(estimate_eps_x(&[-1.0; 8]).unwrap(), 1.0);
        assert_eq!(estimate_eps_x(&[1.0, -1.0, 1.0, -1.0]).unwrap(), 0.5);
        assert!(estimate_eps_x(&[]).is_err());
    }

    #[test]
    fn optimal_untwist_ties_and_errors() {
        let gx = gamma_x(&TwistingOp::identity(2, 4)).unwrap();
        let dec = decompose(&gx, &TensorLayout::abab()).unwrap();
        let t = dec.t();
        let means = GroupMeans { t, means: vec![0.2; t * t], counts: vec![1; t * t] };
        let (i, _, _) = optimal_untwist(&means, &[dec.clone(), dec.clone()]).unwrap();
        assert_eq!(i, 0);
        assert!(optimal_untwist(&means, &[]).is_err());
        let e = estimate_eps_z_locc(&means, &dec).unwrap();
        assert!((e.out_value - 0.8).abs() < 1e-12);
    }

    #[test]
    fn missing_group_is_an_error() {
        let gx = gamma_x(&TwistingOp::identity(2, 4)).unwrap();
        let dec = decompose(&gx, &TensorLayout::abab()).unwrap();
        let t = dec.t();
        let means = GroupMeans { t, means: vec![0.0; t * t], counts: vec![0; t * t] };
        assert!(matches!(estimate_eps_z_locc(&means, &dec), Err(Error::Empty(_))));
    }

    #[test]
    fn out_of_range_is_flagged_not_hidden() {
        let gx = gamma_x(&TwistingOp::identity(2, 4)).unwrap();
        let dec = decompose(&gx, &TensorLayout::abab()).unwrap();
        let t = dec.t();
        let means = GroupMeans { t, means: vec![0.3; t * t], counts: vec![3; t * t] };
        let e = estimate_eps_z_locc(&means, &dec).unwrap();
        assert!(e.out_of_range);
        assert!(e.eps_z_raw < 0.0 && e.eps_z_hat == 0.0);
    }
}
