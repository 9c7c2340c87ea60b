use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twistqkd::bounds::{f_lca, srodka_bound};
use twistqkd::channels::{
    apply_kraus, check_kraus, sample_pattern, twisted_copy_state, BindingChannel, NoiseMode, PauliNoiseModel,
};
use twistqkd::estimation::{
    self, basis_spectra, estimate_eps_z_locc, optimal_untwist, GroupMeans, GroupSampler, JointDistribution, Spectrum,
};
use twistqkd::qmath::{self, kron, kron_vec, pauli_x, pauli_z, ComplexMatrix, TensorLayout};
use twistqkd::states::{self, max_entangled, p_star, pauli_apply, DensityState, PauliPattern};
use twistqkd::twist::{self, build_u_h, decompose, gamma_x, gamma_z, TwistingOp};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn phi_phi() -> DensityState {
    let phi = max_entangled(2).unwrap();
    DensityState::pure(&kron_vec(&phi, &phi), TensorLayout::abab()).unwrap()
}

fn anc00() -> DensityState {
    DensityState::pure(&states::ket(0, 4), TensorLayout::new([("A'", 2), ("B'", 2)]).unwrap()).unwrap()
}

#[test]
fn iid_pattern_weight_concentrates() {
    let model = PauliNoiseModel::new(0.1, 0.03, NoiseMode::Iid).unwrap();
    let p = sample_pattern(&model, 100_000, &mut rng(1));
    assert!((p.weight_x() as f64 / 1e5 - 0.1).abs() < 0.005);
    assert!((p.weight_z() as f64 / 1e5 - 0.03).abs() < 0.003);
}

#[test]
fn fixed_weight_pattern_is_exact() {
    let model = PauliNoiseModel::new(0.25, 0.1, NoiseMode::FixedWeight).unwrap();
    for seed in 0..5 {
        let p = sample_pattern(&model, 1000, &mut rng(seed));
        assert_eq!((p.weight_x(), p.weight_z()), (250, 100));
    }
}

#[test]
fn two_copy_pattern_matches_per_copy_action() {
    let phi = max_entangled(2).unwrap();
    let layout = TensorLayout::new([("A1", 2), ("B1", 2), ("A2", 2), ("B2", 2)]).unwrap();
    let two = DensityState::pure(&kron_vec(&phi, &phi), layout).unwrap();
    let single = DensityState::pure(&phi, TensorLayout::new([("A", 2), ("B", 2)]).unwrap()).unwrap();
    for code in 0..16u8 {
        let bit = |k: u8| code >> k & 1 == 1;
        let pat = PauliPattern::new(vec![bit(0), bit(2)], vec![bit(1), bit(3)]).unwrap();
        let out = pauli_apply(&pat, &two, &["B1", "B2"]).unwrap();
        let c1 = pauli_apply(&PauliPattern::single(bit(0), bit(1)), &single, &["B"]).unwrap();
        let c2 = pauli_apply(&PauliPattern::single(bit(2), bit(3)), &single, &["B"]).unwrap();
        let want = kron(c1.matrix(), c2.matrix());
        assert!(out.matrix().max_abs_diff(&want) < 1e-12);
    }
}

#[test]
fn binding_channel_is_trace_preserving_and_ppt() {
    for (p, kappa) in [(p_star(), 0.0), (p_star(), 0.001), (0.3, 0.2), (1.0, 1.0)] {
        let ch = BindingChannel::new(p, kappa).unwrap();
        check_kraus(&ch.kraus()).unwrap();
        let out = ch.apply(&phi_phi(), ["B", "B'"]).unwrap();
        assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
        let rho = states::rho_h(p, kappa).unwrap();
        assert!(qmath::trace_norm(&(out.matrix() - rho.matrix())).unwrap() < 1e-9);
    }
    let out = BindingChannel::new(p_star(), 0.0).unwrap().apply(&phi_phi(), ["B", "B'"]).unwrap();
    let pt = out.partial_transpose(&["B", "B'"]).unwrap();
    assert!(qmath::min_eigenvalue(&pt).unwrap() >= -1e-10);
}

#[test]
fn branch_outcomes_reassemble_the_channel() {
    let ch = BindingChannel::new(0.6, 0.0).unwrap();
    let input = DensityState::new(qmath::random_density(16, &mut rng(4)), TensorLayout::abab()).unwrap();
    let outcomes = ch.branch_outcomes(&input, ["B", "B'"]).unwrap();
    assert_eq!(outcomes.len(), 6);
    let total: f64 = outcomes.iter().map(|(p, _)| p).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let parts: Vec<(f64, &DensityState)> = outcomes.iter().map(|(p, s)| (*p, s)).collect();
    let mix = DensityState::mixture(&parts).unwrap();
    let direct = apply_kraus(&input, &ch.kraus(), &["B", "B'"]).unwrap();
    assert!(mix.matrix().max_abs_diff(direct.matrix()) < 1e-12);
}

#[test]
fn sampled_branches_follow_born_rule() {
    let ch = BindingChannel::new(p_star(), 0.0).unwrap();
    let mut r = rng(5);
    let n = 4000;
    let mut hits = 0;
    for _ in 0..n {
        let s = ch.sample(&phi_phi(), ["B", "B'"], &mut r).unwrap();
        if s.branch.starts_with('4') {
            hits += 1;
        }
    }
    let want = 1.0 - p_star();
    let sd = (want * (1.0 - want) / n as f64).sqrt();
    assert!((hits as f64 / n as f64 - want).abs() < 4.0 * sd);
}

#[test]
fn gamma_z_is_twist_invariant() {
    let plain = kron(&kron(&pauli_z(), &pauli_z()), &ComplexMatrix::identity(4));
    let mut r = rng(6);
    for _ in 0..100 {
        let tw = TwistingOp::random(2, 4, &mut r);
        assert!(gamma_z(&tw).unwrap().max_abs_diff(&plain) < 1e-10);
    }
}

#[test]
fn gamma_x_decomposition_has_full_weight() {
    let mut r = rng(7);
    for _ in 0..100 {
        let tw = TwistingOp::random(2, 4, &mut r);
        let gx = gamma_x(&tw).unwrap();
        let dec = decompose(&gx, &TensorLayout::abab()).unwrap();
        assert!((dec.sum_sq() - 16.0).abs() < 1e-8);
        assert!(dec.reconstruct(&TensorLayout::abab()).unwrap().max_abs_diff(&gx) < 1e-10);
    }
}

#[test]
fn ccq_state_ignores_the_twisting() {
    let mut r = rng(8);
    for _ in 0..10 {
        let rho = DensityState::new(qmath::random_density(16, &mut r), TensorLayout::abab()).unwrap();
        let tw = TwistingOp::random(2, 4, &mut r);
        let (psi, layout) = twist::purify(&rho).unwrap();
        let e = layout.dim_of("E").unwrap();
        let a = twist::ccq_from_purification(&psi, 2, 4, e).unwrap();
        let b = twist::ccq_from_purification(&twist::twist_purification(&psi, &tw, e), 2, 4, e).unwrap();
        assert!(qmath::trace_distance(a.matrix(), b.matrix()).unwrap() < 1e-9);
    }
}

#[test]
fn locc_estimator_is_unbiased_exactly() {
    let mut r = rng(9);
    for _ in 0..5 {
        let tw = TwistingOp::random(2, 4, &mut r);
        let gx = gamma_x(&tw).unwrap();
        let dec = decompose(&gx, &TensorLayout::abab()).unwrap();
        let (sa, sb) = basis_spectra(&dec).unwrap();
        let rho = DensityState::new(qmath::random_density(16, &mut r), TensorLayout::abab()).unwrap();
        let sampler = GroupSampler::new(&rho, &sa, &sb).unwrap();
        let t = dec.t();
        let out: f64 = dec.nonzero(0.0).iter().map(|&(ja, jb, s)| s * sampler.exact_mean(ja * t + jb)).sum();
        assert!((out - rho.expectation(&gx)).abs() < 1e-10);
    }
}

#[test]
fn locc_estimator_monte_carlo_mean() {
    let tw = build_u_h();
    let gx = gamma_x(&tw).unwrap();
    let dec = decompose(&gx, &TensorLayout::abab()).unwrap();
    let (sa, sb) = basis_spectra(&dec).unwrap();
    let rho = twisted_copy_state(&tw, &anc00(), false, true).unwrap();
    let sampler = GroupSampler::new(&rho, &sa, &sb).unwrap();
    let t = dec.t();
    let mut r = rng(10);
    let m_prime = 50;
    let trials = 400;
    let mut vals = Vec::with_capacity(trials);
    for _ in 0..trials {
        let groups: Vec<Vec<f64>> =
            (0..t * t).map(|g| (0..m_prime).map(|_| sampler.sample(g, &mut r)).collect()).collect();
        let means = GroupMeans::from_outcomes(t, &groups).unwrap();
        vals.push(estimate_eps_z_locc(&means, &dec).unwrap().out_value);
    }
    let mean = vals.iter().sum::<f64>() / trials as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let se = (var / trials as f64).sqrt();
    let exact = rho.expectation(&gx);
    assert!((exact + 1.0).abs() < 1e-10, "a phase flip turns <Gamma_x> to -1");
    assert!((mean - exact).abs() < 3.0 * se.max(1e-3), "mean {mean} exact {exact} se {se}");
}

#[test]
fn eps_x_concentration_respects_bound_shape() {
    let sigma = states::sigma_ab(0.9, 0.0).unwrap();
    let (local, _, _) = estimation::local_order(&sigma).unwrap();
    let z = Spectrum::of(&pauli_z()).unwrap();
    let dist = JointDistribution::new(&local, &z, &z).unwrap();
    let truth = (1.0 - dist.mean_product()) / 2.0;
    let mut r = rng(11);
    let (m, delta, trials) = (2000usize, 0.05, 300);
    let bound = (2.0 * (-(m as f64) * delta * delta / 16.0).exp()).min(1.0);
    let mut exceed = 0;
    for _ in 0..trials {
        let xs: Vec<f64> = (0..m)
            .map(|_| {
                let (a, b) = dist.sample(&mut r);
                a * b
            })
            .collect();
        if (estimation::estimate_eps_x(&xs).unwrap() - truth).abs() > delta {
            exceed += 1;
        }
    }
    assert!((exceed as f64 / trials as f64) <= bound);
    // the Hoeffding form is tighter still
    assert!(f_lca(m as f64, delta).value <= 2.0);
}

#[test]
fn sampling_without_replacement_is_uniform() {
    let mut r = rng(12);
    let mut counts = [0usize; 10];
    let trials = 20_000;
    for _ in 0..trials {
        for i in estimation::sample_without_replacement(10, 3, &mut r).unwrap() {
            counts[i] += 1;
        }
    }
    for c in counts {
        assert!((c as f64 / trials as f64 - 0.3).abs() < 0.015);
    }
}

#[test]
fn one_record_serves_every_candidate() {
    let rho = states::rho_h(p_star(), 0.0).unwrap();
    let layout = TensorLayout::abab();
    let decs: Vec<_> = [TwistingOp::identity(2, 4), build_u_h()]
        .iter()
        .map(|tw| decompose(&gamma_x(tw).unwrap(), &layout).unwrap())
        .collect();
    assert_eq!(decs[0].basis_a.len(), decs[1].basis_a.len());
    let (sa, sb) = basis_spectra(&decs[0]).unwrap();
    let sampler = GroupSampler::new(&rho, &sa, &sb).unwrap();
    let t = decs[0].t();
    let means = GroupMeans { t, means: (0..t * t).map(|g| sampler.exact_mean(g)).collect(), counts: vec![1; t * t] };
    let (chosen, eps_z, est) = optimal_untwist(&means, &decs).unwrap();
    assert_eq!(chosen, 1);
    assert!(eps_z.abs() < 1e-10);
    let plain = kron(&kron(&pauli_x(), &pauli_x()), &ComplexMatrix::identity(4));
    assert!((est[0].out_value - rho.expectation(&plain)).abs() < 1e-10);
}

#[test]
fn pdit_from_identity_twisting_is_a_product() {
    let gamma = states::make_pdit(&TwistingOp::identity(2, 4), &anc00(), 2).unwrap();
    let key = gamma.partial_trace(&["A", "B"]).unwrap();
    let phi = ComplexMatrix::projector(&max_entangled(2).unwrap());
    assert!(key.matrix().max_abs_diff(&phi) < 1e-12);
}

#[test]
fn classical_sampling_respects_bound() {
    let population: Vec<usize> = (0..10_000).map(|i| usize::from(i % 10 < 3)).collect();
    let eps = [0.05, 0.1, 0.2];
    let k = 4000;
    let freq = estimation::sampling_deviation(&population, 2, k, &eps, 500, &mut rng(13)).unwrap();
    for (f, e) in freq.iter().zip(eps) {
        let b = srodka_bound(k as f64, e, 2.0).value;
        if b < 1.0 {
            assert!(*f <= b, "eps {e}: {f} > {b}");
        }
    }
    assert!(estimation::sampling_deviation(&population, 2, 0, &eps, 1, &mut rng(0)).is_err());
}
