use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twistqkd::bounds::net_key_rate;
use twistqkd::channels::{NoiseMode, PauliNoiseModel};
use twistqkd::protocol::{ec_pa, run_pm, run_ppp, AncillaSpec, EcConfig, ProtocolConfig, SourceConfig, TwistingSpec};

fn pbit(n: u64, seed: u64, eps_x: f64, eps_z: f64) -> ProtocolConfig {
    ProtocolConfig {
        n,
        seed,
        source: SourceConfig::Pbit {
            twisting: TwistingSpec::UH,
            ancilla: AncillaSpec::Basis("00".into()),
            noise: PauliNoiseModel::new(eps_x, eps_z, NoiseMode::Iid).unwrap(),
        },
        ..ProtocolConfig::default()
    }
}

#[test]
fn same_seed_same_bytes() {
    for cfg in [ProtocolConfig { seed: 3, ..ProtocolConfig::default() }, pbit(20_000, 4, 0.02, 0.01)] {
        let a = run_ppp(&cfg).unwrap().to_json().unwrap();
        let b = run_ppp(&cfg).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let a = run_pm(&cfg).unwrap().to_json().unwrap();
        let b = run_pm(&cfg).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn seeds_change_the_run() {
    let a = run_ppp(&pbit(10_000, 1, 0.05, 0.0)).unwrap();
    let b = run_ppp(&pbit(10_000, 2, 0.05, 0.0)).unwrap();
    assert_ne!(a.estimation.unwrap().positions_x, b.estimation.unwrap().positions_x);
}

#[test]
fn sample_positions_are_disjoint() {
    let t = run_ppp(&pbit(10_000, 5, 0.0, 0.0)).unwrap();
    let est = t.estimation.unwrap();
    let mut seen = vec![false; 10_000];
    for &i in est.positions_x.iter().chain(&est.positions_z).chain(&est.discarded_z) {
        assert!(!seen[i as usize], "position {i} used twice");
        seen[i as usize] = true;
    }
    assert_eq!(est.positions_x.len() as u64, est.m_x);
    assert_eq!(est.positions_z.len() as u64, est.m_prime * 256);
    let key = t.key.unwrap();
    assert_eq!(key.sifted_len, seen.iter().filter(|&&s| !s).count());
}

#[test]
fn noiseless_pbit_rate_tracks_net_rate() {
    let t = run_ppp(&pbit(10_000, 7, 0.0, 0.0)).unwrap();
    assert!(!t.abort, "{:?}", t.abort_reason);
    let est = t.estimation.as_ref().unwrap();
    let key = t.key.as_ref().unwrap();
    assert!(key.agreement && key.final_a == key.final_b);
    let net = net_key_rate(t.eps_x_hat.unwrap(), t.eps_z_hat.unwrap(), est.m_x, est.m_z, 10_000).unwrap();
    let rate = key.final_len as f64 / 10_000.0;
    assert!((rate - net).abs() <= 0.2 * net, "rate {rate} net {net}");
    assert_eq!(est.chosen, 1, "U_H should be picked on its own pbit");
}

#[test]
fn heavy_eve_always_aborts() {
    for seed in 0..5 {
        let cfg = ProtocolConfig {
            seed,
            eve: Some(PauliNoiseModel::new(0.3, 0.0, NoiseMode::Iid).unwrap()),
            ..ProtocolConfig::default()
        };
        let t = run_ppp(&cfg).unwrap();
        assert!(t.abort);
        assert_eq!(t.final_key_len(), 0);
        assert!(t.check_invariants());
    }
}

#[test]
fn aborts_never_carry_a_key() {
    for seed in 0..6 {
        let t = run_ppp(&ProtocolConfig { seed, ..ProtocolConfig::default() }).unwrap();
        assert!(t.check_invariants());
        if t.abort {
            assert!(t.key.is_none() || t.final_key_len() == 0);
            assert!(t.abort_reason.is_some());
        } else {
            assert!(t.key_rate.unwrap() > 0.0);
        }
    }
}

#[test]
fn toy_ec_corrects_five_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 60_000;
    let a: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    let b: Vec<bool> = a.iter().map(|&x| x ^ rng.random_bool(0.05)).collect();
    let ec = EcConfig { block: 16, ..EcConfig::default() };
    let out = ec_pa(&a, &b, 0.05, 0.0, 80, &ec, 9, &mut rng).unwrap();
    assert!(out.errors_before > 0);
    assert!((out.errors_after as f64 / n as f64) <= 1e-3, "{} residual errors", out.errors_after);
    assert!(out.syndrome_bits as f64 >= n as f64 * 0.286, "leak at least the Shannon limit");
}

#[test]
fn pm_events_come_in_protocol_order() {
    let t = run_pm(&pbit(100_000, 3, 0.0, 0.0)).unwrap();
    let steps: Vec<&str> = t.events.iter().map(|e| e.step.as_str()).collect();
    let pos = |s: &str| steps.iter().position(|x| *x == s).unwrap_or_else(|| panic!("missing {s}: {steps:?}"));
    let order = ["prepare", "transmit", "measure", "receipt_confirmed", "basis_reconciliation", "sifting"];
    for w in order.windows(2) {
        assert!(pos(w[0]) < pos(w[1]), "{} before {}", w[0], w[1]);
    }
}

#[test]
fn pm_matched_counts_cover_every_use() {
    let t = run_pm(&pbit(100_000, 4, 0.0, 0.0)).unwrap();
    let pm = t.pm.as_ref().unwrap();
    assert_eq!(pm.matched_counts.len(), 256);
    assert_eq!(pm.matched_counts.iter().sum::<u64>(), 100_000);
    if !t.abort {
        let est = t.estimation.as_ref().unwrap();
        for g in 1..256 {
            assert_eq!(est.group_means.counts[g] as u64, est.m_prime);
        }
    }
}

#[test]
fn pm_and_ppp_agree_on_bit_errors() {
    let cfg = pbit(100_000, 8, 0.08, 0.0);
    let ppp = run_ppp(&cfg).unwrap();
    let pm = run_pm(&cfg).unwrap();
    let (a, b) = (ppp.eps_x_hat.unwrap(), pm.eps_x_hat.unwrap());
    assert!((a - 0.08).abs() < 0.02 && (b - 0.08).abs() < 0.03, "ppp {a} pm {b}");
}

#[test]
fn strict_solver_refuses_desk_scale() {
    let cfg = ProtocolConfig { strict_solver: true, ..ProtocolConfig::default() };
    assert!(run_ppp(&cfg).is_err());
    let t = run_ppp(&ProtocolConfig::default()).unwrap();
    assert!(!t.solver.feasible && !t.solver.used);
}

#[test]
fn config_json_round_trip() {
    let cfg = pbit(12_345, 6, 0.01, 0.02);
    let text = serde_json::to_string(&cfg).unwrap();
    let back = ProtocolConfig::from_json(&text).unwrap();
    assert_eq!(back, cfg);
    assert!(ProtocolConfig::from_json(r#"{"n": 10, "delta": 2.0}"#).is_err());
}
