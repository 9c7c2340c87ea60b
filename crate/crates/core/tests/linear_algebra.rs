use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twistqkd::qmath::{self, kron, partial_trace, ComplexMatrix, TensorLayout};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eig_reconstructs(seed in any::<u64>(), dim in 1usize..12) {
        let m = qmath::random_hermitian(dim, &mut rng(seed));
        let e = qmath::herm_eig(&m).unwrap();
        prop_assert!(e.reconstruct().max_abs_diff(&m) < 1e-10);
        prop_assert!(e.vectors.is_unitary(1e-10));
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn unitary_conjugation_keeps_spectrum(seed in any::<u64>(), dim in 2usize..9) {
        let mut r = rng(seed);
        let m = qmath::random_hermitian(dim, &mut r);
        let u = qmath::random_unitary(dim, &mut r);
        let a = qmath::herm_eigvals(&m).unwrap();
        let b = qmath::herm_eigvals(&u.conjugate(&m)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn partial_trace_of_product(seed in any::<u64>(), da in 1usize..5, db in 1usize..5) {
        let mut r = rng(seed);
        let a = qmath::random_density(da, &mut r);
        let b = qmath::random_density(db, &mut r);
        let layout = TensorLayout::new([("A", da), ("B", db)]).unwrap();
        let ab = kron(&a, &b);
        let (ra, _) = partial_trace(&ab, &layout, &["A"]).unwrap();
        let (rb, _) = partial_trace(&ab, &layout, &["B"]).unwrap();
        prop_assert!(ra.max_abs_diff(&a) < 1e-12);
        prop_assert!(rb.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn random_density_is_a_state(seed in any::<u64>(), dim in 1usize..10) {
        let m = qmath::random_density(dim, &mut rng(seed));
        prop_assert!((m.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(qmath::min_eigenvalue(&m).unwrap() > -1e-12);
        prop_assert!((qmath::trace_norm(&m).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn trace_norm_is_a_norm(seed in any::<u64>(), dim in 1usize..7) {
        let mut r = rng(seed);
        let a = qmath::random_hermitian(dim, &mut r);
        let b = qmath::random_hermitian(dim, &mut r);
        let na = qmath::trace_norm(&a).unwrap();
        let nb = qmath::trace_norm(&b).unwrap();
        let nab = qmath::trace_norm(&(&a + &b)).unwrap();
        prop_assert!(na >= 0.0 && nab <= na + nb + 1e-10);
        prop_assert!(qmath::op_norm(&a).unwrap() <= na + 1e-10);
    }

    #[test]
    fn embed_then_trace(seed in any::<u64>()) {
        let mut r = rng(seed);
        let layout = TensorLayout::abab();
        let op = qmath::random_hermitian(4, &mut r);
        let full = qmath::embed(&op, &layout, &["B'", "A"]).unwrap();
        let (back, l) = partial_trace(&full, &layout, &["A", "B'"]).unwrap();
        // identity on the remaining factors contributes their dimension
        let (want, _) = qmath::permute(&op.scale_real(4.0), &TensorLayout::new([("B'", 2), ("A", 2)]).unwrap(), &l.labels()).unwrap();
        prop_assert!(back.max_abs_diff(&want) < 1e-12);
    }
}

#[test]
fn degenerate_spectrum_is_stable() {
    let m = ComplexMatrix::diag_real(&[1.0, 1.0, -1.0, -1.0]);
    let p = qmath::spectral_projectors(&m, 1e-9).unwrap();
    assert_eq!(p.len(), 2);
    for (_, proj) in &p {
        assert!((proj.trace().re - 2.0).abs() < 1e-12);
    }
}

#[test]
fn non_hermitian_rejected() {
    let mut m = ComplexMatrix::identity(3);
    m[(0, 1)] = qmath::C64::new(1.0, 0.0);
    assert!(qmath::herm_eig(&m).is_err());
}
