//! Deterministic fixtures shared by the kernel benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twistqkd::protocol::ProtocolConfig;
use twistqkd::qmath::{random_hermitian, ComplexMatrix};
use twistqkd::twist::TwistingOp;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random Hermitian matrix of the given dimension.
pub fn hermitian(dim: usize, seed: u64) -> ComplexMatrix {
    random_hermitian(dim, &mut rng(seed))
}

/// A Haar-random twisting on two qubits plus a four-level shield.
pub fn twisting(seed: u64) -> TwistingOp {
    TwistingOp::random(2, 4, &mut rng(seed))
}

/// Default binding-channel run shrunk to `n` copies.
pub fn small_run(n: u64) -> ProtocolConfig {
    ProtocolConfig { n, seed: 1, ..ProtocolConfig::default() }
}
