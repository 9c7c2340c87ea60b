//! Toy reconciliation and privacy amplification.
//!
//! Error correction sends, per block, the syndrome of a random binary
//! parity-check code and decodes to the lowest-weight error consistent
//! with the syndrome difference. Privacy amplification is Toeplitz hashing.
//! Neither step is close to Shannon efficiency; the leak above
//! `raw * H(eps_x)` is reported.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::EcConfig;
use crate::bounds::binary_entropy;
use crate::error::{Error, Result};

/// Random parity-check code on `block` bits with a syndrome lookup table.
#[derive(Debug, Clone)]
pub struct ParityCode {
    pub block: usize,
    /// Column `j` is the syndrome of a single error at bit `j`.
    columns: Vec<u32>,
    pub syndrome_bits: usize,
    /// Lowest-weight error pattern per syndrome, if one was found.
    leaders: Vec<Option<u32>>,
}

impl ParityCode {
    /// A full-syndrome code (`r = block`) uses the identity matrix, so Bob
    /// learns Alice's block outright.
    pub fn random<R: Rng + ?Sized>(block: usize, syndrome_bits: usize, rng: &mut R) -> Self {
        let r = syndrome_bits.min(block);
        let mask = if r == 0 { 0 } else { (1u32 << r) - 1 };
        let columns: Vec<u32> = if r == block {
            (0..block).map(|j| 1u32 << j).collect()
        } else {
            (0..block).map(|_| rng.random::<u32>() & mask).collect()
        };
        let mut code = Self { block, columns, syndrome_bits: r, leaders: vec![None; 1 << r] };
        code.build_table();
        code
    }

    fn build_table(&mut self) {
        let total = self.leaders.len();
        let mut filled = 0;
        for w in 0..=self.block {
            for e in PatternsOfWeight::new(self.block, w) {
                let s = self.syndrome_of(e) as usize;
                if self.leaders[s].is_none() {
                    self.leaders[s] = Some(e);
                    filled += 1;
                    if filled == total {
                        return;
                    }
                }
            }
        }
    }

    pub fn syndrome_of(&self, bits: u32) -> u32 {
        let mut s = 0;
        let mut b = bits;
        while b != 0 {
            let j = b.trailing_zeros() as usize;
            s ^= self.columns[j];
            b &= b - 1;
        }
        s
    }

    /// Bob's corrected block given Alice's syndrome.
    pub fn decode(&self, bob: u32, alice_syndrome: u32) -> u32 {
        let diff = alice_syndrome ^ self.syndrome_of(bob);
        match self.leaders[diff as usize] {
            Some(e) => bob ^ e,
            None => bob,
        }
    }
}

/// All `n`-bit words of weight `w`, in increasing order (Gosper's hack).
struct PatternsOfWeight {
    next: Option<u32>,
    limit: u32,
}

impl PatternsOfWeight {
    fn new(n: usize, w: usize) -> Self {
        let next = if w > n {
            None
        } else if w == 0 {
            Some(0)
        } else {
            Some(((1u64 << w) - 1) as u32)
        };
        Self { next, limit: ((1u64 << n) - 1) as u32 }
    }
}

impl Iterator for PatternsOfWeight {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        let cur = self.next?;
        self.next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur as u64 + c as u64;
            let nxt = (((r ^ cur as u64) >> 2) / c as u64) | r;
            if nxt > self.limit as u64 {
                None
            } else {
                Some(nxt as u32)
            }
        };
        Some(cur)
    }
}

/// Syndrome length per block: enough cosets for every error weight up to
/// the point where the binomial tail drops below `cfg.tail`, plus slack.
pub fn syndrome_bits_for(eps_x: f64, cfg: &EcConfig) -> usize {
    let b = cfg.block;
    let p = eps_x.clamp(0.0, 1.0);
    let mut w_star = b;
    let mut cdf = 0.0;
    let mut patterns = 0.0;
    for w in 0..=b {
        let c = binomial(b, w);
        cdf += c * p.powi(w as i32) * (1.0 - p).powi((b - w) as i32);
        patterns += c;
        if 1.0 - cdf <= cfg.tail {
            w_star = w;
            break;
        }
    }
    if w_star == b {
        return b;
    }
    let need = patterns.log2().ceil() as usize + cfg.slack_bits;
    need.min(b)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcPaOutcome {
    pub raw_len: usize,
    pub block: usize,
    pub syndrome_bits_per_block: usize,
    pub syndrome_bits: u64,
    /// `syndrome_bits - raw * H(eps_x)`.
    pub leak_above_shannon: f64,
    pub errors_before: usize,
    pub errors_after: usize,
    pub final_len: usize,
    /// True when the length formula left nothing to hash to.
    pub exhausted: bool,
    pub key_a: Vec<bool>,
    pub key_b: Vec<bool>,
}

impl EcPaOutcome {
    pub fn agreement(&self) -> bool {
        self.key_a == self.key_b
    }
}

/// `floor(raw (1 - H(eps_x) - H(eps_z))) - syndrome - buffer`, at least 0.
pub fn pa_length(raw: usize, eps_x: f64, eps_z: f64, syndrome_bits: u64, buffer_bits: u64) -> Result<usize> {
    let rate = 1.0 - binary_entropy(eps_x)? - binary_entropy(eps_z)?;
    let base = (raw as f64 * rate).floor();
    let len = base - syndrome_bits as f64 - buffer_bits as f64;
    Ok(if len > 0.0 { len as usize } else { 0 })
}

/// Reconciles Bob's sifted key to Alice's and hashes both.
#[allow(clippy::too_many_arguments)]
pub fn ec_pa<R: Rng + ?Sized>(
    sifted_a: &[bool],
    sifted_b: &[bool],
    eps_x_hat: f64,
    eps_z_hat: f64,
    buffer_bits: u64,
    cfg: &EcConfig,
    pa_seed: u64,
    rng: &mut R,
) -> Result<EcPaOutcome> {
    if sifted_a.len() != sifted_b.len() {
        return Err(Error::Dimension(format!(
            "sifted keys differ in length: {} vs {}",
            sifted_a.len(),
            sifted_b.len()
        )));
    }
    let raw = sifted_a.len();
    let b = cfg.block;
    let r = syndrome_bits_for(eps_x_hat, cfg);
    let code = ParityCode::random(b, r, rng);
    let errors_before = sifted_a.iter().zip(sifted_b).filter(|(x, y)| x != y).count();

    let mut corrected = Vec::with_capacity(raw);
    let mut syndrome_bits = 0u64;
    for (ca, cb) in sifted_a.chunks(b).zip(sifted_b.chunks(b)) {
        let wa = pack(ca);
        let wb = pack(cb);
        let fixed = code.decode(wb, code.syndrome_of(wa));
        corrected.extend((0..cb.len()).map(|j| fixed >> j & 1 == 1));
        syndrome_bits += r as u64;
    }
    let errors_after = sifted_a.iter().zip(&corrected).filter(|(x, y)| x != y).count();
    let final_len = pa_length(raw, eps_x_hat, eps_z_hat, syndrome_bits, buffer_bits)?;
    let (key_a, key_b) = if final_len == 0 {
        (Vec::new(), Vec::new())
    } else {
        let hash = Toeplitz::new(final_len, raw, pa_seed);
        (hash.apply(sifted_a), hash.apply(&corrected))
    };
    Ok(EcPaOutcome {
        raw_len: raw,
        block: b,
        syndrome_bits_per_block: r,
        syndrome_bits,
        leak_above_shannon: syndrome_bits as f64 - raw as f64 * binary_entropy(eps_x_hat)?,
        errors_before,
        errors_after,
        final_len,
        exhausted: final_len == 0,
        key_a,
        key_b,
    })
}

fn pack(bits: &[bool]) -> u32 {
    bits.iter().enumerate().fold(0, |acc, (j, &v)| acc | (v as u32) << j)
}

/// `out_i = xor_j T[i][j] k_j` with `T[i][j] = seed[i + len_in - 1 - j]`.
#[derive(Debug, Clone)]
pub struct Toeplitz {
    out_len: usize,
    in_len: usize,
    seed: Vec<u64>,
}

impl Toeplitz {
    pub fn new(out_len: usize, in_len: usize, seed: u64) -> Self {
        let bits = out_len + in_len;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seed = (0..bits.div_ceil(64) + 1).map(|_| rng.random()).collect();
        Self { out_len, in_len, seed }
    }

    fn window(&self, start: usize, word: usize) -> u64 {
        let pos = start + 64 * word;
        let (q, r) = (pos / 64, pos % 64);
        let lo = self.seed[q] >> r;
        if r == 0 {
            lo
        } else {
            lo | self.seed.get(q + 1).copied().unwrap_or(0) << (64 - r)
        }
    }

    pub fn apply(&self, key: &[bool]) -> Vec<bool> {
        assert_eq!(key.len(), self.in_len, "Toeplitz input length");
        // reversed key, packed: rev[u] = key[in_len - 1 - u]
        let words = self.in_len.div_ceil(64);
        let mut rev = vec![0u64; words];
        for (u, &bit) in key.iter().rev().enumerate() {
            if bit {
                rev[u / 64] |= 1 << (u % 64);
            }
        }
        (0..self.out_len)
            .map(|i| {
                let mut acc = 0u64;
                for (w, &kw) in rev.iter().enumerate() {
                    acc ^= self.window(i, w) & kw;
                }
                acc.count_ones() % 2 == 1
            })
            .collect()
    }

    /// Straightforward evaluation, for testing.
    pub fn apply_naive(&self, key: &[bool]) -> Vec<bool> {
        let bit = |k: usize| self.seed[k / 64] >> (k % 64) & 1 == 1;
        (0..self.out_len)
            .map(|i| key.iter().enumerate().filter(|(j, &v)| v && bit(i + self.in_len - 1 - j)).count() % 2 == 1)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gosper_counts() {
        for n in [1usize, 5, 10] {
            for w in 0..=n {
                let pats: Vec<u32> = PatternsOfWeight::new(n, w).collect();
                assert_eq!(pats.len() as f64, binomial(n, w));
                assert!(pats.iter().all(|p| p.count_ones() as usize == w && *p >> n == 0));
            }
        }
    }

    #[test]
    fn toeplitz_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (out, inp) in [(1, 1), (5, 70), (64, 64), (100, 300)] {
            let key: Vec<bool> = (0..inp).map(|_| rng.random()).collect();
            let t = Toeplitz::new(out, inp, 9);
            assert_eq!(t.apply(&key), t.apply_naive(&key));
        }
    }

    #[test]
    fn identical_inputs_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<bool> = (0..1000).map(|_| rng.random()).collect();
        let cfg = EcConfig::default();
        let out = ec_pa(&a, &a, 0.0, 0.0, 80, &cfg, 5, &mut rng).unwrap();
        assert!(out.agreement());
        assert_eq!(out.syndrome_bits_per_block, cfg.slack_bits);
        assert_eq!(out.errors_after, 0);
        let blocks = 1000usize.div_ceil(24) as u64;
        assert_eq!(out.final_len as u64, 1000 - blocks * 2 - 80);
    }

    #[test]
    fn pa_length_arithmetic() {
        let h = binary_entropy(0.1).unwrap();
        let expect = (1000.0 * (1.0 - h)).floor() as usize - 100 - 80;
        assert_eq!(pa_length(1000, 0.1, 0.0, 100, 80).unwrap(), expect);
        assert_eq!(pa_length(100, 0.5, 0.0, 0, 0).unwrap(), 0);
    }

    #[test]
    fn full_syndrome_recovers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let code = ParityCode::random(8, 8, &mut rng);
        for a in [0u32, 0x5a, 0xff] {
            assert_eq!(code.decode(a ^ 0x81, code.syndrome_of(a)), a);
        }
    }
}
