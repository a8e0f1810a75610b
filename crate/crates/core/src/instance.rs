//! Deterministic random problem instances.
//!
//! Generator: ChaCha8 as implemented by `rand_chacha` 0.3.1 (pinned exactly).
//! The 256-bit key is four successive SplitMix64 outputs seeded with
//! `seed ^ mix(n) ^ mix(d)`, and batch member `b` reads from ChaCha stream
//! `b`, so members are independent substreams of one key. A uniform draw on
//! `[0, 1)` takes the top 53 bits of `next_u64` times `2^-53`; embedding
//! entries are `2u - 1`. Every step is integer arithmetic or an exact
//! float operation, so the bits are identical on every platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Scores};
use crate::softmax::SoftmaxMode;

/// Identifies the generator so reports can pin it.
pub const GENERATOR_ID: &str = "chacha8/rand_chacha-0.3.1/splitmix64-key/v1";

/// Parameters of one batch of problem instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceConfig {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub batch: usize,
    pub seed: u64,
    /// Tournament sharpness `C`.
    pub boost: f64,
    pub mode: SoftmaxMode,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig { n: 16, k: 2, d: 64, batch: 16, seed: 42, boost: 100.0, mode: SoftmaxMode::Verbatim }
    }
}

impl InstanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config(format!("k must be >= 1, got {}", self.k)));
        }
        if self.k > self.n {
            return Err(Error::Config(format!("k must be <= n, got k={} n={}", self.k, self.n)));
        }
        if self.d < 1 {
            return Err(Error::Config(format!("d must be >= 1, got {}", self.d)));
        }
        if self.batch < 1 {
            return Err(Error::Config(format!("batch must be >= 1, got {}", self.batch)));
        }
        if !(self.boost > 0.0 && self.boost.is_finite()) {
            return Err(Error::Config(format!("boost must be finite and > 0, got {}", self.boost)));
        }
        Ok(())
    }
}

/// One `(E, v)` problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub embeddings: Matrix,
    pub scores: Scores,
}

/// Draws `cfg.batch` instances with `E ~ U[-1, 1]` and `v ~ U[0, 1]`.
///
/// A pure function of `cfg`: the key depends on `(seed, n, d)` only, so the
/// same candidates are reused across `k`, `boost` and `mode`.
pub fn generate_instance(cfg: &InstanceConfig) -> Result<Vec<Instance>> {
    cfg.validate()?;
    let key = derive_key(cfg.seed, cfg.n as u64, cfg.d as u64);
    (0..cfg.batch)
        .map(|b| {
            let mut rng = ChaCha8Rng::from_seed(key);
            rng.set_stream(b as u64);
            let e: Vec<f64> = (0..cfg.n * cfg.d).map(|_| 2.0 * unit(&mut rng) - 1.0).collect();
            let v: Vec<f64> = (0..cfg.n).map(|_| unit(&mut rng)).collect();
            Ok(Instance { embeddings: Matrix::from_vec(cfg.n, cfg.d, e)?, scores: Scores::new(v)? })
        })
        .collect()
}

/// Uniform on `[0, 1)` from the top 53 bits.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_key(seed: u64, n: u64, d: u64) -> [u8; 32] {
    let mut s = n;
    let mix_n = splitmix64(&mut s);
    let mut s = d.rotate_left(32);
    let mix_d = splitmix64(&mut s);
    let mut state = seed ^ mix_n ^ mix_d;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}
