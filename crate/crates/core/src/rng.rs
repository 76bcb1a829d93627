//! Seeded random streams.
//!
//! Every random quantity comes from a ChaCha8 generator keyed by a 64-bit
//! seed. One seed drives two independent streams: [`MATRIX_STREAM`] for
//! weight matrices and [`STATE_STREAM`] for initial states, so drawing a
//! different initial state never changes the matrix and vice versa.
//!
//! Sweeps derive per-run seeds from a global seed with [`derive_seed`], a
//! SplitMix64 hash of `(global, counter)`. The counter is the replicate index
//! (or the run's position in a config file), so appending runs never perturbs
//! seeds that already exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub const MATRIX_STREAM: u64 = 0;
pub const STATE_STREAM: u64 = 1;

/// Generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-run seed for position `counter` under `global`.
pub fn derive_seed(global: u64, counter: u64) -> u64 {
    splitmix64(splitmix64(global) ^ counter.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Initial state with i.i.d. `Normal(0, std²)` components drawn from the state stream.
pub fn gaussian_state(dim: usize, std: f64, seed: u64) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let normal = Normal::new(0.0, std)
        .map_err(|_| Error::invalid(format!("state std must be finite and >= 0, got {std}")))?;
    let mut rng = stream(seed, STATE_STREAM);
    Ok((0..dim).map(|_| normal.sample(&mut rng)).collect())
}
