use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::bset::BFamily;
use crate::error::Result;
use crate::par::Parallelism;
use crate::sieve::{self, EtaWindow};

/// `eta` AND an i.i.d. fair-coin word.
///
/// The coins come from `ChaCha8Rng::seed_from_u64(seed)`: bit `i` of the window
/// is bit `i % 64` of the `(i / 64)`-th `next_u64` output.
pub fn sample_max_entropy(
    family: &BFamily,
    start: i64,
    len: u64,
    seed: u64,
    par: Parallelism,
) -> Result<EtaWindow> {
    let eta = sieve::sieve_window(family, start, len, par)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<u64> = eta.words().iter().map(|&w| w & rng.next_u64()).collect();
    Ok(EtaWindow::from_words(start, len, words, eta.moduli.clone()))
}
