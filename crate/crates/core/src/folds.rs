use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Shuffled K-fold partition of `0..n`. Each fold is returned sorted;
/// fold sizes differ by at most one.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::argument(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::argument(format!(
            "cannot split {n} instances into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Complement of `fold` within `0..n`, in ascending order.
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut held = vec![false; n];
    for &i in fold {
        held[i] = true;
    }
    (0..n).filter(|&i| !held[i]).collect()
}

/// Mixes a base seed with a stream index (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
