//! Corpus plumbing shared by both models: seeded train/validation splits
//! and the token-sequence JSON-lines format.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::TokenSeq;

/// Fraction of a corpus used for training; the rest is held out.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Shuffles `0..n` with `seed` and cuts it into `(train, validation)`.
/// Both halves come back sorted so downstream iteration order is stable.
/// With `n >= 2` each half gets at least one item.
pub fn train_val_split(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut cut = (n as f64 * train_fraction).round() as usize;
    if n >= 2 {
        cut = cut.clamp(1, n - 1);
    } else {
        cut = n;
    }
    let (mut train, mut val) = (idx[..cut].to_vec(), idx[cut..].to_vec());
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// One JSON array of token ids per line.
pub fn write_token_corpus(path: &Path, seqs: &[TokenSeq]) -> Result<()> {
    let mut text = String::new();
    for s in seqs {
        text.push_str(&serde_json::to_string(s)?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_token_corpus(path: &Path) -> Result<Vec<TokenSeq>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Input(format!("{}: line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}
