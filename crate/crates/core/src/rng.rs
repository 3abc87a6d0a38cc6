//! Counter-based random streams.
//!
//! Every random quantity is drawn from its own ChaCha stream whose key is
//! derived from `(seed, tag, i, j, local)`. Draws are therefore independent
//! of evaluation order and of the window over which a partition is
//! instantiated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream domains, so that colorings and fields with equal seeds differ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum Tag {
    Field = 1,
    Coloring = 2,
    Surface = 3,
    Pairs = 4,
    Ensemble = 5,
    Misc = 6,
}

/// Stream for the object identified by `(i, j, local)`.
pub fn stream(seed: u64, tag: Tag, i: i64, j: i64, local: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&(tag as u32).to_le_bytes());
    key[12..16].copy_from_slice(&(local as u32).to_le_bytes());
    key[16..24].copy_from_slice(&i.to_le_bytes());
    key[24..32].copy_from_slice(&j.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// First uniform of the stream, in `[0, 1)`.
pub fn uniform(seed: u64, tag: Tag, i: i64, j: i64, local: u64) -> f64 {
    stream(seed, tag, i, j, local).random::<f64>()
}

/// Derive a child seed, e.g. one per ensemble trial.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    stream(seed, Tag::Ensemble, index as i64, 0, 0).random::<u64>()
}
