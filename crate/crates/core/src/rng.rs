//! Seed derivation.
//!
//! Every run is driven by one root seed. Independent consumers draw from
//! their own stream, derived by mixing the root seed with a fixed per-stream
//! constant through SplitMix64, so any component can be reproduced in
//! isolation from `(root, stream)` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Split,
    Init,
    Dropout,
    TeacherInit,
    TeacherTrain,
    TeacherSample,
    Analysis,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Split => 0x5350_4c49_5400_0001,
            Stream::Init => 0x494e_4954_0000_0002,
            Stream::Dropout => 0x4452_4f50_0000_0003,
            Stream::TeacherInit => 0x5449_4e49_0000_0004,
            Stream::TeacherTrain => 0x5454_524e_0000_0005,
            Stream::TeacherSample => 0x5453_4d50_0000_0006,
            Stream::Analysis => 0x414e_4c59_0000_0007,
        }
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `stream` under `root`.
pub fn derive_seed(root: u64, stream: Stream) -> u64 {
    splitmix64(root ^ stream.tag())
}

pub fn stream_rng(root: u64, stream: Stream) -> Rng {
    Rng::seed_from_u64(derive_seed(root, stream))
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
