//! Root-seed partitioning. Every random stream in the toolkit is derived from
//! one root seed plus a subsystem tag, so changing how one subsystem draws
//! numbers never shifts another's stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Split,
    Patches,
    Init,
    Tsne,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Split => 0x7370_6c69,
            Stream::Patches => 0x7061_7463,
            Stream::Init => 0x696e_6974,
            Stream::Tsne => 0x7473_6e65,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `stream`, further keyed by `path` (e.g. epoch and batch index).
pub fn derive(root: u64, stream: Stream, path: &[u64]) -> u64 {
    let mut h = splitmix64(root ^ splitmix64(stream.tag()));
    for &p in path {
        h = splitmix64(h ^ p.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    }
    h
}

pub fn rng(root: u64, stream: Stream, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, stream, path))
}
