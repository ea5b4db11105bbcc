//! Seeded, splittable random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 generator keyed
//! by the user seed. Independent work items get independent ChaCha streams:
//! the 64-bit stream id is `mix(label_hash, replica)`, where `label_hash` is
//! the first eight bytes of SHA-256 over the label path and `mix` is the
//! SplitMix64 finaliser. Replica `i` of a labelled estimate therefore always
//! sees the same numbers, whatever the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
    label_hash: u64,
    label: String,
}

fn hash_label(parent: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Streams {
    pub fn new(seed: u64, label: &str) -> Self {
        Self { seed, label_hash: hash_label(0, label), label: label.to_string() }
    }

    /// A sub-family of streams, independent of the parent's.
    pub fn child(&self, label: &str) -> Self {
        Self {
            seed: self.seed,
            label_hash: hash_label(self.label_hash, label),
            label: format!("{}/{}", self.label, label),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn stream_id(&self, replica: u64) -> u64 {
        mix64(self.label_hash ^ mix64(replica))
    }

    /// Generator for one replica.
    pub fn rng(&self, replica: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id(replica));
        rng
    }
}
