//! Reproducible random substreams.
//!
//! A [`RandomStream`] is identified by a root seed and a path of indices,
//! typically `(replication, stratum)`. The generator state is a pure function
//! of `(root, path)`, so draws never depend on thread count or on the order in
//! which sibling streams are consumed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Where a stream came from; embedded in plans and reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamProvenance {
    pub root_seed: u64,
    pub path: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    root: u64,
    path: Vec<u64>,
    key: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(root_seed: u64) -> Self {
        Self::from_parts(root_seed, Vec::new())
    }

    /// Rebuild a stream from recorded provenance.
    pub fn from_provenance(p: &StreamProvenance) -> Self {
        Self::from_parts(p.root_seed, p.path.clone())
    }

    fn from_parts(root: u64, path: Vec<u64>) -> Self {
        let mut key = mix64(root ^ 0x243F_6A88_85A3_08D3);
        for &idx in &path {
            key = mix64(key ^ mix64(idx.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        }
        let mut seed = [0u8; 32];
        let mut state = key;
        for chunk in seed.chunks_exact_mut(8) {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        Self {
            root,
            path,
            key,
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    /// Child stream at `path ++ [index]`. Does not advance `self`.
    pub fn child(&self, index: u64) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(index);
        Self::from_parts(self.root, path)
    }

    pub fn provenance(&self) -> StreamProvenance {
        StreamProvenance {
            root_seed: self.root,
            path: self.path.clone(),
        }
    }

    /// Identifier of the stream's position in the tree (not of its state).
    pub fn key(&self) -> u64 {
        self.key
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.rng.next_u64() >> 11) as f64 * SCALE
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
