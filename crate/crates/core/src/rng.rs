//! Counter-based derivation of independent RNG streams from one master seed.
//!
//! Every random decision in a run draws from a stream keyed by
//! `(master seed, domain, indices...)`, so the result never depends on the
//! order in which workers happen to execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domains. Values are part of the reproducibility contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    /// Initial genotypes and task assignment.
    Init = 1,
    /// Task preference vectors; keyed by the task-definition seed, not the run seed.
    Tasks = 2,
    /// Mate selection shuffle, per generation.
    Mating = 3,
    /// Offspring generation, per (generation, pair).
    Offspring = 4,
    /// Validation noise, per (task, generation).
    Noise = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, domain: Domain, indices: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(domain as u64));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn stream(master: u64, domain: Domain, indices: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, domain, indices))
}
