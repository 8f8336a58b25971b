//! Seed splitting.
//!
//! Every realization owns a stream derived from `(base seed, q index,
//! realization index)`, and inside a realization the generation phase and
//! every node get their own substream. Streams are `Xoshiro256PlusPlus`
//! seeded via `seed_from_u64`, which is stable across platforms.
//!
//! Mixing uses the SplitMix64 finalizer:
//!
//! ```text
//! realization_seed = mix(mix(mix(base) ^ q_index) ^ realization)
//! substream(k)     = mix(realization_seed ^ mix(k + 1))      k = 0 generation, k = 1 + node
//! ```

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::lattice::NodeId;
use crate::protocol::{PoolSlot, StepRandomness, SwapPool};

pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn realization_seed(base_seed: u64, q_index: u64, realization: u64) -> u64 {
    mix(mix(mix(base_seed) ^ q_index) ^ realization)
}

pub fn substream_seed(realization_seed: u64, stream: u64) -> u64 {
    mix(realization_seed ^ mix(stream.wrapping_add(1)))
}

/// Random source for one realization.
pub struct RealizationRng {
    generation: Xoshiro256PlusPlus,
    nodes: Vec<Xoshiro256PlusPlus>,
}

impl RealizationRng {
    pub fn new(seed: u64, node_count: usize) -> Self {
        RealizationRng {
            generation: Xoshiro256PlusPlus::seed_from_u64(substream_seed(seed, 0)),
            nodes: (0..node_count as u64)
                .map(|i| Xoshiro256PlusPlus::seed_from_u64(substream_seed(seed, i + 1)))
                .collect(),
        }
    }
}

impl StepRandomness for RealizationRng {
    fn generation(&mut self, _channel: usize, p: f64) -> bool {
        self.generation.gen_bool(p)
    }

    fn coin(&mut self, node: NodeId, p: f64) -> bool {
        self.nodes[node as usize].gen_bool(p)
    }

    fn draw_pair(&mut self, node: NodeId, pool: &SwapPool) -> (PoolSlot, PoolSlot) {
        let rng = &mut self.nodes[node as usize];
        let first = pool.slot_at(rng.gen_range(0..pool.len()), None);
        let eligible = pool.len() - pool.bucket_len(first.bucket);
        let second = pool.slot_at(rng.gen_range(0..eligible), Some(first.bucket));
        (first, second)
    }
}
