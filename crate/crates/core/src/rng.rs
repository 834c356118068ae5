//! Labeled random substreams.
//!
//! One master seed spawns an independent ChaCha stream per (label, coordinates)
//! tuple, so adding a new consumer never shifts the draws seen by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    InitDesign,
    GpFit,
    Pam,
    SvmCv,
    Swarm,
    Perturbation,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::InitDesign => 0x1d,
            Stream::GpFit => 0x6f,
            Stream::Pam => 0x9a,
            Stream::SvmCv => 0x5c,
            Stream::Swarm => 0x50,
            Stream::Perturbation => 0xe7,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive the stream for `label` at the given coordinates (iteration, path hash, ...).
    pub fn derive(&self, label: Stream, coords: &[u64]) -> StreamRng {
        let mut h = splitmix64(self.seed ^ splitmix64(label.tag()));
        for &c in coords {
            h = splitmix64(h ^ splitmix64(c.wrapping_add(0x632b_e59b_d9b4_e019)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        rng.set_stream(label.tag());
        rng
    }
}
