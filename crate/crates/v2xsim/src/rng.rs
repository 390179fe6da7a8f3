//! Seeded random-number streams.
//!
//! One 64-bit master seed expands into independent per-(node, purpose)
//! substreams through ChaCha's counter-based stream mechanism, so adding a
//! node (or drawing more from one stream) never perturbs any other stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Exp, Uniform};

use crate::engine::NodeId;

/// What a stream is used for. Each (node, purpose) pair gets its own stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StreamPurpose {
    Placement,
    Traffic,
    Backoff,
    Selection,
    Reception,
    Mobility,
}

impl StreamPurpose {
    fn id(self) -> u64 {
        match self {
            StreamPurpose::Placement => 0,
            StreamPurpose::Traffic => 1,
            StreamPurpose::Backoff => 2,
            StreamPurpose::Selection => 3,
            StreamPurpose::Reception => 4,
            StreamPurpose::Mobility => 5,
        }
    }
}

/// A deterministic substream of the master seed.
pub struct RngStream {
    rng: ChaCha8Rng,
}

fn expand_seed(master: u64) -> [u8; 32] {
    // splitmix64 over the master seed fills the 256-bit ChaCha key.
    let mut out = [0u8; 32];
    let mut x = master;
    for chunk in out.chunks_exact_mut(8) {
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    out
}

impl RngStream {
    pub fn new(master_seed: u64, node: NodeId, purpose: StreamPurpose) -> Self {
        let mut rng = ChaCha8Rng::from_seed(expand_seed(master_seed));
        rng.set_stream(((node.0 as u64) << 8) | purpose.id());
        RngStream { rng }
    }

    /// Stream not tied to a node (scenario construction, aggregation).
    pub fn global(master_seed: u64, purpose: StreamPurpose) -> Self {
        Self::new(master_seed, NodeId(u32::MAX), purpose)
    }

    pub fn uniform01(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        Uniform::new_inclusive(lo, hi).sample(&mut self.rng)
    }

    /// Uniform integer over the inclusive range [lo, hi].
    pub fn uniform_int(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        self.rng.gen_range(lo..=hi)
    }

    /// Exponential with the given mean (not rate).
    pub fn exponential(&mut self, mean: f64) -> f64 {
        assert!(mean > 0.0, "exponential mean must be positive");
        Exp::new(1.0 / mean).unwrap().sample(&mut self.rng)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        assert!((0.0..=1.0).contains(&p), "bernoulli p must lie in [0,1]");
        Bernoulli::new(p).unwrap().sample(&mut self.rng)
    }

    /// Fisher-Yates shuffle, driven by this stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.rng.gen_range(0..=i as u64) as usize;
            items.swap(i, j);
        }
    }
}

/// Named distributions for config-driven draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    Uniform,
    Exponential { mean: f64 },
    Bernoulli { p: f64 },
}

impl Dist {
    /// Parameter check, surfaced as a configuration error by callers.
    pub fn validate(self) -> Result<(), String> {
        match self {
            Dist::Uniform => Ok(()),
            Dist::Exponential { mean } if mean > 0.0 => Ok(()),
            Dist::Exponential { mean } => Err(format!("exponential mean must be > 0, got {mean}")),
            Dist::Bernoulli { p } if (0.0..=1.0).contains(&p) => Ok(()),
            Dist::Bernoulli { p } => Err(format!("bernoulli p must lie in [0,1], got {p}")),
        }
    }
}

/// Sample the named distribution. Uniform is over [0,1); bernoulli yields
/// 0.0 or 1.0.
pub fn draw(stream: &mut RngStream, dist: Dist) -> f64 {
    match dist {
        Dist::Uniform => stream.uniform01(),
        Dist::Exponential { mean } => stream.exponential(mean),
        Dist::Bernoulli { p } => {
            if stream.bernoulli(p) {
                1.0
            } else {
                0.0
            }
        }
    }
}
