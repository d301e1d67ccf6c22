//! Random streams.
//!
//! Every run is driven by a ChaCha8 stream selected by `(seed, stream)`.
//! Sequential draws (photon placement, seed selection, source sampling) come
//! from the start of the stream. Crosstalk attempts use a separate region of
//! the same stream addressed by word position: the attempt from cell `a` in
//! direction `d` always reads word `EDGE_REGION + 4a + d`. An attempt's
//! uniform therefore does not depend on which other attempts happened, so
//! two runs with the same `(seed, stream)` and different crosstalk
//! probabilities are coupled draw for draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub type RunRng = ChaCha8Rng;

/// First word of the crosstalk-attempt region inside a stream.
pub(crate) const EDGE_REGION: u128 = 1 << 40;

/// `(seed, stream)` pair identifying one run's random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub const fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub const fn with_stream(self, stream: u64) -> Self {
        Self {
            seed: self.seed,
            stream,
        }
    }

    /// Fresh generator positioned at word 0 of the stream.
    pub fn rng(&self) -> RunRng {
        StreamKey::new(self.seed).stream(self.stream)
    }
}

/// Seeded generator that is cloned once per run, so the key expansion is
/// paid once per ensemble.
#[derive(Clone, Debug)]
pub struct StreamKey {
    base: ChaCha8Rng,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn stream(&self, stream: u64) -> RunRng {
        let mut rng = self.base.clone();
        rng.set_stream(stream);
        rng
    }
}

/// Convert a probability into the integer threshold used for Bernoulli
/// trials on 32-bit uniforms: a trial with uniform `u` succeeds iff
/// `u < threshold(p)`.
#[inline]
pub fn threshold(p: f64) -> u64 {
    let scaled = libm::round(p * 4_294_967_296.0);
    if scaled <= 0.0 {
        0
    } else if scaled >= 4_294_967_296.0 {
        1 << 32
    } else {
        scaled as u64
    }
}
