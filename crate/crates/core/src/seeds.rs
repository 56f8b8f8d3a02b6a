//! Named, index-addressable random streams derived from one master seed.
//!
//! Each `(stream, index)` pair selects an independent ChaCha stream, so the
//! draws used at training iteration `i` do not depend on how many draws were
//! consumed before it. A resumed run therefore replays exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Sampling = 2,
    Augmentation = 3,
    Dropout = 4,
    Synthesis = 5,
    Evaluation = 6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    master: u64,
}

impl SeedStreams {
    pub fn new(master: u64) -> Self {
        SeedStreams { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn rng(&self, stream: Stream, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(((stream as u64) << 48) ^ index);
        rng
    }
}
