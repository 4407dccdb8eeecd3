//! Named random streams.
//!
//! Every replicate seed fans out into independent ChaCha streams, one per
//! purpose, so that outcome generation and assignment sampling never share
//! state. Two designs run on the same replicate therefore see the same
//! potential-outcome table and the same assignment uniforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Outcomes,
    Assignment,
    /// Monte Carlo draws inside a policy (Thompson sampling with K > 2).
    Policy,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Outcomes => 1,
            Stream::Assignment => 2,
            Stream::Policy => 3,
        }
    }
}

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, purpose: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose.id());
    rng
}
