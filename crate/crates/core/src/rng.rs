//! Seeded randomness. One scenario seed fans out into fixed ChaCha streams
//! so each consumer draws independently of the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Sensor = 1,
    Iv = 2,
    Attacker = 3,
    FrameLoss = 4,
    BenchNetwork = 5,
    BenchLoss = 6,
    BenchGap = 7,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
