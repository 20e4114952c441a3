//! Counter-based seed splitting.
//!
//! A master seed and a domain tag select a ChaCha8 key; the task index selects
//! the stream. A task's random numbers depend only on (master, domain, index),
//! never on which worker ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a domain label into a tag.
pub fn domain_tag(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStream {
    pub master: u64,
    pub domain: u64,
}

impl SeedStream {
    pub fn new(master: u64, label: &str) -> Self {
        Self { master, domain: domain_tag(label) }
    }

    pub fn child(&self, label: &str) -> Self {
        Self { master: self.master, domain: splitmix64(self.domain ^ domain_tag(label)) }
    }

    pub fn rng(&self, task: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.master ^ self.domain));
        rng.set_stream(task);
        rng
    }
}
