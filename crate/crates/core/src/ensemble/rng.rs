use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies one independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStreamKey {
    pub master_seed: u64,
    pub trial_index: u64,
    pub field_index: u32,
}

impl RngStreamKey {
    pub fn new(master_seed: u64, trial_index: u64, field_index: u32) -> Self {
        RngStreamKey {
            master_seed,
            trial_index,
            field_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        StreamFactory::new(self.master_seed).stream(self.trial_index, self.field_index)
    }
}

/// Builds ChaCha8 streams for a fixed master seed.
///
/// The ChaCha key is `(master_seed, field_index)` and the 64-bit stream id is
/// the trial index, so every `(trial, field)` pair gets its own stream of
/// unbounded length and no two pairs share keystream.
#[derive(Clone, Copy, Debug)]
pub struct StreamFactory {
    master_seed: u64,
}

impl StreamFactory {
    pub fn new(master_seed: u64) -> Self {
        StreamFactory { master_seed }
    }

    pub fn stream(&self, trial_index: u64, field_index: u32) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..12].copy_from_slice(&field_index.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(trial_index);
        rng
    }
}

/// Derive an independent master seed for sub-experiment `index`
/// (SplitMix64 finalizer over `master ^ golden·(index+1)`).
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
