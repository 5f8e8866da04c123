use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream key for one generator stage of one entity. Distinct keys give
/// independent streams, so trials can be generated in any order.
pub(crate) fn derive(seed: u64, tag: u64, index: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag, index))
}

pub(crate) const SCENE: u64 = 1;
pub(crate) const OBSERVER: u64 = 2;
pub(crate) const TRIAL: u64 = 3;
pub(crate) const GAZE: u64 = 4;
pub(crate) const LABELS: u64 = 5;
pub(crate) const VIEWS: u64 = 6;
