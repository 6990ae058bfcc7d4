//! Counter-based seed derivation.
//!
//! A child seed is a SplitMix64 hash of the parent seed and a path of
//! integer labels (stream kind, user index, episode index, ...). Children
//! depend only on their path, never on how many other streams were drawn,
//! so results do not change with the number of workers or with the
//! iteration order.

/// Stream labels used as the first path element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scenario = 1,
    Positions = 2,
    Fading = 3,
    Allocation = 4,
    Episode = 5,
    Harvest = 6,
    Gain = 7,
    InitialState = 8,
    Instance = 9,
    User = 10,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(parent), |acc, &label| {
        splitmix64(acc ^ splitmix64(label.wrapping_add(GOLDEN)))
    })
}
