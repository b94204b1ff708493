//! Keyed random streams.
//!
//! Every stochastic draw in the simulator is addressed by `(seed, domain,
//! index)` so that, for example, the noise on LiDAR ray 1234 at tick 57 does
//! not depend on how many other rays happened to hit something. Runs that
//! differ only in the follower's behaviour therefore see the same sensor noise
//! and the same message drops.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

pub(crate) const DOMAIN_LIDAR: u64 = 0x4c49_4441_5200_0001;
pub(crate) const DOMAIN_DELAY: u64 = 0x4143_4400_0000_0002;
pub(crate) const DOMAIN_DROP: u64 = 0x414d_4400_0000_0003;
pub(crate) const DOMAIN_SPAWN: u64 = 0x5350_4157_4e00_0004;
pub(crate) const DOMAIN_SPLIT: u64 = 0x5350_4c49_5400_0005;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for one `(seed, domain, index)` address.
pub fn keyed(seed: u64, domain: u64, index: u64) -> Pcg64Mcg {
    let key = splitmix(splitmix(splitmix(seed) ^ domain) ^ index);
    Pcg64Mcg::seed_from_u64(key)
}

/// Two-level address, e.g. `(tick, ray)`.
pub fn keyed2(seed: u64, domain: u64, outer: u64, inner: u64) -> Pcg64Mcg {
    keyed(splitmix(seed ^ outer.rotate_left(17)), domain, inner)
}
