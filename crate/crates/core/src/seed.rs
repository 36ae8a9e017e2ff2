//! Seed derivation for independent, reproducible random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded with a
//! value produced by [`derive_seed`]. The mixing function is frozen: changing
//! it changes every fitted model.
//!
//! ```text
//! derive_seed(master, tag, index) = splitmix64(splitmix64(master ^ tag) ^ index)
//! ```
//!
//! `tag` is one of the role constants below, so the stream used for the
//! bootstrap resample of tree 3 never coincides with the stream used for the
//! GBRT subsample of stage 3.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_BOOTSTRAP: u64 = 0x6f6f_7473_7472_6170; // "bootstrap"
pub const TAG_FOREST_TREE: u64 = 0x7266_5f74_7265_6573; // "rf_trees"
pub const TAG_NODE_FEATURES: u64 = 0x6e6f_6465_5f66_6561; // "node_fea"
pub const TAG_GBRT_SUBSAMPLE: u64 = 0x6762_7274_5f73_7562; // "gbrt_sub"
pub const TAG_GBRT_TREE: u64 = 0x6762_7274_5f74_7265; // "gbrt_tre"
pub const TAG_TTV_SPLIT: u64 = 0x7474_765f_7370_6c69; // "ttv_spli"
pub const TAG_TTV_FOLDS: u64 = 0x7474_765f_666f_6c64; // "ttv_fold"

/// One round of the SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ tag) ^ index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
