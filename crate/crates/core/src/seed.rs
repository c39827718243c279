//! Child-seed derivation.
//!
//! Every random quantity is drawn from a ChaCha8 stream whose seed is
//! `derive(global, stream, index)`: a splitmix64 chain over the three words.
//! A stream tag separates the consumers (localization RIS profiles, secrecy
//! fading, coexistence switching, ...) and `index` is usually a grid cell or
//! a draw number, so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const LOCALIZATION_PROFILES: u64 = 0x4c4f_4341;
pub const LOCALIZATION_NOISE: u64 = 0x4c4e_4f49;
pub const SECRECY_FIXED: u64 = 0x5345_4346;
pub const SECRECY_RX: u64 = 0x5345_4352;
pub const COEXIST: u64 = 0x434f_4558;
pub const SOUNDING: u64 = 0x534f_554e;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(global: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(global) ^ stream) ^ index)
}

pub fn rng(global: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(global, stream, index))
}
