//! Frame difference over CRT-packed pixels.
//!
//! Each group of `k` pixels becomes one ciphertext. The current frame is
//! offset by 256 before packing so every lane of `cur + 256 - prev` stays
//! in `[1, 511]`; the client removes the offset after unpacking.

use cmpswhe::batch::{decrypt_packed, encrypt_packed, plan_lanes, PackingKey};
use cmpswhe::{Ciphertext, Evaluator, PrivateKey, PublicKey};
use num_bigint::BigUint;
use rand::{CryptoRng, Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::frame::Frame;
use crate::VisionError;

pub const PIXEL_OFFSET: u64 = 256;
/// Largest lane value of the kernel: 255 + 256.
pub const LANE_BOUND: u64 = 512;

/// Lane plan for the kernel: one subtraction of two order-1 inputs.
pub fn kernel_packing_key(k: usize, pk: &PublicKey) -> Result<PackingKey, VisionError> {
    Ok(plan_lanes(k, LANE_BOUND, &BigUint::from(2u32), 1, pk)?)
}

pub fn encrypt_groups<R: Rng + CryptoRng + ?Sized>(
    f: &Frame,
    offset: u64,
    pkey: &PackingKey,
    sk: &PrivateKey,
    rng: &mut R,
) -> Result<Vec<Ciphertext>, VisionError> {
    let k = pkey.lanes();
    let seed: [u8; 32] = rng.gen();
    f.data()
        .par_chunks(k)
        .enumerate()
        .map(|(i, chunk)| {
            let mut r = ChaCha20Rng::from_seed(seed);
            r.set_stream(i as u64);
            let mut lanes: Vec<u64> = chunk.iter().map(|&p| p as u64 + offset).collect();
            lanes.resize(k, offset);
            Ok(encrypt_packed(&lanes, pkey, sk, &mut r)?)
        })
        .collect()
}

/// Blind `cur - prev` per packed group.
pub fn diff_groups(prev: &[Ciphertext], cur: &[Ciphertext], pk: &PublicKey) -> Result<Vec<Ciphertext>, VisionError> {
    if prev.len() != cur.len() {
        return Err(VisionError::Dimension("group counts differ".into()));
    }
    let ev = Evaluator::new(pk);
    prev.par_iter()
        .zip(cur.par_iter())
        .map(|(p, c)| Ok(ev.sub(c, p)?))
        .collect()
}

/// Decrypts, unpacks and removes the offset; returns `cur - prev` per pixel.
pub fn decrypt_groups(groups: &[Ciphertext], pixels: usize, pkey: &PackingKey, sk: &PrivateKey) -> Result<Vec<i64>, VisionError> {
    let lanes: Vec<Vec<u64>> = groups
        .par_iter()
        .map(|g| Ok(decrypt_packed(g, pkey, sk)?))
        .collect::<Result<_, VisionError>>()?;
    Ok(lanes
        .into_iter()
        .flatten()
        .take(pixels)
        .map(|v| v as i64 - PIXEL_OFFSET as i64)
        .collect())
}

/// Client encrypts, server subtracts, client decrypts.
pub fn packed_frame_diff<R: Rng + CryptoRng + ?Sized>(
    prev: &Frame,
    cur: &Frame,
    pkey: &PackingKey,
    sk: &PrivateKey,
    rng: &mut R,
) -> Result<Vec<i64>, VisionError> {
    prev.same_shape(cur)?;
    let p = encrypt_groups(prev, 0, pkey, sk, rng)?;
    let c = encrypt_groups(cur, PIXEL_OFFSET, pkey, sk, rng)?;
    let d = diff_groups(&p, &c, sk.public())?;
    decrypt_groups(&d, prev.data().len(), pkey, sk)
}
