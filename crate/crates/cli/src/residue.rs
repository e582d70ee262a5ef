//! Residue images: one modulus row of an encrypted image, drawn as 8-bit
//! grey levels.

use anyhow::{bail, Result};
use cmpswhe::PrivateKey;
use cmpswhe_vision::{encrypt_frame, Frame};
use rand::{CryptoRng, Rng};

/// 256-level horizontal ramp, `height` rows.
pub fn gradient(height: usize) -> Frame {
    Frame::from_fn(256, height, |x, _| x as u8)
}

/// Encrypts `img` and maps residue `r` of row `row` (at `slot`, or the real
/// slot when `None`) to `floor(256 r / b_row)`.
pub fn residue_image<R: Rng + CryptoRng + ?Sized>(
    img: &Frame,
    sk: &PrivateKey,
    row: usize,
    slot: Option<usize>,
    rng: &mut R,
) -> Result<Frame> {
    let pk = sk.public();
    if row >= pk.rows() {
        bail!("row {row} out of range, key has {} moduli", pk.rows());
    }
    let slot = slot.unwrap_or(sk.template()[row]);
    if slot >= pk.slots() {
        bail!("slot {slot} out of range, key has {} slots", pk.slots());
    }
    let m = pk.mset().moduli()[row] as u128;
    let enc = encrypt_frame(img, sk, rng)?;
    let data = enc.cells().iter().map(|ct| (ct.get(row, slot) as u128 * 256 / m) as u8).collect();
    Ok(Frame::new(img.width(), img.height(), data)?)
}
