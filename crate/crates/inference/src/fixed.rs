use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{pow, Zero};

use crate::InferenceError;

/// `floor(10^n * f)`, computed exactly on the shortest decimal string that
/// round-trips `f`, so `0.29` at `n = 2` gives 29 and not 28.
pub fn to_fixed(f: f64, n: u32) -> Result<BigInt, InferenceError> {
    if !f.is_finite() {
        return Err(InferenceError::NonFinite(f));
    }
    if f == 0.0 {
        return Ok(BigInt::zero());
    }
    // `{:e}` gives the shortest representation as `[-]d[.ddd]e[-]k`
    let text = format!("{f:e}");
    let (mantissa, exp) = text.split_once('e').expect("exponent form");
    let exp: i64 = exp.parse().expect("integer exponent");
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: BigInt = format!("{int_part}{frac_part}").parse().expect("decimal digits");
    let shift = n as i64 + exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    Ok(if shift >= 0 {
        digits * pow(ten, shift as usize)
    } else {
        digits.div_floor(&pow(ten, (-shift) as usize))
    })
}

/// `pixel / 255` on the `10^n` grid, rounded to nearest with halves up.
pub fn fixed_pixel(pixel: u8, n: u32) -> i64 {
    let scale = 10i64.pow(n);
    (2 * pixel as i64 * scale + 255).div_euclid(510)
}
