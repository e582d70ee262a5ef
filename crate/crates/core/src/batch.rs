//! CRT lane packing: many small plaintexts folded into one integer under
//! client-only lane moduli, encrypted and evaluated as one ciphertext.
//!
//! Lanes hold nonnegative values only. Signed results (a subtraction, say)
//! are handled by offset encoding: add a public offset to the minuend
//! before packing and subtract it after unpacking.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::{CryptoRng, Rng};
use thiserror::Error;

use crate::cipher::{decrypt, encrypt_private_bounded, CipherError, Ciphertext};
use crate::keys::{KeyError, PrivateKey, PublicKey};
use crate::modmath::{capacity_check, capacity_requirement, is_prime, primes_above, ModMathError, ModulusSet, Rounding};

/// Lane moduli sit above `HEADROOM * lane_bound`.
pub const HEADROOM: u64 = 2;

const PACKING_HEADER: &str = "cmpswhe-packing v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BatchError {
    #[error("lane {lane} value {value} does not fit modulus {modulus}")]
    LaneOverflow { lane: usize, value: BigInt, modulus: u64 },
    #[error("expected {expected} lane values, got {got}")]
    LaneCount { expected: usize, got: usize },
    #[error("packed value {0} is outside [0, lane product)")]
    PackedRange(BigInt),
    #[error("invalid packing key: {0}")]
    InvalidKey(String),
    #[error("lane plan infeasible: {0}")]
    Infeasible(Box<CapacityReport>),
    #[error(transparent)]
    Modulus(#[from] ModMathError),
    #[error(transparent)]
    Cipher(#[from] CipherError),
    #[error(transparent)]
    Key(#[from] KeyError),
}

/// Client-side lane moduli. Never written into anything the server sees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackingKey {
    lanes: ModulusSet,
    lane_bound: u64,
}

impl PackingKey {
    pub fn new(lane_moduli: Vec<u64>, lane_bound: u64) -> Result<Self, BatchError> {
        if lane_moduli.is_empty() {
            return Err(BatchError::InvalidKey("no lanes".into()));
        }
        if let Some(&m) = lane_moduli.iter().find(|&&m| !is_prime(m)) {
            return Err(BatchError::InvalidKey(format!("{m} is not prime")));
        }
        let min = *lane_moduli.iter().min().expect("non-empty");
        if lane_bound >= min {
            return Err(BatchError::InvalidKey(format!(
                "lane bound {lane_bound} must be below the smallest lane modulus {min}"
            )));
        }
        Ok(Self {
            lanes: ModulusSet::new(lane_moduli)?,
            lane_bound,
        })
    }

    pub fn lanes(&self) -> usize {
        self.lanes.len()
    }

    pub fn lane_moduli(&self) -> &[u64] {
        self.lanes.moduli()
    }

    pub fn lane_bound(&self) -> u64 {
        self.lane_bound
    }

    /// `prod B_new_i`.
    pub fn product(&self) -> &BigUint {
        self.lanes.product()
    }

    pub fn to_text(&self) -> String {
        let moduli: Vec<String> = self.lane_moduli().iter().map(u64::to_string).collect();
        format!(
            "{PACKING_HEADER}\nlane_bound={}\nlane_moduli={}\n",
            self.lane_bound,
            moduli.join(",")
        )
    }

    pub fn from_text(text: &str) -> Result<Self, BatchError> {
        let bad = |m: &str| BatchError::InvalidKey(m.to_string());
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        if lines.next() != Some(PACKING_HEADER) {
            return Err(bad("missing packing key header"));
        }
        let (mut bound, mut moduli) = (None, None);
        for line in lines {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(line))?;
            match k.trim() {
                "lane_bound" => bound = Some(v.trim().parse::<u64>().map_err(|_| bad("lane_bound"))?),
                "lane_moduli" => {
                    moduli = Some(
                        v.split(',')
                            .map(|s| s.trim().parse::<u64>())
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|_| bad("lane_moduli"))?,
                    )
                }
                other => return Err(bad(&format!("unknown field `{other}`"))),
            }
        }
        Self::new(
            moduli.ok_or_else(|| bad("missing lane_moduli"))?,
            bound.ok_or_else(|| bad("missing lane_bound"))?,
        )
    }
}

/// CRT-combines one value per lane.
pub fn pack(values: &[u64], pkey: &PackingKey) -> Result<BigUint, BatchError> {
    if values.len() != pkey.lanes() {
        return Err(BatchError::LaneCount {
            expected: pkey.lanes(),
            got: values.len(),
        });
    }
    for (lane, (&v, &m)) in values.iter().zip(pkey.lane_moduli()).enumerate() {
        if v >= m {
            return Err(BatchError::LaneOverflow {
                lane,
                value: BigInt::from(v),
                modulus: m,
            });
        }
    }
    Ok(pkey.lanes.crt_reconstruct(values)?)
}

pub fn unpack(x: &BigUint, pkey: &PackingKey) -> Result<Vec<u64>, BatchError> {
    if x >= pkey.product() {
        return Err(BatchError::PackedRange(BigInt::from(x.clone())));
    }
    Ok((0..pkey.lanes()).map(|i| pkey.lanes.residue(x, i)).collect())
}

/// Unpacks a signed result by first reducing it into `[0, prod B_new)`.
pub fn unpack_signed(x: &BigInt, pkey: &PackingKey) -> Vec<u64> {
    let product = BigInt::from_biguint(Sign::Plus, pkey.product().clone());
    let reduced = x.mod_floor(&product).to_biguint().expect("reduced value is nonnegative");
    (0..pkey.lanes()).map(|i| pkey.lanes.residue(&reduced, i)).collect()
}

/// Packs and encrypts; redundant plaintexts are drawn below the lane product.
pub fn encrypt_packed<R: Rng + CryptoRng + ?Sized>(
    values: &[u64],
    pkey: &PackingKey,
    sk: &PrivateKey,
    rng: &mut R,
) -> Result<Ciphertext, BatchError> {
    let packed = pack(values, pkey)?;
    Ok(encrypt_private_bounded(BigInt::from(packed), pkey.product(), sk, rng)?)
}

/// Decrypts to the exact packed integer (nearest rounding) and unpacks.
pub fn decrypt_packed(ct: &Ciphertext, pkey: &PackingKey, sk: &PrivateKey) -> Result<Vec<u64>, BatchError> {
    let value = decrypt(ct, sk, Rounding::Nearest)?;
    Ok(unpack_signed(&value, pkey))
}

/// Outcome of a lane plan that does not fit the key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapacityReport {
    pub lanes: usize,
    pub lane_moduli: Vec<u64>,
    /// `w * (a * prod B_new)^t`; the modulus product must exceed it.
    pub required: BigUint,
    pub available: BigUint,
    pub rows: usize,
    /// Smallest row count that clears `required` with moduli the size of
    /// the key's smallest one.
    pub required_rows: usize,
}

impl std::fmt::Display for CapacityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} lanes need a modulus product above 2^{} but N={} gives 2^{}; N={} would suffice",
            self.lanes,
            self.required.bits(),
            self.rows,
            self.available.bits().saturating_sub(1),
            self.required_rows
        )
    }
}

/// Picks the `k` smallest primes above `HEADROOM * lane_bound` and checks
/// `w * (a * prod B_new)^t < B_s` for the given term count and order.
pub fn plan_lanes(k: usize, lane_bound: u64, terms: &BigUint, order: u32, pk: &PublicKey) -> Result<PackingKey, BatchError> {
    if k == 0 {
        return Err(BatchError::InvalidKey("lane count must be at least 1".into()));
    }
    let floor = lane_bound
        .checked_mul(HEADROOM)
        .ok_or_else(|| BatchError::InvalidKey("lane bound too large".into()))?;
    let moduli = primes_above(floor, k)?;
    let pkey = PackingKey::new(moduli, lane_bound)?;
    let mset = pk.mset();
    if capacity_check(pk.a(), pkey.product(), order, terms, mset) {
        return Ok(pkey);
    }
    let required = capacity_requirement(pk.a(), pkey.product(), order, terms);
    let min_bits = mset.moduli().iter().map(|&m| 63 - m.leading_zeros() as u64).min().unwrap_or(1).max(1);
    let need = required.bits() + 1;
    let required_rows = need.div_ceil(min_bits) as usize;
    Err(BatchError::Infeasible(Box::new(CapacityReport {
        lanes: k,
        lane_moduli: pkey.lane_moduli().to_vec(),
        required,
        available: mset.product().clone(),
        rows: mset.len(),
        required_rows,
    })))
}

/// Largest lane count for which the plan still fits; 0 if even one lane fails.
pub fn max_lanes(lane_bound: u64, terms: &BigUint, order: u32, pk: &PublicKey, limit: usize) -> usize {
    let mut best = 0;
    for k in 1..=limit {
        match plan_lanes(k, lane_bound, terms, order, pk) {
            Ok(_) => best = k,
            Err(_) => break,
        }
    }
    best
}

/// Bits of `x`, or 0 for zero. Handy when sizing reports.
pub fn bit_length(x: &BigUint) -> u64 {
    if x.is_zero() {
        0
    } else {
        x.bits()
    }
}

/// Worst-case decryption error of a blind product of two packed order-1
/// ciphertexts, as a float: `(2*eta_max*X)/a + eta_max^2/a^2` for packed
/// magnitude bound `X`.
pub fn packed_product_noise(eta_max: &BigUint, packed_bound: &BigUint, a: &BigUint) -> f64 {
    let lin = BigInt::from(eta_max * packed_bound * 2u32);
    let quad = BigInt::from(eta_max * eta_max);
    let a2 = a * a;
    let ratio = |n: &BigInt, d: &BigUint| -> f64 {
        let shift = d.bits().saturating_sub(52);
        let d = (d >> shift).to_f64().unwrap_or(f64::INFINITY);
        let n = n.to_f64().unwrap_or(f64::INFINITY);
        n / d / 2f64.powi(shift as i32)
    };
    ratio(&lin, a) + ratio(&quad, &a2)
}
