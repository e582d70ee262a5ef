//! Word-sized modular arithmetic, CRT reconstruction over a [`ModulusSet`],
//! prime-pool generation and the capacity inequality.
//!
//! Moduli are primes below 2^63 so every product of two residues fits in a
//! `u128`. Everything wider (the CRT product, reconstructed values,
//! amplified plaintexts) is a [`BigUint`] and stays nonnegative until
//! [`centered`] is applied at decryption time.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Pow, Zero};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Largest supported modulus bit width. Keeps `2 * b` and sums of two
/// residues inside a `u64`.
pub const MAX_MODULUS_BITS: u32 = 62;

/// Number of `2^(64 l) mod b` powers cached per modulus.
pub const LIMB_TABLE: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModMathError {
    #[error("{x} is not invertible modulo {m}")]
    NotInvertible { x: u64, m: u64 },
    #[error("dimension mismatch: expected {expected} residues, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("residue {residue} at position {index} is not below its modulus {modulus}")]
    ResidueOutOfRange {
        index: usize,
        residue: u64,
        modulus: u64,
    },
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} appears more than once")]
    DuplicateModulus(u64),
    #[error("modulus {0} exceeds the supported width of {MAX_MODULUS_BITS} bits")]
    ModulusTooWide(u64),
    #[error("a modulus set needs at least one modulus")]
    Empty,
    #[error("prime pool start of 2^{0} is outside the supported range")]
    StartBitsOutOfRange(u32),
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
pub fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    let s = a + b;
    if s >= m {
        s - m
    } else {
        s
    }
}

#[inline]
pub fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    // (a - b + m) mod m, with both operands already reduced
    if a >= b {
        a - b
    } else {
        a + m - b
    }
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `x` modulo `m` by the extended Euclidean algorithm.
pub fn mod_inverse(x: u64, m: u64) -> Result<u64, ModMathError> {
    let x_red = x % m;
    if x_red == 0 || m < 2 {
        return Err(ModMathError::NotInvertible { x, m });
    }
    let (mut old_r, mut r) = (x_red as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return Err(ModMathError::NotInvertible { x, m });
    }
    Ok(old_s.rem_euclid(m as i128) as u64)
}

/// Deterministic Miller-Rabin, exact for every `u64`.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The `count` smallest primes that are `>= 2^start_bits`.
pub fn gen_prime_pool(start_bits: u32, count: usize) -> Result<Vec<u64>, ModMathError> {
    if start_bits >= MAX_MODULUS_BITS {
        return Err(ModMathError::StartBitsOutOfRange(start_bits));
    }
    let mut pool = Vec::with_capacity(count);
    let mut candidate = 1u64 << start_bits;
    while pool.len() < count {
        if is_prime(candidate) {
            pool.push(candidate);
        }
        candidate += 1;
        if candidate >> MAX_MODULUS_BITS != 0 {
            return Err(ModMathError::StartBitsOutOfRange(start_bits));
        }
    }
    Ok(pool)
}

/// The `count` smallest primes strictly greater than `floor`.
pub fn primes_above(floor: u64, count: usize) -> Result<Vec<u64>, ModMathError> {
    let mut out = Vec::with_capacity(count);
    let mut candidate = floor.checked_add(1).ok_or(ModMathError::ModulusTooWide(floor))?;
    while out.len() < count {
        if candidate >> MAX_MODULUS_BITS != 0 {
            return Err(ModMathError::ModulusTooWide(candidate));
        }
        if is_prime(candidate) {
            out.push(candidate);
        }
        candidate += 1;
    }
    Ok(out)
}

/// An ordered group of distinct primes with the CRT weights
/// `B_i * (B_i^-1 mod b_i)` precomputed.
#[derive(Debug, Clone)]
pub struct ModulusSet {
    moduli: Vec<u64>,
    product: BigUint,
    crt_weights: Vec<BigUint>,
    limb_powers: Vec<[u64; LIMB_TABLE]>,
    reducers: Vec<Reducer>,
    fingerprint: u64,
}

impl PartialEq for ModulusSet {
    fn eq(&self, other: &Self) -> bool {
        self.moduli == other.moduli
    }
}

impl Eq for ModulusSet {}

impl ModulusSet {
    pub fn new(moduli: Vec<u64>) -> Result<Self, ModMathError> {
        if moduli.is_empty() {
            return Err(ModMathError::Empty);
        }
        for (i, &b) in moduli.iter().enumerate() {
            if b >> MAX_MODULUS_BITS != 0 {
                return Err(ModMathError::ModulusTooWide(b));
            }
            if !is_prime(b) {
                return Err(ModMathError::NotPrime(b));
            }
            if moduli[..i].contains(&b) {
                return Err(ModMathError::DuplicateModulus(b));
            }
        }

        let product: BigUint = moduli.iter().map(|&b| BigUint::from(b)).product();
        let mut crt_weights = Vec::with_capacity(moduli.len());
        for &b in &moduli {
            let cofactor = &product / b;
            let cofactor_mod = residue_of(&cofactor, b);
            let inv = mod_inverse(cofactor_mod, b)?;
            crt_weights.push(cofactor * inv);
        }

        let limb_powers = moduli
            .iter()
            .map(|&b| {
                let shift = pow_mod(2, 64, b);
                let mut table = [0u64; LIMB_TABLE];
                table[0] = 1 % b;
                for l in 1..LIMB_TABLE {
                    table[l] = mul_mod(table[l - 1], shift, b);
                }
                table
            })
            .collect();

        let moduli_copy = moduli.clone();
        let mut hasher = Sha256::new();
        for b in &moduli {
            hasher.update(b.to_be_bytes());
        }
        let digest = hasher.finalize();
        let fingerprint = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));

        Ok(Self {
            moduli,
            product,
            crt_weights,
            limb_powers,
            reducers: moduli_copy.iter().map(|&b| Reducer::new(b)).collect(),
            fingerprint,
        })
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    /// `B_s`, the product of all moduli.
    pub fn product(&self) -> &BigUint {
        &self.product
    }

    pub fn crt_weights(&self) -> &[BigUint] {
        &self.crt_weights
    }

    /// Short content hash of the moduli; carried in ciphertext headers.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn max_modulus(&self) -> u64 {
        *self.moduli.iter().max().expect("non-empty")
    }

    /// The unique value in `[0, B_s)` with the given residues.
    pub fn crt_reconstruct(&self, residues: &[u64]) -> Result<BigUint, ModMathError> {
        if residues.len() != self.moduli.len() {
            return Err(ModMathError::DimensionMismatch {
                expected: self.moduli.len(),
                got: residues.len(),
            });
        }
        let mut acc = BigUint::zero();
        for (index, ((&r, &b), w)) in residues
            .iter()
            .zip(&self.moduli)
            .zip(&self.crt_weights)
            .enumerate()
        {
            if r >= b {
                return Err(ModMathError::ResidueOutOfRange {
                    index,
                    residue: r,
                    modulus: b,
                });
            }
            if r != 0 {
                acc += w * r;
            }
        }
        Ok(acc % &self.product)
    }

    pub fn reducer(&self, i: usize) -> &Reducer {
        &self.reducers[i]
    }

    /// `2^(64 l) mod b_i` for `l < LIMB_TABLE`.
    pub fn limb_power(&self, i: usize, l: usize) -> u64 {
        self.limb_powers[i][l]
    }

    /// `value mod b_i` using the cached limb powers.
    pub fn residue(&self, value: &BigUint, i: usize) -> u64 {
        let b = self.moduli[i];
        let table = &self.limb_powers[i];
        let mut acc: u128 = 0;
        for (l, digit) in value.iter_u64_digits().enumerate() {
            let weight = if l < LIMB_TABLE {
                table[l]
            } else {
                // wider than the table; fall back to direct reduction
                return residue_of(value, b);
            };
            let term = digit as u128 * weight as u128;
            acc = match acc.checked_add(term) {
                Some(s) => s,
                None => (acc % b as u128) + term,
            };
        }
        (acc % b as u128) as u64
    }

    /// `value mod b_i` for a signed value, mapped into `[0, b_i)`.
    pub fn signed_residue(&self, value: &BigInt, i: usize) -> u64 {
        let r = self.residue(value.magnitude(), i);
        if value.sign() == Sign::Minus && r != 0 {
            self.moduli[i] - r
        } else {
            r
        }
    }

    /// Residues of `value` on every modulus.
    pub fn residues(&self, value: &BigInt) -> Vec<u64> {
        (0..self.moduli.len())
            .map(|i| self.signed_residue(value, i))
            .collect()
    }
}

/// Barrett reduction of 128-bit values by a fixed modulus below 2^62.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reducer {
    m: u64,
    mu: u128,
}

fn mulhi128(a: u128, b: u128) -> u128 {
    let (a_lo, a_hi) = (a as u64 as u128, a >> 64);
    let (b_lo, b_hi) = (b as u64 as u128, b >> 64);
    let lolo = a_lo * b_lo;
    let lohi = a_lo * b_hi;
    let hilo = a_hi * b_lo;
    let hihi = a_hi * b_hi;
    let mid = (lolo >> 64) + (lohi as u64 as u128) + (hilo as u64 as u128);
    hihi + (lohi >> 64) + (hilo >> 64) + (mid >> 64)
}

impl Reducer {
    pub fn new(m: u64) -> Self {
        assert!(m >= 2 && m >> MAX_MODULUS_BITS == 0, "modulus out of range");
        Self {
            m,
            mu: u128::MAX / m as u128,
        }
    }

    pub fn modulus(&self) -> u64 {
        self.m
    }

    /// `x mod m`.
    #[inline]
    pub fn reduce(&self, x: u128) -> u64 {
        let q = mulhi128(x, self.mu);
        let m = self.m as u128;
        // q is at most two below the true quotient
        let mut r = x.wrapping_sub(q.wrapping_mul(m));
        if r >= m {
            r -= m;
        }
        if r >= m {
            r -= m;
        }
        r as u64
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce(a as u128 * b as u128)
    }
}

/// `value mod m` for an arbitrary-precision value.
pub fn residue_of(value: &BigUint, m: u64) -> u64 {
    let m128 = m as u128;
    let mut acc: u128 = 0;
    for digit in value.iter_u64_digits().rev() {
        acc = ((acc << 64) | digit as u128) % m128;
    }
    acc as u64
}

/// Free-function form of [`ModulusSet::crt_reconstruct`].
pub fn crt_reconstruct(residues: &[u64], mset: &ModulusSet) -> Result<BigUint, ModMathError> {
    mset.crt_reconstruct(residues)
}

/// Representative of `value` in `(-B_s/2, B_s/2]`.
pub fn centered(value: &BigUint, modulus: &BigUint) -> BigInt {
    let v = BigInt::from_biguint(Sign::Plus, value % modulus);
    let twice: BigUint = value % modulus * 2u32;
    if &twice > modulus {
        v - BigInt::from_biguint(Sign::Plus, modulus.clone())
    } else {
        v
    }
}

/// `w * (a * max_p)^t < B_s`.
pub fn capacity_check(a: &BigUint, max_p: &BigUint, t: u32, w: &BigUint, mset: &ModulusSet) -> bool {
    capacity_requirement(a, max_p, t, w) < *mset.product()
}

/// Left-hand side of the capacity inequality, `w * (a * max_p)^t`.
pub fn capacity_requirement(a: &BigUint, max_p: &BigUint, t: u32, w: &BigUint) -> BigUint {
    let base: BigUint = a * max_p;
    w * Pow::pow(&base, t)
}

/// Rounding applied when dividing out the amplification factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rounding {
    /// Toward negative infinity; drops the fractional part of positive
    /// quotients.
    Floor,
    /// Nearest integer, halves rounded up.
    #[default]
    Nearest,
}

impl std::str::FromStr for Rounding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "floor" => Ok(Rounding::Floor),
            "nearest" => Ok(Rounding::Nearest),
            other => Err(format!("unknown rounding mode `{other}` (expected floor|nearest)")),
        }
    }
}

impl std::fmt::Display for Rounding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rounding::Floor => "floor",
            Rounding::Nearest => "nearest",
        })
    }
}

/// Integer division with the given rounding. `den` must be positive.
pub fn div_round(num: &BigInt, den: &BigInt, mode: Rounding) -> BigInt {
    debug_assert!(den.sign() == Sign::Plus);
    match mode {
        Rounding::Floor => num.div_floor(den),
        Rounding::Nearest => {
            let twice: BigInt = num * 2 + den;
            twice.div_floor(&(den * 2))
        }
    }
}

/// `2^bits` as a big integer.
pub fn pow2(bits: u32) -> BigUint {
    BigUint::one() << bits
}
