//! Ciphertext data model, encryption (client and server flavours) and
//! decryption.
//!
//! A ciphertext is an `N x M` matrix: row `i` holds `M` residues modulo
//! `b_i`. With the private key, the true projection `(a*p + eta) mod b_i`
//! sits at slot `s_i` and the other `M - 1` slots hold projections of
//! independently drawn redundant plaintexts `a*R_j + eta_j`, one redundant
//! plaintext per non-template column. With only the public key every slot
//! of a row holds the same projection of `a*p`.

use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{CryptoRng, Rng};
use thiserror::Error;

use crate::keys::{PrivateKey, PublicKey};
use crate::modmath::{self, centered, div_round, ModMathError, ModulusSet, Rounding, LIMB_TABLE};

const CT_HEADER: &str = "cmpswhe-ct v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CipherError {
    #[error("plaintext {value} exceeds the declared bound {bound}")]
    OutOfEnvelope { value: BigInt, bound: BigUint },
    #[error("amplified plaintext bound {required} does not fit the modulus product {available}")]
    Capacity { required: BigUint, available: BigUint },
    #[error("ciphertext belongs to modulus group {found:016x}, key uses {expected:016x}")]
    KeyMismatch { expected: u64, found: u64 },
    #[error("ciphertext shape {found_rows}x{found_slots} does not match key shape {rows}x{slots}")]
    Shape {
        rows: usize,
        slots: usize,
        found_rows: usize,
        found_slots: usize,
    },
    #[error("ciphertext order {order} exceeds the key envelope order {max}")]
    OrderOverflow { order: u32, max: u32 },
    #[error(transparent)]
    Modulus(#[from] ModMathError),
    #[error("malformed ciphertext file: {0}")]
    Malformed(String),
}

/// Residue matrix plus the public bookkeeping needed for blind evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    rows: usize,
    slots: usize,
    residues: Vec<u64>,
    order: u32,
    mset_id: u64,
    slot_uniform: bool,
}

impl Ciphertext {
    /// Assembles a ciphertext from raw parts, checking every residue against
    /// its row modulus.
    pub fn from_parts(
        mset: &ModulusSet,
        slots: usize,
        residues: Vec<u64>,
        order: u32,
        slot_uniform: bool,
    ) -> Result<Self, CipherError> {
        let rows = mset.len();
        if residues.len() != rows * slots || slots == 0 {
            return Err(CipherError::Malformed(format!(
                "{} residues for a {rows}x{slots} matrix",
                residues.len()
            )));
        }
        if order == 0 {
            return Err(CipherError::Malformed("order must be at least 1".into()));
        }
        for (i, row) in residues.chunks(slots).enumerate() {
            let b = mset.moduli()[i];
            if let Some(&bad) = row.iter().find(|&&r| r >= b) {
                return Err(CipherError::Malformed(format!("residue {bad} in row {i} is not below {b}")));
            }
            if slot_uniform && row.iter().any(|&r| r != row[0]) {
                return Err(CipherError::Malformed(format!("row {i} is not uniform")));
            }
        }
        Ok(Self {
            rows,
            slots,
            residues,
            order,
            mset_id: mset.fingerprint(),
            slot_uniform,
        })
    }

    pub(crate) fn from_raw(rows: usize, slots: usize, residues: Vec<u64>, order: u32, mset_id: u64, slot_uniform: bool) -> Self {
        debug_assert_eq!(residues.len(), rows * slots);
        Self {
            rows,
            slots,
            residues,
            order,
            mset_id,
            slot_uniform,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Number of amplification factors embedded (`t`).
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn mset_id(&self) -> u64 {
        self.mset_id
    }

    pub fn is_slot_uniform(&self) -> bool {
        self.slot_uniform
    }

    pub fn get(&self, row: usize, slot: usize) -> u64 {
        self.residues[row * self.slots + slot]
    }

    pub fn row(&self, row: usize) -> &[u64] {
        &self.residues[row * self.slots..(row + 1) * self.slots]
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub(crate) fn residues_mut(&mut self) -> &mut [u64] {
        &mut self.residues
    }

    pub(crate) fn set_order(&mut self, order: u32) {
        self.order = order;
    }

    /// Residues sitting at the template positions, one per row.
    pub fn select(&self, template: &[usize]) -> Vec<u64> {
        template.iter().enumerate().map(|(i, &s)| self.get(i, s)).collect()
    }

    /// Checks that the ciphertext was produced under `pk`'s modulus group.
    pub fn check_key(&self, pk: &PublicKey) -> Result<(), CipherError> {
        if self.mset_id != pk.mset().fingerprint() {
            return Err(CipherError::KeyMismatch {
                expected: pk.mset().fingerprint(),
                found: self.mset_id,
            });
        }
        if self.rows != pk.rows() || self.slots != pk.slots() {
            return Err(CipherError::Shape {
                rows: pk.rows(),
                slots: pk.slots(),
                found_rows: self.rows,
                found_slots: self.slots,
            });
        }
        Ok(())
    }

    /// Text form: one header line, then `N` rows of `M` decimal residues.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.residues.len() * 20 + 80);
        writeln!(
            out,
            "{CT_HEADER} N={} M={} order={} mset={:016x} uniform={}",
            self.rows,
            self.slots,
            self.order,
            self.mset_id,
            u8::from(self.slot_uniform)
        )
        .unwrap();
        for row in self.residues.chunks(self.slots) {
            let mut first = true;
            for r in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{r}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text form. Residue ranges are checked later against the
    /// key, since the file only carries the modulus-group fingerprint.
    pub fn from_text(text: &str) -> Result<Self, CipherError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CipherError::Malformed("empty ciphertext file".into()))?;
        let rest = header
            .strip_prefix(CT_HEADER)
            .ok_or_else(|| CipherError::Malformed(format!("unexpected header `{header}`")))?;
        let mut rows = None;
        let mut slots = None;
        let mut order = None;
        let mut mset_id = None;
        let mut uniform = None;
        for field in rest.split_whitespace() {
            let (name, value) = field
                .split_once('=')
                .ok_or_else(|| CipherError::Malformed(format!("bad header field `{field}`")))?;
            let bad = || CipherError::Malformed(format!("bad value in header field `{field}`"));
            match name {
                "N" => rows = Some(value.parse::<usize>().map_err(|_| bad())?),
                "M" => slots = Some(value.parse::<usize>().map_err(|_| bad())?),
                "order" => order = Some(value.parse::<u32>().map_err(|_| bad())?),
                "mset" => mset_id = Some(u64::from_str_radix(value, 16).map_err(|_| bad())?),
                "uniform" => {
                    uniform = Some(match value {
                        "0" => false,
                        "1" => true,
                        _ => return Err(bad()),
                    })
                }
                _ => return Err(CipherError::Malformed(format!("unknown header field `{name}`"))),
            }
        }
        let missing = |n: &str| CipherError::Malformed(format!("header lacks `{n}`"));
        let rows = rows.ok_or_else(|| missing("N"))?;
        let slots = slots.ok_or_else(|| missing("M"))?;
        let order = order.ok_or_else(|| missing("order"))?;
        let mset_id = mset_id.ok_or_else(|| missing("mset"))?;
        let slot_uniform = uniform.ok_or_else(|| missing("uniform"))?;
        if order == 0 || slots == 0 || rows == 0 {
            return Err(CipherError::Malformed("dimensions and order must be positive".into()));
        }

        let mut residues = Vec::with_capacity(rows * slots);
        let mut seen_rows = 0;
        for line in lines {
            if line.is_empty() {
                continue;
            }
            seen_rows += 1;
            let before = residues.len();
            for item in line.split(' ') {
                residues.push(
                    item.parse::<u64>()
                        .map_err(|_| CipherError::Malformed(format!("bad residue `{item}`")))?,
                );
            }
            if residues.len() - before != slots {
                return Err(CipherError::Malformed(format!(
                    "row {seen_rows} has {} entries, expected {slots}",
                    residues.len() - before
                )));
            }
        }
        if seen_rows != rows {
            return Err(CipherError::Malformed(format!("found {seen_rows} rows, expected {rows}")));
        }
        Ok(Self {
            rows,
            slots,
            residues,
            order,
            mset_id,
            slot_uniform,
        })
    }

    /// Validates residue ranges against a key after loading from text.
    pub fn validate_against(&self, pk: &PublicKey) -> Result<(), CipherError> {
        self.check_key(pk)?;
        for (i, row) in self.residues.chunks(self.slots).enumerate() {
            let b = pk.mset().moduli()[i];
            if row.iter().any(|&r| r >= b) {
                return Err(CipherError::Malformed(format!("row {i} holds a residue not below {b}")));
            }
        }
        Ok(())
    }
}

/// Draws `eta` uniformly from `[0, eta_max)`.
pub fn sample_eta<R: Rng + ?Sized>(eta_max: &BigUint, rng: &mut R) -> BigUint {
    match eta_max.to_u64() {
        Some(bound) => BigUint::from(rng.gen_range(0..bound)),
        None => rng.gen_biguint_below(eta_max),
    }
}

/// Draws a redundant plaintext uniformly from `[0, bound]`.
fn sample_redundant<R: Rng + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    match bound.to_u64() {
        Some(b) if b < u64::MAX => BigUint::from(rng.gen_range(0..=b)),
        _ => rng.gen_biguint_below(&(bound + 1u32)),
    }
}

/// Uniform draw from `[0, bound]` written as little-endian `u64` limbs,
/// by rejection on the top limb's bit width.
fn sample_digits_upto<R: Rng + ?Sized>(bound: &[u64], out: &mut [u64], rng: &mut R) {
    let top = bound.len() - 1;
    let mask = if bound[top] == 0 { 0 } else { u64::MAX >> bound[top].leading_zeros() };
    loop {
        for d in out[..top].iter_mut() {
            *d = rng.gen();
        }
        out[top] = rng.gen::<u64>() & mask;
        let mut le = true;
        for l in (0..=top).rev() {
            if out[l] != bound[l] {
                le = out[l] < bound[l];
                break;
            }
        }
        if le {
            return;
        }
    }
}

fn check_bound(p: &BigInt, bound: &BigUint) -> Result<(), CipherError> {
    if p.magnitude() > bound {
        return Err(CipherError::OutOfEnvelope {
            value: p.clone(),
            bound: bound.clone(),
        });
    }
    Ok(())
}

/// Client-side encryption with the key envelope's `max_p` as the bound.
pub fn encrypt_private<R: Rng + CryptoRng + ?Sized>(
    p: impl Into<BigInt>,
    sk: &PrivateKey,
    rng: &mut R,
) -> Result<Ciphertext, CipherError> {
    let bound = sk.public().envelope().max_p.clone();
    encrypt_private_bounded(p, &bound, sk, rng)
}

/// Client-side encryption returning the drawn `eta` alongside.
pub fn encrypt_private_traced<R: Rng + CryptoRng + ?Sized>(
    p: impl Into<BigInt>,
    sk: &PrivateKey,
    rng: &mut R,
) -> Result<(Ciphertext, BigUint), CipherError> {
    let eta = sample_eta(sk.eta_max(), rng);
    let bound = sk.public().envelope().max_p.clone();
    let ct = encrypt_private_with(p, &bound, &eta, sk, rng)?;
    Ok((ct, eta))
}

/// Client-side encryption of a value with its own magnitude bound, e.g. a
/// CRT-packed batch. Redundant plaintexts are drawn from `[0, bound]`.
pub fn encrypt_private_bounded<R: Rng + CryptoRng + ?Sized>(
    p: impl Into<BigInt>,
    bound: &BigUint,
    sk: &PrivateKey,
    rng: &mut R,
) -> Result<Ciphertext, CipherError> {
    let eta = sample_eta(sk.eta_max(), rng);
    encrypt_private_with(p, bound, &eta, sk, rng)
}

/// Client-side encryption with an explicit `eta`; redundancy still comes
/// from `rng`.
pub fn encrypt_private_with<R: Rng + ?Sized>(
    p: impl Into<BigInt>,
    bound: &BigUint,
    eta: &BigUint,
    sk: &PrivateKey,
    rng: &mut R,
) -> Result<Ciphertext, CipherError> {
    let p = p.into();
    check_bound(&p, bound)?;
    let pk = sk.public();
    let mset = pk.mset();
    let available = mset.product();
    // centered decoding needs |a*p + eta| < B_s / 2
    let required: BigUint = (pk.a() * bound + sk.eta_max()) * 2u32;
    if &required >= available {
        return Err(CipherError::Capacity {
            required,
            available: available.clone(),
        });
    }

    let rows = pk.rows();
    let slots = pk.slots();
    let template = sk.template();
    let amplified = BigInt::from_biguint(Sign::Plus, pk.a().clone()) * &p + BigInt::from_biguint(Sign::Plus, eta.clone());
    let mut residues = vec![0u64; rows * slots];
    for (i, &s) in template.iter().enumerate() {
        residues[i * slots + s] = mset.signed_residue(&amplified, i);
    }

    let a_res = pk.a_residues();
    let limbs = bound.iter_u64_digits().count().max(1);
    let eta_fits = sk.eta_max().to_u64().is_some();
    if limbs <= LIMB_TABLE && eta_fits {
        // a * 2^(64 l) mod b_i, so each redundant residue costs one reduction
        let amp: Vec<[u64; LIMB_TABLE]> = (0..rows)
            .map(|i| {
                let m = mset.moduli()[i];
                let mut t = [0u64; LIMB_TABLE];
                for (l, v) in t.iter_mut().enumerate().take(limbs) {
                    *v = modmath::mul_mod(a_res[i], mset.limb_power(i, l), m);
                    debug_assert!(*v < m);
                }
                t
            })
            .collect();
        let bound_digits: Vec<u64> = bound.iter_u64_digits().chain(std::iter::repeat(0)).take(limbs).collect();
        let mut digits = [0u64; LIMB_TABLE];
        for j in 0..slots - 1 {
            let e = sample_eta(sk.eta_max(), rng).to_u64().expect("eta fits u64");
            sample_digits_upto(&bound_digits, &mut digits[..limbs], rng);
            for (i, &s) in template.iter().enumerate() {
                let red = mset.reducer(i);
                let slot = if j < s { j } else { j + 1 };
                let mut acc = e as u128;
                for l in 0..limbs {
                    let term = digits[l] as u128 * amp[i][l] as u128;
                    acc = match acc.checked_add(term) {
                        Some(v) => v,
                        None => red.reduce(acc) as u128 + term,
                    };
                }
                residues[i * slots + slot] = red.reduce(acc);
            }
        }
    } else {
        for j in 0..slots - 1 {
            let eta_j = sample_eta(sk.eta_max(), rng);
            let r = sample_redundant(bound, rng);
            for (i, &s) in template.iter().enumerate() {
                let m = mset.moduli()[i];
                let slot = if j < s { j } else { j + 1 };
                let r_i = mset.residue(&r, i);
                let e_i = mset.residue(&eta_j, i);
                let v = (a_res[i] as u128 * r_i as u128 + e_i as u128) % m as u128;
                residues[i * slots + slot] = v as u64;
            }
        }
    }
    Ok(Ciphertext::from_raw(rows, slots, residues, 1, mset.fingerprint(), false))
}

/// Server-side encryption: `a*p` with no randomization, replicated into
/// every slot.
pub fn encrypt_public(p: impl Into<BigInt>, pk: &PublicKey) -> Result<Ciphertext, CipherError> {
    let p = p.into();
    check_bound(&p, &pk.envelope().max_p)?;
    encrypt_public_unbounded(&p, pk)
}

/// Public encryption that only checks the value fits the modulus product.
/// Used for semi-blind constants that exceed the plaintext envelope.
pub fn encrypt_public_unbounded(p: &BigInt, pk: &PublicKey) -> Result<Ciphertext, CipherError> {
    let mset = pk.mset();
    let required: BigUint = pk.a() * p.magnitude() * 2u32;
    if &required >= mset.product() {
        return Err(CipherError::Capacity {
            required,
            available: mset.product().clone(),
        });
    }
    let rows = pk.rows();
    let slots = pk.slots();
    let mut residues = Vec::with_capacity(rows * slots);
    let a_res = pk.a_residues();
    for (i, &m) in mset.moduli().iter().enumerate() {
        let p_i = mset.signed_residue(p, i);
        let v = modmath::mul_mod(a_res[i], p_i, m);
        residues.extend(std::iter::repeat_n(v, slots));
    }
    Ok(Ciphertext::from_raw(rows, slots, residues, 1, mset.fingerprint(), true))
}

fn check_decryptable(ct: &Ciphertext, sk: &PrivateKey) -> Result<(), CipherError> {
    let pk = sk.public();
    ct.check_key(pk)?;
    if ct.order() > pk.envelope().max_order {
        return Err(CipherError::OrderOverflow {
            order: ct.order(),
            max: pk.envelope().max_order,
        });
    }
    Ok(())
}

/// Centered CRT value of the template residues, before dividing by `a^t`.
pub fn decrypt_amplified(ct: &Ciphertext, sk: &PrivateKey) -> Result<BigInt, CipherError> {
    check_decryptable(ct, sk)?;
    let mset = sk.public().mset();
    let value = mset.crt_reconstruct(&ct.select(sk.template()))?;
    Ok(centered(&value, mset.product()))
}

/// `a^t` for the ciphertext's order.
pub fn scale_for(ct: &Ciphertext, pk: &PublicKey) -> BigInt {
    BigInt::from_biguint(Sign::Plus, num_traits::Pow::pow(pk.a(), ct.order()))
}

pub fn decrypt(ct: &Ciphertext, sk: &PrivateKey, mode: Rounding) -> Result<BigInt, CipherError> {
    let numerator = decrypt_amplified(ct, sk)?;
    Ok(div_round(&numerator, &scale_for(ct, sk.public()), mode))
}

/// Exact rational `centered CRT value / a^t`.
pub fn decrypt_raw(ct: &Ciphertext, sk: &PrivateKey) -> Result<BigRational, CipherError> {
    let numerator = decrypt_amplified(ct, sk)?;
    Ok(BigRational::new(numerator, scale_for(ct, sk.public())))
}

/// `true` when every residue of `ct` is zero.
pub fn is_zero_matrix(ct: &Ciphertext) -> bool {
    ct.residues().iter().all(Zero::is_zero)
}

/// Element-wise helper shared with the evaluator: `dst[k] = f(x[k], y[k], b)`.
pub(crate) fn zip_rows(
    x: &Ciphertext,
    y: &Ciphertext,
    moduli: &[u64],
    mut f: impl FnMut(u64, u64, u64) -> u64,
) -> Vec<u64> {
    let slots = x.slots();
    let mut out = Vec::with_capacity(x.residues().len());
    for (i, &m) in moduli.iter().enumerate() {
        let xs = x.row(i);
        let ys = y.row(i);
        for k in 0..slots {
            out.push(f(xs[k], ys[k], m));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::{derive_keys, Envelope, KeyParams, UserKey};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn worked_key() -> PrivateKey {
        let mset = ModulusSet::new(vec![19, 29, 31]).unwrap();
        let env = Envelope {
            max_p: BigUint::from(255u32),
            max_order: 1,
            max_terms: BigUint::from(2u32),
        };
        let pk = PublicKey::new(BigUint::from(33u32), mset, 3, env).unwrap();
        PrivateKey::new_relaxed(pk, vec![0, 1, 2], BigUint::from(32u32)).unwrap()
    }

    fn default_key() -> PrivateKey {
        derive_keys(&UserKey::new([9; 16]), 1234, &KeyParams::default()).unwrap().1
    }

    #[test]
    fn worked_example_correct_slots() {
        let sk = worked_key();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let bound = BigUint::from(255u32);
        let x = encrypt_private_with(68, &bound, &BigUint::from(10u32), &sk, &mut rng).unwrap();
        let y = encrypt_private_with(78, &bound, &BigUint::from(7u32), &sk, &mut rng).unwrap();
        assert_eq!(x.select(sk.template()), vec![12, 21, 22]);
        assert_eq!(y.select(sk.template()), vec![16, 0, 8]);
        assert_eq!(x.order(), 1);
        assert!(!x.is_slot_uniform());
    }

    #[test]
    fn zero_with_zero_eta() {
        let sk = default_key();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let ct = encrypt_private_with(0, &BigUint::from(255u32), &BigUint::zero(), &sk, &mut rng).unwrap();
        assert!(ct.select(sk.template()).iter().all(|&r| r == 0));
    }

    #[test]
    fn public_encryption_examples() {
        let sk = worked_key();
        let ct = encrypt_public(2, sk.public()).unwrap();
        assert!(ct.row(0).iter().all(|&r| r == 66 % 19));
        assert!(ct.is_slot_uniform());
        assert!(is_zero_matrix(&encrypt_public(0, sk.public()).unwrap()));
        let sk = default_key();
        let ct = encrypt_public(5, sk.public()).unwrap();
        assert_eq!(decrypt(&ct, &sk, Rounding::Nearest).unwrap(), BigInt::from(5));
        assert_eq!(decrypt(&ct, &sk, Rounding::Floor).unwrap(), BigInt::from(5));
        let raw = decrypt_raw(&encrypt_public(7, sk.public()).unwrap(), &sk).unwrap();
        assert_eq!(raw, BigRational::from_integer(BigInt::from(7)));
        let neg = encrypt_public(-9, sk.public()).unwrap();
        assert_eq!(decrypt(&neg, &sk, Rounding::Nearest).unwrap(), BigInt::from(-9));
    }

    #[test]
    fn private_roundtrip_default_keys() {
        let sk = default_key();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p: i64 = rng.gen_range(0..=255);
            let ct = encrypt_private(p, &sk, &mut rng).unwrap();
            assert_eq!(decrypt(&ct, &sk, Rounding::Nearest).unwrap(), BigInt::from(p));
            assert_eq!(decrypt(&ct, &sk, Rounding::Floor).unwrap(), BigInt::from(p));
        }
    }

    #[test]
    fn correct_slot_consistency() {
        let sk = default_key();
        let pk = sk.public();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for p in [0i64, 1, 200, -77, 65536] {
            let (ct, eta) = encrypt_private_traced(p, &sk, &mut rng).unwrap();
            let amplified = BigInt::from_biguint(Sign::Plus, pk.a().clone()) * p + BigInt::from_biguint(Sign::Plus, eta);
            assert_eq!(ct.select(sk.template()), pk.mset().residues(&amplified));
        }
    }

    #[test]
    fn out_of_envelope_is_rejected() {
        let sk = default_key();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        assert!(matches!(
            encrypt_private(65537, &sk, &mut rng),
            Err(CipherError::OutOfEnvelope { .. })
        ));
        assert!(encrypt_public(-65537, sk.public()).is_err());
        let worked = worked_key();
        // a*bound + eta_max must stay below B_s / 2
        assert!(matches!(
            encrypt_private_bounded(1, &BigUint::from(300u32), &worked, &mut rng),
            Err(CipherError::Capacity { .. })
        ));
    }

    #[test]
    fn wrong_key_is_rejected() {
        let sk = default_key();
        let other = derive_keys(&UserKey::new([10; 16]), 1234, &KeyParams::default()).unwrap().1;
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let ct = encrypt_private(5, &sk, &mut rng).unwrap();
        assert!(matches!(
            decrypt(&ct, &other, Rounding::Nearest),
            Err(CipherError::KeyMismatch { .. })
        ));
    }

    #[test]
    fn text_roundtrip_is_byte_exact() {
        let sk = default_key();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let ct = encrypt_private(42, &sk, &mut rng).unwrap();
        let text = ct.to_text();
        let back = Ciphertext::from_text(&text).unwrap();
        assert_eq!(back, ct);
        assert_eq!(back.to_text(), text);
        back.validate_against(sk.public()).unwrap();
        let pub_ct = encrypt_public(3, sk.public()).unwrap();
        assert_eq!(Ciphertext::from_text(&pub_ct.to_text()).unwrap(), pub_ct);
    }

    #[test]
    fn malformed_ciphertext_text() {
        assert!(Ciphertext::from_text("").is_err());
        assert!(Ciphertext::from_text("cmpswhe-ct v1 N=1 M=2 order=1 mset=00 uniform=0\n1\n").is_err());
        assert!(Ciphertext::from_text("cmpswhe-ct v1 N=2 M=1 order=1 mset=00 uniform=0\n1\n").is_err());
        assert!(Ciphertext::from_text("cmpswhe-ct v1 N=1 M=1 order=0 mset=00 uniform=0\n1\n").is_err());
        assert!(Ciphertext::from_text("cmpswhe-ct v1 N=1 M=1 order=1 mset=00\n1\n").is_err());
        assert!(Ciphertext::from_text("cmpswhe-ct v1 N=1 M=1 order=1 mset=00 uniform=0\n1\n").is_ok());
    }

    #[test]
    fn fresh_randomness_changes_ciphertext() {
        let sk = default_key();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let a = encrypt_private(9, &sk, &mut rng).unwrap();
        let b = encrypt_private(9, &sk, &mut rng).unwrap();
        assert_ne!(a, b);
    }
}
