//! The comparison oracle: holds the private key and answers only
//! threshold bits and argmin indices. Every answer is recorded.

use cmpswhe::cipher::{decrypt, encrypt_private_bounded};
use cmpswhe::{Ciphertext, PrivateKey, Rounding};
use num_bigint::{BigInt, BigUint};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::VisionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Response {
    Bit(bool),
    Argmin(usize),
}

#[derive(Debug)]
pub struct OracleSession {
    sk: PrivateKey,
    transcript: Vec<Response>,
    rescales: usize,
    rng: ChaCha20Rng,
}

impl OracleSession {
    pub fn new(sk: PrivateKey) -> Self {
        Self::with_rng(sk, ChaCha20Rng::from_entropy())
    }

    pub fn with_seed(sk: PrivateKey, seed: u64) -> Self {
        Self::with_rng(sk, ChaCha20Rng::seed_from_u64(seed))
    }

    fn with_rng(sk: PrivateKey, rng: ChaCha20Rng) -> Self {
        Self {
            sk,
            transcript: Vec::new(),
            rescales: 0,
            rng,
        }
    }

    pub fn public_key(&self) -> &cmpswhe::PublicKey {
        self.sk.public()
    }

    pub fn transcript(&self) -> &[Response] {
        &self.transcript
    }

    pub fn rescale_count(&self) -> usize {
        self.rescales
    }

    fn value(&self, ct: &Ciphertext) -> Result<BigInt, VisionError> {
        Ok(decrypt(ct, &self.sk, Rounding::Nearest)?)
    }

    /// 1 iff the plaintext behind `ct` exceeds `threshold`.
    pub fn threshold(&mut self, ct: &Ciphertext, threshold: impl Into<BigInt>) -> Result<bool, VisionError> {
        let bit = self.value(ct)? > threshold.into();
        self.transcript.push(Response::Bit(bit));
        Ok(bit)
    }

    /// Index of the smallest plaintext; ties go to the lowest index.
    pub fn argmin(&mut self, cts: &[Ciphertext]) -> Result<usize, VisionError> {
        if cts.is_empty() {
            return Err(VisionError::Dimension("argmin over no candidates".into()));
        }
        let mut best = 0;
        let mut best_value = self.value(&cts[0])?;
        for (i, ct) in cts.iter().enumerate().skip(1) {
            let v = self.value(ct)?;
            if v < best_value {
                best = i;
                best_value = v;
            }
        }
        self.transcript.push(Response::Argmin(best));
        Ok(best)
    }

    /// Decrypts, divides by `magnification` (nearest, halves up) and
    /// re-encrypts at order 1. The plaintext never leaves the session.
    pub fn rescale(&mut self, ct: &Ciphertext, magnification: &BigInt) -> Result<Ciphertext, VisionError> {
        let v = self.value(ct)?;
        let q = cmpswhe::modmath::div_round(&v, magnification, Rounding::Nearest);
        let bound: BigUint = q.magnitude().clone().max(self.sk.public().envelope().max_p.clone());
        self.rescales += 1;
        Ok(encrypt_private_bounded(q, &bound, &self.sk, &mut self.rng)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cmpswhe::cipher::encrypt_private;
    use cmpswhe::{derive_keys, KeyParams, UserKey};
    use rand::Rng;

    fn key() -> PrivateKey {
        derive_keys(&UserKey::new([1; 16]), 9, &KeyParams::default()).unwrap().1
    }

    #[test]
    fn threshold_examples() {
        let sk = key();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let mut s = OracleSession::with_seed(sk.clone(), 1);
        let ct = encrypt_private(2500, &sk, &mut rng).unwrap();
        assert!(s.threshold(&ct, 900).unwrap());
        let z = encrypt_private(0, &sk, &mut rng).unwrap();
        assert!(!s.threshold(&z, 0).unwrap());
        assert_eq!(s.transcript(), &[Response::Bit(true), Response::Bit(false)]);
    }

    #[test]
    fn threshold_agrees_with_plaintext() {
        let sk = key();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut s = OracleSession::with_seed(sk.clone(), 3);
        for _ in 0..1000 {
            let v: i64 = rng.gen_range(0..=65536);
            let t: i64 = rng.gen_range(-10..=65546);
            let ct = encrypt_private(v, &sk, &mut rng).unwrap();
            assert_eq!(s.threshold(&ct, t).unwrap(), v > t);
        }
    }

    #[test]
    fn argmin_ties_go_low() {
        let sk = key();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut s = OracleSession::with_seed(sk.clone(), 5);
        let cts: Vec<_> = [5, 3, 3, 9].iter().map(|&v| encrypt_private(v, &sk, &mut rng).unwrap()).collect();
        assert_eq!(s.argmin(&cts).unwrap(), 1);
    }

    #[test]
    fn rescale_examples() {
        let sk = key();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut s = OracleSession::with_seed(sk.clone(), 7);
        let ct = encrypt_private(31400, &sk, &mut rng).unwrap();
        let r = s.rescale(&ct, &BigInt::from(100)).unwrap();
        assert_eq!(decrypt(&r, &sk, Rounding::Nearest).unwrap(), BigInt::from(314));
        let same = s.rescale(&ct, &BigInt::from(1)).unwrap();
        assert_eq!(decrypt(&same, &sk, Rounding::Nearest).unwrap(), BigInt::from(31400));
        assert_ne!(same, ct);
        assert_eq!(s.rescale_count(), 2);
        assert!(s.transcript().is_empty());
    }
}
