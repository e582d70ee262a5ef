//! Server-side network evaluation on ciphertexts.
//!
//! The server holds the model encrypted under the public key. The client
//! sends its input encrypted under the private key; an oracle session
//! (holding the private key) performs the divisions between layers.

use cmpswhe::cipher::{encrypt_private, encrypt_public};
use cmpswhe::{decrypt, BinOp, Ciphertext, Evaluator, PrivateKey, PublicKey, Rounding};
use cmpswhe_vision::{Frame, OracleSession};
use num_bigint::BigInt;
use rand::{CryptoRng, Rng};
use rayon::prelude::*;

use crate::activation::PolyActivation;
use crate::fixed::fixed_pixel;
use crate::model::FixedPointModel;
use crate::plain::argmax;
use crate::InferenceError;

/// The fixed-point model with every weight and activation coefficient
/// public-key encrypted.
#[derive(Debug, Clone)]
pub struct EncryptedModel {
    pub layers: Vec<Vec<Vec<Ciphertext>>>,
    pub act: EncryptedActivation,
    pub ledger: Vec<u32>,
    pub n: u32,
}

#[derive(Debug, Clone)]
pub struct EncryptedActivation {
    pub poly: PolyActivation,
    pub k: Vec<Ciphertext>,
}

impl EncryptedActivation {
    pub fn new(poly: &PolyActivation, pk: &PublicKey) -> Result<Self, InferenceError> {
        let k = poly.k.iter().map(|k| encrypt_public(k.clone(), pk)).collect::<Result<_, _>>()?;
        Ok(Self { poly: poly.clone(), k })
    }
}

impl EncryptedModel {
    pub fn input_len(&self) -> usize {
        self.layers[0].first().map_or(0, Vec::len)
    }
}

pub fn encrypt_model(model: &FixedPointModel, pk: &PublicKey) -> Result<EncryptedModel, InferenceError> {
    let layers = model
        .layers
        .iter()
        .map(|m| {
            m.par_iter()
                .map(|row| row.iter().map(|w| Ok(encrypt_public(w.clone(), pk)?)).collect::<Result<Vec<_>, InferenceError>>())
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(EncryptedModel {
        layers,
        act: EncryptedActivation::new(&model.act, pk)?,
        ledger: model.ledger.clone(),
        n: model.n,
    })
}

/// Blind matrix-vector product; each output's order is the input order
/// plus the weights' order.
pub fn blind_dense(layer: &[Ciphertext], weights: &[Vec<Ciphertext>], pk: &PublicKey) -> Result<Vec<Ciphertext>, InferenceError> {
    let ev = Evaluator::new(pk);
    weights
        .par_iter()
        .map(|row| {
            if row.len() != layer.len() {
                return Err(InferenceError::Dimension(format!("{} weights for {} inputs", row.len(), layer.len())));
            }
            let mut acc: Option<Ciphertext> = None;
            for (w, x) in row.iter().zip(layer) {
                let p = ev.mul(w, x)?;
                acc = Some(match acc {
                    None => p,
                    Some(a) => ev.add(&a, &p)?,
                });
            }
            acc.ok_or_else(|| InferenceError::Dimension("empty layer".into()))
        })
        .collect()
}

/// `sum k_j x^(m-j) c^j`. The coefficients are ciphertexts, `c^j` is a
/// plain constant, and lower-order terms are homogenized up to `m + 1`
/// (for an order-1 `x`).
pub fn blind_activation(x: &Ciphertext, act: &EncryptedActivation, pk: &PublicKey) -> Result<Ciphertext, InferenceError> {
    let ev = Evaluator::new(pk);
    let m = act.poly.degree();
    let c = act.poly.c();
    let mut terms = Vec::with_capacity(m + 1);
    for (j, k) in act.k.iter().enumerate() {
        let mut t = if j < m { ev.mul(k, &ev.pow(x, (m - j) as u32)?)? } else { k.clone() };
        if j > 0 {
            t = ev.semiblind(BinOp::Mul, &t, num_traits::pow(c.clone(), j))?;
        }
        terms.push(t);
    }
    Ok(ev.sum(&terms)?.expect("degree >= 0 gives one term"))
}

/// Divide by `magnification` through the oracle and re-encrypt at order 1.
pub fn rescale_oracle(session: &mut OracleSession, x: &Ciphertext, magnification: &BigInt) -> Result<Ciphertext, InferenceError> {
    x.check_key(session.public_key()).map_err(|_| InferenceError::KeyMismatch)?;
    Ok(session.rescale(x, magnification)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub digit: usize,
    /// Decrypted output layer, scale `10^(2n)`.
    pub outputs: Vec<BigInt>,
}

/// Client-side input encoding: `pixel / 255` on the model's grid.
pub fn encrypt_input<R: Rng + CryptoRng + ?Sized>(
    input: &Frame,
    n: u32,
    sk: &PrivateKey,
    rng: &mut R,
) -> Result<Vec<Ciphertext>, InferenceError> {
    input
        .data()
        .iter()
        .map(|&p| Ok(encrypt_private(fixed_pixel(p, n), sk, rng)?))
        .collect()
}

/// Server side of the network: dense layers and activations with two
/// oracle rescales per hidden layer, `10^n` then `10^(n l_i)`.
pub fn forward_blind(x: Vec<Ciphertext>, model: &EncryptedModel, session: &mut OracleSession, pk: &PublicKey) -> Result<Vec<Ciphertext>, InferenceError> {
    let scale = num_traits::pow(BigInt::from(10), model.n as usize);
    let last = model.layers.len() - 1;
    let mut x = x;
    for (i, w) in model.layers.iter().enumerate() {
        let z = blind_dense(&x, w, pk)?;
        if i == last {
            return Ok(z);
        }
        let act_mag = num_traits::pow(BigInt::from(10), model.n as usize * model.ledger[i] as usize);
        let mut next = Vec::with_capacity(z.len());
        for v in &z {
            let v = rescale_oracle(session, v, &scale)?;
            let a = blind_activation(&v, &model.act, pk)?;
            next.push(rescale_oracle(session, &a, &act_mag)?);
        }
        x = next;
    }
    unreachable!("the loop returns at the last layer")
}

/// Encrypt, run blind, decrypt, argmax (first index on ties).
pub fn predict_blind<R: Rng + CryptoRng + ?Sized>(
    input: &Frame,
    model: &EncryptedModel,
    session: &mut OracleSession,
    client: &PrivateKey,
    rng: &mut R,
) -> Result<Prediction, InferenceError> {
    if input.data().len() != model.input_len() {
        return Err(InferenceError::Dimension(format!(
            "{}x{} image for a {}-input model",
            input.width(),
            input.height(),
            model.input_len()
        )));
    }
    let x = encrypt_input(input, model.n, client, rng)?;
    let out = forward_blind(x, model, session, client.public())?;
    let outputs = out
        .iter()
        .map(|ct| decrypt(ct, client, Rounding::Nearest))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prediction {
        digit: argmax(&outputs),
        outputs,
    })
}
