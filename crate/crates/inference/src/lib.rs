//! Blind inference for a small bias-free MLP.
//!
//! ReLU is replaced by a Chebyshev fit, every real number is moved onto a
//! `10^n` fixed-point grid, and the server evaluates dense layers and the
//! homogenized activation on ciphertexts. Between layers an
//! [`OracleSession`](cmpswhe_vision::OracleSession) divides out the
//! accumulated magnification.

pub mod activation;
pub mod blind;
pub mod data;
pub mod fixed;
pub mod model;
pub mod plain;

use thiserror::Error;

pub use activation::{fit_relu_poly, PolyActivation, ReluFit};
pub use blind::{
    blind_activation, blind_dense, encrypt_input, encrypt_model, forward_blind, predict_blind, rescale_oracle, EncryptedActivation,
    EncryptedModel, Prediction,
};
pub use fixed::{fixed_pixel, to_fixed};
pub use model::{FixedPointModel, FloatModel};
pub use plain::{argmax, forward_float, predict_fixed, predict_float, trace_fixed, FixedTrace};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("bad fit interval [{lo}, {hi}] or degree {degree}")]
    Interval { lo: f64, hi: f64, degree: usize },
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("model line {line}: {message}")]
    Model { line: usize, message: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("ciphertext belongs to a different key")]
    KeyMismatch,
    #[error(transparent)]
    Cipher(#[from] cmpswhe::CipherError),
    #[error(transparent)]
    Eval(#[from] cmpswhe::EvalError),
    #[error(transparent)]
    Vision(#[from] cmpswhe_vision::VisionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
