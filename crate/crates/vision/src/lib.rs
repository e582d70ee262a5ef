//! Blind image pipelines on top of `cmpswhe`: frame and background
//! difference, 3x3 window optical flow, and haar-cascade detection.
//!
//! The compute side ([`blind`]) holds only the public key. Comparisons are
//! answered by an [`oracle::OracleSession`] holding the private key, which
//! only ever returns bits and argmin indices.

pub mod batched;
pub mod blind;
pub mod cascade;
pub mod frame;
pub mod oracle;
pub mod points;
pub mod reference;
pub mod synth;

use thiserror::Error;

pub use blind::{
    bg_diff_blind, cascade_blind, decrypt_frame, encrypt_frame, frame_diff_blind, haar_blind, integral_blind,
    optical_flow_blind, threshold_mask, EncFrame, FlowResult,
};
pub use cascade::{Cascade, Detection, Rect};
pub use frame::Frame;
pub use oracle::{OracleSession, Response};
pub use reference::update_background;

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("pgm: {0}")]
    Pgm(String),
    #[error("cascade line {line}: {message}")]
    Cascade { line: usize, message: String },
    #[error("budget: {0}")]
    Budget(String),
    #[error(transparent)]
    Cipher(#[from] cmpswhe::CipherError),
    #[error(transparent)]
    Eval(#[from] cmpswhe::EvalError),
    #[error(transparent)]
    Batch(#[from] cmpswhe::BatchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
