//! CMP-SWHE: a somewhat-homomorphic cryptosystem over CRT residues.
//!
//! A plaintext `p` is amplified to `a*p + eta` and projected onto a group of
//! prime moduli. Each projection is hidden among `M - 1` decoy residues; a
//! private position template says which slot is real. Blind addition,
//! subtraction and multiplication act element-wise on the residue matrix.

pub mod batch;
pub mod cipher;
pub mod eval;
pub mod expr;
pub mod fuzz;
pub mod keys;
pub mod modmath;

pub use batch::{pack, plan_lanes, unpack, BatchError, CapacityReport, PackingKey};
pub use cipher::{
    decrypt, decrypt_raw, encrypt_private, encrypt_public, CipherError, Ciphertext,
};
pub use eval::{eval_expr, BinOp, EvalError, Evaluator};
pub use expr::{parse_expr, Expr, ParseError};
pub use keys::{demo_key, derive_keys, Envelope, KeyError, KeyParams, PrivateKey, PublicKey, UserKey};
pub use modmath::{ModulusSet, Rounding};
