//! Blind evaluation: element-wise residue arithmetic with automatic order
//! homogenization, semi-blind operands, and an expression evaluator that
//! needs only the public key.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Pow};
use thiserror::Error;

use crate::cipher::{encrypt_public_unbounded, zip_rows, CipherError, Ciphertext};
use crate::expr::Expr;
use crate::keys::PublicKey;
use crate::modmath::{add_mod, capacity_check, capacity_requirement, mul_mod, pow_mod, sub_mod};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error(transparent)]
    Cipher(#[from] CipherError),
    #[error("cannot lower ciphertext order from {from} to {to}")]
    OrderDecrease { from: u32, to: u32 },
    #[error("result order {order} exceeds the key envelope order {max}")]
    OrderOverflow { order: u32, max: u32 },
    #[error("operands use different modulus groups ({0:016x} vs {1:016x})")]
    GroupMismatch(u64, u64),
    #[error("x^0 is not supported")]
    ZeroExponent,
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("expression needs a modulus product above {required} but the key provides {available}")]
    Capacity { required: BigUint, available: BigUint },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn apply_plain(self, x: &BigInt, y: &BigInt) -> BigInt {
        match self {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
        }
    }
}

/// Blind operations under one public key.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'k> {
    pk: &'k PublicKey,
}

impl<'k> Evaluator<'k> {
    pub fn new(pk: &'k PublicKey) -> Self {
        Self { pk }
    }

    pub fn public_key(&self) -> &'k PublicKey {
        self.pk
    }

    fn check(&self, ct: &Ciphertext) -> Result<(), EvalError> {
        ct.check_key(self.pk).map_err(EvalError::from)
    }

    fn check_order(&self, order: u32) -> Result<(), EvalError> {
        let max = self.pk.envelope().max_order;
        if order > max {
            return Err(EvalError::OrderOverflow { order, max });
        }
        Ok(())
    }

    /// Multiplies every residue by `a^(target - order)` so the ciphertext
    /// carries `target` amplification factors.
    pub fn homogenize(&self, ct: &Ciphertext, target: u32) -> Result<Ciphertext, EvalError> {
        self.check(ct)?;
        if target < ct.order() {
            return Err(EvalError::OrderDecrease {
                from: ct.order(),
                to: target,
            });
        }
        let diff = target - ct.order();
        if diff == 0 {
            return Ok(ct.clone());
        }
        self.check_order(target)?;
        let mut out = ct.clone();
        let slots = ct.slots();
        let moduli = self.pk.mset().moduli();
        for (i, &m) in moduli.iter().enumerate() {
            let factor = pow_mod(self.pk.a_residues()[i], diff as u64, m);
            for v in &mut out.residues_mut()[i * slots..(i + 1) * slots] {
                *v = mul_mod(*v, factor, m);
            }
        }
        out.set_order(target);
        Ok(out)
    }

    pub fn binop(&self, op: BinOp, x: &Ciphertext, y: &Ciphertext) -> Result<Ciphertext, EvalError> {
        self.check(x)?;
        self.check(y)?;
        if x.mset_id() != y.mset_id() {
            return Err(EvalError::GroupMismatch(x.mset_id(), y.mset_id()));
        }
        let moduli = self.pk.mset().moduli();
        let uniform = x.is_slot_uniform() && y.is_slot_uniform();
        let (residues, order) = match op {
            BinOp::Add | BinOp::Sub => {
                let order = x.order().max(y.order());
                self.check_order(order)?;
                let xh = self.homogenize(x, order)?;
                let yh = self.homogenize(y, order)?;
                let f = if op == BinOp::Add { add_mod } else { sub_mod };
                (zip_rows(&xh, &yh, moduli, f), order)
            }
            BinOp::Mul => {
                let order = x.order() + y.order();
                self.check_order(order)?;
                (zip_rows(x, y, moduli, mul_mod), order)
            }
        };
        Ok(Ciphertext::from_raw(x.rows(), x.slots(), residues, order, x.mset_id(), uniform))
    }

    pub fn add(&self, x: &Ciphertext, y: &Ciphertext) -> Result<Ciphertext, EvalError> {
        self.binop(BinOp::Add, x, y)
    }

    pub fn sub(&self, x: &Ciphertext, y: &Ciphertext) -> Result<Ciphertext, EvalError> {
        self.binop(BinOp::Sub, x, y)
    }

    pub fn mul(&self, x: &Ciphertext, y: &Ciphertext) -> Result<Ciphertext, EvalError> {
        self.binop(BinOp::Mul, x, y)
    }

    /// `v -> (b_i - v) mod b_i` on every row.
    pub fn neg(&self, x: &Ciphertext) -> Result<Ciphertext, EvalError> {
        self.check(x)?;
        let mut out = x.clone();
        let slots = x.slots();
        for (i, &m) in self.pk.mset().moduli().iter().enumerate() {
            for v in &mut out.residues_mut()[i * slots..(i + 1) * slots] {
                *v = sub_mod(0, *v, m);
            }
        }
        Ok(out)
    }

    /// Entry-wise `x^k`; the order is multiplied by `k`.
    pub fn pow(&self, x: &Ciphertext, k: u32) -> Result<Ciphertext, EvalError> {
        self.check(x)?;
        if k == 0 {
            return Err(EvalError::ZeroExponent);
        }
        let order = x
            .order()
            .checked_mul(k)
            .ok_or(EvalError::OrderOverflow { order: u32::MAX, max: self.pk.envelope().max_order })?;
        self.check_order(order)?;
        let mut out = x.clone();
        let slots = x.slots();
        for (i, &m) in self.pk.mset().moduli().iter().enumerate() {
            for v in &mut out.residues_mut()[i * slots..(i + 1) * slots] {
                *v = pow_mod(*v, k as u64, m);
            }
        }
        out.set_order(order);
        Ok(out)
    }

    /// `op(x, encrypt_public(c))`.
    pub fn semiblind(&self, op: BinOp, x: &Ciphertext, c: impl Into<BigInt>) -> Result<Ciphertext, EvalError> {
        let c = encrypt_public_unbounded(&c.into(), self.pk)?;
        self.binop(op, x, &c)
    }

    /// Sum of a non-empty sequence of ciphertexts.
    pub fn sum<'c>(&self, items: impl IntoIterator<Item = &'c Ciphertext>) -> Result<Option<Ciphertext>, EvalError> {
        let mut acc: Option<Ciphertext> = None;
        for item in items {
            acc = Some(match acc {
                None => {
                    self.check(item)?;
                    item.clone()
                }
                Some(a) => self.add(&a, item)?,
            });
        }
        Ok(acc)
    }
}

/// Term count `w` and order `t` of an expression viewed as a homogenized
/// polynomial in its leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    pub terms: BigUint,
    pub order: u32,
}

pub fn expr_shape(expr: &Expr) -> Result<Shape, EvalError> {
    Ok(match expr {
        Expr::Lit(_) | Expr::Var(_) => Shape {
            terms: BigUint::one(),
            order: 1,
        },
        Expr::Neg(x) => expr_shape(x)?,
        Expr::Add(x, y) | Expr::Sub(x, y) => {
            let (sx, sy) = (expr_shape(x)?, expr_shape(y)?);
            Shape {
                terms: sx.terms + sy.terms,
                order: sx.order.max(sy.order),
            }
        }
        Expr::Mul(x, y) => {
            let (sx, sy) = (expr_shape(x)?, expr_shape(y)?);
            Shape {
                terms: sx.terms * sy.terms,
                order: sx.order.saturating_add(sy.order),
            }
        }
        Expr::Pow(x, k) => {
            if *k == 0 {
                return Err(EvalError::ZeroExponent);
            }
            let s = expr_shape(x)?;
            Shape {
                terms: Pow::pow(&s.terms, *k),
                order: s.order.saturating_mul(*k),
            }
        }
    })
}

fn max_literal(expr: &Expr) -> BigUint {
    match expr {
        Expr::Lit(v) => v.magnitude().clone(),
        Expr::Var(_) => BigUint::default(),
        Expr::Neg(x) | Expr::Pow(x, _) => max_literal(x),
        Expr::Add(x, y) | Expr::Sub(x, y) | Expr::Mul(x, y) => max_literal(x).max(max_literal(y)),
    }
}

/// Checks `w * (a * max_p)^t < B_s` for the expression, with `max_p` the
/// larger of the envelope bound and the largest literal.
pub fn check_capacity(expr: &Expr, pk: &PublicKey) -> Result<Shape, EvalError> {
    let shape = expr_shape(expr)?;
    let max_p = max_literal(expr).max(pk.envelope().max_p.clone());
    if shape.order > pk.envelope().max_order {
        return Err(EvalError::OrderOverflow {
            order: shape.order,
            max: pk.envelope().max_order,
        });
    }
    if !capacity_check(pk.a(), &max_p, shape.order, &shape.terms, pk.mset()) {
        return Err(EvalError::Capacity {
            required: capacity_requirement(pk.a(), &max_p, shape.order, &shape.terms) + 1u32,
            available: pk.mset().product().clone(),
        });
    }
    Ok(shape)
}

/// Evaluates `expr` blind. Literals are encrypted with the public key.
pub fn eval_expr(expr: &Expr, env: &HashMap<String, Ciphertext>, pk: &PublicKey) -> Result<Ciphertext, EvalError> {
    for name in expr.variables() {
        if !env.contains_key(&name) {
            return Err(EvalError::UnboundVariable(name));
        }
    }
    check_capacity(expr, pk)?;
    let ev = Evaluator::new(pk);
    eval_node(expr, env, &ev)
}

fn eval_node(expr: &Expr, env: &HashMap<String, Ciphertext>, ev: &Evaluator<'_>) -> Result<Ciphertext, EvalError> {
    match expr {
        Expr::Lit(v) => Ok(encrypt_public_unbounded(v, ev.public_key())?),
        Expr::Var(name) => {
            let ct = env
                .get(name)
                .ok_or_else(|| EvalError::UnboundVariable(name.clone()))?;
            ev.check(ct)?;
            Ok(ct.clone())
        }
        Expr::Neg(x) => ev.neg(&eval_node(x, env, ev)?),
        Expr::Add(x, y) => ev.add(&eval_node(x, env, ev)?, &eval_node(y, env, ev)?),
        Expr::Sub(x, y) => ev.sub(&eval_node(x, env, ev)?, &eval_node(y, env, ev)?),
        Expr::Mul(x, y) => ev.mul(&eval_node(x, env, ev)?, &eval_node(y, env, ev)?),
        Expr::Pow(x, k) => ev.pow(&eval_node(x, env, ev)?, *k),
    }
}
