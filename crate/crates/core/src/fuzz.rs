//! Random expressions for differential testing of the blind evaluator
//! against plaintext evaluation.

use num_bigint::BigInt;
use rand::Rng;

use crate::eval::check_capacity;
use crate::expr::Expr;
use crate::keys::PublicKey;

/// Upper bounds carried through an expression: `value` on the plaintext
/// magnitude, `noise` on the decryption error `|decrypt_raw - plain|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub value: f64,
    pub noise: f64,
}

/// Propagates bounds bottom-up. Variables get `leaf`, literals are exact.
///
/// For a product `(X + e1)(Y + e2)` the error is `e1*Y + e2*X + e1*e2`;
/// homogenization multiplies numerator and denominator by `a` and adds
/// nothing.
pub fn bounds(expr: &Expr, leaf: Bounds) -> Bounds {
    match expr {
        Expr::Lit(v) => Bounds {
            value: big_to_f64(v).abs(),
            noise: 0.0,
        },
        Expr::Var(_) => leaf,
        Expr::Neg(x) => bounds(x, leaf),
        Expr::Add(x, y) | Expr::Sub(x, y) => {
            let (bx, by) = (bounds(x, leaf), bounds(y, leaf));
            Bounds {
                value: bx.value + by.value,
                noise: bx.noise + by.noise,
            }
        }
        Expr::Mul(x, y) => mul_bounds(bounds(x, leaf), bounds(y, leaf)),
        Expr::Pow(x, k) => {
            let b = bounds(x, leaf);
            let mut acc = b;
            for _ in 1..*k {
                acc = mul_bounds(acc, b);
            }
            acc
        }
    }
}

fn mul_bounds(x: Bounds, y: Bounds) -> Bounds {
    Bounds {
        value: x.value * y.value,
        noise: x.noise * y.value + y.noise * x.value + x.noise * y.noise,
    }
}

fn big_to_f64(v: &BigInt) -> f64 {
    num_traits::ToPrimitive::to_f64(v).unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone)]
pub struct ExprGen {
    pub vars: Vec<String>,
    pub max_depth: usize,
    pub max_literal: u64,
    /// Chance of stopping early at an inner node.
    pub leaf_chance: f64,
}

impl ExprGen {
    pub fn new(vars: &[&str], max_depth: usize) -> Self {
        Self {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            max_depth,
            max_literal: 100,
            leaf_chance: 0.25,
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Expr {
        self.node(rng, self.max_depth)
    }

    fn leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> Expr {
        if self.vars.is_empty() || rng.gen_bool(0.2) {
            Expr::lit(rng.gen_range(0..=self.max_literal))
        } else {
            Expr::var(&self.vars[rng.gen_range(0..self.vars.len())])
        }
    }

    fn node<R: Rng + ?Sized>(&self, rng: &mut R, depth: usize) -> Expr {
        if depth == 0 || rng.gen_bool(self.leaf_chance) {
            return self.leaf(rng);
        }
        let d = depth - 1;
        let b = |e: Expr| Box::new(e);
        match rng.gen_range(0..20) {
            0..=5 => Expr::Add(b(self.node(rng, d)), b(self.node(rng, d))),
            6..=10 => Expr::Sub(b(self.node(rng, d)), b(self.node(rng, d))),
            11..=15 => Expr::Mul(b(self.node(rng, d)), b(self.node(rng, d))),
            16..=17 => Expr::Neg(b(self.node(rng, d))),
            _ => Expr::Pow(b(self.node(rng, d)), rng.gen_range(2..=3)),
        }
    }

    /// Draws until the expression passes the key's capacity check and its
    /// noise bound stays below one half, so nearest rounding is exact.
    pub fn generate_evaluable<R: Rng + ?Sized>(&self, rng: &mut R, pk: &PublicKey, leaf: Bounds) -> Expr {
        loop {
            let e = self.generate(rng);
            if bounds(&e, leaf).noise < 0.5 && check_capacity(&e, pk).is_ok() {
                return e;
            }
        }
    }
}
