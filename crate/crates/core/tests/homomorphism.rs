use std::collections::HashMap;

use cmpswhe::cipher::{decrypt, decrypt_raw, encrypt_private, encrypt_private_traced};
use cmpswhe::eval::{eval_expr, BinOp, Evaluator};
use cmpswhe::fuzz::{Bounds, ExprGen};
use cmpswhe::{derive_keys, Ciphertext, KeyParams, PrivateKey, Rounding, UserKey};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn key() -> PrivateKey {
    derive_keys(&UserKey::new(*b"homomorphism-key"), 1_700_000_000, &KeyParams::default())
        .unwrap()
        .1
}

fn leaf_bounds(sk: &PrivateKey) -> Bounds {
    let ratio = sk.eta_max().to_f64().unwrap() / sk.public().a().to_f64().unwrap();
    Bounds {
        value: 1024.0,
        noise: ratio,
    }
}

#[test]
fn random_expressions_match_plaintext() {
    let sk = key();
    let pk = sk.public();
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let gen = ExprGen::new(&["x", "y", "z", "w"], 4);
    let leaf = leaf_bounds(&sk);
    for case in 0..1000 {
        let e = gen.generate_evaluable(&mut rng, pk, leaf);
        let mut plain = HashMap::new();
        let mut env = HashMap::new();
        for v in e.variables() {
            let p: u32 = rng.gen_range(0..=1024);
            env.insert(v.clone(), encrypt_private(p, &sk, &mut rng).unwrap());
            plain.insert(v, BigInt::from(p));
        }
        let want = e.eval_plain(&plain).unwrap();
        let ct = eval_expr(&e, &env, pk).unwrap();
        let got = decrypt(&ct, &sk, Rounding::Nearest).unwrap();
        assert_eq!(got, want, "case {case}: {e}");
    }
}

#[test]
fn product_error_identity() {
    let sk = key();
    let ev = Evaluator::new(sk.public());
    let a = BigRational::from_integer(BigInt::from(sk.public().a().clone()));
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for _ in 0..200 {
        let x: u32 = rng.gen_range(0..=65536);
        let y: u32 = rng.gen_range(0..=65536);
        let (cx, e1) = encrypt_private_traced(x, &sk, &mut rng).unwrap();
        let (cy, e2) = encrypt_private_traced(y, &sk, &mut rng).unwrap();
        let prod = ev.mul(&cx, &cy).unwrap();
        let r = |v: &BigUint| BigRational::from_integer(BigInt::from(v.clone()));
        let (x, y, e1, e2) = (
            BigRational::from_integer(x.into()),
            BigRational::from_integer(y.into()),
            r(&e1),
            r(&e2),
        );
        let expected = &x * &y + (&e1 * &y + &e2 * &x) / &a + &e1 * &e2 / (&a * &a);
        assert_eq!(decrypt_raw(&prod, &sk).unwrap(), expected);
    }
}

#[test]
fn additive_error_stays_in_budget() {
    let sk = key();
    let ev = Evaluator::new(sk.public());
    let a = BigRational::from_integer(BigInt::from(sk.public().a().clone()));
    let eta_max = BigRational::from_integer(BigInt::from(sk.eta_max().clone()));
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for m in [1usize, 2, 10, 100] {
        let xs: Vec<u32> = (0..m).map(|_| rng.gen_range(0..1000)).collect();
        let cts: Vec<Ciphertext> = xs.iter().map(|&x| encrypt_private(x, &sk, &mut rng).unwrap()).collect();
        let sum = ev.sum(&cts).unwrap().unwrap();
        let plain: u64 = xs.iter().map(|&x| x as u64).sum();
        let err = decrypt_raw(&sum, &sk).unwrap() - BigRational::from_integer(plain.into());
        assert!(err >= BigRational::zero());
        let m_big = BigRational::from_integer(BigInt::from(m));
        assert!(err < m_big * &eta_max / &a);
    }
}

#[test]
fn subtraction_uses_the_plus_b_rule() {
    let sk = key();
    let ev = Evaluator::new(sk.public());
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    for _ in 0..50 {
        let x = encrypt_private(rng.gen_range(0..100u32), &sk, &mut rng).unwrap();
        let y = encrypt_private(rng.gen_range(100..1000u32), &sk, &mut rng).unwrap();
        let d = ev.sub(&x, &y).unwrap();
        for (i, &b) in sk.public().mset().moduli().iter().enumerate() {
            for k in 0..d.slots() {
                let want = (x.get(i, k) as u128 + b as u128 - y.get(i, k) as u128) % b as u128;
                assert_eq!(d.get(i, k) as u128, want);
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Add,
    Sub,
    Mul,
    Neg,
    Pow(u32),
}

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        Just(Op::Add),
        Just(Op::Sub),
        Just(Op::Mul),
        Just(Op::Neg),
        (1u32..=2).prop_map(Op::Pow),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn order_bookkeeping(ops in proptest::collection::vec((op_strategy(), 0usize..4), 1..6), seed in any::<u64>()) {
        let sk = key();
        let ev = Evaluator::new(sk.public());
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut pool: Vec<Ciphertext> = (0..4).map(|i| encrypt_private(i as u32, &sk, &mut rng).unwrap()).collect();
        for (op, j) in ops {
            let last = pool.last().unwrap().clone();
            let other = pool[j].clone();
            let result = match op {
                Op::Add => ev.binop(BinOp::Add, &last, &other).map(|r| (r, last.order().max(other.order()))),
                Op::Sub => ev.binop(BinOp::Sub, &last, &other).map(|r| (r, last.order().max(other.order()))),
                Op::Mul => ev.binop(BinOp::Mul, &last, &other).map(|r| (r, last.order() + other.order())),
                Op::Neg => ev.neg(&last).map(|r| (r, last.order())),
                Op::Pow(k) => ev.pow(&last, k).map(|r| (r, last.order() * k)),
            };
            match result {
                Ok((ct, want)) => {
                    prop_assert_eq!(ct.order(), want);
                    pool.push(ct);
                }
                Err(_) => {
                    // only the envelope order limit may refuse an operation
                    let max = sk.public().envelope().max_order;
                    let would = match op {
                        Op::Mul => last.order() + other.order(),
                        Op::Pow(k) => last.order() * k,
                        _ => last.order().max(other.order()),
                    };
                    prop_assert!(would > max);
                }
            }
        }
    }
}
