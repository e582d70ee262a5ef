use std::time::Instant;

use cmpswhe::cipher::{encrypt_private, encrypt_public};
use cmpswhe::{decrypt, derive_keys, Ciphertext, KeyParams, PrivateKey, Rounding, UserKey};
use cmpswhe_inference::blind::encrypt_input;
use cmpswhe_inference::data::{load_digits, model_path};
use cmpswhe_inference::*;
use cmpswhe_vision::{Frame, OracleSession};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn key() -> PrivateKey {
    derive_keys(&UserKey::new(*b"inference-test!!"), 11, &KeyParams::default()).unwrap().1
}

fn big(v: i64) -> BigInt {
    BigInt::from(v)
}

fn enc(vals: &[i64], sk: &PrivateKey, rng: &mut ChaCha20Rng) -> Vec<Ciphertext> {
    vals.iter().map(|&v| encrypt_private(v, sk, rng).unwrap()).collect()
}

fn enc_weights(w: &[&[i64]], sk: &PrivateKey) -> Vec<Vec<Ciphertext>> {
    w.iter().map(|row| row.iter().map(|&v| encrypt_public(v, sk.public()).unwrap()).collect()).collect()
}

fn dec(cts: &[Ciphertext], sk: &PrivateKey) -> Vec<BigInt> {
    cts.iter().map(|c| decrypt(c, sk, Rounding::Nearest).unwrap()).collect()
}

#[test]
fn dense_examples() {
    let sk = key();
    let pk = sk.public();
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let x = enc(&[7, -3], &sk, &mut rng);

    let id = blind_dense(&x, &enc_weights(&[&[100, 0], &[0, 100]], &sk), pk).unwrap();
    assert_eq!(dec(&id, &sk), vec![big(700), big(-300)]);
    assert_eq!(id[0].order(), 2);

    let out = blind_dense(&x, &enc_weights(&[&[2, 5], &[-4, 1]], &sk), pk).unwrap();
    assert_eq!(dec(&out, &sk), vec![big(2 * 7 + 5 * -3), big(-4 * 7 - 3)]);

    let zero = blind_dense(&x, &enc_weights(&[&[0, 0]], &sk), pk).unwrap();
    assert_eq!(dec(&zero, &sk), vec![big(0)]);

    assert!(blind_dense(&x, &enc_weights(&[&[1, 2, 3]], &sk), pk).is_err());
}

#[test]
fn dense_matches_plain_matvec() {
    let sk = key();
    let pk = sk.public();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for _ in 0..5 {
        let cols = rng.gen_range(1..12);
        let rows = rng.gen_range(1..6);
        let x: Vec<i64> = (0..cols).map(|_| rng.gen_range(-500..=500)).collect();
        let w: Vec<Vec<i64>> = (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(-300..=300)).collect()).collect();
        let refs: Vec<&[i64]> = w.iter().map(Vec::as_slice).collect();
        let got = dec(&blind_dense(&enc(&x, &sk, &mut rng), &enc_weights(&refs, &sk), pk).unwrap(), &sk);
        let want: Vec<BigInt> = w.iter().map(|r| big(r.iter().zip(&x).map(|(a, b)| a * b).sum())).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn activation_examples() {
    let sk = key();
    let pk = sk.public();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let fit = fit_relu_poly(2, -4.0, 4.0).unwrap();
    let poly = fit.to_fixed(2).unwrap();
    let act = EncryptedActivation::new(&poly, pk).unwrap();

    let zero = blind_activation(&enc(&[0], &sk, &mut rng)[0], &act, pk).unwrap();
    assert_eq!(decrypt(&zero, &sk, Rounding::Nearest).unwrap(), &poly.k[2] * big(10_000));
    assert_eq!(zero.order(), 3);

    let ident = PolyActivation {
        k: vec![big(0), big(100), big(0)],
        n: 2,
        interval: (-4.0, 4.0),
    };
    let ia = EncryptedActivation::new(&ident, pk).unwrap();
    let y = blind_activation(&enc(&[-123], &sk, &mut rng)[0], &ia, pk).unwrap();
    assert_eq!(decrypt(&y, &sk, Rounding::Nearest).unwrap(), big(-123 * 100 * 100));

    // against the plaintext polynomial and against relu itself
    for x in (-400..=400).step_by(37) {
        let ct = blind_activation(&enc(&[x], &sk, &mut rng)[0], &act, pk).unwrap();
        let got = decrypt(&ct, &sk, Rounding::Nearest).unwrap();
        assert_eq!(got, poly.eval_fixed(&big(x)));
        let real: f64 = got.to_string().parse::<f64>().unwrap() / 1e6;
        let xf = x as f64 / 100.0;
        // fit deviation plus coefficient truncation (3 coefficients, 0.01 each, |x| <= 4)
        assert!((real - xf.max(0.0)).abs() <= fit.max_deviation + 0.01 * (16.0 + 4.0 + 1.0), "x={x} got {real}");
    }
}

#[test]
fn rescale_examples() {
    let sk = key();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut s = OracleSession::with_seed(sk.clone(), 3);
    let ct = encrypt_private(31400, &sk, &mut rng).unwrap();
    assert_eq!(decrypt(&rescale_oracle(&mut s, &ct, &big(100)).unwrap(), &sk, Rounding::Nearest).unwrap(), big(314));
    let same = rescale_oracle(&mut s, &ct, &big(1)).unwrap();
    assert_eq!(decrypt(&same, &sk, Rounding::Nearest).unwrap(), big(31400));
    assert_eq!(same.order(), 1);

    let other = derive_keys(&UserKey::new([9; 16]), 1, &KeyParams::default()).unwrap().1;
    let foreign = encrypt_private(5, &other, &mut rng).unwrap();
    assert!(matches!(rescale_oracle(&mut s, &foreign, &big(1)), Err(InferenceError::KeyMismatch)));
}

#[test]
fn rescaled_dense_within_one_grid_unit_of_float() {
    let sk = key();
    let pk = sk.public();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut s = OracleSession::with_seed(sk.clone(), 4);
    for _ in 0..20 {
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
        let w: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xi: Vec<i64> = x.iter().map(|v| (v * 100.0).floor() as i64).collect();
        let wi: Vec<i64> = w.iter().map(|&v| to_fixed(v, 2).unwrap().try_into().unwrap()).collect();
        let d = blind_dense(&enc(&xi, &sk, &mut rng), &enc_weights(&[&wi], &sk), pk).unwrap();
        let r = rescale_oracle(&mut s, &d[0], &big(100)).unwrap();
        let got: i64 = decrypt(&r, &sk, Rounding::Nearest).unwrap().try_into().unwrap();
        // exact against the integer pipeline
        let plain: i64 = wi.iter().zip(&xi).map(|(a, b)| a * b).sum();
        assert_eq!(got, (2 * plain + 100).div_euclid(200));
        // floor on both factors moves each product by under (100|w| + 100|x| + 1) / 100
        let f: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() * 100.0;
        assert!((got as f64 - f).abs() <= 6.0 * 2.01 + 0.5, "{got} vs {f}");
    }
}

fn bundled() -> (FloatModel, FixedPointModel) {
    let m = FloatModel::read(model_path()).unwrap();
    let f = FixedPointModel::from_float(&m).unwrap();
    (m, f)
}

#[test]
fn layer_boundaries_match_fixed_trace() {
    let sk = key();
    let pk = sk.public();
    let (_, fx) = bundled();
    let em = encrypt_model(&fx, pk).unwrap();
    let digits = load_digits().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut s = OracleSession::with_seed(sk.clone(), 5);
    for (img, _) in digits.iter().take(3) {
        let trace = plain::trace_fixed(&fx, img.data()).unwrap();
        let mut x = encrypt_input(img, fx.n, &sk, &mut rng).unwrap();
        assert_eq!(dec(&x, &sk), trace.input);
        for (i, w) in em.layers.iter().enumerate() {
            let z = blind_dense(&x, w, pk).unwrap();
            assert_eq!(dec(&z, &sk), trace.dense[i], "dense {i}");
            if !fx.is_hidden(i) {
                break;
            }
            let mut next = Vec::new();
            for v in &z {
                let v = rescale_oracle(&mut s, v, &fx.scale()).unwrap();
                let a = blind_activation(&v, &em.act, pk).unwrap();
                next.push(rescale_oracle(&mut s, &a, &fx.act.magnification()).unwrap());
            }
            assert_eq!(dec(&next, &sk), trace.hidden[i], "hidden {i}");
            x = next;
        }
    }
    // two rescales per hidden neuron per image
    assert_eq!(s.rescale_count(), 3 * 2 * (16 + 16));
    assert!(s.transcript().is_empty());
}

#[test]
fn blind_predictions_match_fixed_pipeline() {
    let sk = key();
    let (_, fx) = bundled();
    let em = encrypt_model(&fx, sk.public()).unwrap();
    let digits = load_digits().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut s = OracleSession::with_seed(sk.clone(), 6);
    let start = Instant::now();
    for (img, _) in digits.iter().take(10) {
        let p = predict_blind(img, &em, &mut s, &sk, &mut rng).unwrap();
        let trace = plain::trace_fixed(&fx, img.data()).unwrap();
        assert_eq!(p.outputs, trace.output());
        assert_eq!(p.digit, predict_fixed(&fx, img.data()).unwrap());
    }
    eprintln!("10 blind predictions in {:?}", start.elapsed());
}

#[test]
fn quantization_keeps_float_predictions() {
    let (m, fx) = bundled();
    let digits = load_digits().unwrap();
    assert_eq!(digits.len(), 200);
    let agree = digits
        .iter()
        .filter(|(img, _)| predict_fixed(&fx, img.data()).unwrap() == predict_float(&m, img.data()).unwrap())
        .count();
    let correct = digits.iter().filter(|(img, l)| predict_float(&m, img.data()).unwrap() == *l).count();
    eprintln!("fixed/float agreement {agree}/200, float accuracy {correct}/200");
    assert!(agree >= 180);
}

#[test]
fn argmax_invariant_under_positive_scaling() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for _ in 0..200 {
        let v: Vec<BigInt> = (0..10).map(|_| big(rng.gen_range(-50..50))).collect();
        let k = big(rng.gen_range(1..1_000_000));
        let scaled: Vec<BigInt> = v.iter().map(|x| x * &k).collect();
        assert_eq!(argmax(&v), argmax(&scaled));
    }
}

#[test]
fn degenerate_inputs() {
    let sk = key();
    let (_, fx) = bundled();
    let em = encrypt_model(&fx, sk.public()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut s = OracleSession::with_seed(sk.clone(), 8);
    let blank = Frame::filled(28, 28, 0);
    let p = predict_blind(&blank, &em, &mut s, &sk, &mut rng).unwrap();
    assert_eq!(p.digit, predict_fixed(&fx, blank.data()).unwrap());
    assert!(predict_blind(&Frame::filled(27, 28, 0), &em, &mut s, &sk, &mut rng).is_err());
}
