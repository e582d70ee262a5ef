//! Error lab: how the decryption error of a blind product moves with the
//! amplification factor, the number of multiplications, and the balance
//! between the multipliers.
//!
//! Each configuration is encrypted under a small dedicated key whose
//! modulus product is sized so the largest configuration overflows. Within
//! one run every configuration reuses the same seed, so the sweeps compare
//! like with like (common random numbers); runs differ by seed.

use std::fmt;

use cmpswhe::cipher::{decrypt, decrypt_raw, encrypt_private_traced};
use cmpswhe::modmath::primes_above;
use cmpswhe::{Envelope, Evaluator, ModulusSet, PrivateKey, PublicKey, Rounding};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{pow, One, Signed, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Largest `eta` for every lab key.
pub const ETA_MAX: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Amplification,
    Depth,
    Imbalance,
}

impl Sweep {
    pub const ALL: [Sweep; 3] = [Sweep::Amplification, Sweep::Depth, Sweep::Imbalance];

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Amplification => "amplification",
            Sweep::Depth => "depth",
            Sweep::Imbalance => "imbalance",
        }
    }

    /// Configurations in the order the trend is read: increasing `a`,
    /// increasing multiplication count, increasing imbalance.
    pub fn configs(self) -> Vec<Config> {
        match self {
            Sweep::Amplification => (4..=7u32)
                .map(|e| Config {
                    label: format!("a=10^{e}"),
                    a: pow(BigUint::from(10u32), e as usize),
                    factors: vec![4000, 2500],
                    modulus_bits: 34,
                })
                .collect(),
            Sweep::Depth => (1..=6u32)
                .map(|k| {
                    let mut factors = vec![10u64.pow(7 - k)];
                    factors.extend(std::iter::repeat_n(10, k as usize));
                    Config {
                        label: format!("{k} multiplications"),
                        a: BigUint::from(10_000u32),
                        factors,
                        modulus_bits: 55,
                    }
                })
                .collect(),
            Sweep::Imbalance => [(10_000, 1000), (20_000, 500), (50_000, 200), (100_000, 100), (200_000, 50)]
                .into_iter()
                .map(|(x, y)| Config {
                    label: format!("{x}*{y}"),
                    a: BigUint::from(1_000_000u32),
                    factors: vec![x, y],
                    modulus_bits: 34,
                })
                .collect(),
        }
    }

    fn trend_word(self) -> &'static str {
        match self {
            Sweep::Amplification => "decreasing",
            _ => "increasing",
        }
    }
}

impl std::str::FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Sweep::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| format!("unknown sweep `{s}` (amplification, depth, imbalance)"))
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub label: String,
    pub a: BigUint,
    pub factors: Vec<u64>,
    /// Two moduli just above `2^modulus_bits`.
    pub modulus_bits: u32,
}

impl Config {
    pub fn expected(&self) -> BigInt {
        self.factors.iter().map(|&f| BigInt::from(f)).product()
    }

    pub fn key(&self) -> PrivateKey {
        let moduli = primes_above(1u64 << self.modulus_bits, 2).expect("primes exist");
        let env = Envelope {
            max_p: BigUint::from(1_000_000u32),
            max_order: 8,
            max_terms: BigUint::one(),
        };
        let pk = PublicKey::new_relaxed(self.a.clone(), ModulusSet::new(moduli).expect("distinct"), 4, env).expect("lab key");
        PrivateKey::new_relaxed(pk, vec![1, 3], BigUint::from(ETA_MAX)).expect("lab template")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// The amplified product wrapped past half the modulus product.
    Overflow,
    Value { result: BigInt, error: BigRational },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabRow {
    pub sweep: Sweep,
    pub run: usize,
    pub config: String,
    pub expected: BigInt,
    pub outcome: Outcome,
}

impl LabRow {
    pub fn error_ratio(&self) -> Option<f64> {
        match &self.outcome {
            Outcome::Value { error, .. } => (error / BigRational::from_integer(self.expected.clone())).to_f64(),
            Outcome::Overflow => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trend {
    pub sweep: Sweep,
    pub monotone_runs: usize,
    pub runs: usize,
}

impl Trend {
    /// Majority of runs monotone.
    pub fn holds(&self) -> bool {
        2 * self.monotone_runs > self.runs
    }
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} error {} in {}/{} runs: {}",
            self.sweep.name(),
            self.sweep.trend_word(),
            self.monotone_runs,
            self.runs,
            if self.holds() { "holds" } else { "FAILS" }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabReport {
    pub rows: Vec<LabRow>,
    pub trends: Vec<Trend>,
}

impl LabReport {
    pub fn holds(&self) -> bool {
        self.trends.iter().all(Trend::holds)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep,run,config,expected,result,error,error_ratio\n");
        for r in &self.rows {
            let (result, error, ratio) = match &r.outcome {
                Outcome::Overflow => ("overflow".to_string(), String::new(), String::new()),
                Outcome::Value { result, error } => (
                    result.to_string(),
                    format!("{:.6}", error.to_f64().unwrap_or(f64::NAN)),
                    format!("{:.3e}", r.error_ratio().unwrap_or(f64::NAN)),
                ),
            };
            out.push_str(&format!("{},{},{},{},{result},{error},{ratio}\n", r.sweep.name(), r.run, r.config, r.expected));
        }
        for t in &self.trends {
            out.push_str(&format!("# {t}\n"));
        }
        out
    }
}

/// One configuration under one seed.
pub fn measure(cfg: &Config, seed: u64) -> Outcome {
    let sk = cfg.key();
    let pk = sk.public();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut amplified = BigUint::one();
    let mut cts = Vec::with_capacity(cfg.factors.len());
    for &f in &cfg.factors {
        let (ct, eta) = encrypt_private_traced(f, &sk, &mut rng).expect("lab leaves fit the key");
        amplified *= pk.a() * f + eta;
        cts.push(ct);
    }
    if amplified * 2u32 >= *pk.mset().product() {
        return Outcome::Overflow;
    }
    let ev = Evaluator::new(pk);
    let mut acc = cts[0].clone();
    for ct in &cts[1..] {
        acc = ev.mul(&acc, ct).expect("order within the lab envelope");
    }
    let raw = decrypt_raw(&acc, &sk).expect("lab key decrypts");
    let result = decrypt(&acc, &sk, Rounding::Nearest).expect("lab key decrypts");
    Outcome::Value {
        result,
        error: raw - BigRational::from_integer(cfg.expected()),
    }
}

pub fn run_sweep(sweep: Sweep, runs: usize, seed: u64) -> (Vec<LabRow>, Trend) {
    let configs = sweep.configs();
    let mut rows = Vec::new();
    let mut monotone_runs = 0;
    for run in 0..runs {
        let run_seed = seed.wrapping_add(run as u64);
        let errors: Vec<BigRational> = configs
            .iter()
            .filter_map(|cfg| {
                let outcome = measure(cfg, run_seed);
                let err = match &outcome {
                    Outcome::Value { error, .. } => Some(error.abs()),
                    Outcome::Overflow => None,
                };
                rows.push(LabRow {
                    sweep,
                    run,
                    config: cfg.label.clone(),
                    expected: cfg.expected(),
                    outcome,
                });
                err
            })
            .collect();
        let monotone = errors.windows(2).all(|w| match sweep {
            Sweep::Amplification => w[1] < w[0],
            _ => w[1] > w[0],
        });
        if monotone && errors.len() >= 2 {
            monotone_runs += 1;
        }
    }
    (rows, Trend { sweep, monotone_runs, runs })
}

pub fn run_lab(sweeps: &[Sweep], runs: usize, seed: u64) -> LabReport {
    let mut rows = Vec::new();
    let mut trends = Vec::new();
    for &s in sweeps {
        let (r, t) = run_sweep(s, runs, seed);
        rows.extend(r);
        trends.push(t);
    }
    LabReport { rows, trends }
}

/// Configurations that overflow in every run, by sweep.
pub fn overflow_configs(report: &LabReport) -> Vec<(Sweep, String)> {
    let mut out: Vec<(Sweep, String)> = Vec::new();
    for r in &report.rows {
        if r.outcome == Outcome::Overflow && !out.iter().any(|(s, c)| *s == r.sweep && *c == r.config) {
            out.push((r.sweep, r.config.clone()));
        }
    }
    out
}
