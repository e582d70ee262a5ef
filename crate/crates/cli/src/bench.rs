//! Batch-size benchmark of the packed frame-difference kernel.
//!
//! Each batch size runs one warmup and `reps` timed repetitions; the
//! reported phase times are medians.

use std::fmt;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use cmpswhe::PrivateKey;
use cmpswhe_vision::batched::{decrypt_groups, diff_groups, encrypt_groups, kernel_packing_key, PIXEL_OFFSET};
use cmpswhe_vision::synth::moving_square_pair;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchRow {
    pub batch: usize,
    pub elements: usize,
    pub encrypt_us: u64,
    pub eval_us: u64,
    pub decrypt_us: u64,
}

impl BenchRow {
    pub fn total_us(&self) -> u64 {
        self.encrypt_us + self.eval_us + self.decrypt_us
    }

    /// Microseconds per element for a phase total.
    pub fn per_element(&self, us: u64) -> f64 {
        us as f64 / self.elements as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

const HEADER: &str = "batch,elements,encrypt_ms,eval_ms,decrypt_ms,encrypt_us_per_element,eval_us_per_element,decrypt_us_per_element,total_us_per_element";

fn ms(us: u64) -> String {
    format!("{}.{:03}", us / 1000, us % 1000)
}

fn parse_ms(s: &str) -> Result<u64> {
    let (whole, frac) = s.split_once('.').context("expected a decimal time")?;
    if frac.len() != 3 {
        bail!("time `{s}` must have three decimals");
    }
    Ok(whole.parse::<u64>()? * 1000 + frac.parse::<u64>()?)
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{HEADER}")?;
        for r in &self.rows {
            writeln!(
                f,
                "{},{},{},{},{},{:.3},{:.3},{:.3},{:.3}",
                r.batch,
                r.elements,
                ms(r.encrypt_us),
                ms(r.eval_us),
                ms(r.decrypt_us),
                r.per_element(r.encrypt_us),
                r.per_element(r.eval_us),
                r.per_element(r.decrypt_us),
                r.per_element(r.total_us()),
            )?;
        }
        Ok(())
    }
}

impl BenchReport {
    /// Reads the CSV written by `Display`; the derived columns are checked
    /// against the phase times.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            bail!("not a bench report");
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 9 {
                bail!("row `{line}` has {} columns", cells.len());
            }
            let row = BenchRow {
                batch: cells[0].parse()?,
                elements: cells[1].parse()?,
                encrypt_us: parse_ms(cells[2])?,
                eval_us: parse_ms(cells[3])?,
                decrypt_us: parse_ms(cells[4])?,
            };
            let derived: Vec<String> = [row.encrypt_us, row.eval_us, row.decrypt_us, row.total_us()]
                .iter()
                .map(|&us| format!("{:.3}", row.per_element(us)))
                .collect();
            if derived.iter().map(String::as_str).ne(cells[5..].iter().copied()) {
                bail!("derived columns disagree in `{line}`");
            }
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn row(&self, batch: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.batch == batch)
    }

    /// Per-element total time at batch 1 over that at `batch`.
    pub fn speedup(&self, batch: usize) -> Option<f64> {
        let base = self.row(1)?;
        let r = self.row(batch)?;
        Some(base.per_element(base.total_us()) / r.per_element(r.total_us()))
    }
}

fn median(mut v: Vec<Duration>) -> u64 {
    v.sort();
    v[v.len() / 2].as_micros() as u64
}

/// Times the kernel on a synthetic `size x size` frame pair for each batch
/// size.
pub fn bench_frame_diff(sk: &PrivateKey, batches: &[usize], size: usize, reps: usize, seed: u64) -> Result<BenchReport> {
    if reps == 0 {
        bail!("need at least one repetition");
    }
    let pair = moving_square_pair(seed, size, size);
    let pixels = size * size;
    let want: Vec<i64> = pair.prev.data().iter().zip(pair.cur.data()).map(|(&p, &c)| c as i64 - p as i64).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &k in batches {
        let pkey = kernel_packing_key(k, sk.public())?;
        let mut times = (Vec::new(), Vec::new(), Vec::new());
        for rep in 0..=reps {
            let t0 = Instant::now();
            let p = encrypt_groups(&pair.prev, 0, &pkey, sk, &mut rng)?;
            let c = encrypt_groups(&pair.cur, PIXEL_OFFSET, &pkey, sk, &mut rng)?;
            let t1 = Instant::now();
            let d = diff_groups(&p, &c, sk.public())?;
            let t2 = Instant::now();
            let out = decrypt_groups(&d, pixels, &pkey, sk)?;
            let t3 = Instant::now();
            if out != want {
                bail!("batch {k}: packed differences disagree with the plaintext");
            }
            if rep > 0 {
                times.0.push(t1 - t0);
                times.1.push(t2 - t1);
                times.2.push(t3 - t2);
            }
        }
        rows.push(BenchRow {
            batch: k,
            elements: pixels,
            encrypt_us: median(times.0),
            eval_us: median(times.1),
            decrypt_us: median(times.2),
        });
    }
    Ok(BenchReport { rows })
}
