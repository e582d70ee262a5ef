//! Compute-role pipelines. Everything here needs only the public key;
//! comparisons go through an [`OracleSession`].

use cmpswhe::cipher::{decrypt, encrypt_private, encrypt_public_unbounded};
use cmpswhe::modmath::capacity_check;
use cmpswhe::{BinOp, Ciphertext, Evaluator, PrivateKey, PublicKey, Rounding};
use num_bigint::{BigInt, BigUint};
use rand::{CryptoRng, Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::cascade::{Cascade, Detection, Rect};
use crate::frame::Frame;
use crate::oracle::OracleSession;
use crate::reference::{check_point, FLOW_OFFSETS};
use crate::VisionError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncFrame {
    width: usize,
    height: usize,
    cells: Vec<Ciphertext>,
}

impl EncFrame {
    pub fn new(width: usize, height: usize, cells: Vec<Ciphertext>) -> Result<Self, VisionError> {
        if cells.len() != width * height {
            return Err(VisionError::Dimension(format!(
                "{width}x{height} needs {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        if let Some(first) = cells.first() {
            if cells.iter().any(|c| c.order() != first.order()) {
                return Err(VisionError::Dimension("cells carry mixed orders".into()));
            }
        }
        Ok(Self { width, height, cells })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[Ciphertext] {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> &Ciphertext {
        &self.cells[y * self.width + x]
    }

    pub fn order(&self) -> u32 {
        self.cells.first().map_or(1, Ciphertext::order)
    }

    fn same_shape(&self, other: &EncFrame) -> Result<(), VisionError> {
        if self.width != other.width || self.height != other.height {
            return Err(VisionError::Dimension(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Encrypts every pixel with its own noise. Per-pixel generators are
/// ChaCha streams keyed from one draw of `rng`, so the result is
/// reproducible for a seeded `rng` regardless of thread count.
pub fn encrypt_frame<R: Rng + CryptoRng + ?Sized>(f: &Frame, sk: &PrivateKey, rng: &mut R) -> Result<EncFrame, VisionError> {
    let seed: [u8; 32] = rng.gen();
    let cells = f
        .data()
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut r = ChaCha20Rng::from_seed(seed);
            r.set_stream(i as u64);
            encrypt_private(p, sk, &mut r)
        })
        .collect::<Result<Vec<_>, _>>()?;
    EncFrame::new(f.width(), f.height(), cells)
}

/// Client-side decryption of every cell.
pub fn decrypt_frame(ef: &EncFrame, sk: &PrivateKey) -> Result<Vec<BigInt>, VisionError> {
    ef.cells
        .par_iter()
        .map(|c| decrypt(c, sk, Rounding::Nearest).map_err(VisionError::from))
        .collect()
}

/// Per pixel `(cur - prev)^2`; order 2.
pub fn frame_diff_blind(prev: &EncFrame, cur: &EncFrame, pk: &PublicKey) -> Result<EncFrame, VisionError> {
    prev.same_shape(cur)?;
    let ev = Evaluator::new(pk);
    let cells = prev
        .cells
        .par_iter()
        .zip(cur.cells.par_iter())
        .map(|(p, c)| {
            let d = ev.sub(c, p)?;
            ev.pow(&d, 2)
        })
        .collect::<Result<Vec<_>, _>>()?;
    EncFrame::new(prev.width, prev.height, cells)
}

/// Background difference; same arithmetic as [`frame_diff_blind`] with the
/// background in place of the previous frame.
pub fn bg_diff_blind(bg: &EncFrame, cur: &EncFrame, pk: &PublicKey) -> Result<EncFrame, VisionError> {
    frame_diff_blind(bg, cur, pk)
}

/// Mask of pixels whose squared difference exceeds `t^2`.
pub fn threshold_mask(session: &mut OracleSession, diff: &EncFrame, t: u32) -> Result<Vec<bool>, VisionError> {
    let t2 = BigInt::from(t as u64 * t as u64);
    diff.cells.iter().map(|c| session.threshold(c, t2.clone())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowResult {
    /// One entry per requested point; `None` for rejected points.
    pub displacements: Vec<Option<(i64, i64)>>,
    pub rejected: Vec<(usize, usize)>,
}

/// Blind 3x3 SSD for each candidate offset, argmin by the oracle.
pub fn optical_flow_blind(
    prev: &EncFrame,
    cur: &EncFrame,
    points: &[(usize, usize)],
    session: &mut OracleSession,
    pk: &PublicKey,
) -> Result<FlowResult, VisionError> {
    prev.same_shape(cur)?;
    let ev = Evaluator::new(pk);
    let shape = Frame::filled(cur.width, cur.height, 0);
    let mut displacements = Vec::with_capacity(points.len());
    let mut rejected = Vec::new();
    for &p in points {
        if !check_point(&shape, p) {
            rejected.push(p);
            displacements.push(None);
            continue;
        }
        let ssds = FLOW_OFFSETS
            .par_iter()
            .map(|&d| window_ssd_blind(prev, cur, p, d, &ev))
            .collect::<Result<Vec<_>, _>>()?;
        let best = session.argmin(&ssds)?;
        let (dx, dy) = FLOW_OFFSETS[best];
        displacements.push(Some((-dx, -dy)));
    }
    Ok(FlowResult {
        displacements,
        rejected,
    })
}

fn window_ssd_blind(
    prev: &EncFrame,
    cur: &EncFrame,
    (x, y): (usize, usize),
    (dx, dy): (i64, i64),
    ev: &Evaluator<'_>,
) -> Result<Ciphertext, VisionError> {
    let mut acc: Option<Ciphertext> = None;
    for wy in -1..=1i64 {
        for wx in -1..=1i64 {
            let c = cur.get((x as i64 + wx) as usize, (y as i64 + wy) as usize);
            let p = prev.get((x as i64 + dx + wx) as usize, (y as i64 + dy + wy) as usize);
            let d = ev.sub(c, p)?;
            let sq = ev.pow(&d, 2)?;
            acc = Some(match acc {
                None => sq,
                Some(a) => ev.add(&a, &sq)?,
            });
        }
    }
    Ok(acc.expect("nine terms"))
}

/// Inclusive 2-D prefix sums using additions and subtractions only.
pub fn integral_blind(ef: &EncFrame, pk: &PublicKey) -> Result<EncFrame, VisionError> {
    let ev = Evaluator::new(pk);
    let (w, h) = (ef.width, ef.height);
    // row prefix sums in parallel, then column accumulation in parallel
    let rows: Vec<Vec<Ciphertext>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::with_capacity(w);
            for x in 0..w {
                let c = ef.get(x, y);
                row.push(if x == 0 { c.clone() } else { ev.add(&row[x - 1], c)? });
            }
            Ok(row)
        })
        .collect::<Result<_, VisionError>>()?;
    let cols: Vec<Vec<Ciphertext>> = (0..w)
        .into_par_iter()
        .map(|x| {
            let mut col: Vec<Ciphertext> = Vec::with_capacity(h);
            for (y, row) in rows.iter().enumerate() {
                col.push(if y == 0 { row[x].clone() } else { ev.add(&col[y - 1], &row[x])? });
            }
            Ok(col)
        })
        .collect::<Result<_, VisionError>>()?;
    let mut cells = Vec::with_capacity(w * h);
    for y in 0..h {
        for col in &cols {
            cells.push(col[y].clone());
        }
    }
    EncFrame::new(w, h, cells)
}

fn rect_sum_blind(ii: &EncFrame, x: usize, y: usize, w: usize, h: usize, ev: &Evaluator<'_>) -> Result<Ciphertext, VisionError> {
    let (x1, y1) = (x + w - 1, y + h - 1);
    let mut s = ii.get(x1, y1).clone();
    if x > 0 {
        s = ev.sub(&s, ii.get(x - 1, y1))?;
    }
    if y > 0 {
        s = ev.sub(&s, ii.get(x1, y - 1))?;
    }
    if x > 0 && y > 0 {
        s = ev.add(&s, ii.get(x - 1, y - 1))?;
    }
    Ok(s)
}

/// Weighted rectangle sums at `origin`; each weight enters semi-blind, so
/// the feature has order `ii.order() + 1`.
pub fn haar_blind(ii: &EncFrame, origin: (usize, usize), rects: &[Rect], pk: &PublicKey) -> Result<Ciphertext, VisionError> {
    let ev = Evaluator::new(pk);
    let mut acc: Option<Ciphertext> = None;
    for r in rects {
        let (x, y) = (origin.0 + r.x, origin.1 + r.y);
        if r.w == 0 || r.h == 0 || x + r.w > ii.width || y + r.h > ii.height {
            return Err(VisionError::Dimension(format!("rectangle {r:?} at {origin:?} leaves the frame")));
        }
        let s = rect_sum_blind(ii, x, y, r.w, r.h, &ev)?;
        let term = ev.semiblind(BinOp::Mul, &s, r.weight)?;
        acc = Some(match acc {
            None => term,
            Some(a) => ev.add(&a, &term)?,
        });
    }
    acc.ok_or_else(|| VisionError::Dimension("feature without rectangles".into()))
}

/// Checks that features and stage sums fit the key before any window runs.
pub fn check_cascade_budget(c: &Cascade, pk: &PublicKey) -> Result<(), VisionError> {
    c.validate()?;
    for stage in &c.stages {
        for s in &stage.stumps {
            let max_feature: u64 = s
                .rects
                .iter()
                .map(|r| r.weight.unsigned_abs() * 255 * (r.w * r.h) as u64)
                .sum();
            let terms = BigUint::from(s.rects.len() * 4);
            if !capacity_check(pk.a(), &BigUint::from(max_feature.max(1)), 2, &terms, pk.mset()) {
                return Err(VisionError::Budget(format!("feature bound {max_feature} exceeds key capacity")));
            }
        }
        let magnitude = BigUint::from(c.max_stage_magnitude().max(1) as u64);
        let terms = BigUint::from(stage.stumps.len().max(1));
        if !capacity_check(pk.a(), &magnitude, 1, &terms, pk.mset()) {
            return Err(VisionError::Budget("stage sum exceeds key capacity".into()));
        }
    }
    Ok(())
}

/// Single-scale sweep. Stump verdicts and stage verdicts come from the
/// oracle; stage sums are accumulated blind from public encryptions.
pub fn cascade_blind(
    ef: &EncFrame,
    c: &Cascade,
    step: usize,
    session: &mut OracleSession,
    pk: &PublicKey,
) -> Result<Vec<Detection>, VisionError> {
    check_cascade_budget(c, pk)?;
    let ev = Evaluator::new(pk);
    let ii = integral_blind(ef, pk)?;
    let (ww, wh) = c.window;
    let mut out = Vec::new();
    'windows: for origin in c.windows(ef.width, ef.height, step) {
        for stage in &c.stages {
            let features = stage
                .stumps
                .par_iter()
                .map(|s| haar_blind(&ii, origin, &s.rects, pk))
                .collect::<Result<Vec<_>, _>>()?;
            let mut sum = encrypt_public_unbounded(&BigInt::from(0), pk)?;
            for (s, f) in stage.stumps.iter().zip(&features) {
                let bit = session.threshold(f, s.threshold)?;
                let v = if bit { s.right } else { s.left };
                sum = ev.add(&sum, &encrypt_public_unbounded(&BigInt::from(v), pk)?)?;
            }
            if !session.threshold(&sum, stage.threshold - 1)? {
                continue 'windows;
            }
        }
        out.push(Detection {
            x: origin.0,
            y: origin.1,
            w: ww,
            h: wh,
        });
    }
    Ok(out)
}
