//! Pipeline demos on the bundled synthetic inputs. Every case runs the
//! blind pipeline and its plaintext reference and reports whether they
//! agree.

use std::fmt;
use std::path::Path;

use anyhow::{bail, Result};
use cmpswhe::PrivateKey;
use cmpswhe_inference::data::load_digits;
use cmpswhe_inference::{encrypt_model, predict_blind, predict_fixed, EncryptedModel, FixedPointModel, FloatModel};
use cmpswhe_vision::points::select_points;
use cmpswhe_vision::reference::{self, diff_mask};
use cmpswhe_vision::synth::{background_sequence, detection_image, moving_square_pair, TOY_CASCADE};
use cmpswhe_vision::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const THRESHOLD: u32 = 30;
const WIDTH: usize = 32;
const HEIGHT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    FgDiff,
    BgDiff,
    Flow,
    Detect,
    Mnist,
}

impl Pipeline {
    pub const ALL: [Pipeline; 5] = [Pipeline::FgDiff, Pipeline::BgDiff, Pipeline::Flow, Pipeline::Detect, Pipeline::Mnist];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::FgDiff => "fgdiff",
            Pipeline::BgDiff => "bgdiff",
            Pipeline::Flow => "flow",
            Pipeline::Detect => "detect",
            Pipeline::Mnist => "mnist",
        }
    }
}

impl std::str::FromStr for Pipeline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown pipeline `{s}` (fgdiff, bgdiff, flow, detect, mnist)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseResult {
    pub pipeline: Pipeline,
    pub case: usize,
    pub matches: bool,
    pub detail: String,
}

impl fmt::Display for CaseResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} case {}: {} ({})",
            self.pipeline.name(),
            self.case,
            if self.matches { "matches plaintext" } else { "MISMATCH" },
            self.detail
        )
    }
}

fn save(out: Option<&Path>, name: String, frame: &Frame) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        frame.write_pgm(dir.join(name))?;
    }
    Ok(())
}

/// Draws detection boxes onto a copy of `img`.
fn draw_boxes(img: &Frame, boxes: &[Detection]) -> Frame {
    let mut f = img.clone();
    for d in boxes {
        for x in d.x..d.x + d.w {
            f.set(x, d.y, 255);
            f.set(x, d.y + d.h - 1, 255);
        }
        for y in d.y..d.y + d.h {
            f.set(d.x, y, 255);
            f.set(d.x + d.w - 1, y, 255);
        }
    }
    f
}

type MnistState = (FixedPointModel, EncryptedModel, Vec<(Frame, usize)>);

/// Lazily built state shared by the cases of one suite run.
pub struct Suite<'k> {
    sk: &'k PrivateKey,
    seed: u64,
    rng: ChaCha20Rng,
    session: OracleSession,
    mnist: Option<MnistState>,
}

impl<'k> Suite<'k> {
    pub fn new(sk: &'k PrivateKey, seed: u64) -> Self {
        Self {
            sk,
            seed,
            rng: ChaCha20Rng::seed_from_u64(seed),
            session: OracleSession::with_seed(sk.clone(), seed ^ 0x5eed),
            mnist: None,
        }
    }

    pub fn session(&self) -> &OracleSession {
        &self.session
    }

    pub fn run(&mut self, pipeline: Pipeline, case: usize, out: Option<&Path>) -> Result<CaseResult> {
        let seed = self.seed.wrapping_add(case as u64);
        let pk = self.sk.public();
        let tag = format!("{}_{case:03}", pipeline.name());
        let (matches, detail) = match pipeline {
            Pipeline::FgDiff => {
                let pair = moving_square_pair(seed, WIDTH, HEIGHT);
                let ep = encrypt_frame(&pair.prev, self.sk, &mut self.rng)?;
                let ec = encrypt_frame(&pair.cur, self.sk, &mut self.rng)?;
                let mask = threshold_mask(&mut self.session, &frame_diff_blind(&ep, &ec, pk)?, THRESHOLD)?;
                let want = diff_mask(&pair.prev, &pair.cur, THRESHOLD)?;
                save(out, format!("{tag}_prev.pgm"), &pair.prev)?;
                save(out, format!("{tag}_cur.pgm"), &pair.cur)?;
                save(out, format!("{tag}_mask.pgm"), &Frame::from_mask(WIDTH, HEIGHT, &mask)?)?;
                (mask == want, format!("{} foreground pixels", mask.iter().filter(|&&m| m).count()))
            }
            Pipeline::BgDiff => {
                let (bg, frames) = background_sequence(seed, WIDTH, HEIGHT, 1);
                let eb = encrypt_frame(&bg, self.sk, &mut self.rng)?;
                let ef = encrypt_frame(&frames[0], self.sk, &mut self.rng)?;
                let mask = threshold_mask(&mut self.session, &bg_diff_blind(&eb, &ef, pk)?, THRESHOLD)?;
                let want = diff_mask(&bg, &frames[0], THRESHOLD)?;
                let next_bg = update_background(&bg, &frames[0], 1, 8)?;
                save(out, format!("{tag}_frame.pgm"), &frames[0])?;
                save(out, format!("{tag}_mask.pgm"), &Frame::from_mask(WIDTH, HEIGHT, &mask)?)?;
                save(out, format!("{tag}_background.pgm"), &next_bg)?;
                (mask == want, format!("{} foreground pixels", mask.iter().filter(|&&m| m).count()))
            }
            Pipeline::Flow => {
                let pair = moving_square_pair(seed, WIDTH, HEIGHT);
                let mask = diff_mask(&pair.prev, &pair.cur, THRESHOLD)?;
                let points = select_points(&mask, WIDTH, HEIGHT, 3);
                let ep = encrypt_frame(&pair.prev, self.sk, &mut self.rng)?;
                let ec = encrypt_frame(&pair.cur, self.sk, &mut self.rng)?;
                let blind = optical_flow_blind(&ep, &ec, &points, &mut self.session, pk)?;
                let want = reference::optical_flow(&pair.prev, &pair.cur, &points)?;
                let tracked = blind.displacements.iter().filter(|d| d.is_some()).count();
                let on_shift = blind.displacements.iter().filter(|d| **d == Some(pair.shift)).count();
                (
                    blind.displacements == want,
                    format!("{tracked} points tracked, {on_shift} at the true shift {:?}", pair.shift),
                )
            }
            Pipeline::Detect => {
                let cascade = Cascade::parse(TOY_CASCADE)?;
                let img = detection_image(seed, 24, 24, (6, 6), 2);
                let ef = encrypt_frame(&img, self.sk, &mut self.rng)?;
                let blind = cascade_blind(&ef, &cascade, 2, &mut self.session, pk)?;
                let want = reference::detect(&img, &cascade, 2);
                save(out, format!("{tag}_boxes.pgm"), &draw_boxes(&img, &blind))?;
                (blind == want, format!("{} windows accepted", blind.len()))
            }
            Pipeline::Mnist => {
                if self.mnist.is_none() {
                    let fx = FixedPointModel::from_float(&FloatModel::read(cmpswhe_inference::data::model_path())?)?;
                    let em = encrypt_model(&fx, pk)?;
                    self.mnist = Some((fx, em, load_digits()?));
                }
                let (fx, em, digits) = self.mnist.as_ref().expect("loaded above");
                let Some((img, label)) = digits.get(case) else {
                    bail!("only {} bundled digits", digits.len());
                };
                let p = predict_blind(img, em, &mut self.session, self.sk, &mut self.rng)?;
                let plain = predict_fixed(fx, img.data())?;
                (p.digit == plain, format!("predicted {}, label {label}", p.digit))
            }
        };
        Ok(CaseResult {
            pipeline,
            case,
            matches,
            detail,
        })
    }
}

pub fn run_suite(pipeline: Pipeline, cases: usize, sk: &PrivateKey, seed: u64, out: Option<&Path>) -> Result<Vec<CaseResult>> {
    let mut suite = Suite::new(sk, seed);
    (0..cases).map(|c| suite.run(pipeline, c, out)).collect()
}
