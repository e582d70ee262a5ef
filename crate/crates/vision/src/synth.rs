//! Deterministic synthetic inputs: textured frame pairs with a moving
//! square, detection images with edge patches, and small cascades.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::cascade::{Cascade, Rect, Stage, Stump};
use crate::frame::Frame;

/// Two-stage 6x6 cascade: bright-over-dark edge, then a bright top half.
pub const TOY_CASCADE: &str = include_str!("../data/toy_cascade.txt");

#[derive(Debug, Clone)]
pub struct FramePair {
    pub prev: Frame,
    pub cur: Frame,
    /// Motion applied to the square, `cur = prev shifted by shift`.
    pub shift: (i64, i64),
    /// Top-left corner and side of the square in `prev`.
    pub square: (usize, usize, usize),
}

fn texture(rng: &mut ChaCha20Rng, w: usize, h: usize) -> Frame {
    let (gx, gy) = (rng.gen_range(0..4usize), rng.gen_range(0..4usize));
    let base = rng.gen_range(20..60usize);
    Frame::from_fn(w, h, |x, y| (base + x * gx + y * gy + rng.gen_range(0..6)).min(120) as u8)
}

/// A static textured background with a bright square that moves by at most
/// one pixel per axis between the two frames.
pub fn moving_square_pair(seed: u64, width: usize, height: usize) -> FramePair {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let bg = texture(&mut rng, width, height);
    let side = rng.gen_range(3..=5usize);
    let x0 = rng.gen_range(3..width - side - 3);
    let y0 = rng.gen_range(3..height - side - 3);
    let shift = (rng.gen_range(-1..=1i64), rng.gen_range(-1..=1i64));
    let pattern: Vec<u8> = (0..side * side).map(|_| rng.gen_range(170..=255)).collect();
    let draw = |ox: usize, oy: usize| {
        let mut f = bg.clone();
        for dy in 0..side {
            for dx in 0..side {
                f.set(ox + dx, oy + dy, pattern[dy * side + dx]);
            }
        }
        f
    };
    let prev = draw(x0, y0);
    let cur = draw((x0 as i64 + shift.0) as usize, (y0 as i64 + shift.1) as usize);
    FramePair {
        prev,
        cur,
        shift,
        square: (x0, y0, side),
    }
}

pub fn frame_suite(count: usize, seed: u64, width: usize, height: usize) -> Vec<FramePair> {
    (0..count as u64).map(|i| moving_square_pair(seed.wrapping_add(i), width, height)).collect()
}

/// A static background and `frames` frames of a bright square crossing it
/// diagonally, one pixel per axis per frame.
pub fn background_sequence(seed: u64, width: usize, height: usize, frames: usize) -> (Frame, Vec<Frame>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let bg = texture(&mut rng, width, height);
    let side = rng.gen_range(3..=5usize);
    let value = rng.gen_range(170..=255u8);
    let seq = (0..frames)
        .map(|i| {
            let mut f = bg.clone();
            let x0 = (1 + i) % (width - side);
            let y0 = (1 + i) % (height - side);
            for dy in 0..side {
                for dx in 0..side {
                    f.set(x0 + dx, y0 + dy, value);
                }
            }
            f
        })
        .collect();
    (bg, seq)
}

/// Textured image with a few bright-over-dark patches of the given size.
pub fn detection_image(seed: u64, width: usize, height: usize, patch: (usize, usize), count: usize) -> Frame {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut f = texture(&mut rng, width, height);
    for _ in 0..count {
        let x0 = rng.gen_range(0..=width - patch.0);
        let y0 = rng.gen_range(0..=height - patch.1);
        for dy in 0..patch.1 {
            for dx in 0..patch.0 {
                let v = if dy < patch.1 / 2 { rng.gen_range(200..=255) } else { rng.gen_range(0..20) };
                f.set(x0 + dx, y0 + dy, v);
            }
        }
    }
    f
}

/// One stage, one stump: top half minus bottom half above `60 * area/2`.
pub fn edge_cascade(w: usize, h: usize) -> Cascade {
    let half = h / 2;
    Cascade {
        window: (w, h),
        stages: vec![Stage {
            threshold: 1,
            stumps: vec![Stump {
                threshold: 60 * (w * half) as i64,
                left: 0,
                right: 1,
                rects: vec![
                    Rect { x: 0, y: 0, w, h: half, weight: 1 },
                    Rect { x: 0, y: half, w, h: half, weight: -1 },
                ],
            }],
        }],
    }
}

/// Random multi-stage cascade over a `w x h` window.
pub fn random_cascade(seed: u64, w: usize, h: usize) -> Cascade {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let stages = (0..rng.gen_range(1..=3))
        .map(|_| {
            let stumps: Vec<Stump> = (0..rng.gen_range(1..=4))
                .map(|_| {
                    let rects = (0..rng.gen_range(1..=3))
                        .map(|_| {
                            let rw = rng.gen_range(1..=w);
                            let rh = rng.gen_range(1..=h);
                            Rect {
                                x: rng.gen_range(0..=w - rw),
                                y: rng.gen_range(0..=h - rh),
                                w: rw,
                                h: rh,
                                weight: rng.gen_range(-3..=3),
                            }
                        })
                        .collect();
                    Stump {
                        threshold: rng.gen_range(-2000..=4000),
                        left: rng.gen_range(-2..=1),
                        right: rng.gen_range(0..=3),
                        rects,
                    }
                })
                .collect();
            let n = stumps.len() as i64;
            Stage {
                threshold: rng.gen_range(-1..=n),
                stumps,
            }
        })
        .collect();
    Cascade { window: (w, h), stages }
}
