//! Plaintext versions of every pipeline, used as oracles.

use crate::cascade::{Cascade, Detection, Rect};
use crate::frame::Frame;
use crate::VisionError;

/// Candidate offsets into the previous frame: no motion first, then the
/// eight neighbours in raster order.
pub const FLOW_OFFSETS: [(i64, i64); 9] = [
    (0, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// `|cur - prev| > t` per pixel.
pub fn diff_mask(prev: &Frame, cur: &Frame, t: u32) -> Result<Vec<bool>, VisionError> {
    prev.same_shape(cur)?;
    Ok(prev
        .data()
        .iter()
        .zip(cur.data())
        .map(|(&p, &c)| (c as i32 - p as i32).unsigned_abs() > t)
        .collect())
}

/// `(num*cur + (den-num)*bg) / den`, floored.
pub fn update_background(bg: &Frame, cur: &Frame, num: u32, den: u32) -> Result<Frame, VisionError> {
    bg.same_shape(cur)?;
    if den == 0 || num > den {
        return Err(VisionError::Dimension(format!("invalid blend {num}/{den}")));
    }
    let data = bg
        .data()
        .iter()
        .zip(cur.data())
        .map(|(&b, &c)| ((num as u64 * c as u64 + (den - num) as u64 * b as u64) / den as u64) as u8)
        .collect();
    Frame::new(bg.width(), bg.height(), data)
}

pub fn check_point(frame: &Frame, (x, y): (usize, usize)) -> bool {
    x >= 2 && y >= 2 && x + 2 < frame.width() && y + 2 < frame.height()
}

/// Sum of squared differences between the 3x3 window at `p` in `cur` and
/// at `p + d` in `prev`.
pub fn window_ssd(prev: &Frame, cur: &Frame, (x, y): (usize, usize), (dx, dy): (i64, i64)) -> i64 {
    let mut s = 0;
    for wy in -1..=1i64 {
        for wx in -1..=1i64 {
            let cx = (x as i64 + wx) as usize;
            let cy = (y as i64 + wy) as usize;
            let px = (x as i64 + dx + wx) as usize;
            let py = (y as i64 + dy + wy) as usize;
            let d = cur.get(cx, cy) as i64 - prev.get(px, py) as i64;
            s += d * d;
        }
    }
    s
}

/// Displacement per point (`None` for points too close to the border).
pub fn optical_flow(prev: &Frame, cur: &Frame, points: &[(usize, usize)]) -> Result<Vec<Option<(i64, i64)>>, VisionError> {
    prev.same_shape(cur)?;
    Ok(points
        .iter()
        .map(|&p| {
            if !check_point(cur, p) {
                return None;
            }
            let mut best = 0;
            let mut best_v = i64::MAX;
            for (i, &d) in FLOW_OFFSETS.iter().enumerate() {
                let v = window_ssd(prev, cur, p, d);
                if v < best_v {
                    best = i;
                    best_v = v;
                }
            }
            let (dx, dy) = FLOW_OFFSETS[best];
            Some((-dx, -dy))
        })
        .collect())
}

/// Inclusive 2-D prefix sums.
pub fn integral(frame: &Frame) -> Vec<i64> {
    let (w, h) = (frame.width(), frame.height());
    let mut ii = vec![0i64; w * h];
    for y in 0..h {
        let mut row = 0i64;
        for x in 0..w {
            row += frame.get(x, y) as i64;
            ii[y * w + x] = row + if y > 0 { ii[(y - 1) * w + x] } else { 0 };
        }
    }
    ii
}

/// Pixel sum over a rectangle from an inclusive integral image.
pub fn rect_sum(ii: &[i64], width: usize, x: usize, y: usize, w: usize, h: usize) -> i64 {
    let at = |cx: usize, cy: usize| ii[cy * width + cx];
    let (x1, y1) = (x + w - 1, y + h - 1);
    let mut s = at(x1, y1);
    if x > 0 {
        s -= at(x - 1, y1);
    }
    if y > 0 {
        s -= at(x1, y - 1);
    }
    if x > 0 && y > 0 {
        s += at(x - 1, y - 1);
    }
    s
}

pub fn haar(ii: &[i64], width: usize, origin: (usize, usize), rects: &[Rect]) -> i64 {
    rects
        .iter()
        .map(|r| r.weight * rect_sum(ii, width, origin.0 + r.x, origin.1 + r.y, r.w, r.h))
        .sum()
}

pub fn detect(frame: &Frame, cascade: &Cascade, step: usize) -> Vec<Detection> {
    let ii = integral(frame);
    let w = frame.width();
    let (ww, wh) = cascade.window;
    cascade
        .windows(frame.width(), frame.height(), step)
        .into_iter()
        .filter(|&origin| {
            cascade.stages.iter().all(|stage| {
                let sum: i64 = stage
                    .stumps
                    .iter()
                    .map(|s| if haar(&ii, w, origin, &s.rects) > s.threshold { s.right } else { s.left })
                    .sum();
                sum >= stage.threshold
            })
        })
        .map(|(x, y)| Detection { x, y, w: ww, h: wh })
        .collect()
}
