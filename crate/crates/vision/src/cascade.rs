//! Staged haar-stump classifier and its text format.
//!
//! ```text
//! cascade v1
//! window <W> <H>
//! stage <threshold>
//! stump <thr> <left> <right> rect <x> <y> <w> <h> <weight> [rect ...]
//! ```
//!
//! A stump contributes `right` when its feature exceeds `thr`, else `left`.
//! A stage passes when the sum of its stumps reaches its threshold.
//! Blank lines and `#` comments are ignored. All numbers are integers.

use std::fmt::Write as _;

use crate::VisionError;

pub const MAX_RECTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub weight: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stump {
    pub threshold: i64,
    pub left: i64,
    pub right: i64,
    pub rects: Vec<Rect>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub threshold: i64,
    pub stumps: Vec<Stump>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cascade {
    pub window: (usize, usize),
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Detection {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

fn err(line: usize, msg: impl Into<String>) -> VisionError {
    VisionError::Cascade {
        line,
        message: msg.into(),
    }
}

impl Cascade {
    pub fn validate(&self) -> Result<(), VisionError> {
        let (ww, wh) = self.window;
        if ww == 0 || wh == 0 {
            return Err(err(0, "empty window"));
        }
        for stage in &self.stages {
            for stump in &stage.stumps {
                if stump.rects.is_empty() || stump.rects.len() > MAX_RECTS {
                    return Err(err(0, format!("stump needs 1..={MAX_RECTS} rectangles")));
                }
                for r in &stump.rects {
                    if r.w == 0 || r.h == 0 || r.x + r.w > ww || r.y + r.h > wh {
                        return Err(err(0, format!("rectangle {r:?} leaves the {ww}x{wh} window")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest possible `|stage sum|` over all stages.
    pub fn max_stage_magnitude(&self) -> i64 {
        self.stages
            .iter()
            .map(|s| s.stumps.iter().map(|t| t.left.abs().max(t.right.abs())).sum::<i64>())
            .max()
            .unwrap_or(0)
    }

    pub fn parse(text: &str) -> Result<Self, VisionError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, "cascade v1")) => {}
            Some((n, other)) => return Err(err(n, format!("expected `cascade v1`, found `{other}`"))),
            None => return Err(err(0, "empty cascade file")),
        }
        let mut window = None;
        let mut stages: Vec<Stage> = Vec::new();
        for (n, line) in lines {
            let words: Vec<&str> = line.split_whitespace().collect();
            let int = |s: &str| s.parse::<i64>().map_err(|_| err(n, format!("`{s}` is not an integer")));
            let size = |s: &str| s.parse::<usize>().map_err(|_| err(n, format!("`{s}` is not a size")));
            match words[0] {
                "window" => {
                    if words.len() != 3 {
                        return Err(err(n, "window takes W H"));
                    }
                    window = Some((size(words[1])?, size(words[2])?));
                }
                "stage" => {
                    if words.len() != 2 {
                        return Err(err(n, "stage takes one threshold"));
                    }
                    stages.push(Stage {
                        threshold: int(words[1])?,
                        stumps: Vec::new(),
                    });
                }
                "stump" => {
                    let stage = stages.last_mut().ok_or_else(|| err(n, "stump before any stage"))?;
                    if words.len() < 4 {
                        return Err(err(n, "stump takes thr left right"));
                    }
                    let mut rects = Vec::new();
                    let mut rest = &words[4..];
                    while !rest.is_empty() {
                        if rest[0] != "rect" || rest.len() < 6 {
                            return Err(err(n, "expected `rect x y w h weight`"));
                        }
                        rects.push(Rect {
                            x: size(rest[1])?,
                            y: size(rest[2])?,
                            w: size(rest[3])?,
                            h: size(rest[4])?,
                            weight: int(rest[5])?,
                        });
                        rest = &rest[6..];
                    }
                    stage.stumps.push(Stump {
                        threshold: int(words[1])?,
                        left: int(words[2])?,
                        right: int(words[3])?,
                        rects,
                    });
                }
                other => return Err(err(n, format!("unknown directive `{other}`"))),
            }
        }
        let cascade = Cascade {
            window: window.ok_or_else(|| err(0, "missing window line"))?,
            stages,
        };
        cascade.validate()?;
        Ok(cascade)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("cascade v1\nwindow {} {}\n", self.window.0, self.window.1);
        for stage in &self.stages {
            let _ = writeln!(out, "stage {}", stage.threshold);
            for s in &stage.stumps {
                let _ = write!(out, "stump {} {} {}", s.threshold, s.left, s.right);
                for r in &s.rects {
                    let _ = write!(out, " rect {} {} {} {} {}", r.x, r.y, r.w, r.h, r.weight);
                }
                out.push('\n');
            }
        }
        out
    }

    /// Window origins for a single-scale sweep.
    pub fn windows(&self, width: usize, height: usize, step: usize) -> Vec<(usize, usize)> {
        let (ww, wh) = self.window;
        if ww > width || wh > height {
            return Vec::new();
        }
        let step = step.max(1);
        let mut out = Vec::new();
        for y in (0..=height - wh).step_by(step) {
            for x in (0..=width - ww).step_by(step) {
                out.push((x, y));
            }
        }
        out
    }
}
