//! Feature points for flow tracking, taken from a foreground mask:
//! connected-component centroids plus mask pixels on a stride grid.

use std::collections::BTreeSet;

pub fn select_points(mask: &[bool], width: usize, height: usize, stride: usize) -> Vec<(usize, usize)> {
    let stride = stride.max(1);
    let ok = |x: usize, y: usize| x >= 2 && y >= 2 && x + 2 < width && y + 2 < height;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |p: (usize, usize), out: &mut Vec<(usize, usize)>| {
        if ok(p.0, p.1) && seen.insert(p) {
            out.push(p);
        }
    };

    let mut label = vec![false; mask.len()];
    for start in 0..mask.len() {
        if !mask[start] || label[start] {
            continue;
        }
        // 4-connected flood fill
        let (mut sx, mut sy, mut n) = (0usize, 0usize, 0usize);
        let mut stack = vec![start];
        label[start] = true;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % width, i / width);
            sx += x;
            sy += y;
            n += 1;
            let mut visit = |j: usize| {
                if mask[j] && !label[j] {
                    label[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
        push(((sx + n / 2) / n, (sy + n / 2) / n), &mut out);
    }
    for y in (0..height).step_by(stride) {
        for x in (0..width).step_by(stride) {
            if mask[y * width + x] {
                push((x, y), &mut out);
            }
        }
    }
    out
}
