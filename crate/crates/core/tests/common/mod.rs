//! Independent oracles shared by the integration tests. Everything here
//! recomputes expected values from first principles, never through the
//! code paths under test.

use vigil_core::explain::Contour;
use vigil_core::model::BoundingBox;

/// IoU by counting unit grid cells after scaling onto an integer lattice.
/// Exact whenever every coordinate is a multiple of `1/scale`.
pub fn raster_iou(a: &BoundingBox, b: &BoundingBox, scale: i64) -> f64 {
    let snap = |v: f64| (v * scale as f64).round() as i64;
    let (ax0, ay0, ax1, ay1) = (snap(a.x), snap(a.y), snap(a.right()), snap(a.bottom()));
    let (bx0, by0, bx1, by1) = (snap(b.x), snap(b.y), snap(b.right()), snap(b.bottom()));
    let x0 = ax0.min(bx0);
    let y0 = ay0.min(by0);
    let x1 = ax1.max(bx1);
    let y1 = ay1.max(by1);
    let mut inter = 0u64;
    let mut union = 0u64;
    for y in y0..y1 {
        for x in x0..x1 {
            let in_a = x >= ax0 && x < ax1 && y >= ay0 && y < ay1;
            let in_b = x >= bx0 && x < bx1 && y >= by0 && y < by1;
            if in_a && in_b {
                inter += 1;
            }
            if in_a || in_b {
                union += 1;
            }
        }
    }
    inter as f64 / union as f64
}

fn flood(
    mask: &[bool],
    w: usize,
    h: usize,
    seen: &mut [bool],
    start: usize,
    value: bool,
    diagonal: bool,
) {
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(p) = stack.pop() {
        let (x, y) = (p % w, p / w);
        let mut push = |nx: isize, ny: isize| {
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                return;
            }
            let q = ny as usize * w + nx as usize;
            if !seen[q] && mask[q] == value {
                seen[q] = true;
                stack.push(q);
            }
        };
        push(x as isize - 1, y as isize);
        push(x as isize + 1, y as isize);
        push(x as isize, y as isize - 1);
        push(x as isize, y as isize + 1);
        if diagonal {
            push(x as isize - 1, y as isize - 1);
            push(x as isize + 1, y as isize - 1);
            push(x as isize - 1, y as isize + 1);
            push(x as isize + 1, y as isize + 1);
        }
    }
}

/// Expected number of boundary contours for a mask: 8-connected foreground
/// components plus 4-connected holes (complement regions sealed off from
/// the border), counted by flood fill.
pub fn expected_contour_count(mask: &[bool], w: usize, h: usize) -> usize {
    let mut seen = vec![false; w * h];
    let mut components = 0;
    for p in 0..w * h {
        if mask[p] && !seen[p] {
            components += 1;
            flood(mask, w, h, &mut seen, p, true, true);
        }
    }

    // flood the complement inward from the border; whatever remains is holes
    let mut outside = vec![false; w * h];
    for x in 0..w {
        for p in [x, (h - 1) * w + x] {
            if !mask[p] && !outside[p] {
                flood(mask, w, h, &mut outside, p, false, false);
            }
        }
    }
    for y in 0..h {
        for p in [y * w, y * w + w - 1] {
            if !mask[p] && !outside[p] {
                flood(mask, w, h, &mut outside, p, false, false);
            }
        }
    }
    let mut holes = 0;
    let mut seen = vec![false; w * h];
    for p in 0..w * h {
        if !mask[p] && !outside[p] && !seen[p] {
            holes += 1;
            flood(mask, w, h, &mut seen, p, false, false);
        }
    }
    components + holes
}

/// Even-odd fill of contour polylines: a pixel is inside when a rightward
/// ray from its center crosses an odd number of vertical contour segments.
pub fn fill_contours(contours: &[Contour], w: usize, h: usize) -> Vec<bool> {
    let mut out = vec![false; w * h];
    for py in 0..h {
        for px in 0..w {
            let cx = px as f64 + 0.5;
            let cy = py as f64 + 0.5;
            let mut crossings = 0usize;
            for contour in contours {
                for seg in contour.points.windows(2) {
                    let (x0, y0) = seg[0];
                    let (x1, y1) = seg[1];
                    if x0 == x1 && x0 > cx {
                        let (lo, hi) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
                        if cy > lo && cy < hi {
                            crossings += 1;
                        }
                    }
                }
            }
            out[py * w + px] = crossings % 2 == 1;
        }
    }
    out
}
