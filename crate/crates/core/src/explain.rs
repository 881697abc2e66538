//! Rendering of backend-supplied attention fields: normalization, colormap
//! overlays, and contour extraction.
//!
//! Contours are closed polylines traced along pixel-grid edges of the
//! superlevel set `{value >= level}`. Foreground is 8-connected, holes are
//! 4-connected (the usual raster duality), and every nested component gets
//! its own contour, so a high ring around a low center yields two. The
//! traced loops partition the plane exactly: even-odd filling them
//! reconstructs the thresholded mask bit for bit.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::model::Frame;
use crate::util::round_i64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("invalid heatmap: {0}")]
    InvalidHeatmap(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParam(&'static str),
    #[error("shape mismatch: {0} frames vs {1} heatmaps")]
    ShapeMismatch(usize, usize),
}

/// Per-frame scalar attention field, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self, ExplainError> {
        if width == 0 || height == 0 {
            return Err(ExplainError::InvalidHeatmap("zero dimension"));
        }
        if values.len() != width as usize * height as usize {
            return Err(ExplainError::InvalidHeatmap("value count != width*height"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ExplainError::InvalidHeatmap("non-finite value"));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

/// Rescales a map to `[0,1]` (min to 0, max to 1). Constant maps come back
/// all-zero with the flag set.
pub fn normalize(map: &Heatmap) -> (Heatmap, bool) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &map.values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == lo {
        return (
            Heatmap {
                width: map.width,
                height: map.height,
                values: vec![0.0; map.values.len()],
            },
            true,
        );
    }
    let scale = hi - lo;
    let values = map.values.iter().map(|&v| (v - lo) / scale).collect();
    (
        Heatmap {
            width: map.width,
            height: map.height,
            values,
        },
        false,
    )
}

/// 256-entry blue-to-red ramp used for overlays.
pub const COLORMAP: [[u8; 3]; 256] = build_colormap();

const fn build_colormap() -> [[u8; 3]; 256] {
    let mut table = [[0u8; 3]; 256];
    let mut i = 0;
    while i < 256 {
        table[i] = [i as u8, 0, (255 - i) as u8];
        i += 1;
    }
    table
}

fn colormap_index(v: f64) -> usize {
    let t = v.clamp(0.0, 1.0);
    (round_i64(t * 255.0) as usize).min(255)
}

/// Alpha-blends the colormapped heatmap over a frame:
/// `out = (1 - alpha) * frame + alpha * colormap(value)`, saturating.
///
/// The map is nearest-neighbor resampled to the frame's size and expected
/// in `[0,1]`; values outside are clamped. Grayscale frames blend against the
/// intensity ramp instead of the RGB table.
pub fn overlay(frame: &Frame, map: &Heatmap, alpha: f64) -> Result<Frame, ExplainError> {
    if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
        return Err(ExplainError::InvalidParam("alpha outside [0,1]"));
    }
    let mut out = frame.clone();
    let c = frame.channels as usize;
    for y in 0..frame.height {
        let my = (y as u64 * map.height as u64 / frame.height as u64) as u32;
        for x in 0..frame.width {
            let mx = (x as u64 * map.width as u64 / frame.width as u64) as u32;
            let v = map.value(mx, my);
            let off = frame.offset(x, y);
            if c == 3 {
                let color = COLORMAP[colormap_index(v)];
                for (ch, &tint) in color.iter().enumerate() {
                    let blended =
                        (1.0 - alpha) * frame.pixels[off + ch] as f64 + alpha * tint as f64;
                    out.pixels[off + ch] = round_i64(blended).clamp(0, 255) as u8;
                }
            } else {
                let ramp = colormap_index(v) as f64;
                let blended = (1.0 - alpha) * frame.pixels[off] as f64 + alpha * ramp;
                out.pixels[off] = round_i64(blended).clamp(0, 255) as u8;
            }
        }
    }
    Ok(out)
}

/// A closed boundary polyline in pixel-corner coordinates, first point
/// repeated at the end. Contours carry their threshold but no intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub points: Vec<(f64, f64)>,
    pub level: f64,
}

const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)]; // E S W N

struct MaskView<'a> {
    w: i64,
    h: i64,
    inside: &'a [bool],
}

impl MaskView<'_> {
    fn at(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.w || y >= self.h {
            return false;
        }
        self.inside[(y * self.w + x) as usize]
    }

    /// Whether a boundary edge leaves corner (cx, cy) in direction `dir`,
    /// oriented so the inside is on the right of travel.
    fn outgoing(&self, cx: i64, cy: i64, dir: usize) -> bool {
        match dir {
            0 => self.at(cx, cy) && !self.at(cx, cy - 1), // E
            1 => self.at(cx - 1, cy) && !self.at(cx, cy), // S
            2 => self.at(cx - 1, cy - 1) && !self.at(cx - 1, cy), // W
            _ => self.at(cx, cy - 1) && !self.at(cx - 1, cy - 1), // N
        }
    }
}

fn trace_mask(inside: &[bool], w: u32, h: u32, level: f64) -> Vec<Contour> {
    let mask = MaskView {
        w: w as i64,
        h: h as i64,
        inside,
    };
    let corners_w = w as i64 + 1;
    let mut visited = vec![0u8; ((w + 1) * (h + 1)) as usize];
    let mut contours = Vec::new();

    for cy in 0..=h as i64 {
        for cx in 0..=w as i64 {
            for start_dir in 0..4 {
                let corner_ix = (cy * corners_w + cx) as usize;
                if visited[corner_ix] & (1 << start_dir) != 0 || !mask.outgoing(cx, cy, start_dir) {
                    continue;
                }
                let mut points: Vec<(f64, f64)> = Vec::new();
                let (mut x, mut y, mut dir) = (cx, cy, start_dir);
                loop {
                    visited[(y * corners_w + x) as usize] |= 1 << dir;
                    points.push((x as f64, y as f64));
                    x += DIRS[dir].0;
                    y += DIRS[dir].1;
                    // successor edge: left turn, then straight, then right,
                    // so diagonally touching foreground stays connected
                    // (8-connected components, 4-connected holes)
                    let mut next = None;
                    for turn in [3usize, 0, 1] {
                        let cand = (dir + turn) % 4;
                        if mask.outgoing(x, y, cand) {
                            next = Some(cand);
                            break;
                        }
                    }
                    let Some(next) = next else { break };
                    if x == cx && y == cy && next == start_dir {
                        break;
                    }
                    dir = next;
                }
                contours.push(Contour {
                    points: compress_collinear(points),
                    level,
                });
            }
        }
    }
    contours
}

fn compress_collinear(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let n = points.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let prev = points[(i + n - 1) % n];
        let next = points[(i + 1) % n];
        let d_in = (points[i].0 - prev.0, points[i].1 - prev.1);
        let d_out = (next.0 - points[i].0, next.1 - points[i].1);
        if d_in != d_out {
            out.push(points[i]);
        }
    }
    if out.is_empty() {
        out.extend_from_slice(&points);
    }
    let first = out[0];
    out.push(first);
    out
}

/// Boundary contours of the superlevel set `{value >= level}` of a
/// normalized map. The level must lie strictly inside (0, 1).
pub fn contours(map: &Heatmap, level: f64) -> Result<Vec<Contour>, ExplainError> {
    if !level.is_finite() || level <= 0.0 || level >= 1.0 {
        return Err(ExplainError::InvalidParam("level must be inside (0,1)"));
    }
    let inside: Vec<bool> = map.values.iter().map(|&v| v >= level).collect();
    Ok(trace_mask(&inside, map.width, map.height, level))
}

/// Contours at several levels, concatenated in level order. Addresses the
/// single-level rendering's inability to show intensity.
pub fn contours_multi(map: &Heatmap, levels: &[f64]) -> Result<Vec<Contour>, ExplainError> {
    let mut out = Vec::new();
    for &level in levels {
        out.extend(contours(map, level)?);
    }
    Ok(out)
}

/// Normalizes each map, overlays it on its frame, and extracts contours,
/// order-preserving.
pub fn map_series(
    frames: &[Frame],
    maps: &[Heatmap],
    alpha: f64,
    level: f64,
) -> Result<Vec<(Frame, Vec<Contour>)>, ExplainError> {
    if frames.len() != maps.len() {
        return Err(ExplainError::ShapeMismatch(frames.len(), maps.len()));
    }
    frames
        .iter()
        .zip(maps)
        .map(|(frame, map)| {
            let (normalized, _) = normalize(map);
            let rendered = overlay(frame, &normalized, alpha)?;
            let outlines = contours(&normalized, level)?;
            Ok((rendered, outlines))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_of(w: u32, h: u32, f: impl Fn(u32, u32) -> f64) -> Heatmap {
        let mut values = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            for x in 0..w {
                values.push(f(x, y));
            }
        }
        Heatmap::new(w, h, values).unwrap()
    }

    #[test]
    fn heatmap_validates() {
        assert!(Heatmap::new(0, 4, vec![]).is_err());
        assert!(Heatmap::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Heatmap::new(2, 2, vec![0.0, 1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn normalize_flags_constant_maps() {
        let (n, constant) = normalize(&map_of(3, 3, |_, _| 7.0));
        assert!(constant);
        assert!(n.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_keeps_unit_range_maps() {
        let m = map_of(2, 2, |x, y| (x + 2 * y) as f64 / 3.0);
        let (n, constant) = normalize(&m);
        assert!(!constant);
        assert_eq!(n.values(), m.values());
    }

    #[test]
    fn overlay_alpha_zero_is_bit_identical() {
        let frame = Frame::filled(0, 8, 8, 3, 123).unwrap();
        let map = map_of(4, 4, |x, _| x as f64 / 3.0);
        assert_eq!(overlay(&frame, &map, 0.0).unwrap(), frame);
    }

    #[test]
    fn overlay_alpha_one_is_pure_colormap() {
        let frame = Frame::filled(0, 4, 4, 3, 200).unwrap();
        let map = map_of(4, 4, |_, _| 1.0);
        let out = overlay(&frame, &map, 1.0).unwrap();
        for px in out.pixels.chunks(3) {
            assert_eq!(px, COLORMAP[255]);
        }
    }

    #[test]
    fn overlay_half_alpha_blend_arithmetic() {
        let frame = Frame::filled(0, 4, 4, 3, 0).unwrap();
        let map = map_of(4, 4, |_, _| 1.0);
        let out = overlay(&frame, &map, 0.5).unwrap();
        let expected = [
            round_i64(0.5 * COLORMAP[255][0] as f64) as u8,
            round_i64(0.5 * COLORMAP[255][1] as f64) as u8,
            round_i64(0.5 * COLORMAP[255][2] as f64) as u8,
        ];
        for px in out.pixels.chunks(3) {
            assert_eq!(px, expected);
        }
    }

    #[test]
    fn overlay_validates_alpha() {
        let frame = Frame::filled(0, 4, 4, 1, 0).unwrap();
        let map = map_of(4, 4, |_, _| 0.0);
        assert!(overlay(&frame, &map, 1.5).is_err());
        assert!(overlay(&frame, &map, f64::NAN).is_err());
    }

    #[test]
    fn contours_of_empty_superlevel_set() {
        let m = map_of(6, 6, |_, _| 0.0);
        assert!(contours(&m, 0.5).unwrap().is_empty());
    }

    #[test]
    fn contours_reject_degenerate_levels() {
        let m = map_of(4, 4, |_, _| 0.0);
        assert!(contours(&m, 0.0).is_err());
        assert!(contours(&m, 1.0).is_err());
        assert!(contours(&m, f64::NAN).is_err());
    }

    #[test]
    fn filled_rectangle_yields_one_closed_contour() {
        let m = map_of(8, 8, |x, y| {
            if (2..6).contains(&x) && (3..6).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let cs = contours(&m, 0.5).unwrap();
        assert_eq!(cs.len(), 1);
        let pts = &cs[0].points;
        assert!(pts.len() >= 4);
        assert_eq!(pts.first(), pts.last());
        // rectangle corners present
        assert!(pts.contains(&(2.0, 3.0)));
        assert!(pts.contains(&(6.0, 6.0)));
    }

    #[test]
    fn ring_yields_outer_and_inner_contours() {
        let m = map_of(9, 9, |x, y| {
            let in_outer = (1..8).contains(&x) && (1..8).contains(&y);
            let in_hole = (3..6).contains(&x) && (3..6).contains(&y);
            if in_outer && !in_hole {
                1.0
            } else {
                0.2
            }
        });
        let cs = contours(&m, 0.5).unwrap();
        assert_eq!(cs.len(), 2);
    }

    #[test]
    fn multi_level_contours_concatenate_in_level_order() {
        let m = map_of(8, 8, |x, _| x as f64 / 7.0);
        let cs = contours_multi(&m, &[0.3, 0.6]).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].level, 0.3);
        assert_eq!(cs[1].level, 0.6);
        assert!(contours_multi(&m, &[0.5, 1.0]).is_err());
        assert!(contours_multi(&m, &[]).unwrap().is_empty());
    }

    #[test]
    fn two_separate_blobs_yield_two_contours() {
        let m = map_of(10, 4, |x, _| if !(3..=6).contains(&x) { 1.0 } else { 0.0 });
        assert_eq!(contours(&m, 0.5).unwrap().len(), 2);
    }

    #[test]
    fn map_series_is_elementwise() {
        let frames: Vec<Frame> = (0..3)
            .map(|i| Frame::filled(i, 6, 6, 1, 50).unwrap())
            .collect();
        let maps: Vec<Heatmap> = (0..3)
            .map(|i| map_of(6, 6, |x, y| if x == i && y == 2 { 5.0 } else { 0.0 }))
            .collect();
        let series = map_series(&frames, &maps, 0.25, 0.5).unwrap();
        assert_eq!(series.len(), 3);
        for (i, (rendered, outlines)) in series.iter().enumerate() {
            let (normalized, _) = normalize(&maps[i]);
            assert_eq!(rendered, &overlay(&frames[i], &normalized, 0.25).unwrap());
            assert_eq!(outlines, &contours(&normalized, 0.5).unwrap());
        }
    }

    #[test]
    fn map_series_rejects_length_mismatch() {
        let frames = vec![Frame::filled(0, 4, 4, 1, 0).unwrap()];
        assert!(matches!(
            map_series(&frames, &[], 0.5, 0.5),
            Err(ExplainError::ShapeMismatch(1, 0))
        ));
    }
}
