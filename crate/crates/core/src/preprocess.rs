//! Frame transforms used ahead of temporal classification: box outlines,
//! box masks, inter-frame difference, augmentations, and square resize.
//!
//! All transforms are deterministic, preserve frame shape except [`resize`],
//! and leave the input untouched. Resampling is nearest-neighbor throughout
//! so outputs are bit-reproducible.

use alloc::vec;
use thiserror::Error;

use crate::model::{Detection, Frame, ObjectClass};
use crate::util::round_i64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("shape mismatch: {0}x{1}x{2} vs {3}x{4}x{5}")]
    ShapeMismatch(u32, u32, u8, u32, u32, u8),
    #[error("invalid parameter: {0}")]
    InvalidParam(&'static str),
}

/// Fixed outline palette, indexed by object-class registration order
/// (wrapping past the end). Chosen for contrast on grayscale too.
pub const CLASS_COLORS: [[u8; 3]; 6] = [
    [220, 40, 40],
    [40, 220, 40],
    [40, 80, 220],
    [220, 200, 40],
    [40, 210, 210],
    [210, 40, 210],
];

/// Outline color for an object class.
pub fn class_color(class: ObjectClass) -> [u8; 3] {
    CLASS_COLORS[class.index() % CLASS_COLORS.len()]
}

fn gray_of(color: [u8; 3]) -> u8 {
    ((color[0] as u16 + color[1] as u16 + color[2] as u16) / 3) as u8
}

/// Inclusive pixel bounds of a box, rounded to the nearest pixel edge.
fn pixel_bounds(det: &Detection) -> (i64, i64, i64, i64) {
    let l = round_i64(det.bbox.x);
    let t = round_i64(det.bbox.y);
    let r = round_i64(det.bbox.right()) - 1;
    let b = round_i64(det.bbox.bottom()) - 1;
    (l, t, r, b)
}

fn put_pixel(frame: &mut Frame, x: i64, y: i64, color: [u8; 3]) {
    if x < 0 || y < 0 || x >= frame.width as i64 || y >= frame.height as i64 {
        return;
    }
    let off = frame.offset(x as u32, y as u32);
    if frame.channels == 3 {
        frame.pixels[off..off + 3].copy_from_slice(&color);
    } else {
        frame.pixels[off] = gray_of(color);
    }
}

/// Burns a 1-px rectangle outline per detection into a copy of the frame,
/// clipped to the frame bounds. Colors are fixed per object class.
///
/// Callers are expected to pass detections belonging to `frame.index`.
pub fn draw_boxes(frame: &Frame, dets: &[Detection]) -> Frame {
    let mut out = frame.clone();
    for det in dets {
        let (l, t, r, b) = pixel_bounds(det);
        let color = class_color(det.object_class);
        for x in l..=r {
            put_pixel(&mut out, x, t, color);
            put_pixel(&mut out, x, b, color);
        }
        for y in t + 1..b {
            put_pixel(&mut out, l, y, color);
            put_pixel(&mut out, r, y, color);
        }
    }
    out
}

/// Background policy for frames where nothing was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskBackground {
    /// No detections: the whole frame goes black.
    Black,
    /// No detections: the frame passes through unchanged.
    Original,
}

/// Keeps only the pixels inside detection boxes, blacking out the rest.
/// The `background` choice only matters when `dets` is empty.
pub fn apply_box_mask(frame: &Frame, dets: &[Detection], background: MaskBackground) -> Frame {
    if dets.is_empty() {
        return match background {
            MaskBackground::Black => {
                let mut out = frame.clone();
                out.pixels.fill(0);
                out
            }
            MaskBackground::Original => frame.clone(),
        };
    }
    let mut out = frame.clone();
    out.pixels.fill(0);
    let c = frame.channels as usize;
    for det in dets {
        let (l, t, r, b) = pixel_bounds(det);
        let l = l.max(0) as u32;
        let t = t.max(0) as u32;
        let r = r.min(frame.width as i64 - 1);
        let b = b.min(frame.height as i64 - 1);
        if r < l as i64 || b < t as i64 {
            continue;
        }
        for y in t..=b as u32 {
            let start = frame.offset(l, y);
            let end = frame.offset(r as u32, y) + c;
            out.pixels[start..end].copy_from_slice(&frame.pixels[start..end]);
        }
    }
    out
}

/// Per-pixel absolute difference of two same-shaped frames.
pub fn frame_difference(a: &Frame, b: &Frame) -> Result<Frame, PreprocessError> {
    if !a.same_shape(b) {
        return Err(PreprocessError::ShapeMismatch(
            a.width, a.height, a.channels, b.width, b.height, b.channels,
        ));
    }
    let mut out = a.clone();
    for (o, (&pa, &pb)) in out.pixels.iter_mut().zip(a.pixels.iter().zip(&b.pixels)) {
        *o = pa.abs_diff(pb);
    }
    Ok(out)
}

/// Augmentation operations applied during dataset enrichment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Augment {
    /// Horizontal mirror (column flip).
    MirrorH,
    /// Add a delta to every sample, saturating at `[0, 255]`.
    Brightness(i32),
    /// Center-crop a 1/factor region and rescale to the original size.
    /// The factor must be >= 1.
    Zoom(f64),
}

pub fn augment(frame: &Frame, op: Augment) -> Result<Frame, PreprocessError> {
    match op {
        Augment::MirrorH => {
            let mut out = frame.clone();
            let c = frame.channels as usize;
            for y in 0..frame.height {
                for x in 0..frame.width {
                    let src = frame.offset(frame.width - 1 - x, y);
                    let dst = out.offset(x, y);
                    out.pixels[dst..dst + c].copy_from_slice(&frame.pixels[src..src + c]);
                }
            }
            Ok(out)
        }
        Augment::Brightness(delta) => {
            let mut out = frame.clone();
            for p in &mut out.pixels {
                *p = (*p as i32 + delta).clamp(0, 255) as u8;
            }
            Ok(out)
        }
        Augment::Zoom(factor) => {
            if !factor.is_finite() || factor < 1.0 {
                return Err(PreprocessError::InvalidParam("zoom factor must be >= 1"));
            }
            let crop_w = (round_i64(frame.width as f64 / factor).max(1) as u32).min(frame.width);
            let crop_h = (round_i64(frame.height as f64 / factor).max(1) as u32).min(frame.height);
            let x0 = (frame.width - crop_w) / 2;
            let y0 = (frame.height - crop_h) / 2;
            let c = frame.channels as usize;
            let mut out = frame.clone();
            for y in 0..frame.height {
                let sy = y0 + (y as u64 * crop_h as u64 / frame.height as u64) as u32;
                for x in 0..frame.width {
                    let sx = x0 + (x as u64 * crop_w as u64 / frame.width as u64) as u32;
                    let src = frame.offset(sx, sy);
                    let dst = out.offset(x, y);
                    out.pixels[dst..dst + c].copy_from_slice(&frame.pixels[src..src + c]);
                }
            }
            Ok(out)
        }
    }
}

/// Nearest-neighbor resize to a square of `side` pixels.
pub fn resize(frame: &Frame, side: u32) -> Result<Frame, PreprocessError> {
    if side < 8 {
        return Err(PreprocessError::InvalidParam("side must be >= 8"));
    }
    if frame.width == side && frame.height == side {
        return Ok(frame.clone());
    }
    let c = frame.channels as usize;
    let mut pixels = vec![0u8; side as usize * side as usize * c];
    for y in 0..side {
        let sy = (y as u64 * frame.height as u64 / side as u64) as u32;
        for x in 0..side {
            let sx = (x as u64 * frame.width as u64 / side as u64) as u32;
            let src = frame.offset(sx, sy);
            let dst = (y as usize * side as usize + x as usize) * c;
            pixels[dst..dst + c].copy_from_slice(&frame.pixels[src..src + c]);
        }
    }
    let mut out =
        Frame::new(frame.index, side, side, frame.channels, pixels).expect("buffer sized to shape");
    out.timestamp_ms = frame.timestamp_ms;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundingBox, ObjectRegistry, FLAME_OBJECT};

    fn flame_det(x: f64, y: f64, w: f64, h: f64) -> Detection {
        let objects = ObjectRegistry::standard();
        Detection {
            bbox: BoundingBox { x, y, w, h },
            object_class: objects.object(FLAME_OBJECT).unwrap(),
            confidence: 0.9,
            frame_index: 0,
        }
    }

    fn gradient_frame(w: u32, h: u32, c: u8) -> Frame {
        let n = w as usize * h as usize * c as usize;
        let pixels = (0..n).map(|i| (i % 251) as u8).collect();
        Frame::new(0, w, h, c, pixels).unwrap()
    }

    #[test]
    fn draw_boxes_without_detections_is_identity() {
        let f = gradient_frame(16, 12, 3);
        assert_eq!(draw_boxes(&f, &[]), f);
    }

    #[test]
    fn draw_boxes_changes_exactly_the_perimeter() {
        let f = Frame::filled(0, 32, 32, 3, 7).unwrap();
        let out = draw_boxes(&f, &[flame_det(3.0, 4.0, 10.0, 6.0)]);
        let changed = out
            .pixels
            .chunks(3)
            .zip(f.pixels.chunks(3))
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, 2 * 10 + 2 * 6 - 4);
    }

    #[test]
    fn draw_boxes_clips_to_frame() {
        let f = Frame::filled(0, 8, 8, 1, 0).unwrap();
        // box spills over the right and bottom edges
        let out = draw_boxes(&f, &[flame_det(5.0, 5.0, 10.0, 10.0)]);
        let changed = out
            .pixels
            .iter()
            .zip(&f.pixels)
            .filter(|(a, b)| a != b)
            .count();
        // in-bounds perimeter: top row x=5..7 plus left column y=6..7
        assert_eq!(changed, 3 + 2);
    }

    #[test]
    fn mask_black_blanks_frames_without_detections() {
        let f = gradient_frame(8, 8, 3);
        let out = apply_box_mask(&f, &[], MaskBackground::Black);
        assert!(out.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn mask_original_passes_frames_without_detections() {
        let f = gradient_frame(8, 8, 3);
        assert_eq!(apply_box_mask(&f, &[], MaskBackground::Original), f);
    }

    #[test]
    fn mask_covering_whole_frame_is_identity_in_both_modes() {
        let f = gradient_frame(8, 8, 1);
        let det = flame_det(0.0, 0.0, 8.0, 8.0);
        assert_eq!(
            apply_box_mask(&f, core::slice::from_ref(&det), MaskBackground::Black),
            f
        );
        assert_eq!(apply_box_mask(&f, &[det], MaskBackground::Original), f);
    }

    #[test]
    fn mask_keeps_only_box_interior() {
        let f = gradient_frame(8, 8, 1);
        let out = apply_box_mask(
            &f,
            &[flame_det(2.0, 2.0, 3.0, 3.0)],
            MaskBackground::Original,
        );
        for y in 0..8u32 {
            for x in 0..8u32 {
                let inside = (2..5).contains(&x) && (2..5).contains(&y);
                let expected = if inside { f.pixel(x, y, 0) } else { 0 };
                assert_eq!(out.pixel(x, y, 0), expected, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn difference_of_frame_with_itself_is_zero() {
        let f = gradient_frame(10, 6, 3);
        let d = frame_difference(&f, &f).unwrap();
        assert!(d.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn difference_of_constant_frames() {
        let a = Frame::filled(0, 4, 4, 1, 100).unwrap();
        let b = Frame::filled(0, 4, 4, 1, 130).unwrap();
        let d = frame_difference(&a, &b).unwrap();
        assert!(d.pixels.iter().all(|&p| p == 30));
        assert_eq!(frame_difference(&b, &a).unwrap(), d);
    }

    #[test]
    fn difference_matches_a_naive_pixel_loop() {
        // arbitrary but fixed contents, recomputed independently per pixel
        let f = gradient_frame(7, 5, 3);
        let mut g = gradient_frame(7, 5, 3);
        for (i, p) in g.pixels.iter_mut().enumerate() {
            *p = ((i * 37 + 11) % 256) as u8;
        }
        let d = frame_difference(&f, &g).unwrap();
        for y in 0..5u32 {
            for x in 0..7u32 {
                for c in 0..3 {
                    let a = f.pixel(x, y, c) as i32;
                    let b = g.pixel(x, y, c) as i32;
                    assert_eq!(d.pixel(x, y, c) as i32, (a - b).abs());
                }
            }
        }
    }

    #[test]
    fn difference_requires_same_shape() {
        let a = Frame::filled(0, 4, 4, 1, 0).unwrap();
        let b = Frame::filled(0, 4, 5, 1, 0).unwrap();
        assert!(matches!(
            frame_difference(&a, &b),
            Err(PreprocessError::ShapeMismatch(..))
        ));
    }

    #[test]
    fn mirror_twice_restores_the_frame() {
        let f = gradient_frame(9, 5, 3);
        let once = augment(&f, Augment::MirrorH).unwrap();
        assert_ne!(once, f);
        assert_eq!(augment(&once, Augment::MirrorH).unwrap(), f);
    }

    #[test]
    fn brightness_saturates() {
        let f = Frame::filled(0, 4, 4, 1, 240).unwrap();
        let out = augment(&f, Augment::Brightness(30)).unwrap();
        assert!(out.pixels.iter().all(|&p| p == 255));
        let out = augment(&f, Augment::Brightness(-255)).unwrap();
        assert!(out.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn zoom_factor_one_is_identity() {
        let f = gradient_frame(12, 12, 3);
        assert_eq!(augment(&f, Augment::Zoom(1.0)).unwrap(), f);
    }

    #[test]
    fn zoom_rejects_bad_factors() {
        let f = gradient_frame(4, 4, 1);
        assert!(augment(&f, Augment::Zoom(0.5)).is_err());
        assert!(augment(&f, Augment::Zoom(f64::NAN)).is_err());
    }

    #[test]
    fn zoom_magnifies_the_center() {
        // 4x4 frame, zoom 2 crops the central 2x2 region
        let f = gradient_frame(4, 4, 1);
        let out = augment(&f, Augment::Zoom(2.0)).unwrap();
        assert_eq!(out.pixel(0, 0, 0), f.pixel(1, 1, 0));
        assert_eq!(out.pixel(3, 3, 0), f.pixel(2, 2, 0));
    }

    #[test]
    fn resize_to_same_side_is_identity() {
        let f = gradient_frame(112, 112, 3);
        assert_eq!(resize(&f, 112).unwrap(), f);
    }

    #[test]
    fn resize_halves_checkerboard_blocks() {
        // 224x224 checkerboard of 2x2 blocks becomes a 1x1 checkerboard
        let mut pixels = Vec::with_capacity(224 * 224);
        for y in 0..224u32 {
            for x in 0..224u32 {
                pixels.push(if ((x / 2) + (y / 2)) % 2 == 0 { 255 } else { 0 });
            }
        }
        let f = Frame::new(0, 224, 224, 1, pixels).unwrap();
        let out = resize(&f, 112).unwrap();
        for y in 0..112u32 {
            for x in 0..112u32 {
                let expected = if (x + y) % 2 == 0 { 255 } else { 0 };
                assert_eq!(out.pixel(x, y, 0), expected);
            }
        }
    }

    #[test]
    fn resize_output_shape_contract() {
        let f = gradient_frame(100, 50, 3);
        let out = resize(&f, 112).unwrap();
        assert_eq!((out.width, out.height, out.channels), (112, 112, 3));
        assert!(resize(&f, 7).is_err());
    }

    #[test]
    fn draw_then_resize_is_deterministic() {
        let f = gradient_frame(96, 96, 3);
        let dets = [flame_det(10.0, 12.0, 30.0, 20.0)];
        let once = resize(&draw_boxes(&f, &dets), 112).unwrap();
        let twice = resize(&draw_boxes(&f, &dets), 112).unwrap();
        assert_eq!(once, twice);
    }
}
