//! Bounding-box arithmetic: IoU, DIoU, hard NMS, and score-decay DIoU-NMS.
//!
//! All functions are pure. The greedy NMS order is fully deterministic:
//! descending confidence, then smaller box area, then object-class
//! registration order, then frame index, then input position.

use alloc::vec::Vec;
use core::cmp::Ordering;
use thiserror::Error;

use crate::model::{BoundingBox, Detection, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid box: {0}")]
    InvalidBox(&'static str),
}

impl From<ModelError> for GeometryError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidBox(msg) => GeometryError::InvalidBox(msg),
            _ => GeometryError::InvalidBox("invalid box"),
        }
    }
}

/// Intersection-over-union of two boxes, in `[0,1]`. Disjoint or merely
/// touching boxes score 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> Result<f64, GeometryError> {
    a.validate()?;
    b.validate()?;
    Ok(iou_raw(a, b))
}

pub(crate) fn iou_raw(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Distance-IoU: IoU minus the squared center distance over the squared
/// diagonal of the smallest enclosing box. Always <= IoU, with equality
/// iff the centers coincide; ranges over (-1, 1].
pub fn diou(a: &BoundingBox, b: &BoundingBox) -> Result<f64, GeometryError> {
    a.validate()?;
    b.validate()?;
    Ok(diou_raw(a, b))
}

pub(crate) fn diou_raw(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let d2 = (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
    let cw = a.right().max(b.right()) - a.x.min(b.x);
    let ch = a.bottom().max(b.bottom()) - a.y.min(b.y);
    let c2 = cw * cw + ch * ch;
    iou_raw(a, b) - d2 / c2
}

/// True when the closed boxes share at least a point (edge or corner
/// contact included). A superset of `iou > 0`.
pub fn touches(a: &BoundingBox, b: &BoundingBox) -> bool {
    a.x <= b.right() && b.x <= a.right() && a.y <= b.bottom() && b.y <= a.bottom()
}

fn greedy_cmp(a: &Detection, ai: usize, b: &Detection, bi: usize) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.bbox.area().total_cmp(&b.bbox.area()))
        .then(a.object_class.index().cmp(&b.object_class.index()))
        .then(a.frame_index.cmp(&b.frame_index))
        .then(ai.cmp(&bi))
}

/// Hard non-maximum suppression.
///
/// Drops detections with confidence below `conf`, then greedily keeps the
/// highest-confidence detection and removes same-class detections whose IoU
/// with a kept one exceeds `overlap`. Suppression never crosses object
/// classes. The result is sorted by descending confidence.
pub fn nms(dets: &[Detection], conf: f64, overlap: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len())
        .filter(|&i| dets[i].confidence >= conf)
        .collect();
    order.sort_by(|&a, &b| greedy_cmp(&dets[a], a, &dets[b], b));

    let mut kept: Vec<Detection> = Vec::new();
    let mut suppressed = alloc::vec![false; dets.len()];
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        kept.push(dets[i].clone());
        for &j in &order[pos + 1..] {
            if suppressed[j] || dets[j].object_class != dets[i].object_class {
                continue;
            }
            if iou_raw(&dets[i].bbox, &dets[j].bbox) > overlap {
                suppressed[j] = true;
            }
        }
    }
    kept
}

/// DIoU-NMS with score decay.
///
/// Like [`nms`] but the suppression test is `diou > overlap` and suppressed
/// detections are not removed; their confidence is multiplied by `decay`
/// instead. A final confidence pass drops anything that decayed below
/// `conf`. Panics if `decay` is outside (0, 1).
pub fn diou_nms(dets: &[Detection], conf: f64, overlap: f64, decay: f64) -> Vec<Detection> {
    assert!(decay > 0.0 && decay < 1.0, "decay must be in (0,1)");
    let mut pool: Vec<(Detection, usize)> = dets
        .iter()
        .filter(|d| d.confidence >= conf)
        .cloned()
        .zip(0..)
        .collect();

    let mut kept: Vec<Detection> = Vec::new();
    while !pool.is_empty() {
        // Decayed scores reorder the pool, so the best is recomputed each
        // round rather than fixed up front.
        let mut best = 0usize;
        for i in 1..pool.len() {
            if greedy_cmp(&pool[i].0, pool[i].1, &pool[best].0, pool[best].1) == Ordering::Less {
                best = i;
            }
        }
        let (seed, _) = pool.swap_remove(best);
        for (other, _) in pool.iter_mut() {
            if other.object_class == seed.object_class
                && diou_raw(&seed.bbox, &other.bbox) > overlap
            {
                other.confidence *= decay;
            }
        }
        kept.push(seed);
    }
    kept.retain(|d| d.confidence >= conf);
    kept.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ObjectRegistry, FIREARM_OBJECT, FLAME_OBJECT};

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox { x, y, w, h }
    }

    fn det(bbox: BoundingBox, class: crate::model::ObjectClass, conf: f64) -> Detection {
        Detection {
            bbox,
            object_class: class,
            confidence: conf,
            frame_index: 0,
        }
    }

    #[test]
    fn iou_identity_is_one() {
        let b = bb(1.0, 2.0, 3.0, 4.0);
        assert_eq!(iou(&b, &b).unwrap(), 1.0);
    }

    #[test]
    fn iou_disjoint_is_zero() {
        assert_eq!(
            iou(&bb(0.0, 0.0, 2.0, 2.0), &bb(10.0, 10.0, 2.0, 2.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn iou_unit_offset_overlap() {
        // intersection 1, union 7
        let v = iou(&bb(0.0, 0.0, 2.0, 2.0), &bb(1.0, 1.0, 2.0, 2.0)).unwrap();
        assert!((v - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn iou_touching_edges_is_zero() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        let b = bb(2.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        assert!(touches(&a, &b));
    }

    #[test]
    fn iou_rejects_invalid_boxes() {
        assert!(matches!(
            iou(&bb(f64::NAN, 0.0, 1.0, 1.0), &bb(0.0, 0.0, 1.0, 1.0)),
            Err(GeometryError::InvalidBox(_))
        ));
    }

    #[test]
    fn diou_identity_is_one() {
        let b = bb(0.0, 0.0, 4.0, 4.0);
        assert_eq!(diou(&b, &b).unwrap(), 1.0);
    }

    #[test]
    fn diou_concentric_equals_iou() {
        // same centers, penalty 0: 4/16
        let v = diou(&bb(0.0, 0.0, 4.0, 4.0), &bb(1.0, 1.0, 2.0, 2.0)).unwrap();
        assert_eq!(v, 0.25);
    }

    #[test]
    fn diou_disjoint_is_negative() {
        // iou 0, d2 16, enclosing (0,0,6,2) => c2 40
        let v = diou(&bb(0.0, 0.0, 2.0, 2.0), &bb(4.0, 0.0, 2.0, 2.0)).unwrap();
        assert!((v - (-0.4)).abs() < 1e-12);
    }

    #[test]
    fn nms_single_detection_passes_through() {
        let objects = ObjectRegistry::standard();
        let flame = objects.object(FLAME_OBJECT).unwrap();
        let d = det(bb(0.0, 0.0, 4.0, 4.0), flame, 0.9);
        let out = nms(std::slice::from_ref(&d), 0.55, 0.7);
        assert_eq!(out, alloc::vec![d]);
    }

    #[test]
    fn nms_suppresses_same_class_duplicates() {
        let objects = ObjectRegistry::standard();
        let flame = objects.object(FLAME_OBJECT).unwrap();
        let hi = det(bb(0.0, 0.0, 4.0, 4.0), flame, 0.9);
        let lo = det(bb(0.0, 0.0, 4.0, 4.0), flame, 0.8);
        let out = nms(&[lo, hi.clone()], 0.55, 0.7);
        assert_eq!(out, alloc::vec![hi]);
    }

    #[test]
    fn nms_keeps_different_classes_on_identical_boxes() {
        let objects = ObjectRegistry::standard();
        let flame = objects.object(FLAME_OBJECT).unwrap();
        let firearm = objects.object(FIREARM_OBJECT).unwrap();
        let a = det(bb(0.0, 0.0, 4.0, 4.0), flame, 0.9);
        let b = det(bb(0.0, 0.0, 4.0, 4.0), firearm, 0.8);
        let out = nms(&[a, b], 0.55, 0.7);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn nms_drops_below_confidence() {
        let objects = ObjectRegistry::standard();
        let flame = objects.object(FLAME_OBJECT).unwrap();
        let weak = det(bb(0.0, 0.0, 4.0, 4.0), flame, 0.2);
        assert!(nms(&[weak], 0.55, 0.7).is_empty());
        assert!(nms(&[], 0.55, 0.7).is_empty());
    }

    #[test]
    fn diou_nms_keeps_far_apart_detections_unscaled() {
        let objects = ObjectRegistry::standard();
        let flame = objects.object(FLAME_OBJECT).unwrap();
        let a = det(bb(0.0, 0.0, 2.0, 2.0), flame, 0.9);
        let b = det(bb(40.0, 0.0, 2.0, 2.0), flame, 0.8);
        let out = diou_nms(&[a.clone(), b.clone()], 0.55, 0.7, 0.1);
        assert_eq!(out, alloc::vec![a, b]);
    }

    #[test]
    fn diou_nms_decays_then_filters() {
        let objects = ObjectRegistry::standard();
        let flame = objects.object(FLAME_OBJECT).unwrap();
        let hi = det(bb(0.0, 0.0, 4.0, 4.0), flame, 0.9);
        let lo = det(bb(0.0, 0.0, 4.0, 4.0), flame, 0.8);
        // 0.8 decays to 0.08 < 0.55 and is removed by the second pass
        let out = diou_nms(&[hi.clone(), lo], 0.55, 0.7, 0.1);
        assert_eq!(out, alloc::vec![hi]);
    }

    #[test]
    fn diou_nms_single_detection_is_identity() {
        let objects = ObjectRegistry::standard();
        let flame = objects.object(FLAME_OBJECT).unwrap();
        let d = det(bb(0.0, 0.0, 4.0, 4.0), flame, 0.9);
        assert_eq!(
            diou_nms(std::slice::from_ref(&d), 0.55, 0.7, 0.1),
            alloc::vec![d]
        );
    }
}
