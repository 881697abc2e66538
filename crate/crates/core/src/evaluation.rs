//! Detection matching with the badbox metric, classification metrics, and
//! confusion matrices, in the two report shapes the artifact emits:
//! detection tables count TP/FP/FN/badbox per object class, classification
//! tables carry accuracy/precision/recall/F1 per verdict class.
//!
//! Matching runs per frame: predictions are NMS-filtered, then each ground
//! truth box greedily takes the unmatched same-class prediction with the
//! highest IoU. A match inside the configured IoU window and size floor is
//! a true positive; a match failing those criteria counts as badbox (and,
//! to keep `tp + fn = gt_count`, as a false negative); ground truths with
//! no candidate are false negatives and surviving unmatched predictions are
//! false positives.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{iou_raw, nms};
use crate::model::{
    Alert, ClassLabel, ClassRegistry, Detection, EvalConfig, ModelError, ObjectClass,
    ObjectRegistry,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("shape mismatch: {left} truths vs {right} predictions")]
    ShapeMismatch { left: usize, right: usize },
    #[error("label gap: {alerts} alerts vs {labels} ground-truth labels")]
    LabelGap { alerts: usize, labels: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-object-class matching tallies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ClassMatch {
    /// Predictions of this class surviving the NMS/confidence filter.
    pub detected: usize,
    pub gt_count: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Matched predictions that failed the IoU/size criteria.
    pub badbox: usize,
    /// Mean IoU over true positives (0 when there are none).
    pub mean_iou: f64,
}

/// Detection-evaluation report: one row per object-registry class.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    per_class: Vec<ClassMatch>,
}

impl MatchReport {
    pub fn class(&self, class: ObjectClass) -> &ClassMatch {
        &self.per_class[class.index()]
    }

    pub fn rows(&self) -> &[ClassMatch] {
        &self.per_class
    }

    /// Tallies summed over classes; mean IoU weighted by true positives.
    pub fn totals(&self) -> ClassMatch {
        let mut total = ClassMatch::default();
        let mut iou_sum = 0.0;
        for row in &self.per_class {
            total.detected += row.detected;
            total.gt_count += row.gt_count;
            total.true_positives += row.true_positives;
            total.false_positives += row.false_positives;
            total.false_negatives += row.false_negatives;
            total.badbox += row.badbox;
            iou_sum += row.mean_iou * row.true_positives as f64;
        }
        total.mean_iou = if total.true_positives > 0 {
            iou_sum / total.true_positives as f64
        } else {
            0.0
        };
        total
    }
}

/// Matches predictions against ground truth under `cfg`. Ground-truth
/// confidences are ignored; predictions are grouped by frame before the
/// NMS pass so boxes never suppress across frames.
pub fn match_detections(
    gt: &[Detection],
    preds: &[Detection],
    cfg: &EvalConfig,
    objects: &ObjectRegistry,
) -> Result<MatchReport, EvalError> {
    cfg.validate()?;
    let n_classes = objects.len();
    let mut per_class = vec![ClassMatch::default(); n_classes];
    let mut iou_sums = vec![0.0f64; n_classes];

    let mut frames: BTreeMap<usize, (Vec<&Detection>, Vec<&Detection>)> = BTreeMap::new();
    for g in gt {
        frames.entry(g.frame_index).or_default().0.push(g);
    }
    for p in preds {
        frames.entry(p.frame_index).or_default().1.push(p);
    }

    for (_frame, (gts, raw_preds)) in frames {
        let owned: Vec<Detection> = raw_preds.iter().map(|d| (*d).clone()).collect();
        let survivors = nms(&owned, cfg.confidence_threshold, cfg.nms_overlap);
        let mut taken = vec![false; survivors.len()];

        for class in objects.classes() {
            let ci = class.index();
            per_class[ci].detected += survivors.iter().filter(|p| p.object_class == class).count();

            // greedy per ground truth, large boxes first
            let mut class_gts: Vec<&&Detection> =
                gts.iter().filter(|g| g.object_class == class).collect();
            class_gts.sort_by(|a, b| b.bbox.area().total_cmp(&a.bbox.area()));
            per_class[ci].gt_count += class_gts.len();

            for g in class_gts {
                let mut best: Option<(usize, f64)> = None;
                for (i, p) in survivors.iter().enumerate() {
                    if taken[i] || p.object_class != class {
                        continue;
                    }
                    let overlap = iou_raw(&g.bbox, &p.bbox);
                    let better = match best {
                        None => true,
                        Some((bi, biou)) => {
                            overlap > biou
                                || (overlap == biou && p.confidence > survivors[bi].confidence)
                        }
                    };
                    if better {
                        best = Some((i, overlap));
                    }
                }
                match best {
                    None => per_class[ci].false_negatives += 1,
                    Some((i, overlap)) => {
                        taken[i] = true;
                        let fits = overlap >= cfg.iou_min
                            && overlap <= cfg.iou_max
                            && survivors[i].bbox.min_side() >= cfg.min_box_size;
                        if fits {
                            per_class[ci].true_positives += 1;
                            iou_sums[ci] += overlap;
                        } else {
                            per_class[ci].badbox += 1;
                            per_class[ci].false_negatives += 1;
                        }
                    }
                }
            }
        }

        for (i, p) in survivors.iter().enumerate() {
            if !taken[i] {
                per_class[p.object_class.index()].false_positives += 1;
            }
        }
    }

    for (ci, row) in per_class.iter_mut().enumerate() {
        row.mean_iou = if row.true_positives > 0 {
            iou_sums[ci] / row.true_positives as f64
        } else {
            0.0
        };
    }
    Ok(MatchReport { per_class })
}

/// Accuracy / precision / recall / F1 bundle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Prf {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_from_pr(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Metrics from raw counts; any zero denominator yields 0.
pub fn prf_from_counts(tp: u64, fp: u64, fn_count: u64, tn: u64) -> Prf {
    let ratio = |num: u64, den: u64| {
        if den > 0 {
            num as f64 / den as f64
        } else {
            0.0
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_count);
    Prf {
        accuracy: ratio(tp + tn, tp + fp + fn_count + tn),
        precision,
        recall,
        f1: f1_from_pr(precision, recall),
    }
}

/// Square truth-by-prediction matrix over a class registry, with raw counts
/// and row-normalized rates. Rows with no samples are all-zero and flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
    rates: Vec<f64>,
    empty_rows: Vec<bool>,
}

impl ConfusionMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn count(&self, truth: ClassLabel, predicted: ClassLabel) -> u64 {
        self.counts[truth.index() * self.n + predicted.index()]
    }

    pub fn rate(&self, truth: ClassLabel, predicted: ClassLabel) -> f64 {
        self.rates[truth.index() * self.n + predicted.index()]
    }

    pub fn rates_row(&self, truth: ClassLabel) -> &[f64] {
        let start = truth.index() * self.n;
        &self.rates[start..start + self.n]
    }

    pub fn counts_row(&self, truth: ClassLabel) -> &[u64] {
        let start = truth.index() * self.n;
        &self.counts[start..start + self.n]
    }

    /// True when no sample of this truth class was seen.
    pub fn row_is_empty(&self, truth: ClassLabel) -> bool {
        self.empty_rows[truth.index()]
    }
}

/// Counts truth/prediction pairs into a confusion matrix.
pub fn confusion(
    truths: &[ClassLabel],
    predictions: &[ClassLabel],
    classes: &ClassRegistry,
) -> Result<ConfusionMatrix, EvalError> {
    if truths.len() != predictions.len() {
        return Err(EvalError::ShapeMismatch {
            left: truths.len(),
            right: predictions.len(),
        });
    }
    let n = classes.len();
    let mut counts = vec![0u64; n * n];
    for (t, p) in truths.iter().zip(predictions) {
        if !classes.contains(*t) || !classes.contains(*p) {
            return Err(EvalError::Model(ModelError::UnknownClass(alloc::format!(
                "#{}",
                t.index().max(p.index())
            ))));
        }
        counts[t.index() * n + p.index()] += 1;
    }
    let mut rates = vec![0.0f64; n * n];
    let mut empty_rows = vec![false; n];
    for r in 0..n {
        let row_total: u64 = counts[r * n..(r + 1) * n].iter().sum();
        if row_total == 0 {
            empty_rows[r] = true;
            continue;
        }
        for c in 0..n {
            rates[r * n + c] = counts[r * n + c] as f64 / row_total as f64;
        }
    }
    Ok(ConfusionMatrix {
        n,
        counts,
        rates,
        empty_rows,
    })
}

/// How alerts pair with ground truth: one verdict per whole video
/// (dynamic-step summaries) or one per window of a continuous stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    PerVideo,
    PerSequence,
}

/// Scores alerts against ground-truth labels: a one-vs-rest [`Prf`] per
/// registry class plus the confusion matrix. Alerts and labels pair by
/// position; `PerVideo` callers must pass exactly one dynamic-step alert
/// per video.
pub fn evaluate_alerts(
    alerts: &[Alert],
    ground_truth: &[ClassLabel],
    _mode: EvalMode,
    classes: &ClassRegistry,
) -> Result<(Vec<Prf>, ConfusionMatrix), EvalError> {
    if alerts.len() != ground_truth.len() {
        return Err(EvalError::LabelGap {
            alerts: alerts.len(),
            labels: ground_truth.len(),
        });
    }
    let predictions: Vec<ClassLabel> = alerts.iter().map(|a| a.final_class).collect();
    let matrix = confusion(ground_truth, &predictions, classes)?;

    let mut per_class = Vec::with_capacity(classes.len());
    for class in classes.labels() {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_count = 0u64;
        let mut tn = 0u64;
        for (t, p) in ground_truth.iter().zip(&predictions) {
            match (*t == class, *p == class) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_count += 1,
                (false, false) => tn += 1,
            }
        }
        per_class.push(prf_from_counts(tp, fp, fn_count, tn));
    }
    Ok((per_class, matrix))
}
