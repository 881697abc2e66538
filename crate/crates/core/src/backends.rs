//! Pluggable inference boundary: the spatial-detector and temporal-classifier
//! contracts plus replay implementations driven by newline-delimited JSON
//! records.
//!
//! The wire format is versioned with `"v":1`:
//!
//! - detection record: `{"v":1,"frame":0,"class":"flame","conf":0.6,"box":[x,y,w,h]}`
//! - verdict record:   `{"v":1,"window":0,"dist":{"fight":0.1,"normal":0.9}}`
//!
//! Both record kinds may share one stream. Parsing is IO-free (`&str` in);
//! the companion crate handles files and the external-process transport.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    BoundingBox, ClassLabel, ClassRegistry, Detection, Frame, ModelError, ObjectRegistry,
    SequenceWindow, Verdict, DISTRIBUTION_TOLERANCE,
};

/// Protocol/record version accepted by this build.
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend failure: {0}")]
    Failure(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown class `{name}`")]
    UnknownClass { line: usize, name: String },
}

/// Spatial analysis contract: per-frame object detections.
///
/// Implementations must return detections carrying the queried frame's index
/// and confidences in `[0,1]`, and must either be safe to call from multiple
/// threads or say otherwise in their docs.
pub trait Detector {
    fn detect(&self, frame: &Frame) -> Result<Vec<Detection>, BackendError>;
}

/// Temporal analysis contract: one verdict per fixed-length window.
pub trait Classifier {
    fn classify(&self, window: &SequenceWindow, frames: &[Frame]) -> Result<Verdict, BackendError>;
}

impl<D: Detector + ?Sized> Detector for alloc::boxed::Box<D> {
    fn detect(&self, frame: &Frame) -> Result<Vec<Detection>, BackendError> {
        (**self).detect(frame)
    }
}

impl<C: Classifier + ?Sized> Classifier for alloc::boxed::Box<C> {
    fn classify(&self, window: &SequenceWindow, frames: &[Frame]) -> Result<Verdict, BackendError> {
        (**self).classify(window, frames)
    }
}

/// A detector that never sees anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullDetector;

impl Detector for NullDetector {
    fn detect(&self, _frame: &Frame) -> Result<Vec<Detection>, BackendError> {
        Ok(Vec::new())
    }
}

/// Serialized detection record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub v: u32,
    pub frame: u64,
    pub class: String,
    pub conf: f64,
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
}

impl DetectionRecord {
    pub fn from_detection(det: &Detection, objects: &ObjectRegistry) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            frame: det.frame_index as u64,
            class: objects.name(det.object_class).to_string(),
            conf: det.confidence,
            bbox: [det.bbox.x, det.bbox.y, det.bbox.w, det.bbox.h],
        }
    }

    pub fn to_detection(&self, objects: &ObjectRegistry) -> Result<Detection, ModelError> {
        let [x, y, w, h] = self.bbox;
        Detection::new(
            BoundingBox::new(x, y, w, h)?,
            objects.object(&self.class)?,
            self.conf,
            self.frame as usize,
        )
    }
}

/// Serialized verdict record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub v: u32,
    pub window: u64,
    pub dist: BTreeMap<String, f64>,
}

impl VerdictRecord {
    pub fn from_verdict(verdict: &Verdict, classes: &ClassRegistry) -> Self {
        let dist = classes
            .labels()
            .map(|l| (classes.name(l).to_string(), verdict.probability(l)))
            .collect();
        Self {
            v: PROTOCOL_VERSION,
            window: verdict.window_id() as u64,
            dist,
        }
    }
}

/// Scripted per-frame detections and per-window verdict distributions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayScript {
    detections: BTreeMap<usize, Vec<Detection>>,
    verdicts: BTreeMap<usize, Vec<f64>>,
}

impl ReplayScript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses newline-delimited JSON records. Lines are 1-based in errors;
    /// blank lines are skipped. Unknown class ids, out-of-range confidences,
    /// degenerate boxes, distributions not summing to one, duplicate window
    /// ids, and foreign protocol versions are all rejected.
    pub fn parse(
        text: &str,
        objects: &ObjectRegistry,
        classes: &ClassRegistry,
    ) -> Result<Self, ReplayError> {
        let mut script = Self::new();
        for (ix, raw) in text.lines().enumerate() {
            let line = ix + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(trimmed).map_err(|e| ReplayError::Parse {
                    line,
                    message: e.to_string(),
                })?;
            if value.get("frame").is_some() {
                let record: DetectionRecord =
                    serde_json::from_value(value).map_err(|e| ReplayError::Parse {
                        line,
                        message: e.to_string(),
                    })?;
                script.push_detection_record(&record, objects, line)?;
            } else if value.get("window").is_some() {
                let record: VerdictRecord =
                    serde_json::from_value(value).map_err(|e| ReplayError::Parse {
                        line,
                        message: e.to_string(),
                    })?;
                script.push_verdict_record(&record, classes, line)?;
            } else {
                return Err(ReplayError::Parse {
                    line,
                    message: "record is neither a detection (frame) nor a verdict (window)"
                        .to_string(),
                });
            }
        }
        Ok(script)
    }

    fn push_detection_record(
        &mut self,
        record: &DetectionRecord,
        objects: &ObjectRegistry,
        line: usize,
    ) -> Result<(), ReplayError> {
        if record.v != PROTOCOL_VERSION {
            return Err(ReplayError::Parse {
                line,
                message: alloc::format!("unsupported record version {}", record.v),
            });
        }
        let det = record.to_detection(objects).map_err(|e| match e {
            ModelError::UnknownClass(name) => ReplayError::UnknownClass { line, name },
            other => ReplayError::Parse {
                line,
                message: other.to_string(),
            },
        })?;
        self.insert_detection(det);
        Ok(())
    }

    fn push_verdict_record(
        &mut self,
        record: &VerdictRecord,
        classes: &ClassRegistry,
        line: usize,
    ) -> Result<(), ReplayError> {
        if record.v != PROTOCOL_VERSION {
            return Err(ReplayError::Parse {
                line,
                message: alloc::format!("unsupported record version {}", record.v),
            });
        }
        let window = record.window as usize;
        if self.verdicts.contains_key(&window) {
            return Err(ReplayError::Parse {
                line,
                message: alloc::format!("duplicate verdict for window {window}"),
            });
        }
        let mut dense = alloc::vec![0.0; classes.len()];
        for (name, &p) in &record.dist {
            let label = classes.get(name).ok_or_else(|| ReplayError::UnknownClass {
                line,
                name: name.clone(),
            })?;
            dense[label.index()] = p;
        }
        let sum: f64 = dense.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(ReplayError::Parse {
                line,
                message: alloc::format!("distribution sums to {sum}, expected 1"),
            });
        }
        if dense.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(ReplayError::Parse {
                line,
                message: "probability outside [0,1]".to_string(),
            });
        }
        self.verdicts.insert(window, dense);
        Ok(())
    }

    /// Appends a detection, keeping input order within its frame.
    pub fn insert_detection(&mut self, det: Detection) {
        self.detections
            .entry(det.frame_index)
            .or_default()
            .push(det);
    }

    /// Registers a dense (registry-ordered) distribution for a window.
    pub fn insert_verdict(
        &mut self,
        window_id: usize,
        distribution: Vec<f64>,
        classes: &ClassRegistry,
    ) -> Result<(), ModelError> {
        // Verdict::new runs the full validation
        Verdict::new(window_id, distribution.clone(), classes)?;
        self.verdicts.insert(window_id, distribution);
        Ok(())
    }

    /// Builds a script whose verdict for window `i` is certain about
    /// `labels[i]`.
    pub fn from_window_labels(
        labels: &[ClassLabel],
        classes: &ClassRegistry,
    ) -> Result<Self, ModelError> {
        let mut script = Self::new();
        for (window_id, &label) in labels.iter().enumerate() {
            let mut dense = alloc::vec![0.0; classes.len()];
            dense[label.index()] = 1.0;
            script.insert_verdict(window_id, dense, classes)?;
        }
        Ok(script)
    }

    pub fn detections_for(&self, frame_index: usize) -> &[Detection] {
        self.detections
            .get(&frame_index)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn verdict_for(&self, window_id: usize) -> Option<&[f64]> {
        self.verdicts.get(&window_id).map(Vec::as_slice)
    }

    pub fn all_detections(&self) -> impl Iterator<Item = &Detection> {
        self.detections.values().flatten()
    }

    pub fn detection_count(&self) -> usize {
        self.detections.values().map(Vec::len).sum()
    }

    pub fn verdict_count(&self) -> usize {
        self.verdicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty() && self.verdicts.is_empty()
    }
}

/// Replays scripted detections; frames without records yield nothing.
/// Immutable, so fully thread-safe.
#[derive(Debug, Clone)]
pub struct ReplayDetector {
    script: Arc<ReplayScript>,
}

impl ReplayDetector {
    pub fn new(script: Arc<ReplayScript>) -> Self {
        Self { script }
    }

    pub fn from_detections<I: IntoIterator<Item = Detection>>(dets: I) -> Self {
        let mut script = ReplayScript::new();
        for det in dets {
            script.insert_detection(det);
        }
        Self::new(Arc::new(script))
    }
}

impl Detector for ReplayDetector {
    fn detect(&self, frame: &Frame) -> Result<Vec<Detection>, BackendError> {
        Ok(self.script.detections_for(frame.index).to_vec())
    }
}

/// Replays scripted verdicts; unscripted windows fall back to certainty in
/// the configured class (the normal class unless stated otherwise).
#[derive(Debug, Clone)]
pub struct ReplayClassifier {
    script: Arc<ReplayScript>,
    classes: ClassRegistry,
    fallback: ClassLabel,
}

impl ReplayClassifier {
    pub fn new(script: Arc<ReplayScript>, classes: ClassRegistry) -> Self {
        let fallback = classes.normal();
        Self {
            script,
            classes,
            fallback,
        }
    }

    pub fn with_fallback(mut self, fallback: ClassLabel) -> Self {
        self.fallback = fallback;
        self
    }
}

impl Classifier for ReplayClassifier {
    fn classify(
        &self,
        window: &SequenceWindow,
        _frames: &[Frame],
    ) -> Result<Verdict, BackendError> {
        match self.script.verdict_for(window.window_id) {
            Some(dist) => Ok(Verdict::new(
                window.window_id,
                dist.to_vec(),
                &self.classes,
            )?),
            None => Ok(Verdict::certain(
                window.window_id,
                self.fallback,
                &self.classes,
            )?),
        }
    }
}
