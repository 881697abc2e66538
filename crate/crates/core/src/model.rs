//! Shared domain types: class taxonomies, boxes, detections, frames,
//! sequence windows, verdicts, alerts, and run configuration.
//!
//! All types are immutable value objects and safe to share between threads.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::Serialize;
use thiserror::Error;

/// Name of the always-present "nothing happening" class.
pub const NORMAL_CLASS: &str = "normal";
/// Name of the collapsed anomaly class used in binary mode.
pub const ABNORMAL_CLASS: &str = "abnormal";
/// Key-object names with built-in behavior.
pub const FIREARM_OBJECT: &str = "firearm";
pub const FLAME_OBJECT: &str = "flame";
pub const PERSON_OBJECT: &str = "person";

/// Tolerance on verdict distributions summing to one.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("duplicate class `{0}`")]
    DuplicateClass(String),
    #[error("registry must contain the `{NORMAL_CLASS}` class")]
    MissingNormal,
    #[error("distribution has {got} entries, registry has {expected}")]
    DistributionLength { expected: usize, got: usize },
    #[error("distribution sums to {0}, expected 1")]
    DistributionSum(f64),
    #[error("probability {0} outside [0,1]")]
    InvalidProbability(f64),
    #[error("invalid bounding box: {0}")]
    InvalidBox(&'static str),
    #[error("confidence {0} outside [0,1]")]
    InvalidConfidence(f64),
    #[error("pixel buffer holds {got} bytes, expected {expected}")]
    FrameBufferMismatch { expected: usize, got: usize },
    #[error("invalid frame: {0}")]
    InvalidFrame(&'static str),
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
}

/// Insertion-ordered string-id table shared by both registries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct NameTable {
    names: Vec<String>,
}

impl NameTable {
    fn register(&mut self, name: &str) -> Result<u16, ModelError> {
        if name.is_empty() {
            return Err(ModelError::UnknownClass(String::new()));
        }
        if self.names.iter().any(|n| n == name) {
            return Err(ModelError::DuplicateClass(name.to_string()));
        }
        let ix = self.names.len() as u16;
        self.names.push(name.to_string());
        Ok(ix)
    }

    fn index_of(&self, name: &str) -> Option<u16> {
        self.names.iter().position(|n| n == name).map(|i| i as u16)
    }

    fn name(&self, ix: u16) -> Option<&str> {
        self.names.get(ix as usize).map(String::as_str)
    }

    fn len(&self) -> usize {
        self.names.len()
    }
}

/// A verdict class. Only meaningful together with the [`ClassRegistry`]
/// it was issued by; the index reflects registration order, which is also
/// the argmax tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassLabel(u16);

impl ClassLabel {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The anomaly taxonomy. `normal` is always present; further classes are
/// registered by string id in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRegistry {
    table: NameTable,
    normal: ClassLabel,
}

impl ClassRegistry {
    /// The stock taxonomy: fight, gunshot, fire, normal (normal last, so
    /// anomalies win argmax ties).
    pub fn standard() -> Self {
        Self::from_names(["fight", "gunshot", "fire", NORMAL_CLASS]).expect("static names")
    }

    /// The two-class taxonomy used after binary collapse.
    pub fn binary() -> Self {
        Self::from_names([ABNORMAL_CLASS, NORMAL_CLASS]).expect("static names")
    }

    /// Builds a registry from ordered names. `normal` must be present.
    pub fn from_names<'a, I>(names: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut table = NameTable::default();
        for name in names {
            table.register(name)?;
        }
        let normal = table
            .index_of(NORMAL_CLASS)
            .map(ClassLabel)
            .ok_or(ModelError::MissingNormal)?;
        Ok(Self { table, normal })
    }

    /// Appends a class, returning its label.
    pub fn register(&mut self, name: &str) -> Result<ClassLabel, ModelError> {
        self.table.register(name).map(ClassLabel)
    }

    /// Resolves a name, erroring on unknown classes.
    pub fn label(&self, name: &str) -> Result<ClassLabel, ModelError> {
        self.table
            .index_of(name)
            .map(ClassLabel)
            .ok_or_else(|| ModelError::UnknownClass(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Option<ClassLabel> {
        self.table.index_of(name).map(ClassLabel)
    }

    /// Name of a label issued by this registry.
    ///
    /// Panics if the label comes from a larger registry.
    pub fn name(&self, label: ClassLabel) -> &str {
        self.table.name(label.0).expect("label from this registry")
    }

    pub fn contains(&self, label: ClassLabel) -> bool {
        (label.0 as usize) < self.table.len()
    }

    pub fn normal(&self) -> ClassLabel {
        self.normal
    }

    pub fn is_normal(&self, label: ClassLabel) -> bool {
        label == self.normal
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.len() == 0
    }

    /// Labels in registration order.
    pub fn labels(&self) -> impl Iterator<Item = ClassLabel> + '_ {
        (0..self.table.len() as u16).map(ClassLabel)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.table.names.iter().map(String::as_str)
    }

    /// Maps a label of this registry onto the two-class taxonomy:
    /// `normal` stays `normal`, everything else becomes `abnormal`.
    /// Collapsing is idempotent (the binary registry collapses onto itself).
    pub fn binary_collapse(
        &self,
        label: ClassLabel,
        binary: &ClassRegistry,
    ) -> Result<ClassLabel, ModelError> {
        if !self.contains(label) {
            return Err(ModelError::UnknownClass(format!("#{}", label.0)));
        }
        if self.is_normal(label) {
            Ok(binary.normal())
        } else {
            binary.label(ABNORMAL_CLASS)
        }
    }
}

/// A detectable object class, keyed by string id in an [`ObjectRegistry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectClass(u16);

impl ObjectClass {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The key-object taxonomy seen by the spatial detector.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRegistry {
    table: NameTable,
}

impl ObjectRegistry {
    /// The stock object set: firearm, flame, person.
    pub fn standard() -> Self {
        let mut table = NameTable::default();
        for name in [FIREARM_OBJECT, FLAME_OBJECT, PERSON_OBJECT] {
            table.register(name).expect("static names");
        }
        Self { table }
    }

    pub fn from_names<'a, I>(names: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut table = NameTable::default();
        for name in names {
            table.register(name)?;
        }
        Ok(Self { table })
    }

    pub fn register(&mut self, name: &str) -> Result<ObjectClass, ModelError> {
        self.table.register(name).map(ObjectClass)
    }

    pub fn object(&self, name: &str) -> Result<ObjectClass, ModelError> {
        self.table
            .index_of(name)
            .map(ObjectClass)
            .ok_or_else(|| ModelError::UnknownClass(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Option<ObjectClass> {
        self.table.index_of(name).map(ObjectClass)
    }

    /// Name of an object class issued by this registry.
    ///
    /// Panics if the class comes from a larger registry.
    pub fn name(&self, class: ObjectClass) -> &str {
        self.table.name(class.0).expect("class from this registry")
    }

    pub fn contains(&self, class: ObjectClass) -> bool {
        (class.0 as usize) < self.table.len()
    }

    pub fn person(&self) -> Option<ObjectClass> {
        self.get(PERSON_OBJECT)
    }

    pub fn is_person(&self, class: ObjectClass) -> bool {
        self.table.name(class.0) == Some(PERSON_OBJECT)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.len() == 0
    }

    pub fn classes(&self) -> impl Iterator<Item = ObjectClass> + '_ {
        (0..self.table.len() as u16).map(ObjectClass)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.table.names.iter().map(String::as_str)
    }
}

/// Axis-aligned box in pixel coordinates, top-left anchored. Boxes may
/// extend past the frame; rendering clips them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, ModelError> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite()) {
            return Err(ModelError::InvalidBox("non-finite coordinate"));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(ModelError::InvalidBox("width and height must be positive"));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn min_side(&self) -> f64 {
        self.w.min(self.h)
    }
}

/// A classed, scored box on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub object_class: ObjectClass,
    pub confidence: f64,
    pub frame_index: usize,
}

impl Detection {
    pub fn new(
        bbox: BoundingBox,
        object_class: ObjectClass,
        confidence: f64,
        frame_index: usize,
    ) -> Result<Self, ModelError> {
        bbox.validate()?;
        if !(0.0..=1.0).contains(&confidence) || !confidence.is_finite() {
            return Err(ModelError::InvalidConfidence(confidence));
        }
        Ok(Self {
            bbox,
            object_class,
            confidence,
            frame_index,
        })
    }
}

/// One image of the stream; 8-bit interleaved pixels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub pixels: Vec<u8>,
    pub timestamp_ms: Option<f64>,
}

impl Frame {
    pub fn new(
        index: usize,
        width: u32,
        height: u32,
        channels: u8,
        pixels: Vec<u8>,
    ) -> Result<Self, ModelError> {
        if width == 0 || height == 0 {
            return Err(ModelError::InvalidFrame("zero dimension"));
        }
        if channels != 1 && channels != 3 {
            return Err(ModelError::InvalidFrame("channels must be 1 or 3"));
        }
        let expected = width as usize * height as usize * channels as usize;
        if pixels.len() != expected {
            return Err(ModelError::FrameBufferMismatch {
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            index,
            width,
            height,
            channels,
            pixels,
            timestamp_ms: None,
        })
    }

    /// Constant-valued frame.
    pub fn filled(
        index: usize,
        width: u32,
        height: u32,
        channels: u8,
        value: u8,
    ) -> Result<Self, ModelError> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(index, width, height, channels, vec![value; len])
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Byte offset of pixel (x, y), channel 0.
    pub fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    pub fn pixel(&self, x: u32, y: u32, channel: usize) -> u8 {
        self.pixels[self.offset(x, y) + channel]
    }
}

/// Which generator produced a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Sliding,
    SlidingOverlap,
    DynamicStep,
    SlidingDynamic,
}

/// An ordered selection of frame indices, the unit of temporal analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceWindow {
    pub window_id: usize,
    pub generator: GeneratorKind,
    pub frame_indices: Vec<usize>,
}

impl SequenceWindow {
    pub fn len(&self) -> usize {
        self.frame_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_indices.is_empty()
    }
}

/// Classifier output for one window: a distribution over the class registry
/// plus the argmax. Construction enforces that probabilities sum to one and
/// that `predicted` is the argmax, with ties broken by registration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    window_id: usize,
    distribution: Vec<f64>,
    predicted: ClassLabel,
}

impl Verdict {
    pub fn new(
        window_id: usize,
        distribution: Vec<f64>,
        classes: &ClassRegistry,
    ) -> Result<Self, ModelError> {
        if distribution.len() != classes.len() {
            return Err(ModelError::DistributionLength {
                expected: classes.len(),
                got: distribution.len(),
            });
        }
        let mut sum = 0.0;
        for &p in &distribution {
            if !p.is_finite()
                || !(-DISTRIBUTION_TOLERANCE..=1.0 + DISTRIBUTION_TOLERANCE).contains(&p)
            {
                return Err(ModelError::InvalidProbability(p));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(ModelError::DistributionSum(sum));
        }
        let mut best = 0usize;
        for (i, &p) in distribution.iter().enumerate() {
            if p > distribution[best] {
                best = i;
            }
        }
        let predicted = classes.labels().nth(best).expect("argmax within registry");
        Ok(Self {
            window_id,
            distribution,
            predicted,
        })
    }

    /// One-hot verdict for a single label.
    pub fn certain(
        window_id: usize,
        label: ClassLabel,
        classes: &ClassRegistry,
    ) -> Result<Self, ModelError> {
        if !classes.contains(label) {
            return Err(ModelError::UnknownClass(format!("#{}", label.index())));
        }
        let mut distribution = vec![0.0; classes.len()];
        distribution[label.index()] = 1.0;
        Self::new(window_id, distribution, classes)
    }

    pub fn window_id(&self) -> usize {
        self.window_id
    }

    pub fn predicted(&self) -> ClassLabel {
        self.predicted
    }

    pub fn distribution(&self) -> &[f64] {
        &self.distribution
    }

    pub fn probability(&self, label: ClassLabel) -> f64 {
        self.distribution.get(label.index()).copied().unwrap_or(0.0)
    }
}

/// Which correction rule produced an alert's final class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleFired {
    None,
    KeyObjectFire,
    KeyObjectGunshot,
    FpVetoFire,
    FpVetoGunshot,
}

/// Final decision for one window, with rule provenance.
///
/// Invariant: `rule_fired == RuleFired::None` iff `final_class ==
/// original_class`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alert {
    pub window_id: usize,
    pub final_class: ClassLabel,
    pub original_class: ClassLabel,
    pub rule_fired: RuleFired,
    pub supporting_detections: Vec<Detection>,
}

impl Alert {
    pub fn is_consistent(&self) -> bool {
        (self.rule_fired == RuleFired::None) == (self.final_class == self.original_class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    Serial,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IouGate {
    PlainIou,
    Diou,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleVariant {
    ReduceFalseNegatives,
    ReduceFalsePositives,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassMode {
    MultiClass,
    Binary,
}

/// Pipeline configuration. Confidences are ratios in `[0,1]`; percentage
/// inputs are normalized at config parse time, never here.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionConfig {
    pub confidence_threshold: f64,
    pub iou_gate: IouGate,
    pub mode: PipelineMode,
    pub rule_variant: RuleVariant,
    pub class_mode: ClassMode,
    pub sequence_length: usize,
    pub frame_skip: usize,
    pub image_size: u32,
    /// Overlap threshold for the per-window NMS pass in parallel mode.
    pub nms_overlap: f64,
    /// Score multiplier applied by DIoU-NMS instead of removal.
    pub diou_nms_decay: f64,
    /// When set, boxes in edge contact (zero-area intersection) satisfy the
    /// person gate even though their IoU is 0.
    pub touch_counts: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.55,
            iou_gate: IouGate::PlainIou,
            mode: PipelineMode::Parallel,
            rule_variant: RuleVariant::ReduceFalseNegatives,
            class_mode: ClassMode::MultiClass,
            sequence_length: 20,
            frame_skip: 1,
            image_size: 112,
            nms_overlap: 0.7,
            diou_nms_decay: 0.1,
            touch_counts: false,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(ModelError::InvalidConfig(
                "confidence_threshold outside [0,1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.nms_overlap) {
            return Err(ModelError::InvalidConfig("nms_overlap outside [0,1]"));
        }
        if self.sequence_length < 2 {
            return Err(ModelError::InvalidConfig("sequence_length must be >= 2"));
        }
        if self.frame_skip < 1 {
            return Err(ModelError::InvalidConfig("frame_skip must be >= 1"));
        }
        if self.image_size < 8 {
            return Err(ModelError::InvalidConfig("image_size must be >= 8"));
        }
        if !(self.diou_nms_decay > 0.0 && self.diou_nms_decay < 1.0) {
            return Err(ModelError::InvalidConfig("diou_nms_decay outside (0,1)"));
        }
        Ok(())
    }
}

/// Detection-evaluation configuration. Defaults mirror a run with
/// confidence 55%, NMS overlap 70%, IoU bounds [0%, 100%], and no minimum
/// box size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalConfig {
    pub confidence_threshold: f64,
    pub nms_overlap: f64,
    pub iou_min: f64,
    pub iou_max: f64,
    pub min_box_size: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.55,
            nms_overlap: 0.7,
            iou_min: 0.0,
            iou_max: 1.0,
            min_box_size: 0.0,
        }
    }
}

impl EvalConfig {
    /// Accept-everything configuration: no confidence floor, no
    /// suppression, full IoU range.
    pub fn permissive() -> Self {
        Self {
            confidence_threshold: 0.0,
            nms_overlap: 1.0,
            iou_min: 0.0,
            iou_max: 1.0,
            min_box_size: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(ModelError::InvalidConfig(
                "confidence_threshold outside [0,1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.nms_overlap) {
            return Err(ModelError::InvalidConfig("nms_overlap outside [0,1]"));
        }
        if !(0.0 <= self.iou_min && self.iou_min <= self.iou_max && self.iou_max <= 1.0) {
            return Err(ModelError::InvalidConfig(
                "need 0 <= iou_min <= iou_max <= 1",
            ));
        }
        if self.min_box_size < 0.0 {
            return Err(ModelError::InvalidConfig("min_box_size negative"));
        }
        Ok(())
    }
}
