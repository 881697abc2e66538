//! Core engine for anomaly detection over frame streams.
//!
//! A temporal classifier labels fixed-length frame sequences while a spatial
//! detector finds key objects (flames, firearms, people) on individual frames.
//! This crate fuses the two signals: in parallel mode a rule engine corrects
//! the classifier's verdict with the detector's evidence, in serial mode the
//! detector's output is burned into the frames before classification.
//!
//! Everything here is pure computation over in-memory data, `no_std` with
//! `alloc`. File formats, the CLI, process adapters, and wall-clock
//! benchmarking live in the companion `vigil` crate.
//!
//! Module map:
//!
//! - [`model`]: shared domain types and configuration
//! - [`geometry`]: IoU, DIoU, NMS, and score-decay DIoU-NMS
//! - [`windowing`]: the four sequence-window generators
//! - [`preprocess`]: frame transforms (boxes, masks, difference, resize)
//! - [`backends`]: detector/classifier contracts and replay implementations
//! - [`fusion`]: the correction rule engine and pipeline orchestration
//! - [`evaluation`]: detection matching (with the badbox metric) and
//!   classification metrics
//! - [`explain`]: heatmap normalization, overlays, and contour extraction
//! - [`scenario`]: synthetic ground-truthed stream generator
//!
//! ```
//! use vigil_core::fusion::{FusionEngine, KeyObjectDictionary};
//! use vigil_core::model::*;
//!
//! let classes = ClassRegistry::standard();
//! let objects = ObjectRegistry::standard();
//! let dictionary = KeyObjectDictionary::standard(&objects, &classes)?;
//! let engine = FusionEngine::new(
//!     FusionConfig::default(),
//!     dictionary,
//!     classes.clone(),
//!     objects.clone(),
//! )?;
//!
//! // a normal verdict corrected by a confident flame detection
//! let verdict = Verdict::certain(0, classes.normal(), &classes)?;
//! let flame = Detection::new(
//!     BoundingBox::new(4.0, 4.0, 10.0, 10.0)?,
//!     objects.object("flame")?,
//!     0.9,
//!     0,
//! )?;
//! let alert = engine.correct_verdict(&verdict, &[flame]);
//! assert_eq!(classes.name(alert.final_class), "fire");
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod backends;
pub mod evaluation;
pub mod explain;
pub mod fusion;
pub mod geometry;
pub mod model;
pub mod preprocess;
pub mod scenario;
pub mod windowing;

pub use model::{
    Alert, BoundingBox, ClassLabel, ClassMode, ClassRegistry, Detection, EvalConfig, Frame,
    FusionConfig, GeneratorKind, IouGate, ModelError, ObjectClass, ObjectRegistry, PipelineMode,
    RuleFired, RuleVariant, SequenceWindow, Verdict,
};

pub(crate) mod util {
    /// Largest integer not above `v`. `f64::floor` is unavailable in core.
    pub(crate) fn floor_i64(v: f64) -> i64 {
        let t = v as i64;
        if (t as f64) > v {
            t - 1
        } else {
            t
        }
    }

    /// Round half up, as floor(v + 0.5).
    pub(crate) fn round_i64(v: f64) -> i64 {
        floor_i64(v + 0.5)
    }
}
