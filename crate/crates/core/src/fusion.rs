//! The correction rule engine and serial/parallel pipeline orchestration.
//!
//! Parallel mode classifies raw (resized) windows while the detector samples
//! every `frame_skip`-th frame; the pooled, NMS-filtered detections then
//! correct the verdict through the key-object dictionary. Serial mode
//! instead burns the detector's output into every frame (boxes or masks)
//! before classification and applies no correction rules.
//!
//! Correction in the false-negative-reducing variant:
//!
//! 1. A non-normal verdict stands as-is.
//! 2. On a normal verdict, a qualifying flame detection turns the window
//!    into a fire; a qualifying firearm detection turns it into a gunshot
//!    only when some qualifying person overlaps the firearm (gate > 0).
//! 3. Otherwise the window stays normal.
//!
//! The false-positive-reducing variant additionally vetoes fire and gunshot
//! verdicts that lack a qualifying key-object detection. Dictionary entries
//! are checked in insertion order, so rule precedence (flame before firearm
//! by default) is a property of the dictionary, not of the engine.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

use crate::backends::{BackendError, Classifier, Detector};
use crate::geometry::{diou_raw, iou_raw, nms, touches};
use crate::model::{
    Alert, ClassLabel, ClassMode, ClassRegistry, Detection, Frame, FusionConfig, IouGate,
    ModelError, ObjectClass, ObjectRegistry, RuleFired, RuleVariant, SequenceWindow, Verdict,
};
use crate::preprocess::{apply_box_mask, draw_boxes, resize, MaskBackground, PreprocessError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("fusion configuration: {0}")]
    Config(String),
    #[error("backend error in window {window_id}: {source}")]
    Backend {
        window_id: usize,
        source: BackendError,
    },
    #[error("window {window_id} references frame {frame_index} outside the stream")]
    MissingFrame {
        window_id: usize,
        frame_index: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

/// One key-object correction entry: seeing `object` implies `anomaly`,
/// optionally gated on a person overlapping the object.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyObjectRule {
    pub object: ObjectClass,
    pub anomaly: ClassLabel,
    pub requires_person_contact: bool,
}

/// Ordered mapping from key objects to the anomalies they imply. Entry
/// order is rule precedence.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyObjectDictionary {
    rules: Vec<KeyObjectRule>,
}

impl KeyObjectDictionary {
    /// The stock dictionary: flame implies fire; firearm implies gunshot
    /// when a person is in contact. The person class itself maps to nothing.
    pub fn standard(
        objects: &ObjectRegistry,
        classes: &ClassRegistry,
    ) -> Result<Self, FusionError> {
        Self::new(
            alloc::vec![
                KeyObjectRule {
                    object: objects
                        .object(crate::model::FLAME_OBJECT)
                        .map_err(config_err)?,
                    anomaly: classes.label("fire").map_err(config_err)?,
                    requires_person_contact: false,
                },
                KeyObjectRule {
                    object: objects
                        .object(crate::model::FIREARM_OBJECT)
                        .map_err(config_err)?,
                    anomaly: classes.label("gunshot").map_err(config_err)?,
                    requires_person_contact: true,
                },
            ],
            objects,
            classes,
        )
    }

    /// Validates and wraps an ordered rule set. Targets must be registered
    /// anomaly classes with a reporting rule (`fire` or `gunshot` here), and
    /// the person class may never map to an anomaly.
    pub fn new(
        rules: Vec<KeyObjectRule>,
        objects: &ObjectRegistry,
        classes: &ClassRegistry,
    ) -> Result<Self, FusionError> {
        for rule in &rules {
            if !objects.contains(rule.object) {
                return Err(FusionError::Config(
                    "rule object is not in the object registry".to_string(),
                ));
            }
            if objects.is_person(rule.object) {
                return Err(FusionError::Config(
                    "the person class cannot map to an anomaly".to_string(),
                ));
            }
            if !classes.contains(rule.anomaly) {
                return Err(FusionError::Config(
                    "rule anomaly is not in the class registry".to_string(),
                ));
            }
            if classes.is_normal(rule.anomaly) {
                return Err(FusionError::Config(
                    "rule anomaly cannot be the normal class".to_string(),
                ));
            }
            if rule_labels(classes, rule.anomaly).is_none() {
                return Err(FusionError::Config(alloc::format!(
                    "no correction rule variant exists for anomaly `{}`",
                    classes.name(rule.anomaly)
                )));
            }
        }
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[KeyObjectRule] {
        &self.rules
    }

    fn rules_for_anomaly(&self, anomaly: ClassLabel) -> impl Iterator<Item = &KeyObjectRule> {
        self.rules.iter().filter(move |r| r.anomaly == anomaly)
    }
}

fn config_err(e: ModelError) -> FusionError {
    FusionError::Config(e.to_string())
}

/// (key-object rule, fp-veto rule) pair reported for an anomaly.
fn rule_labels(classes: &ClassRegistry, anomaly: ClassLabel) -> Option<(RuleFired, RuleFired)> {
    match classes.name(anomaly) {
        "fire" => Some((RuleFired::KeyObjectFire, RuleFired::FpVetoFire)),
        "gunshot" => Some((RuleFired::KeyObjectGunshot, RuleFired::FpVetoGunshot)),
        _ => None,
    }
}

/// Frame transform applied between detection and classification in serial
/// mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SerialPreprocess {
    DrawBoxes,
    MaskBlack,
    MaskOriginal,
}

/// The fusion engine: owns the configuration, registries, and key-object
/// dictionary, and holds no mutable state between calls.
///
/// Windows index into the frame slice positionally, so `frames[i].index`
/// should equal `i` for replay detectors to see the right records.
#[derive(Debug, Clone)]
pub struct FusionEngine {
    cfg: FusionConfig,
    dictionary: KeyObjectDictionary,
    classes: ClassRegistry,
    objects: ObjectRegistry,
}

impl FusionEngine {
    pub fn new(
        cfg: FusionConfig,
        dictionary: KeyObjectDictionary,
        classes: ClassRegistry,
        objects: ObjectRegistry,
    ) -> Result<Self, FusionError> {
        cfg.validate().map_err(config_err)?;
        // revalidate the dictionary against the registries actually used
        let dictionary = KeyObjectDictionary::new(dictionary.rules, &objects, &classes)?;
        Ok(Self {
            cfg,
            dictionary,
            classes,
            objects,
        })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.cfg
    }

    pub fn classes(&self) -> &ClassRegistry {
        &self.classes
    }

    pub fn objects(&self) -> &ObjectRegistry {
        &self.objects
    }

    pub fn dictionary(&self) -> &KeyObjectDictionary {
        &self.dictionary
    }

    fn qualifying<'d>(&self, dets: &'d [Detection], object: ObjectClass) -> Vec<&'d Detection> {
        dets.iter()
            .filter(|d| d.object_class == object && d.confidence >= self.cfg.confidence_threshold)
            .collect()
    }

    fn gate_passes(&self, a: &Detection, b: &Detection) -> bool {
        let value = match self.cfg.iou_gate {
            IouGate::PlainIou => iou_raw(&a.bbox, &b.bbox),
            IouGate::Diou => diou_raw(&a.bbox, &b.bbox),
        };
        value > 0.0 || (self.cfg.touch_counts && touches(&a.bbox, &b.bbox))
    }

    /// Applies the correction rules to one verdict given the window's
    /// pooled, NMS-filtered detections.
    pub fn correct_verdict(&self, verdict: &Verdict, dets: &[Detection]) -> Alert {
        let predicted = verdict.predicted();
        let window_id = verdict.window_id();

        if !self.classes.is_normal(predicted) {
            if self.cfg.rule_variant == RuleVariant::ReduceFalsePositives {
                if let Some(alert) = self.fp_veto(window_id, predicted, dets) {
                    return alert;
                }
            }
            return Alert {
                window_id,
                final_class: predicted,
                original_class: predicted,
                rule_fired: RuleFired::None,
                supporting_detections: Vec::new(),
            };
        }

        for rule in self.dictionary.rules() {
            let objects = self.qualifying(dets, rule.object);
            if objects.is_empty() {
                continue;
            }
            let (key_rule, _) = rule_labels(&self.classes, rule.anomaly)
                .expect("dictionary validated at construction");
            if !rule.requires_person_contact {
                return Alert {
                    window_id,
                    final_class: rule.anomaly,
                    original_class: predicted,
                    rule_fired: key_rule,
                    supporting_detections: objects.into_iter().cloned().collect(),
                };
            }
            let persons: Vec<&Detection> = dets
                .iter()
                .filter(|d| {
                    self.objects.is_person(d.object_class)
                        && d.confidence >= self.cfg.confidence_threshold
                })
                .collect();
            for object in &objects {
                for person in &persons {
                    if self.gate_passes(object, person) {
                        return Alert {
                            window_id,
                            final_class: rule.anomaly,
                            original_class: predicted,
                            rule_fired: key_rule,
                            supporting_detections: alloc::vec![
                                (*object).clone(),
                                (*person).clone()
                            ],
                        };
                    }
                }
            }
        }

        Alert {
            window_id,
            final_class: predicted,
            original_class: predicted,
            rule_fired: RuleFired::None,
            supporting_detections: Vec::new(),
        }
    }

    /// Veto half of the false-positive-reducing variant: an anomaly verdict
    /// whose key objects are all absent goes back to normal. Anomalies with
    /// no dictionary entry (fights) are never vetoed.
    fn fp_veto(
        &self,
        window_id: usize,
        predicted: ClassLabel,
        dets: &[Detection],
    ) -> Option<Alert> {
        let mut has_rule = false;
        for rule in self.dictionary.rules_for_anomaly(predicted) {
            has_rule = true;
            if !self.qualifying(dets, rule.object).is_empty() {
                return None;
            }
        }
        if !has_rule {
            return None;
        }
        let (_, veto_rule) =
            rule_labels(&self.classes, predicted).expect("dictionary validated at construction");
        Some(Alert {
            window_id,
            final_class: self.classes.normal(),
            original_class: predicted,
            rule_fired: veto_rule,
            supporting_detections: Vec::new(),
        })
    }

    fn frame<'f>(
        &self,
        frames: &'f [Frame],
        window_id: usize,
        frame_index: usize,
    ) -> Result<&'f Frame, FusionError> {
        frames.get(frame_index).ok_or(FusionError::MissingFrame {
            window_id,
            frame_index,
        })
    }

    fn backend_err(window_id: usize) -> impl Fn(BackendError) -> FusionError {
        move |source| FusionError::Backend { window_id, source }
    }

    /// Parallel mode for one window: classify the raw (resized) frames,
    /// detect on every `frame_skip`-th window position, pool and NMS-filter
    /// the detections, then apply the correction rules.
    pub fn run_parallel_window(
        &self,
        frames: &[Frame],
        window: &SequenceWindow,
        detector: &dyn Detector,
        classifier: &dyn Classifier,
    ) -> Result<Alert, FusionError> {
        let id = window.window_id;
        let mut resized = Vec::with_capacity(window.len());
        for &fi in &window.frame_indices {
            resized.push(resize(self.frame(frames, id, fi)?, self.cfg.image_size)?);
        }
        let verdict = classifier
            .classify(window, &resized)
            .map_err(Self::backend_err(id))?;
        let verdict = self.rehome_verdict(verdict, id)?;

        let mut pooled = Vec::new();
        for pos in (0..window.len()).step_by(self.cfg.frame_skip) {
            let fi = window.frame_indices[pos];
            pooled.extend(
                detector
                    .detect(self.frame(frames, id, fi)?)
                    .map_err(Self::backend_err(id))?,
            );
        }
        let filtered = nms(&pooled, self.cfg.confidence_threshold, self.cfg.nms_overlap);
        Ok(self.correct_verdict(&verdict, &filtered))
    }

    /// Serial mode for one window: every frame goes through the detector,
    /// the chosen transform, and the resize before classification. No
    /// correction rules run; alerts carry the verdict unchanged.
    pub fn run_serial_window(
        &self,
        frames: &[Frame],
        window: &SequenceWindow,
        detector: &dyn Detector,
        classifier: &dyn Classifier,
        preprocess: SerialPreprocess,
    ) -> Result<Alert, FusionError> {
        let id = window.window_id;
        let mut processed = Vec::with_capacity(window.len());
        for &fi in &window.frame_indices {
            let frame = self.frame(frames, id, fi)?;
            let dets = detector.detect(frame).map_err(Self::backend_err(id))?;
            let transformed = match preprocess {
                SerialPreprocess::DrawBoxes => draw_boxes(frame, &dets),
                SerialPreprocess::MaskBlack => apply_box_mask(frame, &dets, MaskBackground::Black),
                SerialPreprocess::MaskOriginal => {
                    apply_box_mask(frame, &dets, MaskBackground::Original)
                }
            };
            processed.push(resize(&transformed, self.cfg.image_size)?);
        }
        let verdict = classifier
            .classify(window, &processed)
            .map_err(Self::backend_err(id))?;
        let verdict = self.rehome_verdict(verdict, id)?;
        let predicted = verdict.predicted();
        Ok(Alert {
            window_id: id,
            final_class: predicted,
            original_class: predicted,
            rule_fired: RuleFired::None,
            supporting_detections: Vec::new(),
        })
    }

    /// Backends may stamp their own ids; alerts must use the engine's
    /// window ordering.
    fn rehome_verdict(&self, verdict: Verdict, window_id: usize) -> Result<Verdict, FusionError> {
        if verdict.window_id() == window_id {
            return Ok(verdict);
        }
        Ok(Verdict::new(
            window_id,
            verdict.distribution().to_vec(),
            &self.classes,
        )?)
    }

    /// Runs parallel mode over all windows. Alerts come back in window
    /// order.
    pub fn run_parallel(
        &self,
        frames: &[Frame],
        windows: &[SequenceWindow],
        detector: &dyn Detector,
        classifier: &dyn Classifier,
    ) -> Result<Vec<Alert>, FusionError> {
        windows
            .iter()
            .map(|w| self.run_parallel_window(frames, w, detector, classifier))
            .collect()
    }

    /// Runs serial mode over all windows. Alerts come back in window order.
    pub fn run_serial(
        &self,
        frames: &[Frame],
        windows: &[SequenceWindow],
        detector: &dyn Detector,
        classifier: &dyn Classifier,
        preprocess: SerialPreprocess,
    ) -> Result<Vec<Alert>, FusionError> {
        windows
            .iter()
            .map(|w| self.run_serial_window(frames, w, detector, classifier, preprocess))
            .collect()
    }
}

/// Collapses alert labels onto the two-class taxonomy when the config says
/// binary; multi-class configs pass alerts through untouched. Order and
/// length are preserved, as is rule provenance.
pub fn binary_alerts(
    alerts: Vec<Alert>,
    cfg: &FusionConfig,
    classes: &ClassRegistry,
    binary: &ClassRegistry,
) -> Result<Vec<Alert>, ModelError> {
    if cfg.class_mode != ClassMode::Binary {
        return Ok(alerts);
    }
    alerts
        .into_iter()
        .map(|mut alert| {
            alert.final_class = classes.binary_collapse(alert.final_class, binary)?;
            alert.original_class = classes.binary_collapse(alert.original_class, binary)?;
            Ok(alert)
        })
        .collect()
}
