//! Flat `key = value` run configuration. Keys mirror the engine config
//! field names; `#` starts a comment and `event` may repeat. Ratio fields
//! accept percentages (a value above 1 is divided by 100, so `55` and
//! `0.55` mean the same confidence threshold).

use std::path::PathBuf;

use thiserror::Error;
use vigil_core::fusion::SerialPreprocess;
use vigil_core::model::{
    ClassMode, ClassRegistry, FusionConfig, IouGate, ObjectRegistry, PipelineMode, RuleVariant,
};
use vigil_core::scenario::{ScenarioEvent, ScenarioSpec};
use vigil_core::windowing::WindowSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        message: message.into(),
    }
}

/// Which sequence generator cuts the stream into windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorChoice {
    Sliding,
    Overlap(usize),
    Dynamic,
    SlidingDynamic(usize),
}

/// Where the spatial detector comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DetectorChoice {
    /// Replay the scenario's own ground-truth boxes.
    ScenarioGt,
    /// Detect nothing.
    Disabled,
    /// Replay a detection JSONL file.
    Replay(PathBuf),
}

/// Where the temporal classifier comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassifierChoice {
    /// Answer with certainty in each window's ground-truth label.
    WindowLabels,
    /// Answer normal for every window.
    AlwaysNormal,
    /// Replay a verdict JSONL file.
    Replay(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub fusion: FusionConfig,
    pub serial_preprocess: SerialPreprocess,
    pub generator: GeneratorChoice,
    pub fps: f64,
    pub scenario: ScenarioSpec,
    pub detector: DetectorChoice,
    pub classifier: ClassifierChoice,
    /// Artificial per-call latencies for benchmarking mock backends.
    pub detector_delay_ms: u64,
    pub classifier_delay_ms: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fusion: FusionConfig::default(),
            serial_preprocess: SerialPreprocess::DrawBoxes,
            generator: GeneratorChoice::Sliding,
            fps: 30.0,
            scenario: ScenarioSpec::default(),
            detector: DetectorChoice::ScenarioGt,
            classifier: ClassifierChoice::WindowLabels,
            detector_delay_ms: 0,
            classifier_delay_ms: 0,
        }
    }
}

impl RunConfig {
    pub fn parse(
        text: &str,
        classes: &ClassRegistry,
        objects: &ObjectRegistry,
    ) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (ix, raw) in text.lines().enumerate() {
            let line = ix + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped
                .split_once('=')
                .ok_or_else(|| err(line, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(key, value, line, classes, objects)?;
        }
        Ok(cfg)
    }

    fn apply(
        &mut self,
        key: &str,
        value: &str,
        line: usize,
        classes: &ClassRegistry,
        objects: &ObjectRegistry,
    ) -> Result<(), ConfigError> {
        match key {
            "mode" => {
                self.fusion.mode = match value {
                    "parallel" => PipelineMode::Parallel,
                    "serial" => PipelineMode::Serial,
                    other => return Err(err(line, format!("unknown mode `{other}`"))),
                }
            }
            "rule" => {
                self.fusion.rule_variant = match value {
                    "fn" => RuleVariant::ReduceFalseNegatives,
                    "fp" => RuleVariant::ReduceFalsePositives,
                    other => return Err(err(line, format!("unknown rule variant `{other}`"))),
                }
            }
            "class_mode" => {
                self.fusion.class_mode = match value {
                    "multi" => ClassMode::MultiClass,
                    "binary" => ClassMode::Binary,
                    other => return Err(err(line, format!("unknown class mode `{other}`"))),
                }
            }
            "iou_gate" => {
                self.fusion.iou_gate = match value {
                    "iou" => IouGate::PlainIou,
                    "diou" => IouGate::Diou,
                    other => return Err(err(line, format!("unknown iou gate `{other}`"))),
                }
            }
            "confidence_threshold" => self.fusion.confidence_threshold = parse_ratio(value, line)?,
            "nms_overlap" => self.fusion.nms_overlap = parse_ratio(value, line)?,
            "sequence_length" => self.fusion.sequence_length = parse_num(value, line)?,
            "frame_skip" => self.fusion.frame_skip = parse_num(value, line)?,
            "image_size" => self.fusion.image_size = parse_num(value, line)?,
            "diou_nms_decay" => self.fusion.diou_nms_decay = parse_float(value, line)?,
            "touch_counts" => self.fusion.touch_counts = parse_bool(value, line)?,
            "serial_preprocess" => {
                self.serial_preprocess = match value {
                    "draw" => SerialPreprocess::DrawBoxes,
                    "mask_black" => SerialPreprocess::MaskBlack,
                    "mask_original" => SerialPreprocess::MaskOriginal,
                    other => return Err(err(line, format!("unknown preprocess `{other}`"))),
                }
            }
            "generator" => {
                self.generator = match value.split_once(':') {
                    None if value == "sliding" => GeneratorChoice::Sliding,
                    None if value == "dynamic" => GeneratorChoice::Dynamic,
                    Some(("overlap", n)) => GeneratorChoice::Overlap(parse_num(n, line)?),
                    Some(("sliding_dynamic", k)) => {
                        GeneratorChoice::SlidingDynamic(parse_num(k, line)?)
                    }
                    _ => return Err(err(line, format!("unknown generator `{value}`"))),
                }
            }
            "fps" => self.fps = parse_float(value, line)?,
            "seed" => self.scenario.seed = parse_num(value, line)?,
            "n_frames" => self.scenario.n_frames = parse_num(value, line)?,
            "width" => self.scenario.width = parse_num(value, line)?,
            "height" => self.scenario.height = parse_num(value, line)?,
            "event" => {
                let event = parse_event(value, line, classes, objects)?;
                self.scenario.events.push(event);
            }
            "detector" => {
                self.detector = match value.split_once(':') {
                    None if value == "gt" => DetectorChoice::ScenarioGt,
                    None if value == "none" => DetectorChoice::Disabled,
                    Some(("replay", path)) => DetectorChoice::Replay(PathBuf::from(path)),
                    _ => return Err(err(line, format!("unknown detector `{value}`"))),
                }
            }
            "classifier" => {
                self.classifier = match value.split_once(':') {
                    None if value == "labels" => ClassifierChoice::WindowLabels,
                    None if value == "normal" => ClassifierChoice::AlwaysNormal,
                    Some(("replay", path)) => ClassifierChoice::Replay(PathBuf::from(path)),
                    _ => return Err(err(line, format!("unknown classifier `{value}`"))),
                }
            }
            "detector_delay_ms" => self.detector_delay_ms = parse_num(value, line)?,
            "classifier_delay_ms" => self.classifier_delay_ms = parse_num(value, line)?,
            other => return Err(err(line, format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Window layout implied by the generator choice and sequence length.
    pub fn window_spec(&self) -> WindowSpec {
        let len = self.fusion.sequence_length;
        let spec = match self.generator {
            GeneratorChoice::Sliding => WindowSpec::sliding(len),
            GeneratorChoice::Overlap(overlap) => WindowSpec::sliding_overlap(len, overlap),
            GeneratorChoice::Dynamic => WindowSpec::dynamic_step(len),
            GeneratorChoice::SlidingDynamic(step) => WindowSpec::sliding_dynamic(len, step),
        };
        spec.with_fps(self.fps)
    }
}

fn parse_float(value: &str, line: usize) -> Result<f64, ConfigError> {
    value
        .parse()
        .map_err(|_| err(line, format!("expected a number, got `{value}`")))
}

/// Ratio in `[0,1]`; values above 1 are read as percentages.
fn parse_ratio(value: &str, line: usize) -> Result<f64, ConfigError> {
    let v = parse_float(value, line)?;
    Ok(if v > 1.0 { v / 100.0 } else { v })
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| err(line, format!("expected an integer, got `{value}`")))
}

fn parse_bool(value: &str, line: usize) -> Result<bool, ConfigError> {
    match value {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        other => Err(err(line, format!("expected a boolean, got `{other}`"))),
    }
}

/// `class:start:end[:object+object...]`, e.g. `fire:110:290:flame`.
fn parse_event(
    value: &str,
    line: usize,
    classes: &ClassRegistry,
    objects: &ObjectRegistry,
) -> Result<ScenarioEvent, ConfigError> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() != 3 && parts.len() != 4 {
        return Err(err(line, "expected `class:start:end[:objects]`"));
    }
    let class = classes
        .label(parts[0])
        .map_err(|e| err(line, e.to_string()))?;
    let start = parse_num(parts[1], line)?;
    let end = parse_num(parts[2], line)?;
    let mut event_objects = Vec::new();
    if parts.len() == 4 {
        for name in parts[3].split('+').filter(|s| !s.is_empty()) {
            event_objects.push(objects.object(name).map_err(|e| err(line, e.to_string()))?);
        }
    }
    Ok(ScenarioEvent {
        class,
        start,
        end,
        objects: event_objects,
    })
}
