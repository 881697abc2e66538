//! Synthetic ground-truthed stream generator: flat-background frames with
//! moving filled rectangles per scripted object, exact ground-truth boxes,
//! and window labels derived from event intervals. Everything is a pure
//! function of the seed, so runs replay bit-identically.

use alloc::string::String;
use alloc::vec::Vec;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    ClassLabel, ClassRegistry, Detection, Frame, ModelError, ObjectClass, ObjectRegistry,
    SequenceWindow,
};
use crate::preprocess::class_color;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One scripted incident: `class` holds over frames `[start, end)` and the
/// listed objects move through the scene for its duration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEvent {
    pub class: ClassLabel,
    pub start: usize,
    pub end: usize,
    pub objects: Vec<ObjectClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_frames: usize,
    pub width: u32,
    pub height: u32,
    pub events: Vec<ScenarioEvent>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_frames: 600,
            width: 96,
            height: 96,
            events: Vec::new(),
        }
    }
}

/// Generated stream plus its exact ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub frames: Vec<Frame>,
    pub gt_detections: Vec<Detection>,
}

const BACKGROUND: u8 = 40;

fn validate(spec: &ScenarioSpec, classes: &ClassRegistry) -> Result<(), ScenarioError> {
    if spec.n_frames == 0 || spec.width < 16 || spec.height < 16 {
        return Err(ScenarioError::InvalidScenario(
            "need n_frames >= 1 and a scene of at least 16x16".into(),
        ));
    }
    for event in &spec.events {
        if !classes.contains(event.class) {
            return Err(ScenarioError::InvalidScenario(
                "event class is not registered".into(),
            ));
        }
        if classes.is_normal(event.class) {
            return Err(ScenarioError::InvalidScenario(
                "events describe anomalies; normal is the absence of events".into(),
            ));
        }
        if event.start >= event.end || event.end > spec.n_frames {
            return Err(ScenarioError::InvalidScenario(alloc::format!(
                "event interval [{}, {}) outside [0, {})",
                event.start,
                event.end,
                spec.n_frames
            )));
        }
    }
    for (i, a) in spec.events.iter().enumerate() {
        for b in &spec.events[i + 1..] {
            let overlap = a.start < b.end && b.start < a.end;
            if overlap && a.class != b.class {
                return Err(ScenarioError::InvalidScenario(
                    "events of different classes overlap in time".into(),
                ));
            }
        }
    }
    Ok(())
}

struct MovingRect {
    object: ObjectClass,
    start_frame: usize,
    end_frame: usize,
    x: i64,
    y: i64,
    w: i64,
    h: i64,
    dx: i64,
    dy: i64,
}

fn rng_range(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> i64 {
    // modulo bias is irrelevant here; determinism is what matters
    lo + (rng.next_u64() % (hi - lo + 1) as u64) as i64
}

fn spawn_rect(
    rng: &mut ChaCha8Rng,
    spec: &ScenarioSpec,
    object: ObjectClass,
    start_frame: usize,
    end_frame: usize,
) -> MovingRect {
    let max_w = (spec.width as i64 / 3).max(9);
    let max_h = (spec.height as i64 / 3).max(9);
    let w = rng_range(rng, 8, max_w);
    let h = rng_range(rng, 8, max_h);
    let x = rng_range(rng, 0, spec.width as i64 - w);
    let y = rng_range(rng, 0, spec.height as i64 - h);
    let mut dx = rng_range(rng, -3, 3);
    let mut dy = rng_range(rng, -3, 3);
    if dx == 0 && dy == 0 {
        dx = 1;
        dy = 1;
    }
    MovingRect {
        object,
        start_frame,
        end_frame,
        x,
        y,
        w,
        h,
        dx,
        dy,
    }
}

impl MovingRect {
    /// Advances one frame, bouncing off the scene walls.
    fn step(&mut self, width: i64, height: i64) {
        self.x += self.dx;
        self.y += self.dy;
        if self.x < 0 {
            self.x = -self.x;
            self.dx = -self.dx;
        }
        if self.x + self.w > width {
            self.x = 2 * (width - self.w) - self.x;
            self.dx = -self.dx;
        }
        if self.y < 0 {
            self.y = -self.y;
            self.dy = -self.dy;
        }
        if self.y + self.h > height {
            self.y = 2 * (height - self.h) - self.y;
            self.dy = -self.dy;
        }
        self.x = self.x.clamp(0, width - self.w);
        self.y = self.y.clamp(0, height - self.h);
    }
}

/// Renders the scripted stream. Ground-truth boxes track the rectangles
/// exactly, one detection (confidence 1.0) per visible object per frame.
pub fn generate_scenario(
    spec: &ScenarioSpec,
    objects: &ObjectRegistry,
    classes: &ClassRegistry,
) -> Result<Scenario, ScenarioError> {
    validate(spec, classes)?;
    for event in &spec.events {
        for &object in &event.objects {
            if !objects.contains(object) {
                return Err(ScenarioError::InvalidScenario(
                    "event object is not registered".into(),
                ));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rects: Vec<MovingRect> = Vec::new();
    for event in &spec.events {
        for &object in &event.objects {
            rects.push(spawn_rect(&mut rng, spec, object, event.start, event.end));
        }
    }

    let mut frames = Vec::with_capacity(spec.n_frames);
    let mut gt_detections = Vec::new();
    for frame_index in 0..spec.n_frames {
        let mut frame = Frame::filled(frame_index, spec.width, spec.height, 3, BACKGROUND)?;
        for rect in &mut rects {
            if frame_index > rect.start_frame && frame_index < rect.end_frame {
                rect.step(spec.width as i64, spec.height as i64);
            }
            if frame_index < rect.start_frame || frame_index >= rect.end_frame {
                continue;
            }
            let color = class_color(rect.object);
            for y in rect.y..rect.y + rect.h {
                for x in rect.x..rect.x + rect.w {
                    let off = frame.offset(x as u32, y as u32);
                    frame.pixels[off..off + 3].copy_from_slice(&color);
                }
            }
            gt_detections.push(Detection {
                bbox: crate::model::BoundingBox {
                    x: rect.x as f64,
                    y: rect.y as f64,
                    w: rect.w as f64,
                    h: rect.h as f64,
                },
                object_class: rect.object,
                confidence: 1.0,
                frame_index,
            });
        }
        frames.push(frame);
    }
    Ok(Scenario {
        frames,
        gt_detections,
    })
}

/// Ground-truth label per window: a window takes an event's class iff at
/// least half of its frames lie inside the event interval, otherwise it is
/// normal. When several events reach half coverage the larger overlap wins,
/// ties going to the earlier event.
pub fn window_labels(
    events: &[ScenarioEvent],
    windows: &[SequenceWindow],
    classes: &ClassRegistry,
) -> Vec<ClassLabel> {
    windows
        .iter()
        .map(|window| {
            let mut best: Option<(usize, ClassLabel)> = None;
            for event in events {
                let covered = window
                    .frame_indices
                    .iter()
                    .filter(|&&i| i >= event.start && i < event.end)
                    .count();
                if 2 * covered >= window.len() && covered > 0 {
                    let better = match best {
                        None => true,
                        Some((c, _)) => covered > c,
                    };
                    if better {
                        best = Some((covered, event.class));
                    }
                }
            }
            best.map(|(_, label)| label)
                .unwrap_or_else(|| classes.normal())
        })
        .collect()
}
