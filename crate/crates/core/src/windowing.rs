//! Sequence-window generators: sliding, sliding with overlap, dynamic step,
//! and sliding with dynamic step.
//!
//! All generators emit strictly increasing in-range frame indices and drop
//! trailing partial windows; the classifier contract needs fixed-length
//! input.

use alloc::vec::Vec;
use thiserror::Error;

use crate::model::{GeneratorKind, SequenceWindow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindowError {
    #[error("video too short: {n_frames} frames, need at least {required}")]
    VideoTooShort { n_frames: usize, required: usize },
    #[error("invalid window spec: {0}")]
    InvalidSpec(&'static str),
}

/// Generator selection plus its parameters.
///
/// `stride` is the inter-frame subsample step of [`GeneratorKind::SlidingDynamic`];
/// plain sliding windows always advance by `window_len` (non-overlapping) and
/// overlapping ones by `window_len - overlap`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub mode: GeneratorKind,
    pub window_len: usize,
    pub stride: usize,
    pub overlap: usize,
    pub target_count: usize,
    /// Informational only; carried through to reports.
    pub fps: Option<f64>,
}

impl WindowSpec {
    /// Consecutive non-overlapping windows of `window_len` frames.
    pub fn sliding(window_len: usize) -> Self {
        Self {
            mode: GeneratorKind::Sliding,
            window_len,
            stride: 1,
            overlap: 0,
            target_count: window_len,
            fps: None,
        }
    }

    /// Consecutive windows sharing `overlap` frames with their predecessor.
    pub fn sliding_overlap(window_len: usize, overlap: usize) -> Self {
        Self {
            mode: GeneratorKind::SlidingOverlap,
            window_len,
            stride: 1,
            overlap,
            target_count: window_len,
            fps: None,
        }
    }

    /// One window summarizing the whole stream with `target_count` evenly
    /// stepped frames.
    pub fn dynamic_step(target_count: usize) -> Self {
        Self {
            mode: GeneratorKind::DynamicStep,
            window_len: target_count,
            stride: 1,
            overlap: 0,
            target_count,
            fps: None,
        }
    }

    /// Non-overlapping windows spanning `window_len * step` frames each,
    /// subsampled by `step`. With `step == 1` this is exactly `sliding`.
    pub fn sliding_dynamic(window_len: usize, step: usize) -> Self {
        Self {
            mode: GeneratorKind::SlidingDynamic,
            window_len,
            stride: step,
            overlap: 0,
            target_count: window_len,
            fps: None,
        }
    }

    pub fn with_fps(mut self, fps: f64) -> Self {
        self.fps = Some(fps);
        self
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        if self.window_len < 2 {
            return Err(WindowError::InvalidSpec("window_len must be >= 2"));
        }
        if self.target_count < 2 {
            return Err(WindowError::InvalidSpec("target_count must be >= 2"));
        }
        if self.overlap >= self.window_len {
            return Err(WindowError::InvalidSpec("overlap must be < window_len"));
        }
        if self.stride < 1 {
            return Err(WindowError::InvalidSpec("stride must be >= 1"));
        }
        Ok(())
    }
}

/// Per-video sampling step: floor(n_frames / target_count), always >= 1.
pub fn dynamic_step(n_frames: usize, target_count: usize) -> Result<usize, WindowError> {
    if target_count < 2 {
        return Err(WindowError::InvalidSpec("target_count must be >= 2"));
    }
    if n_frames < target_count {
        return Err(WindowError::VideoTooShort {
            n_frames,
            required: target_count,
        });
    }
    Ok(n_frames / target_count)
}

/// Materializes every window the spec yields over `n_frames` frames.
///
/// `DynamicStep` yields exactly one window regardless of stream length; the
/// sliding modes yield as many full windows as fit.
pub fn generate(spec: &WindowSpec, n_frames: usize) -> Result<Vec<SequenceWindow>, WindowError> {
    spec.validate()?;
    let mut windows = Vec::new();
    match spec.mode {
        GeneratorKind::Sliding | GeneratorKind::SlidingOverlap => {
            let stride = match spec.mode {
                GeneratorKind::Sliding => spec.window_len,
                _ => spec.window_len - spec.overlap,
            };
            if n_frames < spec.window_len {
                return Err(WindowError::VideoTooShort {
                    n_frames,
                    required: spec.window_len,
                });
            }
            let mut start = 0usize;
            while start + spec.window_len <= n_frames {
                windows.push(SequenceWindow {
                    window_id: windows.len(),
                    generator: spec.mode,
                    frame_indices: (start..start + spec.window_len).collect(),
                });
                start += stride;
            }
        }
        GeneratorKind::DynamicStep => {
            let step = dynamic_step(n_frames, spec.target_count)?;
            windows.push(SequenceWindow {
                window_id: 0,
                generator: spec.mode,
                frame_indices: (0..spec.target_count).map(|i| i * step).collect(),
            });
        }
        GeneratorKind::SlidingDynamic => {
            let span = spec.window_len * spec.stride;
            if n_frames < span {
                return Err(WindowError::VideoTooShort {
                    n_frames,
                    required: span,
                });
            }
            let mut start = 0usize;
            while start + span <= n_frames {
                windows.push(SequenceWindow {
                    window_id: windows.len(),
                    generator: spec.mode,
                    frame_indices: (0..spec.window_len)
                        .map(|i| start + i * spec.stride)
                        .collect(),
                });
                start += span;
            }
        }
    }
    Ok(windows)
}
