//! Newline-delimited JSON file IO: replay scripts (detections + verdicts)
//! and heatmap series. Record validation lives in the core crate; this
//! module adds files and error context.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;
use vigil_core::backends::{DetectionRecord, ReplayError, ReplayScript, PROTOCOL_VERSION};
use vigil_core::explain::{ExplainError, Heatmap};
use vigil_core::model::{ClassRegistry, Detection, ObjectRegistry};

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Replay { path: String, source: ReplayError },
    #[error("{path}: line {line}: {message}")]
    Record {
        path: String,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> JsonlError + '_ {
    move |source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads a replay script (detection and/or verdict records) from a file.
pub fn load_replay(
    path: &Path,
    objects: &ObjectRegistry,
    classes: &ClassRegistry,
) -> Result<ReplayScript, JsonlError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    ReplayScript::parse(&text, objects, classes).map_err(|source| JsonlError::Replay {
        path: path.display().to_string(),
        source,
    })
}

/// Writes detections as one record per line.
pub fn write_detections(
    path: &Path,
    dets: &[Detection],
    objects: &ObjectRegistry,
) -> Result<(), JsonlError> {
    let mut out = Vec::new();
    for det in dets {
        let record = DetectionRecord::from_detection(det, objects);
        serde_json::to_writer(&mut out, &record).expect("record serializes");
        out.push(b'\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

#[derive(serde::Serialize, serde::Deserialize)]
struct HeatmapRecord {
    v: u32,
    frame: u64,
    w: u32,
    h: u32,
    values: Vec<f64>,
}

/// Loads a heatmap series, one record per frame, ordered by frame id.
pub fn load_heatmaps(path: &Path) -> Result<Vec<(usize, Heatmap)>, JsonlError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut maps = Vec::new();
    for (ix, raw) in text.lines().enumerate() {
        let line = ix + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let record: HeatmapRecord =
            serde_json::from_str(trimmed).map_err(|e| JsonlError::Record {
                path: path.display().to_string(),
                line,
                message: e.to_string(),
            })?;
        if record.v != PROTOCOL_VERSION {
            return Err(JsonlError::Record {
                path: path.display().to_string(),
                line,
                message: format!("unsupported record version {}", record.v),
            });
        }
        let map = Heatmap::new(record.w, record.h, record.values).map_err(|e: ExplainError| {
            JsonlError::Record {
                path: path.display().to_string(),
                line,
                message: e.to_string(),
            }
        })?;
        maps.push((record.frame as usize, map));
    }
    maps.sort_by_key(|(frame, _)| *frame);
    Ok(maps)
}

/// Writes a heatmap series, one record per line.
pub fn write_heatmaps(path: &Path, maps: &[(usize, Heatmap)]) -> Result<(), JsonlError> {
    let mut out = Vec::new();
    for (frame, map) in maps {
        let record = HeatmapRecord {
            v: PROTOCOL_VERSION,
            frame: *frame as u64,
            w: map.width(),
            h: map.height(),
            values: map.values().to_vec(),
        };
        serde_json::to_writer(&mut out, &record).expect("record serializes");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(&out).map_err(io_err(path))
}
