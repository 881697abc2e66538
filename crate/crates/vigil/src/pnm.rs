//! Binary PGM (P5) and PPM (P6) frame IO, used for golden tests and the
//! explain command's overlays. Grayscale frames map to P5, RGB to P6,
//! maxval fixed at 255.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;
use vigil_core::model::Frame;

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad pnm file: {0}")]
    Format(String),
}

pub fn write_frame(path: &Path, frame: &Frame) -> Result<(), PnmError> {
    let mut out = Vec::with_capacity(frame.pixels.len() + 32);
    let magic = if frame.channels == 3 { "P6" } else { "P5" };
    write!(out, "{magic}\n{} {}\n255\n", frame.width, frame.height)?;
    out.extend_from_slice(&frame.pixels);
    fs::write(path, out)?;
    Ok(())
}

pub fn read_frame(path: &Path, index: usize) -> Result<Frame, PnmError> {
    let data = fs::read(path)?;
    parse_frame(&data, index).map_err(|msg| PnmError::Format(format!("{}: {msg}", path.display())))
}

fn parse_frame(data: &[u8], index: usize) -> Result<Frame, String> {
    let mut pos = 0usize;

    let mut token = |data: &[u8]| -> Result<String, String> {
        // skip whitespace and '#' comments between header fields
        loop {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
    };

    let magic = token(data)?;
    let channels: u8 = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(format!("unsupported magic `{other}`")),
    };
    let width: u32 = token(data)?.parse().map_err(|_| "bad width".to_string())?;
    let height: u32 = token(data)?.parse().map_err(|_| "bad height".to_string())?;
    let maxval: u32 = token(data)?.parse().map_err(|_| "bad maxval".to_string())?;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let expected = width as usize * height as usize * channels as usize;
    let raster = data
        .get(pos..pos + expected)
        .ok_or_else(|| "truncated raster".to_string())?;
    Frame::new(index, width, height, channels, raster.to_vec()).map_err(|e| e.to_string())
}

/// Reads every `.pgm`/`.ppm` file in a directory, sorted by file name, and
/// indexes the frames 0..n in that order.
pub fn read_frame_dir(dir: &Path) -> Result<Vec<Frame>, PnmError> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("pgm") | Some("ppm")
            )
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| read_frame(p, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for channels in [1u8, 3] {
            let n = 6 * 4 * channels as usize;
            let frame = Frame::new(2, 6, 4, channels, (0..n).map(|i| i as u8).collect()).unwrap();
            let path = dir.path().join(format!("f{channels}.pnm"));
            write_frame(&path, &frame).unwrap();
            let back = read_frame(&path, 2).unwrap();
            assert_eq!(back, frame);
        }
    }

    #[test]
    fn header_comments_are_skipped() {
        let data = b"P5\n# a comment\n2 2\n255\n\x01\x02\x03\x04";
        let frame = parse_frame(data, 0).unwrap();
        assert_eq!(frame.pixels, vec![1, 2, 3, 4]);
    }

    #[test]
    fn truncated_raster_is_rejected() {
        let data = b"P5\n2 2\n255\n\x01\x02";
        assert!(parse_frame(data, 0).is_err());
    }

    #[test]
    fn directory_reads_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        for (name, value) in [("b.pgm", 9u8), ("a.pgm", 3)] {
            let frame = Frame::filled(0, 2, 2, 1, value).unwrap();
            write_frame(&dir.path().join(name), &frame).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let frames = read_frame_dir(dir.path()).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].pixels[0], 3);
        assert_eq!(frames[1].pixels[0], 9);
        assert_eq!(frames[1].index, 1);
    }
}
