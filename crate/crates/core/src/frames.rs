//! Sampled-frame inputs: a directory of images named by timestamp, or a raw
//! RGB24 stream with a JSON sidecar listing frame times.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};
use serde::Deserialize;
use thiserror::Error;

use crate::cuts::{frame_feature, CutError, FrameFeature};

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("no frame within {tolerance_s} s of {time_s} s in {source_name}")]
    Missing {
        time_s: f64,
        tolerance_s: f64,
        source_name: String,
    },
    #[error("cannot read frame {path}: {message}")]
    Read { path: String, message: String },
    #[error("frame source {path}: {message}")]
    Source { path: String, message: String },
}

/// Encoded image bytes for one sampled frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBytes {
    pub time_s: f64,
    pub mime: &'static str,
    pub bytes: Vec<u8>,
}

pub trait FrameSource: Send + Sync {
    /// Encoded frame nearest to `time_s`.
    fn frame_bytes(&self, time_s: f64) -> Result<FrameBytes, FrameError>;
    /// Decoded frame nearest to `time_s`.
    fn frame_rgb(&self, time_s: f64) -> Result<RgbImage, FrameError>;
    /// Every frame time the source holds, ascending.
    fn times(&self) -> Vec<f64>;
}

const IMAGE_EXTS: [&str; 5] = ["png", "jpg", "jpeg", "ppm", "pnm"];

fn mime_for(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("ppm" | "pnm") => "image/x-portable-pixmap",
        _ => "image/png",
    }
}

/// Per-second frame images named by their timestamp in seconds, e.g.
/// `3.png`, `3.000.png` or `000003.png`.
#[derive(Debug, Clone)]
pub struct FrameDir {
    root: PathBuf,
    entries: Vec<(f64, PathBuf)>,
    tolerance_s: f64,
}

impl FrameDir {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, FrameError> {
        let root = root.as_ref().to_path_buf();
        let source_err = |message: String| FrameError::Source {
            path: root.display().to_string(),
            message,
        };
        let read = std::fs::read_dir(&root).map_err(|e| source_err(e.to_string()))?;
        let mut entries = Vec::new();
        for entry in read {
            let path = entry.map_err(|e| source_err(e.to_string()))?.path();
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase);
            if !ext.is_some_and(|e| IMAGE_EXTS.contains(&e.as_str())) {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let t: f64 = stem
                .parse()
                .ok()
                .filter(|t: &f64| t.is_finite() && *t >= 0.0)
                .ok_or_else(|| source_err(format!("`{stem}` is not a timestamp in seconds")))?;
            entries.push((t, path));
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        Ok(FrameDir {
            root,
            entries,
            tolerance_s: 0.5,
        })
    }

    /// Maximum distance between a requested time and the frame served.
    pub fn with_tolerance(mut self, tolerance_s: f64) -> Self {
        self.tolerance_s = tolerance_s;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn nearest(&self, time_s: f64) -> Result<&(f64, PathBuf), FrameError> {
        let idx = self.entries.partition_point(|(t, _)| *t < time_s);
        let candidates = [idx.checked_sub(1), Some(idx)];
        candidates
            .iter()
            .flatten()
            .filter_map(|&i| self.entries.get(i))
            .filter(|(t, _)| (t - time_s).abs() <= self.tolerance_s + 1e-9)
            .min_by(|a, b| (a.0 - time_s).abs().total_cmp(&(b.0 - time_s).abs()))
            .ok_or_else(|| FrameError::Missing {
                time_s,
                tolerance_s: self.tolerance_s,
                source_name: self.root.display().to_string(),
            })
    }
}

impl FrameSource for FrameDir {
    fn frame_bytes(&self, time_s: f64) -> Result<FrameBytes, FrameError> {
        let (_, path) = self.nearest(time_s)?;
        let bytes = std::fs::read(path).map_err(|e| FrameError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(FrameBytes {
            time_s,
            mime: mime_for(path),
            bytes,
        })
    }

    fn frame_rgb(&self, time_s: f64) -> Result<RgbImage, FrameError> {
        let (_, path) = self.nearest(time_s)?;
        image::open(path)
            .map(|img| img.to_rgb8())
            .map_err(|e| FrameError::Read {
                path: path.display().to_string(),
                message: e.to_string(),
            })
    }

    fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|(t, _)| *t).collect()
    }
}

#[derive(Debug, Deserialize)]
struct RawSidecar {
    width: u32,
    height: u32,
    times: Vec<f64>,
}

/// Concatenated RGB24 frames (as written by `ffmpeg -f rawvideo -pix_fmt
/// rgb24`) plus a sidecar `{"width", "height", "times"}`.
#[derive(Debug, Clone)]
pub struct RawFrameStream {
    path: String,
    width: u32,
    height: u32,
    times: Vec<f64>,
    data: Vec<u8>,
    tolerance_s: f64,
}

impl RawFrameStream {
    pub fn open(raw: impl AsRef<Path>, sidecar: impl AsRef<Path>) -> Result<Self, FrameError> {
        let path = raw.as_ref().display().to_string();
        let err = |message: String| FrameError::Source {
            path: path.clone(),
            message,
        };
        let side_bytes = std::fs::read(sidecar.as_ref()).map_err(|e| err(e.to_string()))?;
        let side: RawSidecar =
            serde_json::from_slice(&side_bytes).map_err(|e| err(format!("sidecar: {e}")))?;
        let data = std::fs::read(raw.as_ref()).map_err(|e| err(e.to_string()))?;
        let frame_len = side.width as usize * side.height as usize * 3;
        if frame_len == 0 || data.len() != frame_len * side.times.len() {
            return Err(err(format!(
                "{} bytes do not hold {} frames of {}x{}",
                data.len(),
                side.times.len(),
                side.width,
                side.height
            )));
        }
        if side.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(err("sidecar times must be strictly increasing".into()));
        }
        Ok(RawFrameStream {
            path: path.clone(),
            width: side.width,
            height: side.height,
            times: side.times,
            data,
            tolerance_s: 0.5,
        })
    }

    fn index_of(&self, time_s: f64) -> Result<usize, FrameError> {
        self.times
            .iter()
            .enumerate()
            .filter(|(_, t)| (*t - time_s).abs() <= self.tolerance_s + 1e-9)
            .min_by(|a, b| (a.1 - time_s).abs().total_cmp(&(b.1 - time_s).abs()))
            .map(|(i, _)| i)
            .ok_or_else(|| FrameError::Missing {
                time_s,
                tolerance_s: self.tolerance_s,
                source_name: self.path.clone(),
            })
    }
}

impl FrameSource for RawFrameStream {
    fn frame_bytes(&self, time_s: f64) -> Result<FrameBytes, FrameError> {
        let img = self.frame_rgb(time_s)?;
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)
            .map_err(|e| FrameError::Read {
                path: self.path.clone(),
                message: e.to_string(),
            })?;
        Ok(FrameBytes {
            time_s,
            mime: "image/png",
            bytes: out.into_inner(),
        })
    }

    fn frame_rgb(&self, time_s: f64) -> Result<RgbImage, FrameError> {
        let i = self.index_of(time_s)?;
        let len = self.width as usize * self.height as usize * 3;
        let buf = self.data[i * len..(i + 1) * len].to_vec();
        Ok(RgbImage::from_raw(self.width, self.height, buf).expect("length checked on open"))
    }

    fn times(&self) -> Vec<f64> {
        self.times.clone()
    }
}

/// Histogram features for every frame the source holds.
pub fn source_features(source: &dyn FrameSource, bins_per_channel: usize) -> Result<Vec<FrameFeature>, crate::Error> {
    source
        .times()
        .into_iter()
        .map(|t| {
            let img = source.frame_rgb(t)?;
            frame_feature(&img, t, bins_per_channel).map_err(|e: CutError| e.into())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    #[test]
    fn frame_dir_matches_nearest_time() {
        let dir = tempfile::tempdir().unwrap();
        for (name, v) in [("0.png", 0u8), ("1.000.png", 100), ("000002.png", 200)] {
            RgbImage::from_pixel(2, 2, Rgb([v, v, v]))
                .save(dir.path().join(name))
                .unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let frames = FrameDir::open(dir.path()).unwrap();
        assert_eq!(frames.times(), vec![0.0, 1.0, 2.0]);
        assert_eq!(frames.frame_rgb(1.2).unwrap().get_pixel(0, 0).0, [100, 100, 100]);
        assert_eq!(frames.frame_bytes(2.0).unwrap().mime, "image/png");
        assert!(matches!(frames.frame_bytes(5.0), Err(FrameError::Missing { .. })));
    }

    #[test]
    fn bad_stem_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        RgbImage::new(1, 1).save(dir.path().join("frame_a.png")).unwrap();
        assert!(FrameDir::open(dir.path()).is_err());
    }

    #[test]
    fn raw_stream_reads_frames() {
        let dir = tempfile::tempdir().unwrap();
        let mut data = vec![0u8; 2 * 2 * 3];
        data.extend(vec![255u8; 2 * 2 * 3]);
        std::fs::write(dir.path().join("f.rgb"), &data).unwrap();
        std::fs::write(
            dir.path().join("f.json"),
            r#"{"width":2,"height":2,"times":[0.0,1.0]}"#,
        )
        .unwrap();
        let raw = RawFrameStream::open(dir.path().join("f.rgb"), dir.path().join("f.json")).unwrap();
        assert_eq!(raw.frame_rgb(1.0).unwrap().get_pixel(1, 1).0, [255, 255, 255]);
        let feats = source_features(&raw, 8).unwrap();
        assert_eq!(feats.len(), 2);
        std::fs::write(dir.path().join("f.json"), r#"{"width":3,"height":2,"times":[0.0,1.0]}"#).unwrap();
        assert!(RawFrameStream::open(dir.path().join("f.rgb"), dir.path().join("f.json")).is_err());
    }
}
