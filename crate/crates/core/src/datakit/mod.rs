//! Video corpus representation and frame ingestion.
//!
//! A corpus is a directory tree `<root>/<split>/<video_id>/frame_%06d.png`
//! indexed by `<root>/<split>/manifest.jsonl` (one JSON object per line with
//! keys `video_id`, `class`, `num_frames`, `fps`, `height`, `width`).
//! Records can also carry an in-memory synthetic video description, so tests
//! and the generator share one rendering path.

mod frames;
mod synth;

pub use frames::{read_frame_png, write_frame_png, FrameCache};
pub use synth::{
    generate_synthetic_corpus, synthetic_manifest, ShapeKind, SyntheticVideo, SyntheticWorldSpec,
};

use ndarray::{Array4, Axis};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatakitError {
    #[error("manifest not found at {0}")]
    MissingManifest(PathBuf),
    #[error("video {video_id}: frame {frame_index} unreadable: {reason}")]
    CorruptFrame {
        video_id: String,
        frame_index: usize,
        reason: String,
    },
    #[error("corpus holds no usable records")]
    EmptyCorpus,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("write failed at {path}: {source}")]
    WriteFailure {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("clip [{start}, {start}+{length}) out of range for {num_frames} frames")]
    OutOfRange {
        start: usize,
        length: usize,
        num_frames: usize,
    },
    #[error("manifest line {line} malformed: {reason}")]
    ManifestParse { line: usize, reason: String },
    #[error("duplicate video id {0} in manifest")]
    DuplicateVideoId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train|test)")),
        }
    }
}

/// Where a record's pixel data lives.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameSource {
    /// Directory holding `frame_%06d.png`.
    FrameDir(PathBuf),
    /// Deterministically rendered synthetic video; no disk access.
    Synthetic(SyntheticVideo),
}

/// One video: identity, label, geometry, and a frame source.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    pub class_label: Option<String>,
    pub num_frames: usize,
    pub fps: f64,
    pub height: usize,
    pub width: usize,
    pub frame_source: FrameSource,
}

impl VideoRecord {
    pub fn frame_path(&self, index: usize) -> Option<PathBuf> {
        match &self.frame_source {
            FrameSource::FrameDir(dir) => Some(dir.join(frame_file_name(index))),
            FrameSource::Synthetic(_) => None,
        }
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.png")
}

/// Index over one split of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub records: Vec<VideoRecord>,
    pub split: Split,
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, video_id: &str) -> Option<&VideoRecord> {
        self.records.iter().find(|r| r.video_id == video_id)
    }

    pub fn video_ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.video_id.clone()).collect()
    }
}

/// Serialized manifest row; field order fixes the JSON key order.
#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    video_id: String,
    class: Option<String>,
    num_frames: usize,
    fps: f64,
    height: usize,
    width: usize,
}

/// Result of loading a manifest: usable records plus per-record rejections.
#[derive(Debug)]
pub struct LoadedCorpus {
    pub manifest: CorpusManifest,
    /// Records whose frames failed validation, with the failure each hit.
    pub rejected: Vec<(String, DatakitError)>,
    /// Records excluded because they are shorter than `min_frames`.
    pub excluded_short: usize,
}

/// Load and validate `<root>/<split>/manifest.jsonl`.
///
/// Every listed frame must decode as an RGB8 image matching the manifest
/// geometry. Videos shorter than `min_frames` are excluded (counted, not an
/// error). Records with unreadable frames are rejected individually; if no
/// usable record remains, the first rejection (or `EmptyCorpus`) is returned
/// as the overall error.
pub fn load_manifest(
    root: &Path,
    split: Split,
    min_frames: usize,
) -> Result<LoadedCorpus, DatakitError> {
    let split_dir = root.join(split.dir_name());
    let manifest_path = split_dir.join("manifest.jsonl");
    if !manifest_path.is_file() {
        return Err(DatakitError::MissingManifest(manifest_path));
    }

    let reader = BufReader::new(fs::File::open(&manifest_path)?);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ManifestRow =
            serde_json::from_str(&line).map_err(|e| DatakitError::ManifestParse {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        rows.push(row);
    }

    let mut seen = std::collections::HashSet::new();
    for row in &rows {
        if !seen.insert(row.video_id.clone()) {
            return Err(DatakitError::DuplicateVideoId(row.video_id.clone()));
        }
    }

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut excluded_short = 0usize;
    for row in rows {
        if row.num_frames < min_frames {
            excluded_short += 1;
            continue;
        }
        let dir = split_dir.join(&row.video_id);
        let record = VideoRecord {
            video_id: row.video_id,
            class_label: row.class,
            num_frames: row.num_frames,
            fps: row.fps,
            height: row.height,
            width: row.width,
            frame_source: FrameSource::FrameDir(dir),
        };
        match validate_record_frames(&record) {
            Ok(()) => records.push(record),
            Err(e) => rejected.push((record.video_id, e)),
        }
    }

    if records.is_empty() {
        return match rejected.into_iter().next() {
            Some((_, e)) => Err(e),
            None => Err(DatakitError::EmptyCorpus),
        };
    }

    Ok(LoadedCorpus {
        manifest: CorpusManifest {
            records,
            split,
            root: root.to_path_buf(),
        },
        rejected,
        excluded_short,
    })
}

fn validate_record_frames(record: &VideoRecord) -> Result<(), DatakitError> {
    if record.num_frames == 0 {
        return Err(DatakitError::CorruptFrame {
            video_id: record.video_id.clone(),
            frame_index: 0,
            reason: "record declares zero frames".into(),
        });
    }
    for index in 0..record.num_frames {
        let path = record
            .frame_path(index)
            .expect("frame-dir records only at load time");
        let frame = read_frame_png(&path).map_err(|reason| DatakitError::CorruptFrame {
            video_id: record.video_id.clone(),
            frame_index: index,
            reason,
        })?;
        let (h, w, _) = frame.dim();
        if h != record.height || w != record.width {
            return Err(DatakitError::CorruptFrame {
                video_id: record.video_id.clone(),
                frame_index: index,
                reason: format!(
                    "frame is {h}x{w}, manifest says {}x{}",
                    record.height, record.width
                ),
            });
        }
    }
    Ok(())
}

/// Write `manifest.jsonl` for `records` under `<root>/<split>/`.
pub fn write_manifest(
    root: &Path,
    split: Split,
    records: &[VideoRecord],
) -> Result<(), DatakitError> {
    let split_dir = root.join(split.dir_name());
    fs::create_dir_all(&split_dir).map_err(|source| DatakitError::WriteFailure {
        path: split_dir.clone(),
        source,
    })?;
    let path = split_dir.join("manifest.jsonl");
    let mut out = String::new();
    for r in records {
        let row = ManifestRow {
            video_id: r.video_id.clone(),
            class: r.class_label.clone(),
            num_frames: r.num_frames,
            fps: r.fps,
            height: r.height,
            width: r.width,
        };
        out.push_str(&serde_json::to_string(&row).expect("manifest row serializes"));
        out.push('\n');
    }
    fs::write(&path, out).map_err(|source| DatakitError::WriteFailure { path, source })
}

/// Read frames `[start, start + length)` in temporal order as `[T, H, W, 3]`.
pub fn read_clip(
    record: &VideoRecord,
    start: usize,
    length: usize,
) -> Result<Array4<u8>, DatakitError> {
    if start.checked_add(length).map_or(true, |end| end > record.num_frames) {
        return Err(DatakitError::OutOfRange {
            start,
            length,
            num_frames: record.num_frames,
        });
    }
    let mut clip = Array4::<u8>::zeros((length, record.height, record.width, 3));
    match &record.frame_source {
        FrameSource::FrameDir(_) => {
            for (t, index) in (start..start + length).enumerate() {
                let path = record.frame_path(index).expect("frame-dir record");
                let frame =
                    read_frame_png(&path).map_err(|reason| DatakitError::CorruptFrame {
                        video_id: record.video_id.clone(),
                        frame_index: index,
                        reason,
                    })?;
                clip.index_axis_mut(Axis(0), t).assign(&frame);
            }
        }
        FrameSource::Synthetic(video) => {
            for (t, index) in (start..start + length).enumerate() {
                clip.index_axis_mut(Axis(0), t)
                    .assign(&video.render_frame(index));
            }
        }
    }
    Ok(clip)
}
