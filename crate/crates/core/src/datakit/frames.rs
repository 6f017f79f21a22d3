//! PNG frame IO and an in-memory frame cache.

use super::{read_clip, CorpusManifest, DatakitError};
use ndarray::{s, Array3, Array4, ArrayView4};
use rayon::prelude::*;
use std::collections::HashMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

/// Decode one RGB8 PNG into `[H, W, 3]`. Errors are reported as strings so
/// callers can wrap them into `CorruptFrame` with video context.
pub fn read_frame_png(path: &Path) -> Result<Array3<u8>, String> {
    let file = fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| e.to_string())?;
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or("image too large")?];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(format!(
            "unsupported pixel format {:?}/{:?} (need RGB8)",
            info.color_type, info.bit_depth
        ));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    buf.truncate(info.buffer_size());
    Array3::from_shape_vec((h, w, 3), buf).map_err(|e| e.to_string())
}

/// Encode `[H, W, 3]` as an RGB8 PNG.
pub fn write_frame_png(path: &Path, frame: &Array3<u8>) -> Result<(), DatakitError> {
    let (h, w, c) = frame.dim();
    assert_eq!(c, 3, "frames are RGB");
    let file = fs::File::create(path).map_err(|source| DatakitError::WriteFailure {
        path: path.to_path_buf(),
        source,
    })?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let data = frame
        .as_slice()
        .map(|s| s.to_vec())
        .unwrap_or_else(|| frame.iter().copied().collect());
    let write = |mut enc: png::Writer<BufWriter<fs::File>>| -> Result<(), png::EncodingError> {
        enc.write_image_data(&data)?;
        enc.finish()
    };
    encoder
        .write_header()
        .and_then(write)
        .map_err(|e| DatakitError::WriteFailure {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })
}

/// Whole-corpus pixel cache keyed by video id.
///
/// Desk-scale corpora fit in memory comfortably (hundreds of small videos);
/// the trainer and evaluators read clips from here instead of re-decoding
/// PNGs every step.
pub struct FrameCache {
    videos: HashMap<String, Array4<u8>>,
}

impl FrameCache {
    pub fn load(manifest: &CorpusManifest) -> Result<Self, DatakitError> {
        let loaded: Result<Vec<_>, DatakitError> = manifest
            .records
            .par_iter()
            .map(|r| Ok((r.video_id.clone(), read_clip(r, 0, r.num_frames)?)))
            .collect();
        Ok(Self {
            videos: loaded?.into_iter().collect(),
        })
    }

    pub fn num_frames(&self, video_id: &str) -> Option<usize> {
        self.videos.get(video_id).map(|v| v.dim().0)
    }

    pub fn clip(
        &self,
        video_id: &str,
        start: usize,
        length: usize,
    ) -> Result<ArrayView4<'_, u8>, DatakitError> {
        let video = self
            .videos
            .get(video_id)
            .ok_or_else(|| DatakitError::ManifestParse {
                line: 0,
                reason: format!("video {video_id} not in cache"),
            })?;
        let num_frames = video.dim().0;
        if start.checked_add(length).map_or(true, |end| end > num_frames) {
            return Err(DatakitError::OutOfRange {
                start,
                length,
                num_frames,
            });
        }
        Ok(video.slice(s![start..start + length, .., .., ..]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use tempfile::tempdir;

    #[test]
    fn png_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.png");
        let frame = Array3::from_shape_fn((9, 7, 3), |(y, x, c)| (y * 31 + x * 7 + c * 3) as u8);
        write_frame_png(&path, &frame).unwrap();
        let back = read_frame_png(&path).unwrap();
        assert_eq!(frame, back);
    }

    #[test]
    fn cache_clip_matches_direct_read() {
        let spec = crate::datakit::SyntheticWorldSpec {
            num_videos: 2,
            frames_per_video: 10,
            resolution: (20, 20),
            num_shape_classes: 2,
            motion_speed_range: (1.0, 1.5),
            rng_seed: 42,
        };
        let manifest = crate::datakit::synthetic_manifest(&spec).unwrap();
        let cache = FrameCache::load(&manifest).unwrap();
        let r = &manifest.records[1];
        let direct = crate::datakit::read_clip(r, 3, 5).unwrap();
        let cached = cache.clip(&r.video_id, 3, 5).unwrap();
        assert_eq!(direct.view(), cached);
    }
}
