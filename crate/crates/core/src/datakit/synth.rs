//! Synthetic moving-shapes video generator.
//!
//! Each video shows one filled shape (circle, square, or triangle — the
//! class) moving at constant speed and bouncing off the frame borders.
//! Motion is temporally smooth, so removing frames produces a genuine
//! positional jump. Everything derives from the spec's seed, so two runs
//! yield byte-identical corpora.

use super::{
    frame_file_name, write_frame_png, CorpusManifest, DatakitError, FrameSource, Split,
    VideoRecord,
};
use ndarray::Array3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

const SYNTHETIC_FPS: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorldSpec {
    pub num_videos: usize,
    pub frames_per_video: usize,
    /// (height, width) in pixels.
    pub resolution: (usize, usize),
    /// Number of distinct shape classes, at most three.
    pub num_shape_classes: usize,
    /// Uniform speed range in pixels per frame; (0, 0) gives static shapes.
    pub motion_speed_range: (f64, f64),
    pub rng_seed: u64,
}

impl SyntheticWorldSpec {
    pub fn validate(&self) -> Result<(), DatakitError> {
        let (h, w) = self.resolution;
        let err = |m: String| Err(DatakitError::InvalidSpec(m));
        if self.num_videos == 0 {
            return err("num_videos must be >= 1".into());
        }
        if self.frames_per_video == 0 {
            return err("frames_per_video must be >= 1".into());
        }
        if h < 16 || w < 16 {
            return err(format!("resolution {h}x{w} too small (min 16x16)"));
        }
        if self.num_shape_classes == 0 || self.num_shape_classes > ShapeKind::ALL.len() {
            return err(format!(
                "num_shape_classes must be in 1..={}",
                ShapeKind::ALL.len()
            ));
        }
        let (lo, hi) = self.motion_speed_range;
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
            return err(format!("bad motion_speed_range ({lo}, {hi})"));
        }
        Ok(())
    }

    /// Check there is room for an initial window plus a non-overlapping
    /// continuous clip of the given sampler geometry.
    pub fn validate_for_sampler(&self, clip_len: usize, missing_len: usize) -> Result<(), DatakitError> {
        self.validate()?;
        let required = 2 * clip_len + missing_len;
        if self.frames_per_video < required {
            return Err(DatakitError::InvalidSpec(format!(
                "frames_per_video {} < 2*clip_len + missing_len = {required}",
                self.frames_per_video
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Circle,
    Square,
    Triangle,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Circle, ShapeKind::Square, ShapeKind::Triangle];

    pub fn label(self) -> &'static str {
        match self {
            ShapeKind::Circle => "circle",
            ShapeKind::Square => "square",
            ShapeKind::Triangle => "triangle",
        }
    }

    /// Largest distance from the shape's centroid to any of its pixels,
    /// given the nominal radius; used to keep the shape inside the frame.
    fn max_extent(self, radius: f64) -> f64 {
        match self {
            ShapeKind::Circle => radius,
            // half-side 0.85 r, corners at 0.85 r * sqrt(2)
            ShapeKind::Square => 0.85 * radius * std::f64::consts::SQRT_2,
            ShapeKind::Triangle => 1.15 * radius,
        }
    }
}

/// Fully determined synthetic video; `render_frame` is a pure function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticVideo {
    pub shape: ShapeKind,
    pub foreground: [u8; 3],
    pub background: [u8; 3],
    pub radius: f64,
    pub start: (f64, f64),
    /// Pixels per frame along (y, x).
    pub velocity: (f64, f64),
    pub height: usize,
    pub width: usize,
    pub num_frames: usize,
}

impl SyntheticVideo {
    /// Shape centroid at frame `t`: constant velocity with reflection off
    /// the borders, keeping the whole shape inside the frame.
    pub fn center_at(&self, t: usize) -> (f64, f64) {
        let margin = self.shape.max_extent(self.radius);
        let lo_y = margin;
        let hi_y = self.height as f64 - 1.0 - margin;
        let lo_x = margin;
        let hi_x = self.width as f64 - 1.0 - margin;
        let (mut y, mut x) = self.start;
        let (mut vy, mut vx) = self.velocity;
        for _ in 0..t {
            y += vy;
            x += vx;
            let (ry, rvy) = reflect(y, vy, lo_y, hi_y);
            let (rx, rvx) = reflect(x, vx, lo_x, hi_x);
            y = ry;
            vy = rvy;
            x = rx;
            vx = rvx;
        }
        (y, x)
    }

    pub fn render_frame(&self, t: usize) -> Array3<u8> {
        let (cy, cx) = self.center_at(t);
        let mut frame = Array3::from_shape_fn((self.height, self.width, 3), |(_, _, c)| {
            self.background[c]
        });
        let r = self.radius;
        let extent = self.shape.max_extent(r);
        let y0 = ((cy - extent).floor().max(0.0)) as usize;
        let y1 = ((cy + extent).ceil() as usize).min(self.height - 1);
        let x0 = ((cx - extent).floor().max(0.0)) as usize;
        let x1 = ((cx + extent).ceil() as usize).min(self.width - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dy = y as f64 - cy;
                let dx = x as f64 - cx;
                if self.contains(dy, dx) {
                    for c in 0..3 {
                        frame[(y, x, c)] = self.foreground[c];
                    }
                }
            }
        }
        frame
    }

    fn contains(&self, dy: f64, dx: f64) -> bool {
        let r = self.radius;
        match self.shape {
            ShapeKind::Circle => dy * dy + dx * dx <= r * r,
            ShapeKind::Square => {
                let s = 0.85 * r;
                dy.abs() <= s && dx.abs() <= s
            }
            ShapeKind::Triangle => {
                // equilateral, circumradius 1.15 r, apex up, centroid at origin
                let cr = 1.15 * r;
                let a = (0.0, -cr);
                let b = (-cr * 0.8660254037844386, cr * 0.5);
                let c = (cr * 0.8660254037844386, cr * 0.5);
                let p = (dx, dy);
                point_in_triangle(p, a, b, c)
            }
        }
    }
}

fn reflect(p: f64, v: f64, lo: f64, hi: f64) -> (f64, f64) {
    debug_assert!(lo < hi, "shape larger than frame");
    let (mut p, mut v) = (p, v);
    // a single step moves at most a few pixels; loop handles corner cases
    for _ in 0..8 {
        if p < lo {
            p = 2.0 * lo - p;
            v = -v;
        } else if p > hi {
            p = 2.0 * hi - p;
            v = -v;
        } else {
            break;
        }
    }
    (p.clamp(lo, hi), v)
}

fn point_in_triangle(p: (f64, f64), a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    let sign = |p1: (f64, f64), p2: (f64, f64), p3: (f64, f64)| {
        (p1.0 - p3.0) * (p2.1 - p3.1) - (p2.0 - p3.0) * (p1.1 - p3.1)
    };
    let d1 = sign(p, a, b);
    let d2 = sign(p, b, c);
    let d3 = sign(p, c, a);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(has_neg && has_pos)
}

/// Derive the per-video parameter set for `spec`. Class assignment is
/// balanced: video i gets shape i mod num_shape_classes.
fn plan_videos(spec: &SyntheticWorldSpec, split: Split) -> Vec<(String, SyntheticVideo)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let (h, w) = spec.resolution;
    let min_dim = h.min(w) as f64;
    let mut videos = Vec::with_capacity(spec.num_videos);
    for i in 0..spec.num_videos {
        let shape = ShapeKind::ALL[i % spec.num_shape_classes];
        let radius = rng.random_range(0.13..0.19) * min_dim;
        let (foreground, background) = distinct_colors(&mut rng);
        let margin = shape.max_extent(radius) + 0.5;
        let start = (
            rng.random_range(margin..h as f64 - 1.0 - margin),
            rng.random_range(margin..w as f64 - 1.0 - margin),
        );
        let (lo, hi) = spec.motion_speed_range;
        let speed = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let video = SyntheticVideo {
            shape,
            foreground,
            background,
            radius,
            start,
            velocity: (speed * angle.sin(), speed * angle.cos()),
            height: h,
            width: w,
            num_frames: spec.frames_per_video,
        };
        videos.push((format!("{}_{i:04}", split.dir_name()), video));
    }
    videos
}

/// Pick foreground/background colors far enough apart that the shape mask
/// is unambiguous. Colors carry no class information by construction.
fn distinct_colors(rng: &mut ChaCha8Rng) -> ([u8; 3], [u8; 3]) {
    loop {
        let fg = [rng.random::<u8>(), rng.random::<u8>(), rng.random::<u8>()];
        let bg = [rng.random::<u8>(), rng.random::<u8>(), rng.random::<u8>()];
        let dist: i32 = fg
            .iter()
            .zip(bg.iter())
            .map(|(&a, &b)| (a as i32 - b as i32).abs())
            .sum();
        if dist >= 120 {
            return (fg, bg);
        }
    }
}

fn record_for(video_id: String, video: SyntheticVideo, source: FrameSource) -> VideoRecord {
    VideoRecord {
        video_id,
        class_label: Some(video.shape.label().to_string()),
        num_frames: video.num_frames,
        fps: SYNTHETIC_FPS,
        height: video.height,
        width: video.width,
        frame_source: source,
    }
}

/// In-memory synthetic corpus: same plan as `generate_synthetic_corpus`,
/// but records render frames on demand instead of reading PNGs.
pub fn synthetic_manifest(spec: &SyntheticWorldSpec) -> Result<CorpusManifest, DatakitError> {
    spec.validate()?;
    let records = plan_videos(spec, Split::Train)
        .into_iter()
        .map(|(id, v)| {
            let source = FrameSource::Synthetic(v.clone());
            record_for(id, v, source)
        })
        .collect();
    Ok(CorpusManifest {
        records,
        split: Split::Train,
        root: std::path::PathBuf::new(),
    })
}

/// Render the corpus to `<out>/<split>/` as PNG frame directories plus a
/// manifest. Deterministic given `spec.rng_seed`.
pub fn generate_synthetic_corpus(
    spec: &SyntheticWorldSpec,
    out: &Path,
    split: Split,
) -> Result<CorpusManifest, DatakitError> {
    spec.validate()?;
    let split_dir = out.join(split.dir_name());
    fs::create_dir_all(&split_dir).map_err(|source| DatakitError::WriteFailure {
        path: split_dir.clone(),
        source,
    })?;

    let planned = plan_videos(spec, split);
    let mut records = Vec::with_capacity(planned.len());
    for (video_id, video) in planned {
        let video_dir = split_dir.join(&video_id);
        fs::create_dir_all(&video_dir).map_err(|source| DatakitError::WriteFailure {
            path: video_dir.clone(),
            source,
        })?;
        for t in 0..video.num_frames {
            let frame = video.render_frame(t);
            write_frame_png(&video_dir.join(frame_file_name(t)), &frame)?;
        }
        records.push(record_for(
            video_id,
            video,
            FrameSource::FrameDir(video_dir),
        ));
    }

    super::write_manifest(out, split, &records)?;
    Ok(CorpusManifest {
        records,
        split,
        root: out.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::read_clip;
    use tempfile::tempdir;

    fn spec(seed: u64, speed: (f64, f64)) -> SyntheticWorldSpec {
        SyntheticWorldSpec {
            num_videos: 4,
            frames_per_video: 16,
            resolution: (32, 32),
            num_shape_classes: 3,
            motion_speed_range: speed,
            rng_seed: seed,
        }
    }

    /// Mask centroid of the (unique) non-background blob in a frame.
    fn mask_centroid(frame: &Array3<u8>, bg: [u8; 3]) -> (f64, f64) {
        let (h, w, _) = frame.dim();
        let (mut sy, mut sx, mut n) = (0.0, 0.0, 0usize);
        for y in 0..h {
            for x in 0..w {
                let d: i32 = (0..3)
                    .map(|c| (frame[(y, x, c)] as i32 - bg[c] as i32).abs())
                    .sum();
                if d > 30 {
                    sy += y as f64;
                    sx += x as f64;
                    n += 1;
                }
            }
        }
        assert!(n > 0, "no shape pixels found");
        (sy / n as f64, sx / n as f64)
    }

    #[test]
    fn fixed_seed_reproduces_byte_identical_frames() {
        let s = spec(7, (1.0, 2.0));
        let dir_a = tempdir().unwrap();
        let dir_b = tempdir().unwrap();
        let ma = generate_synthetic_corpus(&s, dir_a.path(), Split::Train).unwrap();
        let mb = generate_synthetic_corpus(&s, dir_b.path(), Split::Train).unwrap();
        for (ra, rb) in ma.records.iter().zip(mb.records.iter()) {
            let ca = read_clip(ra, 0, ra.num_frames).unwrap();
            let cb = read_clip(rb, 0, rb.num_frames).unwrap();
            assert_eq!(ca, cb);
        }
    }

    #[test]
    fn zero_speed_gives_static_frames() {
        let manifest = synthetic_manifest(&spec(3, (0.0, 0.0))).unwrap();
        for r in &manifest.records {
            let clip = read_clip(r, 0, r.num_frames).unwrap();
            let first = clip.index_axis(ndarray::Axis(0), 0);
            for t in 1..r.num_frames {
                assert_eq!(
                    clip.index_axis(ndarray::Axis(0), t),
                    first,
                    "motion at speed 0"
                );
            }
        }
    }

    #[test]
    fn centroid_displacement_tracks_configured_speed() {
        // centroid-tracking oracle over the generated frames
        let manifest = synthetic_manifest(&spec(11, (3.0, 3.0))).unwrap();
        for r in &manifest.records {
            let video = match &r.frame_source {
                crate::datakit::FrameSource::Synthetic(v) => v.clone(),
                _ => unreachable!(),
            };
            let mut displacements = Vec::new();
            let mut prev = None;
            for t in 0..r.num_frames {
                let frame = video.render_frame(t);
                let c = mask_centroid(&frame, video.background);
                if let Some((py, px)) = prev {
                    let d = ((c.0 - py) as f64).hypot(c.1 - px);
                    displacements.push(d);
                }
                prev = Some(c);
            }
            displacements.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = displacements[displacements.len() / 2];
            assert!(
                (median - 3.0).abs() <= 0.5,
                "median centroid displacement {median} not within 3 +- 0.5"
            );
        }
    }

    #[test]
    fn classes_are_balanced_and_labelled() {
        let manifest = synthetic_manifest(&SyntheticWorldSpec {
            num_videos: 9,
            ..spec(1, (1.0, 2.0))
        })
        .unwrap();
        let mut counts = std::collections::HashMap::new();
        for r in &manifest.records {
            *counts.entry(r.class_label.clone().unwrap()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 3);
        assert!(counts.values().all(|&c| c == 3));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(matches!(
            spec(0, (2.0, 1.0)).validate(),
            Err(DatakitError::InvalidSpec(_))
        ));
        let mut s = spec(0, (1.0, 2.0));
        s.num_shape_classes = 4;
        assert!(s.validate().is_err());
        let s = spec(0, (1.0, 2.0));
        assert!(s.validate_for_sampler(16, 8).is_err()); // 16 frames < 40
        assert!(s.validate_for_sampler(4, 2).is_ok()); // needs 10
    }

    #[test]
    fn shape_stays_inside_frame() {
        let manifest = synthetic_manifest(&spec(23, (3.0, 4.0))).unwrap();
        for r in &manifest.records {
            let video = match &r.frame_source {
                crate::datakit::FrameSource::Synthetic(v) => v,
                _ => unreachable!(),
            };
            for t in 0..r.num_frames {
                let (cy, cx) = video.center_at(t);
                let m = video.shape.max_extent(video.radius);
                assert!(cy >= m - 1e-9 && cy <= r.height as f64 - 1.0 - m + 1e-9);
                assert!(cx >= m - 1e-9 && cx <= r.width as f64 - 1.0 - m + 1e-9);
            }
        }
    }
}
