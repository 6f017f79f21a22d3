//! Clip-triple sampling and augmentation.
//!
//! A triple is built from one video: a contiguous source window of
//! `clip_len + missing_len` frames is split at a uniformly drawn break
//! index into a discontinuous clip (front ++ back) and its missing middle
//! section, and a separate non-overlapping continuous clip is drawn from
//! the same video. Spatial/color augmentation draws one parameter set per
//! clip and applies it to every frame, so the transform itself never
//! introduces temporal discontinuity.

use crate::datakit::{DatakitError, FrameCache, VideoRecord};
use ndarray::{s, Array4, Array5, ArrayView4, Axis};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("video {video_id} has {num_frames} frames, sampling needs {required}")]
    VideoTooShort {
        video_id: String,
        num_frames: usize,
        required: usize,
    },
    #[error("clip {got_h}x{got_w} smaller than crop {crop_h}x{crop_w} after scaling")]
    ClipTooSmall {
        got_h: usize,
        got_w: usize,
        crop_h: usize,
        crop_w: usize,
    },
    #[error("clip_len must be >= 2 so a break index in [1, clip_len-1] exists")]
    DegenerateClipLen,
    #[error(transparent)]
    Datakit(#[from] DatakitError),
}

/// Per-clip augmentation policy. Parameters are drawn once per clip and
/// applied identically to all its frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPolicy {
    pub enabled: bool,
    /// Max relative jitter for (brightness, contrast, saturation, hue);
    /// hue is a shift in turns of the color circle.
    pub color_jitter: (f64, f64, f64, f64),
    /// Uniform resize factor range applied before cropping.
    pub scale_range: (f64, f64),
    pub horizontal_flip_prob: f64,
}

impl Default for AugmentationPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            color_jitter: (0.4, 0.4, 0.4, 0.1),
            scale_range: (1.0, 1.25),
            horizontal_flip_prob: 0.5,
        }
    }
}

impl AugmentationPolicy {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let (b, c, s, h) = self.color_jitter;
        if [b, c, s, h].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err("color_jitter values must be finite and >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.horizontal_flip_prob) {
            return Err("horizontal_flip_prob must be in [0, 1]".into());
        }
        if self.scale_range.0 > self.scale_range.1 || self.scale_range.0 <= 0.0 {
            return Err("scale_range must satisfy 0 < min <= max".into());
        }
        Ok(())
    }
}

/// Fixed per-channel normalization applied after scaling to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizeStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for NormalizeStats {
    fn default() -> Self {
        Self {
            mean: [0.45; 3],
            std: [0.225; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Length of the continuous and discontinuous clips, in frames.
    pub clip_len: usize,
    /// Length of the excised missing section, in frames.
    pub missing_len: usize,
    /// Output (height, width) after cropping.
    pub crop_size: (usize, usize),
    pub augmentation: AugmentationPolicy,
    pub normalize: NormalizeStats,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            clip_len: 16,
            missing_len: 8,
            crop_size: (112, 112),
            augmentation: AugmentationPolicy::default(),
            normalize: NormalizeStats::default(),
            rng_seed: 0,
        }
    }
}

impl SamplerConfig {
    /// Frames a video must have: the initial window plus a non-overlapping
    /// continuous clip.
    pub fn min_video_frames(&self) -> usize {
        2 * self.clip_len + self.missing_len
    }

    pub fn num_localization_classes(&self) -> usize {
        self.clip_len - 1
    }
}

/// One video's supervision unit.
#[derive(Debug, Clone)]
pub struct ClipTriple {
    pub video_id: String,
    /// Continuous clip, `clip_len` frames.
    pub continuous: Array4<u8>,
    /// Discontinuous clip: the initial window with its middle removed.
    pub discontinuous: Array4<u8>,
    /// The removed middle section, `missing_len` frames.
    pub missing: Array4<u8>,
    /// Break index j in `[1, clip_len - 1]`.
    pub break_index: usize,
    /// Classifier target, `j - 1` in `[0, clip_len - 2]`.
    pub localization_class: usize,
    /// Source frame interval `[start, start + clip_len + missing_len)`.
    pub initial_span: (usize, usize),
    /// Source frame interval `[start, start + clip_len)` of the continuous clip.
    pub continuous_span: (usize, usize),
}

/// Frame-index plan for one triple, before any pixels are touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripleIndices {
    pub initial_start: usize,
    pub break_index: usize,
    pub continuous_start: usize,
}

/// Draw the index plan: initial-window start uniform over feasible
/// positions, break index uniform over `[1, clip_len - 1]`, continuous
/// start uniform over starts whose span avoids the initial window
/// (rejection sampling; feasibility is guaranteed by the length check).
pub fn sample_triple_indices(
    num_frames: usize,
    clip_len: usize,
    missing_len: usize,
    rng: &mut impl Rng,
) -> Result<TripleIndices, SamplerError> {
    if clip_len < 2 {
        return Err(SamplerError::DegenerateClipLen);
    }
    let window = clip_len + missing_len;
    let required = 2 * clip_len + missing_len;
    if num_frames < required {
        return Err(SamplerError::VideoTooShort {
            video_id: String::new(),
            num_frames,
            required,
        });
    }
    let initial_start = rng.random_range(0..=num_frames - window);
    let break_index = rng.random_range(1..clip_len);
    let continuous_start = loop {
        let s = rng.random_range(0..=num_frames - clip_len);
        let disjoint = s + clip_len <= initial_start || s >= initial_start + window;
        if disjoint {
            break s;
        }
    };
    Ok(TripleIndices {
        initial_start,
        break_index,
        continuous_start,
    })
}

fn materialize_triple(
    video_id: &str,
    indices: TripleIndices,
    clip_len: usize,
    missing_len: usize,
    read: impl Fn(usize, usize) -> Result<Array4<u8>, DatakitError>,
) -> Result<ClipTriple, SamplerError> {
    let TripleIndices {
        initial_start,
        break_index,
        continuous_start,
    } = indices;
    let window = clip_len + missing_len;
    let initial = read(initial_start, window)?;
    let j = break_index;

    let (h, w) = (initial.dim().1, initial.dim().2);
    let mut discontinuous = Array4::<u8>::zeros((clip_len, h, w, 3));
    discontinuous
        .slice_mut(s![..j, .., .., ..])
        .assign(&initial.slice(s![..j, .., .., ..]));
    discontinuous
        .slice_mut(s![j.., .., .., ..])
        .assign(&initial.slice(s![j + missing_len.., .., .., ..]));
    let missing = initial.slice(s![j..j + missing_len, .., .., ..]).to_owned();
    let continuous = read(continuous_start, clip_len)?;

    Ok(ClipTriple {
        video_id: video_id.to_string(),
        continuous,
        discontinuous,
        missing,
        break_index: j,
        localization_class: j - 1,
        initial_span: (initial_start, initial_start + window),
        continuous_span: (continuous_start, continuous_start + clip_len),
    })
}

/// Sample a triple reading frames through `read_clip`.
pub fn sample_clip_triple(
    record: &VideoRecord,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<ClipTriple, SamplerError> {
    let indices = sample_triple_indices(record.num_frames, cfg.clip_len, cfg.missing_len, rng)
        .map_err(|e| attach_video_id(e, &record.video_id))?;
    materialize_triple(
        &record.video_id,
        indices,
        cfg.clip_len,
        cfg.missing_len,
        |start, len| crate::datakit::read_clip(record, start, len),
    )
}

/// Sample a triple reading frames from a cache.
pub fn sample_clip_triple_cached(
    cache: &FrameCache,
    video_id: &str,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<ClipTriple, SamplerError> {
    let num_frames = cache
        .num_frames(video_id)
        .ok_or_else(|| DatakitError::ManifestParse {
            line: 0,
            reason: format!("video {video_id} not in cache"),
        })?;
    let indices = sample_triple_indices(num_frames, cfg.clip_len, cfg.missing_len, rng)
        .map_err(|e| attach_video_id(e, video_id))?;
    materialize_triple(video_id, indices, cfg.clip_len, cfg.missing_len, |s, l| {
        Ok(cache.clip(video_id, s, l)?.to_owned())
    })
}

fn attach_video_id(e: SamplerError, video_id: &str) -> SamplerError {
    match e {
        SamplerError::VideoTooShort {
            num_frames,
            required,
            ..
        } => SamplerError::VideoTooShort {
            video_id: video_id.to_string(),
            num_frames,
            required,
        },
        other => other,
    }
}

// ── Augmentation ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy)]
struct AugmentParams {
    crop_y: usize,
    crop_x: usize,
    flip: bool,
    brightness: f64,
    contrast: f64,
    saturation: f64,
    hue: f64,
}

/// Crop (and optionally scale/flip/jitter) a clip to `crop_size`.
///
/// With the policy disabled this is exactly a center crop. Otherwise one
/// scale, one crop window, one flip decision, and one color transform are
/// drawn and applied to every frame of the clip.
pub fn augment(
    clip: &ArrayView4<'_, u8>,
    crop_size: (usize, usize),
    policy: &AugmentationPolicy,
    rng: &mut impl Rng,
) -> Result<Array4<u8>, SamplerError> {
    let (t, h, w, _) = clip.dim();
    let (crop_h, crop_w) = crop_size;

    if !policy.enabled {
        if h < crop_h || w < crop_w {
            return Err(SamplerError::ClipTooSmall {
                got_h: h,
                got_w: w,
                crop_h,
                crop_w,
            });
        }
        let y0 = (h - crop_h) / 2;
        let x0 = (w - crop_w) / 2;
        return Ok(clip
            .slice(s![.., y0..y0 + crop_h, x0..x0 + crop_w, ..])
            .to_owned());
    }

    // fixed draw order keeps augmentation reproducible under one seed
    let scale = if policy.scale_range.1 > policy.scale_range.0 {
        rng.random_range(policy.scale_range.0..policy.scale_range.1)
    } else {
        policy.scale_range.0
    };
    let new_h = ((h as f64) * scale).round() as usize;
    let new_w = ((w as f64) * scale).round() as usize;
    if new_h < crop_h || new_w < crop_w {
        return Err(SamplerError::ClipTooSmall {
            got_h: new_h,
            got_w: new_w,
            crop_h,
            crop_w,
        });
    }
    let crop_y = rng.random_range(0..=new_h - crop_h);
    let crop_x = rng.random_range(0..=new_w - crop_w);
    let flip = rng.random_bool(policy.horizontal_flip_prob);
    let (jb, jc, js, jh) = policy.color_jitter;
    let params = AugmentParams {
        crop_y,
        crop_x,
        flip,
        brightness: rng.random_range((1.0 - jb).max(0.0)..=1.0 + jb),
        contrast: rng.random_range((1.0 - jc).max(0.0)..=1.0 + jc),
        saturation: rng.random_range((1.0 - js).max(0.0)..=1.0 + js),
        hue: rng.random_range(-jh..=jh),
    };

    // geometry first (scale, crop, flip), f32 per-pixel
    let mut staged = Array4::<f32>::zeros((t, crop_h, crop_w, 3));
    for ti in 0..t {
        let frame = clip.index_axis(Axis(0), ti);
        let resized = if (new_h, new_w) == (h, w) {
            frame.mapv(|v| v as f32)
        } else {
            bilinear_resize_u8(&frame, new_h, new_w)
        };
        let mut dst = staged.index_axis_mut(Axis(0), ti);
        for y in 0..crop_h {
            for x in 0..crop_w {
                let sx = if params.flip {
                    params.crop_x + (crop_w - 1 - x)
                } else {
                    params.crop_x + x
                };
                for c in 0..3 {
                    dst[(y, x, c)] = resized[(params.crop_y + y, sx, c)];
                }
            }
        }
    }

    // clip-level grey mean so the contrast map is identical on every frame
    let grey_mean = {
        let mut acc = 0.0f64;
        for ti in 0..t {
            let f = staged.index_axis(Axis(0), ti);
            for y in 0..crop_h {
                for x in 0..crop_w {
                    acc += grey(f[(y, x, 0)], f[(y, x, 1)], f[(y, x, 2)]) as f64;
                }
            }
        }
        (acc / (t * crop_h * crop_w) as f64) as f32
    };

    let mut out = Array4::<u8>::zeros((t, crop_h, crop_w, 3));
    let bright = params.brightness as f32;
    let contrast = params.contrast as f32;
    let sat = params.saturation as f32;
    for ti in 0..t {
        let src = staged.index_axis(Axis(0), ti);
        let mut dst = out.index_axis_mut(Axis(0), ti);
        for y in 0..crop_h {
            for x in 0..crop_w {
                let mut rgb = [src[(y, x, 0)], src[(y, x, 1)], src[(y, x, 2)]];
                for v in rgb.iter_mut() {
                    *v *= bright;
                }
                let pivot = grey_mean * bright;
                for v in rgb.iter_mut() {
                    *v = (*v - pivot) * contrast + pivot;
                }
                let g = grey(rgb[0], rgb[1], rgb[2]);
                for v in rgb.iter_mut() {
                    *v = g + (*v - g) * sat;
                }
                if params.hue != 0.0 {
                    rgb = hue_shift(rgb, params.hue as f32);
                }
                for c in 0..3 {
                    dst[(y, x, c)] = rgb[c].round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
    Ok(out)
}

fn grey(r: f32, g: f32, b: f32) -> f32 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Shift hue by `turns` of the color circle via RGB->HSV->RGB.
fn hue_shift(rgb: [f32; 3], turns: f32) -> [f32; 3] {
    let [r, g, b] = rgb.map(|v| (v / 255.0).clamp(0.0, 1.0));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let mut h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    } / 6.0;
    let s = if max == 0.0 { 0.0 } else { delta / max };
    let v = max;
    h = (h + turns).rem_euclid(1.0);
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let u = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match (i as i32).rem_euclid(6) {
        0 => (v, u, p),
        1 => (q, v, p),
        2 => (p, v, u),
        3 => (p, q, v),
        4 => (u, p, v),
        _ => (v, p, q),
    };
    [r * 255.0, g * 255.0, b * 255.0]
}

/// Bilinear resize of one `[H, W, 3]` u8 frame into f32.
pub fn bilinear_resize_u8(
    frame: &ndarray::ArrayView3<'_, u8>,
    new_h: usize,
    new_w: usize,
) -> ndarray::Array3<f32> {
    let (h, w, _) = frame.dim();
    let mut out = ndarray::Array3::<f32>::zeros((new_h, new_w, 3));
    let sy = h as f32 / new_h as f32;
    let sx = w as f32 / new_w as f32;
    for y in 0..new_h {
        let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f32);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let wy = fy - y0 as f32;
        for x in 0..new_w {
            let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f32);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let wx = fx - x0 as f32;
            for c in 0..3 {
                let a = frame[(y0, x0, c)] as f32;
                let b = frame[(y0, x1, c)] as f32;
                let d = frame[(y1, x0, c)] as f32;
                let e = frame[(y1, x1, c)] as f32;
                out[(y, x, c)] = a * (1.0 - wy) * (1.0 - wx)
                    + b * (1.0 - wy) * wx
                    + d * wy * (1.0 - wx)
                    + e * wy * wx;
            }
        }
    }
    out
}

// ── Tensor conversion and batching ──────────────────────────────────────────

/// `[T, H, W, 3]` u8 to channel-first `[3, T, H, W]` f32, scaled to [0, 1]
/// and standardized with the configured per-channel statistics.
pub fn to_tensor(clip: &ArrayView4<'_, u8>, stats: &NormalizeStats) -> Array4<f32> {
    let (t, h, w, _) = clip.dim();
    let mean = stats.mean.map(|v| v as f32);
    let std = stats.std.map(|v| v as f32);
    let mut out = Array4::<f32>::zeros((3, t, h, w));
    for c in 0..3 {
        let m = mean[c];
        let s = std[c];
        let mut dst = out.index_axis_mut(Axis(0), c);
        for ti in 0..t {
            for y in 0..h {
                for x in 0..w {
                    dst[(ti, y, x)] = (clip[(ti, y, x, c)] as f32 / 255.0 - m) / s;
                }
            }
        }
    }
    out
}

/// Invert `to_tensor` back to u8 (rounding to nearest).
pub fn from_tensor(tensor: &Array4<f32>, stats: &NormalizeStats) -> Array4<u8> {
    let (_, t, h, w) = tensor.dim();
    let mean = stats.mean.map(|v| v as f32);
    let std = stats.std.map(|v| v as f32);
    let mut out = Array4::<u8>::zeros((t, h, w, 3));
    for c in 0..3 {
        let src = tensor.index_axis(Axis(0), c);
        for ti in 0..t {
            for y in 0..h {
                for x in 0..w {
                    let v = (src[(ti, y, x)] * std[c] + mean[c]) * 255.0;
                    out[(ti, y, x, c)] = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
    out
}

/// Batched model input. Index i of every tensor comes from the same video.
#[derive(Debug, Clone)]
pub struct TensorBatch {
    /// `[K, 3, clip_len, H, W]`
    pub continuous: Array5<f32>,
    /// `[K, 3, clip_len, H, W]`
    pub discontinuous: Array5<f32>,
    /// `[K, 3, missing_len, H, W]`
    pub missing: Array5<f32>,
    /// Localization classes `j - 1`, one per video.
    pub labels: Vec<usize>,
    pub video_ids: Vec<String>,
}

impl TensorBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Deterministic per-(seed, video, draw) RNG stream, independent of worker
/// scheduling.
pub fn stream_rng(global_seed: u64, video_id: &str, draw: u64) -> ChaCha8Rng {
    let mut state = fnv1a(video_id)
        ^ global_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ draw.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    // splitmix64 finalizer
    state ^= state >> 30;
    state = state.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    state ^= state >> 27;
    state = state.wrapping_mul(0x94D0_49BB_1331_11EB);
    state ^= state >> 31;
    ChaCha8Rng::seed_from_u64(state)
}

fn fnv1a(s: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in s.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}

/// Sample one augmented triple per requested video and stack the results.
///
/// Each video's randomness comes from `stream_rng(cfg.rng_seed, id, draw)`;
/// the three clips of a triple draw independent augmentation parameters.
pub fn build_batch(
    cache: &FrameCache,
    cfg: &SamplerConfig,
    batch_videos: &[String],
    draw: u64,
) -> Result<TensorBatch, SamplerError> {
    let k = batch_videos.len();
    let (crop_h, crop_w) = cfg.crop_size;
    let per_video: Result<Vec<_>, SamplerError> = batch_videos
        .par_iter()
        .map(|id| {
            let mut rng = stream_rng(cfg.rng_seed, id, draw);
            let triple = sample_clip_triple_cached(cache, id, cfg, &mut rng)?;
            let cc = augment(
                &triple.continuous.view(),
                cfg.crop_size,
                &cfg.augmentation,
                &mut rng,
            )?;
            let cd = augment(
                &triple.discontinuous.view(),
                cfg.crop_size,
                &cfg.augmentation,
                &mut rng,
            )?;
            let cm = augment(
                &triple.missing.view(),
                cfg.crop_size,
                &cfg.augmentation,
                &mut rng,
            )?;
            Ok((
                to_tensor(&cc.view(), &cfg.normalize),
                to_tensor(&cd.view(), &cfg.normalize),
                to_tensor(&cm.view(), &cfg.normalize),
                triple.localization_class,
            ))
        })
        .collect();
    let per_video = per_video?;

    let mut continuous = Array5::<f32>::zeros((k, 3, cfg.clip_len, crop_h, crop_w));
    let mut discontinuous = Array5::<f32>::zeros((k, 3, cfg.clip_len, crop_h, crop_w));
    let mut missing = Array5::<f32>::zeros((k, 3, cfg.missing_len, crop_h, crop_w));
    let mut labels = Vec::with_capacity(k);
    for (i, (cc, cd, cm, label)) in per_video.into_iter().enumerate() {
        continuous.index_axis_mut(Axis(0), i).assign(&cc);
        discontinuous.index_axis_mut(Axis(0), i).assign(&cd);
        missing.index_axis_mut(Axis(0), i).assign(&cm);
        labels.push(label);
    }
    Ok(TensorBatch {
        continuous,
        discontinuous,
        missing,
        labels,
        video_ids: batch_videos.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::{synthetic_manifest, SyntheticWorldSpec};
    use ndarray::Array4;

    fn test_manifest(frames: usize, res: usize) -> crate::datakit::CorpusManifest {
        synthetic_manifest(&SyntheticWorldSpec {
            num_videos: 4,
            frames_per_video: frames,
            resolution: (res, res),
            num_shape_classes: 3,
            motion_speed_range: (1.0, 2.0),
            rng_seed: 99,
        })
        .unwrap()
    }

    fn plain_cache(num_frames: usize) -> (crate::datakit::FrameCache, String) {
        let spec = SyntheticWorldSpec {
            num_videos: 1,
            frames_per_video: num_frames,
            resolution: (16, 16),
            num_shape_classes: 1,
            motion_speed_range: (1.0, 1.5),
            rng_seed: 5,
        };
        let manifest = synthetic_manifest(&spec).unwrap();
        (
            crate::datakit::FrameCache::load(&manifest).unwrap(),
            manifest.records[0].video_id.clone(),
        )
    }

    #[test]
    fn forced_break_indices_concatenate_correctly() {
        // clip_len=4, missing_len=2 over a ramp of known frame values
        let make_clip = |frames: &[usize]| {
            let mut a = Array4::<u8>::zeros((frames.len(), 2, 2, 3));
            for (t, &f) in frames.iter().enumerate() {
                a.slice_mut(s![t, .., .., ..]).fill(f as u8);
            }
            a
        };
        let source: Vec<usize> = (0..6).collect(); // initial window = frames 0..=5
        for (j, want_d, want_m) in [
            (1usize, vec![0, 3, 4, 5], vec![1, 2]),
            (3, vec![0, 1, 2, 5], vec![3, 4]),
        ] {
            let triple = materialize_triple(
                "v",
                TripleIndices {
                    initial_start: 0,
                    break_index: j,
                    continuous_start: 6,
                },
                4,
                2,
                |start, len| Ok(make_clip(&source[start..start + len])),
            )
            .unwrap();
            assert_eq!(triple.discontinuous, make_clip(&want_d));
            assert_eq!(triple.missing, make_clip(&want_m));
            assert_eq!(triple.localization_class, j - 1);
        }
    }

    #[test]
    fn too_short_video_is_rejected() {
        let mut rng = stream_rng(0, "v", 0);
        match sample_triple_indices(9, 4, 2, &mut rng) {
            Err(SamplerError::VideoTooShort { required: 10, .. }) => {}
            other => panic!("expected VideoTooShort(required=10), got {other:?}"),
        }
        assert!(sample_triple_indices(10, 4, 2, &mut rng).is_ok());
    }

    #[test]
    fn spans_never_overlap_and_frames_reconstruct() {
        let (cache, id) = plain_cache(24);
        let cfg = SamplerConfig {
            clip_len: 8,
            missing_len: 4,
            crop_size: (16, 16),
            augmentation: AugmentationPolicy::disabled(),
            ..Default::default()
        };
        for draw in 0..200u64 {
            let mut rng = stream_rng(1, &id, draw);
            let t = sample_clip_triple_cached(&cache, &id, &cfg, &mut rng).unwrap();
            let (i0, i1) = t.initial_span;
            let (c0, c1) = t.continuous_span;
            assert!(
                c1 <= i0 || c0 >= i1,
                "spans overlap: {:?} {:?}",
                t.initial_span,
                t.continuous_span
            );
            let initial = cache.clip(&id, i0, i1 - i0).unwrap();
            let j = t.break_index;
            assert_eq!(
                t.discontinuous.slice(s![..j, .., .., ..]),
                initial.slice(s![..j, .., .., ..])
            );
            assert_eq!(
                t.discontinuous.slice(s![j.., .., .., ..]),
                initial.slice(s![j + 4.., .., .., ..])
            );
            assert_eq!(t.missing.view(), initial.slice(s![j..j + 4, .., .., ..]));
        }
    }

    #[test]
    fn break_index_is_uniform_chi_square() {
        let classes = 15usize; // clip_len 16
        let draws = 10_000usize;
        let mut counts = vec![0usize; classes];
        for d in 0..draws {
            let mut rng = stream_rng(42, "u", d as u64);
            let idx = sample_triple_indices(40, 16, 8, &mut rng).unwrap();
            counts[idx.break_index - 1] += 1;
        }
        let expected = draws as f64 / classes as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square critical value, 14 dof, significance 0.01
        assert!(chi2 < 29.141, "chi2 {chi2} exceeds 29.141");
    }

    #[test]
    fn augment_disabled_is_center_crop() {
        let (cache, id) = plain_cache(12);
        let clip = cache.clip(&id, 0, 4).unwrap().to_owned();
        let mut rng = stream_rng(3, &id, 0);
        let out = augment(
            &clip.view(),
            (8, 8),
            &AugmentationPolicy::disabled(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(out, clip.slice(s![.., 4..12, 4..12, ..]).to_owned());
    }

    #[test]
    fn forced_flip_mirrors_every_frame() {
        let manifest = test_manifest(12, 24);
        let cache = crate::datakit::FrameCache::load(&manifest).unwrap();
        let id = &manifest.records[0].video_id;
        let clip = cache.clip(id, 0, 4).unwrap().to_owned();
        let policy = AugmentationPolicy {
            enabled: true,
            color_jitter: (0.0, 0.0, 0.0, 0.0),
            scale_range: (1.0, 1.0),
            horizontal_flip_prob: 1.0,
        };
        let mut rng = stream_rng(9, id, 1);
        let out = augment(&clip.view(), (24, 24), &policy, &mut rng).unwrap();
        for t in 0..4 {
            for y in 0..24 {
                for x in 0..24 {
                    assert_eq!(out[(t, y, x, 0)], clip[(t, y, 23 - x, 0)]);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_augmented_output() {
        let manifest = test_manifest(12, 24);
        let cache = crate::datakit::FrameCache::load(&manifest).unwrap();
        let id = &manifest.records[1].video_id;
        let clip = cache.clip(id, 2, 6).unwrap().to_owned();
        let policy = AugmentationPolicy::default();
        let a = augment(&clip.view(), (16, 16), &policy, &mut stream_rng(7, id, 3)).unwrap();
        let b = augment(&clip.view(), (16, 16), &policy, &mut stream_rng(7, id, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn augmentation_too_small_errors() {
        let (cache, id) = plain_cache(12);
        let clip = cache.clip(&id, 0, 2).unwrap().to_owned();
        let policy = AugmentationPolicy {
            scale_range: (1.0, 1.0),
            ..Default::default()
        };
        let mut rng = stream_rng(0, &id, 0);
        match augment(&clip.view(), (32, 32), &policy, &mut rng) {
            Err(SamplerError::ClipTooSmall { .. }) => {}
            other => panic!("expected ClipTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn to_tensor_affine_endpoints() {
        let stats = NormalizeStats {
            mean: [0.5; 3],
            std: [0.5; 3],
        };
        let zeros = Array4::<u8>::zeros((2, 4, 4, 3));
        let t = to_tensor(&zeros.view(), &stats);
        assert!(t.iter().all(|&v| (v + 1.0).abs() < 1e-6));
        let full = Array4::<u8>::from_elem((2, 4, 4, 3), 255);
        let t = to_tensor(&full.view(), &stats);
        assert!(t.iter().all(|&v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn tensor_inverse_recovers_uint8_within_rounding() {
        let manifest = test_manifest(8, 20);
        let cache = crate::datakit::FrameCache::load(&manifest).unwrap();
        let id = &manifest.records[2].video_id;
        let clip = cache.clip(id, 0, 5).unwrap().to_owned();
        let stats = NormalizeStats::default();
        let round_tripped = from_tensor(&to_tensor(&clip.view(), &stats), &stats);
        assert_eq!(round_tripped, clip);
    }

    #[test]
    fn batch_shapes_and_label_ranges() {
        let manifest = test_manifest(40, 48);
        let cache = crate::datakit::FrameCache::load(&manifest).unwrap();
        let cfg = SamplerConfig {
            crop_size: (40, 40),
            ..Default::default()
        };
        let ids = manifest.video_ids();
        let batch = build_batch(&cache, &cfg, &ids, 0).unwrap();
        assert_eq!(batch.continuous.dim(), (4, 3, 16, 40, 40));
        assert_eq!(batch.discontinuous.dim(), (4, 3, 16, 40, 40));
        assert_eq!(batch.missing.dim(), (4, 3, 8, 40, 40));
        assert_eq!(batch.labels.len(), 4);
        assert!(batch.labels.iter().all(|&l| l < 15));
        assert_eq!(batch.video_ids, ids);
    }

    #[test]
    fn disabled_augmentation_batch_matches_raw_slices() {
        let (cache, id) = plain_cache(16);
        let cfg = SamplerConfig {
            clip_len: 4,
            missing_len: 2,
            crop_size: (16, 16),
            augmentation: AugmentationPolicy::disabled(),
            rng_seed: 12,
            ..Default::default()
        };
        let batch = build_batch(&cache, &cfg, std::slice::from_ref(&id), 7).unwrap();
        // rebuild the triple from the same stream and compare tensors
        let mut rng = stream_rng(cfg.rng_seed, &id, 7);
        let triple = sample_clip_triple_cached(&cache, &id, &cfg, &mut rng).unwrap();
        let want = to_tensor(&triple.discontinuous.view(), &cfg.normalize);
        let got = batch.discontinuous.index_axis(Axis(0), 0).to_owned();
        assert_eq!(got, want);
    }

    #[test]
    fn build_batch_is_order_independent_per_video() {
        let manifest = test_manifest(40, 48);
        let cache = crate::datakit::FrameCache::load(&manifest).unwrap();
        let cfg = SamplerConfig {
            crop_size: (32, 32),
            rng_seed: 5,
            ..Default::default()
        };
        let ids = manifest.video_ids();
        let fwd = build_batch(&cache, &cfg, &ids, 3).unwrap();
        let mut rev_ids = ids.clone();
        rev_ids.reverse();
        let rev = build_batch(&cache, &cfg, &rev_ids, 3).unwrap();
        let k = ids.len();
        for i in 0..k {
            assert_eq!(
                fwd.discontinuous.index_axis(Axis(0), i),
                rev.discontinuous.index_axis(Axis(0), k - 1 - i)
            );
            assert_eq!(fwd.labels[i], rev.labels[k - 1 - i]);
        }
    }
}
