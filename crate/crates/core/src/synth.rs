//! Synthetic labelled clips: procedural soft-edged "portraits" composited over
//! a background that drifts under per-frame affine transforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::types::{sample_bilinear, AlphaMatte, Frame, Resolution, VideoSequence};

/// Per-frame affine motion of the background view. Each frame adds the drift
/// plus a uniform draw in `[-jitter, jitter]` to the previous frame's
/// parameters; frame 1 is always the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    pub drift_translation: [f64; 2],
    pub drift_rotation: f64,
    pub drift_scale: f64,
    pub jitter_translation: f64,
    pub jitter_rotation: f64,
    pub jitter_scale: f64,
}

impl MotionConfig {
    pub fn still() -> Self {
        Self {
            drift_translation: [0.0, 0.0],
            drift_rotation: 0.0,
            drift_scale: 0.0,
            jitter_translation: 0.0,
            jitter_rotation: 0.0,
            jitter_scale: 0.0,
        }
    }
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            drift_translation: [0.5, 0.25],
            jitter_translation: 0.5,
            jitter_rotation: 0.002,
            jitter_scale: 0.002,
            ..Self::still()
        }
    }
}

/// One rigid piece of the foreground: a disc (`half_length == 0`) or a
/// capsule around a segment, placed relative to the foreground's center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub offset: [f64; 2],
    pub radius: f64,
    pub half_length: f64,
    /// Segment direction in radians.
    pub angle: f64,
}

impl Primitive {
    pub fn disc(radius: f64) -> Self {
        Self {
            offset: [0.0, 0.0],
            radius,
            half_length: 0.0,
            angle: 0.0,
        }
    }

    fn segment(&self, center: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        let c = [center[0] + self.offset[0], center[1] + self.offset[1]];
        let (s, k) = self.angle.sin_cos();
        let d = [k * self.half_length, s * self.half_length];
        ([c[0] - d[0], c[1] - d[1]], [c[0] + d[0], c[1] + d[1]])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForegroundConfig {
    pub primitives: Vec<Primitive>,
    /// Half-width of the alpha ramp around each primitive's outline.
    pub feather: f64,
    pub color: [f64; 3],
    /// Center at frame 1, in pixel-center coordinates.
    pub start: [f64; 2],
    /// Center displacement per frame.
    pub velocity: [f64; 2],
}

impl Default for ForegroundConfig {
    fn default() -> Self {
        // A head over a shoulder capsule, entering from the left.
        Self {
            primitives: vec![
                Primitive::disc(18.0),
                Primitive {
                    offset: [0.0, 34.0],
                    radius: 14.0,
                    half_length: 16.0,
                    angle: 0.0,
                },
            ],
            feather: 2.0,
            color: [0.9, 0.7, 0.55],
            start: [-40.0, 60.0],
            velocity: [14.0, 0.0],
        }
    }
}

/// Low-frequency procedural background: a per-channel sinusoid whose
/// orientation and phase come from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundConfig {
    pub mean: [f64; 3],
    pub amplitude: f64,
    pub period: f64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self {
            mean: [0.25, 0.35, 0.45],
            amplitude: 0.1,
            period: 96.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub clip_length: usize,
    pub seed: u64,
    /// Extra border of the base background image on each side.
    pub margin: usize,
    /// Number of backgrounds each foreground is composited over.
    pub fanout: usize,
    pub motion: MotionConfig,
    pub foreground: ForegroundConfig,
    pub background: BackgroundConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            clip_length: 10,
            seed: 0,
            margin: 16,
            fanout: 1,
            motion: MotionConfig::default(),
            foreground: ForegroundConfig::default(),
            background: BackgroundConfig::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::SynthConfig(msg));
        if self.clip_length == 0 {
            return bad("clip_length must be at least 1".into());
        }
        if self.width < 4 || self.height < 4 {
            return bad(format!("frame size {}x{} below 4x4", self.width, self.height));
        }
        if self.fanout == 0 {
            return bad("fanout must be at least 1".into());
        }
        let fg = &self.foreground;
        if !(fg.feather >= 0.0) || fg.primitives.iter().any(|p| !(p.radius >= 0.0 && p.half_length >= 0.0)) {
            return bad("radii, half lengths and feather must be non-negative".into());
        }
        if fg.color.iter().chain(&self.background.mean).any(|c| !(0.0..=1.0).contains(c)) {
            return bad("colors must lie in [0, 1]".into());
        }
        let m = &self.motion;
        if [m.jitter_translation, m.jitter_rotation, m.jitter_scale].iter().any(|j| !(*j >= 0.0)) {
            return bad("jitter ranges must be non-negative".into());
        }
        if !(self.background.period > 0.0) {
            return bad("background period must be positive".into());
        }
        Ok(())
    }
}

/// Affine view parameters of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub translation: [f64; 2],
    pub rotation: f64,
    pub scale: f64,
}

impl AffineParams {
    pub const IDENTITY: Self = Self {
        translation: [0.0, 0.0],
        rotation: 0.0,
        scale: 1.0,
    };
}

/// Affine parameters for frames `1..=clip_length`.
pub fn affine_schedule(config: &SynthConfig) -> Vec<AffineParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6d6f_7469_6f6e);
    let m = &config.motion;
    let mut draw = |range: f64| {
        if range > 0.0 {
            rng.gen_range(-range..=range)
        } else {
            0.0
        }
    };
    let mut p = AffineParams::IDENTITY;
    let mut out = vec![p];
    for _ in 1..config.clip_length {
        p.translation[0] += m.drift_translation[0] + draw(m.jitter_translation);
        p.translation[1] += m.drift_translation[1] + draw(m.jitter_translation);
        p.rotation += m.drift_rotation + draw(m.jitter_rotation);
        p.scale += m.drift_scale + draw(m.jitter_scale);
        out.push(p);
    }
    out
}

/// Procedural base image of size `(width + 2 margin, height + 2 margin)`.
pub fn procedural_base(config: &SynthConfig) -> Result<Frame> {
    let w = config.width + 2 * config.margin;
    let h = config.height + 2 * config.margin;
    let bg = &config.background;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let orient: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            (orient.cos(), orient.sin(), phase)
        })
        .collect();
    let k = std::f64::consts::TAU / bg.period;
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            for (c, &(cx, cy, phase)) in waves.iter().enumerate() {
                let v = bg.mean[c] + bg.amplitude * (k * (x as f64 * cx + y as f64 * cy) + phase).sin();
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    Frame::new(0, w, h, data)
}

/// Renders each frame as a bilinear view of `base` under the frame's affine
/// transform about the output center. Frame 1 is the centered crop.
pub fn gen_dynamic_background(base: &Frame, config: &SynthConfig) -> Result<Vec<Frame>> {
    config.validate()?;
    let (w, h) = (config.width, config.height);
    let (bw, bh) = base.dims();
    if bw < w || bh < h {
        return Err(Error::SynthConfig(format!(
            "base {bw}x{bh} smaller than output {w}x{h}"
        )));
    }
    let origin = [((bw - w) / 2) as f64, ((bh - h) / 2) as f64];
    let center = [(w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0];

    let schedule = affine_schedule(config);
    let mut frames = Vec::with_capacity(schedule.len());
    for (t, p) in schedule.iter().enumerate() {
        let identity_linear = p.rotation == 0.0 && p.scale == 1.0;
        let (sin, cos) = p.rotation.sin_cos();
        let map = |x: f64, y: f64| -> (f64, f64) {
            if identity_linear {
                return (origin[0] + x + p.translation[0], origin[1] + y + p.translation[1]);
            }
            let (dx, dy) = (x - center[0], y - center[1]);
            (
                origin[0] + center[0] + p.scale * (cos * dx - sin * dy) + p.translation[0],
                origin[1] + center[1] + p.scale * (sin * dx + cos * dy) + p.translation[1],
            )
        };
        for (cx, cy) in [(0.0, 0.0), ((w - 1) as f64, 0.0), (0.0, (h - 1) as f64), ((w - 1) as f64, (h - 1) as f64)] {
            let (sx, sy) = map(cx, cy);
            if !(sx >= 0.0 && sy >= 0.0 && sx <= (bw - 1) as f64 && sy <= (bh - 1) as f64) {
                return Err(Error::SynthConfig(format!(
                    "frame {} samples ({sx:.2}, {sy:.2}) outside the {bw}x{bh} base; \
                     raise the margin or shrink the motion ranges",
                    t + 1
                )));
            }
        }
        let mut data = vec![0.0; w * h * 3];
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = map(x as f64, y as f64);
                sample_bilinear(base.data(), bw, bh, 3, sx, sy, &mut data[(y * w + x) * 3..][..3]);
            }
        }
        frames.push(Frame::new(t + 1, w, h, data)?);
    }
    Ok(frames)
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

fn ramp(signed: f64, feather: f64) -> f64 {
    if feather > 0.0 {
        ((feather - signed) / (2.0 * feather)).clamp(0.0, 1.0)
    } else if signed < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Foreground center at frame `t` (1-based).
pub fn foreground_center(config: &ForegroundConfig, t: usize) -> [f64; 2] {
    let k = (t - 1) as f64;
    [config.start[0] + config.velocity[0] * k, config.start[1] + config.velocity[1] * k]
}

/// Alpha of the foreground centered at `center`, sampled at pixel centers.
pub fn render_alpha(config: &ForegroundConfig, center: [f64; 2], width: usize, height: usize) -> Result<AlphaMatte> {
    let segments: Vec<_> = config.primitives.iter().map(|p| (p.segment(center), p.radius)).collect();
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let p = [x as f64, y as f64];
            let a = segments
                .iter()
                .map(|&((a, b), r)| ramp(point_segment_distance(p, a, b) - r, config.feather))
                .fold(0.0, f64::max);
            values.push(a);
        }
    }
    AlphaMatte::new(width, height, values, Resolution::Full)
}

/// Foreground color frames and alpha mattes for every frame of the clip.
pub fn gen_foreground(config: &SynthConfig) -> Result<Vec<(Frame, AlphaMatte)>> {
    config.validate()?;
    let fg = &config.foreground;
    (1..=config.clip_length)
        .map(|t| {
            let alpha = render_alpha(fg, foreground_center(fg, t), config.width, config.height)?;
            let color = Frame::filled(t, config.width, config.height, fg.color)?;
            Ok((color, alpha))
        })
        .collect()
}

/// `alpha * fg + (1 - alpha) * bg` per pixel and channel.
pub fn composite(fg: &Frame, alpha: &AlphaMatte, bg: &Frame) -> Result<Frame> {
    check_dims("composite (background)", fg.dims(), bg.dims())?;
    check_dims("composite (alpha)", fg.dims(), alpha.dims())?;
    let data = fg
        .data()
        .chunks_exact(3)
        .zip(bg.data().chunks_exact(3))
        .zip(alpha.values())
        .flat_map(|((f, b), &a)| {
            let mix = |c: usize| (a * f[c] + (1.0 - a) * b[c]).clamp(0.0, 1.0);
            [mix(0), mix(1), mix(2)]
        })
        .collect();
    Frame::new(bg.index(), fg.width(), fg.height(), data)
}

#[derive(Debug, Clone)]
pub struct SynthClip {
    pub config: SynthConfig,
    /// Frames with alpha, background and foreground ground truth attached.
    pub sequence: VideoSequence,
}

/// Composites the procedural foreground over a dynamic background built from
/// `base`.
pub fn build_clip_from_base(config: &SynthConfig, base: &Frame) -> Result<SynthClip> {
    let backgrounds = gen_dynamic_background(base, config)?;
    let foregrounds = gen_foreground(config)?;
    let mut frames = Vec::with_capacity(config.clip_length);
    let mut alphas = Vec::with_capacity(config.clip_length);
    let mut fgs = Vec::with_capacity(config.clip_length);
    for ((fg, alpha), bg) in foregrounds.into_iter().zip(&backgrounds) {
        frames.push(composite(&fg, &alpha, bg)?);
        alphas.push(alpha);
        fgs.push(fg);
    }
    let sequence = VideoSequence::new(frames)?.with_ground_truth(alphas, backgrounds, fgs)?;
    Ok(SynthClip {
        config: config.clone(),
        sequence,
    })
}

/// Builds one clip over the procedural background.
pub fn build_clip(config: &SynthConfig) -> Result<SynthClip> {
    config.validate()?;
    build_clip_from_base(config, &procedural_base(config)?)
}

/// `fanout` clips sharing the foreground, with seeds `seed, seed + 1, ...`.
pub fn build_dataset(config: &SynthConfig) -> Result<Vec<SynthClip>> {
    config.validate()?;
    (0..config.fanout as u64)
        .map(|i| {
            let mut c = config.clone();
            c.seed = config.seed.wrapping_add(i);
            c.fanout = 1;
            build_clip(&c)
        })
        .collect()
}

fn segment_rect_distance(a: [f64; 2], b: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> f64 {
    let inside = |p: [f64; 2]| p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1];
    if inside(a) || inside(b) {
        return 0.0;
    }
    let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let cross = |o: [f64; 2], p: [f64; 2], q: [f64; 2]| (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0]);
    for i in 0..4 {
        let (c, d) = (corners[i], corners[(i + 1) % 4]);
        let d1 = cross(a, b, c);
        let d2 = cross(a, b, d);
        let d3 = cross(c, d, a);
        let d4 = cross(c, d, b);
        if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
            return 0.0;
        }
    }
    let point_rect = |p: [f64; 2]| {
        let dx = (lo[0] - p[0]).max(0.0).max(p[0] - hi[0]);
        let dy = (lo[1] - p[1]).max(0.0).max(p[1] - hi[1]);
        (dx * dx + dy * dy).sqrt()
    };
    let mut best = point_rect(a).min(point_rect(b));
    for c in corners {
        best = best.min(point_segment_distance(c, a, b));
    }
    for i in 0..4 {
        best = best.min(point_segment_distance(a, corners[i], corners[(i + 1) % 4]));
        best = best.min(point_segment_distance(b, corners[i], corners[(i + 1) % 4]));
    }
    best
}

/// Closed-form coverage: for each `block x block` cell, whether some frame
/// leaves every pixel center of the cell strictly outside the foreground's
/// support (alpha exactly 0). Computed from primitive geometry only.
pub fn clear_block_union(config: &SynthConfig, block: usize) -> Vec<bool> {
    let (bw, bh) = (config.width / block, config.height / block);
    let fg = &config.foreground;
    let mut union = vec![false; bw * bh];
    for t in 1..=config.clip_length {
        let center = foreground_center(fg, t);
        for by in 0..bh {
            for bx in 0..bw {
                let lo = [(bx * block) as f64, (by * block) as f64];
                let hi = [lo[0] + (block - 1) as f64, lo[1] + (block - 1) as f64];
                let clear = fg.primitives.iter().all(|p| {
                    let (a, b) = p.segment(center);
                    let reach = p.radius + fg.feather;
                    let d = segment_rect_distance(a, b, lo, hi);
                    if fg.feather > 0.0 {
                        d >= reach
                    } else {
                        d >= p.radius
                    }
                });
                union[by * bw + bx] |= clear;
            }
        }
    }
    union
}

/// Closed-form per-pixel union over frames of `alpha < 0.5`.
pub fn visible_union(config: &SynthConfig) -> Vec<bool> {
    let fg = &config.foreground;
    let mut union = vec![false; config.width * config.height];
    for t in 1..=config.clip_length {
        let center = foreground_center(fg, t);
        for y in 0..config.height {
            for x in 0..config.width {
                let p = [x as f64, y as f64];
                let visible = fg.primitives.iter().all(|prim| {
                    let (a, b) = prim.segment(center);
                    let d = point_segment_distance(p, a, b);
                    if fg.feather > 0.0 {
                        d > prim.radius
                    } else {
                        d >= prim.radius
                    }
                });
                union[y * config.width + x] |= visible;
            }
        }
    }
    union
}
