//! Per-frame matting: semantic estimation against the restored background,
//! known-background detail solve inside a transition band, and fusion.
//!
//! The three stages sit behind [`Predictor`] so learned models can replace
//! the classical reference implementation without touching the frame loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brm::{extract_bg_info, BackgroundState, BrmUpdateTrace};
use crate::error::{check_dims, Error, Result};
use crate::morphology;
use crate::types::{
    downsample4x, quarter_dims, upsample_rgb, upsample_semantic, AlphaMatte, Frame, Resolution,
    SemanticMap,
};

/// Binary mask of pixels handed to the detail solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionBand {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
}

impl TransitionBand {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![true; width * height],
        }
    }

    /// Pixels whose guide value lies strictly inside `(lo, hi)`, dilated by a
    /// `(2r+1)`-square.
    pub fn from_guide(guide: &AlphaMatte, lo: f64, hi: f64, radius: usize) -> Self {
        let seed: Vec<bool> = guide.values().iter().map(|&a| a > lo && a < hi).collect();
        Self {
            width: guide.width(),
            height: guide.height(),
            mask: morphology::dilate(&seed, guide.width(), guide.height(), radius),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Restored background brought to frame resolution, with the pixels whose
/// bilinear support is entirely restored.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundPrior {
    pub image: Frame,
    pub restored: Vec<bool>,
}

impl BackgroundPrior {
    pub fn from_state(state: &BackgroundState, width: usize, height: usize) -> Result<Self> {
        let image = upsample_rgb(&state.content_field(), 0, width, height)?;
        let mask: Vec<f64> = state.mask().iter().map(|&m| m as f64).collect();
        let coverage = crate::types::bilinear_resize(&mask, state.width(), state.height(), 1, width, height);
        let restored = coverage.iter().map(|&c| c >= 1.0 - 1e-9).collect();
        Ok(Self { image, restored })
    }

    /// A fully known background, e.g. ground truth.
    pub fn known(image: Frame) -> Self {
        let restored = vec![true; image.width() * image.height()];
        Self { image, restored }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetailParams {
    /// Floor on `|F - B|^2` in the projection.
    pub delta: f64,
    /// Guide value at or above which a pixel supplies a foreground color.
    pub confident: f64,
    /// Erosion applied to the confident set before sampling colors, so that
    /// samples come from the interior rather than from mixed edge pixels.
    pub confident_erode: usize,
}

impl Default for DetailParams {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            confident: 0.95,
            confident_erode: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetailMatte {
    pub matte: AlphaMatte,
    /// No pixel reached the confidence level; band pixels kept the guide value.
    pub no_confident_foreground: bool,
    /// Band pixels where `|F - B|^2 < delta`.
    pub degenerate: usize,
    /// Band pixels whose background is not restored; they kept the guide value.
    pub unrestored: usize,
}

/// Inclusive-exclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && y >= self.y && x < self.x + self.width && y < self.y + self.height
    }

    /// Grows the rectangle by `margin` on each side, clipped to the image.
    pub fn expand(&self, margin: usize, width: usize, height: usize) -> Rect {
        let x0 = self.x.saturating_sub(margin);
        let y0 = self.y.saturating_sub(margin);
        let x1 = (self.x + self.width + margin).min(width);
        let y1 = (self.y + self.height + margin).min(height);
        Rect {
            x: x0,
            y: y0,
            width: x1 - x0,
            height: y1 - y0,
        }
    }
}

const NO_ROW: u32 = u32::MAX;

/// Lookup structure for nearest-confident-pixel queries: for every pixel, the
/// closest confident row at or above it and at or below it in its column.
pub(crate) struct ConfidentIndex {
    width: usize,
    up: Vec<u32>,
    down: Vec<u32>,
}

impl ConfidentIndex {
    pub(crate) fn new(mask: &[bool], width: usize, height: usize) -> Self {
        let mut up = vec![NO_ROW; width * height];
        let mut down = vec![NO_ROW; width * height];
        for x in 0..width {
            let mut last = NO_ROW;
            for y in 0..height {
                if mask[y * width + x] {
                    last = y as u32;
                }
                up[y * width + x] = last;
            }
            last = NO_ROW;
            for y in (0..height).rev() {
                if mask[y * width + x] {
                    last = y as u32;
                }
                down[y * width + x] = last;
            }
        }
        Self { width, up, down }
    }

    // Nearest confident row to `y` in column `x`, restricted to rows
    // `lo..=hi`; the upper one wins a tie.
    fn column_nearest(&self, x: usize, y: usize, lo: usize, hi: usize) -> Option<usize> {
        let yc = y.clamp(lo, hi);
        let a = self.up[yc * self.width + x];
        let b = self.down[yc * self.width + x];
        let above = (a != NO_ROW && a as usize >= lo).then_some(a as usize);
        let below = (b != NO_ROW && b as usize <= hi).then_some(b as usize);
        match (above, below) {
            (Some(a), Some(b)) => Some(if y.abs_diff(a) <= y.abs_diff(b) { a } else { b }),
            (a, b) => a.or(b),
        }
    }

    pub(crate) fn any_in(&self, region: Rect) -> bool {
        let hi = region.y + region.height - 1;
        (region.x..region.x + region.width).any(|x| self.column_nearest(x, region.y, region.y, hi).is_some())
    }

    /// Nearest confident pixel inside `region` by Euclidean distance, ties
    /// going to the lowest row-major index. Columns are visited outward from
    /// `x` until the horizontal offset alone exceeds the best distance.
    pub(crate) fn nearest(&self, region: Rect, x: usize, y: usize) -> Option<(usize, usize)> {
        let (x_lo, x_hi) = (region.x, region.x + region.width - 1);
        let (y_lo, y_hi) = (region.y, region.y + region.height - 1);
        let mut best: Option<(usize, usize)> = None;
        for dx in 0.. {
            if best.is_some_and(|(d2, _)| dx * dx > d2) {
                break;
            }
            let left = x.checked_sub(dx);
            let right = x + dx;
            let left_in = left.is_some_and(|l| l >= x_lo && l <= x_hi);
            let right_in = dx > 0 && right >= x_lo && right <= x_hi;
            if !left_in && !right_in && left.map_or(true, |l| l < x_lo) && right > x_hi {
                break;
            }
            for (inside, col) in [(left_in, left.unwrap_or(0)), (right_in, right)] {
                if !inside {
                    continue;
                }
                if let Some(row) = self.column_nearest(col, y, y_lo, y_hi) {
                    let d2 = dx * dx + y.abs_diff(row).pow(2);
                    let idx = row * self.width + col;
                    if best.map_or(true, |(bd, bi)| (d2, idx) < (bd, bi)) {
                        best = Some((d2, idx));
                    }
                }
            }
        }
        best.map(|(_, idx)| (idx % self.width, idx / self.width))
    }
}

/// Projects `I - B` onto `F - B`: `clamp(dot / max(|F - B|^2, delta), 0, 1)`.
/// The boolean reports whether the delta floor was hit.
pub fn project_alpha(image: [f64; 3], fg: [f64; 3], bg: [f64; 3], delta: f64) -> (f64, bool) {
    let mut dot = 0.0;
    let mut norm2 = 0.0;
    for c in 0..3 {
        let fb = fg[c] - bg[c];
        dot += (image[c] - bg[c]) * fb;
        norm2 += fb * fb;
    }
    let degenerate = norm2 < delta;
    ((dot / norm2.max(delta)).clamp(0.0, 1.0), degenerate)
}

/// Pixels at or above `params.confident`, eroded by `params.confident_erode`.
/// Falls back to the plain threshold when erosion leaves nothing.
pub(crate) fn confident_mask(guide: &AlphaMatte, params: DetailParams) -> Vec<bool> {
    let raw: Vec<bool> = guide.values().iter().map(|&a| a >= params.confident).collect();
    let eroded = morphology::erode(&raw, guide.width(), guide.height(), params.confident_erode);
    if eroded.iter().any(|&b| b) {
        eroded
    } else {
        raw
    }
}

#[derive(Default)]
struct SolveCounts {
    degenerate: usize,
    unrestored: usize,
}

/// Solves alpha for the band pixels inside `target`, searching foreground
/// colors in `search`. Returns row-major values for `target`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn solve_region(
    frame: &Frame,
    band: &[bool],
    guide: &AlphaMatte,
    confident: &ConfidentIndex,
    prior: &BackgroundPrior,
    params: DetailParams,
    target: Rect,
    search: Rect,
) -> (Vec<f64>, usize, usize, bool) {
    let width = frame.width();
    let any_confident = confident.any_in(search);

    let rows: Vec<(Vec<f64>, SolveCounts)> = (target.y..target.y + target.height)
        .into_par_iter()
        .map(|y| {
            let mut counts = SolveCounts::default();
            let row = (target.x..target.x + target.width)
                .map(|x| {
                    let i = y * width + x;
                    let g = guide.values()[i];
                    if !band[i] {
                        return if g >= 0.5 { 1.0 } else { 0.0 };
                    }
                    if !any_confident {
                        return g;
                    }
                    if !prior.restored[i] {
                        counts.unrestored += 1;
                        return g;
                    }
                    let (fx, fy) = confident.nearest(search, x, y)
                        .expect("search region holds a confident pixel");
                    let (a, degenerate) = project_alpha(
                        frame.pixel(x, y),
                        frame.pixel(fx, fy),
                        prior.image.pixel(x, y),
                        params.delta,
                    );
                    counts.degenerate += degenerate as usize;
                    a
                })
                .collect();
            (row, counts)
        })
        .collect();

    let mut values = Vec::with_capacity(target.area());
    let (mut degenerate, mut unrestored) = (0, 0);
    for (row, counts) in rows {
        values.extend(row);
        degenerate += counts.degenerate;
        unrestored += counts.unrestored;
    }
    (values, degenerate, unrestored, !any_confident)
}

/// Known-background alpha solve over the whole frame.
///
/// Inside the band, the foreground color is taken from the nearest pixel whose
/// guide value is confident and alpha follows from projecting onto `F - B`.
/// Outside the band the guide is hard-thresholded at 0.5.
pub fn detail_solve(
    frame: &Frame,
    band: &TransitionBand,
    guide: &AlphaMatte,
    prior: &BackgroundPrior,
    params: DetailParams,
) -> Result<DetailMatte> {
    check_dims("detail solve (band)", frame.dims(), band.dims())?;
    check_dims("detail solve (guide)", frame.dims(), guide.dims())?;
    check_dims("detail solve (background)", frame.dims(), prior.dims())?;
    let whole = Rect {
        x: 0,
        y: 0,
        width: frame.width(),
        height: frame.height(),
    };
    let confident = ConfidentIndex::new(&confident_mask(guide, params), frame.width(), frame.height());
    let (values, degenerate, unrestored, no_confident) =
        solve_region(frame, &band.mask, guide, &confident, prior, params, whole, whole);
    Ok(DetailMatte {
        matte: AlphaMatte::new(frame.width(), frame.height(), values, Resolution::Full)?,
        no_confident_foreground: no_confident,
        degenerate,
        unrestored,
    })
}

/// Detail inside the band, thresholded upsampled semantic outside.
pub fn fuse(semantic: &SemanticMap, detail: &AlphaMatte, band: &TransitionBand) -> Result<AlphaMatte> {
    check_dims("fusion (band)", detail.dims(), band.dims())?;
    let (w, h) = detail.dims();
    let up = upsample_semantic(semantic, w, h)?;
    let values = up
        .values()
        .iter()
        .zip(detail.values())
        .zip(&band.mask)
        .map(|((&s, &d), &inside)| {
            if inside {
                d
            } else if s >= 0.5 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    AlphaMatte::new(w, h, values, Resolution::Full)
}

/// What the semantic stage may look at besides the current frame.
#[derive(Debug, Clone, Copy)]
pub struct SemanticContext<'a> {
    /// Background restored up to the previous frame.
    pub prior: &'a BackgroundState,
    pub previous_semantic: Option<&'a SemanticMap>,
    /// Quarter-resolution first frame of the stream.
    pub reference: Option<&'a Frame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detail {
    pub matte: DetailMatte,
    pub band: TransitionBand,
}

/// The three swappable stages. Implementations must be pure in their inputs.
pub trait Predictor: Send + Sync {
    fn name(&self) -> &str;

    fn semantic(&self, frame_4x: &Frame, ctx: &SemanticContext<'_>) -> Result<SemanticMap>;

    fn detail(
        &self,
        frame: &Frame,
        semantic: &SemanticMap,
        state: &BackgroundState,
        prior: &BackgroundPrior,
    ) -> Result<Detail>;

    fn fuse(&self, semantic: &SemanticMap, detail: &AlphaMatte, band: &TransitionBand) -> Result<AlphaMatte>;

    /// The map handed to background restoration. Defaults to the semantic
    /// estimate itself.
    fn restoration_semantic(&self, semantic: &SemanticMap) -> Result<SemanticMap> {
        Ok(semantic.clone())
    }
}

/// How the classical estimator scores pixels that have no restored background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bootstrap {
    /// Compare against the stream's first frame, treating it as a clean plate.
    FirstFrame,
    /// Reuse the previous frame's probability, or the initial value on frame 1.
    None,
}

impl Bootstrap {
    pub fn as_str(&self) -> &'static str {
        match self {
            Bootstrap::FirstFrame => "first-frame",
            Bootstrap::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "first-frame" => Some(Bootstrap::FirstFrame),
            "none" => Some(Bootstrap::None),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalParams {
    pub theta: f64,
    pub sigma: f64,
    pub initial: f64,
    pub bootstrap: Bootstrap,
    /// Threshold the map handed to restoration at 0.5.
    pub restore_hard: bool,
    /// Foreground growth, in quarter pixels, of the map handed to restoration.
    pub guard: usize,
    pub band_lo: f64,
    pub band_hi: f64,
    pub band_radius: usize,
    pub detail: DetailParams,
}

impl Default for ClassicalParams {
    fn default() -> Self {
        Self {
            theta: 0.1,
            sigma: 0.02,
            initial: 0.5,
            bootstrap: Bootstrap::FirstFrame,
            restore_hard: true,
            guard: 1,
            band_lo: 0.05,
            band_hi: 0.95,
            band_radius: 2,
            detail: DetailParams::default(),
        }
    }
}

/// Background-difference semantic estimator plus known-background detail
/// solve.
#[derive(Debug, Clone, Default)]
pub struct ClassicalPredictor {
    pub params: ClassicalParams,
}

impl ClassicalPredictor {
    pub fn new(params: ClassicalParams) -> Self {
        Self { params }
    }

    fn score(&self, distance: f64) -> f64 {
        logistic((distance - self.params.theta) / self.params.sigma)
    }
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    ((a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()) / 3.0
}

impl Predictor for ClassicalPredictor {
    fn name(&self) -> &str {
        "classical"
    }

    fn semantic(&self, frame_4x: &Frame, ctx: &SemanticContext<'_>) -> Result<SemanticMap> {
        let prior = ctx.prior;
        check_dims("semantic estimate", prior.dims(), frame_4x.dims())?;
        if let Some(prev) = ctx.previous_semantic {
            check_dims("semantic estimate (previous)", prior.dims(), prev.dims())?;
        }
        if let Some(reference) = ctx.reference {
            check_dims("semantic estimate (reference)", prior.dims(), reference.dims())?;
        }
        let values = frame_4x
            .data()
            .chunks_exact(3)
            .zip(prior.content().chunks_exact(3))
            .zip(prior.mask())
            .enumerate()
            .map(|(i, ((px, bg), &m))| {
                if m == 1 {
                    return self.score(mean_abs_diff(px, bg));
                }
                match (self.params.bootstrap, ctx.reference) {
                    (Bootstrap::FirstFrame, Some(reference)) => {
                        self.score(mean_abs_diff(px, &reference.data()[i * 3..i * 3 + 3]))
                    }
                    _ => ctx
                        .previous_semantic
                        .map_or(self.params.initial, |prev| prev.values()[i]),
                }
            })
            .collect();
        SemanticMap::new(frame_4x.width(), frame_4x.height(), values)
    }

    fn detail(
        &self,
        frame: &Frame,
        semantic: &SemanticMap,
        _state: &BackgroundState,
        prior: &BackgroundPrior,
    ) -> Result<Detail> {
        let guide = upsample_semantic(semantic, frame.width(), frame.height())?;
        let p = &self.params;
        let band = TransitionBand::from_guide(&guide, p.band_lo, p.band_hi, p.band_radius);
        let matte = detail_solve(frame, &band, &guide, prior, p.detail)?;
        Ok(Detail { matte, band })
    }

    fn fuse(&self, semantic: &SemanticMap, detail: &AlphaMatte, band: &TransitionBand) -> Result<AlphaMatte> {
        fuse(semantic, detail, band)
    }

    /// Optionally a hard 0/1 decision at 0.5, then grown by `guard` quarter
    /// pixels, so neither the logistic tail nor blocks beside the foreground
    /// edge leak into the restored background. With both off the estimate is
    /// passed through unchanged.
    fn restoration_semantic(&self, semantic: &SemanticMap) -> Result<SemanticMap> {
        let r = self.params.guard;
        let (w, h) = semantic.dims();
        let s: Vec<f64> = if self.params.restore_hard {
            semantic.values().iter().map(|&v| if v >= 0.5 { 1.0 } else { 0.0 }).collect()
        } else {
            semantic.values().to_vec()
        };
        if r == 0 {
            return SemanticMap::new(w, h, s);
        }
        let mut rows = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
                rows[y * w + x] = s[y * w + x0..=y * w + x1].iter().copied().fold(0.0, f64::max);
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
            for x in 0..w {
                out[y * w + x] = (y0..=y1).map(|yy| rows[yy * w + x]).fold(0.0, f64::max);
            }
        }
        SemanticMap::new(w, h, out)
    }
}

/// Everything carried from one frame to the next within a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    pub background: BackgroundState,
    pub previous_semantic: Option<SemanticMap>,
    pub reference: Option<Frame>,
}

impl StreamState {
    /// Fresh state for frames of the given full resolution.
    pub fn new(frame_width: usize, frame_height: usize) -> Result<Self> {
        let (w, h) = quarter_dims(frame_width, frame_height);
        if w == 0 || h == 0 {
            return Err(Error::DegenerateInput(format!(
                "frames must be at least 4x4, got {frame_width}x{frame_height}"
            )));
        }
        Ok(Self {
            background: BackgroundState::new(w, h)?,
            previous_semantic: None,
            reference: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    /// Fused matte at frame resolution.
    pub matte: AlphaMatte,
    pub semantic: SemanticMap,
    pub band: TransitionBand,
    /// Background prior the frame was solved against (previous state).
    pub prior: BackgroundPrior,
    pub trace: BrmUpdateTrace,
    pub no_confident_foreground: bool,
    pub degenerate: usize,
    pub unrestored: usize,
}

/// One step of the frame loop: read the prior, estimate semantics, solve
/// detail, fuse, then fold this frame into the restored background.
pub fn process_frame(
    frame: &Frame,
    state: &StreamState,
    predictor: &dyn Predictor,
) -> Result<(FrameOutput, StreamState)> {
    let frame_4x = downsample4x(frame)?;
    check_dims("process frame", state.background.dims(), frame_4x.dims())?;

    let prior = BackgroundPrior::from_state(&state.background, frame.width(), frame.height())?;
    let reference = state.reference.clone().unwrap_or_else(|| frame_4x.clone());
    let ctx = SemanticContext {
        prior: &state.background,
        previous_semantic: state.previous_semantic.as_ref(),
        reference: Some(&reference),
    };
    let semantic = predictor.semantic(&frame_4x, &ctx)?;
    let detail = predictor.detail(frame, &semantic, &state.background, &prior)?;
    let matte = predictor.fuse(&semantic, &detail.matte.matte, &detail.band)?;

    let guarded = predictor.restoration_semantic(&semantic)?;
    let bg_i = extract_bg_info(&frame_4x, &guarded)?;
    let (background, trace) = state.background.update(&bg_i, &guarded)?;

    let next = StreamState {
        background,
        previous_semantic: Some(semantic.clone()),
        reference: Some(reference),
    };
    let out = FrameOutput {
        matte,
        semantic,
        band: detail.band,
        prior,
        trace,
        no_confident_foreground: detail.matte.no_confident_foreground,
        degenerate: detail.matte.degenerate,
        unrestored: detail.matte.unrestored,
    };
    Ok((out, next))
}
