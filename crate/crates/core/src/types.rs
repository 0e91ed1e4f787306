//! Shared image and sequence value types.
//!
//! All sample math is done in `f64`. Quantization only happens at file I/O,
//! which lives in the CLI crate.

use crate::error::{check_dims, Error, Result};
use serde::{Deserialize, Serialize};

fn check_unit_range(what: &'static str, values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        // NaN fails both comparisons.
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfRange { what, value, index });
        }
    }
    Ok(())
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::BufferLength {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}

fn check_nonempty(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::DegenerateInput(format!(
            "image must be at least 1x1, got {width}x{height}"
        )));
    }
    Ok(())
}

/// One RGB video frame. Samples are row-major, interleaved RGB, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    index: usize,
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(index: usize, width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_nonempty(width, height)?;
        check_len("frame", width * height * 3, data.len())?;
        check_unit_range("frame channel", &data)?;
        Ok(Self {
            index,
            width,
            height,
            data,
        })
    }

    pub fn filled(index: usize, width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self::new(index, width, height, data)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Resolution at which a matte was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    Coarse,
    Full,
}

/// Per-pixel opacity, row-major, each value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatte {
    width: usize,
    height: usize,
    values: Vec<f64>,
    resolution: Resolution,
}

impl AlphaMatte {
    pub fn new(width: usize, height: usize, values: Vec<f64>, resolution: Resolution) -> Result<Self> {
        check_nonempty(width, height)?;
        check_len("alpha matte", width * height, values.len())?;
        check_unit_range("alpha", &values)?;
        Ok(Self {
            width,
            height,
            values,
            resolution,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64, resolution: Resolution) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], resolution)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Foreground probability at the background-restoration working resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SemanticMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_nonempty(width, height)?;
        check_len("semantic map", width * height, values.len())?;
        check_unit_range("semantic probability", &values)?;
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Unvalidated interleaved RGB field. Used for intermediate quantities such
/// as extracted background information and restored background content,
/// which are not guaranteed to stay in `[0, 1]` for corrupted inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl RgbField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

impl From<&Frame> for RgbField {
    fn from(frame: &Frame) -> Self {
        Self {
            width: frame.width,
            height: frame.height,
            data: frame.data.clone(),
        }
    }
}

/// Ordered frames with optional per-frame ground truth.
#[derive(Debug, Clone, Default)]
pub struct VideoSequence {
    frames: Vec<Frame>,
    pub alpha: Option<Vec<AlphaMatte>>,
    pub background: Option<Vec<Frame>>,
    pub foreground: Option<Vec<Frame>>,
}

impl VideoSequence {
    /// Frames must share dimensions and carry indices `1..=N` in order.
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        if let Some(first) = frames.first() {
            for (i, frame) in frames.iter().enumerate() {
                if frame.index != i + 1 {
                    return Err(Error::Sequence(format!(
                        "expected frame index {}, found {}",
                        i + 1,
                        frame.index
                    )));
                }
                check_dims("video sequence", first.dims(), frame.dims())?;
            }
        }
        Ok(Self {
            frames,
            alpha: None,
            background: None,
            foreground: None,
        })
    }

    pub fn with_ground_truth(
        mut self,
        alpha: Vec<AlphaMatte>,
        background: Vec<Frame>,
        foreground: Vec<Frame>,
    ) -> Result<Self> {
        let n = self.frames.len();
        for (what, len) in [
            ("alpha", alpha.len()),
            ("background", background.len()),
            ("foreground", foreground.len()),
        ] {
            if len != n {
                return Err(Error::Sequence(format!(
                    "{what} ground truth has {len} entries for {n} frames"
                )));
            }
        }
        self.alpha = Some(alpha);
        self.background = Some(background);
        self.foreground = Some(foreground);
        Ok(self)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(Frame::dims)
    }
}

/// Output size of [`downsample4x`] for a given input size.
pub fn quarter_dims(width: usize, height: usize) -> (usize, usize) {
    (width / 4, height / 4)
}

/// 4x4 box average. Trailing rows/columns that do not fill a block are dropped.
pub fn downsample4x(frame: &Frame) -> Result<Frame> {
    let data = box_downsample4x(frame.data(), frame.width, frame.height, 3)?;
    let (w, h) = quarter_dims(frame.width, frame.height);
    Frame::new(frame.index, w, h, data)
}

pub(crate) fn box_downsample4x(
    src: &[f64],
    width: usize,
    height: usize,
    channels: usize,
) -> Result<Vec<f64>> {
    if width < 4 || height < 4 {
        return Err(Error::DegenerateInput(format!(
            "4x downsampling needs at least 4x4 pixels, got {width}x{height}"
        )));
    }
    let (ow, oh) = quarter_dims(width, height);
    let mut out = vec![0.0; ow * oh * channels];
    for oy in 0..oh {
        for ox in 0..ow {
            let dst = &mut out[(oy * ow + ox) * channels..][..channels];
            for y in oy * 4..oy * 4 + 4 {
                let row = &src[(y * width + ox * 4) * channels..][..4 * channels];
                for px in row.chunks_exact(channels) {
                    for (d, s) in dst.iter_mut().zip(px) {
                        *d += s;
                    }
                }
            }
            for d in dst.iter_mut() {
                *d /= 16.0;
            }
        }
    }
    Ok(out)
}

/// Bilinear resize with half-pixel-center alignment. Source coordinates are
/// clamped to the image, so edges replicate.
pub(crate) fn bilinear_resize(
    src: &[f64],
    sw: usize,
    sh: usize,
    channels: usize,
    tw: usize,
    th: usize,
) -> Vec<f64> {
    let sx_scale = sw as f64 / tw as f64;
    let sy_scale = sh as f64 / th as f64;
    let mut out = vec![0.0; tw * th * channels];
    for ty in 0..th {
        let sy = (ty as f64 + 0.5) * sy_scale - 0.5;
        for tx in 0..tw {
            let sx = (tx as f64 + 0.5) * sx_scale - 0.5;
            let dst = &mut out[(ty * tw + tx) * channels..][..channels];
            sample_bilinear(src, sw, sh, channels, sx, sy, dst);
        }
    }
    out
}

/// Samples `src` at pixel-center coordinates `(x, y)` (pixel `i` has its
/// center at `i`). Coordinates outside the image are clamped.
pub(crate) fn sample_bilinear(
    src: &[f64],
    width: usize,
    height: usize,
    channels: usize,
    x: f64,
    y: f64,
    out: &mut [f64],
) {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    for c in 0..channels {
        let at = |xx: usize, yy: usize| src[(yy * width + xx) * channels + c];
        let top = (1.0 - fx) * at(x0, y0) + fx * at(x1, y0);
        let bottom = (1.0 - fx) * at(x0, y1) + fx * at(x1, y1);
        out[c] = (1.0 - fy) * top + fy * bottom;
    }
}

fn check_upsample_target(sw: usize, sh: usize, tw: usize, th: usize) -> Result<()> {
    if tw < sw || th < sh {
        return Err(Error::Contract(format!(
            "upsample target {tw}x{th} is smaller than source {sw}x{sh}"
        )));
    }
    Ok(())
}

/// Bilinear upsampling of a matte; the result is tagged full resolution.
pub fn upsample(matte: &AlphaMatte, target_w: usize, target_h: usize) -> Result<AlphaMatte> {
    check_upsample_target(matte.width, matte.height, target_w, target_h)?;
    let mut values = bilinear_resize(&matte.values, matte.width, matte.height, 1, target_w, target_h);
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    AlphaMatte::new(target_w, target_h, values, Resolution::Full)
}

/// Upsamples a semantic map into a full-resolution matte.
pub fn upsample_semantic(map: &SemanticMap, target_w: usize, target_h: usize) -> Result<AlphaMatte> {
    let coarse = AlphaMatte::new(map.width, map.height, map.values.clone(), Resolution::Coarse)?;
    upsample(&coarse, target_w, target_h)
}

/// Bilinear upsampling of an RGB field, clamped to `[0, 1]`.
pub fn upsample_rgb(field: &RgbField, index: usize, target_w: usize, target_h: usize) -> Result<Frame> {
    check_upsample_target(field.width, field.height, target_w, target_h)?;
    let mut data = bilinear_resize(&field.data, field.width, field.height, 3, target_w, target_h);
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    Frame::new(index, target_w, target_h, data)
}
