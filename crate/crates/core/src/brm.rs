//! Background restoration.
//!
//! The restored background `bg_f` and its binary coverage mask `bg_m` live at
//! quarter resolution. Each frame contributes `bg_i = (1 - s) * frame_4x`;
//! pixels seen as background for the first time are copied in, pixels already
//! restored are averaged with the new observation.

use crate::error::{check_dims, Error, Result};
use crate::types::{Frame, RgbField, SemanticMap};

/// A pixel counts as background when `1 - s > BACKGROUND_THRESHOLD` (strict).
pub const BACKGROUND_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundState {
    width: usize,
    height: usize,
    bg_f: Vec<f64>,
    bg_m: Vec<u8>,
    version: u64,
}

/// Masks produced by one update step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrmUpdateTrace {
    /// Background observed for the first time this step.
    pub newly_restored: Vec<bool>,
    /// Background already restored and observed again (averaging branch).
    pub averaged: Vec<bool>,
}

impl BrmUpdateTrace {
    pub fn newly_restored_count(&self) -> usize {
        self.newly_restored.iter().filter(|&&b| b).count()
    }

    pub fn averaged_count(&self) -> usize {
        self.averaged.iter().filter(|&&b| b).count()
    }
}

impl BackgroundState {
    /// All-zero content and mask.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DegenerateInput(format!(
                "background state must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            bg_f: vec![0.0; width * height * 3],
            bg_m: vec![0; width * height],
            version: 0,
        })
    }

    /// Rebuilds a state from raw buffers. `bg_f` is not range checked so that
    /// corrupted content can be represented and flagged on render.
    pub fn from_parts(width: usize, height: usize, bg_f: Vec<f64>, bg_m: Vec<u8>) -> Result<Self> {
        let mut state = Self::new(width, height)?;
        if bg_f.len() != width * height * 3 {
            return Err(Error::BufferLength {
                what: "background content",
                expected: width * height * 3,
                actual: bg_f.len(),
            });
        }
        if bg_m.len() != width * height {
            return Err(Error::BufferLength {
                what: "background mask",
                expected: width * height,
                actual: bg_m.len(),
            });
        }
        if let Some(index) = bg_m.iter().position(|&m| m > 1) {
            return Err(Error::OutOfRange {
                what: "background mask",
                value: bg_m[index] as f64,
                index,
            });
        }
        state.bg_f = bg_f;
        state.bg_m = bg_m;
        Ok(state)
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

    /// Restored content, interleaved RGB.
    pub fn content(&self) -> &[f64] {
        &self.bg_f
    }

    /// Restored mask, one `0`/`1` byte per pixel.
    pub fn mask(&self) -> &[u8] {
        &self.bg_m
    }

    pub fn is_restored(&self, x: usize, y: usize) -> bool {
        self.bg_m[y * self.width + x] == 1
    }

    pub fn restored_count(&self) -> usize {
        self.bg_m.iter().filter(|&&m| m == 1).count()
    }

    pub fn is_fully_restored(&self) -> bool {
        self.bg_m.iter().all(|&m| m == 1)
    }

    /// Number of updates applied since initialization.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn content_field(&self) -> RgbField {
        RgbField {
            width: self.width,
            height: self.height,
            data: self.bg_f.clone(),
        }
    }

    /// Advances the state by one frame.
    pub fn update(&self, bg_i: &RgbField, semantic: &SemanticMap) -> Result<(Self, BrmUpdateTrace)> {
        check_dims("background update (info)", self.dims(), bg_i.dims())?;
        check_dims("background update (semantic)", self.dims(), semantic.dims())?;

        let is_background: Vec<bool> = semantic
            .values()
            .iter()
            .map(|&s| (1.0 - s) > BACKGROUND_THRESHOLD)
            .collect();
        let newly_restored: Vec<bool> = self
            .bg_m
            .iter()
            .zip(&is_background)
            .map(|(&m, &bg)| m == 0 && bg)
            .collect();
        let averaged: Vec<bool> = self
            .bg_m
            .iter()
            .zip(&is_background)
            .map(|(&m, &bg)| m == 1 && bg)
            .collect();

        let mut bg_f = self.bg_f.clone();
        for (i, (px, info)) in bg_f
            .chunks_exact_mut(3)
            .zip(bg_i.data.chunks_exact(3))
            .enumerate()
        {
            if newly_restored[i] {
                for (f, v) in px.iter_mut().zip(info) {
                    *f += v;
                }
            } else if averaged[i] {
                for (f, v) in px.iter_mut().zip(info) {
                    *f = (*f + v) / 2.0;
                }
            }
        }
        let bg_m = self
            .bg_m
            .iter()
            .zip(&newly_restored)
            .map(|(&m, &new)| m + new as u8)
            .collect();

        let next = Self {
            width: self.width,
            height: self.height,
            bg_f,
            bg_m,
            version: self.version + 1,
        };
        Ok((
            next,
            BrmUpdateTrace {
                newly_restored,
                averaged,
            },
        ))
    }
}

/// `bg_i = (1 - s) * frame_4x`, per pixel and channel.
pub fn extract_bg_info(frame_4x: &Frame, semantic: &SemanticMap) -> Result<RgbField> {
    check_dims("background extraction", frame_4x.dims(), semantic.dims())?;
    let data = frame_4x
        .data()
        .chunks_exact(3)
        .zip(semantic.values())
        .flat_map(|(px, &s)| {
            let keep = 1.0 - s;
            [keep * px[0], keep * px[1], keep * px[2]]
        })
        .collect();
    Ok(RgbField {
        width: frame_4x.width(),
        height: frame_4x.height(),
        data,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedBackground {
    /// Restored content; unrestored pixels are black.
    pub frame: Frame,
    pub restored: Vec<bool>,
    /// Channel samples that fell outside `[0, 1]` and were clamped.
    pub clamped: usize,
}

impl RenderedBackground {
    pub fn is_corrupt(&self) -> bool {
        self.clamped > 0
    }
}

pub fn render_background(state: &BackgroundState) -> RenderedBackground {
    let mut clamped = 0;
    let mut data = Vec::with_capacity(state.bg_f.len());
    for (px, &m) in state.bg_f.chunks_exact(3).zip(&state.bg_m) {
        for &v in px {
            if m == 0 {
                data.push(0.0);
                continue;
            }
            let c = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            if c != v {
                clamped += 1;
            }
            data.push(c);
        }
    }
    let frame = Frame::new(0, state.width, state.height, data)
        .expect("clamped render is always in range");
    RenderedBackground {
        frame,
        restored: state.bg_m.iter().map(|&m| m == 1).collect(),
        clamped,
    }
}
