//! Streaming driver: semantic + detail + fusion, patch refinement, then the
//! optional flicker filter, with the restored background carried across
//! frames.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matting::{process_frame, ClassicalParams, ClassicalPredictor, Predictor, StreamState};
use crate::metrics::{OfdParams, OfdStream};
use crate::prm::{run_prm, PrmParams};
use crate::types::{AlphaMatte, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub classical: ClassicalParams,
    pub prm: PrmParams,
    /// `None` disables the flicker filter.
    pub ofd: Option<OfdParams>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            classical: ClassicalParams::default(),
            prm: PrmParams::default(),
            ofd: Some(OfdParams::default()),
        }
    }
}

/// Per-frame bookkeeping, available as soon as the frame is processed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameReport {
    pub index: usize,
    pub newly_restored: usize,
    pub averaged: usize,
    pub restored: usize,
    pub band_pixels: usize,
    pub selected_patches: usize,
    pub refined_pixels: usize,
    pub skipped_patches: usize,
    pub no_confident_foreground: bool,
    pub degenerate: usize,
    pub unrestored: usize,
    /// Version of the background state the frame was solved against.
    pub prior_version: u64,
}

pub struct Pipeline {
    config: PipelineConfig,
    predictor: Box<dyn Predictor>,
    state: StreamState,
    dims: (usize, usize),
    ofd: Option<OfdStream>,
    pending: VecDeque<usize>,
    next_index: usize,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, width: usize, height: usize) -> Result<Self> {
        let predictor = Box::new(ClassicalPredictor::new(config.classical));
        Self::with_predictor(config, predictor, width, height)
    }

    pub fn with_predictor(
        config: PipelineConfig,
        predictor: Box<dyn Predictor>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        Ok(Self {
            config,
            predictor,
            state: StreamState::new(width, height)?,
            dims: (width, height),
            ofd: config.ofd.map(OfdStream::new),
            pending: VecDeque::new(),
            next_index: 1,
        })
    }

    pub fn state(&self) -> &StreamState {
        &self.state
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Processes the next frame. Returns its report and whichever mattes are
    /// final after this frame (the flicker filter holds one frame back).
    pub fn push(&mut self, frame: &Frame) -> Result<(FrameReport, Vec<(usize, AlphaMatte)>)> {
        if frame.index() != self.next_index {
            return Err(Error::Sequence(format!(
                "expected frame {}, got frame {}",
                self.next_index,
                frame.index()
            )));
        }
        if frame.dims() != self.dims {
            return Err(Error::DimensionMismatch {
                context: "pipeline frame",
                expected: self.dims,
                actual: frame.dims(),
            });
        }
        let prior_version = self.state.background.version();
        let (out, next) = process_frame(frame, &self.state, self.predictor.as_ref())?;
        let prm = run_prm(frame, &out.matte, &out.prior, &self.config.prm)?;

        let report = FrameReport {
            index: frame.index(),
            newly_restored: out.trace.newly_restored_count(),
            averaged: out.trace.averaged_count(),
            restored: next.background.restored_count(),
            band_pixels: out.band.count(),
            selected_patches: prm.schedule.selected.len(),
            refined_pixels: prm.refined.refined_pixels,
            skipped_patches: prm.refined.skipped_patches,
            no_confident_foreground: out.no_confident_foreground,
            degenerate: out.degenerate + prm.refined.degenerate,
            unrestored: out.unrestored + prm.refined.unrestored,
            prior_version,
        };
        self.state = next;
        self.next_index += 1;

        let matte = prm.refined.matte;
        let ready = match &mut self.ofd {
            None => vec![(frame.index(), matte)],
            Some(ofd) => {
                self.pending.push_back(frame.index());
                ofd.push(matte)?
                    .map(|m| (self.pending.pop_front().expect("held index"), m))
                    .into_iter()
                    .collect()
            }
        };
        Ok((report, ready))
    }

    /// Flushes mattes still held by the flicker filter.
    pub fn finish(&mut self) -> Vec<(usize, AlphaMatte)> {
        let mut out = Vec::new();
        if let Some(ofd) = &mut self.ofd {
            while let Some(m) = ofd.finish() {
                out.push((self.pending.pop_front().expect("held index"), m));
            }
        }
        out
    }

    /// Pixels changed by the flicker filter so far.
    pub fn ofd_changed(&self) -> usize {
        self.ofd.as_ref().map_or(0, OfdStream::changed)
    }
}

#[derive(Debug, Clone)]
pub struct SequenceOutput {
    pub mattes: Vec<AlphaMatte>,
    pub reports: Vec<FrameReport>,
    pub state: StreamState,
    pub ofd_changed: usize,
}

/// Runs a whole sequence in memory.
pub fn run_sequence(frames: &[Frame], config: PipelineConfig) -> Result<SequenceOutput> {
    let first = frames
        .first()
        .ok_or_else(|| Error::DegenerateInput("empty sequence".into()))?;
    let mut pipeline = Pipeline::new(config, first.width(), first.height())?;
    let mut mattes = Vec::with_capacity(frames.len());
    let mut reports = Vec::with_capacity(frames.len());
    for frame in frames {
        let (report, ready) = pipeline.push(frame)?;
        reports.push(report);
        mattes.extend(ready.into_iter().map(|(_, m)| m));
    }
    mattes.extend(pipeline.finish().into_iter().map(|(_, m)| m));
    Ok(SequenceOutput {
        mattes,
        reports,
        ofd_changed: pipeline.ofd_changed(),
        state: pipeline.state,
    })
}
