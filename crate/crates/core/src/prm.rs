//! Patch refinement.
//!
//! The full-resolution coarse matte is cut into a fixed `k x k` grid. Every
//! patch gets a flaw score; patches scoring above `xi` (at most
//! `ceil(cap * k^2)` of them) are re-solved at native resolution, everything
//! else is copied through untouched.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::matting::{confident_mask, solve_region, ConfidentIndex, BackgroundPrior, DetailParams, Rect};
use crate::types::{AlphaMatte, Frame, Resolution};

/// Largest dimension still served by the 16x16 grid.
pub const MAX_DIM_FOR_K16: usize = 4096;

pub fn grid_size_for(width: usize, height: usize) -> usize {
    if width.max(height) <= MAX_DIM_FOR_K16 {
        16
    } else {
        32
    }
}

/// Exact tiling of an image into `k x k` rectangles. Remainder pixels go one
/// each to the leading columns and rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub width: usize,
    pub height: usize,
    pub k: usize,
    col_edges: Vec<usize>,
    row_edges: Vec<usize>,
}

fn edges(len: usize, k: usize) -> Vec<usize> {
    let (base, rem) = (len / k, len % k);
    let mut out = Vec::with_capacity(k + 1);
    let mut at = 0;
    out.push(0);
    for i in 0..k {
        at += base + usize::from(i < rem);
        out.push(at);
    }
    out
}

impl PatchGrid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::with_k(width, height, grid_size_for(width, height))
    }

    pub fn with_k(width: usize, height: usize, k: usize) -> Result<Self> {
        if k == 0 || width < k || height < k {
            return Err(Error::DegenerateInput(format!(
                "image {width}x{height} is smaller than a {k}x{k} patch grid"
            )));
        }
        Ok(Self {
            width,
            height,
            k,
            col_edges: edges(width, k),
            row_edges: edges(height, k),
        })
    }

    pub fn len(&self) -> usize {
        self.k * self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    /// Rectangle of patch `index` (row-major over the grid).
    pub fn rect(&self, index: usize) -> Rect {
        let (row, col) = (index / self.k, index % self.k);
        Rect {
            x: self.col_edges[col],
            y: self.row_edges[row],
            width: self.col_edges[col + 1] - self.col_edges[col],
            height: self.row_edges[row + 1] - self.row_edges[row],
        }
    }

    pub fn rects(&self) -> impl Iterator<Item = Rect> + '_ {
        (0..self.len()).map(|i| self.rect(i))
    }

    pub fn max_patch_area(&self) -> usize {
        (self.col_edges[1] - self.col_edges[0]) * (self.row_edges[1] - self.row_edges[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlawParams {
    pub transition_weight: f64,
    pub gradient_weight: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Default for FlawParams {
    fn default() -> Self {
        Self {
            transition_weight: 0.7,
            gradient_weight: 0.3,
            lo: 0.05,
            hi: 0.95,
        }
    }
}

/// One score in `[0, 1]` per patch, row-major over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlawMap {
    pub k: usize,
    pub scores: Vec<f64>,
}

/// Scores each patch by the share of fractional pixels and the mean
/// forward-difference gradient magnitude of the matte.
pub fn compute_flaw_map(coarse: &AlphaMatte, grid: &PatchGrid, params: FlawParams) -> Result<FlawMap> {
    check_dims("flaw map", (grid.width, grid.height), coarse.dims())?;
    let w = coarse.width();
    let h = coarse.height();
    let a = coarse.values();
    let scores = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let r = grid.rect(i);
            let mut transition = 0usize;
            let mut gradient = 0.0;
            for y in r.y..r.y + r.height {
                for x in r.x..r.x + r.width {
                    let v = a[y * w + x];
                    if v > params.lo && v < params.hi {
                        transition += 1;
                    }
                    let gx = if x + 1 < w { a[y * w + x + 1] - v } else { 0.0 };
                    let gy = if y + 1 < h { a[(y + 1) * w + x] - v } else { 0.0 };
                    gradient += (gx * gx + gy * gy).sqrt();
                }
            }
            let n = r.area() as f64;
            let score = params.transition_weight * transition as f64 / n
                + params.gradient_weight * gradient / n;
            score.clamp(0.0, 1.0)
        })
        .collect();
    Ok(FlawMap { k: grid.k, scores })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSchedule {
    /// Selected patch indices, ascending.
    pub selected: Vec<usize>,
    pub xi: f64,
    pub cap: f64,
}

impl PatchSchedule {
    pub fn empty(xi: f64, cap: f64) -> Self {
        Self {
            selected: Vec::new(),
            xi,
            cap,
        }
    }
}

/// `ceil(cap * k^2)`.
pub fn patch_budget(cap: f64, k: usize) -> usize {
    (cap * (k * k) as f64).ceil() as usize
}

/// Keeps patches scoring strictly above `xi`, trimmed to the budget by
/// descending score with lower indices winning ties.
pub fn select_patches(flaws: &FlawMap, xi: f64, cap: f64) -> Result<PatchSchedule> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::Contract(format!("xi {xi} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&cap) {
        return Err(Error::Contract(format!("cap {cap} outside [0, 1]")));
    }
    let mut candidates: Vec<usize> = (0..flaws.scores.len())
        .filter(|&i| flaws.scores[i] > xi)
        .collect();
    let budget = patch_budget(cap, flaws.k);
    if candidates.len() > budget {
        candidates.sort_by(|&a, &b| flaws.scores[b].total_cmp(&flaws.scores[a]).then(a.cmp(&b)));
        candidates.truncate(budget);
        candidates.sort_unstable();
    }
    Ok(PatchSchedule {
        selected: candidates,
        xi,
        cap,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub matte: AlphaMatte,
    pub refined_pixels: usize,
    /// Selected patches left as-is because no confident pixel was in reach.
    pub skipped_patches: usize,
    pub degenerate: usize,
    pub unrestored: usize,
}

/// Re-solves the scheduled patches with the known-background projection.
/// Every pixel of a selected patch is solved; the halo around it is only read
/// when looking for foreground colors.
pub fn refine(
    frame: &Frame,
    coarse: &AlphaMatte,
    grid: &PatchGrid,
    schedule: &PatchSchedule,
    prior: &BackgroundPrior,
    halo: usize,
    detail: DetailParams,
) -> Result<Refined> {
    check_dims("refine (coarse)", frame.dims(), coarse.dims())?;
    check_dims("refine (background)", frame.dims(), prior.dims())?;
    check_dims("refine (grid)", frame.dims(), (grid.width, grid.height))?;
    if let Some(&bad) = schedule.selected.iter().find(|&&i| i >= grid.len()) {
        return Err(Error::Contract(format!(
            "patch index {bad} outside a {}x{} grid",
            grid.k, grid.k
        )));
    }
    if schedule.selected.is_empty() {
        return Ok(Refined {
            matte: coarse.clone(),
            refined_pixels: 0,
            skipped_patches: 0,
            degenerate: 0,
            unrestored: 0,
        });
    }

    let (w, h) = frame.dims();
    let band = vec![true; w * h];
    let confident = ConfidentIndex::new(&confident_mask(coarse, detail), w, h);
    let solved: Vec<(Rect, Vec<f64>, usize, usize, bool)> = schedule
        .selected
        .par_iter()
        .map(|&i| {
            let target = grid.rect(i);
            let search = target.expand(halo, w, h);
            let (values, degenerate, unrestored, none) =
                solve_region(frame, &band, coarse, &confident, prior, detail, target, search);
            (target, values, degenerate, unrestored, none)
        })
        .collect();

    let mut out = coarse.values().to_vec();
    let mut result = Refined {
        matte: coarse.clone(),
        refined_pixels: 0,
        skipped_patches: 0,
        degenerate: 0,
        unrestored: 0,
    };
    for (rect, values, degenerate, unrestored, none) in solved {
        if none {
            result.skipped_patches += 1;
            continue;
        }
        for (row, chunk) in values.chunks_exact(rect.width).enumerate() {
            let start = (rect.y + row) * w + rect.x;
            out[start..start + rect.width].copy_from_slice(chunk);
        }
        result.refined_pixels += rect.area();
        result.degenerate += degenerate;
        result.unrestored += unrestored;
    }
    result.matte = AlphaMatte::new(w, h, out, Resolution::Full)?;
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrmParams {
    pub xi: f64,
    pub cap: f64,
    pub halo: usize,
    pub force_k: Option<usize>,
    pub flaw: FlawParams,
    pub detail: DetailParams,
}

impl Default for PrmParams {
    fn default() -> Self {
        Self {
            xi: 0.01,
            cap: 0.15,
            halo: 8,
            force_k: None,
            flaw: FlawParams::default(),
            detail: DetailParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrmOutput {
    pub refined: Refined,
    pub flaws: FlawMap,
    pub schedule: PatchSchedule,
    pub grid: PatchGrid,
}

/// Grid, flaw map, schedule and refinement in one call.
pub fn run_prm(frame: &Frame, coarse: &AlphaMatte, prior: &BackgroundPrior, params: &PrmParams) -> Result<PrmOutput> {
    let grid = match params.force_k {
        Some(k) => PatchGrid::with_k(frame.width(), frame.height(), k)?,
        None => PatchGrid::new(frame.width(), frame.height())?,
    };
    let flaws = compute_flaw_map(coarse, &grid, params.flaw)?;
    let schedule = select_patches(&flaws, params.xi, params.cap)?;
    let refined = refine(frame, coarse, &grid, &schedule, prior, params.halo, params.detail)?;
    Ok(PrmOutput {
        refined,
        flaws,
        schedule,
        grid,
    })
}
