//! Evaluation functionals: MAD/MSE, boundary-weighted Charbonnier losses and
//! the one-frame-delay flicker filter.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::morphology;
use crate::types::{AlphaMatte, Frame};
#[cfg(test)]
use crate::types::Resolution;

pub const BOUNDARY_WEIGHT: f64 = 4.0;

/// Per-pixel loss weights: 4 on the ground-truth boundary band, 1 elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryWeightMask {
    pub width: usize,
    pub height: usize,
    pub weights: Vec<f64>,
}

impl BoundaryWeightMask {
    pub fn uniform(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            weights: vec![1.0; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }

    pub fn boundary_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w == BOUNDARY_WEIGHT).count()
    }
}

/// `dilate(alpha > 0.05, r) AND NOT erode(alpha > 0.95, r)` gets weight 4.
pub fn boundary_mask(alpha: &AlphaMatte, radius: usize) -> BoundaryWeightMask {
    let (w, h) = alpha.dims();
    let some: Vec<bool> = alpha.values().iter().map(|&a| a > 0.05).collect();
    let solid: Vec<bool> = alpha.values().iter().map(|&a| a > 0.95).collect();
    let outer = morphology::dilate(&some, w, h, radius);
    let inner = morphology::erode(&solid, w, h, radius);
    let weights = outer
        .iter()
        .zip(&inner)
        .map(|(&o, &i)| if o && !i { BOUNDARY_WEIGHT } else { 1.0 })
        .collect();
    BoundaryWeightMask {
        width: w,
        height: h,
        weights,
    }
}

/// A loss reduced by the per-pixel mean, with the raw sum kept alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedLoss {
    pub value: f64,
    pub raw_sum: f64,
}

fn charbonnier(pred: &[f64], truth: &[f64], weights: &[f64], channels: usize, epsilon: f64) -> WeightedLoss {
    let eps2 = epsilon * epsilon;
    let mut sum = 0.0;
    for (i, (p, g)) in pred.iter().zip(truth).enumerate() {
        let d = p - g;
        sum += weights[i / channels] * (d * d + eps2).sqrt();
    }
    WeightedLoss {
        value: sum / pred.len() as f64,
        raw_sum: sum,
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::Contract(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// Background loss for one frame: mean over pixels and channels of
/// `gamma * sqrt((p - g)^2 + eps^2)`.
pub fn loss_bg_frame(
    pred: &Frame,
    truth: &Frame,
    gamma: &BoundaryWeightMask,
    epsilon: f64,
) -> Result<WeightedLoss> {
    check_epsilon(epsilon)?;
    check_dims("background loss", truth.dims(), pred.dims())?;
    check_dims("background loss (weights)", truth.dims(), gamma.dims())?;
    Ok(charbonnier(pred.data(), truth.data(), &gamma.weights, 3, epsilon))
}

/// Background loss over a sequence: the per-frame terms summed over time.
/// `gamma` holds either one mask for all frames or one per frame.
pub fn loss_bg(
    pred: &[Frame],
    truth: &[Frame],
    gamma: &[BoundaryWeightMask],
    epsilon: f64,
) -> Result<WeightedLoss> {
    if pred.len() != truth.len() {
        return Err(Error::Sequence(format!(
            "background loss over {} predicted and {} ground-truth frames",
            pred.len(),
            truth.len()
        )));
    }
    if gamma.len() != 1 && gamma.len() != truth.len() {
        return Err(Error::Sequence(format!(
            "{} weight masks for {} frames",
            gamma.len(),
            truth.len()
        )));
    }
    let mut total = WeightedLoss {
        value: 0.0,
        raw_sum: 0.0,
    };
    for (t, (p, g)) in pred.iter().zip(truth).enumerate() {
        let mask = &gamma[if gamma.len() == 1 { 0 } else { t }];
        let term = loss_bg_frame(p, g, mask, epsilon)?;
        total.value += term.value;
        total.raw_sum += term.raw_sum;
    }
    Ok(total)
}

/// High-resolution alpha loss, same form as the background loss on one matte.
pub fn loss_alpha_hr(
    pred: &AlphaMatte,
    truth: &AlphaMatte,
    gamma: &BoundaryWeightMask,
    epsilon: f64,
) -> Result<WeightedLoss> {
    check_epsilon(epsilon)?;
    check_dims("alpha loss", truth.dims(), pred.dims())?;
    check_dims("alpha loss (weights)", truth.dims(), gamma.dims())?;
    Ok(charbonnier(pred.values(), truth.values(), &gamma.weights, 1, epsilon))
}

/// Mean absolute difference.
pub fn mad(pred: &AlphaMatte, truth: &AlphaMatte) -> Result<f64> {
    check_dims("mad", truth.dims(), pred.dims())?;
    let n = pred.values().len() as f64;
    Ok(pred.values().iter().zip(truth.values()).map(|(p, g)| (p - g).abs()).sum::<f64>() / n)
}

/// Mean squared error.
pub fn mse(pred: &AlphaMatte, truth: &AlphaMatte) -> Result<f64> {
    check_dims("mse", truth.dims(), pred.dims())?;
    let n = pred.values().len() as f64;
    Ok(pred
        .values()
        .iter()
        .zip(truth.values())
        .map(|(p, g)| (p - g) * (p - g))
        .sum::<f64>()
        / n)
}

/// MAD restricted to pixels where `mask` is set. `None` if the mask is empty.
pub fn masked_mad(pred: &AlphaMatte, truth: &AlphaMatte, mask: &[bool]) -> Result<Option<(f64, usize)>> {
    check_dims("masked mad", truth.dims(), pred.dims())?;
    let mut sum = 0.0;
    let mut n = 0;
    for ((p, g), &m) in pred.values().iter().zip(truth.values()).zip(mask) {
        if m {
            sum += (p - g).abs();
            n += 1;
        }
    }
    Ok((n > 0).then(|| (sum / n as f64, n)))
}

/// Scale applied when reporting MAD/MSE.
pub const REPORT_SCALE: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdParams {
    pub close_tol: f64,
    pub flicker_tol: f64,
}

impl Default for OfdParams {
    fn default() -> Self {
        Self {
            close_tol: 0.1,
            flicker_tol: 0.3,
        }
    }
}

/// Replacement value for the middle sample if it is a flicker.
pub fn ofd_pixel(prev: f64, cur: f64, next: f64, params: OfdParams) -> Option<f64> {
    let flicker = (prev - next).abs() <= params.close_tol
        && (cur - prev).abs() > params.flicker_tol
        && (cur - next).abs() > params.flicker_tol;
    flicker.then(|| (prev + next) / 2.0)
}

/// Filters the middle matte of a triple. Neighbours are read unfiltered.
pub fn ofd_middle(
    prev: &AlphaMatte,
    cur: &AlphaMatte,
    next: &AlphaMatte,
    params: OfdParams,
) -> Result<(AlphaMatte, usize)> {
    check_dims("ofd (previous)", cur.dims(), prev.dims())?;
    check_dims("ofd (next)", cur.dims(), next.dims())?;
    let mut changed = 0;
    let values = prev
        .values()
        .iter()
        .zip(cur.values())
        .zip(next.values())
        .map(|((&p, &c), &n)| match ofd_pixel(p, c, n, params) {
            Some(v) => {
                changed += 1;
                v
            }
            None => c,
        })
        .collect();
    Ok((AlphaMatte::new(cur.width(), cur.height(), values, cur.resolution())?, changed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfdResult {
    pub mattes: Vec<AlphaMatte>,
    pub changed: usize,
    /// Set when the sequence was too short to filter.
    pub warning: Option<String>,
}

/// One-frame-delay filter over a whole sequence. First and last frames pass
/// through; every decision uses the unfiltered neighbours.
pub fn ofd_filter(mattes: &[AlphaMatte], params: OfdParams) -> Result<OfdResult> {
    if mattes.len() < 3 {
        return Ok(OfdResult {
            mattes: mattes.to_vec(),
            changed: 0,
            warning: Some(format!(
                "flicker filter needs at least 3 frames, got {}; passing through",
                mattes.len()
            )),
        });
    }
    let mut out = Vec::with_capacity(mattes.len());
    let mut changed = 0;
    out.push(mattes[0].clone());
    for w in mattes.windows(3) {
        let (m, c) = ofd_middle(&w[0], &w[1], &w[2], params)?;
        changed += c;
        out.push(m);
    }
    out.push(mattes[mattes.len() - 1].clone());
    Ok(OfdResult {
        mattes: out,
        changed,
        warning: None,
    })
}

/// Streaming form of [`ofd_filter`]: each pushed matte releases the one
/// before it, one frame late.
#[derive(Debug, Default)]
pub struct OfdStream {
    params: OfdParams,
    // Unfiltered (previous, current); `current` is not yet released.
    held: Vec<AlphaMatte>,
    changed: usize,
}

impl OfdStream {
    pub fn new(params: OfdParams) -> Self {
        Self {
            params,
            ..Default::default()
        }
    }

    pub fn push(&mut self, matte: AlphaMatte) -> Result<Option<AlphaMatte>> {
        let released = match self.held.len() {
            0 => None,
            1 => Some(self.held[0].clone()),
            _ => {
                let (m, c) = ofd_middle(&self.held[0], &self.held[1], &matte, self.params)?;
                self.changed += c;
                self.held.remove(0);
                Some(m)
            }
        };
        self.held.push(matte);
        Ok(released)
    }

    /// Releases the final held matte.
    pub fn finish(&mut self) -> Option<AlphaMatte> {
        let last = self.held.pop();
        self.held.clear();
        last
    }

    pub fn changed(&self) -> usize {
        self.changed
    }
}
