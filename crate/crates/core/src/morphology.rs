//! Binary morphology with square structuring elements.
//!
//! Neighbourhoods are clipped to the image: pixels outside the frame neither
//! set a dilation nor break an erosion.

/// Dilation with a `(2r+1) x (2r+1)` square.
pub fn dilate(mask: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    separable(mask, width, height, radius, true)
}

/// Erosion with a `(2r+1) x (2r+1)` square.
pub fn erode(mask: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    separable(mask, width, height, radius, false)
}

// A square element decomposes into a horizontal then a vertical pass.
fn separable(mask: &[bool], width: usize, height: usize, radius: usize, dilating: bool) -> Vec<bool> {
    assert_eq!(mask.len(), width * height);
    if radius == 0 {
        return mask.to_vec();
    }
    // dilation: any set; erosion: all set
    fn hits(mut it: impl Iterator<Item = bool>, dilating: bool) -> bool {
        if dilating {
            it.any(|b| b)
        } else {
            it.all(|b| b)
        }
    }
    let mut horizontal = vec![false; mask.len()];
    for y in 0..height {
        let row = &mask[y * width..][..width];
        for x in 0..width {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(width - 1);
            horizontal[y * width + x] = hits(row[lo..=hi].iter().copied(), dilating);
        }
    }
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(height - 1);
        for x in 0..width {
            out[y * width + x] = hits((lo..=hi).map(|yy| horizontal[yy * width + x]), dilating);
        }
    }
    out
}
