//! Mask erosion and background-mask derivation.

use crate::depthio::raster::{DepthMap, Mask};
use crate::error::{PdeError, Result};

/// Erodes `mask` with a `(2r+1)x(2r+1)` square structuring element.
///
/// A pixel survives iff every pixel within Chebyshev distance `radius` is set;
/// pixels outside the image count as unset, so the image border erodes too.
/// Radius 0 is the identity.
pub fn erode_mask(mask: &Mask, radius: usize) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    // The square element is separable: erode rows, then columns.
    let mut rows = vec![false; w * h];
    let mut line = Vec::with_capacity(w.max(h));
    for y in 0..h {
        line.clear();
        line.extend((0..w).map(|x| mask.get(x, y)));
        let out = erode_line(&line, radius);
        rows[y * w..(y + 1) * w].copy_from_slice(&out);
    }
    let mut bits = vec![false; w * h];
    for x in 0..w {
        line.clear();
        line.extend((0..h).map(|y| rows[y * w + x]));
        for (y, v) in erode_line(&line, radius).into_iter().enumerate() {
            bits[y * w + x] = v;
        }
    }
    Mask::new(w, h, bits).expect("shape preserved")
}

fn erode_line(line: &[bool], radius: usize) -> Vec<bool> {
    let n = line.len();
    // prefix[i] = number of unset entries in line[..i]
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for &b in line {
        prefix.push(prefix.last().unwrap() + usize::from(!b));
    }
    (0..n)
        .map(|i| i >= radius && i + radius < n && prefix[i + radius + 1] - prefix[i - radius] == 0)
        .collect()
}

/// Marks background pixels of a ground-truth map: invalid or infinite depth,
/// or depth beyond `threshold` when one is given.
pub fn background_mask(gt: &DepthMap, threshold: Option<f64>) -> Result<Mask> {
    if let Some(t) = threshold {
        if !(t > 0.0) || !t.is_finite() {
            return Err(PdeError::Parameter(format!(
                "background threshold must be positive and finite, got {t}"
            )));
        }
    }
    let bits = gt
        .values()
        .iter()
        .zip(gt.valid())
        .map(|(&v, &ok)| !ok || !v.is_finite() || threshold.is_some_and(|t| v > t))
        .collect();
    Mask::new(gt.width(), gt.height(), bits)
}
