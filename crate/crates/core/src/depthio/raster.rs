//! In-memory rasters: depth/disparity maps and binary masks.

use serde::{Deserialize, Serialize};

use crate::error::{PdeError, Result};

/// What the values of a [`DepthMap`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueKind {
    /// Metric z-depth in meters.
    MetricDepth,
    /// Depth known up to scale and shift.
    AffineDepth,
    /// Inverse depth known up to scale and shift.
    AffineDisparity,
    /// Depth known up to a positive scale.
    ScaleDepth,
    /// Depth divided by its masked median. Never read from disk.
    NormalizedDepth,
}

impl ValueKind {
    /// Kinds whose valid pixels must be strictly positive.
    pub fn requires_positive(self) -> bool {
        matches!(
            self,
            ValueKind::MetricDepth | ValueKind::ScaleDepth | ValueKind::NormalizedDepth
        )
    }

    pub fn is_disparity(self) -> bool {
        self == ValueKind::AffineDisparity
    }

    fn accepts(self, v: f64) -> bool {
        v.is_finite() && (!self.requires_positive() || v > 0.0)
    }
}

/// Single-channel floating raster with a per-pixel validity mask.
///
/// Values are stored row-major as `f64`. Every valid pixel is finite, and for
/// depth kinds strictly positive; invalid pixels keep whatever value they had
/// (typically `NaN` or `+inf`).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
    kind: ValueKind,
}

impl DepthMap {
    /// Builds a map and derives validity from the values.
    pub fn new(width: usize, height: usize, values: Vec<f64>, kind: ValueKind) -> Result<Self> {
        let n = pixel_count(width, height)?;
        if values.len() != n {
            return Err(PdeError::Bounds(format!(
                "{width}x{height} raster needs {n} values, got {}",
                values.len()
            )));
        }
        let valid = values.iter().map(|&v| kind.accepts(v)).collect();
        Ok(DepthMap {
            width,
            height,
            values,
            valid,
            kind,
        })
    }

    /// Map of constant value.
    pub fn filled(width: usize, height: usize, value: f64, kind: ValueKind) -> Result<Self> {
        let n = pixel_count(width, height)?;
        Self::new(width, height, vec![value; n], kind)
    }

    /// Builds a map from per-pixel values and an explicit validity mask.
    /// Pixels flagged valid that violate the kind's invariant are invalidated.
    pub fn with_validity(
        width: usize,
        height: usize,
        values: Vec<f64>,
        valid: Vec<bool>,
        kind: ValueKind,
    ) -> Result<Self> {
        let mut map = Self::new(width, height, values, kind)?;
        if valid.len() != map.len() {
            return Err(PdeError::Bounds("validity length mismatch".into()));
        }
        for (v, extra) in map.valid.iter_mut().zip(valid) {
            *v &= extra;
        }
        Ok(map)
    }

    /// Re-tags the values and re-derives validity under the new kind.
    pub fn with_kind(self, kind: ValueKind) -> Self {
        let valid = self.values.iter().map(|&v| kind.accepts(v)).collect();
        DepthMap { valid, kind, ..self }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    /// Number of valid pixels.
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Validity as a mask.
    pub fn validity_mask(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.valid.clone(),
        }
    }

    pub fn same_shape<T: Shaped>(&self, other: &T) -> bool {
        self.width == other.shape().0 && self.height == other.shape().1
    }

    /// Applies `f` to every valid pixel; results that violate `kind` are
    /// invalidated and replaced by `NaN`.
    pub fn map_valid(&self, kind: ValueKind, mut f: impl FnMut(f64) -> f64) -> DepthMap {
        let mut values = Vec::with_capacity(self.len());
        let mut valid = Vec::with_capacity(self.len());
        for (&v, &ok) in self.values.iter().zip(&self.valid) {
            if ok {
                let out = f(v);
                if kind.accepts(out) {
                    values.push(out);
                    valid.push(true);
                } else {
                    values.push(f64::NAN);
                    valid.push(false);
                }
            } else {
                values.push(v);
                valid.push(false);
            }
        }
        DepthMap {
            width: self.width,
            height: self.height,
            values,
            valid,
            kind,
        }
    }
}

/// Binary raster gating which pixels take part in a computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        let n = pixel_count(width, height)?;
        if bits.len() != n {
            return Err(PdeError::Bounds(format!(
                "{width}x{height} mask needs {n} bits, got {}",
                bits.len()
            )));
        }
        Ok(Mask { width, height, bits })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Mask { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_all_false(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn and_not(&self, other: &Mask) -> Result<Mask> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn not(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// True if every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.len() == other.bits.len() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    fn zip_with(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Result<Mask> {
        if self.shape() != other.shape() {
            return Err(PdeError::Bounds(format!(
                "mask shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        })
    }
}

/// Anything with raster dimensions.
pub trait Shaped {
    /// `(width, height)`.
    fn shape(&self) -> (usize, usize);
}

impl Shaped for DepthMap {
    fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

impl Shaped for Mask {
    fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

pub(crate) fn pixel_count(width: usize, height: usize) -> Result<usize> {
    width
        .checked_mul(height)
        .ok_or_else(|| PdeError::Bounds(format!("{width}x{height} overflows")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validity_follows_kind() {
        let values = vec![1.0, -1.0, f64::NAN, f64::INFINITY];
        let depth = DepthMap::new(2, 2, values.clone(), ValueKind::MetricDepth).unwrap();
        assert_eq!(depth.valid(), &[true, false, false, false]);
        let disp = DepthMap::new(2, 2, values, ValueKind::AffineDisparity).unwrap();
        assert_eq!(disp.valid(), &[true, true, false, false]);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(DepthMap::new(2, 2, vec![1.0; 3], ValueKind::MetricDepth).is_err());
        assert!(Mask::new(3, 1, vec![true; 2]).is_err());
    }

    #[test]
    fn map_valid_invalidates_bad_outputs() {
        let m = DepthMap::new(3, 1, vec![1.0, 2.0, 3.0], ValueKind::AffineDepth).unwrap();
        let out = m.map_valid(ValueKind::MetricDepth, |v| v - 2.0);
        assert_eq!(out.valid(), &[false, false, true]);
        assert_eq!(out.values()[2], 1.0);
    }
}
