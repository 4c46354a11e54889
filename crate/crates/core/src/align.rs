//! Least-squares alignment of predictions to a reference.
//!
//! Depth-domain fits solve `min sum (a*d + b - ref)^2`; disparity-domain fits
//! solve `min sum (a*rho + b - 1/ref)^2` and map back with `d* = 1/(a*rho + b)`.
//! Every fit uses exactly the pixels that are set in the mask and valid in
//! both rasters.

use serde::{Deserialize, Serialize};

use crate::depthio::{DepthMap, Mask, Shaped, ValueKind};
use crate::error::{PdeError, Result};
use crate::numeric::{self, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignMode {
    ScaleShiftDepth,
    ScaleDepth,
    ScaleShiftDisparity,
    ScaleDisparity,
    MedianNormalize,
}

impl AlignMode {
    pub fn is_disparity(self) -> bool {
        matches!(self, AlignMode::ScaleShiftDisparity | AlignMode::ScaleDisparity)
    }

    pub fn has_shift(self) -> bool {
        matches!(self, AlignMode::ScaleShiftDepth | AlignMode::ScaleShiftDisparity)
    }
}

/// Fitted scale `a` and shift `b`. `b == 0` exactly for scale-only modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignParams {
    pub a: f64,
    pub b: f64,
    pub mode: AlignMode,
}

impl AlignParams {
    pub fn identity(mode: AlignMode) -> Self {
        AlignParams { a: 1.0, b: 0.0, mode }
    }

    pub fn negative_scale(&self) -> bool {
        self.a < 0.0
    }
}

/// Depth range applied after alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipRange {
    pub min: f64,
    pub max: f64,
    pub enabled: bool,
}

impl Default for ClipRange {
    /// 10 cm to 1000 m.
    fn default() -> Self {
        ClipRange {
            min: 0.1,
            max: 1000.0,
            enabled: true,
        }
    }
}

impl ClipRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        let clip = ClipRange {
            min,
            max,
            enabled: true,
        };
        clip.validate()?;
        Ok(clip)
    }

    pub fn disabled() -> Self {
        ClipRange {
            enabled: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && !(0.0 < self.min && self.min < self.max) {
            return Err(PdeError::Parameter(format!(
                "clip range needs 0 < min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    fn apply(&self, d: f64) -> f64 {
        if self.enabled {
            d.clamp(self.min, self.max)
        } else {
            d
        }
    }
}

/// Collects `(pred, ref)` pairs on the joint mask.
fn joint_pairs(pred: &DepthMap, reference: &DepthMap, mask: &Mask) -> Result<Vec<(f64, f64)>> {
    if !pred.same_shape(reference) || !pred.same_shape(mask) {
        return Err(PdeError::Bounds(format!(
            "shape mismatch: pred {:?}, ref {:?}, mask {:?}",
            pred.shape(),
            reference.shape(),
            mask.shape()
        )));
    }
    Ok((0..pred.len())
        .filter(|&i| mask.bits()[i] && pred.valid()[i] && reference.valid()[i])
        .map(|i| (pred.values()[i], reference.values()[i]))
        .collect())
}

/// Closed-form `y ~ a*x + b` via centred sums.
fn solve_affine(pairs: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = pairs.len();
    if n < 2 {
        return Err(PdeError::DegenerateFit(format!(
            "scale-shift fit needs at least 2 pixels, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_x = numeric::sum(pairs.iter().map(|p| p.0)) / nf;
    let mean_y = numeric::sum(pairs.iter().map(|p| p.1)) / nf;
    let mut sxx = CompensatedSum::new();
    let mut sxy = CompensatedSum::new();
    let mut scale = 0.0f64;
    for &(x, y) in pairs {
        let dx = x - mean_x;
        sxx.add(dx * dx);
        sxy.add(dx * (y - mean_y));
        scale = scale.max(x.abs());
    }
    let sxx = sxx.value();
    // relative spread below 1e-12 is indistinguishable from a constant prediction
    if !(sxx > nf * (1e-12 * scale).powi(2)) {
        return Err(PdeError::DegenerateFit("prediction is constant on the mask".into()));
    }
    let a = sxy.value() / sxx;
    let b = mean_y - a * mean_x;
    Ok((a, b))
}

/// Closed-form `y ~ a*x`.
fn solve_scale(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(PdeError::DegenerateFit("scale fit needs at least 1 pixel".into()));
    }
    let sxx = numeric::sum(pairs.iter().map(|p| p.0 * p.0));
    let sxy = numeric::sum(pairs.iter().map(|p| p.0 * p.1));
    if !(sxx > 0.0) {
        return Err(PdeError::DegenerateFit("prediction is zero on the mask".into()));
    }
    Ok(sxy / sxx)
}

fn checked(params: AlignParams) -> Result<AlignParams> {
    if params.a.is_finite() && params.b.is_finite() {
        Ok(params)
    } else {
        Err(PdeError::DegenerateFit(format!(
            "non-finite alignment a={} b={}",
            params.a, params.b
        )))
    }
}

pub fn fit_scale_shift_depth(pred: &DepthMap, reference: &DepthMap, mask: &Mask) -> Result<AlignParams> {
    let (a, b) = solve_affine(&joint_pairs(pred, reference, mask)?)?;
    checked(AlignParams {
        a,
        b,
        mode: AlignMode::ScaleShiftDepth,
    })
}

pub fn fit_scale_depth(pred: &DepthMap, reference: &DepthMap, mask: &Mask) -> Result<AlignParams> {
    let a = solve_scale(&joint_pairs(pred, reference, mask)?)?;
    checked(AlignParams {
        a,
        b: 0.0,
        mode: AlignMode::ScaleDepth,
    })
}

/// Fits `a*rho + b` (or `a*rho` without `shift`) to the reference disparity `1/ref`.
pub fn fit_disparity(pred_disp: &DepthMap, reference: &DepthMap, mask: &Mask, shift: bool) -> Result<AlignParams> {
    let mut pairs = joint_pairs(pred_disp, reference, mask)?;
    for (_, r) in pairs.iter_mut() {
        if !(*r > 0.0) {
            return Err(PdeError::Data(format!(
                "reference depth {r} is not positive inside the mask"
            )));
        }
        *r = 1.0 / *r;
    }
    let params = if shift {
        let (a, b) = solve_affine(&pairs)?;
        AlignParams {
            a,
            b,
            mode: AlignMode::ScaleShiftDisparity,
        }
    } else {
        AlignParams {
            a: solve_scale(&pairs)?,
            b: 0.0,
            mode: AlignMode::ScaleDisparity,
        }
    };
    checked(params)
}

/// Fits with the given mode. `MedianNormalize` is not a fit and is rejected.
pub fn fit(pred: &DepthMap, reference: &DepthMap, mask: &Mask, mode: AlignMode) -> Result<AlignParams> {
    match mode {
        AlignMode::ScaleShiftDepth => fit_scale_shift_depth(pred, reference, mask),
        AlignMode::ScaleDepth => fit_scale_depth(pred, reference, mask),
        AlignMode::ScaleShiftDisparity => fit_disparity(pred, reference, mask, true),
        AlignMode::ScaleDisparity => fit_disparity(pred, reference, mask, false),
        AlignMode::MedianNormalize => Err(PdeError::Parameter(
            "median normalization is not a least-squares fit".into(),
        )),
    }
}

/// Applies fitted parameters and clipping; output is metric depth, or
/// normalized depth when the input already was.
pub fn apply_alignment(pred: &DepthMap, params: &AlignParams, clip: &ClipRange) -> DepthMap {
    let kind = if pred.kind() == ValueKind::NormalizedDepth || params.mode == AlignMode::MedianNormalize {
        ValueKind::NormalizedDepth
    } else {
        ValueKind::MetricDepth
    };
    apply_alignment_as(pred, params, clip, kind)
}

/// [`apply_alignment`] with an explicit output kind.
///
/// Disparity pixels with `a*rho + b <= 0` are invalidated; depth pixels that
/// end up non-positive are invalidated when clipping is off.
pub fn apply_alignment_as(pred: &DepthMap, params: &AlignParams, clip: &ClipRange, kind: ValueKind) -> DepthMap {
    let AlignParams { a, b, mode } = *params;
    if mode.is_disparity() {
        pred.map_valid(kind, |rho| {
            let s = a * rho + b;
            if s > 0.0 {
                clip.apply(1.0 / s)
            } else {
                f64::NAN
            }
        })
    } else {
        pred.map_valid(kind, |d| clip.apply(a * d + b))
    }
}

/// Divides every valid pixel by the median over the masked valid pixels.
pub fn normalize_median(pred: &DepthMap, mask: &Mask) -> Result<DepthMap> {
    if !pred.same_shape(mask) {
        return Err(PdeError::Bounds("mask shape differs from prediction".into()));
    }
    let mut vals: Vec<f64> = (0..pred.len())
        .filter(|&i| mask.bits()[i] && pred.valid()[i])
        .map(|i| pred.values()[i])
        .collect();
    let median =
        numeric::median(&mut vals).ok_or_else(|| PdeError::EmptyMask("no valid masked pixels to normalize".into()))?;
    if !(median > 0.0) {
        return Err(PdeError::DegenerateFit(format!("masked median is {median}")));
    }
    Ok(pred.map_valid(ValueKind::NormalizedDepth, |v| v / median))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(values: &[f64], kind: ValueKind) -> DepthMap {
        DepthMap::new(values.len(), 1, values.to_vec(), kind).unwrap()
    }

    fn full(n: usize) -> Mask {
        Mask::full(n, 1)
    }

    fn sse(pred: &[f64], reference: &[f64], a: f64, b: f64) -> f64 {
        pred.iter().zip(reference).map(|(p, r)| (a * p + b - r).powi(2)).sum()
    }

    #[test]
    fn exact_affine_relation() {
        let p = fit_scale_shift_depth(
            &row(&[1.0, 2.0, 3.0], ValueKind::AffineDepth),
            &row(&[3.0, 5.0, 7.0], ValueKind::MetricDepth),
            &full(3),
        )
        .unwrap();
        assert!((p.a - 2.0).abs() < 1e-12 && (p.b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_fits() {
        let d = row(&[1.0, 2.5, 4.0, 7.0], ValueKind::MetricDepth);
        let p = fit_scale_shift_depth(&d, &d, &full(4)).unwrap();
        assert!((p.a - 1.0).abs() < 1e-12 && p.b.abs() < 1e-12);
        let s = fit_scale_depth(&d, &d, &full(4)).unwrap();
        assert_eq!(s.a, 1.0);
        assert_eq!(s.b, 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let reference = row(&[1.0, 2.0, 3.0], ValueKind::MetricDepth);
        let constant = row(&[2.0, 2.0, 2.0], ValueKind::AffineDepth);
        assert!(matches!(
            fit_scale_shift_depth(&constant, &reference, &full(3)),
            Err(PdeError::DegenerateFit(_))
        ));
        let one = Mask::new(3, 1, vec![true, false, false]).unwrap();
        assert!(matches!(
            fit_scale_shift_depth(&row(&[1.0, 2.0, 3.0], ValueKind::AffineDepth), &reference, &one),
            Err(PdeError::DegenerateFit(_))
        ));
        let zeros = row(&[0.0, 0.0, 0.0], ValueKind::AffineDepth);
        assert!(matches!(
            fit_scale_depth(&zeros, &reference, &full(3)),
            Err(PdeError::DegenerateFit(_))
        ));
    }

    #[test]
    fn scale_only_proportional() {
        let p = fit_scale_depth(
            &row(&[1.0, 2.0], ValueKind::ScaleDepth),
            &row(&[3.0, 6.0], ValueKind::MetricDepth),
            &full(2),
        )
        .unwrap();
        assert!((p.a - 3.0).abs() < 1e-15);
        assert_eq!(p.b, 0.0);
    }

    #[test]
    fn random_fit_is_orthogonal_and_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pred: Vec<f64> = (0..200).map(|_| rng.random_range(0.5..5.0)).collect();
        let reference: Vec<f64> = pred
            .iter()
            .map(|p| 1.7 * p - 0.3 + rng.random_range(-0.5..0.5))
            .collect();
        let p = fit_scale_shift_depth(
            &row(&pred, ValueKind::AffineDepth),
            &row(&reference, ValueKind::MetricDepth),
            &full(200),
        )
        .unwrap();
        let residuals: Vec<f64> = pred.iter().zip(&reference).map(|(x, y)| p.a * x + p.b - y).collect();
        let s0: f64 = residuals.iter().sum();
        let s1: f64 = residuals.iter().zip(&pred).map(|(r, x)| r * x).sum();
        assert!(s0.abs() < 1e-9 && s1.abs() < 1e-9, "{s0} {s1}");

        // coarse-to-fine grid search on (a, b)
        let (mut ca, mut cb, mut step) = (1.0, 0.0, 1.0);
        for _ in 0..40 {
            let mut best = (f64::INFINITY, ca, cb);
            for i in -10..=10 {
                for j in -10..=10 {
                    let (a, b) = (ca + i as f64 * step / 10.0, cb + j as f64 * step / 10.0);
                    let e = sse(&pred, &reference, a, b);
                    if e < best.0 {
                        best = (e, a, b);
                    }
                }
            }
            ca = best.1;
            cb = best.2;
            step /= 2.0;
        }
        assert!((p.a - ca).abs() < 1e-4 && (p.b - cb).abs() < 1e-4, "{p:?} vs {ca} {cb}");

        // local optimality under +-1e-3 perturbations
        let e0 = sse(&pred, &reference, p.a, p.b);
        for (da, db) in [
            (1e-3, 0.0),
            (-1e-3, 0.0),
            (0.0, 1e-3),
            (0.0, -1e-3),
            (1e-3, 1e-3),
            (-1e-3, 1e-3),
        ] {
            assert!(sse(&pred, &reference, p.a + da, p.b + db) >= e0);
        }
    }

    #[test]
    fn scale_fit_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pred: Vec<f64> = (0..100).map(|_| rng.random_range(0.5..5.0)).collect();
        let reference: Vec<f64> = pred.iter().map(|p| 0.8 * p + rng.random_range(-0.2..0.2)).collect();
        let p = fit_scale_depth(
            &row(&pred, ValueKind::ScaleDepth),
            &row(&reference, ValueKind::MetricDepth),
            &full(100),
        )
        .unwrap();
        // coarse-to-fine 1-D grid search
        let (mut best_a, mut step) = (1.0, 1.0);
        for _ in 0..40 {
            let mut best_e = f64::INFINITY;
            let centre = best_a;
            for k in -20..=20 {
                let a = centre + k as f64 * step / 10.0;
                let e = sse(&pred, &reference, a, 0.0);
                if e < best_e {
                    best_e = e;
                    best_a = a;
                }
            }
            step /= 2.0;
        }
        assert!((p.a - best_a).abs() < 1e-4);
    }

    #[test]
    fn disparity_fits() {
        let depth = [0.5, 1.0, 2.0, 4.0];
        let reference = row(&depth, ValueKind::MetricDepth);
        let exact: Vec<f64> = depth.iter().map(|d| 1.0 / d).collect();
        let p = fit_disparity(&row(&exact, ValueKind::AffineDisparity), &reference, &full(4), true).unwrap();
        assert!((p.a - 1.0).abs() < 1e-12 && p.b.abs() < 1e-12);

        let affine: Vec<f64> = depth.iter().map(|d| 2.0 / d + 5.0).collect();
        let disp = row(&affine, ValueKind::AffineDisparity);
        let p = fit_disparity(&disp, &reference, &full(4), true).unwrap();
        assert!((p.a - 0.5).abs() < 1e-12 && (p.b + 2.5).abs() < 1e-12);
        // substitution: a*rho + b == 1/depth
        for (rho, d) in affine.iter().zip(&depth) {
            assert!((p.a * rho + p.b - 1.0 / d).abs() < 1e-12);
        }
        let aligned = apply_alignment(&disp, &p, &ClipRange::disabled());
        for (x, d) in aligned.values().iter().zip(&depth) {
            assert!(((x - d) / d).abs() < 1e-9);
        }
    }

    #[test]
    fn disparity_needs_positive_reference() {
        let reference = DepthMap::new(2, 1, vec![1.0, -2.0], ValueKind::AffineDepth).unwrap();
        let disp = row(&[1.0, 2.0], ValueKind::AffineDisparity);
        assert!(matches!(
            fit_disparity(&disp, &reference, &full(2), true),
            Err(PdeError::Data(_))
        ));
    }

    #[test]
    fn apply_clips_to_dataset_range() {
        let d = row(&[0.01, 5.0, 2000.0], ValueKind::MetricDepth);
        let out = apply_alignment(
            &d,
            &AlignParams::identity(AlignMode::ScaleShiftDepth),
            &ClipRange::default(),
        );
        assert_eq!(out.values(), &[0.1, 5.0, 1000.0]);
        let same = apply_alignment(
            &d,
            &AlignParams::identity(AlignMode::ScaleShiftDepth),
            &ClipRange::disabled(),
        );
        assert_eq!(same.values(), d.values());
    }

    #[test]
    fn apply_disparity_reciprocal_and_invalidation() {
        let rho = row(&[2.0, 4.0, -1.0], ValueKind::AffineDisparity);
        let p = AlignParams {
            a: 0.5,
            b: 0.0,
            mode: AlignMode::ScaleDisparity,
        };
        let out = apply_alignment(&rho, &p, &ClipRange::disabled());
        assert_eq!(&out.values()[..2], &[1.0, 0.5]);
        assert_eq!(out.valid(), &[true, true, false]);
        assert_eq!(out.kind(), ValueKind::MetricDepth);
    }

    #[test]
    fn median_normalization() {
        let out = normalize_median(&row(&[2.0, 4.0, 6.0], ValueKind::MetricDepth), &full(3)).unwrap();
        assert_eq!(out.values(), &[0.5, 1.0, 1.5]);
        assert_eq!(out.kind(), ValueKind::NormalizedDepth);
        let one = Mask::new(3, 1, vec![false, true, false]).unwrap();
        let out = normalize_median(&row(&[3.0, 7.0, 9.0], ValueKind::MetricDepth), &one).unwrap();
        assert_eq!(out.values()[1], 1.0);
        let out = normalize_median(&row(&[1.0, 3.0], ValueKind::MetricDepth), &full(2)).unwrap();
        assert_eq!(out.values(), &[0.5, 1.5]);
        assert!(matches!(
            normalize_median(&row(&[1.0], ValueKind::MetricDepth), &Mask::empty(1, 1)),
            Err(PdeError::EmptyMask(_))
        ));
    }

    #[test]
    fn off_mask_pixels_do_not_affect_fit() {
        let mask = Mask::new(4, 1, vec![true, true, true, false]).unwrap();
        let reference = row(&[3.0, 5.0, 7.0, 1.0], ValueKind::MetricDepth);
        let a = fit_scale_shift_depth(&row(&[1.0, 2.0, 3.0, 4.0], ValueKind::AffineDepth), &reference, &mask).unwrap();
        let b =
            fit_scale_shift_depth(&row(&[1.0, 2.0, 3.0, 400.0], ValueKind::AffineDepth), &reference, &mask).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pred: Vec<f64> = (0..50).map(|_| rng.random_range(1.0..3.0)).collect();
        let reference: Vec<f64> = (0..50).map(|_| rng.random_range(1.0..3.0)).collect();
        let p = row(&pred, ValueKind::AffineDepth);
        let base = fit_scale_shift_depth(&p, &row(&reference, ValueKind::MetricDepth), &full(50)).unwrap();
        let scaled: Vec<f64> = reference.iter().map(|r| 2.5 * r).collect();
        let s = fit_scale_shift_depth(&p, &row(&scaled, ValueKind::MetricDepth), &full(50)).unwrap();
        assert!((s.a - 2.5 * base.a).abs() < 1e-10 && (s.b - 2.5 * base.b).abs() < 1e-10);
        let shifted: Vec<f64> = reference.iter().map(|r| r + 0.75).collect();
        let t = fit_scale_shift_depth(&p, &row(&shifted, ValueKind::MetricDepth), &full(50)).unwrap();
        assert!((t.a - base.a).abs() < 1e-10 && (t.b - base.b - 0.75).abs() < 1e-10);
        let sb = fit_scale_depth(&p, &row(&reference, ValueKind::MetricDepth), &full(50)).unwrap();
        let ss = fit_scale_depth(&p, &row(&scaled, ValueKind::MetricDepth), &full(50)).unwrap();
        assert!((ss.a - 2.5 * sb.a).abs() < 1e-10);
    }
}
