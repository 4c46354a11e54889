//! Least-squares alignment of relative predictions to metric ground truth.
//!
//! An affine-invariant depth model and an affine-invariant disparity model
//! are simulated from the same ground truth; each is fitted in its own domain
//! and then scored.

use pde::align::{apply_alignment, fit, AlignMode, ClipRange};
use pde::depthio::{DepthMap, Mask, ValueKind};
use pde::metrics::{abs_rel, delta_threshold};

fn main() -> pde::Result<()> {
    let (w, h) = (16, 12);
    let gt_values: Vec<f64> = (0..w * h)
        .map(|i| 1.5 + 0.1 * (i % w) as f64 + 0.05 * (i / w) as f64)
        .collect();
    let gt = DepthMap::new(w, h, gt_values, ValueKind::MetricDepth)?;
    let mask = Mask::full(w, h);

    let depth = gt.map_valid(ValueKind::AffineDepth, |d| 0.4 * d - 0.3);
    let disparity = gt.map_valid(ValueKind::AffineDisparity, |d| 2.5 / d + 0.1);

    for (name, pred, modes) in [
        (
            "affine depth",
            &depth,
            [AlignMode::ScaleShiftDepth, AlignMode::ScaleDepth],
        ),
        (
            "affine disparity",
            &disparity,
            [AlignMode::ScaleShiftDisparity, AlignMode::ScaleDisparity],
        ),
    ] {
        for mode in modes {
            let params = fit(pred, &gt, &mask, mode)?;
            let aligned = apply_alignment(pred, &params, &ClipRange::default());
            println!(
                "{name:17} {mode:?}: a = {:+.6}, b = {:+.6}, AbsRel = {:.3e}, delta1 = {:.1}%",
                params.a,
                params.b,
                abs_rel(&aligned, &gt, &mask)?,
                delta_threshold(&aligned, &gt, &mask, 1.25)?
            );
        }
    }
    Ok(())
}
