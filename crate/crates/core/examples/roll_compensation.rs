//! Rotates a rendered prediction back after a camera roll and compares it
//! with the base view.
//!
//! Quarter turns about an on-grid principal point are exact; other angles
//! resample bilinearly and lose the pixels whose footprint leaves the image.

use pde::depthio::Category;
use pde::geom::{perturb_roll, render_depth, SceneSpec};
use pde::metrics::abs_rel;
use pde::robust::compensate_roll;

fn main() -> pde::Result<()> {
    let base_spec = SceneSpec::desk(Category::Fish, 49, 49, 0)?;
    let base = render_depth(&base_spec)?;
    let pp = base_spec.camera.principal_point();
    for deg in [90.0f64, 45.0, 17.0, -5.0] {
        let angle = deg.to_radians();
        let rolled = render_depth(&perturb_roll(&base_spec, angle)?)?;
        let (back, back_mask) = compensate_roll(&rolled.depth, &rolled.object_mask, angle, pp)?;
        let joint = base.object_mask.and(&back_mask)?;
        println!(
            "{deg:6.1} deg: {} of {} object px survive, AbsRel vs base {:.4}",
            joint.count(),
            base.object_mask.count(),
            abs_rel(&back, &base.depth, &joint)?
        );
    }
    Ok(())
}
