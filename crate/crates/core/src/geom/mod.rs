//! Synthetic fixtures: a pinhole ray caster over closed-form primitives and
//! analytic camera/object perturbations with known effects on depth.
//!
//! Depth is camera-frame z (not ray length), which makes camera roll exactly
//! depth-preserving.

mod fixture;
mod perturb;
mod render;
mod scene;

pub use fixture::{
    demo_synth_spec, make_fixture_group, synthesize, PlanEntry, PseudoPrediction, SynthGroup, SynthSpec,
};
pub use perturb::{
    add_occluder, pan_tilt_homography, pan_tilt_rotation, perturb_dolly_zoom, perturb_pan_tilt, perturb_resize_object,
    perturb_roll, translate_object, Se2Transform,
};
pub use render::{project_point, render_depth, Rendered};
pub use scene::{Primitive, Role, SceneSpec, Shape, MAX_SIDE};
