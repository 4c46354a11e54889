use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use super::render::render_depth;
use super::scene::{arr, v3, Primitive, Role, SceneSpec, Shape};
use crate::depthio::{CameraModel, Mask};
use crate::error::{PdeError, Result};
use crate::numeric::exact_sin_cos;

/// In-plane rigid pixel transform `x' = R(angle) x + (tx, ty)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se2Transform {
    pub angle: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Se2Transform {
    pub fn new(angle: f64, tx: f64, ty: f64) -> Result<Self> {
        if !(angle.is_finite() && tx.is_finite() && ty.is_finite()) {
            return Err(PdeError::Parameter("SE(2) parameters must be finite".into()));
        }
        Ok(Se2Transform { angle, tx, ty })
    }

    /// Image motion induced by rolling the camera by `roll`: content turns by
    /// `-roll` about the principal point.
    pub fn from_roll(roll: f64, principal_point: (f64, f64)) -> Result<Self> {
        let (s, c) = exact_sin_cos(-roll);
        let (cx, cy) = principal_point;
        Self::new(-roll, cx - (c * cx - s * cy), cy - (s * cx + c * cy))
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = exact_sin_cos(self.angle);
        (c * x - s * y + self.tx, s * x + c * y + self.ty)
    }

    pub fn inverse(&self) -> Se2Transform {
        let (s, c) = exact_sin_cos(-self.angle);
        Se2Transform {
            angle: -self.angle,
            tx: -(c * self.tx - s * self.ty),
            ty: -(s * self.tx + c * self.ty),
        }
    }
}

/// Rolls the camera about its optical axis by `angle`, keeping its centre.
///
/// Requires square pixels (`fx == fy`); otherwise the image motion is not a
/// rotation.
pub fn perturb_roll(spec: &SceneSpec, angle: f64) -> Result<SceneSpec> {
    if !(angle.is_finite() && angle.abs() < PI) {
        return Err(PdeError::Parameter(format!("roll angle {angle} outside (-pi, pi)")));
    }
    if spec.camera.fx != spec.camera.fy {
        return Err(PdeError::Parameter("camera roll needs fx == fy".into()));
    }
    let mut out = spec.clone();
    out.roll += angle;
    Ok(out)
}

/// `Rx(tilt) * Ry(pan)` in the camera frame.
pub fn pan_tilt_rotation(pan: f64, tilt: f64) -> Matrix3<f64> {
    let (sp, cp) = exact_sin_cos(pan);
    let (st, ct) = exact_sin_cos(tilt);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, ct, -st, 0.0, st, ct);
    rx * ry
}

/// Homography `K R_rel K^-1` that maps base pixels to pan/tilt variant pixels.
pub fn pan_tilt_homography(camera: &CameraModel, pan: f64, tilt: f64) -> Matrix3<f64> {
    let k = camera.intrinsic_matrix();
    let k_inv = k.try_inverse().expect("positive focal lengths");
    k * pan_tilt_rotation(pan, tilt) * k_inv
}

/// Turns the camera about its centre: pan about camera Y, then tilt about X.
/// Rejected when the rendered object is empty or touches the image border.
pub fn perturb_pan_tilt(spec: &SceneSpec, pan: f64, tilt: f64) -> Result<SceneSpec> {
    if !(pan.is_finite() && tilt.is_finite()) {
        return Err(PdeError::Parameter("pan/tilt angles must be finite".into()));
    }
    if pan == 0.0 && tilt == 0.0 {
        return Ok(spec.clone());
    }
    let base = spec.effective_camera();
    let r_rel = pan_tilt_rotation(pan, tilt);
    let camera = CameraModel {
        rotation: r_rel * base.rotation,
        translation: r_rel * base.translation,
        ..base
    };
    let out = SceneSpec {
        camera,
        roll: 0.0,
        ..spec.clone()
    };
    let mask = render_depth(&out)?.object_mask;
    if mask.is_all_false() || touches_border(&mask) {
        return Err(PdeError::Rejected(format!(
            "pan {pan:.4} / tilt {tilt:.4} moves the object out of the frame"
        )));
    }
    Ok(out)
}

pub(crate) fn touches_border(mask: &Mask) -> bool {
    let (w, h) = (mask.width(), mask.height());
    (0..w).any(|x| mask.get(x, 0) || mask.get(x, h - 1)) || (0..h).any(|y| mask.get(0, y) || mask.get(w - 1, y))
}

fn check_camera_outside(spec: &SceneSpec, what: &str) -> Result<()> {
    let c = spec.camera.center();
    if spec.primitives.iter().any(|p| p.shape.contains(&c)) {
        return Err(PdeError::Rejected(format!("{what}: camera would enter the geometry")));
    }
    Ok(())
}

/// Multiplies the focal length by `focal_ratio` and moves the camera along its
/// optical axis so the object anchor depth `z` becomes `z * focal_ratio`.
pub fn perturb_dolly_zoom(spec: &SceneSpec, focal_ratio: f64) -> Result<SceneSpec> {
    if !(focal_ratio.is_finite() && focal_ratio > 0.0) {
        return Err(PdeError::Parameter(format!(
            "focal ratio {focal_ratio} must be positive"
        )));
    }
    if focal_ratio == 1.0 {
        return Ok(spec.clone());
    }
    let z = spec.anchor_depth()?;
    if z <= 0.0 {
        return Err(PdeError::Rejected("object anchor is behind the camera".into()));
    }
    let cam = &spec.camera;
    let center = cam.center() - cam.optical_axis() * (z * (focal_ratio - 1.0));
    let mut camera = cam.with_center(center);
    camera.fx *= focal_ratio;
    camera.fy *= focal_ratio;
    let out = SceneSpec { camera, ..spec.clone() };
    check_camera_outside(&out, "dolly zoom")?;
    Ok(out)
}

fn scale_about(p: [f64; 3], anchor: &Vector3<f64>, s: f64) -> [f64; 3] {
    arr(anchor + (v3(p) - anchor) * s)
}

/// Scales every object primitive by `s` about the object anchor and moves the
/// camera centre to `anchor + s (C - anchor)`. Object pixels keep their rays,
/// so the object mask is unchanged and object depths scale by `s`.
pub fn perturb_resize_object(spec: &SceneSpec, s: f64) -> Result<SceneSpec> {
    if !(s.is_finite() && s > 0.0) {
        return Err(PdeError::Parameter(format!("resize factor {s} must be positive")));
    }
    if s == 1.0 {
        return Ok(spec.clone());
    }
    let anchor = spec.object_anchor()?;
    let primitives = spec
        .primitives
        .iter()
        .map(|p| {
            if p.role != Role::Object {
                return p.clone();
            }
            let shape = match &p.shape {
                Shape::Sphere { center, radius } => Shape::Sphere {
                    center: scale_about(*center, &anchor, s),
                    radius: radius * s,
                },
                Shape::Box { min, max } => Shape::Box {
                    min: scale_about(*min, &anchor, s),
                    max: scale_about(*max, &anchor, s),
                },
                Shape::Plane { normal, offset } => Shape::Plane {
                    normal: *normal,
                    offset: s * offset + (1.0 - s) * v3(*normal).dot(&anchor),
                },
            };
            Primitive { shape, role: p.role }
        })
        .collect();
    let center = anchor + (spec.camera.center() - anchor) * s;
    let out = SceneSpec {
        primitives,
        camera: spec.camera.with_center(center),
        ..spec.clone()
    };
    check_camera_outside(&out, "object resizing")?;
    Ok(out)
}

/// Moves the object primitives by `offset` meters.
pub fn translate_object(spec: &SceneSpec, offset: [f64; 3]) -> Result<SceneSpec> {
    let d = v3(offset);
    let mut out = spec.clone();
    for p in out.primitives.iter_mut().filter(|p| p.role == Role::Object) {
        p.shape = match &p.shape {
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: arr(v3(*center) + d),
                radius: *radius,
            },
            Shape::Box { min, max } => Shape::Box {
                min: arr(v3(*min) + d),
                max: arr(v3(*max) + d),
            },
            Shape::Plane { normal, offset } => Shape::Plane {
                normal: *normal,
                offset: offset + v3(*normal).dot(&d),
            },
        };
    }
    check_camera_outside(&out, "object translation")?;
    out.validate()?;
    Ok(out)
}

/// Adds a non-object box, e.g. an occluder between camera and object.
pub fn add_occluder(spec: &SceneSpec, min: [f64; 3], max: [f64; 3]) -> Result<SceneSpec> {
    let mut out = spec.clone();
    out.primitives.push(Primitive::background(Shape::Box { min, max }));
    out.validate()
        .map_err(|e| PdeError::Rejected(format!("occluder: {e}")))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthio::{Category, Shaped};
    use crate::geom::render::{project_point, render_depth};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn bbox(mask: &Mask) -> (usize, usize, usize, usize) {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                if mask.get(x, y) {
                    x0 = x0.min(x);
                    x1 = x1.max(x);
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                }
            }
        }
        (x0, y0, x1, y1)
    }

    fn sphere_scene(n: usize) -> SceneSpec {
        let c = (n as f64 - 1.0) / 2.0;
        let mut spec = SceneSpec::desk(Category::Fish, n, n, 3).unwrap();
        spec.camera = CameraModel::looking_forward(n as f64, n as f64, c, c, Vector3::zeros()).unwrap();
        spec.primitives = vec![
            Primitive::object(Shape::Sphere {
                center: [0.05, -0.02, 3.0],
                radius: 0.4,
            }),
            Primitive::background(Shape::Plane {
                normal: [0.0, 1.0, 0.0],
                offset: 0.8,
            }),
        ];
        spec
    }

    #[test]
    fn identities() {
        let spec = sphere_scene(24);
        assert_eq!(perturb_roll(&spec, 0.0).unwrap(), spec);
        assert_eq!(perturb_pan_tilt(&spec, 0.0, 0.0).unwrap(), spec);
        assert_eq!(perturb_dolly_zoom(&spec, 1.0).unwrap(), spec);
        assert_eq!(perturb_resize_object(&spec, 1.0).unwrap(), spec);
        let h = pan_tilt_homography(&spec.camera, 0.0, 0.0);
        assert!((h - Matrix3::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn quarter_roll_is_exact_grid_rotation() {
        let n = 33;
        let spec = sphere_scene(n);
        let base = render_depth(&spec).unwrap();
        let var = render_depth(&perturb_roll(&spec, FRAC_PI_2).unwrap()).unwrap();
        let c = (n as f64 - 1.0) / 2.0;
        for y in 0..n {
            for x in 0..n {
                let (dx, dy) = (x as f64 - c, y as f64 - c);
                let (bx, by) = ((c - dy) as usize, (c + dx) as usize);
                assert_eq!(var.depth.value(x, y).to_bits(), base.depth.value(bx, by).to_bits());
                assert_eq!(var.object_mask.get(x, y), base.object_mask.get(bx, by));
            }
        }
    }

    #[test]
    fn roll_and_back_is_bit_identical() {
        let spec = sphere_scene(20);
        let there = perturb_roll(&spec, 0.37).unwrap();
        let back = perturb_roll(&there, -0.37).unwrap();
        assert_eq!(render_depth(&back).unwrap(), render_depth(&spec).unwrap());
    }

    #[test]
    fn roll_preserves_camera_depth_of_points() {
        let spec = sphere_scene(20);
        let rolled = perturb_roll(&spec, 0.6).unwrap();
        let pp = spec.camera.principal_point();
        let motion = Se2Transform::from_roll(0.6, pp).unwrap();
        for p in [[0.1, 0.2, 2.9], [-0.3, 0.1, 3.2], [0.0, -0.25, 2.7]] {
            let (u, v, z) = project_point(&spec, &v3(p)).unwrap();
            let (u2, v2, z2) = project_point(&rolled, &v3(p)).unwrap();
            assert!((z - z2).abs() < 1e-12);
            let (eu, ev) = motion.apply(u, v);
            assert!((eu - u2).abs() < 1e-9 && (ev - v2).abs() < 1e-9);
            let (iu, iv) = motion.inverse().apply(u2, v2);
            assert!((iu - u).abs() < 1e-9 && (iv - v).abs() < 1e-9);
        }
    }

    #[test]
    fn pan_depth_of_axis_point() {
        let mut spec = sphere_scene(20);
        spec.primitives[0] = Primitive::object(Shape::Sphere {
            center: [0.0, 0.0, 5.0],
            radius: 0.3,
        });
        let theta = 0.05;
        let panned = perturb_pan_tilt(&spec, theta, 0.0).unwrap();
        let (_, _, z) = project_point(&panned, &Vector3::new(0.0, 0.0, 5.0)).unwrap();
        assert!((z - 5.0 * theta.cos()).abs() < 1e-12);
    }

    #[test]
    fn pan_tilt_rejects_leaving_object() {
        let spec = sphere_scene(20);
        assert!(matches!(perturb_pan_tilt(&spec, 0.9, 0.0), Err(PdeError::Rejected(_))));
    }

    #[test]
    fn dolly_zoom_doubles_anchor_depth_and_keeps_extent() {
        let spec = sphere_scene(64);
        for ratio in [2.0, 0.5] {
            let z0 = spec.anchor_depth().unwrap();
            let var = perturb_dolly_zoom(&spec, ratio).unwrap();
            assert!((var.anchor_depth().unwrap() - ratio * z0).abs() < 1e-12);
            let a = bbox(&render_depth(&spec).unwrap().object_mask);
            let b = bbox(&render_depth(&var).unwrap().object_mask);
            let (wa, wb) = (a.2 - a.0, b.2 - b.0);
            assert!(wa.abs_diff(wb) <= 1, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn dolly_zoom_rejects_entering_geometry() {
        let mut spec = sphere_scene(16);
        spec.primitives.push(Primitive::background(Shape::Box {
            min: [-1.0, -1.0, -5.0],
            max: [1.0, 1.0, -1.0],
        }));
        assert!(matches!(perturb_dolly_zoom(&spec, 2.0), Err(PdeError::Rejected(_))));
    }

    #[test]
    fn resize_keeps_mask_and_scales_depth() {
        let spec = SceneSpec::desk(Category::Cactus, 48, 40, 0).unwrap();
        let base = render_depth(&spec).unwrap();
        let var = render_depth(&perturb_resize_object(&spec, 1.5).unwrap()).unwrap();
        assert_eq!(var.object_mask, base.object_mask);
        for i in 0..base.depth.len() {
            if base.object_mask.bits()[i] {
                let (b, v) = (base.depth.values()[i], var.depth.values()[i]);
                assert!((v - 1.5 * b).abs() <= 1e-12 * v, "{v} vs {}", 1.5 * b);
            }
        }
        assert_eq!(var.depth.shape(), base.depth.shape());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn pan_tilt_matches_homography(pan in -0.08f64..0.08, tilt in -0.08f64..0.08) {
            let spec = sphere_scene(40);
            let var_spec = perturb_pan_tilt(&spec, pan, tilt).unwrap();
            let var = render_depth(&var_spec).unwrap();
            let h = pan_tilt_homography(&spec.camera, pan, tilt);
            let base = render_depth(&spec).unwrap();
            let r_rel = pan_tilt_rotation(pan, tilt);
            for (x, y) in [(20usize, 20usize), (17, 22), (23, 18)] {
                prop_assume!(base.object_mask.get(x, y));
                let z = base.depth.value(x, y);
                let p_cam = spec.camera.back_project(x as f64, y as f64, z);
                let world = spec.camera.rotation.transpose() * (p_cam - spec.camera.translation);
                let (u, v, z2) = project_point(&var_spec, &world).unwrap();
                let q = h * Vector3::new(x as f64, y as f64, 1.0);
                prop_assert!((q.x / q.z - u).abs() < 1e-6 && (q.y / q.z - v).abs() < 1e-6);
                prop_assert!((z2 - (r_rel * p_cam).z).abs() < 1e-9);
                // the surface point the variant render sees at the nearest
                // pixel maps back through the homography onto that pixel
                let (ru, rv) = (u.round() as usize, v.round() as usize);
                prop_assert!((ru as f64 - u).abs() <= 0.5 && (rv as f64 - v).abs() <= 0.5);
                let zr = var.depth.value(ru, rv);
                let seen = var_spec.camera.back_project(ru as f64, rv as f64, zr);
                let seen_world = var_spec.camera.rotation.transpose() * (seen - var_spec.camera.translation);
                let (bu, bv, _) = project_point(&spec, &seen_world).unwrap();
                let hb = h * Vector3::new(bu, bv, 1.0);
                prop_assert!((hb.x / hb.z - ru as f64).abs() < 1e-6 && (hb.y / hb.z - rv as f64).abs() < 1e-6);
            }
        }
    }
}
