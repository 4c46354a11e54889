use nalgebra::Vector3;
use rayon::prelude::*;

use super::scene::{rot_z, Role, SceneSpec};
use crate::depthio::{DepthMap, Mask, ValueKind};
use crate::error::Result;
use crate::numeric::exact_sin_cos;

/// Ground truth produced by [`render_depth`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    /// Camera-frame z-depth; `+inf` where the ray hits nothing.
    pub depth: DepthMap,
    pub object_mask: Mask,
    /// Pixels whose ray escapes the scene.
    pub background: Mask,
}

/// Casts one ray per pixel centre and records the z-depth of the first hit.
///
/// The ray direction is `R^T (x_c, y_c, 1)` with `x_c = (u - cx) / fx`, so the
/// ray parameter of a hit equals its camera-frame depth.
pub fn render_depth(spec: &SceneSpec) -> Result<Rendered> {
    spec.validate()?;
    let cam = &spec.camera;
    let origin = cam.center();
    let rt = cam.rotation.transpose();
    let roll = (spec.roll != 0.0).then(|| exact_sin_cos(spec.roll));
    let (w, h) = (spec.width, spec.height);

    let rows: Vec<Vec<(f64, bool)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let mut xc = (x as f64 - cam.cx) / cam.fx;
                    let mut yc = (y as f64 - cam.cy) / cam.fy;
                    if let Some((s, c)) = roll {
                        (xc, yc) = (c * xc - s * yc, s * xc + c * yc);
                    }
                    let dir = rt * Vector3::new(xc, yc, 1.0);
                    let mut best = (f64::INFINITY, false);
                    for p in &spec.primitives {
                        if let Some(t) = p.shape.intersect(&origin, &dir) {
                            if t < best.0 {
                                best = (t, p.role == Role::Object);
                            }
                        }
                    }
                    best
                })
                .collect()
        })
        .collect();

    let flat: Vec<(f64, bool)> = rows.into_iter().flatten().collect();
    let depth = DepthMap::new(w, h, flat.iter().map(|p| p.0).collect(), ValueKind::MetricDepth)?;
    let object_mask = Mask::new(w, h, flat.iter().map(|p| p.1).collect())?;
    let background = Mask::new(w, h, flat.iter().map(|p| p.0.is_infinite()).collect())?;
    Ok(Rendered {
        depth,
        object_mask,
        background,
    })
}

/// Projects a world point through the scene's effective camera (roll included).
pub fn project_point(spec: &SceneSpec, world: &Vector3<f64>) -> Option<(f64, f64, f64)> {
    let cam = &spec.camera;
    let p = rot_z(spec.roll).transpose() * cam.to_camera(world);
    cam.project_camera(&p).map(|(u, v)| (u, v, p.z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthio::{CameraModel, Category, Shaped};
    use crate::geom::scene::{Primitive, Shape};

    fn camera(w: usize, h: usize, f: f64) -> CameraModel {
        CameraModel::looking_forward(
            f,
            f * 1.1,
            (w as f64 - 1.0) / 2.0,
            (h as f64 - 1.0) / 2.0,
            Vector3::zeros(),
        )
        .unwrap()
    }

    #[test]
    fn fronto_parallel_plane_is_constant() {
        let spec = SceneSpec {
            primitives: vec![Primitive::object(Shape::Plane {
                normal: [0.0, 0.0, 1.0],
                offset: 5.0,
            })],
            camera: camera(12, 9, 7.0),
            width: 12,
            height: 9,
            rng_seed: 0,
            roll: 0.0,
        };
        let r = render_depth(&spec).unwrap();
        assert!(r.depth.values().iter().all(|&d| (d - 5.0).abs() < 1e-12));
        assert_eq!(r.object_mask.count(), 108);
        assert!(r.background.is_all_false());
    }

    #[test]
    fn sphere_principal_ray_depth() {
        let spec = SceneSpec {
            primitives: vec![Primitive::object(Shape::Sphere {
                center: [0.0, 0.0, 5.0],
                radius: 1.0,
            })],
            camera: camera(11, 11, 20.0),
            width: 11,
            height: 11,
            rng_seed: 0,
            roll: 0.0,
        };
        let r = render_depth(&spec).unwrap();
        assert_eq!(r.depth.value(5, 5), 4.0);
        assert!(r.background.get(0, 0));
        assert!(!r.depth.is_valid(0, 0));
        let p = project_point(&spec, &Vector3::new(0.0, 0.0, 4.0)).unwrap();
        assert_eq!(p, (5.0, 5.0, 4.0));
    }

    #[test]
    fn rendering_is_deterministic() {
        let spec = SceneSpec::desk(Category::Cactus, 40, 30, 9).unwrap();
        let a = render_depth(&spec).unwrap();
        let b = render_depth(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.depth.shape(), (40, 30));
        assert!(a.object_mask.count() > 0 && a.background.count() > 0);
    }
}
