use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::depthio::{CameraModel, Category};
use crate::error::{PdeError, Result};
use crate::numeric::exact_sin_cos;

/// Largest fixture side length accepted by the renderer.
pub const MAX_SIDE: usize = 4096;

/// Closed-form primitive, in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    /// Axis-aligned box.
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
    /// Points `x` with `normal . x = offset`.
    Plane {
        normal: [f64; 3],
        offset: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Object,
    Background,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    pub role: Role,
}

impl Primitive {
    pub fn object(shape: Shape) -> Self {
        Primitive {
            shape,
            role: Role::Object,
        }
    }

    pub fn background(shape: Shape) -> Self {
        Primitive {
            shape,
            role: Role::Background,
        }
    }
}

/// A synthetic scene: primitives, a pinhole camera and the image size.
///
/// `roll` is an extra rotation about the optical axis kept apart from the
/// camera so that opposite rolls cancel exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub primitives: Vec<Primitive>,
    pub camera: CameraModel,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub roll: f64,
}

pub(crate) fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

pub(crate) fn arr(v: Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Rotation about the camera z axis.
pub(crate) fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = exact_sin_cos(angle);
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

impl Shape {
    fn validate(&self) -> Result<()> {
        let finite = |a: &[f64]| a.iter().all(|v| v.is_finite());
        match self {
            Shape::Sphere { center, radius } => {
                if !finite(center) || !(radius.is_finite() && *radius > 0.0) {
                    return Err(PdeError::Parameter(format!("bad sphere {center:?} r={radius}")));
                }
            }
            Shape::Box { min, max } => {
                if !finite(min) || !finite(max) || (0..3).any(|i| min[i] >= max[i]) {
                    return Err(PdeError::Parameter(format!("bad box {min:?}..{max:?}")));
                }
            }
            Shape::Plane { normal, offset } => {
                if !finite(normal) || !offset.is_finite() || v3(*normal).norm() == 0.0 {
                    return Err(PdeError::Parameter(format!("bad plane n={normal:?}")));
                }
            }
        }
        Ok(())
    }

    /// Whether `p` lies strictly inside the solid (planes have no inside).
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        match self {
            Shape::Sphere { center, radius } => (p - v3(*center)).norm() < *radius,
            Shape::Box { min, max } => (0..3).all(|i| p[i] > min[i] && p[i] < max[i]),
            Shape::Plane { .. } => false,
        }
    }

    /// Centre of a bounded primitive.
    pub fn center(&self) -> Option<Vector3<f64>> {
        match self {
            Shape::Sphere { center, .. } => Some(v3(*center)),
            Shape::Box { min, max } => Some((v3(*min) + v3(*max)) / 2.0),
            Shape::Plane { .. } => None,
        }
    }

    /// Smallest ray parameter `t > eps` at which `origin + t dir` hits the surface.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        const EPS: f64 = 1e-9;
        match self {
            Shape::Sphere { center, radius } => {
                let oc = origin - v3(*center);
                let a = dir.dot(dir);
                let half_b = oc.dot(dir);
                let c = oc.dot(&oc) - radius * radius;
                let disc = half_b * half_b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let root = disc.sqrt();
                [(-half_b - root) / a, (-half_b + root) / a]
                    .into_iter()
                    .find(|&t| t > EPS)
            }
            Shape::Box { min, max } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for i in 0..3 {
                    if dir[i] == 0.0 {
                        if origin[i] < min[i] || origin[i] > max[i] {
                            return None;
                        }
                        continue;
                    }
                    let a = (min[i] - origin[i]) / dir[i];
                    let b = (max[i] - origin[i]) / dir[i];
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
                if t0 > t1 {
                    None
                } else if t0 > EPS {
                    Some(t0)
                } else if t1 > EPS {
                    Some(t1)
                } else {
                    None
                }
            }
            Shape::Plane { normal, offset } => {
                let n = v3(*normal);
                let denom = n.dot(dir);
                if denom == 0.0 {
                    return None;
                }
                let t = (offset - n.dot(origin)) / denom;
                (t > EPS && t.is_finite()).then_some(t)
            }
        }
    }
}

/// World-to-camera rotation looking from `eye` at `target`, with image rows
/// running along world +y.
pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>) -> Matrix3<f64> {
    let z = (target - eye).normalize();
    let x = Vector3::new(0.0, 1.0, 0.0).cross(&z).normalize();
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.width > MAX_SIDE || self.height > MAX_SIDE {
            return Err(PdeError::Parameter(format!(
                "image size {}x{} outside 1..={MAX_SIDE}",
                self.width, self.height
            )));
        }
        self.camera.validate()?;
        if !self.roll.is_finite() {
            return Err(PdeError::Parameter("roll must be finite".into()));
        }
        if !self.primitives.iter().any(|p| p.role == Role::Object) {
            return Err(PdeError::Parameter("scene has no object primitive".into()));
        }
        let c = self.camera.center();
        for (i, p) in self.primitives.iter().enumerate() {
            p.shape.validate()?;
            if p.shape.contains(&c) {
                return Err(PdeError::Parameter(format!("camera centre lies inside primitive {i}")));
            }
        }
        Ok(())
    }

    /// The camera with `roll` folded into its rotation.
    pub fn effective_camera(&self) -> CameraModel {
        if self.roll == 0.0 {
            return self.camera.clone();
        }
        let rz_t = rot_z(self.roll).transpose();
        CameraModel {
            rotation: rz_t * self.camera.rotation,
            translation: rz_t * self.camera.translation,
            ..self.camera.clone()
        }
    }

    /// Mean centre of the bounded object primitives.
    pub fn object_anchor(&self) -> Result<Vector3<f64>> {
        let centers: Vec<Vector3<f64>> = self
            .primitives
            .iter()
            .filter(|p| p.role == Role::Object)
            .filter_map(|p| p.shape.center())
            .collect();
        if centers.is_empty() {
            return Err(PdeError::Parameter(
                "object has no bounded primitive to anchor on".into(),
            ));
        }
        Ok(centers.iter().sum::<Vector3<f64>>() / centers.len() as f64)
    }

    /// Camera-frame z of the object anchor.
    pub fn anchor_depth(&self) -> Result<f64> {
        Ok(self.camera.to_camera(&self.object_anchor()?).z)
    }

    /// A desk-scale scene: one object about 3 m ahead over a floor plane,
    /// with open sky above the horizon. The object shape depends on `category`.
    pub fn desk(category: Category, width: usize, height: usize, rng_seed: u64) -> Result<Self> {
        let sphere = |c: [f64; 3], r: f64| Primitive::object(Shape::Sphere { center: c, radius: r });
        let cuboid = |min: [f64; 3], max: [f64; 3]| Primitive::object(Shape::Box { min, max });
        let mut primitives = match category {
            Category::Chair => vec![
                cuboid([-0.35, 0.0, 2.8], [0.35, 0.12, 3.4]),
                cuboid([-0.35, -0.6, 3.3], [0.35, 0.0, 3.4]),
            ],
            Category::Desk => vec![cuboid([-0.55, -0.05, 2.7], [0.55, 0.05, 3.4])],
            Category::Cabinet => vec![cuboid([-0.3, -0.55, 2.9], [0.3, 0.55, 3.3])],
            Category::Fish => vec![sphere([-0.15, 0.0, 3.0], 0.3), sphere([0.25, 0.0, 3.05], 0.18)],
            Category::Cactus => vec![
                sphere([0.0, 0.0, 3.0], 0.35),
                cuboid([-0.08, -0.65, 2.92], [0.08, -0.3, 3.08]),
            ],
        };
        primitives.push(Primitive::background(Shape::Plane {
            normal: [0.0, 1.0, 0.0],
            offset: 0.8,
        }));
        let mut spec = SceneSpec {
            primitives,
            camera: CameraModel::looking_forward(1.0, 1.0, 0.0, 0.0, Vector3::zeros())?,
            width,
            height,
            rng_seed,
            roll: 0.0,
        };
        // oblique view from above and to the side, so no face is fronto-parallel
        let f = width.max(height) as f64;
        let center = Vector3::new(0.6, -0.9, 0.4);
        let rotation = look_at(&center, &spec.object_anchor()?);
        spec.camera = CameraModel::new(
            f,
            f,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            rotation,
            -(rotation * center),
        )?;
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_and_box_intersections() {
        let s = Shape::Sphere {
            center: [0.0, 0.0, 5.0],
            radius: 1.0,
        };
        let o = Vector3::zeros();
        assert_eq!(s.intersect(&o, &Vector3::new(0.0, 0.0, 1.0)), Some(4.0));
        assert_eq!(s.intersect(&o, &Vector3::new(1.0, 0.0, 1.0)), None);
        let b = Shape::Box {
            min: [-1.0, -1.0, 2.0],
            max: [1.0, 1.0, 3.0],
        };
        assert_eq!(b.intersect(&o, &Vector3::new(0.0, 0.0, 1.0)), Some(2.0));
        assert!(b.contains(&Vector3::new(0.0, 0.0, 2.5)));
        let p = Shape::Plane {
            normal: [0.0, 0.0, 1.0],
            offset: 5.0,
        };
        assert_eq!(p.intersect(&o, &Vector3::new(0.3, -0.2, 1.0)), Some(5.0));
    }

    #[test]
    fn presets_are_valid_and_serde_round_trips() {
        for cat in Category::ALL {
            let spec = SceneSpec::desk(cat, 32, 24, 1).unwrap();
            let text = serde_json::to_string(&spec).unwrap();
            let back: SceneSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn validation_rejects_camera_inside() {
        let mut spec = SceneSpec::desk(Category::Fish, 16, 16, 0).unwrap();
        spec.primitives.push(Primitive::background(Shape::Sphere {
            center: arr(spec.camera.center()),
            radius: 0.1,
        }));
        assert!(spec.validate().is_err());
        spec.primitives.retain(|p| p.role == Role::Background);
        assert!(spec.validate().is_err());
    }
}
