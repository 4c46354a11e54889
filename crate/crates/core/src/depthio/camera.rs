//! Pinhole camera with a world-to-camera rigid transform.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{PdeError, Result};

/// Pinhole intrinsics `(fx, fy, cx, cy)` in pixels plus the world-to-camera
/// transform `p_cam = rotation * p_world + translation`.
///
/// Pixel centres sit at integer coordinates, so a centred principal point on
/// a `W x H` image is `((W-1)/2, (H-1)/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraRaw", into = "CameraRaw")]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

const ORTHONORMAL_TOL: f64 = 1e-9;

impl CameraModel {
    /// Validates focal lengths and that `rotation` is a proper rotation.
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let cam = CameraModel {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `center` with identity orientation (looking down +z).
    pub fn looking_forward(fx: f64, fy: f64, cx: f64, cy: f64, center: Vector3<f64>) -> Result<Self> {
        Self::new(fx, fy, cx, cy, Matrix3::identity(), -center)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(PdeError::Parameter(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() || self.translation.iter().any(|v| !v.is_finite()) {
            return Err(PdeError::Parameter("camera parameters must be finite".into()));
        }
        let err = (self.rotation.transpose() * self.rotation - Matrix3::identity())
            .abs()
            .max();
        if !(err <= ORTHONORMAL_TOL) {
            return Err(PdeError::Parameter(format!(
                "rotation is not orthonormal (max |R^T R - I| = {err:e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(PdeError::Parameter(format!("rotation determinant is {det}")));
        }
        Ok(())
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Optical axis (+z of the camera) in world coordinates.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    /// Moves the camera centre, keeping the orientation.
    pub fn with_center(&self, center: Vector3<f64>) -> CameraModel {
        CameraModel {
            translation: -(self.rotation * center),
            ..self.clone()
        }
    }

    pub fn intrinsic_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }

    /// Projects a camera-frame point; `None` behind the camera.
    pub fn project_camera(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Camera-frame point at z-depth `depth` along pixel `(u, v)`.
    pub fn back_project(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx * depth, (v - self.cy) / self.fy * depth, depth)
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }
}

/// On-disk form: rotation as three rows.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraRaw {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl TryFrom<CameraRaw> for CameraModel {
    type Error = PdeError;

    fn try_from(raw: CameraRaw) -> Result<Self> {
        let r = raw.rotation;
        CameraModel::new(
            raw.fx,
            raw.fy,
            raw.cx,
            raw.cy,
            Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ),
            Vector3::from(raw.translation),
        )
    }
}

impl From<CameraModel> for CameraRaw {
    fn from(c: CameraModel) -> Self {
        let r = c.rotation;
        CameraRaw {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [c.translation.x, c.translation.y, c.translation.z],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rotation() {
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(100.0, 100.0, 0.0, 0.0, skew, Vector3::zeros()).is_err());
        let reflect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(100.0, 100.0, 0.0, 0.0, reflect, Vector3::zeros()).is_err());
        assert!(CameraModel::new(0.0, 100.0, 0.0, 0.0, Matrix3::identity(), Vector3::zeros()).is_err());
    }

    #[test]
    fn serde_rows_round_trip() {
        let cam = CameraModel::looking_forward(120.0, 110.0, 31.5, 23.5, Vector3::new(0.0, 1.0, -2.0)).unwrap();
        let json = serde_json::to_string(&cam).unwrap();
        assert!(json.contains("\"rotation\":[[1.0,0.0,0.0]"));
        let back: CameraModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cam);
        assert_eq!(back.center(), Vector3::new(0.0, 1.0, -2.0));
    }

    #[test]
    fn projection_inverts_back_projection() {
        let cam = CameraModel::looking_forward(100.0, 100.0, 10.0, 8.0, Vector3::zeros()).unwrap();
        let p = cam.back_project(3.0, 5.0, 2.5);
        let (u, v) = cam.project_camera(&p).unwrap();
        assert!((u - 3.0).abs() < 1e-12 && (v - 5.0).abs() < 1e-12);
    }
}
