//! Scene-level metadata: perturbation taxonomy, object categories, models.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::depthio::raster::ValueKind;

/// The twelve procedural perturbation types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationType {
    CamDollyZoom,
    CamRoll,
    CamPanTilt,
    ObjMaterialSwap,
    SceneMaterialSwap,
    Lighting,
    ObjRotation,
    ObjResizing,
    ObjTranslation,
    ObjOcclusion,
    NonRigidObjDeform,
    OodBackgroundSwap,
}

impl PerturbationType {
    pub const ALL: [PerturbationType; 12] = [
        PerturbationType::CamDollyZoom,
        PerturbationType::CamRoll,
        PerturbationType::CamPanTilt,
        PerturbationType::ObjMaterialSwap,
        PerturbationType::SceneMaterialSwap,
        PerturbationType::Lighting,
        PerturbationType::ObjRotation,
        PerturbationType::ObjResizing,
        PerturbationType::ObjTranslation,
        PerturbationType::ObjOcclusion,
        PerturbationType::NonRigidObjDeform,
        PerturbationType::OodBackgroundSwap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationType::CamDollyZoom => "cam_dolly_zoom",
            PerturbationType::CamRoll => "cam_roll",
            PerturbationType::CamPanTilt => "cam_pan_tilt",
            PerturbationType::ObjMaterialSwap => "obj_material_swap",
            PerturbationType::SceneMaterialSwap => "scene_material_swap",
            PerturbationType::Lighting => "lighting",
            PerturbationType::ObjRotation => "obj_rotation",
            PerturbationType::ObjResizing => "obj_resizing",
            PerturbationType::ObjTranslation => "obj_translation",
            PerturbationType::ObjOcclusion => "obj_occlusion",
            PerturbationType::NonRigidObjDeform => "non_rigid_obj_deform",
            PerturbationType::OodBackgroundSwap => "ood_background_swap",
        }
    }

    /// Whether the object's depth image changes, modulo SE(2) and depth scaling.
    pub fn changes_object_depth(self) -> bool {
        matches!(
            self,
            PerturbationType::CamDollyZoom
                | PerturbationType::CamPanTilt
                | PerturbationType::ObjRotation
                | PerturbationType::ObjTranslation
                | PerturbationType::ObjOcclusion
                | PerturbationType::NonRigidObjDeform
        )
    }

    /// Perturbations for which self-consistency is evaluated.
    pub fn self_consistency_eligible(self) -> bool {
        matches!(
            self,
            PerturbationType::CamRoll
                | PerturbationType::ObjMaterialSwap
                | PerturbationType::SceneMaterialSwap
                | PerturbationType::Lighting
                | PerturbationType::ObjResizing
        )
    }

    pub fn requires_se2_compensation(self) -> bool {
        self == PerturbationType::CamRoll
    }
}

impl fmt::Display for PerturbationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbationType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PerturbationType::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown perturbation type {s:?}"))
    }
}

/// Per-variant perturbation description. The boolean flags are derived from
/// the type and cannot disagree with it.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationMeta {
    pub ptype: PerturbationType,
    /// Camera roll angle in radians.
    pub roll_angle: Option<f64>,
    /// Dolly-zoom focal ratio f'/f.
    pub focal_ratio: Option<f64>,
    /// Object resizing factor.
    pub resize_scale: Option<f64>,
}

impl PerturbationMeta {
    pub fn new(ptype: PerturbationType) -> Self {
        PerturbationMeta {
            ptype,
            roll_angle: None,
            focal_ratio: None,
            resize_scale: None,
        }
    }

    pub fn roll(angle: f64) -> Self {
        PerturbationMeta {
            roll_angle: Some(angle),
            ..Self::new(PerturbationType::CamRoll)
        }
    }

    pub fn gt_object_depth_changed(&self) -> bool {
        self.ptype.changes_object_depth()
    }

    pub fn self_consistency_eligible(&self) -> bool {
        self.ptype.self_consistency_eligible()
    }

    pub fn se2_compensation_required(&self) -> bool {
        self.ptype.requires_se2_compensation()
    }
}

/// Object-of-interest category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Chair,
    Desk,
    Cabinet,
    Fish,
    Cactus,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Chair,
        Category::Desk,
        Category::Cabinet,
        Category::Fish,
        Category::Cactus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Chair => "chair",
            Category::Desk => "desk",
            Category::Cabinet => "cabinet",
            Category::Fish => "fish",
            Category::Cactus => "cactus",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// What a depth model outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    MetricDepth,
    ScaleDepth,
    AffineDepth,
    AffineDisparity,
}

impl OutputKind {
    pub fn value_kind(self) -> ValueKind {
        match self {
            OutputKind::MetricDepth => ValueKind::MetricDepth,
            OutputKind::ScaleDepth => ValueKind::ScaleDepth,
            OutputKind::AffineDepth => ValueKind::AffineDepth,
            OutputKind::AffineDisparity => ValueKind::AffineDisparity,
        }
    }

    /// Self-consistency needs predictions with a meaningful shift.
    pub fn supports_self_consistency(self) -> bool {
        matches!(self, OutputKind::MetricDepth | OutputKind::ScaleDepth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub output_kind: OutputKind,
    /// Teraflops per inference; report metadata only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flops: Option<f64>,
}

impl ModelEntry {
    pub fn new(name: impl Into<String>, output_kind: OutputKind) -> Self {
        ModelEntry {
            name: name.into(),
            output_kind,
            flops: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eligible_set_is_exact() {
        let eligible: Vec<_> = PerturbationType::ALL
            .into_iter()
            .filter(|p| p.self_consistency_eligible())
            .collect();
        assert_eq!(
            eligible,
            vec![
                PerturbationType::CamRoll,
                PerturbationType::ObjMaterialSwap,
                PerturbationType::SceneMaterialSwap,
                PerturbationType::Lighting,
                PerturbationType::ObjResizing,
            ]
        );
        for p in PerturbationType::ALL {
            assert_eq!(p.requires_se2_compensation(), p == PerturbationType::CamRoll);
            // eligible perturbations never change the object's depth image
            assert!(!(p.self_consistency_eligible() && p.changes_object_depth()));
        }
    }

    #[test]
    fn names_round_trip() {
        for p in PerturbationType::ALL {
            assert_eq!(p.as_str().parse::<PerturbationType>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.as_str()));
        }
        assert!("obj_spin".parse::<PerturbationType>().is_err());
    }
}
