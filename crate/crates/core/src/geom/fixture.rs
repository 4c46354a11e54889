//! Writes rendered scene groups, masks and pseudo-predictions to disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::perturb::{
    add_occluder, perturb_dolly_zoom, perturb_pan_tilt, perturb_resize_object, perturb_roll, translate_object,
};
use super::render::{render_depth, Rendered};
use super::scene::SceneSpec;
use crate::depthio::{
    erode_mask, write_depth_raster, write_manifest, write_mask, Background, Benchmark, Category, DepthMap, ModelEntry,
    OutputKind, PerturbationMeta, PerturbationType, RasterFormat, SceneGroup, SceneRecord, ValueKind,
};
use crate::error::{PdeError, Result};

/// Depth written for pseudo-predictions where the ground truth is infinite.
pub const FAR_DEPTH: f64 = 100.0;

/// One variant of a fixture group. Angles are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlanEntry {
    CamRoll {
        angle_deg: f64,
    },
    CamPanTilt {
        pan_deg: f64,
        tilt_deg: f64,
    },
    CamDollyZoom {
        focal_ratio: f64,
    },
    ObjResizing {
        scale: f64,
    },
    ObjTranslation {
        offset: [f64; 3],
    },
    /// Adds a box between the camera and the object.
    ObjOcclusion {
        min: [f64; 3],
        max: [f64; 3],
    },
    // Appearance-only changes leave the depth image untouched.
    Lighting,
    ObjMaterialSwap,
    SceneMaterialSwap,
}

impl PlanEntry {
    pub fn perturbation_type(&self) -> PerturbationType {
        match self {
            PlanEntry::CamRoll { .. } => PerturbationType::CamRoll,
            PlanEntry::CamPanTilt { .. } => PerturbationType::CamPanTilt,
            PlanEntry::CamDollyZoom { .. } => PerturbationType::CamDollyZoom,
            PlanEntry::ObjResizing { .. } => PerturbationType::ObjResizing,
            PlanEntry::ObjTranslation { .. } => PerturbationType::ObjTranslation,
            PlanEntry::ObjOcclusion { .. } => PerturbationType::ObjOcclusion,
            PlanEntry::Lighting => PerturbationType::Lighting,
            PlanEntry::ObjMaterialSwap => PerturbationType::ObjMaterialSwap,
            PlanEntry::SceneMaterialSwap => PerturbationType::SceneMaterialSwap,
        }
    }

    pub fn meta(&self) -> PerturbationMeta {
        let mut meta = PerturbationMeta::new(self.perturbation_type());
        match *self {
            PlanEntry::CamRoll { angle_deg } => meta.roll_angle = Some(angle_deg.to_radians()),
            PlanEntry::CamDollyZoom { focal_ratio } => meta.focal_ratio = Some(focal_ratio),
            PlanEntry::ObjResizing { scale } => meta.resize_scale = Some(scale),
            _ => {}
        }
        meta
    }

    /// The perturbed scene.
    pub fn apply(&self, spec: &SceneSpec) -> Result<SceneSpec> {
        match self {
            PlanEntry::CamRoll { angle_deg } => perturb_roll(spec, angle_deg.to_radians()),
            PlanEntry::CamPanTilt { pan_deg, tilt_deg } => {
                perturb_pan_tilt(spec, pan_deg.to_radians(), tilt_deg.to_radians())
            }
            PlanEntry::CamDollyZoom { focal_ratio } => perturb_dolly_zoom(spec, *focal_ratio),
            PlanEntry::ObjResizing { scale } => perturb_resize_object(spec, *scale),
            PlanEntry::ObjTranslation { offset } => translate_object(spec, *offset),
            PlanEntry::ObjOcclusion { min, max } => add_occluder(spec, *min, *max),
            PlanEntry::Lighting | PlanEntry::ObjMaterialSwap | PlanEntry::SceneMaterialSwap => Ok(spec.clone()),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// A stand-in model: ground truth, optionally corrupted, expressed in the
/// model's output kind. Depth kinds get `scale * d + shift`; disparity
/// models get `scale / d + shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoPrediction {
    pub model: String,
    pub output_kind: OutputKind,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub shift: f64,
    /// Standard deviation of the per-pixel log-normal depth factor.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    /// Factor applied on the outermost 1-px ring of the object mask.
    #[serde(default)]
    pub boundary_factor: Option<f64>,
}

impl PseudoPrediction {
    pub fn exact(model: impl Into<String>, output_kind: OutputKind) -> Self {
        PseudoPrediction {
            model: model.into(),
            output_kind,
            scale: 1.0,
            shift: 0.0,
            noise: 0.0,
            seed: 0,
            boundary_factor: None,
        }
    }

    pub fn model_entry(&self) -> ModelEntry {
        ModelEntry::new(self.model.clone(), self.output_kind)
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(PdeError::Parameter(format!("pseudo-prediction {}: {what}", self.model)));
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return bad("scale must be positive");
        }
        if !self.shift.is_finite() || !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad("shift and noise must be finite, noise non-negative");
        }
        if self.boundary_factor.is_some_and(|f| !(f.is_finite() && f > 0.0)) {
            return bad("boundary factor must be positive");
        }
        Ok(())
    }

    /// Prediction raster for one rendered record; `stream` decorrelates noise
    /// between records.
    pub fn predict(&self, render: &Rendered, stream: u64) -> Result<DepthMap> {
        self.validate()?;
        let ring = match self.boundary_factor {
            Some(_) => Some(render.object_mask.and_not(&erode_mask(&render.object_mask, 1))?),
            None => None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let noise = (self.noise > 0.0)
            .then(|| LogNormal::new(0.0, self.noise).map_err(|e| PdeError::Parameter(e.to_string())))
            .transpose()?;
        let kind = self.output_kind.value_kind();
        let values = render
            .depth
            .values()
            .iter()
            .enumerate()
            .map(|(i, &gt)| {
                let mut d = if gt.is_finite() { gt } else { FAR_DEPTH };
                if let (Some(f), Some(ring)) = (self.boundary_factor, &ring) {
                    if ring.bits()[i] {
                        d *= f;
                    }
                }
                if let Some(dist) = &noise {
                    d *= dist.sample(&mut rng);
                }
                if kind == ValueKind::AffineDisparity {
                    self.scale / d + self.shift
                } else {
                    self.scale * d + self.shift
                }
            })
            .collect();
        DepthMap::new(render.depth.width(), render.depth.height(), values, kind)
    }
}

/// Renders `spec` and every plan entry, writes ground truth, masks and one
/// prediction per pseudo-model under `out_dir/<group_id>/`, and returns the
/// group with absolute file paths.
pub fn make_fixture_group(
    spec: &SceneSpec,
    plan: &[PlanEntry],
    group_id: &str,
    category: Category,
    predictions: &[PseudoPrediction],
    out_dir: &Path,
) -> Result<SceneGroup> {
    let first = plan
        .first()
        .ok_or_else(|| PdeError::Parameter(format!("group {group_id}: empty perturbation plan")))?
        .perturbation_type();
    if let Some(bad) = plan.iter().find(|p| p.perturbation_type() != first) {
        return Err(PdeError::Parameter(format!(
            "group {group_id}: plan mixes {first} and {}",
            bad.perturbation_type()
        )));
    }
    let mut scenes = vec![(spec.clone(), None)];
    for (i, entry) in plan.iter().enumerate() {
        let scene = entry
            .apply(spec)
            .map_err(|e| PdeError::Rejected(format!("group {group_id}, plan entry {i} ({first}): {e}")))?;
        scenes.push((scene, Some(entry.meta())));
    }

    let dir = out_dir.join(group_id);
    fs::create_dir_all(&dir).map_err(|e| PdeError::io(&dir, e))?;
    let mut records = Vec::with_capacity(scenes.len());
    for (i, (scene, meta)) in scenes.into_iter().enumerate() {
        let render = render_depth(&scene)?;
        let gt = dir.join(format!("v{i}_gt.pdepth"));
        let object_mask = dir.join(format!("v{i}_object.pdepth"));
        write_depth_raster(&render.depth, &gt, RasterFormat::Pdepth)?;
        write_mask(&render.object_mask, &object_mask)?;
        let mut preds = BTreeMap::new();
        for p in predictions {
            let path = dir.join(format!("v{i}_{}.pdepth", file_stem(&p.model)));
            let map = p.predict(&render, scene.rng_seed.wrapping_add(i as u64))?;
            write_depth_raster(&map, &path, RasterFormat::Pdepth)?;
            preds.insert(p.model.clone(), path);
        }
        records.push(SceneRecord {
            gt,
            object_mask,
            background: Background::Infinite,
            camera: Some(scene.effective_camera()),
            predictions: preds,
            perturbation: meta,
        });
    }
    let mut records = records.into_iter();
    Ok(SceneGroup {
        group_id: group_id.to_string(),
        category,
        base: records.next().expect("base record"),
        variants: records.collect(),
    })
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn default_erosion() -> usize {
    crate::depthio::manifest::DEFAULT_EROSION_RADIUS
}

/// One group of a synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthGroup {
    pub group_id: String,
    pub category: Category,
    /// Defaults to the category's desk-scale preset.
    #[serde(default)]
    pub scene: Option<SceneSpec>,
    pub plan: Vec<PlanEntry>,
}

/// Input of `pde synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(default)]
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_erosion")]
    pub erosion_radius: usize,
    pub models: Vec<PseudoPrediction>,
    pub groups: Vec<SynthGroup>,
}

/// Renders every group of `spec` into `out_dir` and writes `manifest.json`.
/// Rejected plan entries are collected and reported together.
pub fn synthesize(spec: &SynthSpec, out_dir: &Path) -> Result<(Benchmark, PathBuf)> {
    fs::create_dir_all(out_dir).map_err(|e| PdeError::io(out_dir, e))?;
    let mut groups = Vec::new();
    let mut rejected = Vec::new();
    for (gi, g) in spec.groups.iter().enumerate() {
        let seed = spec.seed.wrapping_add(gi as u64);
        let scene = match &g.scene {
            Some(s) => s.clone(),
            None => SceneSpec::desk(g.category, spec.width, spec.height, seed)?,
        };
        match make_fixture_group(&scene, &g.plan, &g.group_id, g.category, &spec.models, out_dir) {
            Ok(group) => groups.push(group),
            Err(PdeError::Rejected(msg)) => rejected.push(msg),
            Err(e) => return Err(e),
        }
    }
    if !rejected.is_empty() {
        return Err(PdeError::Rejected(rejected.join("; ")));
    }
    let bench = Benchmark {
        models: spec.models.iter().map(PseudoPrediction::model_entry).collect(),
        groups,
        erosion_radius: spec.erosion_radius,
    };
    let manifest = out_dir.join("manifest.json");
    write_manifest(&bench, &manifest)?;
    Ok((bench, manifest))
}

/// A small benchmark covering every renderable perturbation type and model
/// output kind.
pub fn demo_synth_spec(size: usize, seed: u64) -> SynthSpec {
    let pseudo = |model: &str, kind, scale, shift| PseudoPrediction {
        scale,
        shift,
        ..PseudoPrediction::exact(model, kind)
    };
    let group = |id: &str, category, plan: Vec<PlanEntry>| SynthGroup {
        group_id: id.to_string(),
        category,
        scene: None,
        plan,
    };
    SynthSpec {
        seed,
        width: size,
        height: size,
        erosion_radius: 1,
        models: vec![
            PseudoPrediction::exact("oracle", OutputKind::MetricDepth),
            PseudoPrediction {
                noise: 0.03,
                seed: seed ^ 0x5eed,
                ..PseudoPrediction::exact("noisy-metric", OutputKind::MetricDepth)
            },
            PseudoPrediction {
                boundary_factor: Some(1.4),
                ..pseudo("edge-scale", OutputKind::ScaleDepth, 0.6, 0.0)
            },
            pseudo("affine-depth", OutputKind::AffineDepth, 1.3, 0.2),
            PseudoPrediction {
                noise: 0.02,
                seed: seed ^ 0xd15c,
                ..pseudo("affine-disparity", OutputKind::AffineDisparity, 0.8, 0.05)
            },
        ],
        groups: vec![
            group(
                "fish-roll",
                Category::Fish,
                vec![
                    PlanEntry::CamRoll { angle_deg: 90.0 },
                    PlanEntry::CamRoll { angle_deg: 17.0 },
                ],
            ),
            group(
                "cactus-pan-tilt",
                Category::Cactus,
                vec![
                    PlanEntry::CamPanTilt {
                        pan_deg: 3.0,
                        tilt_deg: 0.0,
                    },
                    PlanEntry::CamPanTilt {
                        pan_deg: -2.0,
                        tilt_deg: 2.0,
                    },
                ],
            ),
            group(
                "chair-dolly",
                Category::Chair,
                vec![
                    PlanEntry::CamDollyZoom { focal_ratio: 1.5 },
                    PlanEntry::CamDollyZoom { focal_ratio: 0.8 },
                ],
            ),
            group(
                "cabinet-resize",
                Category::Cabinet,
                vec![
                    PlanEntry::ObjResizing { scale: 1.5 },
                    PlanEntry::ObjResizing { scale: 0.8 },
                ],
            ),
            group(
                "desk-lighting",
                Category::Desk,
                vec![PlanEntry::Lighting, PlanEntry::Lighting, PlanEntry::Lighting],
            ),
            group(
                "fish-material",
                Category::Fish,
                vec![PlanEntry::ObjMaterialSwap, PlanEntry::ObjMaterialSwap],
            ),
            group(
                "chair-translate",
                Category::Chair,
                vec![
                    PlanEntry::ObjTranslation {
                        offset: [0.1, 0.0, 0.0],
                    },
                    PlanEntry::ObjTranslation {
                        offset: [-0.05, 0.0, 0.3],
                    },
                ],
            ),
            group(
                "cactus-occlusion",
                Category::Cactus,
                vec![PlanEntry::ObjOcclusion {
                    min: [-0.6, -0.1, 2.2],
                    max: [0.6, -0.02, 2.3],
                }],
            ),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthio::{load_manifest, read_depth_raster, read_mask};

    #[test]
    fn roll_plan_maps_to_eligible_se2_meta() {
        let meta = PlanEntry::CamRoll { angle_deg: 15.0 }.meta();
        assert!(meta.self_consistency_eligible() && meta.se2_compensation_required());
        assert!((meta.roll_angle.unwrap() - 15f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn group_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SceneSpec::desk(Category::Fish, 24, 24, 5).unwrap();
        let preds = [
            PseudoPrediction::exact("gt", OutputKind::MetricDepth),
            PseudoPrediction {
                scale: 1.3,
                shift: 0.2,
                ..PseudoPrediction::exact("aff", OutputKind::AffineDepth)
            },
        ];
        let g = make_fixture_group(
            &spec,
            &[PlanEntry::CamRoll { angle_deg: 15.0 }],
            "g1",
            Category::Fish,
            &preds,
            dir.path(),
        )
        .unwrap();
        assert_eq!(g.variants.len(), 1);
        let gt = read_depth_raster(&g.base.gt).unwrap();
        let same = read_depth_raster(&g.base.predictions["gt"]).unwrap();
        assert_eq!(gt, same);
        assert!(read_mask(&g.variants[0].object_mask).unwrap().count() > 0);
    }

    #[test]
    fn mixed_plan_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SceneSpec::desk(Category::Fish, 8, 8, 5).unwrap();
        let plan = [PlanEntry::Lighting, PlanEntry::CamRoll { angle_deg: 1.0 }];
        assert!(make_fixture_group(&spec, &plan, "g", Category::Fish, &[], dir.path()).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let spec = SceneSpec::desk(Category::Desk, 16, 16, 5).unwrap();
        let r = render_depth(&spec).unwrap();
        let p = PseudoPrediction {
            noise: 0.1,
            seed: 4,
            ..PseudoPrediction::exact("n", OutputKind::MetricDepth)
        };
        assert_eq!(p.predict(&r, 1).unwrap(), p.predict(&r, 1).unwrap());
        assert_ne!(p.predict(&r, 1).unwrap(), p.predict(&r, 2).unwrap());
        assert!(p.predict(&r, 1).unwrap().values().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn demo_benchmark_synthesizes_and_loads() {
        let dir = tempfile::tempdir().unwrap();
        let (bench, manifest) = synthesize(&demo_synth_spec(32, 1), dir.path()).unwrap();
        let loaded = load_manifest(&manifest).unwrap();
        assert_eq!(loaded.groups.len(), bench.groups.len());
        assert_eq!(loaded.models, bench.models);
        let text = serde_json::to_string(&demo_synth_spec(32, 1)).unwrap();
        let back: SynthSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, demo_synth_spec(32, 1));
    }
}
