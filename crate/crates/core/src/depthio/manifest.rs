//! Benchmark manifest: a single JSON document listing models and scene groups.
//!
//! ```json
//! {
//!   "models": [{"name": "m", "output_kind": "metric-depth", "flops": 1.5}],
//!   "erosion_radius": 1,
//!   "groups": [{
//!     "group_id": "desk-01-roll", "category": "desk",
//!     "base": {"gt": "base_gt.pdepth", "object_mask": "base_obj.pdepth",
//!              "predictions": {"m": "base_m.pdepth"}},
//!     "variants": [{"gt": "...", "object_mask": "...",
//!                   "background_threshold_m": 40.0,
//!                   "camera": {"fx": 100, "fy": 100, "cx": 31.5, "cy": 23.5,
//!                              "rotation": [[1,0,0],[0,1,0],[0,0,1]],
//!                              "translation": [0,0,0]},
//!                   "perturbation": {"type": "cam_roll", "roll_angle": 0.26},
//!                   "predictions": {"m": "v1_m.pdepth"}}]
//!   }]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::depthio::camera::CameraModel;
use crate::depthio::scene::{Category, ModelEntry, PerturbationMeta, PerturbationType};
use crate::error::{PdeError, Result};

pub const DEFAULT_EROSION_RADIUS: usize = 1;

/// How a record's background is determined.
#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    /// Pixels with infinite or invalid ground truth.
    Infinite,
    /// Infinite pixels plus everything beyond this depth in meters.
    Threshold(f64),
    /// Explicit mask file.
    MaskFile(PathBuf),
}

/// One rendered view: ground truth, masks, optional camera and predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub gt: PathBuf,
    pub object_mask: PathBuf,
    pub background: Background,
    pub camera: Option<CameraModel>,
    /// Model name to prediction raster.
    pub predictions: BTreeMap<String, PathBuf>,
    /// `None` for the base record.
    pub perturbation: Option<PerturbationMeta>,
}

impl SceneRecord {
    /// Every file this record references.
    pub fn files(&self) -> Vec<&Path> {
        let mut files = vec![self.gt.as_path(), self.object_mask.as_path()];
        if let Background::MaskFile(p) = &self.background {
            files.push(p);
        }
        files.extend(self.predictions.values().map(PathBuf::as_path));
        files
    }
}

/// A base scene plus `N >= 1` variants of a single perturbation type.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGroup {
    pub group_id: String,
    pub category: Category,
    pub base: SceneRecord,
    pub variants: Vec<SceneRecord>,
}

impl SceneGroup {
    pub fn perturbation_type(&self) -> PerturbationType {
        self.variants[0]
            .perturbation
            .as_ref()
            .expect("variants carry perturbation metadata")
            .ptype
    }

    /// Base followed by variants; index 0 is the base.
    pub fn records(&self) -> impl Iterator<Item = &SceneRecord> {
        std::iter::once(&self.base).chain(&self.variants)
    }
}

/// A loaded manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub models: Vec<ModelEntry>,
    pub groups: Vec<SceneGroup>,
    pub erosion_radius: usize,
}

impl Benchmark {
    pub fn model(&self, name: &str) -> Option<&ModelEntry> {
        self.models.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    models: Vec<ModelEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    erosion_radius: Option<usize>,
    groups: Vec<GroupFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupFile {
    group_id: String,
    category: Category,
    base: RecordFile,
    variants: Vec<RecordFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordFile {
    gt: PathBuf,
    object_mask: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    background_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    background_threshold_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    camera: Option<CameraModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    perturbation: Option<PerturbationFile>,
    #[serde(default)]
    predictions: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbationFile {
    #[serde(rename = "type")]
    ptype: PerturbationType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    roll_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    focal_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resize_scale: Option<f64>,
}

/// Loads and validates a manifest file.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Benchmark> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| PdeError::io(path, e))?;
    let root = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, root)
}

/// Parses manifest text; relative paths resolve against `root`.
pub fn parse_manifest(text: &str, root: &Path) -> Result<Benchmark> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ManifestFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let location = e.path().to_string();
        let inner = e.into_inner();
        PdeError::schema(
            location,
            format!("{inner} (line {}, column {})", inner.line(), inner.column()),
        )
    })?;
    convert(file, root)
}

fn convert(file: ManifestFile, root: &Path) -> Result<Benchmark> {
    let mut model_names = BTreeSet::new();
    for (i, m) in file.models.iter().enumerate() {
        if m.name.is_empty() {
            return Err(PdeError::schema(format!("models[{i}].name"), "empty model name"));
        }
        if !model_names.insert(m.name.as_str()) {
            return Err(PdeError::schema(
                format!("models[{i}].name"),
                format!("duplicate model {:?}", m.name),
            ));
        }
        if let Some(f) = m.flops {
            if !(f >= 0.0) {
                return Err(PdeError::schema(
                    format!("models[{i}].flops"),
                    "flops must be non-negative",
                ));
            }
        }
    }

    let mut ids = BTreeSet::new();
    let mut groups = Vec::with_capacity(file.groups.len());
    for (gi, g) in file.groups.into_iter().enumerate() {
        let loc = format!("groups[{gi}]");
        if g.group_id.is_empty() {
            return Err(PdeError::schema(format!("{loc}.group_id"), "empty group_id"));
        }
        if !ids.insert(g.group_id.clone()) {
            return Err(PdeError::schema(
                format!("{loc}.group_id"),
                format!("duplicate group_id {:?}", g.group_id),
            ));
        }
        if g.variants.is_empty() {
            return Err(PdeError::schema(
                format!("{loc}.variants"),
                "a group needs at least one variant",
            ));
        }
        let base = convert_record(g.base, root, &format!("{loc}.base"), &model_names, false)?;
        let mut variants = Vec::with_capacity(g.variants.len());
        for (vi, v) in g.variants.into_iter().enumerate() {
            let vloc = format!("{loc}.variants[{vi}]");
            variants.push(convert_record(v, root, &vloc, &model_names, true)?);
        }
        let first = variants[0].perturbation.as_ref().unwrap().ptype;
        if let Some(vi) = variants
            .iter()
            .position(|v| v.perturbation.as_ref().unwrap().ptype != first)
        {
            return Err(PdeError::schema(
                format!("{loc}.variants[{vi}].perturbation.type"),
                format!("all variants of a group must share one perturbation type ({first})"),
            ));
        }
        groups.push(SceneGroup {
            group_id: g.group_id,
            category: g.category,
            base,
            variants,
        });
    }

    Ok(Benchmark {
        models: file.models,
        groups,
        erosion_radius: file.erosion_radius.unwrap_or(DEFAULT_EROSION_RADIUS),
    })
}

fn convert_record(
    r: RecordFile,
    root: &Path,
    loc: &str,
    models: &BTreeSet<&str>,
    is_variant: bool,
) -> Result<SceneRecord> {
    let background = match (r.background_mask, r.background_threshold_m) {
        (Some(_), Some(_)) => {
            return Err(PdeError::schema(
                loc,
                "background_mask and background_threshold_m are mutually exclusive",
            ))
        }
        (Some(p), None) => Background::MaskFile(root.join(p)),
        (None, Some(t)) => {
            if !(t > 0.0) || !t.is_finite() {
                return Err(PdeError::schema(
                    format!("{loc}.background_threshold_m"),
                    format!("threshold must be positive and finite, got {t}"),
                ));
            }
            Background::Threshold(t)
        }
        (None, None) => Background::Infinite,
    };
    for name in r.predictions.keys() {
        if !models.contains(name.as_str()) {
            return Err(PdeError::schema(
                format!("{loc}.predictions.{name}"),
                format!("prediction for unknown model {name:?}"),
            ));
        }
    }
    let perturbation = match (r.perturbation, is_variant) {
        (None, false) => None,
        (Some(_), false) => {
            return Err(PdeError::schema(
                format!("{loc}.perturbation"),
                "the base record has no perturbation",
            ))
        }
        (None, true) => {
            return Err(PdeError::schema(
                format!("{loc}.perturbation"),
                "missing field `perturbation`",
            ))
        }
        (Some(p), true) => Some(convert_perturbation(p, &format!("{loc}.perturbation"))?),
    };
    Ok(SceneRecord {
        gt: root.join(r.gt),
        object_mask: root.join(r.object_mask),
        background,
        camera: r.camera,
        predictions: r.predictions.into_iter().map(|(k, v)| (k, root.join(v))).collect(),
        perturbation,
    })
}

fn convert_perturbation(p: PerturbationFile, loc: &str) -> Result<PerturbationMeta> {
    let positive = |v: Option<f64>, field: &str| -> Result<()> {
        match v {
            Some(x) if !(x > 0.0) || !x.is_finite() => Err(PdeError::schema(
                format!("{loc}.{field}"),
                format!("must be positive and finite, got {x}"),
            )),
            _ => Ok(()),
        }
    };
    positive(p.focal_ratio, "focal_ratio")?;
    positive(p.resize_scale, "resize_scale")?;
    match p.roll_angle {
        Some(a) if !a.is_finite() => {
            return Err(PdeError::schema(
                format!("{loc}.roll_angle"),
                "roll angle must be finite",
            ))
        }
        None if p.ptype == PerturbationType::CamRoll => {
            return Err(PdeError::schema(
                format!("{loc}.roll_angle"),
                "cam_roll variants need `roll_angle` (radians)",
            ))
        }
        _ => {}
    }
    Ok(PerturbationMeta {
        ptype: p.ptype,
        roll_angle: p.roll_angle,
        focal_ratio: p.focal_ratio,
        resize_scale: p.resize_scale,
    })
}

/// Writes `bench` as a manifest at `path`, storing paths relative to its directory
/// when they live below it.
pub fn write_manifest(bench: &Benchmark, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let root = path.parent().unwrap_or_else(|| Path::new("."));
    let text = manifest_json(bench, root);
    fs::write(path, text).map_err(|e| PdeError::io(path, e))
}

/// Serialized manifest text with paths relative to `root`.
pub fn manifest_json(bench: &Benchmark, root: &Path) -> String {
    let rel = |p: &Path| -> PathBuf {
        p.strip_prefix(root)
            .map(Path::to_path_buf)
            .unwrap_or_else(|_| p.to_path_buf())
    };
    let record = |r: &SceneRecord| RecordFile {
        gt: rel(&r.gt),
        object_mask: rel(&r.object_mask),
        background_mask: match &r.background {
            Background::MaskFile(p) => Some(rel(p)),
            _ => None,
        },
        background_threshold_m: match r.background {
            Background::Threshold(t) => Some(t),
            _ => None,
        },
        camera: r.camera.clone(),
        perturbation: r.perturbation.as_ref().map(|p| PerturbationFile {
            ptype: p.ptype,
            roll_angle: p.roll_angle,
            focal_ratio: p.focal_ratio,
            resize_scale: p.resize_scale,
        }),
        predictions: r.predictions.iter().map(|(k, v)| (k.clone(), rel(v))).collect(),
    };
    let file = ManifestFile {
        models: bench.models.clone(),
        erosion_radius: Some(bench.erosion_radius),
        groups: bench
            .groups
            .iter()
            .map(|g| GroupFile {
                group_id: g.group_id.clone(),
                category: g.category,
                base: record(&g.base),
                variants: g.variants.iter().map(record).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("manifest serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(ptype: &str) -> String {
        format!(
            r#"{{
  "models": [{{"name": "m", "output_kind": "metric-depth"}}],
  "groups": [{{
    "group_id": "g", "category": "chair",
    "base": {{"gt": "b.pdepth", "object_mask": "bm.pdepth", "predictions": {{"m": "bp.pdepth"}}}},
    "variants": [{{"gt": "v.pdepth", "object_mask": "vm.pdepth",
                   "perturbation": {{"type": "{ptype}", "roll_angle": 0.1}},
                   "predictions": {{"m": "vp.pdepth"}}}}]
  }}]
}}"#
        )
    }

    #[test]
    fn minimal_manifest_loads() {
        let bench = parse_manifest(&minimal("lighting"), Path::new("/data")).unwrap();
        assert_eq!(bench.groups.len(), 1);
        assert_eq!(bench.groups[0].variants.len(), 1);
        assert_eq!(bench.models.len(), 1);
        assert_eq!(bench.erosion_radius, DEFAULT_EROSION_RADIUS);
        let g = &bench.groups[0];
        assert_eq!(g.base.gt, Path::new("/data/b.pdepth"));
        assert_eq!(g.base.predictions["m"], Path::new("/data/bp.pdepth"));
        assert_eq!(g.base.background, Background::Infinite);
        let meta = g.variants[0].perturbation.as_ref().unwrap();
        assert!(meta.self_consistency_eligible());
        assert!(!meta.se2_compensation_required());
    }

    #[test]
    fn rotation_is_not_eligible() {
        let bench = parse_manifest(&minimal("obj_rotation"), Path::new(".")).unwrap();
        let meta = bench.groups[0].variants[0].perturbation.as_ref().unwrap();
        assert!(!meta.self_consistency_eligible());
        assert!(meta.gt_object_depth_changed());
    }

    #[test]
    fn unknown_perturbation_reports_location() {
        let err = parse_manifest(&minimal("obj_spin"), Path::new(".")).unwrap_err();
        match err {
            PdeError::Schema { location, .. } => {
                assert_eq!(location, "groups[0].variants[0].perturbation.type")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_group_id_is_rejected() {
        let text = minimal("lighting");
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let g = v["groups"][0].clone();
        v["groups"].as_array_mut().unwrap().push(g);
        let err = parse_manifest(&v.to_string(), Path::new(".")).unwrap_err();
        assert!(matches!(err, PdeError::Schema { ref location, .. } if location == "groups[1].group_id"));
    }

    #[test]
    fn missing_required_field() {
        let text = minimal("lighting").replace(r#""gt": "v.pdepth", "#, "");
        let err = parse_manifest(&text, Path::new(".")).unwrap_err();
        assert!(
            matches!(err, PdeError::Schema { ref msg, .. } if msg.contains("gt")),
            "{err}"
        );
    }

    #[test]
    fn unknown_output_kind() {
        let text = minimal("lighting").replace("metric-depth", "relative-depth");
        let err = parse_manifest(&text, Path::new(".")).unwrap_err();
        assert!(matches!(err, PdeError::Schema { ref location, .. } if location == "models[0].output_kind"));
    }

    #[test]
    fn roll_requires_angle() {
        let text = minimal("cam_roll").replace(r#", "roll_angle": 0.1"#, "");
        assert!(parse_manifest(&text, Path::new(".")).is_err());
        assert!(parse_manifest(&minimal("cam_roll"), Path::new(".")).is_ok());
    }

    #[test]
    fn write_then_parse_is_stable() {
        let root = Path::new("/bench");
        let bench = parse_manifest(&minimal("cam_roll"), root).unwrap();
        let text = manifest_json(&bench, root);
        let again = parse_manifest(&text, root).unwrap();
        assert_eq!(again.groups, bench.groups);
        assert_eq!(manifest_json(&again, root), text);
    }
}
