use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::align::{self, AlignMode, AlignParams, ClipRange};
use crate::depthio::{
    background_mask, erode_mask, read_depth_raster, read_mask, Background, CameraModel, DepthMap, Mask, ModelEntry,
    OutputKind, SceneRecord, Shaped, ValueKind,
};
use crate::error::{PdeError, Result};
use crate::metrics::{joint_count, MetricKind};
use crate::robust;

/// Which pixels are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskScope {
    /// The eroded object-of-interest mask.
    Object,
    /// Everything except the background.
    FullScene,
}

/// User-facing alignment choice; the concrete [`AlignMode`] also depends on
/// whether the model predicts depth or disparity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignStrategy {
    ScaleShift,
    Scale,
}

impl AlignStrategy {
    pub fn mode_for(self, output: OutputKind) -> AlignMode {
        match (self, output == OutputKind::AffineDisparity) {
            (AlignStrategy::ScaleShift, false) => AlignMode::ScaleShiftDepth,
            (AlignStrategy::Scale, false) => AlignMode::ScaleDepth,
            (AlignStrategy::ScaleShift, true) => AlignMode::ScaleShiftDisparity,
            (AlignStrategy::Scale, true) => AlignMode::ScaleDisparity,
        }
    }

    /// Depth-domain mode, used when aligning to a base prediction.
    pub fn depth_mode(self) -> AlignMode {
        self.mode_for(OutputKind::MetricDepth)
    }
}

/// Evaluation procedure shared by every record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub mask_scope: MaskScope,
    pub align: AlignStrategy,
    /// Object-mask erosion radius in pixels; ignored for the full scene.
    pub erosion_radius: usize,
    /// Applied to ground-truth comparisons only; self-consistency never clips.
    pub clip: ClipRange,
    pub metrics: Vec<MetricKind>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mask_scope: MaskScope::Object,
            align: AlignStrategy::ScaleShift,
            erosion_radius: 1,
            clip: ClipRange::default(),
            metrics: MetricKind::ALL.to_vec(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.clip.validate()?;
        if self.metrics.is_empty() {
            return Err(PdeError::Parameter("metric set is empty".into()));
        }
        let mut seen = self.metrics.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.metrics.len() {
            return Err(PdeError::Parameter("metric set has duplicates".into()));
        }
        Ok(())
    }
}

/// What a prediction is compared against.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    GroundTruth,
    /// The model's own prediction on the group's base record.
    BasePrediction {
        base: &'a SceneRecord,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    GroundTruth,
    BasePrediction,
}

/// Metric values for one (model, record, reference) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub group_id: String,
    /// 0 is the base record.
    pub variant_index: usize,
    pub mask_scope: MaskScope,
    pub align_mode: AlignMode,
    pub reference: ReferenceKind,
    pub values: BTreeMap<MetricKind, f64>,
    pub pixel_count: usize,
    pub scale: f64,
    pub shift: f64,
    pub negative_scale_flag: bool,
    /// Masked pixels lost to alignment (non-positive disparity or depth).
    pub invalidated_pixels: usize,
    /// Set when roll compensation shrank the comparison mask below the base mask.
    pub border_flag: bool,
}

/// Ground truth and masks of a record, loaded from disk.
#[derive(Debug, Clone)]
pub struct RecordData {
    pub gt: DepthMap,
    pub object_mask: Mask,
    pub background: Mask,
    pub camera: Option<CameraModel>,
}

impl RecordData {
    pub fn load(record: &SceneRecord) -> Result<Self> {
        let gt = read_depth_raster(&record.gt)?.with_kind(ValueKind::MetricDepth);
        let object_mask = read_mask(&record.object_mask)?;
        let background = match &record.background {
            Background::Infinite => background_mask(&gt, None)?,
            Background::Threshold(t) => background_mask(&gt, Some(*t))?,
            Background::MaskFile(p) => read_mask(p)?,
        };
        let data = RecordData {
            gt,
            object_mask,
            background,
            camera: record.camera.clone(),
        };
        data.check_shapes(&record.gt.display().to_string())?;
        Ok(data)
    }

    pub fn new(gt: DepthMap, object_mask: Mask, background: Mask, camera: Option<CameraModel>) -> Result<Self> {
        let data = RecordData {
            gt,
            object_mask,
            background,
            camera,
        };
        data.check_shapes("record")?;
        Ok(data)
    }

    fn check_shapes(&self, what: &str) -> Result<()> {
        if !self.gt.same_shape(&self.object_mask) || !self.gt.same_shape(&self.background) {
            return Err(PdeError::Bounds(format!(
                "{what}: ground truth {:?}, object mask {:?}, background {:?}",
                self.gt.shape(),
                self.object_mask.shape(),
                self.background.shape()
            )));
        }
        Ok(())
    }

    /// Pixels that are evaluated and used for alignment.
    pub fn evaluation_mask(&self, config: &EvalConfig) -> Mask {
        let scope = match config.mask_scope {
            MaskScope::Object => erode_mask(&self.object_mask, config.erosion_radius),
            MaskScope::FullScene => Mask::full(self.gt.width(), self.gt.height()),
        };
        scope
            .and_not(&self.background)
            .and_then(|m| m.and(&self.gt.validity_mask()))
            .expect("shapes checked on construction")
    }

    /// Principal point for roll compensation: the camera's, else the image centre.
    pub fn principal_point(&self) -> (f64, f64) {
        self.camera.as_ref().map(CameraModel::principal_point).unwrap_or((
            (self.gt.width() as f64 - 1.0) / 2.0,
            (self.gt.height() as f64 - 1.0) / 2.0,
        ))
    }
}

/// Reads a model's prediction for a record, tagged with the model's output kind.
pub fn load_prediction(record: &SceneRecord, model: &ModelEntry) -> Result<DepthMap> {
    let path = record.predictions.get(&model.name).ok_or_else(|| {
        PdeError::schema(
            format!("predictions.{}", model.name),
            format!("no prediction for model {:?} (gt {})", model.name, record.gt.display()),
        )
    })?;
    Ok(read_depth_raster(path)?.with_kind(model.output_kind.value_kind()))
}

/// Outcome of aligning and scoring one prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub values: BTreeMap<MetricKind, f64>,
    pub pixel_count: usize,
    pub params: AlignParams,
    pub invalidated_pixels: usize,
    pub border_flag: bool,
}

fn score(
    pred: &DepthMap,
    reference: &DepthMap,
    mask: &Mask,
    mode: AlignMode,
    clip: &ClipRange,
    out_kind: ValueKind,
    metrics: &[MetricKind],
) -> Result<Scored> {
    if !pred.same_shape(reference) {
        return Err(PdeError::Bounds(format!(
            "prediction {:?} vs reference {:?}",
            pred.shape(),
            reference.shape()
        )));
    }
    let usable = mask.and(&pred.validity_mask())?.and(&reference.validity_mask())?;
    if usable.is_all_false() {
        return Err(PdeError::EmptyMask("evaluation mask is empty".into()));
    }
    let params = align::fit(pred, reference, &usable, mode)?;
    let aligned = align::apply_alignment_as(pred, &params, clip, out_kind);
    let invalidated_pixels = (0..usable.bits().len())
        .filter(|&i| usable.bits()[i] && !aligned.valid()[i])
        .count();
    let values = metrics
        .iter()
        .map(|&k| Ok((k, k.compute(&aligned, reference, &usable)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Scored {
        values,
        pixel_count: joint_count(&aligned, reference, &usable),
        params,
        invalidated_pixels,
        border_flag: false,
    })
}

/// Aligns `pred` to ground truth on the record's evaluation mask and scores it.
pub fn evaluate_against_gt(
    pred: &DepthMap,
    data: &RecordData,
    output: OutputKind,
    config: &EvalConfig,
) -> Result<Scored> {
    let mask = data.evaluation_mask(config);
    score(
        pred,
        &data.gt,
        &mask,
        config.align.mode_for(output),
        &config.clip,
        ValueKind::MetricDepth,
        &config.metrics,
    )
}

/// Inputs of a base-versus-variant prediction comparison.
#[derive(Debug, Clone, Copy)]
pub struct SelfConsistencyInput<'a> {
    pub base_pred: &'a DepthMap,
    pub base_mask: &'a Mask,
    pub variant_pred: &'a DepthMap,
    pub variant_mask: &'a Mask,
    /// Roll angle and principal point when the variant must be rotated back.
    pub roll: Option<(f64, (f64, f64))>,
}

/// Compares a variant prediction with the base prediction.
///
/// The base is normalized to median 1 on its mask; the variant is
/// roll-compensated when needed, normalized on the joint mask, aligned to the
/// normalized base on the joint mask without clipping, then scored. Raw metric values are returned
/// (delta as a percentage).
pub fn self_consistency_compare(input: SelfConsistencyInput<'_>, config: &EvalConfig) -> Result<Scored> {
    let base = align::normalize_median(input.base_pred, input.base_mask)?;
    let (variant, variant_mask) = match input.roll {
        Some((angle, pp)) => robust::compensate_roll(input.variant_pred, input.variant_mask, angle, pp)?,
        None => (input.variant_pred.clone(), input.variant_mask.clone()),
    };
    let joint = input.base_mask.and(&variant_mask)?;
    // the fit is scale-equivariant, so normalizing the variant as well only
    // removes rounding: identical inputs then align with a = 1, b = 0 exactly
    let variant = align::normalize_median(&variant, &joint)?;
    let mut scored = score(
        &variant,
        &base,
        &joint,
        config.align.depth_mode(),
        &ClipRange::disabled(),
        ValueKind::NormalizedDepth,
        &config.metrics,
    )?;
    scored.border_flag = input.roll.is_some() && joint != *input.base_mask;
    Ok(scored)
}

/// Evaluates one record of a group: against ground truth, or against the
/// base prediction for self-consistency. Loads every file it needs.
pub fn evaluate_record(
    group_id: &str,
    variant_index: usize,
    record: &SceneRecord,
    model: &ModelEntry,
    config: &EvalConfig,
    reference: Reference<'_>,
) -> Result<MetricRow> {
    let key = format!("{}/{}/v{}", model.name, group_id, variant_index);
    let run = || -> Result<(Scored, ReferenceKind, AlignMode)> {
        let pred = load_prediction(record, model)?;
        let data = RecordData::load(record)?;
        match reference {
            Reference::GroundTruth => Ok((
                evaluate_against_gt(&pred, &data, model.output_kind, config)?,
                ReferenceKind::GroundTruth,
                config.align.mode_for(model.output_kind),
            )),
            Reference::BasePrediction { base } => {
                let meta = record
                    .perturbation
                    .as_ref()
                    .ok_or_else(|| PdeError::Parameter("base-prediction reference needs a variant record".into()))?;
                if !robust::eligibility(meta, model) {
                    return Err(PdeError::Parameter(format!(
                        "self-consistency undefined for {} with {:?} output",
                        meta.ptype, model.output_kind
                    )));
                }
                let base_pred = load_prediction(base, model)?;
                let base_data = RecordData::load(base)?;
                let roll = robust::roll_for(meta, &data)?;
                let scored = self_consistency_compare(
                    SelfConsistencyInput {
                        base_pred: &base_pred,
                        base_mask: &base_data.evaluation_mask(config),
                        variant_pred: &pred,
                        variant_mask: &data.evaluation_mask(config),
                        roll,
                    },
                    config,
                )?;
                Ok((scored, ReferenceKind::BasePrediction, config.align.depth_mode()))
            }
        }
    };
    let (scored, reference, align_mode) = run().map_err(|e| with_context(e, &key))?;
    Ok(metric_row(
        model,
        group_id,
        variant_index,
        config,
        reference,
        align_mode,
        scored,
    ))
}

pub(crate) fn metric_row(
    model: &ModelEntry,
    group_id: &str,
    variant_index: usize,
    config: &EvalConfig,
    reference: ReferenceKind,
    align_mode: AlignMode,
    scored: Scored,
) -> MetricRow {
    MetricRow {
        model: model.name.clone(),
        group_id: group_id.to_string(),
        variant_index,
        mask_scope: config.mask_scope,
        align_mode,
        reference,
        values: scored.values,
        pixel_count: scored.pixel_count,
        scale: scored.params.a,
        shift: scored.params.b,
        negative_scale_flag: scored.params.negative_scale(),
        invalidated_pixels: scored.invalidated_pixels,
        border_flag: scored.border_flag,
    }
}

/// Prefixes record identity onto errors that do not already carry it.
pub(crate) fn with_context(err: PdeError, key: &str) -> PdeError {
    match err {
        PdeError::DegenerateFit(m) => PdeError::DegenerateFit(format!("{key}: {m}")),
        PdeError::EmptyMask(m) => PdeError::EmptyMask(format!("{key}: {m}")),
        PdeError::Data(m) => PdeError::Data(format!("{key}: {m}")),
        PdeError::Bounds(m) => PdeError::Bounds(format!("{key}: {m}")),
        PdeError::Parameter(m) => PdeError::Parameter(format!("{key}: {m}")),
        other => other,
    }
}
