use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accuracy_instability, average_error, eligibility, mean_abs_difference, roll_for, self_inconsistency};
use crate::depthio::{Category, DepthMap, ModelEntry, PerturbationMeta, PerturbationType, SceneGroup, SceneRecord};
use crate::error::{PdeError, Result};
use crate::metrics::pipeline::{metric_row, with_context};
use crate::metrics::{
    evaluate_against_gt, load_prediction, self_consistency_compare, EvalConfig, MetricKind, MetricRow, RecordData,
    ReferenceKind, Scored, SelfConsistencyInput,
};

/// Robustness statistics for one (model, scene group, metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub model: String,
    pub group_id: String,
    pub category: Category,
    pub perturbation: PerturbationType,
    pub metric: MetricKind,
    pub mu: f64,
    pub sigma: f64,
    /// Absent when the perturbation or the model output kind is ineligible,
    /// or when every base-prediction comparison was skipped.
    pub kappa: Option<f64>,
    /// Mean of `|d_i|` over the same comparisons as `kappa`.
    pub kappa_mean_abs: Option<f64>,
    /// Effective N: variants that entered `mu` and `sigma`.
    pub n_variants: usize,
    pub n_skipped: usize,
    /// Effective N of `kappa`.
    pub kappa_n: usize,
    /// Base-prediction comparisons whose mask was cut by roll compensation.
    pub border_flags: usize,
}

/// A record with its ground truth, masks and one model's prediction in memory.
#[derive(Debug, Clone)]
pub struct LoadedRecord {
    pub data: RecordData,
    pub pred: DepthMap,
    pub meta: Option<PerturbationMeta>,
}

impl LoadedRecord {
    pub fn load(record: &SceneRecord, model: &ModelEntry) -> Result<Self> {
        Ok(LoadedRecord {
            data: RecordData::load(record)?,
            pred: load_prediction(record, model)?,
            meta: record.perturbation.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct LoadedGroup {
    pub group_id: String,
    pub category: Category,
    pub ptype: PerturbationType,
    pub base: LoadedRecord,
    pub variants: Vec<LoadedRecord>,
}

/// A record comparison that was dropped (empty mask or degenerate fit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub variant_index: usize,
    pub reference: ReferenceKind,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct GroupEvaluation {
    /// One row per configured metric, in configuration order.
    pub rows: Vec<RobustnessRow>,
    pub metric_rows: Vec<MetricRow>,
    pub skipped: Vec<Skip>,
}

/// Loads every record of `group` for `model` and evaluates it.
pub fn evaluate_group(group: &SceneGroup, model: &ModelEntry, config: &EvalConfig) -> Result<GroupEvaluation> {
    let records: Vec<&SceneRecord> = group.records().collect();
    let loaded = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            LoadedRecord::load(r, model)
                .map_err(|e| with_context(e, &format!("{}/{}/v{i}", model.name, group.group_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut loaded = loaded.into_iter();
    let base = loaded.next().expect("group has a base record");
    let group = LoadedGroup {
        group_id: group.group_id.clone(),
        category: group.category,
        ptype: group.perturbation_type(),
        base,
        variants: loaded.collect(),
    };
    evaluate_loaded(&group, model, config)
}

/// Evaluates an in-memory group: ground-truth scores for `mu` and `sigma`,
/// base-prediction comparisons for `kappa` when eligible.
pub fn evaluate_loaded(group: &LoadedGroup, model: &ModelEntry, config: &EvalConfig) -> Result<GroupEvaluation> {
    config.validate()?;
    if group.variants.is_empty() {
        return Err(group_error(group, "group has no variants".into()));
    }
    let key = |i: usize| format!("{}/{}/v{i}", model.name, group.group_id);

    let all: Vec<&LoadedRecord> = std::iter::once(&group.base).chain(&group.variants).collect();
    let gt_scores: Vec<Result<Scored>> = all
        .par_iter()
        .map(|r| evaluate_against_gt(&r.pred, &r.data, model.output_kind, config))
        .collect();

    let eligible = group
        .variants
        .iter()
        .all(|v| v.meta.as_ref().is_some_and(|m| eligibility(m, model)));
    let sc_scores: Vec<Result<Scored>> = if eligible {
        let base_mask = group.base.data.evaluation_mask(config);
        group
            .variants
            .par_iter()
            .map(|v| {
                let meta = v.meta.as_ref().expect("eligible variants carry metadata");
                let variant_mask = v.data.evaluation_mask(config);
                self_consistency_compare(
                    SelfConsistencyInput {
                        base_pred: &group.base.pred,
                        base_mask: &base_mask,
                        variant_pred: &v.pred,
                        variant_mask: &variant_mask,
                        roll: roll_for(meta, &v.data)?,
                    },
                    config,
                )
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut out = GroupEvaluation::default();
    let gt_mode = config.align.mode_for(model.output_kind);
    let mut gt_ok: Vec<(usize, Scored)> = Vec::new();
    for (i, res) in gt_scores.into_iter().enumerate() {
        match res {
            Ok(s) => gt_ok.push((i, s)),
            Err(e) if e.is_skip() => {
                if i == 0 {
                    return Err(group_error(group, format!("base record skipped: {e}")));
                }
                out.skipped.push(Skip {
                    variant_index: i,
                    reference: ReferenceKind::GroundTruth,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(with_context(e, &key(i))),
        }
    }
    if gt_ok.len() < 2 {
        return Err(group_error(group, "every variant was skipped".into()));
    }

    let mut sc_ok: Vec<(usize, Scored)> = Vec::new();
    for (j, res) in sc_scores.into_iter().enumerate() {
        let i = j + 1;
        match res {
            Ok(s) => sc_ok.push((i, s)),
            Err(e) if e.is_skip() => out.skipped.push(Skip {
                variant_index: i,
                reference: ReferenceKind::BasePrediction,
                reason: e.to_string(),
            }),
            Err(e) => return Err(with_context(e, &key(i))),
        }
    }

    for &metric in &config.metrics {
        let errors: Vec<f64> = gt_ok.iter().map(|(_, s)| s.values[&metric]).collect();
        let deltas: Vec<f64> = sc_ok.iter().map(|(_, s)| metric.as_error(s.values[&metric])).collect();
        let (kappa, kappa_mean_abs) = if deltas.is_empty() {
            (None, None)
        } else {
            (Some(self_inconsistency(&deltas)?), Some(mean_abs_difference(&deltas)?))
        };
        out.rows.push(RobustnessRow {
            model: model.name.clone(),
            group_id: group.group_id.clone(),
            category: group.category,
            perturbation: group.ptype,
            metric,
            mu: average_error(&errors)?,
            sigma: accuracy_instability(&errors)?,
            kappa,
            kappa_mean_abs,
            n_variants: errors.len() - 1,
            n_skipped: group.variants.len() + 1 - errors.len(),
            kappa_n: deltas.len(),
            border_flags: sc_ok.iter().filter(|(_, s)| s.border_flag).count(),
        });
    }

    let depth_mode = config.align.depth_mode();
    for (i, s) in gt_ok {
        out.metric_rows.push(metric_row(
            model,
            &group.group_id,
            i,
            config,
            ReferenceKind::GroundTruth,
            gt_mode,
            s,
        ));
    }
    for (i, s) in sc_ok {
        out.metric_rows.push(metric_row(
            model,
            &group.group_id,
            i,
            config,
            ReferenceKind::BasePrediction,
            depth_mode,
            s,
        ));
    }
    Ok(out)
}

fn group_error(group: &LoadedGroup, msg: String) -> PdeError {
    PdeError::Group {
        group_id: group.group_id.clone(),
        msg,
    }
}
