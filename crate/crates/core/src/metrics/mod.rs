//! Per-image depth error metrics and the per-record evaluation pipeline.
//!
//! Reported scales: AbsRel and the delta family are percentages, RMSE is in
//! centimeters (inputs in meters), Log10 is unscaled.

pub(crate) mod pipeline;

pub use pipeline::{
    evaluate_against_gt, evaluate_record, load_prediction, self_consistency_compare, AlignStrategy, EvalConfig,
    MaskScope, MetricRow, RecordData, Reference, ReferenceKind, Scored, SelfConsistencyInput,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::depthio::{DepthMap, Mask, Shaped};
use crate::error::{PdeError, Result};
use crate::numeric;

/// Metric identifiers. The delta family carries its threshold implicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "absrel")]
    AbsRel,
    #[serde(rename = "log10")]
    Log10,
    #[serde(rename = "rmse")]
    Rmse,
    /// t = 1.25
    #[serde(rename = "delta1")]
    Delta1,
    /// t = 1.25^2
    #[serde(rename = "delta2")]
    Delta2,
    /// t = 1.25^3
    #[serde(rename = "delta3")]
    Delta3,
    /// t = 1.25^0.125
    #[serde(rename = "delta0.125")]
    DeltaStrict,
}

impl MetricKind {
    pub const ALL: [MetricKind; 7] = [
        MetricKind::AbsRel,
        MetricKind::Log10,
        MetricKind::Rmse,
        MetricKind::Delta1,
        MetricKind::Delta2,
        MetricKind::Delta3,
        MetricKind::DeltaStrict,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::AbsRel => "absrel",
            MetricKind::Log10 => "log10",
            MetricKind::Rmse => "rmse",
            MetricKind::Delta1 => "delta1",
            MetricKind::Delta2 => "delta2",
            MetricKind::Delta3 => "delta3",
            MetricKind::DeltaStrict => "delta0.125",
        }
    }

    /// Threshold `t` for the delta family.
    pub fn threshold(self) -> Option<f64> {
        match self {
            MetricKind::Delta1 => Some(1.25),
            MetricKind::Delta2 => Some(1.25f64.powi(2)),
            MetricKind::Delta3 => Some(1.25f64.powi(3)),
            MetricKind::DeltaStrict => Some(1.25f64.powf(0.125)),
            _ => None,
        }
    }

    pub fn lower_is_better(self) -> bool {
        self.threshold().is_none()
    }

    /// Computes this metric on the joint mask.
    pub fn compute(self, pred: &DepthMap, reference: &DepthMap, mask: &Mask) -> Result<f64> {
        match self {
            MetricKind::AbsRel => abs_rel(pred, reference, mask),
            MetricKind::Log10 => log10_err(pred, reference, mask),
            MetricKind::Rmse => rmse(pred, reference, mask),
            _ => delta_threshold(pred, reference, mask, self.threshold().unwrap()),
        }
    }

    /// The error value a self-consistency score squares: the metric itself for
    /// lower-better kinds, `1 - delta/100` for the delta family.
    pub fn as_error(self, value: f64) -> f64 {
        if self.lower_is_better() {
            value
        } else {
            1.0 - value / 100.0
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let alias = match lower.as_str() {
            "abs_rel" | "abs-rel" => "absrel",
            "delta_0.125" | "delta0125" | "delta_strict" => "delta0.125",
            other => other,
        };
        MetricKind::ALL
            .into_iter()
            .find(|m| m.as_str() == alias)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

/// Indices set in `mask` and valid in both rasters.
fn joint_indices<'a>(
    pred: &'a DepthMap,
    reference: &'a DepthMap,
    mask: &'a Mask,
) -> Result<impl Iterator<Item = (f64, f64)> + Clone + 'a> {
    if !pred.same_shape(reference) || !pred.same_shape(mask) {
        return Err(PdeError::Bounds(format!(
            "shape mismatch: pred {:?}, ref {:?}, mask {:?}",
            pred.shape(),
            reference.shape(),
            mask.shape()
        )));
    }
    let it = (0..pred.len())
        .filter(move |&i| mask.bits()[i] && pred.valid()[i] && reference.valid()[i])
        .map(move |i| (pred.values()[i], reference.values()[i]));
    if it.clone().next().is_none() {
        return Err(PdeError::EmptyMask("no jointly valid pixels under the mask".into()));
    }
    Ok(it)
}

/// Number of pixels the metrics average over.
pub fn joint_count(pred: &DepthMap, reference: &DepthMap, mask: &Mask) -> usize {
    joint_indices(pred, reference, mask).map(|it| it.count()).unwrap_or(0)
}

fn mean_of(it: impl Iterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let s = numeric::sum(it.inspect(|_| n += 1));
    s / n as f64
}

/// `100 * mean |pred - ref| / ref`.
pub fn abs_rel(pred: &DepthMap, reference: &DepthMap, mask: &Mask) -> Result<f64> {
    let it = joint_indices(pred, reference, mask)?;
    if let Some((_, r)) = it.clone().find(|&(_, r)| !(r > 0.0)) {
        return Err(PdeError::Data(format!("reference depth {r} inside the mask")));
    }
    Ok(100.0 * mean_of(it.map(|(p, r)| (p - r).abs() / r)))
}

/// `mean |log10 pred - log10 ref|`.
pub fn log10_err(pred: &DepthMap, reference: &DepthMap, mask: &Mask) -> Result<f64> {
    let it = joint_indices(pred, reference, mask)?;
    check_positive(it.clone())?;
    Ok(mean_of(it.map(|(p, r)| (p.log10() - r.log10()).abs())))
}

/// `100 * sqrt(mean (pred - ref)^2)`: centimeters for inputs in meters.
pub fn rmse(pred: &DepthMap, reference: &DepthMap, mask: &Mask) -> Result<f64> {
    let it = joint_indices(pred, reference, mask)?;
    Ok(100.0 * mean_of(it.map(|(p, r)| (p - r) * (p - r))).sqrt())
}

/// Percentage of pixels with `max(pred/ref, ref/pred) < t`.
pub fn delta_threshold(pred: &DepthMap, reference: &DepthMap, mask: &Mask, t: f64) -> Result<f64> {
    if !(t > 1.0) {
        return Err(PdeError::Parameter(format!("delta threshold must exceed 1, got {t}")));
    }
    let it = joint_indices(pred, reference, mask)?;
    check_positive(it.clone())?;
    let (mut hits, mut n) = (0usize, 0usize);
    for (p, r) in it {
        n += 1;
        if (p / r).max(r / p) < t {
            hits += 1;
        }
    }
    Ok(100.0 * hits as f64 / n as f64)
}

fn check_positive(mut it: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    match it.find(|&(p, r)| !(p > 0.0 && r > 0.0)) {
        Some((p, r)) => Err(PdeError::Data(format!(
            "non-positive depth inside the mask (pred {p}, ref {r})"
        ))),
        None => Ok(()),
    }
}
