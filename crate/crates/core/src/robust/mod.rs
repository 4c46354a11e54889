//! Group-level robustness statistics.
//!
//! For a base scene and `N` variants with per-record errors `e_0..e_N`
//! against ground truth:
//!
//! * average error `mu = sum(e_i) / (N + 1)`
//! * accuracy instability `sigma = sum((e_i - mu)^2) / N`
//! * self-inconsistency `kappa = sum(d_i^2) / N`, where `d_i` is the error of
//!   variant prediction `i` measured against the base prediction.

mod group;
mod roll;

pub use group::{evaluate_group, evaluate_loaded, GroupEvaluation, LoadedGroup, LoadedRecord, RobustnessRow, Skip};
pub use roll::compensate_roll;

use crate::depthio::{ModelEntry, PerturbationMeta};
use crate::error::{PdeError, Result};
use crate::metrics::RecordData;
use crate::numeric::{self, CompensatedSum};

/// `mu`: mean of the base and variant errors.
pub fn average_error(errors: &[f64]) -> Result<f64> {
    if let Some(&first) = errors.first() {
        if errors.iter().all(|&e| e == first) {
            return Ok(first);
        }
    }
    numeric::mean(errors).ok_or_else(|| PdeError::Parameter("average error of an empty list".into()))
}

/// `sigma`: squared deviations from `mu` divided by `N = len - 1`.
pub fn accuracy_instability(errors: &[f64]) -> Result<f64> {
    if errors.len() < 2 {
        return Err(PdeError::Parameter(format!(
            "accuracy instability needs the base and at least one variant, got {} values",
            errors.len()
        )));
    }
    let mu = average_error(errors)?;
    let ss: CompensatedSum = errors.iter().map(|e| (e - mu) * (e - mu)).collect();
    Ok(ss.value() / (errors.len() - 1) as f64)
}

/// `kappa`: mean of squared per-variant differences against the base prediction.
pub fn self_inconsistency(deltas: &[f64]) -> Result<f64> {
    if deltas.is_empty() {
        return Err(PdeError::Parameter("self-inconsistency of an empty list".into()));
    }
    Ok(numeric::sum(deltas.iter().map(|d| d * d)) / deltas.len() as f64)
}

/// Mean absolute difference; reported next to `kappa` as a diagnostic.
pub fn mean_abs_difference(deltas: &[f64]) -> Result<f64> {
    if deltas.is_empty() {
        return Err(PdeError::Parameter("mean difference of an empty list".into()));
    }
    Ok(numeric::sum(deltas.iter().map(|d| d.abs())) / deltas.len() as f64)
}

/// Self-consistency is defined for eligible perturbations and for models
/// whose output is metric or scale-only depth.
pub fn eligibility(meta: &PerturbationMeta, model: &ModelEntry) -> bool {
    meta.self_consistency_eligible() && model.output_kind.supports_self_consistency()
}

/// Roll angle and principal point when the variant needs SE(2) compensation.
pub(crate) fn roll_for(meta: &PerturbationMeta, data: &RecordData) -> Result<Option<(f64, (f64, f64))>> {
    if !meta.se2_compensation_required() {
        return Ok(None);
    }
    let angle = meta
        .roll_angle
        .ok_or_else(|| PdeError::Parameter("camera roll variant without roll_angle".into()))?;
    Ok(Some((angle, data.principal_point())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthio::{OutputKind, PerturbationType};
    use proptest::prelude::*;

    #[test]
    fn average_examples() {
        assert_eq!(average_error(&[2.0, 2.0, 2.0]).unwrap(), 2.0);
        assert_eq!(average_error(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert!(average_error(&[]).is_err());
        let depthpro = [1.18, 1.70, 1.11, 1.16, 1.27, 1.10, 1.16, 1.07, 1.14, 1.54, 1.16];
        assert!((average_error(&depthpro).unwrap() - 1.24).abs() < 0.005);
    }

    #[test]
    fn instability_examples() {
        assert_eq!(accuracy_instability(&[0.7, 0.7, 0.7]).unwrap(), 0.0);
        assert_eq!(accuracy_instability(&[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(accuracy_instability(&[0.0, 2.0]).unwrap(), 2.0);
        assert!(accuracy_instability(&[1.0]).is_err());
    }

    #[test]
    fn inconsistency_examples() {
        assert_eq!(self_inconsistency(&[0.0, 0.0]).unwrap(), 0.0);
        assert!((self_inconsistency(&[0.1, 0.3]).unwrap() - 0.05).abs() < 1e-15);
        assert!(self_inconsistency(&[]).is_err());
        assert!((mean_abs_difference(&[0.1, -0.3]).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn eligibility_examples() {
        let metric = ModelEntry::new("DepthPro", OutputKind::MetricDepth);
        let disparity = ModelEntry::new("MiDaS", OutputKind::AffineDisparity);
        let lighting = PerturbationMeta::new(PerturbationType::Lighting);
        assert!(eligibility(&lighting, &metric));
        assert!(!eligibility(&lighting, &disparity));
        assert!(!eligibility(
            &PerturbationMeta::new(PerturbationType::ObjRotation),
            &metric
        ));
        assert!(eligibility(&lighting, &ModelEntry::new("s", OutputKind::ScaleDepth)));
        assert!(!eligibility(&lighting, &ModelEntry::new("a", OutputKind::AffineDepth)));
    }

    fn two_pass_variance(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mu = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0)
    }

    proptest! {
        #[test]
        fn sigma_matches_two_pass(xs in proptest::collection::vec(0.0f64..10.0, 2..40)) {
            let got = accuracy_instability(&xs).unwrap();
            prop_assert!((got - two_pass_variance(&xs)).abs() <= 1e-12);
            prop_assert!(got >= 0.0);
        }

        #[test]
        fn sigma_zero_iff_constant(x in 0.0f64..10.0, n in 2usize..10, bump in 1e-3f64..1.0) {
            prop_assert_eq!(accuracy_instability(&vec![x; n]).unwrap(), 0.0);
            let mut xs = vec![x; n];
            xs[0] += bump;
            prop_assert!(accuracy_instability(&xs).unwrap() > 0.0);
        }

        #[test]
        fn kappa_monotone_under_larger_append(ds in proptest::collection::vec(-1.0f64..1.0, 1..20), extra in 1.0f64..2.0) {
            let before = self_inconsistency(&ds).unwrap();
            let mut more = ds.clone();
            more.push(extra);
            prop_assert!(self_inconsistency(&more).unwrap() >= before);
        }
    }
}
