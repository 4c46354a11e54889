use rayon::prelude::*;
use serde::Serialize;

use super::{aggregate_with_radius, GroupBy, ResultTable, Source};
use crate::depthio::{Benchmark, ModelEntry};
use crate::error::{PdeError, Result};
use crate::metrics::EvalConfig;
use crate::robust::evaluate_group;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedRadius {
    pub radius: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Cells keyed with `erosion_radius = Some(r)`.
    pub table: ResultTable,
    pub skipped: Vec<SkippedRadius>,
}

/// Re-evaluates `model` on every group once per erosion radius.
///
/// Groups that cannot be evaluated at a radius (all masks eroded away) are
/// left out of that radius; a radius with no surviving group is reported
/// as skipped.
pub fn erosion_sweep(
    bench: &Benchmark,
    model: &ModelEntry,
    radii: &[usize],
    config: &EvalConfig,
) -> Result<SweepResult> {
    if radii.is_empty() {
        return Err(PdeError::Parameter("erosion sweep needs at least one radius".into()));
    }
    if radii.windows(2).any(|w| w[0] > w[1]) {
        return Err(PdeError::Parameter(format!(
            "erosion radii must be non-decreasing: {radii:?}"
        )));
    }
    if bench.groups.is_empty() {
        return Err(PdeError::Parameter("benchmark has no groups".into()));
    }
    let mut unique = radii.to_vec();
    unique.dedup();

    let per_radius: Vec<Result<std::result::Result<ResultTable, SkippedRadius>>> = unique
        .par_iter()
        .map(|&radius| {
            let cfg = EvalConfig {
                erosion_radius: radius,
                ..config.clone()
            };
            let mut rows = Vec::new();
            let mut last_reason = String::new();
            for g in &bench.groups {
                match evaluate_group(g, model, &cfg) {
                    Ok(ev) => rows.extend(ev.rows),
                    Err(e @ PdeError::Group { .. }) => last_reason = e.to_string(),
                    Err(e) => return Err(e),
                }
            }
            if rows.is_empty() {
                return Ok(Err(SkippedRadius {
                    radius,
                    reason: last_reason,
                }));
            }
            Ok(Ok(aggregate_with_radius(&rows, GroupBy::default(), Some(radius))?))
        })
        .collect();

    let mut table = ResultTable::new(Source::Computed);
    let mut skipped = Vec::new();
    for r in per_radius {
        match r? {
            Ok(t) => table.extend(t)?,
            Err(s) => skipped.push(s),
        }
    }
    Ok(SweepResult { table, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthio::{Category, OutputKind};
    use crate::geom::{make_fixture_group, PlanEntry, PseudoPrediction, SceneSpec};
    use crate::metrics::MetricKind;
    use crate::report::{aggregate, CellKey, PerturbationAxis, Statistic};

    fn bench(dir: &std::path::Path, preds: &[PseudoPrediction]) -> Benchmark {
        let spec = SceneSpec::desk(Category::Cabinet, 40, 40, 2).unwrap();
        let g = make_fixture_group(&spec, &[PlanEntry::Lighting], "cab", Category::Cabinet, preds, dir).unwrap();
        Benchmark {
            models: preds.iter().map(PseudoPrediction::model_entry).collect(),
            groups: vec![g],
            erosion_radius: 1,
        }
    }

    fn mu(t: &ResultTable, model: &str, r: usize) -> f64 {
        let mut k = CellKey::new(PerturbationAxis::Average, model, MetricKind::AbsRel, Statistic::Mu);
        k.erosion_radius = Some(r);
        t.value(&k).unwrap()
    }

    #[test]
    fn boundary_error_disappears_with_erosion() {
        let dir = tempfile::tempdir().unwrap();
        let preds = [
            PseudoPrediction {
                boundary_factor: Some(1.5),
                ..PseudoPrediction::exact("edge", OutputKind::MetricDepth)
            },
            PseudoPrediction::exact("same", OutputKind::MetricDepth),
        ];
        let b = bench(dir.path(), &preds);
        let cfg = EvalConfig::default();
        let edge = erosion_sweep(&b, &b.models[0], &[0, 1, 2, 3], &cfg).unwrap();
        assert!(mu(&edge.table, "edge", 2) < mu(&edge.table, "edge", 0));
        assert!(mu(&edge.table, "edge", 2) < 1e-4);
        let same = erosion_sweep(&b, &b.models[1], &[0, 1, 2, 3], &cfg).unwrap();
        for r in 0..4 {
            assert!(mu(&same.table, "same", r) < 1e-9);
        }
    }

    #[test]
    fn radius_zero_matches_plain_evaluation() {
        let dir = tempfile::tempdir().unwrap();
        let preds = [PseudoPrediction {
            noise: 0.05,
            seed: 3,
            ..PseudoPrediction::exact("n", OutputKind::MetricDepth)
        }];
        let b = bench(dir.path(), &preds);
        let cfg = EvalConfig {
            erosion_radius: 0,
            ..Default::default()
        };
        let sweep = erosion_sweep(&b, &b.models[0], &[0], &cfg).unwrap();
        let rows = evaluate_group(&b.groups[0], &b.models[0], &cfg).unwrap().rows;
        let plain = aggregate(&rows, GroupBy::default()).unwrap();
        assert_eq!(sweep.table.len(), plain.len());
        for (k, c) in plain.cells() {
            let mut k2 = k.clone();
            k2.erosion_radius = Some(0);
            assert_eq!(sweep.table.get(&k2), Some(c));
        }
    }

    #[test]
    fn huge_radius_is_skipped_and_order_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let b = bench(dir.path(), &[PseudoPrediction::exact("m", OutputKind::MetricDepth)]);
        let cfg = EvalConfig::default();
        let s = erosion_sweep(&b, &b.models[0], &[1, 40], &cfg).unwrap();
        assert_eq!(s.skipped.len(), 1);
        assert_eq!(s.skipped[0].radius, 40);
        assert!(erosion_sweep(&b, &b.models[0], &[2, 1], &cfg).is_err());
    }
}
