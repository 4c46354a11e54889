use std::fs;
use std::path::PathBuf;

use serde_json::{json, Value};

use super::{error_json, thread_pool, EvalFlags, Outcome};
use crate::depthio::load_manifest;
use crate::error::{PdeError, Result};
use crate::metrics::MetricKind;
use crate::report::{
    emit, erosion_sweep, ingest_external_results, rank_models_at, CellKey, PerturbationAxis, RankQuery, ResultTable,
    Statistic, TableFormat,
};

#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Results directory (reads `aggregate.json`) or a table file.
    pub input: PathBuf,
    pub metric: MetricKind,
    /// Empty means mu, sigma and kappa, skipping those absent from the table.
    pub statistics: Vec<Statistic>,
    pub perturbation: PerturbationAxis,
    pub out: Option<PathBuf>,
}

fn load_table(input: &std::path::Path) -> Result<ResultTable> {
    if input.is_dir() {
        ingest_external_results(input.join("aggregate.json"))
    } else {
        ingest_external_results(input)
    }
}

/// Published averages next to the unweighted mean of their per-type cells.
fn average_consistency(table: &ResultTable, metric: MetricKind) -> Result<Vec<Value>> {
    let recomputed = table.averages_over_perturbations()?;
    let mut out = Vec::new();
    for (k, c) in table.cells() {
        if k.perturbation != PerturbationAxis::Average || k.metric != metric {
            continue;
        }
        if let (Some(published), Some(again)) = (c.value, recomputed.value(k)) {
            out.push(json!({
                "model": k.model,
                "statistic": k.statistic,
                "published": published,
                "recomputed": again,
                "abs_diff": (published - again).abs(),
            }));
        }
    }
    Ok(out)
}

pub fn cmd_report(opts: &ReportOptions) -> Outcome {
    match report_inner(opts) {
        Ok(o) => o,
        Err(e) => Outcome::from_error(&e),
    }
}

fn report_inner(opts: &ReportOptions) -> Result<Outcome> {
    let table = load_table(&opts.input)?;
    let explicit = !opts.statistics.is_empty();
    let stats = if explicit {
        opts.statistics.clone()
    } else {
        vec![Statistic::Mu, Statistic::Sigma, Statistic::Kappa]
    };
    let mut rankings = Vec::new();
    let mut failed = false;
    for stat in stats {
        let present = table.cells().iter().any(|(k, c)| {
            k.statistic == stat && k.metric == opts.metric && k.perturbation == opts.perturbation && c.value.is_some()
        });
        if !present && !explicit {
            continue;
        }
        let query = RankQuery {
            perturbation: opts.perturbation,
            metric: opts.metric,
            statistic: stat,
            category: None,
            erosion_radius: None,
        };
        match rank_models_at(&table, &query) {
            Ok(entries) => rankings.push(json!({ "statistic": stat, "entries": entries })),
            Err(e) => {
                failed = true;
                rankings.push(json!({ "statistic": stat, "error": error_json(&e) }));
            }
        }
    }
    if let Some(out) = &opts.out {
        emit(&table, TableFormat::from_path(out), out)?;
    }
    let summary = json!({
        "status": if failed { "error" } else { "ok" },
        "input": opts.input,
        "metric": opts.metric,
        "perturbation": opts.perturbation.to_string(),
        "rankings": rankings,
        "average_consistency": average_consistency(&table, opts.metric)?,
    });
    Ok(if failed {
        Outcome::failed(summary)
    } else {
        Outcome::ok(summary)
    })
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub manifest: PathBuf,
    pub model: String,
    pub radii: Vec<usize>,
    pub out_dir: PathBuf,
    pub eval: EvalFlags,
    pub threads: usize,
}

pub fn cmd_erode_sweep(cfg: &SweepConfig) -> Outcome {
    match sweep_inner(cfg) {
        Ok(o) => o,
        Err(e) => Outcome::from_error(&e),
    }
}

fn sweep_inner(cfg: &SweepConfig) -> Result<Outcome> {
    let bench = load_manifest(&cfg.manifest)?;
    let model = bench
        .model(&cfg.model)
        .ok_or_else(|| PdeError::Parameter(format!("unknown model {:?}", cfg.model)))?
        .clone();
    let eval = cfg.eval.to_config(0);
    eval.validate()?;
    let pool = thread_pool(cfg.threads)?;
    let result = pool.install(|| erosion_sweep(&bench, &model, &cfg.radii, &eval))?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| PdeError::io(&cfg.out_dir, e))?;
    let csv = cfg.out_dir.join("erosion_sweep.csv");
    let json_path = cfg.out_dir.join("erosion_sweep.json");
    emit(&result.table, TableFormat::Csv, &csv)?;
    emit(&result.table, TableFormat::Json, &json_path)?;

    let metric = eval.metrics[0];
    let mut radii = cfg.radii.clone();
    radii.dedup();
    let curve: Vec<Value> = radii
        .iter()
        .filter(|r| !result.skipped.iter().any(|s| s.radius == **r))
        .map(|&r| {
            let get = |stat| {
                let mut k = CellKey::new(PerturbationAxis::Average, model.name.clone(), metric, stat);
                k.erosion_radius = Some(r);
                result.table.value(&k)
            };
            json!({
                "radius": r,
                "mu": get(Statistic::Mu),
                "sigma": get(Statistic::Sigma),
                "kappa": get(Statistic::Kappa),
            })
        })
        .collect();
    Ok(Outcome::ok(json!({
        "status": "ok",
        "model": model.name,
        "metric": metric,
        "curve": curve,
        "skipped_radii": result.skipped,
        "outputs": [csv, json_path],
    })))
}
