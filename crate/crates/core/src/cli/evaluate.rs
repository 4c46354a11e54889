use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{error_json, thread_pool, EvalFlags, Outcome};
use crate::depthio::{load_manifest, Benchmark, ModelEntry, PerturbationType, SceneGroup};
use crate::error::{PdeError, Result};
use crate::metrics::{EvalConfig, MetricRow};
use crate::report::{aggregate, emit, GroupBy, TableFormat};
use crate::robust::{evaluate_group, GroupEvaluation, RobustnessRow, Skip};

/// Everything `pde evaluate` needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    /// Overrides the manifest's erosion radius.
    pub erosion_radius: Option<usize>,
    pub eval: EvalFlags,
    /// 0 picks one thread per core. Never affects outputs.
    pub threads: usize,
    pub models: Vec<String>,
    pub perturbations: Vec<PerturbationType>,
    pub allow_skips: bool,
    pub by_category: bool,
}

#[derive(Serialize)]
struct SkipRecord<'a> {
    model: &'a str,
    group_id: &'a str,
    #[serde(flatten)]
    skip: &'a Skip,
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn select<'a>(bench: &'a Benchmark, cfg: &RunConfig) -> Result<(Vec<&'a ModelEntry>, Vec<&'a SceneGroup>)> {
    let unknown: Vec<&String> = cfg.models.iter().filter(|m| bench.model(m).is_none()).collect();
    if !unknown.is_empty() {
        return Err(PdeError::Parameter(format!("unknown models in filter: {unknown:?}")));
    }
    let models = bench
        .models
        .iter()
        .filter(|m| cfg.models.is_empty() || cfg.models.contains(&m.name))
        .collect();
    let wanted: BTreeSet<PerturbationType> = cfg.perturbations.iter().copied().collect();
    let groups: Vec<&SceneGroup> = bench
        .groups
        .iter()
        .filter(|g| wanted.is_empty() || wanted.contains(&g.perturbation_type()))
        .collect();
    if groups.is_empty() {
        return Err(PdeError::Parameter(
            "no scene group matches the perturbation filter".into(),
        ));
    }
    Ok((models, groups))
}

/// Digest over everything that determines the outputs: manifest bytes,
/// referenced files, evaluation configuration and filters.
fn run_digest(cfg: &RunConfig, eval: &EvalConfig, bench: &Benchmark) -> Result<Value> {
    let manifest_bytes = fs::read(&cfg.manifest).map_err(|e| PdeError::io(&cfg.manifest, e))?;
    let root = cfg.manifest.parent().unwrap_or(Path::new("."));
    let mut files = BTreeSet::new();
    for g in &bench.groups {
        for r in g.records() {
            files.extend(r.files().into_iter().map(Path::to_path_buf));
        }
    }
    let inputs = files
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|e| PdeError::io(p, e))?;
            let shown = p.strip_prefix(root).unwrap_or(p);
            Ok(InputDigest {
                path: shown.to_string_lossy().replace('\\', "/"),
                sha256: sha256_hex(&bytes),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut models = cfg.models.clone();
    models.sort();
    let mut perturbations: Vec<&str> = cfg.perturbations.iter().map(|p| p.as_str()).collect();
    perturbations.sort();
    let settings = json!({
        "eval": eval,
        "models": models,
        "perturbations": perturbations,
        "by_category": cfg.by_category,
    });
    let mut hasher = Sha256::new();
    hasher.update(&manifest_bytes);
    hasher.update(settings.to_string().as_bytes());
    for i in &inputs {
        hasher.update(i.path.as_bytes());
        hasher.update(i.sha256.as_bytes());
    }
    Ok(json!({
        "digest": hex::encode(hasher.finalize()),
        "manifest_sha256": sha256_hex(&manifest_bytes),
        "settings": settings,
        "inputs": inputs,
    }))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| PdeError::io(path, e))
}

fn write_robustness_csv(path: &Path, rows: &[RobustnessRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| PdeError::format(path, e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| PdeError::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| PdeError::io(path, e))
}

/// Evaluates a manifest and writes `metric_rows.json`, `robustness_rows.{csv,json}`,
/// `aggregate.{csv,json}` and `run_digest.json` into the output directory.
pub fn cmd_evaluate(cfg: &RunConfig) -> Outcome {
    match evaluate_inner(cfg) {
        Ok(o) => o,
        Err(e) => Outcome::from_error(&e),
    }
}

fn evaluate_inner(cfg: &RunConfig) -> Result<Outcome> {
    let bench = load_manifest(&cfg.manifest)?;
    let eval = cfg.eval.to_config(cfg.erosion_radius.unwrap_or(bench.erosion_radius));
    eval.validate()?;
    let (models, groups) = select(&bench, cfg)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| PdeError::io(&cfg.out_dir, e))?;

    let pairs: Vec<(&ModelEntry, &SceneGroup)> = models
        .iter()
        .flat_map(|m| groups.iter().map(move |g| (*m, *g)))
        .collect();
    info!("evaluating {} model/group pairs", pairs.len());
    let pool = thread_pool(cfg.threads)?;
    let results: Vec<Result<GroupEvaluation>> =
        pool.install(|| pairs.par_iter().map(|(m, g)| evaluate_group(g, m, &eval)).collect());

    let mut rows: Vec<RobustnessRow> = Vec::new();
    let mut metric_rows: Vec<MetricRow> = Vec::new();
    let mut skips = Vec::new();
    let mut errors = Vec::new();
    let mut skipped_groups = Vec::new();
    for ((model, group), res) in pairs.iter().zip(&results) {
        match res {
            Ok(ev) => {
                rows.extend(ev.rows.iter().cloned());
                metric_rows.extend(ev.metric_rows.iter().cloned());
                for s in &ev.skipped {
                    skips.push(
                        serde_json::to_value(SkipRecord {
                            model: &model.name,
                            group_id: &group.group_id,
                            skip: s,
                        })
                        .expect("serializable"),
                    );
                }
            }
            Err(e) => {
                let mut entry = error_json(e);
                entry["model"] = json!(model.name);
                entry["group_id"] = json!(group.group_id);
                if matches!(e, PdeError::Group { .. }) {
                    warn!("{}: {e}", model.name);
                    skipped_groups.push(entry);
                } else {
                    warn!("{}/{}: {e}", model.name, group.group_id);
                    errors.push(entry);
                }
            }
        }
    }

    let out = &cfg.out_dir;
    let mut outputs = vec![];
    let mut note = |p: PathBuf| outputs.push(p.to_string_lossy().into_owned());
    write_json(&out.join("metric_rows.json"), &metric_rows)?;
    note(out.join("metric_rows.json"));
    write_json(&out.join("robustness_rows.json"), &rows)?;
    note(out.join("robustness_rows.json"));
    write_robustness_csv(&out.join("robustness_rows.csv"), &rows)?;
    note(out.join("robustness_rows.csv"));
    let digest = run_digest(cfg, &eval, &bench)?;
    write_json(&out.join("run_digest.json"), &digest)?;
    note(out.join("run_digest.json"));
    if !rows.is_empty() {
        let mut table = aggregate(
            &rows,
            GroupBy {
                category: cfg.by_category,
            },
        )?;
        table.config_digest = digest["digest"].as_str().map(String::from);
        emit(&table, TableFormat::Csv, out.join("aggregate.csv"))?;
        note(out.join("aggregate.csv"));
        emit(&table, TableFormat::Json, out.join("aggregate.json"))?;
        note(out.join("aggregate.json"));
    } else if errors.is_empty() {
        let e = PdeError::Aggregation("every group was skipped".into());
        errors.push(error_json(&e));
    }

    let clean = errors.is_empty() && (cfg.allow_skips || (skips.is_empty() && skipped_groups.is_empty()));
    let summary = json!({
        "status": if clean { "ok" } else { "error" },
        "digest": digest["digest"],
        "pairs": pairs.len(),
        "robustness_rows": rows.len(),
        "metric_rows": metric_rows.len(),
        "errors": errors,
        "skipped_groups": skipped_groups,
        "skipped_records": skips,
        "outputs": outputs,
    });
    Ok(if clean {
        Outcome::ok(summary)
    } else {
        Outcome::failed(summary)
    })
}
