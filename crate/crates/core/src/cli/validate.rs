use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::Outcome;
use crate::depthio::{parse_manifest, read_header, Background, Benchmark, SceneRecord};
use crate::error::PdeError;

/// One problem found by `pde validate`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

fn violation(location: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation {
        location: location.into(),
        message: message.into(),
    }
}

/// Schema, file-existence and dimension checks; nothing is evaluated.
pub fn cmd_validate(manifest: &Path) -> Outcome {
    let violations = validate_manifest(manifest);
    let status = if violations.is_empty() { "ok" } else { "invalid" };
    let out = json!({ "status": status, "manifest": manifest, "violations": violations });
    if violations.is_empty() {
        Outcome::ok(out)
    } else {
        Outcome::failed(out)
    }
}

pub(crate) fn validate_manifest(manifest: &Path) -> Vec<Violation> {
    let text = match fs::read_to_string(manifest) {
        Ok(t) => t,
        Err(e) => {
            return vec![violation(
                "manifest",
                format!("cannot read {}: {e}", manifest.display()),
            )]
        }
    };
    let root = manifest.parent().unwrap_or(Path::new("."));
    let bench = match parse_manifest(&text, root) {
        Ok(b) => b,
        Err(PdeError::Schema { location, msg }) => return vec![violation(location, msg)],
        Err(e) => return vec![violation("manifest", e.to_string())],
    };
    check_files(&bench)
}

fn check_files(bench: &Benchmark) -> Vec<Violation> {
    let mut out = Vec::new();
    for (gi, group) in bench.groups.iter().enumerate() {
        let mut base_dims = None;
        let records = std::iter::once((format!("groups[{gi}].base"), &group.base)).chain(
            group
                .variants
                .iter()
                .enumerate()
                .map(|(vi, r)| (format!("groups[{gi}].variants[{vi}]"), r)),
        );
        for (loc, record) in records {
            for m in &bench.models {
                if !record.predictions.contains_key(&m.name) {
                    out.push(violation(
                        format!("{loc}.predictions.{}", m.name),
                        "no prediction for declared model",
                    ));
                }
            }
            for (field, path) in record_files(record) {
                let at = format!("{loc}.{field}");
                match read_header(path) {
                    Ok(h) => {
                        let dims = (h.width, h.height);
                        match base_dims {
                            None => base_dims = Some(dims),
                            Some(b) if b != dims => out.push(violation(
                                at,
                                format!("{}x{} raster differs from the base {}x{}", dims.0, dims.1, b.0, b.1),
                            )),
                            Some(_) => {}
                        }
                    }
                    Err(e) => out.push(violation(at, e.to_string())),
                }
            }
        }
    }
    out
}

fn record_files(r: &SceneRecord) -> Vec<(String, &Path)> {
    let mut files = vec![
        ("gt".to_string(), r.gt.as_path()),
        ("object_mask".to_string(), r.object_mask.as_path()),
    ];
    if let Background::MaskFile(p) = &r.background {
        files.push(("background_mask".to_string(), p.as_path()));
    }
    for (name, p) in &r.predictions {
        files.push((format!("predictions.{name}"), p.as_path()));
    }
    files
}
