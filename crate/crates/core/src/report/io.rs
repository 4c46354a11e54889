//! CSV and JSON exchange of result tables.
//!
//! CSV header: `perturbation,model,metric,statistic,value,n_effective`, with
//! optional `category` and `erosion_radius` columns in any order. Lines
//! starting with `#` are comments. An empty `value` cell means "undefined".

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{metric_scale, Cell, CellKey, ResultTable, Source};
use crate::depthio::Category;
use crate::error::{PdeError, Result};
use crate::metrics::MetricKind;

const REQUIRED: [&str; 6] = ["perturbation", "model", "metric", "statistic", "value", "n_effective"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => TableFormat::Json,
            _ => TableFormat::Csv,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRecord {
    perturbation: String,
    model: String,
    metric: String,
    statistic: String,
    value: Option<f64>,
    n_effective: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<Category>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    erosion_radius: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonMetadata {
    source: Source,
    #[serde(default)]
    config_digest: Option<String>,
    #[serde(default)]
    scales: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonTable {
    metadata: JsonMetadata,
    records: Vec<JsonRecord>,
}

/// Reads a published or previously emitted table (CSV, or JSON by extension).
/// The result is flagged [`Source::External`].
pub fn ingest_external_results(path: impl AsRef<Path>) -> Result<ResultTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| PdeError::io(path, e))?;
    match TableFormat::from_path(path) {
        TableFormat::Json => parse_json(&text),
        TableFormat::Csv => parse_csv(&text),
    }
}

fn parse_err(line: u64, msg: impl Into<String>) -> PdeError {
    PdeError::Parse { line, msg: msg.into() }
}

pub fn parse_csv(text: &str) -> Result<ResultTable> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(csv_line(&e), e.to_string()))?
        .clone();
    let header_line = text
        .lines()
        .position(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .map_or(1, |i| i as u64 + 1);
    let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(REQUIRED) {
        *slot = col(name).ok_or_else(|| parse_err(header_line, format!("header lacks column {name:?}")))?;
    }
    let cat_col = col("category");
    let radius_col = col("erosion_radius");

    let mut table = ResultTable::new(Source::External);
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(csv_line(&e), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let record = JsonRecord {
            perturbation: field(idx[0]).to_string(),
            model: field(idx[1]).to_string(),
            metric: field(idx[2]).to_string(),
            statistic: field(idx[3]).to_string(),
            value: optional(field(idx[4]), line, "value")?,
            n_effective: optional(field(idx[5]), line, "n_effective")?,
            category: match cat_col.map(field) {
                Some(s) if !s.is_empty() => Some(s.parse().map_err(|e: String| parse_err(line, e))?),
                _ => None,
            },
            erosion_radius: match radius_col {
                Some(i) => optional(field(i), line, "erosion_radius")?,
                None => None,
            },
        };
        insert_record(&mut table, record, line)?;
    }
    if table.is_empty() {
        return Err(parse_err(header_line, "table has no data rows"));
    }
    Ok(table)
}

fn csv_line(e: &csv::Error) -> u64 {
    e.position().map_or(0, |p| p.line())
}

fn optional<T: std::str::FromStr>(s: &str, line: u64, what: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|e| parse_err(line, format!("bad {what} {s:?}: {e}")))
}

fn insert_record(table: &mut ResultTable, r: JsonRecord, line: u64) -> Result<()> {
    if r.model.is_empty() {
        return Err(parse_err(line, "empty model name"));
    }
    let key = CellKey {
        perturbation: r.perturbation.parse().map_err(|e: String| parse_err(line, e))?,
        model: r.model,
        metric: r
            .metric
            .parse::<MetricKind>()
            .map_err(|e| parse_err(line, e.to_string()))?,
        statistic: r.statistic.parse().map_err(|e: String| parse_err(line, e))?,
        category: r.category,
        erosion_radius: r.erosion_radius,
    };
    let cell = Cell {
        value: r.value,
        n_effective: r.n_effective,
    };
    table.insert(key, cell).map_err(|e| parse_err(line, e.to_string()))
}

pub fn parse_json(text: &str) -> Result<ResultTable> {
    let doc: JsonTable = serde_json::from_str(text).map_err(|e| parse_err(e.line() as u64, e.to_string()))?;
    let mut table = ResultTable::new(Source::External);
    table.config_digest = doc.metadata.config_digest;
    for (i, r) in doc.records.into_iter().enumerate() {
        // records carry no line numbers; report the 1-based record index
        insert_record(&mut table, r, i as u64 + 1)?;
    }
    if table.is_empty() {
        return Err(parse_err(1, "table has no records"));
    }
    Ok(table)
}

/// Two-decimal CSV in key order. Optional columns appear only when used.
pub fn to_csv_string(table: &ResultTable) -> String {
    let with_cat = table.cells().keys().any(|k| k.category.is_some());
    let with_radius = table.cells().keys().any(|k| k.erosion_radius.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = REQUIRED.to_vec();
    if with_cat {
        header.push("category");
    }
    if with_radius {
        header.push("erosion_radius");
    }
    w.write_record(&header).expect("in-memory write");
    for (k, c) in table.cells() {
        let mut row = vec![
            k.perturbation.to_string(),
            k.model.clone(),
            k.metric.to_string(),
            k.statistic.to_string(),
            c.value.map(|v| format!("{v:.2}")).unwrap_or_default(),
            c.n_effective.map(|n| n.to_string()).unwrap_or_default(),
        ];
        if with_cat {
            row.push(k.category.map(|c| c.to_string()).unwrap_or_default());
        }
        if with_radius {
            row.push(k.erosion_radius.map(|r| r.to_string()).unwrap_or_default());
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 fields")
}

/// Full-precision JSON with a metadata object.
pub fn to_json_string(table: &ResultTable) -> String {
    let scales = MetricKind::ALL
        .iter()
        .map(|m| (m.to_string(), metric_scale(*m).to_string()))
        .collect();
    let doc = JsonTable {
        metadata: JsonMetadata {
            source: table.source,
            config_digest: table.config_digest.clone(),
            scales,
        },
        records: table
            .cells()
            .iter()
            .map(|(k, c)| JsonRecord {
                perturbation: k.perturbation.to_string(),
                model: k.model.clone(),
                metric: k.metric.to_string(),
                statistic: k.statistic.to_string(),
                value: c.value,
                n_effective: c.n_effective,
                category: k.category,
                erosion_radius: k.erosion_radius,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

pub fn emit(table: &ResultTable, format: TableFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        TableFormat::Csv => to_csv_string(table),
        TableFormat::Json => to_json_string(table),
    };
    fs::write(path, text).map_err(|e| PdeError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthio::PerturbationType;
    use crate::report::{PerturbationAxis, Statistic};

    fn sample() -> ResultTable {
        let mut t = ResultTable::new(Source::Computed);
        let lighting = PerturbationAxis::Type(PerturbationType::Lighting);
        t.insert(
            CellKey::new(lighting, "m", MetricKind::AbsRel, Statistic::Mu),
            Cell {
                value: Some(1.2345),
                n_effective: Some(4),
            },
        )
        .unwrap();
        t.insert(
            CellKey::new(lighting, "m", MetricKind::AbsRel, Statistic::Kappa),
            Cell {
                value: None,
                n_effective: Some(0),
            },
        )
        .unwrap();
        t
    }

    #[test]
    fn csv_formatting_and_absence() {
        let csv = to_csv_string(&sample());
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "perturbation,model,metric,statistic,value,n_effective");
        assert_eq!(lines[1], "lighting,m,absrel,mu,1.23,4");
        assert_eq!(lines[2], "lighting,m,absrel,kappa,,0");
        let json = to_json_string(&sample());
        assert!(json.contains("\"value\": null"));
    }

    #[test]
    fn round_trips() {
        let t = sample();
        let back = parse_json(&to_json_string(&t)).unwrap();
        assert_eq!(back.cells(), t.cells());
        assert_eq!(back.source, Source::External);
        let back = parse_csv(&to_csv_string(&t)).unwrap();
        let k = CellKey::new(
            PerturbationAxis::Type(PerturbationType::Lighting),
            "m",
            MetricKind::AbsRel,
            Statistic::Mu,
        );
        assert_eq!(back.value(&k), Some(1.23));
    }

    #[test]
    fn parse_errors_carry_lines() {
        assert!(matches!(
            parse_csv("perturbation,model,metric,statistic,value,n_effective\n"),
            Err(PdeError::Parse { .. })
        ));
        let text = "# comment\nperturbation,model,metric,statistic,value,n_effective\nlighting,m,absrel,mu,1.0,\nlighting,m,absrel,sigma,abc,\n";
        match parse_csv(text) {
            Err(PdeError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match parse_csv("perturbation,model,metric,value\n") {
            Err(PdeError::Parse { line, msg }) => {
                assert_eq!(line, 1);
                assert!(msg.contains("statistic"));
            }
            other => panic!("{other:?}"),
        }
        let dup =
            "perturbation,model,metric,statistic,value,n_effective\nlighting,m,absrel,mu,1,\nLighting,m,absrel,mu,2,\n";
        assert!(matches!(parse_csv(dup), Err(PdeError::Parse { line: 3, .. })));
    }

    #[test]
    fn optional_columns_any_order() {
        let text = "model,erosion_radius,perturbation,metric,statistic,value,n_effective,category\nm,2,average,rmse,sigma,0.5,,fish\n";
        let t = parse_csv(text).unwrap();
        let (k, c) = t.cells().iter().next().unwrap();
        assert_eq!(k.erosion_radius, Some(2));
        assert_eq!(k.category, Some(Category::Fish));
        assert_eq!(c.value, Some(0.5));
        let again = parse_csv(&to_csv_string(&t)).unwrap();
        assert_eq!(again.cells(), t.cells());
    }
}
