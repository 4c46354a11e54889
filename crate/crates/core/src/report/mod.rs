//! Result tables: aggregation of robustness rows, model rankings, erosion
//! sweeps, and CSV/JSON exchange with externally published numbers.

mod io;
mod sweep;

pub use io::{emit, ingest_external_results, parse_csv, parse_json, to_csv_string, to_json_string, TableFormat};
pub use sweep::{erosion_sweep, SkippedRadius, SweepResult};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::depthio::{Category, PerturbationType};
use crate::error::{PdeError, Result};
use crate::metrics::MetricKind;
use crate::numeric;
use crate::robust::RobustnessRow;

/// Row axis of a table: one perturbation type or the cross-type average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PerturbationAxis {
    Type(PerturbationType),
    Average,
}

impl PerturbationAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            PerturbationAxis::Type(t) => t.as_str(),
            PerturbationAxis::Average => "average",
        }
    }
}

impl fmt::Display for PerturbationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Loose label matching: case, spaces, slashes, dots and dashes are ignored,
/// so "Cam Pan/Tilt" reads as `cam_pan_tilt`.
fn normalize_label(s: &str) -> String {
    let mut out = String::new();
    for c in s.trim().chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    out.trim_end_matches('_').to_string()
}

impl FromStr for PerturbationAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let label = normalize_label(s);
        match label.as_str() {
            "average" | "avg" => Ok(PerturbationAxis::Average),
            "non_rigid_obj_deformation" => Ok(PerturbationAxis::Type(PerturbationType::NonRigidObjDeform)),
            other => other
                .parse::<PerturbationType>()
                .map(PerturbationAxis::Type)
                .map_err(|_| format!("unknown perturbation {s:?}")),
        }
    }
}

/// Which group-level statistic a cell holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Average error.
    Mu,
    /// Accuracy instability.
    Sigma,
    /// Self-inconsistency.
    Kappa,
    /// Mean absolute difference against the base prediction (diagnostic).
    KappaMeanAbs,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [
        Statistic::Mu,
        Statistic::Sigma,
        Statistic::Kappa,
        Statistic::KappaMeanAbs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Mu => "mu",
            Statistic::Sigma => "sigma",
            Statistic::Kappa => "kappa",
            Statistic::KappaMeanAbs => "kappa_mean_abs",
        }
    }

    /// Whether a smaller value ranks first for `metric`.
    pub fn lower_is_better(self, metric: MetricKind) -> bool {
        match self {
            Statistic::Mu => metric.lower_is_better(),
            _ => true,
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Statistic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize_label(s).as_str() {
            "mu" | "error" | "avg_err" | "average_error" => Ok(Statistic::Mu),
            "sigma" | "instability" | "acc_in_stab" | "accuracy_instability" => Ok(Statistic::Sigma),
            "kappa" | "self_inconsistency" | "self_consistency" => Ok(Statistic::Kappa),
            "kappa_mean_abs" => Ok(Statistic::KappaMeanAbs),
            _ => Err(format!("unknown statistic {s:?}")),
        }
    }
}

/// Reporting scale of each metric, written into table metadata.
pub fn metric_scale(metric: MetricKind) -> &'static str {
    match metric {
        MetricKind::AbsRel => "percent",
        MetricKind::Rmse => "cm",
        MetricKind::Log10 => "unscaled",
        _ => "percent of pixels",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub perturbation: PerturbationAxis,
    pub model: String,
    pub metric: MetricKind,
    pub statistic: Statistic,
    pub category: Option<Category>,
    pub erosion_radius: Option<usize>,
}

impl CellKey {
    pub fn new(
        perturbation: PerturbationAxis,
        model: impl Into<String>,
        metric: MetricKind,
        statistic: Statistic,
    ) -> Self {
        CellKey {
            perturbation,
            model: model.into(),
            metric,
            statistic,
            category: None,
            erosion_radius: None,
        }
    }

    fn label(&self) -> String {
        let mut s = format!(
            "{}/{}/{}/{}",
            self.perturbation, self.model, self.metric, self.statistic
        );
        if let Some(c) = self.category {
            s.push_str(&format!("/{c}"));
        }
        if let Some(r) = self.erosion_radius {
            s.push_str(&format!("/r{r}"));
        }
        s
    }
}

/// A cell value; `None` means the statistic is undefined (e.g. `kappa` for an
/// ineligible perturbation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub value: Option<f64>,
    pub n_effective: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Computed,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub source: Source,
    /// Digest of the configuration that produced the table, if known.
    pub config_digest: Option<String>,
    cells: BTreeMap<CellKey, Cell>,
}

impl ResultTable {
    pub fn new(source: Source) -> Self {
        ResultTable {
            source,
            config_digest: None,
            cells: BTreeMap::new(),
        }
    }

    /// Adds a cell; a key may appear only once.
    pub fn insert(&mut self, key: CellKey, cell: Cell) -> Result<()> {
        if let Some(v) = cell.value {
            if !v.is_finite() {
                return Err(PdeError::Aggregation(format!("non-finite value in {}", key.label())));
            }
        }
        if self.cells.contains_key(&key) {
            return Err(PdeError::Aggregation(format!("duplicate cell {}", key.label())));
        }
        self.cells.insert(key, cell);
        Ok(())
    }

    pub fn get(&self, key: &CellKey) -> Option<&Cell> {
        self.cells.get(key)
    }

    pub fn value(&self, key: &CellKey) -> Option<f64> {
        self.cells.get(key).and_then(|c| c.value)
    }

    pub fn cells(&self) -> &BTreeMap<CellKey, Cell> {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn models(&self) -> BTreeSet<String> {
        self.cells.keys().map(|k| k.model.clone()).collect()
    }

    /// Merges `other` into `self`; overlapping keys are an error.
    pub fn extend(&mut self, other: ResultTable) -> Result<()> {
        for (k, c) in other.cells {
            self.insert(k, c)?;
        }
        Ok(())
    }

    /// Unweighted mean over perturbation types for every
    /// (model, metric, statistic, category, radius), ignoring existing
    /// average cells and absent values.
    pub fn averages_over_perturbations(&self) -> Result<ResultTable> {
        let mut buckets: BTreeMap<CellKey, Vec<Cell>> = BTreeMap::new();
        for (k, c) in &self.cells {
            if k.perturbation == PerturbationAxis::Average {
                continue;
            }
            let avg_key = CellKey {
                perturbation: PerturbationAxis::Average,
                ..k.clone()
            };
            buckets.entry(avg_key).or_default().push(*c);
        }
        let mut out = ResultTable::new(self.source);
        out.config_digest = self.config_digest.clone();
        for (k, cells) in buckets {
            out.insert(k, mean_cell(&cells))?;
        }
        Ok(out)
    }
}

fn mean_cell(cells: &[Cell]) -> Cell {
    let present: Vec<f64> = cells.iter().filter_map(|c| c.value).collect();
    let n: Option<usize> = cells.iter().filter(|c| c.value.is_some()).map(|c| c.n_effective).sum();
    Cell {
        value: numeric::mean(&present),
        n_effective: if present.is_empty() { Some(0) } else { n },
    }
}

/// Table layout for [`aggregate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GroupBy {
    /// Adds per-category cells next to the all-category ones.
    pub category: bool,
}

/// Averages robustness rows into a table.
///
/// Per-perturbation cells are unweighted means over scene groups; the
/// `average` row is the unweighted mean over perturbation types.
pub fn aggregate(rows: &[RobustnessRow], group_by: GroupBy) -> Result<ResultTable> {
    aggregate_with_radius(rows, group_by, None)
}

pub(crate) fn aggregate_with_radius(
    rows: &[RobustnessRow],
    group_by: GroupBy,
    erosion_radius: Option<usize>,
) -> Result<ResultTable> {
    if rows.is_empty() {
        return Err(PdeError::Aggregation("no robustness rows to aggregate".into()));
    }
    let mut seen = BTreeSet::new();
    for r in rows {
        if !seen.insert((&r.model, &r.group_id, r.metric)) {
            return Err(PdeError::Aggregation(format!(
                "duplicate row for {}/{}/{}",
                r.model, r.group_id, r.metric
            )));
        }
    }
    // sorted by group id within each cell so the result ignores input order
    let mut sorted: Vec<&RobustnessRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.group_id.cmp(&b.group_id));

    let mut buckets: BTreeMap<CellKey, Vec<Cell>> = BTreeMap::new();
    for r in sorted {
        let mut categories = vec![None];
        if group_by.category {
            categories.push(Some(r.category));
        }
        for category in categories {
            for stat in Statistic::ALL {
                let value = match stat {
                    Statistic::Mu => Some(r.mu),
                    Statistic::Sigma => Some(r.sigma),
                    Statistic::Kappa => r.kappa,
                    Statistic::KappaMeanAbs => r.kappa_mean_abs,
                };
                let n = match stat {
                    Statistic::Mu | Statistic::Sigma => r.n_variants,
                    _ => r.kappa_n,
                };
                let key = CellKey {
                    perturbation: PerturbationAxis::Type(r.perturbation),
                    model: r.model.clone(),
                    metric: r.metric,
                    statistic: stat,
                    category,
                    erosion_radius,
                };
                buckets.entry(key).or_default().push(Cell {
                    value,
                    n_effective: Some(n),
                });
            }
        }
    }
    let mut table = ResultTable::new(Source::Computed);
    for (k, cells) in buckets {
        table.insert(k, mean_cell(&cells))?;
    }
    let averages = table.averages_over_perturbations()?;
    table.extend(averages)?;
    Ok(table)
}

/// Cell selector for [`rank_models_at`].
#[derive(Debug, Clone, PartialEq)]
pub struct RankQuery {
    pub perturbation: PerturbationAxis,
    pub metric: MetricKind,
    pub statistic: Statistic,
    pub category: Option<Category>,
    pub erosion_radius: Option<usize>,
}

impl RankQuery {
    pub fn average(metric: MetricKind, statistic: Statistic) -> Self {
        RankQuery {
            perturbation: PerturbationAxis::Average,
            metric,
            statistic,
            category: None,
            erosion_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankEntry {
    /// 1-based; tied models share the rank of the first of them.
    pub rank: usize,
    pub model: String,
    pub value: f64,
    pub tied: bool,
}

/// Ranks every model of `table` on the `average` row.
pub fn rank_models(table: &ResultTable, metric: MetricKind, statistic: Statistic) -> Result<Vec<RankEntry>> {
    rank_models_at(table, &RankQuery::average(metric, statistic))
}

/// Orders models best first: ascending for lower-better statistics, and
/// descending for the average error of the delta family. Equal values are
/// ordered by model name and flagged as tied.
pub fn rank_models_at(table: &ResultTable, q: &RankQuery) -> Result<Vec<RankEntry>> {
    let mut entries = Vec::new();
    let mut missing = Vec::new();
    for model in table.models() {
        let key = CellKey {
            perturbation: q.perturbation,
            model: model.clone(),
            metric: q.metric,
            statistic: q.statistic,
            category: q.category,
            erosion_radius: q.erosion_radius,
        };
        match table.value(&key) {
            Some(v) => entries.push((model, v)),
            None => missing.push(key.label()),
        }
    }
    if !missing.is_empty() {
        return Err(PdeError::Ranking { missing });
    }
    let ascending = q.statistic.lower_is_better(q.metric);
    entries.sort_by(|(ma, a), (mb, b)| {
        let by_value = if ascending { a.total_cmp(b) } else { b.total_cmp(a) };
        by_value.then_with(|| ma.cmp(mb))
    });
    let mut out: Vec<RankEntry> = Vec::with_capacity(entries.len());
    for (i, (model, value)) in entries.into_iter().enumerate() {
        let tied_with_prev = out.last().is_some_and(|p| p.value == value);
        let rank = if tied_with_prev { out[i - 1].rank } else { i + 1 };
        if tied_with_prev {
            out[i - 1].tied = true;
        }
        out.push(RankEntry {
            rank,
            model,
            value,
            tied: tied_with_prev,
        });
    }
    Ok(out)
}

/// Unweighted mean over every model of the cell selected by `q`, like
/// the cross-model "Avg" column of a published table.
pub fn model_average(table: &ResultTable, q: &RankQuery) -> Result<f64> {
    let ranked = rank_models_at(table, q)?;
    let values: Vec<f64> = ranked.iter().map(|e| e.value).collect();
    numeric::mean(&values).ok_or_else(|| PdeError::Ranking {
        missing: vec!["(no models)".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: &str, group: &str, ptype: PerturbationType, mu: f64, kappa: Option<f64>) -> RobustnessRow {
        RobustnessRow {
            model: model.into(),
            group_id: group.into(),
            category: Category::Chair,
            perturbation: ptype,
            metric: MetricKind::AbsRel,
            mu,
            sigma: mu / 10.0,
            kappa,
            kappa_mean_abs: kappa.map(f64::sqrt),
            n_variants: 3,
            n_skipped: 0,
            kappa_n: kappa.map_or(0, |_| 3),
            border_flags: 0,
        }
    }

    fn key(p: PerturbationAxis, model: &str, s: Statistic) -> CellKey {
        CellKey::new(p, model, MetricKind::AbsRel, s)
    }

    #[test]
    fn labels_parse_loosely() {
        assert_eq!(
            "Cam Pan/Tilt".parse::<PerturbationAxis>().unwrap(),
            PerturbationAxis::Type(PerturbationType::CamPanTilt)
        );
        assert_eq!(
            "Non-Rigid Obj Deformation".parse::<PerturbationAxis>().unwrap(),
            PerturbationAxis::Type(PerturbationType::NonRigidObjDeform)
        );
        assert_eq!(
            "Average".parse::<PerturbationAxis>().unwrap(),
            PerturbationAxis::Average
        );
        assert_eq!("Acc. (In)Stab.".parse::<Statistic>().unwrap(), Statistic::Sigma);
        assert!("nope".parse::<PerturbationAxis>().is_err());
    }

    #[test]
    fn single_row_and_mean_of_two() {
        let lighting = PerturbationType::Lighting;
        let t = aggregate(&[row("m", "g1", lighting, 1.0, None)], GroupBy::default()).unwrap();
        let k = key(PerturbationAxis::Type(lighting), "m", Statistic::Mu);
        assert_eq!(t.value(&k), Some(1.0));
        assert_eq!(t.value(&key(PerturbationAxis::Average, "m", Statistic::Mu)), Some(1.0));
        assert_eq!(
            t.get(&key(PerturbationAxis::Average, "m", Statistic::Kappa))
                .unwrap()
                .value,
            None
        );

        let rows = [
            row("m", "g1", lighting, 1.0, Some(0.1)),
            row("m", "g2", lighting, 3.0, Some(0.3)),
        ];
        let t = aggregate(&rows, GroupBy { category: true }).unwrap();
        assert_eq!(t.value(&k), Some(2.0));
        assert_eq!(t.get(&k).unwrap().n_effective, Some(6));
        let mut kc = key(PerturbationAxis::Type(lighting), "m", Statistic::Kappa);
        kc.category = Some(Category::Chair);
        assert!((t.value(&kc).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn average_row_is_unweighted_over_types() {
        let rows = [
            row("m", "a1", PerturbationType::Lighting, 1.0, None),
            row("m", "a2", PerturbationType::Lighting, 1.0, None),
            row("m", "a3", PerturbationType::Lighting, 1.0, None),
            row("m", "b1", PerturbationType::ObjRotation, 4.0, None),
        ];
        let t = aggregate(&rows, GroupBy::default()).unwrap();
        assert_eq!(t.value(&key(PerturbationAxis::Average, "m", Statistic::Mu)), Some(2.5));
    }

    #[test]
    fn aggregation_errors() {
        assert!(aggregate(&[], GroupBy::default()).is_err());
        let r = row("m", "g", PerturbationType::Lighting, 1.0, None);
        assert!(matches!(
            aggregate(&[r.clone(), r], GroupBy::default()),
            Err(PdeError::Aggregation(_))
        ));
    }

    #[test]
    fn aggregation_ignores_row_order() {
        let mut rows: Vec<_> = (0..7)
            .map(|i| {
                row(
                    "m",
                    &format!("g{i}"),
                    PerturbationType::Lighting,
                    0.1 * i as f64 + 0.7,
                    Some(0.01 * i as f64),
                )
            })
            .collect();
        let a = aggregate(&rows, GroupBy::default()).unwrap();
        rows.reverse();
        rows.swap(1, 4);
        assert_eq!(aggregate(&rows, GroupBy::default()).unwrap(), a);
    }

    #[test]
    fn ranking_orders_and_flags_ties() {
        let mut t = ResultTable::new(Source::External);
        for (m, v) in [("b", 1.4), ("a", 1.4), ("c", 0.9), ("d", 2.0)] {
            t.insert(
                key(PerturbationAxis::Average, m, Statistic::Kappa),
                Cell {
                    value: Some(v),
                    n_effective: None,
                },
            )
            .unwrap();
        }
        let r = rank_models(&t, MetricKind::AbsRel, Statistic::Kappa).unwrap();
        let names: Vec<_> = r.iter().map(|e| e.model.as_str()).collect();
        assert_eq!(names, ["c", "a", "b", "d"]);
        assert_eq!(r.iter().map(|e| e.rank).collect::<Vec<_>>(), [1, 2, 2, 4]);
        assert_eq!(r.iter().map(|e| e.tied).collect::<Vec<_>>(), [false, true, true, false]);
        match rank_models(&t, MetricKind::AbsRel, Statistic::Mu) {
            Err(PdeError::Ranking { missing }) => assert_eq!(missing.len(), 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn delta_error_ranks_descending() {
        let mut t = ResultTable::new(Source::External);
        for (m, v) in [("lo", 80.0), ("hi", 95.0)] {
            let k = CellKey::new(PerturbationAxis::Average, m, MetricKind::Delta1, Statistic::Mu);
            t.insert(
                k,
                Cell {
                    value: Some(v),
                    n_effective: None,
                },
            )
            .unwrap();
        }
        let r = rank_models(&t, MetricKind::Delta1, Statistic::Mu).unwrap();
        assert_eq!(r[0].model, "hi");
    }
}
