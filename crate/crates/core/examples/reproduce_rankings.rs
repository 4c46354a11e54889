//! Ranks models from published AbsRel tables and checks that their
//! "Average" rows agree with the per-perturbation rows.
//!
//!     cargo run --example reproduce_rankings -- [table.csv ...]

use std::path::PathBuf;

use pde::metrics::MetricKind;
use pde::report::{ingest_external_results, rank_models, CellKey, PerturbationAxis, Statistic};

fn main() -> pde::Result<()> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let mut paths: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if paths.is_empty() {
        paths = vec![data.join("table2_absrel.csv"), data.join("table3_absrel.csv")];
    }
    for path in paths {
        let table = ingest_external_results(&path)?;
        let derived = table.averages_over_perturbations()?;
        println!("== {}", path.display());
        for statistic in [Statistic::Mu, Statistic::Sigma, Statistic::Kappa] {
            let Ok(ranking) = rank_models(&table, MetricKind::AbsRel, statistic) else {
                continue;
            };
            println!("{statistic:?}:");
            for e in ranking {
                let key = CellKey::new(
                    PerturbationAxis::Average,
                    e.model.clone(),
                    MetricKind::AbsRel,
                    statistic,
                );
                let mean = derived.value(&key).unwrap_or(f64::NAN);
                println!(
                    "  {:>2}. {:11} {:5.2}  (mean of rows {mean:.4}){}",
                    e.rank,
                    e.model,
                    e.value,
                    if e.tied { "  tie" } else { "" }
                );
            }
        }
    }
    Ok(())
}
