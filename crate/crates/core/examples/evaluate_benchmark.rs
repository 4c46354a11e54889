//! End-to-end evaluation through the library: synthesize a benchmark,
//! evaluate every (model, group) pair, aggregate and rank.

use pde::depthio::load_manifest;
use pde::geom::{demo_synth_spec, synthesize};
use pde::metrics::{EvalConfig, MetricKind};
use pde::report::{aggregate, rank_models, to_csv_string, GroupBy, ResultTable, Source, Statistic};
use pde::robust::evaluate_group;

fn main() -> pde::Result<()> {
    let dir = std::env::temp_dir().join("pde-evaluate-example");
    let (_, manifest) = synthesize(&demo_synth_spec(48, 4), &dir)?;
    let bench = load_manifest(&manifest)?;
    let config = EvalConfig {
        erosion_radius: bench.erosion_radius,
        ..Default::default()
    };

    let mut rows = Vec::new();
    for model in &bench.models {
        for group in &bench.groups {
            match evaluate_group(group, model, &config) {
                Ok(ev) => rows.extend(ev.rows),
                Err(e) => eprintln!("{} / {}: {e}", model.name, group.group_id),
            }
        }
    }
    let table = aggregate(&rows, GroupBy::default())?;
    // kappa is undefined for affine-invariant outputs, so that ranking only
    // covers the metric and scale-only models
    let mut consistent = ResultTable::new(Source::Computed);
    for (key, cell) in table.cells() {
        let supports = bench
            .model(&key.model)
            .is_some_and(|m| m.output_kind.supports_self_consistency());
        if supports {
            consistent.insert(key.clone(), *cell)?;
        }
    }
    for statistic in [Statistic::Mu, Statistic::Sigma, Statistic::Kappa] {
        println!("AbsRel {statistic:?}:");
        let source = if statistic == Statistic::Kappa {
            &consistent
        } else {
            &table
        };
        match rank_models(source, MetricKind::AbsRel, statistic) {
            Ok(ranking) => {
                for e in ranking {
                    println!(
                        "  {}. {:16} {:.4}{}",
                        e.rank,
                        e.model,
                        e.value,
                        if e.tied { " (tie)" } else { "" }
                    );
                }
            }
            Err(e) => println!("  not ranked: {e}"),
        }
    }
    let csv = to_csv_string(&table);
    println!("\n{} table cells; first lines of the CSV:", table.len());
    for line in csv.lines().take(6) {
        println!("  {line}");
    }
    Ok(())
}
