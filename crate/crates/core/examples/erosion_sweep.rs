//! Error as a function of object-mask erosion radius.
//!
//! One pseudo-model is exact everywhere except on the outermost pixel ring
//! of the object, so its error disappears once the mask is eroded by one
//! pixel; a second, noisy model stays roughly flat.

use pde::depthio::{Benchmark, Category, OutputKind};
use pde::geom::{make_fixture_group, PlanEntry, PseudoPrediction, SceneSpec};
use pde::metrics::{EvalConfig, MetricKind};
use pde::report::{erosion_sweep, CellKey, PerturbationAxis, Statistic};

fn main() -> pde::Result<()> {
    let dir = std::env::temp_dir().join("pde-sweep-example");
    let preds = [
        PseudoPrediction {
            boundary_factor: Some(1.3),
            ..PseudoPrediction::exact("boundary-error", OutputKind::MetricDepth)
        },
        PseudoPrediction {
            noise: 0.03,
            seed: 9,
            ..PseudoPrediction::exact("noisy", OutputKind::MetricDepth)
        },
    ];
    let spec = SceneSpec::desk(Category::Chair, 64, 64, 0)?;
    let group = make_fixture_group(
        &spec,
        &[PlanEntry::Lighting],
        "chair-light",
        Category::Chair,
        &preds,
        &dir,
    )?;
    let bench = Benchmark {
        models: preds.iter().map(PseudoPrediction::model_entry).collect(),
        groups: vec![group],
        erosion_radius: 1,
    };

    let radii = [0, 1, 2, 3, 4, 5];
    for model in &bench.models {
        let sweep = erosion_sweep(&bench, model, &radii, &EvalConfig::default())?;
        print!("{:15}", model.name);
        for r in radii {
            let mut key = CellKey::new(
                PerturbationAxis::Average,
                model.name.clone(),
                MetricKind::AbsRel,
                Statistic::Mu,
            );
            key.erosion_radius = Some(r);
            match sweep.table.value(&key) {
                Some(v) => print!("  r{r}: {v:6.3}"),
                None => print!("  r{r}:    -  "),
            }
        }
        println!();
        for s in &sweep.skipped {
            println!("  radius {} skipped: {}", s.radius, s.reason);
        }
    }
    Ok(())
}
