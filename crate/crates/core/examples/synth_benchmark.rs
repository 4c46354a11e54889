//! Writes the built-in demo benchmark (ground truth, masks, pseudo-model
//! predictions and `manifest.json`) to a directory.
//!
//!     cargo run --example synth_benchmark -- /tmp/pde-demo 64

use std::path::PathBuf;

use pde::geom::{demo_synth_spec, synthesize};

fn main() -> pde::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pde-demo"));
    let size = args.next().and_then(|s| s.parse().ok()).unwrap_or(64);

    let spec = demo_synth_spec(size, 1);
    let (bench, manifest) = synthesize(&spec, &out)?;
    println!("manifest: {}", manifest.display());
    for m in &bench.models {
        println!("model {:16} {:?}", m.name, m.output_kind);
    }
    for g in &bench.groups {
        println!(
            "group {:16} {:8} {:20} {} variants",
            g.group_id,
            g.category.as_str(),
            g.perturbation_type().as_str(),
            g.variants.len()
        );
    }
    println!("spec as JSON (edit and pass to `pde synth --spec`):");
    println!("{}", serde_json::to_string_pretty(&spec).expect("spec serializes"));
    Ok(())
}
