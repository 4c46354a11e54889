//! Reading and writing depth rasters and masks, and checking a manifest the
//! way `pde validate` does.

use pde::depthio::{read_depth_raster, read_header, read_mask, write_depth_raster, write_mask, DepthMap, Mask};
use pde::depthio::{RasterFormat, ValueKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("pde-raster-example");
    std::fs::create_dir_all(&dir)?;

    let values: Vec<f64> = (0..30)
        .map(|i| {
            if i % 7 == 0 {
                f64::INFINITY
            } else {
                1.0 + i as f64 / 8.0
            }
        })
        .collect();
    let depth = DepthMap::new(6, 5, values, ValueKind::MetricDepth)?;
    let mask = Mask::from_fn(6, 5, |x, y| (1..5).contains(&x) && (1..4).contains(&y));

    for name in ["depth.pdepth", "depth.pfm"] {
        let path = dir.join(name);
        write_depth_raster(&depth, &path, RasterFormat::from_path(&path))?;
        let back = read_depth_raster(&path)?;
        let header = read_header(&path)?;
        println!(
            "{name}: {}x{}, {} valid of {}, equal after round trip: {}",
            header.width,
            header.height,
            back.valid_count(),
            back.len(),
            back.values()
                .iter()
                .zip(depth.values())
                .all(|(a, b)| a == b || (a.is_infinite() && b.is_infinite()))
        );
    }
    let mpath = dir.join("object.pdepth");
    write_mask(&mask, &mpath)?;
    println!(
        "mask: {} px set, round trip equal: {}",
        mask.count(),
        read_mask(&mpath)? == mask
    );

    let outcome = pde::cli::cmd_validate(&dir.join("missing-manifest.json"));
    println!("validate exit {}: {}", outcome.code, outcome.stdout);
    Ok(())
}
