//! Renders a desk-scale scene and a few perturbed variants, printing the
//! object mask as ASCII art together with depth statistics.
//!
//!     cargo run --example render_fixture -- [category] [size]

use pde::depthio::{Category, Mask};
use pde::geom::{perturb_dolly_zoom, perturb_resize_object, perturb_roll, render_depth, SceneSpec};

fn ascii(mask: &Mask) -> String {
    let mut s = String::new();
    for y in (0..mask.height()).step_by(2) {
        for x in 0..mask.width() {
            s.push(if mask.get(x, y) { '#' } else { '.' });
        }
        s.push('\n');
    }
    s
}

fn main() -> pde::Result<()> {
    let mut args = std::env::args().skip(1);
    let category: Category = args
        .next()
        .as_deref()
        .unwrap_or("cactus")
        .parse()
        .map_err(pde::PdeError::Parameter)?;
    let size: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(40);

    let base = SceneSpec::desk(category, size, size, 0)?;
    let variants = [
        ("base", base.clone()),
        ("roll 30 deg", perturb_roll(&base, 30f64.to_radians())?),
        ("dolly zoom x2", perturb_dolly_zoom(&base, 2.0)?),
        ("resize x1.5", perturb_resize_object(&base, 1.5)?),
    ];
    for (name, spec) in variants {
        let r = render_depth(&spec)?;
        let object: Vec<f64> = (0..r.depth.len())
            .filter(|&i| r.object_mask.bits()[i])
            .map(|i| r.depth.values()[i])
            .collect();
        let (lo, hi) = object
            .iter()
            .fold((f64::INFINITY, 0f64), |(a, b), &d| (a.min(d), b.max(d)));
        println!(
            "{name}: {} object px, depth {lo:.3}..{hi:.3} m, anchor z {:.3} m, {} background px",
            object.len(),
            spec.anchor_depth()?,
            r.background.count()
        );
        println!("{}", ascii(&r.object_mask));
    }
    Ok(())
}
