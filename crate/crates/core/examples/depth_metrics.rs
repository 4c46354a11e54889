//! Evaluation metrics on a hand-made raster with masked and invalid pixels.

use pde::depthio::{DepthMap, Mask, ValueKind};
use pde::metrics::MetricKind;

fn main() -> pde::Result<()> {
    let gt = DepthMap::new(
        4,
        2,
        vec![1.0, 2.0, 3.0, 4.0, 2.0, 2.0, 2.0, 2.0],
        ValueKind::MetricDepth,
    )?;
    // one pixel has no prediction; the last column is outside the mask
    let pred = DepthMap::new(
        4,
        2,
        vec![1.1, 1.8, f64::NAN, 9.0, 2.0, 2.6, 2.2, 0.5],
        ValueKind::MetricDepth,
    )?;
    let mask = Mask::from_fn(4, 2, |x, _| x < 3);

    println!("pixels scored: {}", pde::metrics::joint_count(&pred, &gt, &mask));
    for kind in MetricKind::ALL {
        let value = kind.compute(&pred, &gt, &mask)?;
        let better = if kind.lower_is_better() { "lower" } else { "higher" };
        println!("{:>10} = {value:8.4}   ({better} is better)", kind.as_str());
    }
    Ok(())
}
