//! SE(2) compensation of camera-roll variants.

use crate::depthio::{DepthMap, Mask, Shaped};
use crate::error::{PdeError, Result};
use crate::numeric::exact_sin_cos;

/// Sample positions within this distance of a pixel centre snap onto it.
const SNAP: f64 = 1e-9;

/// Resamples a roll variant back into the base frame.
///
/// Rolling the camera by `angle` rotates image content by `-angle` about the
/// principal point, so base pixel `c + d` is read from the variant at
/// `c + R(-angle) d` with bilinear interpolation. Depth values are carried
/// unchanged (z-depth is invariant under optical-axis rotation). An output
/// pixel is valid only if every source with nonzero weight is inside the
/// image and valid, and it is in the output mask only if those sources are
/// also in `mask_variant`.
pub fn compensate_roll(
    pred_variant: &DepthMap,
    mask_variant: &Mask,
    angle: f64,
    principal_point: (f64, f64),
) -> Result<(DepthMap, Mask)> {
    if !angle.is_finite() {
        return Err(PdeError::Parameter(format!("roll angle {angle}")));
    }
    if !pred_variant.same_shape(mask_variant) {
        return Err(PdeError::Bounds("variant mask shape differs from prediction".into()));
    }
    let (w, h) = pred_variant.shape();
    let (cx, cy) = principal_point;
    if !(cx >= 0.0 && cy >= 0.0 && cx <= (w as f64 - 1.0) && cy <= (h as f64 - 1.0)) {
        return Err(PdeError::Parameter(format!(
            "principal point ({cx}, {cy}) outside a {w}x{h} image"
        )));
    }
    let (s, c) = exact_sin_cos(angle);
    let mut values = vec![f64::NAN; w * h];
    let mut valid = vec![false; w * h];
    let mut bits = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let sx = cx + c * dx + s * dy;
            let sy = cy - s * dx + c * dy;
            if let Some((v, in_mask)) = sample(pred_variant, mask_variant, sx, sy) {
                let i = y * w + x;
                values[i] = v;
                valid[i] = true;
                bits[i] = in_mask;
            }
        }
    }
    let map = DepthMap::with_validity(w, h, values, valid, pred_variant.kind())?;
    let mask = Mask::new(w, h, bits)?.and(&map.validity_mask())?;
    Ok((map, mask))
}

fn split(coord: f64) -> (isize, f64) {
    let nearest = coord.round();
    if (coord - nearest).abs() < SNAP {
        (nearest as isize, 0.0)
    } else {
        let f = coord.floor();
        (f as isize, coord - f)
    }
}

/// Bilinear sample; `None` if any weighted source is out of bounds or invalid.
fn sample(map: &DepthMap, mask: &Mask, x: f64, y: f64) -> Option<(f64, bool)> {
    let (x0, fx) = split(x);
    let (y0, fy) = split(y);
    let (w, h) = (map.width() as isize, map.height() as isize);
    let taps = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ];
    let mut acc = 0.0;
    let mut in_mask = true;
    for (tx, ty, wgt) in taps {
        if wgt == 0.0 {
            continue;
        }
        if tx < 0 || ty < 0 || tx >= w || ty >= h {
            return None;
        }
        let (ux, uy) = (tx as usize, ty as usize);
        if !map.is_valid(ux, uy) {
            return None;
        }
        acc += wgt * map.value(ux, uy);
        in_mask &= mask.get(ux, uy);
    }
    Some((acc, in_mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthio::ValueKind;
    use std::f64::consts::FRAC_PI_2;

    fn ramp(w: usize, h: usize) -> DepthMap {
        let values = (0..w * h).map(|i| 1.0 + i as f64 * 0.01).collect();
        DepthMap::new(w, h, values, ValueKind::MetricDepth).unwrap()
    }

    fn centre(w: usize, h: usize) -> (f64, f64) {
        ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
    }

    #[test]
    fn zero_angle_is_identity() {
        let map = ramp(6, 4);
        let mask = Mask::from_fn(6, 4, |x, y| (x + y) % 3 != 0);
        let (out, m) = compensate_roll(&map, &mask, 0.0, centre(6, 4)).unwrap();
        assert_eq!(out, map);
        assert_eq!(m, mask);
    }

    #[test]
    fn quarter_turn_is_a_grid_permutation() {
        let n = 6;
        let map = ramp(n, n);
        let mask = Mask::full(n, n);
        let (cx, cy) = centre(n, n);
        let (out, m) = compensate_roll(&map, &mask, FRAC_PI_2, (cx, cy)).unwrap();
        assert_eq!(m.count(), n * n);
        for y in 0..n {
            for x in 0..n {
                let (u, v) = (x as f64 - cx, y as f64 - cy);
                // offset (u, v) is read from offset (v, -u)
                let (sx, sy) = ((cx + v) as usize, (cy - u) as usize);
                assert_eq!(out.value(x, y), map.value(sx, sy));
            }
        }
        let mut cur = (out, m);
        for _ in 0..3 {
            cur = compensate_roll(&cur.0, &cur.1, FRAC_PI_2, (cx, cy)).unwrap();
        }
        assert_eq!(cur.0, map);
    }

    #[test]
    fn generic_angle_loses_corners_only() {
        let map = ramp(9, 9);
        let (out, m) = compensate_roll(&map, &Mask::full(9, 9), 0.3, centre(9, 9)).unwrap();
        assert!(m.get(4, 4));
        assert!(!m.get(0, 0));
        assert_eq!(out.value(4, 4), map.value(4, 4));
        assert!(m.is_subset_of(&out.validity_mask()));
    }

    #[test]
    fn invalid_sources_propagate() {
        let mut values: Vec<f64> = (0..25).map(|i| 1.0 + i as f64).collect();
        values[12] = f64::NAN;
        let map = DepthMap::new(5, 5, values, ValueKind::MetricDepth).unwrap();
        let (out, _) = compensate_roll(&map, &Mask::full(5, 5), 0.1, (2.0, 2.0)).unwrap();
        assert!(!out.is_valid(2, 2));
    }

    #[test]
    fn rejects_bad_inputs() {
        let map = ramp(4, 4);
        assert!(compensate_roll(&map, &Mask::full(4, 4), f64::NAN, (1.5, 1.5)).is_err());
        assert!(compensate_roll(&map, &Mask::full(4, 4), 0.1, (7.0, 1.5)).is_err());
    }
}
