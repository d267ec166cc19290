//! Scale-free comparison of detected maps against reference maps.

use ndarray::{s, Array2, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};

/// Divide by the maximum value; all-zero maps are returned unchanged.
pub fn peak_normalize(map: &Array2<f64>) -> Array2<f64> {
    let peak = map.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if peak > 0.0 && peak.is_finite() {
        map.mapv(|v| v / peak)
    } else {
        map.clone()
    }
}

/// Peak-normalize a set of maps by their common maximum.
pub fn peak_normalize_all(maps: &[Array2<f64>]) -> Vec<Array2<f64>> {
    let peak = maps
        .iter()
        .flat_map(|m| m.iter())
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if peak > 0.0 && peak.is_finite() {
        maps.iter().map(|m| m.mapv(|v| v / peak)).collect()
    } else {
        maps.to_vec()
    }
}

/// The map with `border` samples stripped from every side.
pub fn interior(map: &Array2<f64>, border: usize) -> Result<ArrayView2<'_, f64>> {
    let (h, w) = map.dim();
    if 2 * border >= h || 2 * border >= w {
        return Err(Error::InvalidGeometry(format!(
            "border {border} leaves nothing of a {h}x{w} map"
        )));
    }
    Ok(map.slice(s![border..h - border, border..w - border]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Agreement {
    /// RMS difference of the two peak-normalized maps (i.e. relative to peak).
    pub nrmse: f64,
    /// Pearson correlation coefficient.
    pub correlation: f64,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 && sbb == 0.0 {
        1.0
    } else if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Compare `measured` to `reference` over their interiors after normalizing
/// each to unit peak within that region.
pub fn agreement(
    measured: &Array2<f64>,
    reference: &Array2<f64>,
    border: usize,
) -> Result<Agreement> {
    if measured.dim() != reference.dim() {
        return Err(Error::Shape(format!(
            "cannot compare {:?} map with {:?} map",
            measured.dim(),
            reference.dim()
        )));
    }
    let a = peak_normalize(&interior(measured, border)?.to_owned());
    let b = peak_normalize(&interior(reference, border)?.to_owned());
    let a: Vec<f64> = a.iter().copied().collect();
    let b: Vec<f64> = b.iter().copied().collect();
    let mse = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    Ok(Agreement {
        nrmse: mse.sqrt(),
        correlation: pearson(&a, &b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_maps_agree() {
        let m = Array2::from_shape_fn((10, 10), |(r, c)| (r * c) as f64);
        let a = agreement(&m, &m.mapv(|v| 3.0 * v), 2).unwrap();
        assert!(a.nrmse < 1e-15);
        assert!((a.correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nrmse_is_relative_to_peak() {
        let reference = Array2::from_elem((4, 4), 1.0);
        let mut measured = reference.clone();
        measured[[0, 0]] = 0.0;
        let a = agreement(&measured, &reference, 0).unwrap();
        assert!((a.nrmse - (1.0f64 / 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_oversized_border() {
        let m = Array2::zeros((4, 4));
        assert!(agreement(&m, &m, 2).is_err());
        assert!(agreement(&m, &Array2::zeros((4, 5)), 0).is_err());
    }

    #[test]
    fn common_normalization() {
        let maps = vec![
            Array2::from_elem((2, 2), 2.0),
            Array2::from_elem((2, 2), 4.0),
        ];
        let n = peak_normalize_all(&maps);
        assert_eq!(n[0][[0, 0]], 0.5);
        assert_eq!(n[1][[0, 0]], 1.0);
    }
}
