//! Deterministic synthetic kernels and test objects.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::correlator::{ideal_convolve, Kernel};

fn offsets(size: usize) -> impl Fn(usize) -> f64 {
    let c = (size - 1) as f64 / 2.0;
    move |i| i as f64 - c
}

/// Normalized isotropic Gaussian, `size x size`.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Kernel {
    let o = offsets(size);
    let w = Array2::from_shape_fn((size, size), |(r, c)| {
        (-(o(r).powi(2) + o(c).powi(2)) / (2.0 * sigma * sigma)).exp()
    });
    let sum = w.sum();
    Kernel::new(w / sum).expect("gaussian weights are finite")
}

/// Oriented Gabor filter; `period` in samples, `theta` in radians.
pub fn gabor_kernel(size: usize, theta: f64, period: f64, sigma: f64, phase: f64) -> Kernel {
    let o = offsets(size);
    let w = Array2::from_shape_fn((size, size), |(r, c)| {
        let (x, y) = (o(c), o(r));
        let u = x * theta.cos() + y * theta.sin();
        (-(x * x + y * y) / (2.0 * sigma * sigma)).exp() * (2.0 * PI * u / period + phase).cos()
    });
    Kernel::new(w).expect("gabor weights are finite")
}

/// Zero-sum Laplacian-of-Gaussian (a high-pass, DC-free filter).
pub fn log_kernel(size: usize, sigma: f64) -> Kernel {
    let o = offsets(size);
    let mut w = Array2::from_shape_fn((size, size), |(r, c)| {
        let r2 = o(r).powi(2) + o(c).powi(2);
        let s2 = sigma * sigma;
        (r2 / s2 - 2.0) * (-r2 / (2.0 * s2)).exp()
    });
    let mean = w.mean().unwrap_or(0.0);
    w.mapv_inplace(|v| v - mean);
    Kernel::new(w).expect("LoG weights are finite")
}

/// Uniform random weights in `[lo, hi)`.
pub fn random_kernel(size: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Kernel {
    Kernel::new(Array2::from_shape_fn((size, size), |_| {
        rng.gen_range(lo..hi)
    }))
    .expect("finite")
}

/// Six first-layer style kernels in the manner of a trained AlexNet first
/// layer seen through one color channel: blobs and oriented edges riding on
/// a positive mean, plus two random kernels.
pub fn first_layer_kernels(size: usize, seed: u64) -> Vec<Kernel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let offset = |k: Kernel, dc: f64| Kernel::new(k.weights() + dc).expect("finite");
    vec![
        gaussian_kernel(size, s / 6.0),
        gaussian_kernel(size, s / 3.0),
        offset(gabor_kernel(size, 0.0, s / 2.5, s / 4.0, PI / 2.0), 0.3),
        offset(gabor_kernel(size, PI / 4.0, s / 3.5, s / 4.0, 0.0), 0.3),
        random_kernel(size, 0.0, 1.0, &mut rng),
        random_kernel(size, -0.5, 1.0, &mut rng),
    ]
}

/// Zero-mean counterparts: pure edge, center-surround and random signed
/// kernels that block the DC component.
pub fn dc_free_kernels(size: usize, seed: u64) -> Vec<Kernel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let mut random = random_kernel(size, -1.0, 1.0, &mut rng).weights().clone();
    let mean = random.mean().unwrap_or(0.0);
    random.mapv_inplace(|v| v - mean);
    vec![
        gabor_kernel(size, 0.0, s / 2.5, s / 4.0, PI / 2.0),
        gabor_kernel(size, PI / 4.0, s / 3.5, s / 4.0, PI / 2.0),
        log_kernel(size, s / 8.0),
        Kernel::new(random).expect("finite"),
    ]
}

/// `count` random `size x size` kernels alternating non-negative and signed.
pub fn random_kernels(count: usize, size: usize, seed: u64) -> Vec<Kernel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            if i % 2 == 0 {
                random_kernel(size, 0.0, 1.0, &mut rng)
            } else {
                random_kernel(size, -1.0, 1.0, &mut rng)
            }
        })
        .collect()
}

/// Zero-padded Gaussian smoothing; values stay in `[0, 1]` for inputs in `[0, 1]`.
pub fn gaussian_blur(image: &Array2<f64>, sigma: f64) -> Array2<f64> {
    if sigma <= 0.0 {
        return image.clone();
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let out = ideal_convolve(image, &gaussian_kernel(2 * radius + 1, sigma));
    out.mapv(|v| v.clamp(0.0, 1.0))
}

/// Smooth random scene: a sum of Gaussian blobs, scaled to peak 1.
pub fn blob_scene(rows: usize, cols: usize, blobs: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<(f64, f64, f64, f64)> = (0..blobs)
        .map(|_| {
            (
                rng.gen_range(0.2..0.8) * rows as f64,
                rng.gen_range(0.2..0.8) * cols as f64,
                rng.gen_range(0.05..0.15) * rows.min(cols) as f64,
                rng.gen_range(0.3..1.0),
            )
        })
        .collect();
    let img = Array2::from_shape_fn((rows, cols), |(r, c)| {
        params
            .iter()
            .map(|&(y, x, w, a)| {
                a * (-((r as f64 - y).powi(2) + (c as f64 - x).powi(2)) / (2.0 * w * w)).exp()
            })
            .sum::<f64>()
    });
    let peak = img.iter().fold(0.0f64, |m, &v| m.max(v));
    img / peak
}

/// Bright centered square of side `side` on a dark background.
pub fn bright_square(rows: usize, cols: usize, side: usize) -> Array2<f64> {
    let (r0, c0) = ((rows - side) / 2, (cols - side) / 2);
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        if (r0..r0 + side).contains(&r) && (c0..c0 + side).contains(&c) {
            1.0
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_set_is_deterministic() {
        let a = first_layer_kernels(11, 3);
        let b = first_layer_kernels(11, 3);
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert!(a.iter().all(|k| k.dim() == (11, 11)));
        assert!(log_kernel(11, 1.5).weights().sum().abs() < 1e-12);
        assert!(dc_free_kernels(11, 3)
            .iter()
            .all(|k| k.weights().sum().abs() < 1e-9));
        assert!((gaussian_kernel(7, 1.0).weights().sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scenes_are_in_unit_range() {
        let s = blob_scene(32, 40, 5, 1);
        assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((s.iter().fold(0.0f64, |m, &v| m.max(v)) - 1.0).abs() < 1e-12);
        let b = gaussian_blur(&bright_square(16, 16, 6), 1.0);
        assert!(b.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
