use std::f64::consts::PI;

use fourfold::correlator::{
    convolve_image, detect, ideal_convolve, kernel_to_fourier_mask, run_4f, CorrelatorSpec, Kernel,
    OpticalOptions,
};
use fourfold::elements::{apply_element, lens_mask, lens_phase, LensModel};
use fourfold::field::{embed_centered, intensity, ComplexField, GridSpec};
use fourfold::metrics::{agreement, interior};
use fourfold::patterns::{bright_square, gaussian_kernel};
use fourfold::propagation::propagate;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn focal_spot(model: LensModel, grid: GridSpec) -> Array2<f64> {
    let spec = CorrelatorSpec::default();
    let lens = lens_mask(&grid, spec.focal_length, model, spec.lens_diameter).unwrap();
    let focused = propagate(
        &apply_element(&ComplexField::plane_wave(grid), &lens).unwrap(),
        spec.focal_length,
    )
    .unwrap();
    intensity(&focused, 1.0).unwrap()
}

fn argmax(map: &Array2<f64>) -> (usize, usize) {
    map.indexed_iter()
        .fold(((0, 0), f64::NEG_INFINITY), |best, (idx, &v)| {
            if v > best.1 {
                (idx, v)
            } else {
                best
            }
        })
        .0
}

/// Full width at half maximum along the row through `peak`, by linear
/// interpolation of the half-maximum crossings.
fn fwhm(map: &Array2<f64>, peak: (usize, usize), pitch: f64) -> f64 {
    let row = map.row(peak.0);
    let half = row[peak.1] / 2.0;
    let crossing = |step: isize| {
        let mut i = peak.1 as isize;
        while row[(i + step) as usize] > half {
            i += step;
        }
        let (a, b) = (row[i as usize], row[(i + step) as usize]);
        i as f64 + step as f64 * (a - half) / (a - b)
    };
    (crossing(1) - crossing(-1)) * pitch
}

#[test]
fn lens_focuses_to_airy_spot() {
    let spec = CorrelatorSpec::default();
    let grid = GridSpec::square(2048, 0.5e-6, spec.wavelength).unwrap();
    let spot = focal_spot(LensModel::Hyperbolic, grid);
    let peak = argmax(&spot);
    assert!(
        peak.0.abs_diff(1024) <= 1 && peak.1.abs_diff(1024) <= 1,
        "peak at {peak:?}"
    );
    let airy = 1.03 * spec.wavelength * spec.focal_length / spec.lens_diameter;
    let w = fwhm(&spot, peak, grid.pitch);
    assert!((w / airy - 1.0).abs() < 0.10, "fwhm {w} vs airy {airy}");

    let paraxial = focal_spot(LensModel::Paraxial, grid);
    assert_eq!(argmax(&paraxial), peak);
}

#[test]
fn lens_models_differ_by_fourth_order_term() {
    let spec = CorrelatorSpec::default();
    let (f, lambda) = (spec.focal_length, spec.wavelength);
    let r_max = spec.lens_diameter / 2.0;
    let bound = 2.0 * PI / lambda * r_max.powi(4) / (8.0 * f.powi(3));
    assert!((bound - 0.36).abs() < 0.01);
    let mut worst: f64 = 0.0;
    for i in 0..=1000 {
        let r = r_max * i as f64 / 1000.0;
        let d = lens_phase(LensModel::Hyperbolic, r * r, f, lambda)
            - lens_phase(LensModel::Paraxial, r * r, f, lambda);
        assert!(d.abs() <= bound * (1.0 + 1e-9));
        worst = worst.max(d.abs());
    }
    // The bound is the leading term of the series, so it is nearly attained at the rim.
    assert!(worst > 0.99 * bound);
}

fn random_field(grid: GridSpec, rng: &mut impl Rng) -> ComplexField {
    let inner = Array2::from_shape_fn((40, 40), |_| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    ComplexField::new(grid, embed_centered(&inner, grid.shape()).unwrap()).unwrap()
}

#[test]
fn correlator_is_linear() {
    let spec = CorrelatorSpec::default();
    let grid = GridSpec::square(256, spec.pitch, spec.wavelength).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (x, y) = (random_field(grid, &mut rng), random_field(grid, &mut rng));
    let (a, b) = (Complex64::new(0.7, -0.2), Complex64::new(-1.3, 0.4));
    let kernel = Kernel::new(Array2::from_shape_fn((5, 5), |_| rng.gen_range(-1.0..1.0))).unwrap();
    let mask = kernel_to_fourier_mask(&kernel, &spec, &grid).unwrap();

    let combined = ComplexField::new(
        grid,
        x.amplitudes().mapv(|v| a * v) + y.amplitudes().mapv(|v| b * v),
    )
    .unwrap();
    let lhs = run_4f(&combined, &mask, &spec).unwrap();
    let rx = run_4f(&x, &mask, &spec).unwrap();
    let ry = run_4f(&y, &mask, &spec).unwrap();
    let rhs = rx.amplitudes().mapv(|v| a * v) + ry.amplitudes().mapv(|v| b * v);
    let num: f64 = lhs
        .amplitudes()
        .iter()
        .zip(&rhs)
        .map(|(p, q)| (p - q).norm_sqr())
        .sum();
    let den: f64 = rhs.iter().map(|v| v.norm_sqr()).sum();
    assert!((num / den).sqrt() < 1e-9);

    let zero = run_4f(&ComplexField::zeros(grid), &mask, &spec).unwrap();
    assert!(zero.amplitudes().iter().all(|v| v.norm() == 0.0));
}

#[test]
fn mask_samples_invert_to_kernel_weights() {
    // Geometry chosen so every 8th mask sample sits on the 5-point DFT
    // lattice of the kernel: lambda * f = 8 * k * pitch^2.
    let (k, step, pitch, lambda) = (5usize, 8usize, 2.5e-6, 500e-9);
    let spec = CorrelatorSpec {
        focal_length: (step * k) as f64 * pitch * pitch / lambda,
        lens_diameter: 150e-6,
        pitch,
        wavelength: lambda,
        ..Default::default()
    };
    let grid = GridSpec::square(128, pitch, lambda).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let kernel = Kernel::new(Array2::from_shape_fn((k, k), |_| rng.gen_range(-1.0..1.0))).unwrap();
    let fm = kernel_to_fourier_mask(&kernel, &spec, &grid).unwrap();
    let t = fm.mask.transmittance();

    let half = (k / 2) as isize;
    let sample = |m: isize, n: isize| {
        let row = (64 + n * step as isize) as usize;
        let col = (64 + m * step as isize) as usize;
        t[[row, col]] * fm.scale
    };
    let peak = kernel.weights().iter().fold(0.0f64, |a, w| a.max(w.abs()));
    for r in 0..k {
        for c in 0..k {
            let (dr, dc) = (r as isize - half, c as isize - half);
            let mut acc = Complex64::new(0.0, 0.0);
            for n in -half..=half {
                for m in -half..=half {
                    let phase = 2.0 * PI * (m * dc + n * dr) as f64 / k as f64;
                    acc += sample(m, n) * Complex64::cis(phase);
                }
            }
            let w = acc / (k * k) as f64;
            assert!((w.re - kernel.weights()[[r, c]]).abs() < 1e-9 * peak);
            assert!(w.im.abs() < 1e-9 * peak);
        }
    }
}

#[test]
fn unity_mask_images_the_object_upright() {
    let spec = CorrelatorSpec::default();
    let grid = GridSpec::square(512, spec.pitch, spec.wavelength).unwrap();
    // Smooth off-center object so the orientation is unambiguous.
    let object = Array2::from_shape_fn((512, 512), |(r, c)| {
        let (y, x) = (r as f64 - 230.0, c as f64 - 270.0);
        (-(x * x + 2.0 * y * y) / (2.0 * 12.0f64.powi(2))).exp()
    });
    let field = ComplexField::new(grid, object.mapv(|v| Complex64::new(v, 0.0))).unwrap();
    let mask = kernel_to_fourier_mask(&Kernel::delta(), &spec, &grid).unwrap();
    let out = run_4f(&field, &mask, &spec).unwrap();
    let detected = detect(&out, 1.0, spec.pitch).unwrap();
    let a = agreement(&detected.mapv(f64::sqrt), &object, 128).unwrap();
    assert!(a.correlation >= 0.99, "{a:?}");
}

#[test]
fn gaussian_blur_of_square_matches_oracle() {
    let spec = CorrelatorSpec::default();
    let object = bright_square(64, 64, 24);
    let kernel = gaussian_kernel(7, 1.2);
    let optical =
        convolve_image(&object, &kernel, &spec, None, &OpticalOptions::default()).unwrap();
    let oracle = ideal_convolve(&object, &kernel).mapv(|v| v * v);
    let a = agreement(&optical.map, &oracle, 7).unwrap();
    assert!(a.nrmse <= 0.05, "{a:?}");
    assert!(interior(&optical.map, 7)
        .unwrap()
        .iter()
        .all(|v| v.is_finite()));
}
