use std::path::PathBuf;

use fourfold::array::{crosstalk_report, run_layer, CrosstalkOptions};
use fourfold::correlator::{ideal_convolve, CorrelatorSpec, Kernel, OpticalOptions};
use fourfold::field::RGB_WAVELENGTHS;
use fourfold::io::read_pgm;
use fourfold::metrics::agreement;
use fourfold::patterns::{gaussian_blur, random_kernels};
use ndarray::{array, Array2};

fn fixture(name: &str) -> Array2<f64> {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "data", name]
        .iter()
        .collect();
    read_pgm(path).unwrap()
}

fn rgb_specs() -> Vec<CorrelatorSpec> {
    RGB_WAVELENGTHS
        .iter()
        .map(|&l| CorrelatorSpec::default().with_wavelength(l))
        .collect()
}

fn rgb_channels() -> Vec<Array2<f64>> {
    ["cat64_r.pgm", "cat64_g.pgm", "cat64_b.pgm"]
        .iter()
        .map(|n| gaussian_blur(&fixture(n), 0.7))
        .collect()
}

#[test]
fn delta_kernel_images_the_channel() {
    let img = gaussian_blur(&fixture("cat64.pgm"), 0.7);
    let spec = CorrelatorSpec::default();
    let out = run_layer(
        std::slice::from_ref(&img),
        &[vec![Kernel::delta()]],
        &[spec],
        &OpticalOptions::default(),
    )
    .unwrap();
    assert_eq!(out.maps.len(), 1);
    let a = agreement(&out.maps[0], &img.mapv(|v| v * v), 2).unwrap();
    assert!(a.correlation >= 0.99, "{a:?}");
}

#[test]
fn zero_channels_give_zero_maps() {
    let zeros = vec![Array2::zeros((32, 32)); 3];
    let kernels = vec![random_kernels(2, 5, 1); 3];
    let out = run_layer(&zeros, &kernels, &rgb_specs(), &OpticalOptions::default()).unwrap();
    assert_eq!(out.maps.len(), 2);
    assert!(out
        .maps
        .iter()
        .all(|m| m.dim() == (32, 32) && m.iter().all(|&v| v == 0.0)));
}

#[test]
fn three_channel_layer_matches_summed_oracle() {
    let channels = rgb_channels();
    let kernels: Vec<Vec<Kernel>> = (0..3).map(|c| random_kernels(2, 7, 10 + c)).collect();
    let out = run_layer(
        &channels,
        &kernels,
        &rgb_specs(),
        &OpticalOptions::default(),
    )
    .unwrap();
    assert_eq!(out.scale_factors.len(), 2);
    assert!(out.scale_factors.iter().all(|s| s.len() == 3));
    #[allow(clippy::needless_range_loop)]
    for j in 0..2 {
        let oracle = (0..3).fold(Array2::zeros((64, 64)), |acc: Array2<f64>, c| {
            acc + ideal_convolve(&channels[c], &kernels[c][j]).mapv(|v| v * v)
        });
        let a = agreement(&out.maps[j], &oracle, 7).unwrap();
        assert!(a.nrmse <= 0.05, "kernel {j}: {a:?}");
    }
}

#[test]
fn permuting_kernels_permutes_maps() {
    let img = gaussian_blur(&fixture("cat64.pgm"), 0.7);
    let ks = random_kernels(3, 5, 4);
    let spec = CorrelatorSpec::default();
    let opts = OpticalOptions::default();
    let a = run_layer(
        std::slice::from_ref(&img),
        std::slice::from_ref(&ks),
        &[spec],
        &opts,
    )
    .unwrap();
    let permuted = vec![ks[2].clone(), ks[0].clone(), ks[1].clone()];
    let b = run_layer(&[img], &[permuted], &[spec], &opts).unwrap();
    assert_eq!(a.maps[2], b.maps[0]);
    assert_eq!(a.maps[0], b.maps[1]);
    assert_eq!(a.maps[1], b.maps[2]);
}

fn narrow_gaussian(side: usize, sigma: f64) -> Array2<f64> {
    let c = (side / 2) as f64;
    Array2::from_shape_fn((side, side), |(r, col)| {
        let (y, x) = (r as f64 - c, col as f64 - c);
        (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
    })
}

#[test]
fn crosstalk_shrinks_with_aperture() {
    let object = fixture("cat227.pgm");
    let kernel = Kernel::delta();
    let opts = CrosstalkOptions {
        tile_size: Some(0.57e-3),
        guard_tiles: 0,
        ..Default::default()
    };
    let fractions: Vec<f64> = [0.57e-3, 0.5e-3, 0.4e-3]
        .iter()
        .map(|&d| {
            let spec = CorrelatorSpec {
                lens_diameter: d,
                ..Default::default()
            };
            crosstalk_report(&spec, &object, &kernel, &opts)
                .unwrap()
                .fraction
        })
        .collect();
    assert!(fractions.iter().all(|f| (0.0..=1.0).contains(f)));
    assert!(
        fractions[0] >= fractions[1] && fractions[1] >= fractions[2],
        "{fractions:?}"
    );
}

#[test]
fn high_pass_mask_spills_a_larger_share_than_unity() {
    // With |mask| <= 1 a high-pass filter also transmits less light overall,
    // so the comparison is made on the share of transmitted light that
    // reaches the neighbours.
    let spec = CorrelatorSpec::default();
    let object = narrow_gaussian(41, 0.5);
    let laplacian = Kernel::new(array![
        [0.0, -1.0, 0.0],
        [-1.0, 4.0, -1.0],
        [0.0, -1.0, 0.0]
    ])
    .unwrap();
    let opts = CrosstalkOptions {
        guard_tiles: 0,
        ..Default::default()
    };
    let unity = crosstalk_report(&spec, &object, &Kernel::delta(), &opts).unwrap();
    let high = crosstalk_report(&spec, &object, &laplacian, &opts).unwrap();
    assert!(
        unity.output_share() < high.output_share(),
        "{unity:?} {high:?}"
    );
    assert!(high.center_fraction < unity.center_fraction);
}
