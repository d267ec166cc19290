use std::path::PathBuf;

use fourfold::analysis::mac_count;
use fourfold::backend::{
    conv2d, network_forward, ActivationKind, FirstLayerMode, LayerSpec, NetworkSpec, OpticalSetup,
    Padding,
};
use fourfold::correlator::{ideal_convolve, ideal_convolve_counted, CorrelatorSpec, Kernel};
use fourfold::io::read_pgm;
use fourfold::metrics::{agreement, peak_normalize};
use fourfold::patterns::{gaussian_blur, random_kernels};
use ndarray::Array2;

fn cat64() -> Array2<f64> {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "data", "cat64.pgm"]
        .iter()
        .collect();
    gaussian_blur(&read_pgm(path).unwrap(), 0.7)
}

fn first_layer(kernels: Vec<Vec<Kernel>>) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv {
            kernels,
            stride: 1,
            padding: Padding::Same,
            biases: None,
        },
        LayerSpec::Activation(ActivationKind::Square),
    ]
}

fn both_modes(img: &Array2<f64>, layers: Vec<LayerSpec>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
    let setup = OpticalSetup::uniform(CorrelatorSpec::default(), 1);
    let run = |mode| {
        network_forward(
            std::slice::from_ref(img),
            &NetworkSpec::new(layers.clone(), mode),
            &setup,
        )
        .unwrap()
        .maps
    };
    (
        run(FirstLayerMode::OpticalSimulated),
        run(FirstLayerMode::ElectronicOracle),
    )
}

#[test]
fn delta_network_squares_the_image() {
    let img = cat64();
    let (optical, oracle) = both_modes(&img, first_layer(vec![vec![Kernel::delta()]]));
    let expected = peak_normalize(&img.mapv(|v| v * v));
    // The outermost samples sit on the hard edge of the object and ring.
    let a = agreement(&optical[0], &expected, 2).unwrap();
    assert!(a.correlation >= 0.99, "{a:?}");
    assert!(agreement(&oracle[0], &expected, 0).unwrap().nrmse < 1e-12);
}

#[test]
fn optical_and_oracle_agree_after_pooling() {
    let img = cat64();
    let kernels: Vec<Vec<Kernel>> = random_kernels(4, 7, 21)
        .into_iter()
        .map(|k| vec![k])
        .collect();
    let mut layers = first_layer(kernels);
    layers.push(LayerSpec::MaxPool {
        window: 3,
        stride: 2,
    });
    let (optical, oracle) = both_modes(&img, layers);
    assert_eq!(optical.len(), 4);
    assert_eq!(optical[0].dim(), (31, 31));
    for (o, e) in optical.iter().zip(&oracle) {
        let a = agreement(o, e, 0).unwrap();
        assert!(a.nrmse <= 0.05, "{a:?}");
    }
}

#[test]
fn two_channel_conv_is_sum_of_channel_convolutions() {
    let a = Array2::from_shape_fn((12, 10), |(r, c)| ((r * 7 + c * 3) % 5) as f64);
    let b = Array2::from_shape_fn((12, 10), |(r, c)| ((r + 2 * c) % 4) as f64 - 1.0);
    let ks = random_kernels(2, 3, 8);
    let out = conv2d(
        &[a.clone(), b.clone()],
        std::slice::from_ref(&ks),
        1,
        Padding::Same,
        None,
    )
    .unwrap();
    let expected = ideal_convolve(&a, &ks[0]) + ideal_convolve(&b, &ks[1]);
    for (x, y) in out[0].iter().zip(&expected) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn trace_records_each_layer() {
    let img = Array2::from_elem((16, 16), 0.5);
    let mut layers = first_layer(vec![vec![Kernel::delta()], vec![Kernel::delta()]]);
    layers.push(LayerSpec::MaxPool {
        window: 2,
        stride: 2,
    });
    layers.push(LayerSpec::Activation(ActivationKind::Relu));
    let net = NetworkSpec::new(layers, FirstLayerMode::ElectronicOracle);
    let out = network_forward(
        &[img],
        &net,
        &OpticalSetup::uniform(CorrelatorSpec::default(), 1),
    )
    .unwrap();
    let shapes: Vec<_> = out
        .trace
        .iter()
        .map(|t| (t.layer.as_str(), t.channels, t.rows))
        .collect();
    assert_eq!(
        shapes,
        vec![("conv+square", 2, 16), ("maxpool", 2, 8), ("relu", 2, 8)]
    );
}

#[test]
fn mac_count_matches_instrumented_convolution() {
    let img = Array2::from_shape_fn((16, 16), |(r, c)| (r + c) as f64);
    let kernels = random_kernels(3, 3, 2);
    let counted: u64 = kernels
        .iter()
        .map(|k| ideal_convolve_counted(&img, k).1)
        .sum();
    assert_eq!(counted, mac_count(16, 3, 3));
    assert_eq!(counted, 16 * 16 * 9 * 3);
}
