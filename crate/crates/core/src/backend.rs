//! Electronic CNN operators and the hybrid forward pass that consumes the
//! optical first layer.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::array::{run_layer, ChannelPolicy};
use crate::correlator::{ideal_convolve, CorrelatorSpec, Kernel, OpticalOptions};
use crate::error::{Error, Result};
use crate::metrics::peak_normalize_all;
use crate::par;

/// A stack of equally shaped 2D maps, one per channel.
pub type Stack = Vec<Array2<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Zero padding; output has `ceil(n / stride)` samples per side.
    #[default]
    Same,
    /// No padding; output has `floor((n - k) / stride) + 1` samples per side.
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrnParams {
    pub depth_radius: usize,
    pub k_const: f64,
    pub alpha_const: f64,
    pub beta_const: f64,
}

impl Default for LrnParams {
    fn default() -> Self {
        LrnParams {
            depth_radius: 2,
            k_const: 2.0,
            alpha_const: 1e-4,
            beta_const: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// `kernels[out][in]`.
    Conv {
        kernels: Vec<Vec<Kernel>>,
        stride: usize,
        padding: Padding,
        biases: Option<Vec<f64>>,
    },
    Activation(ActivationKind),
    MaxPool {
        window: usize,
        stride: usize,
    },
    Lrn(LrnParams),
    /// Per-channel additive bias, e.g. after detection.
    Bias(Vec<f64>),
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Activation(ActivationKind::Relu) => "relu",
            LayerSpec::Activation(ActivationKind::Square) => "square",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Lrn(_) => "lrn",
            LayerSpec::Bias(_) => "bias",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FirstLayerMode {
    #[default]
    OpticalSimulated,
    ElectronicOracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    /// Must start with a stride-1, same-padded, bias-free conv followed by a
    /// square activation: the layer the optics computes.
    pub layers: Vec<LayerSpec>,
    pub first_layer_mode: FirstLayerMode,
    pub channel_policy: ChannelPolicy,
    /// Peak-normalize the first-layer maps (common peak) before the
    /// electronic layers.
    pub normalize_first_layer: bool,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>, first_layer_mode: FirstLayerMode) -> Self {
        NetworkSpec {
            layers,
            first_layer_mode,
            channel_policy: ChannelPolicy::DetectThenSum,
            normalize_first_layer: true,
        }
    }

    /// First-layer kernels `[out][in]`.
    pub fn first_layer_kernels(&self) -> Result<&[Vec<Kernel>]> {
        let kernels = match self.layers.first() {
            Some(LayerSpec::Conv {
                kernels,
                stride: 1,
                padding: Padding::Same,
                biases: None,
            }) => kernels,
            Some(LayerSpec::Conv { .. }) => {
                return Err(Error::Config(
                    "first conv layer must have stride 1, same padding and no bias".into(),
                ))
            }
            _ => return Err(Error::Config("network must start with a conv layer".into())),
        };
        if self.layers.get(1) != Some(&LayerSpec::Activation(ActivationKind::Square)) {
            return Err(Error::Config(
                "first conv layer must be followed by a square activation".into(),
            ));
        }
        Ok(kernels)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.first_layer_kernels()?;
        if first.is_empty() {
            return Err(Error::Config("first conv layer has no kernels".into()));
        }
        if self.first_layer_mode == FirstLayerMode::OpticalSimulated
            && self.channel_policy == ChannelPolicy::SumThenDetect
        {
            return Err(Error::Config(
                "optical first layer can only sum channels after detection".into(),
            ));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            check_layer(layer)
                .map_err(|e| Error::Config(format!("layer {i} ({}): {e}", layer.name())))?;
        }
        Ok(())
    }
}

fn check_layer(layer: &LayerSpec) -> Result<()> {
    match layer {
        LayerSpec::Conv {
            kernels,
            stride,
            biases,
            ..
        } => {
            if *stride == 0 {
                return Err(Error::InvalidInput("stride must be at least 1".into()));
            }
            let n_in = kernels.first().map_or(0, Vec::len);
            if n_in == 0 || kernels.iter().any(|k| k.len() != n_in) {
                return Err(Error::InvalidInput(
                    "every output channel needs one kernel per input channel".into(),
                ));
            }
            let dim = kernels[0][0].dim();
            if kernels.iter().flatten().any(|k| k.dim() != dim) {
                return Err(Error::InvalidInput(
                    "kernel shapes differ within the layer".into(),
                ));
            }
            if let Some(b) = biases {
                if b.len() != kernels.len() {
                    return Err(Error::InvalidInput(format!(
                        "{} biases for {} output channels",
                        b.len(),
                        kernels.len()
                    )));
                }
            }
        }
        LayerSpec::MaxPool { window, stride } => {
            if *window == 0 || *stride == 0 {
                return Err(Error::InvalidInput(
                    "window and stride must be at least 1".into(),
                ));
            }
        }
        LayerSpec::Lrn(p) => {
            if !(p.k_const > 0.0 && p.alpha_const >= 0.0 && p.beta_const > 0.0) {
                return Err(Error::InvalidInput(
                    "LRN needs k > 0, alpha >= 0 and beta > 0".into(),
                ));
            }
        }
        LayerSpec::Activation(_) | LayerSpec::Bias(_) => {}
    }
    Ok(())
}

fn stack_shape(input: &[Array2<f64>]) -> Result<(usize, usize)> {
    let first = input
        .first()
        .ok_or_else(|| Error::InvalidInput("empty channel stack".into()))?;
    if input.iter().any(|m| m.dim() != first.dim()) {
        return Err(Error::InvalidInput("channels differ in shape".into()));
    }
    Ok(first.dim())
}

/// Cross-channel convolution: output `o` is `Σ_i conv(input[i], kernels[o][i])`
/// plus its bias. Same padding keeps the convolution center of
/// [`ideal_convolve`] and then takes every `stride`-th sample.
pub fn conv2d(
    input: &[Array2<f64>],
    kernels: &[Vec<Kernel>],
    stride: usize,
    padding: Padding,
    biases: Option<&[f64]>,
) -> Result<Stack> {
    let (h, w) = stack_shape(input)?;
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be at least 1".into()));
    }
    if kernels.is_empty() || kernels.iter().any(|k| k.len() != input.len()) {
        return Err(Error::InvalidInput(format!(
            "kernel set does not match {} input channels",
            input.len()
        )));
    }
    if let Some(b) = biases {
        if b.len() != kernels.len() {
            return Err(Error::InvalidInput(format!(
                "{} biases for {} output channels",
                b.len(),
                kernels.len()
            )));
        }
    }
    let (kr, kc) = kernels[0][0].dim();
    if kernels.iter().flatten().any(|k| k.dim() != (kr, kc)) {
        return Err(Error::InvalidInput(
            "kernel shapes differ within the layer".into(),
        ));
    }
    if padding == Padding::Valid && (kr > h || kc > w) {
        return Err(Error::InvalidGeometry(format!(
            "{kr}x{kc} kernel does not fit a {h}x{w} input without padding"
        )));
    }
    let outputs = par::map_range(kernels.len(), |o| {
        let mut acc = match padding {
            Padding::Same => {
                let mut full = Array2::<f64>::zeros((h, w));
                for (img, k) in input.iter().zip(&kernels[o]) {
                    full += &ideal_convolve(img, k);
                }
                full.slice(s![..;stride, ..;stride]).to_owned()
            }
            Padding::Valid => valid_conv(input, &kernels[o], stride),
        };
        if let Some(b) = biases {
            acc.mapv_inplace(|v| v + b[o]);
        }
        acc
    });
    Ok(outputs)
}

fn valid_conv(input: &[Array2<f64>], kernels: &[Kernel], stride: usize) -> Array2<f64> {
    let (h, w) = input[0].dim();
    let (kr, kc) = kernels[0].dim();
    let (oh, ow) = ((h - kr) / stride + 1, (w - kc) / stride + 1);
    let mut out = Array2::zeros((oh, ow));
    for (img, k) in input.iter().zip(kernels) {
        let wts = k.weights();
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = 0.0;
                for r in 0..kr {
                    for c in 0..kc {
                        acc +=
                            wts[[r, c]] * img[[i * stride + kr - 1 - r, j * stride + kc - 1 - c]];
                    }
                }
                out[[i, j]] += acc;
            }
        }
    }
    out
}

pub fn activation(input: &[Array2<f64>], kind: ActivationKind) -> Stack {
    input
        .iter()
        .map(|m| match kind {
            ActivationKind::Relu => m.mapv(|v| v.max(0.0)),
            ActivationKind::Square => m.mapv(|v| v * v),
        })
        .collect()
}

pub fn maxpool(input: &[Array2<f64>], window: usize, stride: usize) -> Result<Stack> {
    let (h, w) = stack_shape(input)?;
    if window == 0 || stride == 0 {
        return Err(Error::InvalidInput(
            "window and stride must be at least 1".into(),
        ));
    }
    if window > h || window > w {
        return Err(Error::InvalidGeometry(format!(
            "pool window {window} exceeds {h}x{w} input"
        )));
    }
    let (oh, ow) = ((h - window) / stride + 1, (w - window) / stride + 1);
    Ok(input
        .iter()
        .map(|m| {
            Array2::from_shape_fn((oh, ow), |(i, j)| {
                m.slice(s![
                    i * stride..i * stride + window,
                    j * stride..j * stride + window
                ])
                .iter()
                .fold(f64::NEG_INFINITY, |a, &v| a.max(v))
            })
        })
        .collect())
}

/// Cross-channel local response normalization,
/// `b[c] = a[c] / (k + alpha Σ a[c']^2)^beta` over `|c' - c| <= depth_radius`.
pub fn lrn(input: &[Array2<f64>], params: &LrnParams) -> Result<Stack> {
    let (h, w) = stack_shape(input)?;
    let n = input.len();
    let r = params.depth_radius;
    Ok((0..n)
        .map(|c| {
            let lo = c.saturating_sub(r);
            let hi = (c + r).min(n - 1);
            Array2::from_shape_fn((h, w), |idx| {
                let sum: f64 = (lo..=hi).map(|cc| input[cc][idx] * input[cc][idx]).sum();
                input[c][idx] / (params.k_const + params.alpha_const * sum).powf(params.beta_const)
            })
        })
        .collect())
}

pub fn add_bias(input: &[Array2<f64>], biases: &[f64]) -> Result<Stack> {
    if biases.len() != input.len() {
        return Err(Error::InvalidInput(format!(
            "{} biases for {} channels",
            biases.len(),
            input.len()
        )));
    }
    Ok(input
        .iter()
        .zip(biases)
        .map(|(m, b)| m.mapv(|v| v + b))
        .collect())
}

/// Apply one electronic layer.
pub fn apply_layer(input: &[Array2<f64>], layer: &LayerSpec) -> Result<Stack> {
    match layer {
        LayerSpec::Conv {
            kernels,
            stride,
            padding,
            biases,
        } => conv2d(input, kernels, *stride, *padding, biases.as_deref()),
        LayerSpec::Activation(kind) => Ok(activation(input, *kind)),
        LayerSpec::MaxPool { window, stride } => maxpool(input, *window, *stride),
        LayerSpec::Lrn(p) => lrn(input, p),
        LayerSpec::Bias(b) => add_bias(input, b),
    }
}

/// Electronic reference for the optical first layer.
pub fn oracle_first_layer(
    channels: &[Array2<f64>],
    kernels: &[Vec<Kernel>],
    policy: ChannelPolicy,
) -> Result<Stack> {
    stack_shape(channels)?;
    if kernels.iter().any(|k| k.len() != channels.len()) {
        return Err(Error::InvalidInput(format!(
            "kernel set does not match {} input channels",
            channels.len()
        )));
    }
    Ok(par::map_range(kernels.len(), |o| {
        let convs = channels
            .iter()
            .zip(&kernels[o])
            .map(|(img, k)| ideal_convolve(img, k));
        let zero = Array2::<f64>::zeros(channels[0].dim());
        match policy {
            ChannelPolicy::DetectThenSum => convs.fold(zero, |acc, c| acc + c.mapv(|v| v * v)),
            ChannelPolicy::SumThenDetect => convs.fold(zero, |acc, c| acc + c).mapv(|v| v * v),
        }
    }))
}

/// Optical hardware of the first layer: one correlator design per input
/// channel (usually differing only in wavelength).
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalSetup {
    pub specs: Vec<CorrelatorSpec>,
    pub options: OpticalOptions,
}

impl OpticalSetup {
    /// The same correlator for every channel.
    pub fn uniform(spec: CorrelatorSpec, channels: usize) -> Self {
        OpticalSetup {
            specs: vec![spec; channels],
            options: OpticalOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerTrace {
    pub layer: String,
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub maps: Stack,
    /// Shape after the first layer and after each later layer.
    pub trace: Vec<LayerTrace>,
}

fn trace_entry(name: &str, maps: &[Array2<f64>]) -> LayerTrace {
    let (rows, cols) = maps.first().map_or((0, 0), Array2::dim);
    LayerTrace {
        layer: name.to_string(),
        channels: maps.len(),
        rows,
        cols,
    }
}

/// Run the network. The first conv and square are computed optically or by
/// the electronic oracle; every later layer runs electronically.
pub fn network_forward(
    image_channels: &[Array2<f64>],
    net: &NetworkSpec,
    optical: &OpticalSetup,
) -> Result<ForwardOutput> {
    net.validate()?;
    let kernels = net.first_layer_kernels()?;
    stack_shape(image_channels)?;
    if kernels[0].len() != image_channels.len() {
        return Err(Error::Config(format!(
            "first layer expects {} channels, image has {}",
            kernels[0].len(),
            image_channels.len()
        )));
    }
    let first = match net.first_layer_mode {
        FirstLayerMode::ElectronicOracle => {
            oracle_first_layer(image_channels, kernels, net.channel_policy)?
        }
        FirstLayerMode::OpticalSimulated => {
            if optical.specs.len() != image_channels.len() {
                return Err(Error::Config(format!(
                    "{} correlator specs for {} channels",
                    optical.specs.len(),
                    image_channels.len()
                )));
            }
            // run_layer indexes kernels by channel first.
            let by_channel: Vec<Vec<Kernel>> = (0..image_channels.len())
                .map(|c| kernels.iter().map(|per_out| per_out[c].clone()).collect())
                .collect();
            run_layer(
                image_channels,
                &by_channel,
                &optical.specs,
                &optical.options,
            )?
            .maps
        }
    };
    let mut maps = if net.normalize_first_layer {
        peak_normalize_all(&first)
    } else {
        first
    };
    let mut trace = vec![trace_entry("conv+square", &maps)];
    for (i, layer) in net.layers.iter().enumerate().skip(2) {
        maps = apply_layer(&maps, layer).map_err(|e| match e {
            Error::InvalidInput(m) | Error::InvalidGeometry(m) => {
                Error::Config(format!("layer {i} ({}): {m}", layer.name()))
            }
            other => other,
        })?;
        trace.push(trace_entry(layer.name(), &maps));
    }
    Ok(ForwardOutput { maps, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn unit_kernel_is_identity() {
        let img = array![[1.0, 2.0], [3.0, 4.0]];
        let k = Kernel::from_rows(&[&[1.0]]).unwrap();
        let out = conv2d(
            std::slice::from_ref(&img),
            &[vec![k]],
            1,
            Padding::Same,
            None,
        )
        .unwrap();
        assert_eq!(out[0], img);
    }

    #[test]
    fn alexnet_stride_geometry() {
        let img = Array2::zeros((227, 227));
        let k = Kernel::new(Array2::ones((11, 11))).unwrap();
        let out = conv2d(&[img], &[vec![k]], 4, Padding::Valid, None).unwrap();
        assert_eq!(out[0].dim(), (55, 55));
    }

    #[test]
    fn valid_matches_same_interior() {
        let img = Array2::from_shape_fn((9, 8), |(r, c)| (r * 8 + c) as f64 * 0.1);
        let k = Kernel::new(Array2::from_shape_fn((3, 3), |(r, c)| {
            (r as f64 - c as f64) + 0.5
        }))
        .unwrap();
        let same = ideal_convolve(&img, &k);
        let valid = conv2d(&[img], &[vec![k]], 1, Padding::Valid, None).unwrap();
        assert_eq!(valid[0].dim(), (7, 6));
        for ((i, j), v) in valid[0].indexed_iter() {
            assert!((v - same[[i + 1, j + 1]]).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_image_sifts_flipped_kernels() {
        let mut img = Array2::zeros((7, 7));
        img[[3, 3]] = 1.0;
        let k = Kernel::new(Array2::from_shape_fn((3, 3), |(r, c)| (3 * r + c) as f64)).unwrap();
        let out = conv2d(&[img], &[vec![k.clone()]], 1, Padding::Same, None).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(out[0][[2 + r, 2 + c]], k.weights()[[r, c]]);
            }
        }
    }

    #[test]
    fn biases_and_errors() {
        let img = Array2::zeros((4, 4));
        let out = conv2d(
            std::slice::from_ref(&img),
            &[vec![Kernel::delta()]],
            1,
            Padding::Same,
            Some(&[2.5]),
        )
        .unwrap();
        assert!(out[0].iter().all(|&v| v == 2.5));
        assert!(conv2d(
            std::slice::from_ref(&img),
            &[vec![Kernel::delta()]],
            0,
            Padding::Same,
            None
        )
        .is_err());
        assert!(conv2d(
            std::slice::from_ref(&img),
            &[vec![]],
            1,
            Padding::Same,
            None
        )
        .is_err());
        assert!(conv2d(
            &[img],
            &[vec![Kernel::delta()]],
            1,
            Padding::Same,
            Some(&[1.0, 2.0])
        )
        .is_err());
    }

    #[test]
    fn activations() {
        let m = array![[-3.0, 2.0]];
        assert_eq!(
            activation(std::slice::from_ref(&m), ActivationKind::Relu)[0],
            array![[0.0, 2.0]]
        );
        assert_eq!(
            activation(&[m], ActivationKind::Square)[0],
            array![[9.0, 4.0]]
        );
    }

    #[test]
    fn pooling() {
        let m = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(
            maxpool(std::slice::from_ref(&m), 2, 2).unwrap()[0],
            array![[4.0]]
        );
        assert_eq!(maxpool(std::slice::from_ref(&m), 1, 1).unwrap()[0], m);
        let c = Array2::from_elem((7, 7), 0.3);
        let p = maxpool(&[c], 3, 2).unwrap();
        assert_eq!(p[0].dim(), (3, 3));
        assert!(p[0].iter().all(|&v| v == 0.3));
        assert!(matches!(
            maxpool(&[m], 3, 1),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn lrn_cases() {
        let a = array![[1.0]];
        let p = LrnParams {
            depth_radius: 0,
            k_const: 2.0,
            alpha_const: 1e-4,
            beta_const: 0.75,
        };
        let b = lrn(std::slice::from_ref(&a), &p).unwrap();
        assert_eq!(b[0][[0, 0]], 1.0 / (2.0f64 + 1e-4).powf(0.75));
        let flat = LrnParams {
            alpha_const: 0.0,
            ..LrnParams::default()
        };
        let m = array![[3.0, -1.5]];
        let out = lrn(&[m.clone(), m.clone()], &flat).unwrap();
        assert_eq!(out[1], m.mapv(|v| v / 2.0f64.powf(0.75)));
    }

    proptest! {
        #[test]
        fn lrn_scaling_identity(a in -5.0f64..5.0, b in -5.0f64..5.0, c in 0.1f64..10.0) {
            let p = LrnParams::default();
            let scaled = [array![[c * a]], array![[c * b]]];
            let out = lrn(&scaled, &p).unwrap();
            let expect = c * a / (p.k_const + p.alpha_const * c * c * (a * a + b * b)).powf(p.beta_const);
            prop_assert!((out[0][[0, 0]] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }

        #[test]
        fn square_is_even(x in -1e3f64..1e3) {
            let p = activation(&[array![[x]]], ActivationKind::Square);
            let n = activation(&[array![[-x]]], ActivationKind::Square);
            prop_assert!(p[0][[0, 0]] >= 0.0);
            prop_assert_eq!(p[0][[0, 0]], n[0][[0, 0]]);
        }
    }

    #[test]
    fn network_validation() {
        let conv = LayerSpec::Conv {
            kernels: vec![vec![Kernel::delta()]],
            stride: 1,
            padding: Padding::Same,
            biases: None,
        };
        let sq = LayerSpec::Activation(ActivationKind::Square);
        assert!(NetworkSpec::new(
            vec![conv.clone(), sq.clone()],
            FirstLayerMode::OpticalSimulated
        )
        .validate()
        .is_ok());
        let relu = LayerSpec::Activation(ActivationKind::Relu);
        assert!(
            NetworkSpec::new(vec![conv, relu], FirstLayerMode::OpticalSimulated)
                .validate()
                .is_err()
        );
        let strided = LayerSpec::Conv {
            kernels: vec![vec![Kernel::delta()]],
            stride: 4,
            padding: Padding::Same,
            biases: None,
        };
        assert!(matches!(
            NetworkSpec::new(vec![strided, sq], FirstLayerMode::ElectronicOracle).validate(),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn oracle_forward_without_tail() {
        let img = Array2::from_shape_fn((6, 6), |(r, c)| (r + c) as f64 / 10.0);
        let conv = LayerSpec::Conv {
            kernels: vec![vec![Kernel::delta()]],
            stride: 1,
            padding: Padding::Same,
            biases: None,
        };
        let mut net = NetworkSpec::new(
            vec![conv, LayerSpec::Activation(ActivationKind::Square)],
            FirstLayerMode::ElectronicOracle,
        );
        net.normalize_first_layer = false;
        let out = network_forward(
            std::slice::from_ref(&img),
            &net,
            &OpticalSetup::uniform(CorrelatorSpec::default(), 1),
        )
        .unwrap();
        assert_eq!(out.maps[0], img.mapv(|v| v * v));
        assert_eq!(out.trace.len(), 1);
    }
}
