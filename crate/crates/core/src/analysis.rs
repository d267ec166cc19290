//! Closed-form latency, power, energy and capacity models for an optical
//! first layer.

use serde::{Deserialize, Serialize};

use crate::array::layout_array;
use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerfParams {
    /// Pixels per image side.
    pub n: u64,
    pub n_kernel: u64,
    /// Kernel side.
    pub k: u64,
    /// Source efficiency.
    pub eta: f64,
    /// Transmission of each optical element.
    pub t: f64,
    /// Number of optical elements in the path.
    pub p: u32,
    /// Optical power each detector pixel needs, W.
    pub detector_power_per_pixel: f64,
    pub alpha: f64,
    /// Energy per multiply-accumulate, J.
    pub p_switching: f64,
    pub t_source: f64,
    pub t_detect: f64,
    pub data_bytes: f64,
    /// Link rate in bits per second.
    pub link_rate: f64,
    pub focal_length: f64,
}

impl Default for PerfParams {
    fn default() -> Self {
        Self {
            n: 227,
            n_kernel: 96,
            k: 11,
            eta: 0.5,
            t: 0.9,
            p: 5,
            detector_power_per_pixel: 1e-6,
            alpha: 1.0,
            p_switching: 1e-12,
            t_source: 1e-3,
            t_detect: 1e-3,
            data_bytes: 1e5,
            link_rate: 2.5e9,
            focal_length: 3e-3,
        }
    }
}

impl PerfParams {
    pub fn validate(&self) -> Result<()> {
        let counts = [("n", self.n), ("n_kernel", self.n_kernel), ("k", self.k)];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        let reals = [
            ("eta", self.eta),
            ("t", self.t),
            ("detector_power_per_pixel", self.detector_power_per_pixel),
            ("alpha", self.alpha),
            ("p_switching", self.p_switching),
            ("data_bytes", self.data_bytes),
            ("link_rate", self.link_rate),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("t_source", self.t_source),
            ("t_detect", self.t_detect),
            ("focal_length", self.focal_length),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if self.eta > 1.0 || self.t > 1.0 {
            return Err(Error::InvalidInput(format!(
                "eta ({}) and t ({}) cannot exceed 1",
                self.eta, self.t
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyBreakdown {
    pub t_source: f64,
    pub t_4f: f64,
    pub t_detect: f64,
    pub t_data: f64,
    pub total: f64,
}

pub fn latency_model(params: &PerfParams) -> LatencyBreakdown {
    let t_data = 8.0 * params.data_bytes / params.link_rate;
    let t_4f = 4.0 * params.focal_length / SPEED_OF_LIGHT;
    LatencyBreakdown {
        t_source: params.t_source,
        t_4f,
        t_detect: params.t_detect,
        t_data,
        total: params.t_source + t_4f + params.t_detect + t_data,
    }
}

/// Source power needed so every detector pixel of every kernel output
/// receives its required power, W. Independent of the kernel size.
pub fn optical_power(params: &PerfParams) -> f64 {
    let n = params.n as f64;
    n * n * params.n_kernel as f64 * params.detector_power_per_pixel
        / (params.eta * params.t.powi(params.p as i32))
}

/// Switching energy of one electronic convolution layer, J.
pub fn electronic_energy(params: &PerfParams) -> f64 {
    let (n, k) = (params.n as f64, params.k as f64);
    params.alpha * n * n * k * k * params.n_kernel as f64 * params.p_switching
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceBandwidth {
    pub per_side: f64,
    pub total: f64,
}

pub fn space_bandwidth(
    diameter: f64,
    focal_length: f64,
    wavelength: f64,
) -> Result<SpaceBandwidth> {
    for (name, v) in [
        ("diameter", diameter),
        ("focal_length", focal_length),
        ("wavelength", wavelength),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidInput(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let per_side = diameter * diameter / (wavelength * focal_length);
    Ok(SpaceBandwidth {
        per_side,
        total: per_side * per_side,
    })
}

/// Multiply-accumulates of one stride-1 layer: `n^2 k^2 n_kernel`.
pub fn mac_count(n: u64, k: u64, n_kernel: u64) -> u64 {
    n * n * k * k * n_kernel
}

/// Image size (pixels) at which a linear electronic time model catches up
/// with a constant optical latency.
pub fn crossover_pixels(optical_total_latency: f64, seconds_per_pixel: f64) -> Result<f64> {
    if !(seconds_per_pixel.is_finite() && seconds_per_pixel > 0.0) {
        return Err(Error::InvalidInput(format!(
            "electronic time per pixel must be positive, got {seconds_per_pixel}"
        )));
    }
    if !(optical_total_latency.is_finite() && optical_total_latency >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "latency must be non-negative, got {optical_total_latency}"
        )));
    }
    Ok(optical_total_latency / seconds_per_pixel)
}

/// Measured per-layer CPU inference times of AlexNet at 227x227, ms.
/// Hardware-specific; shipped for context only.
pub const CPU_LAYER_TIMES_MS: [f64; 5] = [2.75, 4.11, 1.39, 1.55, 1.15];
pub const CPU_LAYER_SHARES: [f64; 5] = [0.251, 0.376, 0.126, 0.142, 0.105];

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceTimes {
    pub cpu_layer_ms: [f64; 5],
    pub cpu_layer_share: [f64; 5],
}

/// Everything `analyze` reports.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub params: PerfParams,
    pub latency: LatencyBreakdown,
    pub optical_power_w: f64,
    pub electronic_energy_j: f64,
    pub sbp: SpaceBandwidth,
    pub mac_count: u64,
    pub crossover_pixels: f64,
    pub array_area_m2: f64,
    pub array_area_cm2: f64,
    pub reference: ReferenceTimes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisInputs {
    pub lens_diameter: f64,
    pub wavelength: f64,
    /// Color channels laid out in the array.
    pub channels: u64,
    /// Electronic time per pixel for the crossover estimate, s.
    pub seconds_per_pixel: f64,
}

impl Default for AnalysisInputs {
    fn default() -> Self {
        Self {
            lens_diameter: 0.57e-3,
            wavelength: 532e-9,
            channels: 3,
            seconds_per_pixel: 9.28e-9,
        }
    }
}

pub fn analyze(params: &PerfParams, inputs: &AnalysisInputs) -> Result<AnalysisReport> {
    params.validate()?;
    if params.focal_length <= 0.0 {
        return Err(Error::InvalidInput("focal_length must be positive".into()));
    }
    let latency = latency_model(params);
    let channels =
        usize::try_from(inputs.channels).map_err(|_| Error::InvalidInput("channels".into()))?;
    let kernels =
        usize::try_from(params.n_kernel).map_err(|_| Error::InvalidInput("n_kernel".into()))?;
    let layout = layout_array(kernels, channels, inputs.lens_diameter)?;
    Ok(AnalysisReport {
        params: *params,
        latency,
        optical_power_w: optical_power(params),
        electronic_energy_j: electronic_energy(params),
        sbp: space_bandwidth(inputs.lens_diameter, params.focal_length, inputs.wavelength)?,
        mac_count: mac_count(params.n, params.k, params.n_kernel),
        crossover_pixels: crossover_pixels(latency.total, inputs.seconds_per_pixel)?,
        array_area_m2: layout.total_area,
        array_area_cm2: layout.total_area_cm2(),
        reference: ReferenceTimes {
            cpu_layer_ms: CPU_LAYER_TIMES_MS,
            cpu_layer_share: CPU_LAYER_SHARES,
        },
    })
}
