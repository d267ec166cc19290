//! Command-line options. Every field is optional so that a config file can
//! supply it; defaults are applied after merging.

use std::path::PathBuf;

use clap::Args;
use fourfold::elements::LensModel;
use fourfold::field::Encoding;
use fourfold::propagation::BandLimit;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Parse a kebab-case enum through its serde representation.
fn serde_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Correlator geometry. Serializes with the field names of `CorrelatorSpec`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SpecArgs {
    /// Lens focal length, m [3e-3]
    #[arg(long)]
    pub focal_length: Option<f64>,
    /// Lens diameter, m [0.57e-3]
    #[arg(long)]
    pub lens_diameter: Option<f64>,
    /// Sample pitch, m [2.5e-6]
    #[arg(long)]
    pub pitch: Option<f64>,
    /// Design and illumination wavelength, m [532e-9]
    #[arg(long)]
    pub wavelength: Option<f64>,
    /// hyperbolic | paraxial
    #[arg(long, value_parser = serde_enum::<LensModel>)]
    pub lens_model: Option<LensModel>,
}

/// Simulation knobs. Serializes with the field names of `OpticalOptions`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct OpticsArgs {
    /// Grow the simulation grid by this power of two [1]
    #[arg(long)]
    pub pad_factor: Option<usize>,
    /// auto | on | off
    #[arg(long)]
    pub band_limit: Option<BandLimit>,
    /// amplitude | intensity
    #[arg(long, value_parser = serde_enum::<Encoding>)]
    pub encoding: Option<Encoding>,
    /// Detector responsivity [1]
    #[arg(long)]
    pub detector_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PropagateArgs {
    /// Input field (CFLD1)
    #[arg(long, conflicts_with = "image")]
    pub input: Option<PathBuf>,
    /// Input image (PGM), used as a real amplitude
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Pitch for an image input, m [2.5e-6]
    #[arg(long)]
    pub pitch: Option<f64>,
    /// Wavelength for an image input, m [532e-9]
    #[arg(long)]
    pub wavelength: Option<f64>,
    /// Propagation distance, m; negative back-propagates
    #[arg(long, allow_hyphen_values = true)]
    pub distance: Option<f64>,
    /// auto | on | off
    #[arg(long)]
    pub band_limit: Option<BandLimit>,
    /// Zero-pad by this power of two [1]
    #[arg(long)]
    pub pad_factor: Option<usize>,
    /// Output field (CFLD1)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the output intensity as a 16-bit PGM
    #[arg(long)]
    pub intensity: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Run4fArgs {
    /// Input image (PGM)
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Kernel file: CSV, or KRN1 for any other extension
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// Kernel to use from a KRN1 bank [0]
    #[arg(long)]
    pub kernel_index: Option<usize>,
    /// Source wavelength when it differs from the design wavelength, m
    #[arg(long)]
    pub illumination: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub optics: OpticsArgs,
    /// Output map (16-bit PGM); the manifest goes next to it as .json
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the Fourier mask (CFLD1)
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct LayerArgs {
    /// One PGM per input channel, comma separated
    #[arg(long, value_delimiter = ',')]
    pub images: Option<Vec<PathBuf>>,
    /// One kernel file shared by all channels, or one per channel
    #[arg(long, value_delimiter = ',')]
    pub kernels: Option<Vec<PathBuf>>,
    /// Wavelength per channel, m [632e-9,532e-9,442e-9 for three channels]
    #[arg(long, value_delimiter = ',')]
    pub wavelengths: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub optics: OpticsArgs,
    /// Directory for the maps and manifest
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct CrosstalkArgs {
    /// Object image (PGM)
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Kernel file; a synthetic first-layer set is used when absent
    #[arg(long)]
    pub kernels: Option<PathBuf>,
    /// Seed for the synthetic kernel set [1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Side of the synthetic kernels [11]
    #[arg(long)]
    pub kernel_size: Option<usize>,
    /// Tile side, m [lens diameter]
    #[arg(long)]
    pub tile_size: Option<f64>,
    /// Absorbing tiles around the 3x3 block [1]
    #[arg(long)]
    pub guard_tiles: Option<usize>,
    /// auto | on | off
    #[arg(long)]
    pub band_limit: Option<BandLimit>,
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    /// Report path [stdout]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Serializes with the field names of `PerfParams`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PerfArgs {
    /// Pixels per image side [227]
    #[arg(long)]
    pub n: Option<u64>,
    /// Kernels in the layer [96]
    #[arg(long)]
    pub n_kernel: Option<u64>,
    /// Kernel side [11]
    #[arg(long)]
    pub k: Option<u64>,
    /// Source efficiency [0.5]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Transmission per element [0.9]
    #[arg(long)]
    pub t: Option<f64>,
    /// Optical elements in the path [5]
    #[arg(long)]
    pub p: Option<u32>,
    /// Optical power per detector pixel, W [1e-6]
    #[arg(long)]
    pub detector_power_per_pixel: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Energy per MAC, J [1e-12]
    #[arg(long)]
    pub p_switching: Option<f64>,
    /// Source modulation time, s [1e-3]
    #[arg(long)]
    pub t_source: Option<f64>,
    /// Detector readout time, s [1e-3]
    #[arg(long)]
    pub t_detect: Option<f64>,
    /// Bytes moved per frame [1e5]
    #[arg(long)]
    pub data_bytes: Option<f64>,
    /// Link rate, bit/s [2.5e9]
    #[arg(long)]
    pub link_rate: Option<f64>,
    /// Focal length, m [3e-3]
    #[arg(long)]
    pub focal_length: Option<f64>,
}

/// Serializes with the field names of `AnalysisInputs`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct InputsArgs {
    /// Lens diameter, m [0.57e-3]
    #[arg(long)]
    pub lens_diameter: Option<f64>,
    /// Wavelength for the space-bandwidth product, m [532e-9]
    #[arg(long)]
    pub wavelength: Option<f64>,
    /// Color channels in the array [3]
    #[arg(long)]
    pub channels: Option<u64>,
    /// Electronic time per pixel, s [9.28e-9]
    #[arg(long)]
    pub seconds_per_pixel: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub perf: PerfArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub inputs: InputsArgs,
    /// Report path [stdout]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    /// Input image (PGM)
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Kernel file: CSV, or KRN1 for any other extension
    #[arg(long)]
    pub kernels: Option<PathBuf>,
    /// Wavelength the masks are designed for, m [the illumination wavelength]
    #[arg(long)]
    pub mask_wavelength: Option<f64>,
    /// Largest acceptable NRMSE [0.05]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Border excluded from the comparison, samples [7]
    #[arg(long)]
    pub border: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub optics: OpticsArgs,
    /// Report path [stdout]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ForwardArgs {
    /// Network description (JSON)
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// One PGM per input channel, comma separated
    #[arg(long, value_delimiter = ',')]
    pub images: Option<Vec<PathBuf>>,
    /// Wavelength per channel, m [632e-9,532e-9,442e-9 for three channels]
    #[arg(long, value_delimiter = ',')]
    pub wavelengths: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub optics: OpticsArgs,
    /// Directory for the final maps and the report
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}
