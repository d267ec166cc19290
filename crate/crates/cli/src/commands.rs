use std::fs;
use std::path::{Path, PathBuf};

use fourfold::analysis::{analyze, AnalysisInputs, PerfParams};
use fourfold::array::{crosstalk_report, run_layer, CrosstalkOptions, CrosstalkReport};
use fourfold::backend::{network_forward, LayerTrace, OpticalSetup};
use fourfold::correlator::{
    convolve_image, ideal_convolve, kernel_to_fourier_mask, simulation_grid, CorrelatorSpec,
    Kernel, OpticalOptions,
};
use fourfold::field::{
    field_from_image, intensity, GridSpec, DEFAULT_PITCH, RGB_WAVELENGTHS, WAVELENGTH_GREEN,
};
use fourfold::io::{
    read_field, read_kernel_file, read_network, read_pgm, write_field, write_layer_output,
    write_mask, write_pgm16,
};
use fourfold::metrics::agreement;
use fourfold::patterns::first_layer_kernels;
use fourfold::propagation::{propagate_with, PropagationOptions};
use ndarray::Array2;
use serde::Serialize;

use crate::args::{
    AnalyzeArgs, CompareArgs, CrosstalkArgs, ForwardArgs, LayerArgs, OpticsArgs, PropagateArgs,
    Run4fArgs, SpecArgs,
};
use crate::config::{check_inputs, overlay, require};
use crate::exit::{CliError, CliResult, Status};
use crate::report::emit;

fn correlator_spec(args: &SpecArgs) -> CliResult<CorrelatorSpec> {
    let spec = overlay(&CorrelatorSpec::default(), args)?;
    spec.validate()?;
    Ok(spec)
}

fn optical_options(args: &OpticsArgs) -> CliResult<OpticalOptions> {
    let opts = overlay(&OpticalOptions::default(), args)?;
    opts.validate()?;
    Ok(opts)
}

fn load_kernels(path: &Path) -> CliResult<Vec<Kernel>> {
    let kernels = read_kernel_file(path)?;
    if kernels.is_empty() {
        return Err(CliError::config(format!("{}: no kernels", path.display())));
    }
    Ok(kernels)
}

/// Per-channel correlators: explicit wavelengths, RGB for three channels, or
/// the spec wavelength otherwise.
fn channel_specs(
    spec: CorrelatorSpec,
    explicit: Option<&[f64]>,
    channels: usize,
) -> CliResult<Vec<CorrelatorSpec>> {
    match explicit {
        Some(ws) if ws.len() != channels => Err(CliError::config(format!(
            "{} wavelengths given for {channels} channels",
            ws.len()
        ))),
        Some(ws) => Ok(ws.iter().map(|&w| spec.with_wavelength(w)).collect()),
        None if channels == 3 => Ok(RGB_WAVELENGTHS
            .iter()
            .map(|&w| spec.with_wavelength(w))
            .collect()),
        None => Ok(vec![spec; channels]),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))
}

pub fn propagate(args: PropagateArgs) -> CliResult<Status> {
    let distance = require(args.distance, "distance")?;
    let output = require(args.output, "output")?;
    let opts = PropagationOptions {
        band_limit: args.band_limit.unwrap_or_default(),
        pad_factor: args.pad_factor.unwrap_or(1),
    };
    opts.validate()?;
    let field = match (&args.input, &args.image) {
        (Some(input), _) => {
            check_inputs([input])?;
            read_field(input)?
        }
        (None, Some(image)) => {
            check_inputs([image])?;
            let pitch = args.pitch.unwrap_or(DEFAULT_PITCH);
            let wavelength = args.wavelength.unwrap_or(WAVELENGTH_GREEN);
            GridSpec::new(2, 2, pitch, wavelength)?;
            field_from_image(&read_pgm(image)?, pitch, wavelength, Default::default())?
        }
        (None, None) => return Err(CliError::config("one of --input or --image is required")),
    };
    let out = propagate_with(&field, distance, &opts)?;
    write_field(&output, &out)?;
    if let Some(path) = &args.intensity {
        write_pgm16(path, &intensity(&out, 1.0)?)?;
    }
    eprintln!(
        "propagated {} x {} field by {distance} m",
        out.grid().nx,
        out.grid().ny
    );
    Ok(Status::Success)
}

#[derive(Serialize)]
struct Run4fManifest {
    file: String,
    kernel_index: usize,
    /// Value of full scale in the PGM.
    peak: f64,
    /// Mask passivity scale; the map already includes its square.
    scale_factors: Vec<f64>,
    spec: CorrelatorSpec,
    illumination: f64,
    grid: GridSpec,
}

pub fn run4f(args: Run4fArgs) -> CliResult<Status> {
    let image_path = require(args.image, "image")?;
    let kernel_path = require(args.kernel, "kernel")?;
    let output = require(args.output, "output")?;
    check_inputs([&image_path, &kernel_path])?;
    let spec = correlator_spec(&args.spec)?;
    let opts = optical_options(&args.optics)?;

    let image = read_pgm(&image_path)?;
    let kernels = load_kernels(&kernel_path)?;
    let index = args.kernel_index.unwrap_or(0);
    let kernel = kernels.get(index).ok_or_else(|| {
        CliError::config(format!(
            "kernel index {index} out of range ({} kernels)",
            kernels.len()
        ))
    })?;
    let illumination = args.illumination.unwrap_or(spec.wavelength);

    let result = convolve_image(&image, kernel, &spec, Some(illumination), &opts)?;
    if let Some(mask_path) = &args.mask {
        let grid = simulation_grid(&spec, image.dim(), opts.pad_factor, illumination)?;
        write_mask(
            mask_path,
            &kernel_to_fourier_mask(kernel, &spec, &grid)?.mask,
        )?;
    }
    let map = result
        .map
        .mapv(|v| v * result.mask_scale * result.mask_scale);
    let peak = write_pgm16(&output, &map)?;
    let manifest = Run4fManifest {
        file: output
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        kernel_index: index,
        peak,
        scale_factors: vec![result.mask_scale],
        spec,
        illumination,
        grid: result.grid,
    };
    emit(&manifest, Some(&output.with_extension("json")))?;
    eprintln!("wrote {} on a {} grid", output.display(), result.grid.nx);
    Ok(Status::Success)
}

fn load_channels(paths: &[PathBuf]) -> CliResult<Vec<Array2<f64>>> {
    if paths.is_empty() {
        return Err(CliError::config("at least one input image is required"));
    }
    check_inputs(paths)?;
    paths.iter().map(|p| Ok(read_pgm(p)?)).collect()
}

pub fn layer(args: LayerArgs) -> CliResult<Status> {
    let images = require(args.images, "images")?;
    let kernel_paths = require(args.kernels, "kernels")?;
    let out_dir = require(args.output_dir, "output-dir")?;
    check_inputs(&kernel_paths)?;
    let channels = load_channels(&images)?;
    let specs = channel_specs(
        correlator_spec(&args.spec)?,
        args.wavelengths.as_deref(),
        channels.len(),
    )?;
    let opts = optical_options(&args.optics)?;

    let kernels: Vec<Vec<Kernel>> = match kernel_paths.len() {
        1 => vec![read_kernel_file(&kernel_paths[0])?; channels.len()],
        n if n == channels.len() => kernel_paths
            .iter()
            .map(read_kernel_file)
            .collect::<Result<_, _>>()?,
        n => {
            return Err(CliError::config(format!(
                "{n} kernel files for {} channels; give one shared file or one per channel",
                channels.len()
            )))
        }
    };
    if kernels.iter().any(Vec::is_empty) {
        return Err(CliError::config("layer needs at least one kernel"));
    }
    let output = run_layer(&channels, &kernels, &specs, &opts)?;
    create_dir(&out_dir)?;
    write_layer_output(&out_dir, &output)?;
    eprintln!("wrote {} maps to {}", output.maps.len(), out_dir.display());
    Ok(Status::Success)
}

#[derive(Serialize)]
struct CrosstalkSummary {
    /// Mean over kernels.
    fraction: f64,
    /// Mean over kernels, per neighbouring tile.
    per_tile_powers: [f64; 8],
    max_fraction: f64,
    per_kernel: Vec<CrosstalkReport>,
}

pub fn crosstalk(args: CrosstalkArgs) -> CliResult<Status> {
    let image_path = require(args.image, "image")?;
    check_inputs([&image_path].into_iter().chain(&args.kernels))?;
    let spec = correlator_spec(&args.spec)?;
    let mut opts = CrosstalkOptions::default();
    opts.tile_size = args.tile_size.or(opts.tile_size);
    opts.guard_tiles = args.guard_tiles.unwrap_or(opts.guard_tiles);
    opts.band_limit = args.band_limit.unwrap_or(opts.band_limit);

    let object = read_pgm(&image_path)?;
    let kernels = match &args.kernels {
        Some(path) => load_kernels(path)?,
        None => first_layer_kernels(args.kernel_size.unwrap_or(11), args.seed.unwrap_or(1)),
    };
    let mut reports = Vec::with_capacity(kernels.len());
    for (i, k) in kernels.iter().enumerate() {
        let r = crosstalk_report(&spec, &object, k, &opts)?;
        eprintln!("kernel {i}: crosstalk {:.6}", r.fraction);
        reports.push(r);
    }
    let n = reports.len() as f64;
    let mut per_tile = [0.0; 8];
    for r in &reports {
        for (acc, p) in per_tile.iter_mut().zip(r.per_tile_powers) {
            *acc += p / n;
        }
    }
    let summary = CrosstalkSummary {
        fraction: reports.iter().map(|r| r.fraction).sum::<f64>() / n,
        per_tile_powers: per_tile,
        max_fraction: reports.iter().map(|r| r.fraction).fold(0.0, f64::max),
        per_kernel: reports,
    };
    emit(&summary, args.output.as_deref())?;
    Ok(Status::Success)
}

pub fn analyze_cmd(args: AnalyzeArgs) -> CliResult<Status> {
    let params: PerfParams = overlay(&PerfParams::default(), &args.perf)?;
    let inputs: AnalysisInputs = overlay(&AnalysisInputs::default(), &args.inputs)?;
    let report = analyze(&params, &inputs)?;
    emit(&report, args.output.as_deref())?;
    Ok(Status::Success)
}

#[derive(Serialize)]
struct KernelAgreement {
    kernel_index: usize,
    nrmse: f64,
    correlation: f64,
}

#[derive(Serialize)]
struct CompareReport {
    /// Worst case over kernels.
    nrmse: f64,
    /// Worst case over kernels.
    correlation: f64,
    threshold: f64,
    passed: bool,
    illumination: f64,
    mask_wavelength: f64,
    per_kernel: Vec<KernelAgreement>,
}

pub fn compare(args: CompareArgs) -> CliResult<Status> {
    let image_path = require(args.image, "image")?;
    let kernel_path = require(args.kernels, "kernels")?;
    check_inputs([&image_path, &kernel_path])?;
    let spec = correlator_spec(&args.spec)?;
    let opts = optical_options(&args.optics)?;
    let threshold = args.threshold.unwrap_or(0.05);
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(CliError::config(format!(
            "threshold must be non-negative, got {threshold}"
        )));
    }
    let border = args.border.unwrap_or(7);
    let mask_wavelength = args.mask_wavelength.unwrap_or(spec.wavelength);
    let design = spec.with_wavelength(mask_wavelength);
    design.validate()?;

    let image = read_pgm(&image_path)?;
    let kernels = load_kernels(&kernel_path)?;
    let mut per_kernel = Vec::with_capacity(kernels.len());
    for (i, k) in kernels.iter().enumerate() {
        let optical = convolve_image(&image, k, &design, Some(spec.wavelength), &opts)?;
        let oracle = ideal_convolve(&image, k).mapv(|v| v * v);
        let a = agreement(&optical.map, &oracle, border)?;
        if !(a.nrmse.is_finite() && a.correlation.is_finite()) {
            return Err(CliError {
                status: Status::Numeric,
                message: format!("kernel {i}: comparison produced non-finite values"),
            });
        }
        per_kernel.push(KernelAgreement {
            kernel_index: i,
            nrmse: a.nrmse,
            correlation: a.correlation,
        });
    }
    let nrmse = per_kernel.iter().map(|k| k.nrmse).fold(0.0, f64::max);
    let correlation = per_kernel
        .iter()
        .map(|k| k.correlation)
        .fold(f64::INFINITY, f64::min);
    let passed = nrmse <= threshold;
    eprintln!("worst nrmse {nrmse:.5} against threshold {threshold}");
    emit(
        &CompareReport {
            nrmse,
            correlation,
            threshold,
            passed,
            illumination: spec.wavelength,
            mask_wavelength,
            per_kernel,
        },
        args.output.as_deref(),
    )?;
    Ok(if passed {
        Status::Success
    } else {
        Status::ThresholdFailed
    })
}

#[derive(Serialize)]
struct ForwardMap {
    file: String,
    rows: usize,
    cols: usize,
    /// Stored value = (value - offset) / peak * 65535.
    offset: f64,
    peak: f64,
}

#[derive(Serialize)]
struct ForwardReport {
    trace: Vec<LayerTrace>,
    maps: Vec<ForwardMap>,
}

pub fn forward(args: ForwardArgs) -> CliResult<Status> {
    let network_path = require(args.network, "network")?;
    let images = require(args.images, "images")?;
    let out_dir = require(args.output_dir, "output-dir")?;
    check_inputs([&network_path])?;
    let net = read_network(&network_path)?;
    let channels = load_channels(&images)?;
    let setup = OpticalSetup {
        specs: channel_specs(
            correlator_spec(&args.spec)?,
            args.wavelengths.as_deref(),
            channels.len(),
        )?,
        options: optical_options(&args.optics)?,
    };
    let out = network_forward(&channels, &net, &setup)?;
    create_dir(&out_dir)?;
    let mut maps = Vec::with_capacity(out.maps.len());
    for (i, map) in out.maps.iter().enumerate() {
        let file = format!("map_{i:03}.pgm");
        let offset = map.iter().fold(0.0f64, |m, &v| m.min(v));
        let peak = write_pgm16(out_dir.join(&file), &map.mapv(|v| v - offset))?;
        maps.push(ForwardMap {
            file,
            rows: map.nrows(),
            cols: map.ncols(),
            offset,
            peak,
        });
    }
    emit(
        &ForwardReport {
            trace: out.trace,
            maps,
        },
        Some(&out_dir.join("forward.json")),
    )?;
    eprintln!("wrote {} maps to {}", out.maps.len(), out_dir.display());
    Ok(Status::Success)
}
