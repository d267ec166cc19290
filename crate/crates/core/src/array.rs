//! Tiling correlators into a dense array: footprint, inter-tile crosstalk, and
//! a full optical convolution layer.

use ndarray::{s, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correlator::{
    convolve_prepared, kernel_to_fourier_mask, simulation_grid, Correlator, CorrelatorSpec, Kernel,
    OpticalOptions,
};
use crate::elements::ElementMask;
use crate::error::{Error, Result};
use crate::field::{check_unit_range, embed_centered, total_power, ComplexField, GridSpec};
use crate::par;
use crate::propagation::BandLimit;

/// Zero-gap tiling of one correlator per (channel, kernel) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayLayout {
    pub n_kernels: usize,
    pub n_channels: usize,
    /// Side of one square tile in meters (the lens diameter).
    pub tile_size: f64,
    pub rows: usize,
    pub cols: usize,
    /// Area of all occupied tile slots in m².
    pub total_area: f64,
}

impl ArrayLayout {
    pub fn tiles(&self) -> usize {
        self.n_kernels * self.n_channels
    }

    pub fn total_area_cm2(&self) -> f64 {
        self.total_area * 1e4
    }

    /// Row-major slot of the tile serving `(channel, kernel)`.
    pub fn slot(&self, channel: usize, kernel: usize) -> (usize, usize) {
        let idx = channel * self.n_kernels + kernel;
        (idx / self.cols, idx % self.cols)
    }
}

/// Near-square packing of `n_kernels * n_channels` tiles.
///
/// The reported area counts the tiles themselves; unused slots in the last
/// row of the bounding rectangle are not included.
pub fn layout_array(n_kernels: usize, n_channels: usize, tile_size: f64) -> Result<ArrayLayout> {
    if n_kernels == 0 || n_channels == 0 {
        return Err(Error::InvalidInput(
            "array needs at least one kernel and one channel".into(),
        ));
    }
    if !(tile_size.is_finite() && tile_size > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "tile size must be positive, got {tile_size}"
        )));
    }
    let n = n_kernels * n_channels;
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    Ok(ArrayLayout {
        n_kernels,
        n_channels,
        tile_size,
        rows,
        cols,
        total_area: n as f64 * tile_size * tile_size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkOptions {
    /// Tile side in meters; defaults to the lens diameter.
    pub tile_size: Option<f64>,
    /// Absorbing tiles added around the 3x3 block on every side. With zero
    /// guard the FFT grid is exactly the 3x3 block and is periodic.
    pub guard_tiles: usize,
    pub band_limit: BandLimit,
}

impl Default for CrosstalkOptions {
    fn default() -> Self {
        CrosstalkOptions {
            tile_size: None,
            guard_tiles: 1,
            band_limit: BandLimit::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosstalkReport {
    /// Output power in the 8 neighbouring tiles over injected power.
    pub fraction: f64,
    /// Per-neighbour fractions, row-major over the 3x3 block skipping the
    /// center, in output-plane coordinates.
    pub per_tile_powers: [f64; 8],
    /// Output power landing in the center tile over injected power.
    pub center_fraction: f64,
    pub injected_power: f64,
    /// Samples per tile side.
    pub tile_samples: usize,
    pub grid: GridSpec,
}

impl CrosstalkReport {
    /// Neighbour power as a share of all output power reaching the 3x3 block.
    pub fn output_share(&self) -> f64 {
        let total = self.fraction + self.center_fraction;
        if total > 0.0 {
            self.fraction / total
        } else {
            0.0
        }
    }
}

/// Fraction of injected power that leaks into the 8 neighbouring output tiles.
pub fn crosstalk_fraction(
    spec: &CorrelatorSpec,
    object: &Array2<f64>,
    kernel: &Kernel,
) -> Result<f64> {
    Ok(crosstalk_report(spec, object, kernel, &CrosstalkOptions::default())?.fraction)
}

/// Simulate one correlator centered in a 3x3 block of tiles and account for
/// where its output lands. Lenses and the filter mask occupy only the center
/// tile; light outside the 3x3 block is absorbed after every hop.
pub fn crosstalk_report(
    spec: &CorrelatorSpec,
    object: &Array2<f64>,
    kernel: &Kernel,
    options: &CrosstalkOptions,
) -> Result<CrosstalkReport> {
    spec.validate()?;
    check_unit_range(object)?;
    let tile_size = options.tile_size.unwrap_or(spec.lens_diameter);
    if !(tile_size.is_finite() && tile_size > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "tile size must be positive, got {tile_size}"
        )));
    }
    if spec.lens_diameter > tile_size * (1.0 + 1e-12) {
        return Err(Error::InvalidGeometry(format!(
            "lens diameter {} m exceeds tile size {tile_size} m",
            spec.lens_diameter
        )));
    }
    let tile = (tile_size / spec.pitch).round() as usize;
    let (oh, ow) = object.dim();
    if oh > tile || ow > tile || oh == 0 || ow == 0 {
        return Err(Error::InvalidGeometry(format!(
            "{oh}x{ow} object does not fit in a {tile}-sample tile"
        )));
    }

    let n = (3 + 2 * options.guard_tiles) * tile;
    let grid = GridSpec::square(n, spec.pitch, spec.wavelength)?;
    // First row/column of the center tile, placed so the tile center is the grid origin.
    let start = n / 2 - tile / 2;
    let block = (start - tile, start + 2 * tile);

    let input = ComplexField::from_parts_unchecked(
        grid,
        embed_centered(&object.mapv(|v| Complex64::new(v, 0.0)), grid.shape())?,
    );
    let injected = total_power(&input);
    let empty = CrosstalkReport {
        fraction: 0.0,
        per_tile_powers: [0.0; 8],
        center_fraction: 0.0,
        injected_power: 0.0,
        tile_samples: tile,
        grid,
    };
    if injected == 0.0 {
        return Ok(empty);
    }

    let mut correlator = Correlator::with_band_limit(spec, &grid, options.band_limit)?;
    if options.guard_tiles > 0 {
        let mut window = Array2::zeros(grid.shape());
        window
            .slice_mut(s![block.0..block.1, block.0..block.1])
            .fill(Complex64::new(1.0, 0.0));
        correlator = correlator.with_absorber(ElementMask::new(grid, window)?)?;
    }
    let fmask = kernel_to_fourier_mask(kernel, spec, &grid)?;
    let output = correlator.run(&input, &fmask)?;

    let pitch2 = spec.pitch * spec.pitch;
    let tile_power = |tr: usize, tc: usize| -> f64 {
        let r0 = block.0 + tr * tile;
        let c0 = block.0 + tc * tile;
        output
            .amplitudes()
            .slice(s![r0..r0 + tile, c0..c0 + tile])
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            * pitch2
    };
    let mut per_tile_powers = [0.0; 8];
    let mut k = 0;
    for tr in 0..3 {
        for tc in 0..3 {
            if (tr, tc) != (1, 1) {
                per_tile_powers[k] = tile_power(tr, tc) / injected;
                k += 1;
            }
        }
    }
    Ok(CrosstalkReport {
        fraction: per_tile_powers.iter().sum(),
        per_tile_powers,
        center_fraction: tile_power(1, 1) / injected,
        injected_power: injected,
        ..empty
    })
}

/// How per-channel correlator outputs are merged into one feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelPolicy {
    /// Square each channel's convolution, then add intensities. The only
    /// option available optically, since channels at different wavelengths do
    /// not interfere.
    #[default]
    DetectThenSum,
    /// Add the channel convolutions, then square. Electronic reference only.
    SumThenDetect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutput {
    /// One detected map per kernel, each the shape of the input channels.
    pub maps: Vec<Array2<f64>>,
    pub channel_policy: ChannelPolicy,
    /// Mask passivity scales, indexed `[kernel][channel]`. Each detected map
    /// is multiplied by its scale squared before the channel sum.
    pub scale_factors: Vec<Vec<f64>>,
    /// Simulation grid of each channel.
    pub grids: Vec<GridSpec>,
}

/// Run every (channel, kernel) correlator of a layer.
///
/// `kernels[c][j]` is kernel `j` of channel `c`; every channel must carry the
/// same number of kernels. Map `j` is the sum over channels (ascending) of the
/// detected intensity with the mask scale restored.
pub fn run_layer(
    channels: &[Array2<f64>],
    kernels: &[Vec<Kernel>],
    specs: &[CorrelatorSpec],
    options: &OpticalOptions,
) -> Result<LayerOutput> {
    options.validate()?;
    if channels.is_empty() {
        return Err(Error::InvalidInput(
            "layer needs at least one channel".into(),
        ));
    }
    if kernels.len() != channels.len() || specs.len() != channels.len() {
        return Err(Error::InvalidInput(format!(
            "{} channels but {} kernel lists and {} correlator specs",
            channels.len(),
            kernels.len(),
            specs.len()
        )));
    }
    let shape = channels[0].dim();
    if channels.iter().any(|c| c.dim() != shape) {
        return Err(Error::InvalidInput("channel images differ in shape".into()));
    }
    let n_kernels = kernels[0].len();
    if n_kernels == 0 {
        return Err(Error::InvalidInput(
            "layer needs at least one kernel".into(),
        ));
    }
    if kernels.iter().any(|k| k.len() != n_kernels) {
        return Err(Error::InvalidInput(
            "kernel lists differ in length across channels".into(),
        ));
    }
    for c in channels {
        check_unit_range(c)?;
    }

    let correlators = channels
        .iter()
        .zip(specs)
        .map(|(_, spec)| {
            let grid = simulation_grid(spec, shape, options.pad_factor, spec.wavelength)?;
            Correlator::with_band_limit(spec, &grid, options.band_limit)
        })
        .collect::<Result<Vec<_>>>()?;

    let n_channels = channels.len();
    let results = par::map_range(n_channels * n_kernels, |idx| {
        let (c, j) = (idx / n_kernels, idx % n_kernels);
        let correlator = &correlators[c];
        let fmask = kernel_to_fourier_mask(&kernels[c][j], correlator.spec(), correlator.grid())?;
        convolve_prepared(&channels[c], correlator, &fmask, options)
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut maps = Vec::with_capacity(n_kernels);
    let mut scale_factors = Vec::with_capacity(n_kernels);
    for j in 0..n_kernels {
        let mut map = Array2::zeros(shape);
        let mut scales = Vec::with_capacity(n_channels);
        for c in 0..n_channels {
            let r = &results[c * n_kernels + j];
            let gain = r.mask_scale * r.mask_scale;
            map.zip_mut_with(&r.map, |m, v| *m += gain * v);
            scales.push(r.mask_scale);
        }
        maps.push(map);
        scale_factors.push(scales);
    }
    Ok(LayerOutput {
        maps,
        channel_policy: ChannelPolicy::DetectThenSum,
        scale_factors,
        grids: correlators.iter().map(|c| *c.grid()).collect(),
    })
}
