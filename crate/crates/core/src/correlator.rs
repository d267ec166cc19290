//! A single 4f correlator: kernel-to-mask compilation, split-step execution,
//! square-law detection, and the direct digital convolution used as its
//! reference.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elements::{apply_element, lens_mask, ApertureShape, ElementMask, LensModel};
use crate::error::{Error, Result};
use crate::field::{
    crop_centered, embed_centered, field_from_image, intensity, ComplexField, Encoding, GridSpec,
    DEFAULT_PITCH, WAVELENGTH_GREEN,
};
use crate::par;
use crate::propagation::{BandLimit, TransferFunction};

/// Geometry of one 4f correlator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatorSpec {
    pub focal_length: f64,
    pub lens_diameter: f64,
    pub pitch: f64,
    /// Design wavelength of the lenses and the Fourier mask.
    pub wavelength: f64,
    #[serde(default)]
    pub lens_model: LensModel,
}

impl Default for CorrelatorSpec {
    fn default() -> Self {
        CorrelatorSpec {
            focal_length: 3e-3,
            lens_diameter: 0.57e-3,
            pitch: DEFAULT_PITCH,
            wavelength: WAVELENGTH_GREEN,
            lens_model: LensModel::Hyperbolic,
        }
    }
}

impl CorrelatorSpec {
    pub fn with_wavelength(self, wavelength: f64) -> Self {
        CorrelatorSpec { wavelength, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.focal_length) {
            return Err(Error::InvalidGeometry(format!(
                "focal length must be positive, got {}",
                self.focal_length
            )));
        }
        if !positive(self.lens_diameter) {
            return Err(Error::InvalidGeometry(format!(
                "lens diameter must be positive, got {}",
                self.lens_diameter
            )));
        }
        if !positive(self.pitch) {
            return Err(Error::InvalidGeometry(format!(
                "pitch must be positive, got {}",
                self.pitch
            )));
        }
        if !positive(self.wavelength) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        Ok(())
    }

    /// Lens diameter in whole samples.
    pub fn aperture_samples(&self) -> usize {
        (self.lens_diameter / self.pitch).round() as usize
    }
}

/// Real-valued convolution kernel, rows indexed by y.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    weights: Array2<f64>,
}

impl Kernel {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput(
                "kernel must have at least one weight".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("kernel weights must be finite".into()));
        }
        Ok(Kernel { weights })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput(
                "kernel rows have unequal lengths".into(),
            ));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let weights = Array2::from_shape_vec((rows.len(), cols), flat)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(weights)
    }

    /// The 1x1 identity kernel.
    pub fn delta() -> Self {
        Kernel {
            weights: Array2::ones((1, 1)),
        }
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn dim(&self) -> (usize, usize) {
        self.weights.dim()
    }

    /// Index of the tap treated as the kernel origin: `((rows-1)/2, (cols-1)/2)`.
    pub fn center(&self) -> (usize, usize) {
        let (r, c) = self.weights.dim();
        ((r - 1) / 2, (c - 1) / 2)
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }
}

/// Discrete-space Fourier transform of the kernel at `(fx, fy)` cycles/m,
/// with taps spaced `pitch` apart and indices measured from [`Kernel::center`].
pub fn kernel_spectrum(kernel: &Kernel, pitch: f64, fx: f64, fy: f64) -> Complex64 {
    let (cr, cc) = kernel.center();
    let mut acc = Complex64::new(0.0, 0.0);
    for ((r, c), &w) in kernel.weights.indexed_iter() {
        let (dr, dc) = (r as f64 - cr as f64, c as f64 - cc as f64);
        acc += w * Complex64::cis(-2.0 * PI * pitch * (dc * fx + dr * fy));
    }
    acc
}

/// Fourier-plane filter compiled from a kernel.
#[derive(Debug, Clone)]
pub struct FourierMask {
    pub mask: ElementMask,
    /// Peak spectrum magnitude over the aperture; `mask * scale` is the raw spectrum.
    pub scale: f64,
    pub kernel: Kernel,
    focal_length: f64,
}

impl FourierMask {
    /// Normalized transmittance the mask would have at spatial frequency
    /// `(fx, fy)`, independent of the sampling grid.
    pub fn spectrum_at(&self, fx: f64, fy: f64) -> Complex64 {
        kernel_spectrum(&self.kernel, self.mask.grid().pitch, fx, fy) / self.scale
    }

    pub fn focal_length(&self) -> f64 {
        self.focal_length
    }
}

fn check_pitch(spec: &CorrelatorSpec, grid: &GridSpec) -> Result<()> {
    if (grid.pitch - spec.pitch).abs() > 1e-12 * spec.pitch {
        return Err(Error::Shape(format!(
            "grid pitch {} m does not match correlator pitch {} m",
            grid.pitch, spec.pitch
        )));
    }
    Ok(())
}

/// Sample the kernel spectrum across the filter plane. A sample at physical
/// position `(x, y)` sees spatial frequency `(x, y) / (λ f)`; outside the lens
/// aperture the mask is opaque. The result is scaled to unit peak magnitude.
pub fn kernel_to_fourier_mask(
    kernel: &Kernel,
    spec: &CorrelatorSpec,
    grid: &GridSpec,
) -> Result<FourierMask> {
    spec.validate()?;
    grid.validate()?;
    check_pitch(spec, grid)?;
    if kernel.is_zero() {
        return Err(Error::DegenerateKernel);
    }
    let mask_grid = grid.with_wavelength(spec.wavelength);
    let aperture =
        crate::elements::aperture_mask(&mask_grid, ApertureShape::Circle, spec.lens_diameter)?;
    let lf = spec.wavelength * spec.focal_length;
    let (kr, kc) = kernel.dim();
    let (cr, cc) = kernel.center();

    // Separable evaluation: first sum each kernel row against the x phasors.
    let row_sums: Vec<Vec<Complex64>> = (0..kr)
        .map(|r| {
            (0..grid.nx)
                .map(|col| {
                    let fx = grid.x(col) / lf;
                    (0..kc)
                        .map(|c| {
                            let dc = c as f64 - cc as f64;
                            kernel.weights[[r, c]]
                                * Complex64::cis(-2.0 * PI * spec.pitch * dc * fx)
                        })
                        .sum()
                })
                .collect()
        })
        .collect();

    let rows: Vec<Vec<Complex64>> = par::map_range(grid.ny, |row| {
        let fy = grid.y(row) / lf;
        let phasors: Vec<Complex64> = (0..kr)
            .map(|r| Complex64::cis(-2.0 * PI * spec.pitch * (r as f64 - cr as f64) * fy))
            .collect();
        (0..grid.nx)
            .map(|col| {
                if aperture.transmittance()[[row, col]].re == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                phasors.iter().zip(&row_sums).map(|(p, s)| p * s[col]).sum()
            })
            .collect()
    });
    let mut raw = Array2::from_shape_vec(grid.shape(), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Numeric(e.to_string()))?;

    let scale = raw.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::DegenerateKernel);
    }
    raw.mapv_inplace(|v| v / scale);
    Ok(FourierMask {
        mask: ElementMask::new(mask_grid, raw)?,
        scale,
        kernel: kernel.clone(),
        focal_length: spec.focal_length,
    })
}

/// A correlator prepared for one simulation grid: the f-distance transfer
/// function and the lens mask are built once and reused across kernels.
#[derive(Debug, Clone)]
pub struct Correlator {
    spec: CorrelatorSpec,
    grid: GridSpec,
    hop: TransferFunction,
    lens: ElementMask,
    absorber: Option<ElementMask>,
}

impl Correlator {
    /// `grid.wavelength` is the illumination wavelength used for propagation;
    /// lenses are designed at `spec.wavelength`.
    pub fn new(spec: &CorrelatorSpec, grid: &GridSpec) -> Result<Self> {
        Self::with_band_limit(spec, grid, BandLimit::Auto)
    }

    pub fn with_band_limit(
        spec: &CorrelatorSpec,
        grid: &GridSpec,
        band_limit: BandLimit,
    ) -> Result<Self> {
        spec.validate()?;
        grid.validate()?;
        check_pitch(spec, grid)?;
        let hop = TransferFunction::new(grid, spec.focal_length, band_limit)?;
        let lens = lens_mask(
            &grid.with_wavelength(spec.wavelength),
            spec.focal_length,
            spec.lens_model,
            spec.lens_diameter,
        )?;
        Ok(Correlator {
            spec: *spec,
            grid: *grid,
            hop,
            lens,
            absorber: None,
        })
    }

    /// Multiply the field by `absorber` after every free-space hop.
    pub fn with_absorber(mut self, absorber: ElementMask) -> Result<Self> {
        if !absorber.grid().same_lattice(&self.grid) {
            return Err(Error::Shape(
                "absorber lattice does not match correlator grid".into(),
            ));
        }
        self.absorber = Some(absorber);
        Ok(self)
    }

    pub fn spec(&self) -> &CorrelatorSpec {
        &self.spec
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn hop(&self, field: &ComplexField) -> Result<ComplexField> {
        let out = self.hop.apply(field)?;
        match &self.absorber {
            Some(a) => apply_element(&out, a),
            None => Ok(out),
        }
    }

    /// Input plane → f → lens → f → filter → f → lens → f → output plane.
    pub fn run(&self, input: &ComplexField, fmask: &FourierMask) -> Result<ComplexField> {
        if !input.grid().same_lattice(&self.grid) || input.grid().wavelength != self.grid.wavelength
        {
            return Err(Error::Shape(format!(
                "input grid {:?} does not match correlator grid {:?}",
                input.grid(),
                self.grid
            )));
        }
        if !fmask.mask.grid().same_lattice(&self.grid) {
            return Err(Error::Shape(
                "Fourier mask was built for a different grid".into(),
            ));
        }
        let mut field = self.hop(input)?;
        field = apply_element(&field, &self.lens)?;
        field = self.hop(&field)?;
        field = apply_element(&field, &fmask.mask)?;
        field = self.hop(&field)?;
        field = apply_element(&field, &self.lens)?;
        self.hop(&field)
    }
}

/// One-shot 4f execution; see [`Correlator::run`].
pub fn run_4f(
    input: &ComplexField,
    fmask: &FourierMask,
    spec: &CorrelatorSpec,
) -> Result<ComplexField> {
    Correlator::new(spec, input.grid())?.run(input, fmask)
}

/// Point reflection through the grid origin `(rows/2, cols/2)`, undoing the
/// image inversion of the 4f relay.
pub fn rotate_half_turn(map: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = map.dim();
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        map[[(rows - r) % rows, (cols - c) % cols]]
    })
}

/// Square-law detection: intensity, un-rotation, then box-sum binning of
/// `sensor_pitch / pitch` samples per side.
pub fn detect(field: &ComplexField, scale: f64, sensor_pitch: f64) -> Result<Array2<f64>> {
    let pitch = field.grid().pitch;
    let ratio = sensor_pitch / pitch;
    let bin = ratio.round();
    if !ratio.is_finite() || bin < 1.0 || (ratio - bin).abs() > 1e-9 * ratio {
        return Err(Error::InvalidGeometry(format!(
            "sensor pitch {sensor_pitch} m is not an integer multiple of field pitch {pitch} m"
        )));
    }
    let bin = bin as usize;
    let (rows, cols) = field.grid().shape();
    if rows % bin != 0 || cols % bin != 0 {
        return Err(Error::InvalidGeometry(format!(
            "{rows}x{cols} field does not divide into {bin}x{bin} sensor pixels"
        )));
    }
    let upright = rotate_half_turn(&intensity(field, scale)?);
    if bin == 1 {
        return Ok(upright);
    }
    let mut out = Array2::zeros((rows / bin, cols / bin));
    for ((r, c), v) in upright.indexed_iter() {
        out[[r / bin, c / bin]] += v;
    }
    Ok(out)
}

/// Direct same-size convolution with zero padding, stride 1.
///
/// `out[i, j] = Σ w[r, c] · img[i - (r - cr), j - (c - cc)]` where `(cr, cc)`
/// is [`Kernel::center`]. Evaluated by explicit summation.
pub fn ideal_convolve(image: &Array2<f64>, kernel: &Kernel) -> Array2<f64> {
    ideal_convolve_counted(image, kernel).0
}

/// [`ideal_convolve`] that also reports the number of multiply-accumulates
/// evaluated, counting taps that land in the zero padding.
pub fn ideal_convolve_counted(image: &Array2<f64>, kernel: &Kernel) -> (Array2<f64>, u64) {
    let (h, w) = image.dim();
    let (kr, kc) = kernel.dim();
    let (cr, cc) = kernel.center();
    let mut out = Array2::zeros((h, w));
    let mut macs = 0u64;
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for r in 0..kr {
                for c in 0..kc {
                    macs += 1;
                    let y = i as isize - r as isize + cr as isize;
                    let x = j as isize - c as isize + cc as isize;
                    if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                        acc += kernel.weights[[r, c]] * image[[y as usize, x as usize]];
                    }
                }
            }
            out[[i, j]] = acc;
        }
    }
    (out, macs)
}

/// Knobs for pushing an image through a correlator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalOptions {
    /// Simulation grid growth beyond the minimum size; power of two.
    pub pad_factor: usize,
    pub band_limit: BandLimit,
    pub detector_scale: f64,
    pub encoding: Encoding,
}

impl Default for OpticalOptions {
    fn default() -> Self {
        OpticalOptions {
            pad_factor: 1,
            band_limit: BandLimit::Auto,
            detector_scale: 1.0,
            encoding: Encoding::Amplitude,
        }
    }
}

impl OpticalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.pad_factor == 0 || !self.pad_factor.is_power_of_two() {
            return Err(Error::Config(format!(
                "pad factor must be a power of two, got {}",
                self.pad_factor
            )));
        }
        if !(self.detector_scale.is_finite() && self.detector_scale > 0.0) {
            return Err(Error::Config(format!(
                "detector scale must be positive, got {}",
                self.detector_scale
            )));
        }
        Ok(())
    }
}

/// Square simulation grid for an image of `image_shape` samples: the next
/// power of two at least twice the larger of the image and the lens aperture,
/// times `pad_factor`.
pub fn simulation_grid(
    spec: &CorrelatorSpec,
    image_shape: (usize, usize),
    pad_factor: usize,
    wavelength: f64,
) -> Result<GridSpec> {
    let base = image_shape
        .0
        .max(image_shape.1)
        .max(spec.aperture_samples())
        .max(1);
    let n = (2 * base).next_power_of_two() * pad_factor.max(1);
    GridSpec::square(n, spec.pitch, wavelength)
}

/// Detected output of one image/kernel pass, cropped to the image footprint.
#[derive(Debug, Clone)]
pub struct OpticalConvolution {
    /// Upright detected intensity, same shape as the input image.
    pub map: Array2<f64>,
    /// Passivity scale of the Fourier mask.
    pub mask_scale: f64,
    pub grid: GridSpec,
}

/// Embed `image` at the center of the simulation grid, run it through a
/// correlator with the mask for `kernel`, detect at the field pitch and crop.
///
/// `illumination` overrides the source wavelength; by default it equals the
/// design wavelength in `spec`.
pub fn convolve_image(
    image: &Array2<f64>,
    kernel: &Kernel,
    spec: &CorrelatorSpec,
    illumination: Option<f64>,
    options: &OpticalOptions,
) -> Result<OpticalConvolution> {
    options.validate()?;
    let wavelength = illumination.unwrap_or(spec.wavelength);
    let grid = simulation_grid(spec, image.dim(), options.pad_factor, wavelength)?;
    let correlator = Correlator::with_band_limit(spec, &grid, options.band_limit)?;
    let fmask = kernel_to_fourier_mask(kernel, spec, &grid)?;
    convolve_prepared(image, &correlator, &fmask, options)
}

/// [`convolve_image`] with the correlator and mask already built.
pub fn convolve_prepared(
    image: &Array2<f64>,
    correlator: &Correlator,
    fmask: &FourierMask,
    options: &OpticalOptions,
) -> Result<OpticalConvolution> {
    let grid = *correlator.grid();
    let object = field_from_image(image, grid.pitch, grid.wavelength, options.encoding)?;
    let input = ComplexField::from_parts_unchecked(
        grid,
        embed_centered(object.amplitudes(), grid.shape())?,
    );
    let output = correlator.run(&input, fmask)?;
    let detected = detect(&output, options.detector_scale, grid.pitch)?;
    Ok(OpticalConvolution {
        map: crop_centered(&detected, image.dim())?,
        mask_scale: fmask.scale,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> CorrelatorSpec {
        CorrelatorSpec::default()
    }

    #[test]
    fn delta_kernel_gives_flat_mask() {
        let spec = small_spec();
        let grid = GridSpec::square(256, spec.pitch, spec.wavelength).unwrap();
        let m = kernel_to_fourier_mask(&Kernel::delta(), &spec, &grid).unwrap();
        assert!((m.scale - 1.0).abs() < 1e-12);
        let ap = crate::elements::aperture_mask(&grid, ApertureShape::Circle, spec.lens_diameter)
            .unwrap();
        for (t, a) in m.mask.transmittance().iter().zip(ap.transmittance()) {
            if a.re > 0.0 {
                assert!((t - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            } else {
                assert_eq!(*t, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn zero_sum_kernel_kills_dc() {
        let spec = small_spec();
        let grid = GridSpec::square(256, spec.pitch, spec.wavelength).unwrap();
        let k = Kernel::from_rows(&[&[1.0, -1.0]]).unwrap();
        let m = kernel_to_fourier_mask(&k, &spec, &grid).unwrap();
        assert!(m.mask.transmittance()[[128, 128]].norm() < 1e-15);
        assert!(m.spectrum_at(0.0, 0.0).norm() < 1e-15);
    }

    #[test]
    fn box_kernel_dc_is_peak() {
        let spec = small_spec();
        let grid = GridSpec::square(256, spec.pitch, spec.wavelength).unwrap();
        let k = Kernel::new(Array2::ones((3, 3))).unwrap();
        let m = kernel_to_fourier_mask(&k, &spec, &grid).unwrap();
        assert!((m.scale - 9.0).abs() < 1e-12);
        assert!((m.mask.transmittance()[[128, 128]] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_kernel_is_degenerate() {
        let spec = small_spec();
        let grid = GridSpec::square(256, spec.pitch, spec.wavelength).unwrap();
        let k = Kernel::new(Array2::zeros((3, 3))).unwrap();
        assert!(matches!(
            kernel_to_fourier_mask(&k, &spec, &grid),
            Err(Error::DegenerateKernel)
        ));
    }

    #[test]
    fn mask_matches_direct_summation() {
        let spec = small_spec();
        let grid = GridSpec::square(256, spec.pitch, spec.wavelength).unwrap();
        let k = Kernel::from_rows(&[&[0.3, -1.0, 0.2], &[0.5, 2.0, -0.7]]).unwrap();
        let m = kernel_to_fourier_mask(&k, &spec, &grid).unwrap();
        let lf = spec.wavelength * spec.focal_length;
        for &(r, c) in &[(128usize, 128usize), (100, 150), (80, 128), (170, 90)] {
            let direct = kernel_spectrum(&k, spec.pitch, grid.x(c) / lf, grid.y(r) / lf) / m.scale;
            assert!((m.mask.transmittance()[[r, c]] - direct).norm() < 1e-9);
        }
        let peak = m
            .mask
            .transmittance()
            .iter()
            .fold(0.0f64, |a, v| a.max(v.norm()));
        assert!((peak - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pitch_mismatch_is_shape_error() {
        let spec = small_spec();
        let grid = GridSpec::square(256, 1e-6, spec.wavelength).unwrap();
        assert!(matches!(
            kernel_to_fourier_mask(&Kernel::delta(), &spec, &grid),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn ideal_convolve_identity_and_sifting() {
        let img = Array2::from_shape_fn((5, 6), |(r, c)| (r * 6 + c) as f64);
        assert_eq!(ideal_convolve(&img, &Kernel::delta()), img);

        let mut delta = Array2::zeros((7, 7));
        delta[[3, 3]] = 1.0;
        let k = Kernel::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]).unwrap();
        let out = ideal_convolve(&delta, &k);
        for r in 0..3 {
            for c in 0..3 {
                // convolution places the kernel, not its flip, around the impulse
                assert_eq!(out[[2 + r, 2 + c]], k.weights()[[r, c]]);
            }
        }
        assert_eq!(out.sum(), 45.0);
    }

    #[test]
    fn ideal_convolve_hand_expanded_even_kernel() {
        // Kernel center is (0, 0); the single tap at (0, 1) shifts the image
        // one column to the right: out[i][j] = img[i][j-1].
        let img = Array2::from_shape_vec((3, 3), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0])
            .unwrap();
        let k = Kernel::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let expected =
            Array2::from_shape_vec((3, 3), vec![0.0, 1.0, 2.0, 0.0, 4.0, 5.0, 0.0, 7.0, 8.0])
                .unwrap();
        assert_eq!(ideal_convolve(&img, &k), expected);
    }

    #[test]
    fn counted_convolution_counts_every_tap() {
        let img = Array2::ones((16, 16));
        let k = Kernel::new(Array2::ones((3, 3))).unwrap();
        let (_, macs) = ideal_convolve_counted(&img, &k);
        assert_eq!(macs, 16 * 16 * 9);
    }

    #[test]
    fn detect_examples() {
        let g = GridSpec::square(4, 1e-6, 5e-7).unwrap();
        let a = Array2::from_shape_fn((4, 4), |(r, c)| Complex64::new((r * 4 + c) as f64, 1.0));
        let f = ComplexField::new(g, a).unwrap();
        let d = detect(&f, 1.0, 1e-6).unwrap();
        assert_eq!(d, rotate_half_turn(&intensity(&f, 1.0).unwrap()));

        let u = ComplexField::new(g, Array2::from_elem((4, 4), Complex64::new(0.0, 2.0))).unwrap();
        let binned = detect(&u, 1.0, 2e-6).unwrap();
        assert_eq!(binned.dim(), (2, 2));
        assert!(binned.iter().all(|&v| (v - 16.0).abs() < 1e-12));

        assert!(matches!(
            detect(&u, 1.0, 1.5e-6),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(matches!(
            detect(&u, 1.0, 0.5e-6),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn detect_rotation_moves_quadrants() {
        let g = GridSpec::square(8, 1e-6, 5e-7).unwrap();
        let mut a = Array2::zeros((8, 8));
        // bright in the bottom-right quadrant of the (inverted) output plane
        for r in 5..8 {
            for c in 5..8 {
                a[[r, c]] = Complex64::new(1.0, 0.0);
            }
        }
        let d = detect(&ComplexField::new(g, a).unwrap(), 1.0, 1e-6).unwrap();
        let tl: f64 = d.slice(ndarray::s![0..4, 0..4]).sum();
        let br: f64 = d.slice(ndarray::s![4..8, 4..8]).sum();
        assert_eq!(tl, 9.0);
        assert_eq!(br, 0.0);
    }

    #[test]
    fn detection_scales_with_magnitude_squared() {
        let g = GridSpec::square(8, 1e-6, 5e-7).unwrap();
        let a = Array2::from_shape_fn((8, 8), |(r, c)| {
            Complex64::new(r as f64 - 2.0, c as f64 * 0.5)
        });
        let f = ComplexField::new(g, a).unwrap();
        let c = Complex64::new(1.5, -2.0);
        let d1 = detect(&f, 1.0, 2e-6).unwrap();
        let d2 = detect(&f.scaled(c), 1.0, 2e-6).unwrap();
        for (a, b) in d1.iter().zip(d2.iter()) {
            assert!((b - c.norm_sqr() * a).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn simulation_grid_sizes() {
        let spec = small_spec();
        assert_eq!(spec.aperture_samples(), 228);
        let g = simulation_grid(&spec, (64, 64), 1, spec.wavelength).unwrap();
        assert_eq!(g.nx, 512);
        let g = simulation_grid(&spec, (64, 64), 2, spec.wavelength).unwrap();
        assert_eq!(g.nx, 1024);
    }
}
