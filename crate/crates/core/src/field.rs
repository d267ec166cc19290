//! Sampled scalar fields and their reductions.

use ndarray::{s, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sample pitch of the simulations, 2.5 µm.
pub const DEFAULT_PITCH: f64 = 2.5e-6;
/// Red channel source wavelength.
pub const WAVELENGTH_RED: f64 = 632e-9;
/// Green channel source wavelength.
pub const WAVELENGTH_GREEN: f64 = 532e-9;
/// Blue channel source wavelength.
pub const WAVELENGTH_BLUE: f64 = 442e-9;
/// Source wavelengths in R, G, B order.
pub const RGB_WAVELENGTHS: [f64; 3] = [WAVELENGTH_RED, WAVELENGTH_GREEN, WAVELENGTH_BLUE];

/// Uniform sampling lattice shared by a field and the elements acting on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Meters per sample, identical on both axes.
    pub pitch: f64,
    /// Vacuum wavelength in meters.
    pub wavelength: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        let grid = GridSpec {
            nx,
            ny,
            pitch,
            wavelength,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn square(n: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        Self::new(n, n, pitch, wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidGeometry(format!(
                "grid must have at least 2x2 samples, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "pitch must be positive, got {}",
                self.pitch
            )));
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.pitch
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.pitch
    }

    /// Array shape in `(rows, cols)` order.
    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    /// Physical x coordinate of column `col`; the origin sits at column `nx / 2`.
    pub fn x(&self, col: usize) -> f64 {
        (col as f64 - (self.nx / 2) as f64) * self.pitch
    }

    /// Physical y coordinate of row `row`; the origin sits at row `ny / 2`.
    pub fn y(&self, row: usize) -> f64 {
        (row as f64 - (self.ny / 2) as f64) * self.pitch
    }

    pub fn with_wavelength(&self, wavelength: f64) -> Self {
        GridSpec {
            wavelength,
            ..*self
        }
    }

    /// True when both grids sample the same lattice (wavelength ignored).
    pub fn same_lattice(&self, other: &GridSpec) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.pitch == other.pitch
    }
}

/// How pixel values map onto field amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// Amplitude equals the pixel value.
    #[default]
    Amplitude,
    /// Intensity equals the pixel value, amplitude is its square root.
    Intensity,
}

/// A complex scalar field sampled on a [`GridSpec`], rows indexed by y.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    amplitudes: Array2<Complex64>,
}

impl ComplexField {
    pub fn new(grid: GridSpec, amplitudes: Array2<Complex64>) -> Result<Self> {
        grid.validate()?;
        if amplitudes.dim() != grid.shape() {
            return Err(Error::Shape(format!(
                "amplitudes are {:?} but grid is {:?}",
                amplitudes.dim(),
                grid.shape()
            )));
        }
        if let Some(((r, c), _)) = amplitudes
            .indexed_iter()
            .find(|(_, v)| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::Numeric(format!(
                "non-finite amplitude at ({r}, {c})"
            )));
        }
        Ok(ComplexField { grid, amplitudes })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        ComplexField {
            grid,
            amplitudes: Array2::zeros(grid.shape()),
        }
    }

    /// Uniform plane wave of unit amplitude.
    pub fn plane_wave(grid: GridSpec) -> Self {
        ComplexField {
            grid,
            amplitudes: Array2::from_elem(grid.shape(), Complex64::new(1.0, 0.0)),
        }
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, amplitudes: Array2<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.dim(), grid.shape());
        ComplexField { grid, amplitudes }
    }

    /// Like [`ComplexField::new`] but only checks finiteness; used on the
    /// outputs of internal transforms.
    pub(crate) fn checked(grid: GridSpec, amplitudes: Array2<Complex64>) -> Result<Self> {
        if amplitudes
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::Numeric(
                "non-finite value in propagated field".into(),
            ));
        }
        Ok(Self::from_parts_unchecked(grid, amplitudes))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn amplitudes(&self) -> &Array2<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Array2<Complex64> {
        self.amplitudes
    }

    /// Multiply every sample by a complex constant.
    pub fn scaled(&self, factor: Complex64) -> Self {
        ComplexField {
            grid: self.grid,
            amplitudes: self.amplitudes.mapv(|v| v * factor),
        }
    }
}

/// Build a field from a real image with values in `[0, 1]`, zero phase.
pub fn field_from_image(
    pixels: &Array2<f64>,
    pitch: f64,
    wavelength: f64,
    encoding: Encoding,
) -> Result<ComplexField> {
    let (rows, cols) = pixels.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput("image is empty".into()));
    }
    check_unit_range(pixels)?;
    let grid = GridSpec::new(cols, rows, pitch, wavelength)?;
    let amplitudes = pixels.mapv(|p| {
        let a = match encoding {
            Encoding::Amplitude => p,
            Encoding::Intensity => p.sqrt(),
        };
        Complex64::new(a, 0.0)
    });
    Ok(ComplexField { grid, amplitudes })
}

pub(crate) fn check_unit_range(pixels: &Array2<f64>) -> Result<()> {
    if let Some(((r, c), v)) = pixels
        .indexed_iter()
        .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
    {
        return Err(Error::InvalidInput(format!(
            "pixel ({r}, {c}) = {v} is outside [0, 1]"
        )));
    }
    Ok(())
}

/// Square-law response: `scale * |E|^2` per sample.
pub fn intensity(field: &ComplexField, scale: f64) -> Result<Array2<f64>> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidInput(format!(
            "intensity scale must be positive, got {scale}"
        )));
    }
    let mut out = Array2::zeros(field.amplitudes.dim());
    for (o, v) in out.iter_mut().zip(field.amplitudes.iter()) {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Numeric("non-finite field sample".into()));
        }
        *o = scale * v.norm_sqr();
    }
    Ok(out)
}

/// Sum of `|E|^2 * pitch^2` over the grid.
pub fn total_power(field: &ComplexField) -> f64 {
    let pitch2 = field.grid.pitch * field.grid.pitch;
    field.amplitudes.iter().map(|v| v.norm_sqr()).sum::<f64>() * pitch2
}

/// Offset of the top-left corner when a `(rows, cols)` patch is centered in
/// an `(outer_rows, outer_cols)` array so that the patch center
/// `(rows/2, cols/2)` lands on the outer center `(outer_rows/2, outer_cols/2)`.
pub fn centered_offset(outer: (usize, usize), inner: (usize, usize)) -> Result<(usize, usize)> {
    if inner.0 > outer.0 || inner.1 > outer.1 {
        return Err(Error::InvalidGeometry(format!(
            "{inner:?} patch does not fit in {outer:?}"
        )));
    }
    Ok((outer.0 / 2 - inner.0 / 2, outer.1 / 2 - inner.1 / 2))
}

/// Embed `inner` centered in a zero array of shape `outer`.
pub fn embed_centered<T: Clone + Default>(
    inner: &Array2<T>,
    outer: (usize, usize),
) -> Result<Array2<T>> {
    let (r0, c0) = centered_offset(outer, inner.dim())?;
    let mut out = Array2::from_elem(outer, T::default());
    let (h, w) = inner.dim();
    out.slice_mut(s![r0..r0 + h, c0..c0 + w]).assign(inner);
    Ok(out)
}

/// Crop the centered `inner`-shaped window out of `outer`.
pub fn crop_centered<T: Clone>(outer: &Array2<T>, inner: (usize, usize)) -> Result<Array2<T>> {
    let (r0, c0) = centered_offset(outer.dim(), inner)?;
    Ok(outer
        .slice(s![r0..r0 + inner.0, c0..c0 + inner.1])
        .to_owned())
}
