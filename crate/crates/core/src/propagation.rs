//! Angular-spectrum free-space propagation.
//!
//! A field is decomposed into plane waves with an FFT, each plane wave picks
//! up the phase `2π z sqrt(1/λ² - fx² - fy²)`, and the result is recomposed.
//! Evanescent components are dropped. No paraxial approximation is made.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::field::{crop_centered, embed_centered, ComplexField, GridSpec};

/// Whether to clip the transfer function to the alias-free local-frequency band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandLimit {
    /// Enabled when `|z| > n * pitch² / λ` on either axis.
    #[default]
    Auto,
    On,
    Off,
}

impl std::str::FromStr for BandLimit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(BandLimit::Auto),
            "on" => Ok(BandLimit::On),
            "off" => Ok(BandLimit::Off),
            other => Err(Error::Config(format!(
                "band limit must be auto|on|off, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    pub band_limit: BandLimit,
    /// Zero-padding growth factor; must be a power of two. 1 means no padding.
    pub pad_factor: usize,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            band_limit: BandLimit::Auto,
            pad_factor: 1,
        }
    }
}

impl PropagationOptions {
    pub fn validate(&self) -> Result<()> {
        if self.pad_factor == 0 || !self.pad_factor.is_power_of_two() {
            return Err(Error::Config(format!(
                "pad factor must be a power of two, got {}",
                self.pad_factor
            )));
        }
        Ok(())
    }
}

fn axis_frequencies(n: usize, pitch: f64) -> Vec<f64> {
    let span = n as f64 * pitch;
    (0..n)
        .map(|k| {
            if k < n / 2 {
                k as f64 / span
            } else {
                (k as f64 - n as f64) / span
            }
        })
        .collect()
}

/// DFT frequency lattice in cycles per meter, in FFT output order
/// (non-negative branch first, then the negative branch).
pub fn spatial_frequencies(grid: &GridSpec) -> (Vec<f64>, Vec<f64>) {
    (
        axis_frequencies(grid.nx, grid.pitch),
        axis_frequencies(grid.ny, grid.pitch),
    )
}

fn band_limit_active(grid: &GridSpec, z: f64, mode: BandLimit) -> bool {
    match mode {
        BandLimit::On => true,
        BandLimit::Off => false,
        BandLimit::Auto => {
            let n = grid.nx.min(grid.ny) as f64;
            z.abs() > n * grid.pitch * grid.pitch / grid.wavelength
        }
    }
}

/// Local-frequency bound for one axis of extent `extent`.
fn frequency_limit(wavelength: f64, z: f64, extent: f64) -> f64 {
    let r = 2.0 * z / extent;
    1.0 / (wavelength * (r * r + 1.0).sqrt())
}

/// Angular-spectrum transfer function sampled on a grid's frequency lattice.
#[derive(Debug, Clone)]
pub struct TransferFunction {
    grid: GridSpec,
    z: f64,
    band_limited: bool,
    values: Array2<Complex64>,
}

impl TransferFunction {
    pub fn new(grid: &GridSpec, z: f64, band_limit: BandLimit) -> Result<Self> {
        grid.validate()?;
        if !z.is_finite() {
            return Err(Error::InvalidInput(format!(
                "propagation distance must be finite, got {z}"
            )));
        }
        let (fx, fy) = spatial_frequencies(grid);
        let lambda = grid.wavelength;
        let limited = band_limit_active(grid, z, band_limit);
        let (limit_x, limit_y) = if limited {
            (
                frequency_limit(lambda, z, grid.width()),
                frequency_limit(lambda, z, grid.height()),
            )
        } else {
            (f64::INFINITY, f64::INFINITY)
        };
        let base_phase = 2.0 * PI * z / lambda;
        let values = Array2::from_shape_fn(grid.shape(), |(r, c)| {
            let (u, v) = (fx[c], fy[r]);
            if u.abs() > limit_x || v.abs() > limit_y {
                return Complex64::new(0.0, 0.0);
            }
            // Written relative to 1/λ so that the DC phase is exactly 2πz/λ.
            let s = 1.0 - lambda * lambda * (u * u + v * v);
            if s < 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(1.0, base_phase * s.sqrt())
            }
        });
        Ok(TransferFunction {
            grid: *grid,
            z,
            band_limited: limited,
            values,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn distance(&self) -> f64 {
        self.z
    }

    pub fn is_band_limited(&self) -> bool {
        self.band_limited
    }

    /// Values in FFT order, matching [`spatial_frequencies`].
    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    /// Propagate `field` through this transfer function.
    pub fn apply(&self, field: &ComplexField) -> Result<ComplexField> {
        if !field.grid().same_lattice(&self.grid) || field.grid().wavelength != self.grid.wavelength
        {
            return Err(Error::Shape(format!(
                "field grid {:?} does not match transfer function grid {:?}",
                field.grid(),
                self.grid
            )));
        }
        let mut spectrum = field.amplitudes().clone();
        fft::fft2(&mut spectrum);
        spectrum.zip_mut_with(&self.values, |s, h| *s *= h);
        fft::ifft2(&mut spectrum);
        ComplexField::checked(*field.grid(), spectrum)
    }
}

/// Transfer function for distance `z` with the automatic band-limit rule.
pub fn transfer_function(grid: &GridSpec, z: f64) -> Result<TransferFunction> {
    TransferFunction::new(grid, z, BandLimit::Auto)
}

/// Propagate a field over distance `z` (negative `z` back-propagates).
pub fn propagate(field: &ComplexField, z: f64) -> Result<ComplexField> {
    propagate_with(field, z, &PropagationOptions::default())
}

pub fn propagate_with(
    field: &ComplexField,
    z: f64,
    options: &PropagationOptions,
) -> Result<ComplexField> {
    options.validate()?;
    if options.pad_factor == 1 {
        return TransferFunction::new(field.grid(), z, options.band_limit)?.apply(field);
    }
    let grid = field.grid();
    let padded_grid = GridSpec::new(
        grid.nx * options.pad_factor,
        grid.ny * options.pad_factor,
        grid.pitch,
        grid.wavelength,
    )?;
    let padded = ComplexField::from_parts_unchecked(
        padded_grid,
        embed_centered(field.amplitudes(), padded_grid.shape())?,
    );
    let out = TransferFunction::new(&padded_grid, z, options.band_limit)?.apply(&padded)?;
    let cropped = crop_centered(out.amplitudes(), grid.shape())?;
    Ok(ComplexField::from_parts_unchecked(*grid, cropped))
}
