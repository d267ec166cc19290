//! Thin optical elements modeled as complex transmittance masks.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, GridSpec};

const PASSIVITY_SLACK: f64 = 1e-12;

/// Phase profile used for a focusing element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LensModel {
    /// Quadratic phase `-π r² / (λ f)`.
    Paraxial,
    /// Exact spherical-wave phase `-(2π/λ)(sqrt(r² + f²) - f)`.
    #[default]
    Hyperbolic,
}

impl std::str::FromStr for LensModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paraxial" => Ok(LensModel::Paraxial),
            "hyperbolic" => Ok(LensModel::Hyperbolic),
            other => Err(Error::Config(format!(
                "lens model must be paraxial|hyperbolic, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApertureShape {
    Circle,
    Square,
}

/// Passive complex transmittance sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMask {
    grid: GridSpec,
    transmittance: Array2<Complex64>,
}

impl ElementMask {
    pub fn new(grid: GridSpec, transmittance: Array2<Complex64>) -> Result<Self> {
        grid.validate()?;
        if transmittance.dim() != grid.shape() {
            return Err(Error::Shape(format!(
                "transmittance is {:?} but grid is {:?}",
                transmittance.dim(),
                grid.shape()
            )));
        }
        for ((r, c), t) in transmittance.indexed_iter() {
            if !(t.re.is_finite() && t.im.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite transmittance at ({r}, {c})"
                )));
            }
            if t.norm() > 1.0 + PASSIVITY_SLACK {
                return Err(Error::InvalidInput(format!(
                    "transmittance magnitude {} at ({r}, {c}) exceeds 1",
                    t.norm()
                )));
            }
        }
        Ok(ElementMask {
            grid,
            transmittance,
        })
    }

    pub fn uniform(grid: GridSpec, value: Complex64) -> Result<Self> {
        Self::new(grid, Array2::from_elem(grid.shape(), value))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn transmittance(&self) -> &Array2<Complex64> {
        &self.transmittance
    }

    /// View the mask as a field, for serialization.
    pub fn to_field(&self) -> ComplexField {
        ComplexField::from_parts_unchecked(self.grid, self.transmittance.clone())
    }

    /// Product of two masks on the same lattice.
    pub fn combine(&self, other: &ElementMask) -> Result<ElementMask> {
        if !self.grid.same_lattice(&other.grid) {
            return Err(Error::Shape(
                "cannot combine masks on different lattices".into(),
            ));
        }
        let mut t = self.transmittance.clone();
        t.zip_mut_with(&other.transmittance, |a, b| *a *= b);
        Ok(ElementMask {
            grid: self.grid,
            transmittance: t,
        })
    }
}

fn inside(shape: ApertureShape, x: f64, y: f64, size: f64) -> bool {
    let half = 0.5 * size * (1.0 + PASSIVITY_SLACK);
    match shape {
        ApertureShape::Circle => x * x + y * y <= half * half,
        ApertureShape::Square => x.abs() <= half && y.abs() <= half,
    }
}

fn check_fits(grid: &GridSpec, size: f64, what: &str) -> Result<()> {
    let extent = grid.width().min(grid.height());
    if !(size.is_finite() && size >= 0.0) || size > extent * (1.0 + PASSIVITY_SLACK) {
        return Err(Error::InvalidGeometry(format!(
            "{what} {size} m does not fit in a {extent} m grid"
        )));
    }
    Ok(())
}

/// Binary aperture centered on the grid origin.
///
/// A sample is open when its center lies inside or on the boundary of the
/// shape, so a zero-size circle leaves exactly the origin sample open.
pub fn aperture_mask(grid: &GridSpec, shape: ApertureShape, size: f64) -> Result<ElementMask> {
    grid.validate()?;
    check_fits(grid, size, "aperture")?;
    let transmittance = Array2::from_shape_fn(grid.shape(), |(r, c)| {
        if inside(shape, grid.x(c), grid.y(r), size) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(ElementMask {
        grid: *grid,
        transmittance,
    })
}

/// Phase of a lens at radius² `r2`.
pub fn lens_phase(model: LensModel, r2: f64, focal_length: f64, wavelength: f64) -> f64 {
    match model {
        LensModel::Paraxial => -PI * r2 / (wavelength * focal_length),
        LensModel::Hyperbolic => {
            let f = focal_length;
            // sqrt(r² + f²) - f, rearranged to avoid cancellation near the axis
            let sag = r2 / ((r2 + f * f).sqrt() + f.abs()) * f.signum();
            -2.0 * PI / wavelength * sag
        }
    }
}

/// Focusing lens with a circular aperture, designed for `grid.wavelength`.
pub fn lens_mask(
    grid: &GridSpec,
    focal_length: f64,
    model: LensModel,
    aperture_diameter: f64,
) -> Result<ElementMask> {
    grid.validate()?;
    if !(focal_length.is_finite() && focal_length != 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "focal length must be finite and non-zero, got {focal_length}"
        )));
    }
    check_fits(grid, aperture_diameter, "lens aperture")?;
    let transmittance = Array2::from_shape_fn(grid.shape(), |(r, c)| {
        let (x, y) = (grid.x(c), grid.y(r));
        if inside(ApertureShape::Circle, x, y, aperture_diameter) {
            Complex64::from_polar(
                1.0,
                lens_phase(model, x * x + y * y, focal_length, grid.wavelength),
            )
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(ElementMask {
        grid: *grid,
        transmittance,
    })
}

/// Multiply a field by a mask sample by sample.
pub fn apply_element(field: &ComplexField, mask: &ElementMask) -> Result<ComplexField> {
    if !field.grid().same_lattice(mask.grid()) {
        return Err(Error::Shape(format!(
            "field lattice {}x{} @ {} m does not match mask lattice {}x{} @ {} m",
            field.grid().nx,
            field.grid().ny,
            field.grid().pitch,
            mask.grid().nx,
            mask.grid().ny,
            mask.grid().pitch
        )));
    }
    let mut out = field.amplitudes().clone();
    out.zip_mut_with(mask.transmittance(), |a, t| *a *= t);
    Ok(ComplexField::from_parts_unchecked(*field.grid(), out))
}

/// Two phase maps whose unit phasors average to a complex target.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckerboardEncoding {
    pub phi1: Array2<f64>,
    pub phi2: Array2<f64>,
    pub target: Array2<Complex64>,
}

fn wrap_phase(p: f64) -> f64 {
    if p > PI {
        p - 2.0 * PI
    } else if p < -PI {
        p + 2.0 * PI
    } else {
        p
    }
}

/// Split each target value `a e^{iθ}` into phases `θ ± arccos(a)`.
///
/// `arg(0)` is taken as 0.
pub fn checkerboard_phases(target: &Array2<Complex64>) -> Result<CheckerboardEncoding> {
    let dim = target.dim();
    let mut phi1 = Array2::zeros(dim);
    let mut phi2 = Array2::zeros(dim);
    for ((r, c), t) in target.indexed_iter() {
        let magnitude = t.norm();
        if !magnitude.is_finite() || magnitude > 1.0 + PASSIVITY_SLACK {
            return Err(Error::Gamut {
                row: r,
                col: c,
                magnitude,
            });
        }
        let theta = if magnitude == 0.0 { 0.0 } else { t.arg() };
        let spread = magnitude.min(1.0).acos();
        phi1[[r, c]] = wrap_phase(theta + spread);
        phi2[[r, c]] = wrap_phase(theta - spread);
    }
    Ok(CheckerboardEncoding {
        phi1,
        phi2,
        target: target.clone(),
    })
}

impl CheckerboardEncoding {
    /// Mean of the two unit phasors, per logical pixel.
    pub fn realized(&self) -> Array2<Complex64> {
        let mut out = Array2::zeros(self.phi1.dim());
        for ((o, a), b) in out.iter_mut().zip(self.phi1.iter()).zip(self.phi2.iter()) {
            *o = (Complex64::cis(*a) + Complex64::cis(*b)) * 0.5;
        }
        out
    }
}

/// Expand each logical pixel into a `factor x factor` checkerboard of the two
/// phases. The returned mask samples at `pixel_pitch / factor`.
pub fn checkerboard_expand(
    encoding: &CheckerboardEncoding,
    subpixel_factor: usize,
    pixel_pitch: f64,
    wavelength: f64,
) -> Result<ElementMask> {
    if subpixel_factor < 2 || !subpixel_factor.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "subpixel factor must be an even integer >= 2, got {subpixel_factor}"
        )));
    }
    let (rows, cols) = encoding.phi1.dim();
    let overflow = || Error::InvalidGeometry("expanded checkerboard dimensions overflow".into());
    let out_rows = rows.checked_mul(subpixel_factor).ok_or_else(overflow)?;
    let out_cols = cols.checked_mul(subpixel_factor).ok_or_else(overflow)?;
    out_rows.checked_mul(out_cols).ok_or_else(overflow)?;
    let grid = GridSpec::new(
        out_cols,
        out_rows,
        pixel_pitch / subpixel_factor as f64,
        wavelength,
    )?;
    let transmittance = Array2::from_shape_fn((out_rows, out_cols), |(r, c)| {
        let (pr, pc) = (r / subpixel_factor, c / subpixel_factor);
        let phase = if (r + c) % 2 == 0 {
            encoding.phi1[[pr, pc]]
        } else {
            encoding.phi2[[pr, pc]]
        };
        Complex64::cis(phase)
    });
    Ok(ElementMask {
        grid,
        transmittance,
    })
}
