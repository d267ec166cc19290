//! Simulation of a hybrid optical-electronic CNN frontend.
//!
//! The first convolutional layer of a network is carried out by an array of
//! 4f correlators built from metasurface lenses: each correlator Fourier
//! transforms its input with a lens, multiplies by a complex filter mask that
//! encodes one kernel, transforms back, and a square-law detector reads out
//! the intensity. Light is propagated with the angular spectrum method.
//! Remaining layers run electronically.

pub mod analysis;
pub mod array;
pub mod backend;
pub mod correlator;
pub mod elements;
pub mod error;
pub mod fft;
pub mod field;
pub mod io;
pub mod metrics;
pub mod par;
pub mod patterns;
pub mod propagation;

pub use error::{Error, Result};
