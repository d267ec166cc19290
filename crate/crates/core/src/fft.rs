//! Two-dimensional FFT over row-major complex arrays.
//!
//! Convention: unnormalized forward transform, `1/N` on the inverse, so a
//! forward/inverse pair composes to the identity.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::par;

type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<PlanCache>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    let (planner, plans) = &mut *guard;
    let key = (len, direction == FftDirection::Forward);
    plans
        .entry(key)
        .or_insert_with(|| planner.plan_fft(len, direction))
        .clone()
}

fn transform_rows(data: &mut Array2<Complex64>, direction: FftDirection) {
    let (_, cols) = data.dim();
    let fft = plan(cols, direction);
    let slice = data
        .as_slice_mut()
        .expect("fft input must be in standard layout");
    par::for_each_chunk_mut(slice, cols, |row| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(row, &mut scratch);
    });
}

fn transpose(data: &Array2<Complex64>) -> Array2<Complex64> {
    data.t().as_standard_layout().into_owned()
}

fn transform(data: &mut Array2<Complex64>, direction: FftDirection) {
    if !data.is_standard_layout() {
        *data = data.as_standard_layout().into_owned();
    }
    transform_rows(data, direction);
    let mut t = transpose(data);
    transform_rows(&mut t, direction);
    *data = transpose(&t);
}

/// In-place forward 2D DFT, unnormalized.
pub fn fft2(data: &mut Array2<Complex64>) {
    transform(data, FftDirection::Forward);
}

/// In-place inverse 2D DFT with `1/(rows*cols)` normalization.
pub fn ifft2(data: &mut Array2<Complex64>) {
    transform(data, FftDirection::Inverse);
    let scale = 1.0 / data.len() as f64;
    data.mapv_inplace(|v| v * scale);
}
