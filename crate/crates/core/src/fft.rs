//! Two-dimensional FFT helpers on square grids.
//!
//! Everything spectral in this crate (mollification, the heat semigroup,
//! dyadic frequency blocks, the lattice generator) goes through the two
//! entry points here: a forward/backward complex FFT pair and a
//! real-multiplier application.  Spectra are stored row-major in the same
//! wrapped layout as fields, so `spec.freq(i)` gives the continuum
//! frequency of spectral index i directly.

use crate::error::Result;
use crate::grid::{Field, GridSpec};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn plans_for(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                fwd: planner.plan_fft_forward(n),
                inv: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

fn transpose(buf: &mut [Complex64], scratch: &mut Vec<Complex64>, n: usize) {
    scratch.clear();
    scratch.extend_from_slice(buf);
    for iy in 0..n {
        for ix in 0..n {
            buf[ix * n + iy] = scratch[iy * n + ix];
        }
    }
}

fn fft2_in_place(buf: &mut [Complex64], n: usize, forward: bool) {
    let plans = plans_for(n);
    let plan = if forward { &plans.fwd } else { &plans.inv };
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(n) {
        plan.process_with_scratch(row, &mut scratch);
    }
    let mut tmp = Vec::with_capacity(n * n);
    transpose(buf, &mut tmp, n);
    for row in buf.chunks_exact_mut(n) {
        plan.process_with_scratch(row, &mut scratch);
    }
    transpose(buf, &mut tmp, n);
}

/// Unnormalized forward DFT of a real field.
pub fn forward(field: &Field) -> Vec<Complex64> {
    let n = field.spec().n();
    let mut buf: Vec<Complex64> = field.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(&mut buf, n, true);
    buf
}

/// Inverse DFT (normalized by 1/N^2), keeping the real part.
pub fn inverse(spec: GridSpec, mut spectrum: Vec<Complex64>) -> Field {
    let n = spec.n();
    fft2_in_place(&mut spectrum, n, false);
    let scale = 1.0 / (n * n) as f64;
    let data = spectrum.iter().map(|c| c.re * scale).collect();
    Field::from_data(spec, data).expect("inverse FFT length")
}

/// Apply a real Fourier multiplier m(k_x, k_y), with k in continuum
/// frequency units (cycles per unit length).
pub fn apply_multiplier(field: &Field, mult: impl Fn(f64, f64) -> f64) -> Field {
    let spec = *field.spec();
    let n = spec.n();
    let mut spectrum = forward(field);
    for iy in 0..n {
        let ky = spec.freq(iy);
        for ix in 0..n {
            spectrum[iy * n + ix] *= mult(spec.freq(ix), ky);
        }
    }
    inverse(spec, spectrum)
}

/// Apply a precomputed real multiplier table (row-major, wrapped layout).
pub fn apply_multiplier_table(field: &Field, table: &[f64]) -> Result<Field> {
    let spec = *field.spec();
    let mut spectrum = forward(field);
    debug_assert_eq!(spectrum.len(), table.len());
    for (c, &m) in spectrum.iter_mut().zip(table) {
        *c *= m;
    }
    Ok(inverse(spec, spectrum))
}

/// Multiply a spectrum in place by a real multiplier table.
pub fn scale_spectrum(spectrum: &mut [Complex64], table: &[f64]) {
    for (c, &m) in spectrum.iter_mut().zip(table) {
        *c *= m;
    }
}

/// Spectral partial derivative along axis 0 or 1 (multiplier 2*pi*i*k).
/// The Nyquist line is zeroed, as usual for odd-order spectral derivatives.
pub fn gradient_component(field: &Field, axis: usize) -> Field {
    let spec = *field.spec();
    let n = spec.n();
    let mut spectrum = forward(field);
    for iy in 0..n {
        for ix in 0..n {
            let k = if axis == 0 { spec.freq(ix) } else { spec.freq(iy) };
            let nyq = (axis == 0 && ix == n / 2) || (axis == 1 && iy == n / 2);
            let factor = if nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, 2.0 * std::f64::consts::PI * k)
            };
            spectrum[iy * n + ix] *= factor;
        }
    }
    inverse(spec, spectrum)
}

/// Spectral Laplacian (multiplier -4*pi^2*|k|^2).
pub fn laplacian(field: &Field) -> Field {
    let pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    apply_multiplier(field, |kx, ky| -pi2 * (kx * kx + ky * ky))
}
