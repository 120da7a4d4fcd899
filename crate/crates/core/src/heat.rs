//! The heat semigroup e^{t Laplace} on the square, spectral and exact.
//!
//! On the torus the flow is a Fourier multiplier, exp(-4 pi^2 |k|^2 t).  On
//! the Dirichlet square (zero trace on the edge of the fundamental box) the
//! flow is realized by odd reflection: the field is extended antisymmetric
//! about both boundary lines onto the torus of doubled side, the periodic
//! multiplier is applied there (the odd subspace is invariant under any
//! radial multiplier), and the result is restricted back.  Boundary grid
//! lines are forced to zero before extension, which is the projection onto
//! the odd subspace.

use crate::fft;
use crate::grid::{Boundary, Field, GridSpec};
use crate::{LabError, Result};

/// Multiplier table exp(-4 pi^2 |k|^2 t) on a periodic grid.
fn heat_table(spec: &GridSpec, t: f64) -> Vec<f64> {
    let n = spec.n();
    let mut table = Vec::with_capacity(spec.len());
    let factor = -4.0 * std::f64::consts::PI * std::f64::consts::PI * t;
    for iy in 0..n {
        let ky = spec.freq(iy);
        for ix in 0..n {
            let kx = spec.freq(ix);
            table.push((factor * (kx * kx + ky * ky)).exp());
        }
    }
    table
}

/// A prepared heat step at fixed time, reusable across many applications.
pub struct HeatKernel {
    spec: GridSpec,
    t: f64,
    table: Vec<f64>,
    /// Doubled-torus geometry for Dirichlet flows.
    doubled: Option<GridSpec>,
}

impl HeatKernel {
    pub fn new(spec: &GridSpec, t: f64) -> Result<Self> {
        if t.is_nan() || t < 0.0 {
            return Err(LabError::InvalidInput(format!(
                "heat flow needs t >= 0, got {t}"
            )));
        }
        match spec.boundary() {
            Boundary::Periodic => Ok(HeatKernel {
                spec: *spec,
                t,
                table: heat_table(spec, t),
                doubled: None,
            }),
            Boundary::Dirichlet => {
                let doubled = GridSpec::periodic(2.0 * spec.side(), 2 * spec.n())?;
                Ok(HeatKernel {
                    spec: *spec,
                    t,
                    table: heat_table(&doubled, t),
                    doubled: Some(doubled),
                })
            }
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        self.spec.check_same(f.spec(), "heat flow")?;
        match &self.doubled {
            None => fft::apply_multiplier_table(f, &self.table),
            Some(big) => {
                let flowed = fft::apply_multiplier_table(&odd_extension(big, f), &self.table)?;
                Ok(restrict(&self.spec, &flowed))
            }
        }
    }
}

/// One-shot heat flow; boundary behaviour follows the field's grid.
pub fn heat_semigroup(f: &Field, t: f64) -> Result<Field> {
    HeatKernel::new(f.spec(), t)?.apply(f)
}

/// Map a wrapped index on the small grid to/from unwrapped position order
/// (position -side/2 at unwrapped 0).
fn unwrapped_to_index(n: usize, j: usize) -> usize {
    (j + n / 2) % n
}

/// Extend f antisymmetrically about both boundary lines of its fundamental
/// box onto the doubled torus.  Unwrapped big-axis index j in 0..2N covers
/// positions -L/2 + j h; j in (N, 2N) holds minus the value at the
/// reflection 2N - j.  The fixed lines j = 0 and j = N are zeroed.
fn odd_extension(big: &GridSpec, f: &Field) -> Field {
    let n = f.spec().n();
    let big_n = big.n();
    // Per-axis reflection: unwrapped big index -> (source unwrapped small
    // index, sign), with sign 0 on the fixed lines.
    let reflect = |j: usize| -> (usize, f64) {
        if j == 0 || j == n {
            (0, 0.0)
        } else if j < n {
            (j, 1.0)
        } else {
            (2 * n - j, -1.0)
        }
    };
    let mut out = Field::zeros(*big);
    for jy in 0..big_n {
        let (sy, sgny) = reflect(jy);
        if sgny == 0.0 {
            continue;
        }
        let iy = unwrapped_to_index(n, sy);
        let oy = unwrapped_to_index(big_n, jy);
        for jx in 0..big_n {
            let (sx, sgnx) = reflect(jx);
            if sgnx == 0.0 {
                continue;
            }
            let v = sgnx * sgny * f.at(unwrapped_to_index(n, sx), iy);
            out.set(unwrapped_to_index(big_n, jx), oy, v);
        }
    }
    out
}

/// Restrict a doubled-torus field back to the fundamental box.
fn restrict(small: &GridSpec, big_field: &Field) -> Field {
    let n = small.n();
    let big_n = big_field.spec().n();
    let mut out = Field::zeros(*small);
    for jy in 0..n {
        let oy = unwrapped_to_index(n, jy);
        let by = unwrapped_to_index(big_n, jy);
        for jx in 0..n {
            out.set(
                unwrapped_to_index(n, jx),
                oy,
                big_field.at(unwrapped_to_index(big_n, jx), by),
            );
        }
    }
    out
}
