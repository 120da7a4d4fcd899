//! Self-similar mollifier family.
//!
//! The building block is a smooth radial bump B supported in the ball
//! B(0, 1/2).  The canonical mollifier is
//!
//! ```text
//! Phi = c * (B * B)^2,   normalized so that  integral(Phi) = 1,
//! ```
//!
//! which is symmetric, supported in B(0, 1), and has strictly positive
//! Fourier transform: F(Phi) = (F B)^2 conv (F B)^2 is an
//! autoconvolution of a nonnegative function.  From Phi the family
//!
//! ```text
//! Psi^{delta, n} = Phi^{delta/2} * Phi^{delta/4} * ... * Phi^{delta 2^-n}
//! ```
//!
//! is assembled as a product in frequency space; its limit Psi^delta
//! (approximated by the deepest resolvable n) inherits unit mass,
//! positivity of the transform, support in B(0, delta), and the exact
//! self-similarity
//!
//! ```text
//! Psi^delta = Phi^{delta/2} * Psi^{delta/2}.
//! ```
//!
//! Scaled copies Phi^s are never interpolated from a master grid: the
//! identity Phi^s = c * s^2 * (B^s * B^s)^2 lets every scale be sampled
//! from the analytic bump directly, so the whole family stays consistent
//! down to the resolution floor s >= 2h.  Exactly at that floor the
//! sampled bump occupies a single cell and the kernel degenerates to the
//! identity; scale-resolved norms of fields that are themselves smoothed
//! at alpha >= 4h are unaffected, because mollifying an alpha-smooth field
//! below alpha is already a near no-op.

use crate::error::{LabError, Result};
use crate::fft;
use crate::grid::{Field, GridSpec};
use rustfft::num_complex::Complex64;

/// Profile of the base bump at squared radius argument; supported where
/// 2|x| < 1.
fn bump_profile(r2: f64) -> f64 {
    let q = 4.0 * r2; // (2r)^2
    if q < 1.0 {
        (-1.0 / (1.0 - q)).exp()
    } else {
        0.0
    }
}

/// The analytic base bump B^s(x) = s^{-2} B(x/s), supported in B(0, s/2).
pub fn base_bump_value(scale: f64, x: f64, y: f64) -> f64 {
    let r2 = (x * x + y * y) / (scale * scale);
    bump_profile(r2) / (scale * scale)
}

/// Sample the unit-scale base bump on a grid.  Requires at least 8 cells
/// across the support B(0, 1/2).
pub fn build_base_bump(grid: &GridSpec) -> Result<Field> {
    check_scale_resolved(grid, 1.0)?;
    Ok(Field::from_fn(*grid, |x, y| base_bump_value(1.0, x, y)))
}

fn check_scale_resolved(grid: &GridSpec, scale: f64) -> Result<()> {
    // 8 cells across the bump support of diameter `scale` <=> h <= scale/8.
    if grid.h() > scale / 8.0 + 1e-12 {
        return Err(LabError::Resolution(format!(
            "bump of scale {scale} needs h <= {}, grid has h = {}",
            scale / 8.0,
            grid.h()
        )));
    }
    Ok(())
}

/// One member of the Psi family: the kernel field, its continuum-normalized
/// transform, and the convergence record of the level expansion.
#[derive(Debug, Clone)]
pub struct PsiKernel {
    pub delta: f64,
    /// Number of factors Phi^{delta 2^-m} actually used (capped by the
    /// resolution floor delta * 2^-m >= 2h).
    pub levels: usize,
    pub field: Field,
    /// F Psi^delta on the grid frequencies (continuum normalization, so
    /// the zero mode is the total mass).
    pub spectrum: Vec<f64>,
    /// Sup-norm increments between successive level truncations, starting
    /// at the step from one to two factors.
    pub increments: Vec<f64>,
    /// Whether the final increment fell below the kit tolerance.
    pub converged: bool,
}

/// Certificates for one kernel of the family.
#[derive(Debug, Clone)]
pub struct KernelCertificate {
    pub delta: f64,
    pub mass_error: f64,
    pub spectrum_min: f64,
    pub spectrum_min_freq: [f64; 2],
    /// sup |Psi^delta - Phi^{delta/2} * Psi^{delta/2}|, the self-similarity
    /// defect.
    pub self_similarity: f64,
    pub increments_decreasing: bool,
}

/// The mollifier kit: the canonical kernel Phi, the dyadic scale grid
/// delta_j = 2^-j, and one Psi kernel per scale.
pub struct MollifierKit {
    grid: GridSpec,
    tol: f64,
    requested_levels: usize,
    base: Field,
    phi: Field,
    phi_spectrum: Vec<f64>,
    deltas: Vec<f64>,
    psis: Vec<PsiKernel>,
}

/// Build Phi = c (B*B)^2 at unit scale together with its transform.
pub fn build_phi(grid: &GridSpec) -> Result<(Field, Vec<f64>)> {
    phi_at_scale(grid, 1.0)
}

/// Build Phi^s by sampling the analytic bump at scale s.  The transform is
/// assembled so that nonnegativity is exact in exact arithmetic: the bump
/// spectrum is squared pointwise, and the final kernel is a pointwise
/// square in physical space.
fn phi_at_scale(grid: &GridSpec, s: f64) -> Result<(Field, Vec<f64>)> {
    let h = grid.h();
    if s < 2.0 * h - 1e-12 {
        return Err(LabError::Resolution(format!(
            "kernel scale {s} below the resolution floor 2h = {}",
            2.0 * h
        )));
    }
    let bump = Field::from_fn(*grid, |x, y| base_bump_value(s, x, y));
    let mut a = fft::forward(&bump);
    // B is real and even on the wrapped grid, so its DFT is real; squaring
    // the real part gives the exactly nonnegative transform of B*B.
    let h2 = h * h;
    for c in a.iter_mut() {
        let re = c.re;
        *c = Complex64::new(re * re * h2, 0.0);
    }
    let q = fft::inverse(*grid, a);
    let mut p = q.map(|v| v * v);
    let mass = p.integral();
    if !mass.is_finite() || mass <= 0.0 {
        return Err(LabError::Construction(format!(
            "kernel at scale {s} has nonpositive mass {mass}"
        )));
    }
    p.scale(1.0 / mass);
    let spectrum: Vec<f64> = fft::forward(&p).iter().map(|c| c.re * h2).collect();
    Ok((p, spectrum))
}

/// Largest number of levels resolvable for Psi^delta: the finest factor
/// Phi^{delta 2^-n} must keep delta * 2^-n >= 2h.
pub fn max_levels(grid: &GridSpec, delta: f64) -> usize {
    let cap = (delta / (2.0 * grid.h())).log2().floor();
    if cap < 1.0 {
        0
    } else {
        cap as usize
    }
}

/// Build Psi^{delta, n_levels}, capping the depth at the resolution floor.
pub fn build_psi(grid: &GridSpec, delta: f64, n_levels: usize, tol: f64) -> Result<PsiKernel> {
    let cap = max_levels(grid, delta);
    if cap == 0 {
        return Err(LabError::Resolution(format!(
            "Psi at delta = {delta} needs delta/2 >= 2h = {}; maximal usable levels: 0",
            2.0 * grid.h()
        )));
    }
    let levels = n_levels.min(cap);
    if levels == 0 {
        return Err(LabError::InvalidInput("n_levels must be >= 1".into()));
    }
    let mut spectrum = vec![1.0_f64; grid.len()];
    let mut prev: Option<Field> = None;
    let mut increments = Vec::new();
    let mut field = Field::zeros(*grid);
    for m in 1..=levels {
        let (_, fs) = phi_at_scale(grid, delta * 0.5_f64.powi(m as i32))?;
        for (s, f) in spectrum.iter_mut().zip(&fs) {
            *s *= f;
        }
        field = kernel_from_spectrum(grid, &spectrum);
        if let Some(p) = &prev {
            let diff = field
                .data()
                .iter()
                .zip(p.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            increments.push(diff);
        }
        prev = Some(field.clone());
    }
    let converged = increments.last().map(|&d| d < tol).unwrap_or(false);
    Ok(PsiKernel {
        delta,
        levels,
        field,
        spectrum,
        increments,
        converged,
    })
}

fn kernel_from_spectrum(grid: &GridSpec, spectrum: &[f64]) -> Field {
    let h2 = grid.h() * grid.h();
    let complex: Vec<Complex64> = spectrum.iter().map(|&s| Complex64::new(s / h2, 0.0)).collect();
    fft::inverse(*grid, complex)
}

impl MollifierKit {
    /// Build the kit on a grid: Phi, the dyadic delta grid with
    /// 2^-J >= 4h, and the Psi kernel at every scale.
    pub fn build(grid: &GridSpec, n_levels: usize, tol: f64) -> Result<Self> {
        check_scale_resolved(grid, 1.0)?;
        if grid.side() < 4.0 {
            return Err(LabError::Resolution(format!(
                "kit needs a torus of side >= 4 so unit-scale kernels do not wrap, got {}",
                grid.side()
            )));
        }
        if n_levels == 0 {
            return Err(LabError::InvalidInput("n_levels must be >= 1".into()));
        }
        let base = build_base_bump(grid)?;
        let (phi, phi_spectrum) = build_phi(grid)?;
        let j_max = (1.0 / (4.0 * grid.h())).log2().floor() as i32;
        if j_max < 0 {
            return Err(LabError::Resolution(format!(
                "delta grid is empty: need h <= 1/4, got {}",
                grid.h()
            )));
        }
        let mut deltas = Vec::new();
        let mut psis = Vec::new();
        for j in 0..=j_max {
            let delta = 0.5_f64.powi(j);
            psis.push(build_psi(grid, delta, n_levels, tol)?);
            deltas.push(delta);
        }
        Ok(MollifierKit {
            grid: *grid,
            tol,
            requested_levels: n_levels,
            base,
            phi,
            phi_spectrum,
            deltas,
            psis,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn base_bump(&self) -> &Field {
        &self.base
    }

    pub fn phi(&self) -> &Field {
        &self.phi
    }

    pub fn phi_spectrum(&self) -> &[f64] {
        &self.phi_spectrum
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn finest_delta(&self) -> f64 {
        *self.deltas.last().expect("delta grid nonempty")
    }

    pub fn psi(&self, j: usize) -> &PsiKernel {
        &self.psis[j]
    }

    pub fn delta_index(&self, delta: f64) -> Result<usize> {
        self.deltas
            .iter()
            .position(|&d| (d - delta).abs() < 1e-12)
            .ok_or_else(|| {
                LabError::InvalidInput(format!(
                    "delta = {delta} is not in the kit grid {:?}",
                    self.deltas
                ))
            })
    }

    /// Convolve a field with Psi^delta for a delta from the kit grid.
    pub fn mollify(&self, f: &Field, delta: f64) -> Result<Field> {
        self.grid.check_same(f.spec(), "mollify")?;
        let j = self.delta_index(delta)?;
        fft::apply_multiplier_table(f, &self.psis[j].spectrum)
    }

    /// Mollify a precomputed spectrum (saves the forward transform when
    /// sweeping one field over all scales).
    pub fn mollify_spectrum(&self, spectrum: &[Complex64], j: usize) -> Field {
        let mut s = spectrum.to_vec();
        fft::scale_spectrum(&mut s, &self.psis[j].spectrum);
        fft::inverse(self.grid, s)
    }

    /// Spectral table of Psi^delta: precomputed for the dyadic kit scales,
    /// built on demand (same depth and tolerance) for any other admissible
    /// scale.  Lets scale sweeps run on denser-than-dyadic grids.
    pub fn kernel_spectrum(&self, delta: f64) -> Result<Vec<f64>> {
        if let Ok(j) = self.delta_index(delta) {
            return Ok(self.psis[j].spectrum.clone());
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(LabError::InvalidInput(format!(
                "smoothing scale must lie in (0, 1], got {delta}"
            )));
        }
        Ok(build_psi(&self.grid, delta, self.requested_levels, self.tol)?.spectrum)
    }

    /// Recompute the full certificate set for the family.
    pub fn certify(&self) -> Result<Vec<KernelCertificate>> {
        let mut out = Vec::new();
        for psi in &self.psis {
            let mass_error = (psi.spectrum[0] - 1.0).abs();
            let (spectrum_min, spectrum_min_freq) = spectrum_minimum(&self.grid, &psi.spectrum);
            // Self-similarity: Psi^delta against Phi^{delta/2} * Psi^{delta/2},
            // where Psi^{delta/2} is rebuilt with one level less (the empty
            // product at the resolution floor is the identity kernel).
            let half = psi.delta * 0.5;
            let half_levels = psi.levels - 1;
            let mut rhs_spectrum = phi_at_scale(&self.grid, half)?.1;
            if half_levels > 0 {
                let psi_half = build_psi(&self.grid, half, half_levels, self.tol)?;
                for (r, p) in rhs_spectrum.iter_mut().zip(&psi_half.spectrum) {
                    *r *= p;
                }
            }
            let rhs = kernel_from_spectrum(&self.grid, &rhs_spectrum);
            let self_similarity = rhs
                .data()
                .iter()
                .zip(psi.field.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            let increments_decreasing = psi
                .increments
                .windows(2)
                .all(|w| w[1] <= w[0] * 1.0000001);
            out.push(KernelCertificate {
                delta: psi.delta,
                mass_error,
                spectrum_min,
                spectrum_min_freq,
                self_similarity,
                increments_decreasing,
            });
        }
        Ok(out)
    }

    pub fn requested_levels(&self) -> usize {
        self.requested_levels
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }
}

fn spectrum_minimum(grid: &GridSpec, spectrum: &[f64]) -> (f64, [f64; 2]) {
    let n = grid.n();
    let mut min = f64::INFINITY;
    let mut arg = [0.0, 0.0];
    for iy in 0..n {
        for ix in 0..n {
            let v = spectrum[iy * n + ix];
            if v < min {
                min = v;
                arg = [grid.freq(ix), grid.freq(iy)];
            }
        }
    }
    (min, arg)
}

/// The discrete delta at the origin (unit mass in one cell); mollifying it
/// returns the kernel itself.
pub fn delta_field(grid: &GridSpec) -> Field {
    let mut f = Field::zeros(*grid);
    let h = grid.h();
    f.set(0, 0, 1.0 / (h * h));
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::periodic(8.0, 256).unwrap()
    }

    #[test]
    fn base_bump_is_supported_in_the_half_ball() {
        assert_eq!(base_bump_value(1.0, 0.6, 0.0), 0.0, "bump must vanish at |x| = 0.6");
        assert_eq!(base_bump_value(1.0, 0.4, 0.4), 0.0, "bump must vanish outside B(0, 1/2)");
        assert!(base_bump_value(1.0, 0.0, 0.0) > 0.0);
        assert!(base_bump_value(1.0, 0.3, 0.2) > 0.0);
    }

    #[test]
    fn base_bump_is_symmetric() {
        let g = grid();
        let b = build_base_bump(&g).unwrap();
        let n = g.n();
        for (ix, iy) in [(3, 7), (10, 250), (200, 100)] {
            let v = b.at(ix, iy);
            let w = b.at((n - ix) % n, (n - iy) % n);
            assert_eq!(v, w, "bump asymmetric at ({ix},{iy})");
        }
    }

    #[test]
    fn base_bump_needs_eight_cells() {
        let coarse = GridSpec::periodic(64.0, 256).unwrap(); // h = 1/4
        assert!(
            build_base_bump(&coarse).is_err(),
            "h = 1/4 leaves fewer than 8 cells across B(0,1/2)"
        );
    }

    #[test]
    fn phi_has_unit_mass_and_unit_support() {
        let g = grid();
        let (phi, spectrum) = build_phi(&g).unwrap();
        assert!(
            (phi.integral() - 1.0).abs() < 1e-10,
            "phi mass {}",
            phi.integral()
        );
        assert!((spectrum[0] - 1.0).abs() < 1e-10, "phi zero mode {}", spectrum[0]);
        // Support inside B(0,1) in the Euclidean (hence also sup) norm.
        let peak = phi.sup_norm();
        let mut outside = 0.0_f64;
        let n = g.n();
        for iy in 0..n {
            for ix in 0..n {
                let (x, y) = (g.coord(ix), g.coord(iy));
                if x * x + y * y > (1.0 + 2.0 * g.h()).powi(2) {
                    outside = outside.max(phi.at(ix, iy).abs());
                }
            }
        }
        assert!(
            outside < 1e-12 * peak,
            "phi leaks outside B(0,1): {outside} vs peak {peak}"
        );
    }

    #[test]
    fn single_level_psi_is_phi_at_half_scale() {
        let g = grid();
        let psi = build_psi(&g, 1.0, 1, 1e-8).unwrap();
        let (phi_half, _) = phi_at_scale(&g, 0.5).unwrap();
        let diff = psi
            .field
            .data()
            .iter()
            .zip(phi_half.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(diff < 1e-9 * phi_half.sup_norm(), "psi(1 level) vs phi^{{1/2}}: {diff}");
    }

    #[test]
    fn psi_mass_is_one_at_every_scale() {
        let g = grid();
        let kit = MollifierKit::build(&g, 8, 1e-8).unwrap();
        for psi in kit.deltas().iter().map(|&d| kit.psi(kit.delta_index(d).unwrap())) {
            assert!(
                (psi.spectrum[0] - 1.0).abs() < 1e-10,
                "Psi^{} zero mode {}",
                psi.delta,
                psi.spectrum[0]
            );
        }
    }

    #[test]
    fn psi_levels_cap_at_the_resolution_floor() {
        let g = grid(); // h = 1/32: max levels at delta 1 is log2(16) = 4
        assert_eq!(max_levels(&g, 1.0), 4);
        let psi = build_psi(&g, 1.0, 8, 1e-8).unwrap();
        assert_eq!(psi.levels, 4, "levels must cap at the resolution floor");
        assert!(build_psi(&g, 3.0 * g.h(), 1, 1e-8).is_err(), "sub-floor scale accepted");
    }

    #[test]
    fn psi_increments_decrease_geometrically() {
        let g = grid();
        let psi = build_psi(&g, 1.0, 8, 1e-8).unwrap();
        assert!(psi.increments.len() >= 2, "need at least two increments");
        for w in psi.increments.windows(2) {
            assert!(
                w[1] < w[0] * 0.75,
                "increments not decreasing: {:?}",
                psi.increments
            );
        }
    }

    #[test]
    fn self_similarity_is_exact_on_the_grid() {
        let g = grid();
        let kit = MollifierKit::build(&g, 8, 1e-8).unwrap();
        for cert in kit.certify().unwrap() {
            assert!(
                cert.self_similarity < 1e-6,
                "self-similarity defect at delta {}: {}",
                cert.delta,
                cert.self_similarity
            );
            assert!(cert.mass_error < 1e-8, "mass error {}", cert.mass_error);
            assert!(cert.increments_decreasing, "increments not decreasing at {}", cert.delta);
        }
    }

    #[test]
    fn mollifying_a_point_mass_returns_the_kernel() {
        let g = grid();
        let kit = MollifierKit::build(&g, 8, 1e-8).unwrap();
        let spike = delta_field(&g);
        let smeared = kit.mollify(&spike, 0.5).unwrap();
        let j = kit.delta_index(0.5).unwrap();
        let kernel = &kit.psi(j).field;
        let diff = smeared
            .data()
            .iter()
            .zip(kernel.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(diff < 1e-9 * kernel.sup_norm(), "mollified spike vs kernel: {diff}");
    }

    #[test]
    fn mollify_rejects_scales_outside_the_grid() {
        let g = grid();
        let kit = MollifierKit::build(&g, 8, 1e-8).unwrap();
        let f = Field::constant(g, 1.0);
        assert!(kit.mollify(&f, 0.3).is_err(), "off-grid delta accepted");
    }

    #[test]
    fn mollifying_a_constant_is_the_identity() {
        let g = grid();
        let kit = MollifierKit::build(&g, 8, 1e-8).unwrap();
        let f = Field::constant(g, 2.5);
        let m = kit.mollify(&f, 0.25).unwrap();
        let err = m.data().iter().map(|v| (v - 2.5).abs()).fold(0.0_f64, f64::max);
        assert!(err < 1e-9, "constant not preserved: {err}");
    }

    // Diagnostic for the positivity floor of the family transforms; the
    // assertion threshold is set by the probe below.
    #[test]
    fn psi_spectra_are_strictly_positive() {
        let g = grid();
        let kit = MollifierKit::build(&g, 8, 1e-8).unwrap();
        for cert in kit.certify().unwrap() {
            println!(
                "delta {:>6}: spectrum min {:+.6e} at freq ({:.3}, {:.3})",
                cert.delta, cert.spectrum_min, cert.spectrum_min_freq[0], cert.spectrum_min_freq[1]
            );
            assert!(
                cert.spectrum_min > 0.0,
                "F Psi^{} has nonpositive value {} at ({}, {})",
                cert.delta,
                cert.spectrum_min,
                cert.spectrum_min_freq[0],
                cert.spectrum_min_freq[1]
            );
        }
    }
}
