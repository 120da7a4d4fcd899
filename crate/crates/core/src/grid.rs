//! Square grids, scalar fields, and sup-norm regions.
//!
//! All fields live on an N x N grid covering the square [-L/2, L/2)^2 in
//! the FFT-natural "wrapped" layout: index i along an axis corresponds to
//! the coordinate i*h for i < N/2 and (i - N)*h for i >= N/2, with
//! h = L/N.  The origin sits exactly at index (0, 0), so even kernels
//! sampled on the grid have real discrete Fourier transforms.
//!
//! Distances are measured in the sup norm: |x| = max(|x_1|, |x_2|).  A
//! "ball" B(c, R) is therefore an axis-aligned square, and the centred
//! boxes P_n = [-n, n]^2 used by the localization experiments are just
//! balls around the origin.

use crate::error::{LabError, Result};
use serde::Serialize;

/// Boundary behaviour of the square domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Boundary {
    /// Identify opposite edges (torus).  The default for all experiments.
    Periodic,
    /// Zero trace on the edge of the square, realized by odd reflection
    /// onto the doubled torus where a spectral operator is needed.
    Dirichlet,
}

/// Geometry of a square grid: physical side length, points per side,
/// boundary behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    side: f64,
    n: usize,
    boundary: Boundary,
}

impl GridSpec {
    pub fn new(side: f64, n: usize, boundary: Boundary) -> Result<Self> {
        if !side.is_finite() || side <= 0.0 {
            return Err(LabError::InvalidInput(format!(
                "grid side length must be positive, got {side}"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(LabError::InvalidInput(format!(
                "points per side must be a power of two >= 8, got {n}"
            )));
        }
        Ok(GridSpec { side, n, boundary })
    }

    pub fn periodic(side: f64, n: usize) -> Result<Self> {
        Self::new(side, n, Boundary::Periodic)
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Points per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Lattice spacing h = L/N.
    pub fn h(&self) -> f64 {
        self.side / self.n as f64
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical coordinate of index i along one axis (wrapped layout).
    pub fn coord(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        let h = self.h();
        if i < self.n / 2 {
            i as f64 * h
        } else {
            (i as f64 - self.n as f64) * h
        }
    }

    /// Continuum frequency (cycles per unit length) of spectral index i.
    pub fn freq(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        let m = if i < self.n / 2 {
            i as isize
        } else {
            i as isize - self.n as isize
        };
        m as f64 / self.side
    }

    /// Largest resolved frequency magnitude along one axis.
    pub fn nyquist(&self) -> f64 {
        self.n as f64 / (2.0 * self.side)
    }

    /// Index of the grid point nearest to physical coordinate x along one
    /// axis, wrapping periodically.
    pub fn index_of(&self, x: f64) -> usize {
        let h = self.h();
        let m = (x / h).round() as isize;
        m.rem_euclid(self.n as isize) as usize
    }

    /// Wrap a signed index onto the grid.
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n as isize) as usize
    }

    /// Sup-norm distance between two points on the torus.
    pub fn torus_dist(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let l = self.side;
        let per_axis = |d: f64| -> f64 {
            let d = d.rem_euclid(l); // into [0, L)
            d.min(l - d)
        };
        per_axis(a[0] - b[0]).max(per_axis(a[1] - b[1]))
    }

    fn same_geometry(&self, other: &GridSpec) -> bool {
        self.n == other.n && (self.side - other.side).abs() < 1e-12 * self.side
    }

    pub fn check_same(&self, other: &GridSpec, ctx: &str) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(LabError::GridMismatch(format!(
                "{ctx}: {}x{} side {} vs {}x{} side {}",
                self.n, self.n, self.side, other.n, other.n, other.side
            )))
        }
    }
}

/// A real scalar field sampled on a [`GridSpec`], row-major with the x
/// index fastest: value at (ix, iy) is `data[iy * n + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    spec: GridSpec,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(spec: GridSpec) -> Self {
        Field {
            data: vec![0.0; spec.len()],
            spec,
        }
    }

    pub fn from_data(spec: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != spec.len() {
            return Err(LabError::GridMismatch(format!(
                "field data has {} entries, grid wants {}",
                data.len(),
                spec.len()
            )));
        }
        Ok(Field { spec, data })
    }

    /// Sample a function of physical coordinates on the grid.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = spec.n();
        let mut data = Vec::with_capacity(spec.len());
        for iy in 0..n {
            let y = spec.coord(iy);
            for ix in 0..n {
                data.push(f(spec.coord(ix), y));
            }
        }
        Field { spec, data }
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Field {
            data: vec![value; spec.len()],
            spec,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.data[iy * self.spec.n + ix]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        self.data[iy * self.spec.n + ix] = v;
    }

    /// Value at the grid point nearest a physical location.
    pub fn at_point(&self, x: f64, y: f64) -> f64 {
        self.at(self.spec.index_of(x), self.spec.index_of(y))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            spec: self.spec,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.spec.check_same(&other.spec, "zip_map")?;
        Ok(Field {
            spec: self.spec,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Discrete integral: sum * h^2.
    pub fn integral(&self) -> f64 {
        let h2 = self.spec.h() * self.spec.h();
        self.data.iter().sum::<f64>() * h2
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Sup of |f| over a region, with the location of the maximizer.
    pub fn sup_on(&self, region: &Region) -> (f64, [f64; 2]) {
        let n = self.spec.n();
        let mut best = 0.0_f64;
        let mut arg = [0.0, 0.0];
        for iy in 0..n {
            let y = self.spec.coord(iy);
            for ix in 0..n {
                let x = self.spec.coord(ix);
                if region.contains(&self.spec, x, y) {
                    let v = self.at(ix, iy).abs();
                    if v > best {
                        best = v;
                        arg = [x, y];
                    }
                }
            }
        }
        (best, arg)
    }

    /// Signed extrema over a region: (min, max).
    pub fn extrema_on(&self, region: &Region) -> (f64, f64) {
        let n = self.spec.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for iy in 0..n {
            let y = self.spec.coord(iy);
            for ix in 0..n {
                let x = self.spec.coord(ix);
                if region.contains(&self.spec, x, y) {
                    let v = self.at(ix, iy);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }

    /// Restrict to every other point in each direction, averaging 2x2
    /// blocks.  Block averages of lattice white noise are again lattice
    /// white noise at the coarser spacing, so this realizes "the same
    /// realization viewed at half the resolution".
    pub fn coarsen(&self) -> Result<Field> {
        let n = self.spec.n();
        if n < 16 {
            return Err(LabError::Resolution(format!(
                "cannot coarsen a {n}x{n} grid below 8 points per side"
            )));
        }
        let coarse = GridSpec::new(self.spec.side, n / 2, self.spec.boundary)?;
        let mut data = Vec::with_capacity(coarse.len());
        for iy in 0..n / 2 {
            for ix in 0..n / 2 {
                // Block of the two fine points covering each coarse cell.
                let x0 = 2 * ix;
                let y0 = 2 * iy;
                let x1 = (x0 + 1) % n;
                let y1 = (y0 + 1) % n;
                data.push(0.25 * (self.at(x0, y0) + self.at(x1, y0) + self.at(x0, y1) + self.at(x1, y1)));
            }
        }
        Ok(Field { spec: coarse, data })
    }
}

/// A sup-norm ball B(c, R) = {x : |x - c| <= R}, i.e. an axis-aligned
/// square of half-width R.  `Region::pbox(n)` is the centred box P_n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Region {
    pub center: [f64; 2],
    pub half_width: f64,
}

impl Region {
    pub fn ball(center: [f64; 2], half_width: f64) -> Self {
        Region { center, half_width }
    }

    /// The centred box P_n = [-n, n]^2.
    pub fn pbox(n: f64) -> Self {
        Region {
            center: [0.0, 0.0],
            half_width: n,
        }
    }

    pub fn contains(&self, spec: &GridSpec, x: f64, y: f64) -> bool {
        // Half-spacing slack so that points on the edge count once even
        // after floating-point coordinate arithmetic.
        let tol = 1e-9 * spec.side();
        spec.torus_dist([x, y], self.center) <= self.half_width + tol
    }

    /// Grow the region by `margin` on every side.
    pub fn fattened(&self, margin: f64) -> Region {
        Region {
            center: self.center,
            half_width: self.half_width + margin,
        }
    }

    pub fn describe(&self) -> String {
        if self.center == [0.0, 0.0] {
            format!("P{}", trim_float(self.half_width))
        } else {
            format!(
                "B(({},{}),{})",
                trim_float(self.center[0]),
                trim_float(self.center[1]),
                trim_float(self.half_width)
            )
        }
    }

    /// Indices of all grid points inside the region.
    pub fn indices(&self, spec: &GridSpec) -> Vec<(usize, usize)> {
        let n = spec.n();
        let mut out = Vec::new();
        for iy in 0..n {
            let y = spec.coord(iy);
            for ix in 0..n {
                if self.contains(spec, spec.coord(ix), y) {
                    out.push((ix, iy));
                }
            }
        }
        out
    }
}

fn trim_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(GridSpec::periodic(8.0, 100).is_err(), "non power of two accepted");
        assert!(GridSpec::periodic(8.0, 4).is_err(), "tiny grid accepted");
        assert!(GridSpec::periodic(-1.0, 64).is_err(), "negative side accepted");
        assert!(GridSpec::periodic(8.0, 64).is_ok());
    }

    #[test]
    fn wrapped_coordinates_cover_the_square() {
        let g = GridSpec::periodic(16.0, 64).unwrap();
        assert_eq!(g.coord(0), 0.0);
        assert_eq!(g.coord(1), 0.25);
        assert_eq!(g.coord(32), -8.0);
        assert_eq!(g.coord(63), -0.25);
        let lo = (0..64).map(|i| g.coord(i)).fold(f64::INFINITY, f64::min);
        let hi = (0..64).map(|i| g.coord(i)).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(lo, -8.0);
        assert_eq!(hi, 8.0 - g.h());
    }

    #[test]
    fn frequencies_match_wrapped_indices() {
        let g = GridSpec::periodic(16.0, 64).unwrap();
        assert_eq!(g.freq(0), 0.0);
        assert_eq!(g.freq(1), 1.0 / 16.0);
        assert_eq!(g.freq(63), -1.0 / 16.0);
        assert_eq!(g.nyquist(), 2.0);
    }

    #[test]
    fn torus_distance_wraps_around_the_seam() {
        let g = GridSpec::periodic(16.0, 64).unwrap();
        let d = g.torus_dist([7.75, 0.0], [-7.75, 0.0]);
        assert!((d - 0.5).abs() < 1e-12, "seam distance {d}, want 0.5");
    }

    #[test]
    fn integral_of_indicator_counts_cells() {
        let g = GridSpec::periodic(8.0, 64).unwrap();
        let f = Field::from_fn(g, |x, y| if x.abs().max(y.abs()) <= 1.0 { 1.0 } else { 0.0 });
        // P_1 = [-1,1]^2 holds exactly 17x17 points at h = 1/8.
        let area = f.integral();
        let want = (17.0_f64 / 8.0).powi(2);
        assert!((area - want).abs() < 1e-12, "indicator area {area}, want {want}");
    }

    #[test]
    fn region_membership_and_description() {
        let g = GridSpec::periodic(16.0, 128).unwrap();
        let p2 = Region::pbox(2.0);
        assert!(p2.contains(&g, 2.0, -2.0));
        assert!(!p2.contains(&g, 2.25, 0.0));
        assert_eq!(p2.describe(), "P2");
        assert_eq!(Region::ball([1.0, 0.0], 0.5).describe(), "B((1,0),0.5)");
    }

    #[test]
    fn coarsening_halves_the_grid_and_averages() {
        let g = GridSpec::periodic(8.0, 32).unwrap();
        let f = Field::constant(g, 3.0);
        let c = f.coarsen().unwrap();
        assert_eq!(c.spec().n(), 16);
        assert_eq!(c.spec().h(), 0.5);
        assert!(c.data().iter().all(|&v| (v - 3.0).abs() < 1e-15));
    }
}
