//! Dyadic Littlewood-Paley blocks and paraproducts.
//!
//! A radial partition of unity on frequency space,
//!
//! ```text
//! 1 = rho_{-1}(k) + sum_{j >= 0} rho_0(2^-j k),
//! ```
//!
//! is built from a C^2 step S that falls from 1 to 0 on the Euclidean
//! radius interval (0.7, 1.3): rho_{-1}(k) = S(|k|) and rho_j is the
//! difference S(|k|/2^{j+1}) - S(|k|/2^j).  The telescoping structure makes
//! the partial sums S_m = sum_{j <= m} rho_j available in closed form, the
//! partition exact on every resolved frequency, and blocks with |i - j| >= 2
//! have disjoint supports (1.3 < 2 * 0.7).
//!
//! Block j of a field is Delta_j f = F^{-1}(rho_j F f).  The paraproduct
//! split of a pointwise product,
//!
//! ```text
//! f g = (f << g) + (g << f) + (f o g),
//! f << g = sum_{i < j-1} Delta_i f Delta_j g,
//! f o g  = sum_{|i-j| <= 1} Delta_i f Delta_j g,
//! ```
//!
//! is exact on the grid because the block expansion itself is.

use crate::error::Result;
use crate::fft;
use crate::grid::{Field, GridSpec};
use rustfft::num_complex::Complex64;

const BLOCK_LO: f64 = 0.7;
const BLOCK_HI: f64 = 1.3;

/// The radial profile S(r): 1 inside radius 0.7, 0 outside 1.3.
fn radial_step(r: f64) -> f64 {
    1.0 - crate::quintic_step((r - BLOCK_LO) / (BLOCK_HI - BLOCK_LO))
}

/// Dyadic decomposition bound to a grid: multiplier tables for every block
/// from j = -1 up to the corner of the resolved frequency square.
pub struct LpDecomposition {
    grid: GridSpec,
    j_max: i32,
    /// rho_j for j = -1 ..= j_max, indexed by (j + 1).
    rho: Vec<Vec<f64>>,
}

impl LpDecomposition {
    pub fn build(grid: &GridSpec) -> Self {
        let corner = grid.nyquist() * std::f64::consts::SQRT_2;
        // Smallest J with S(|k| / 2^{J+1}) = 1 across the whole grid, so the
        // partition telescopes to exactly 1 everywhere.
        let mut j_max = 0;
        while BLOCK_LO * 2.0_f64.powi(j_max + 1) < corner {
            j_max += 1;
        }
        let n = grid.n();
        let mut rho = Vec::new();
        for j in -1..=j_max {
            let mut table = vec![0.0; grid.len()];
            for iy in 0..n {
                let ky = grid.freq(iy);
                for ix in 0..n {
                    let kx = grid.freq(ix);
                    let r = (kx * kx + ky * ky).sqrt();
                    table[iy * n + ix] = if j == -1 {
                        radial_step(r)
                    } else {
                        radial_step(r / 2.0_f64.powi(j + 1)) - radial_step(r / 2.0_f64.powi(j))
                    };
                }
            }
            rho.push(table);
        }
        LpDecomposition {
            grid: *grid,
            j_max,
            rho,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Largest block index; every grid frequency is covered by blocks
    /// -1 ..= j_max.
    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn rho_table(&self, j: i32) -> &[f64] {
        &self.rho[(j + 1) as usize]
    }

    /// Delta_j f from a precomputed spectrum.
    pub fn block_from_spectrum(&self, spectrum: &[Complex64], j: i32) -> Field {
        let mut s = spectrum.to_vec();
        fft::scale_spectrum(&mut s, self.rho_table(j));
        fft::inverse(self.grid, s)
    }

    /// All blocks Delta_{-1} f ... Delta_{j_max} f.
    pub fn blocks(&self, f: &Field) -> Result<Vec<Field>> {
        self.grid.check_same(f.spec(), "lp blocks")?;
        let spectrum = fft::forward(f);
        Ok((-1..=self.j_max)
            .map(|j| self.block_from_spectrum(&spectrum, j))
            .collect())
    }

    /// The paraproduct f << g (f paired at strictly lower frequency).
    pub fn paraproduct_less(&self, f: &Field, g: &Field) -> Result<Field> {
        self.grid.check_same(f.spec(), "paraproduct f")?;
        self.grid.check_same(g.spec(), "paraproduct g")?;
        let sf = fft::forward(f);
        let sg = fft::forward(g);
        let n2 = self.grid.len();
        let mut acc = vec![0.0; n2];
        // S_{j-2} f = F^{-1}(S(|k|/2^{j-1}) F f), by telescoping.
        for j in 1..=self.j_max {
            let mut low = sf.clone();
            let scale = 2.0_f64.powi(j - 1);
            let n = self.grid.n();
            for iy in 0..n {
                let ky = self.grid.freq(iy);
                for ix in 0..n {
                    let kx = self.grid.freq(ix);
                    let r = (kx * kx + ky * ky).sqrt();
                    low[iy * n + ix] *= radial_step(r / scale);
                }
            }
            let low = fft::inverse(self.grid, low);
            let high = self.block_from_spectrum(&sg, j);
            for (a, (l, h)) in acc.iter_mut().zip(low.data().iter().zip(high.data())) {
                *a += l * h;
            }
        }
        Field::from_data(self.grid, acc)
    }

    /// The resonant part f o g = sum over |i-j| <= 1 of Delta_i f Delta_j g.
    pub fn resonant(&self, f: &Field, g: &Field) -> Result<Field> {
        self.grid.check_same(f.spec(), "resonant f")?;
        self.grid.check_same(g.spec(), "resonant g")?;
        let bf = self.blocks(f)?;
        let bg = self.blocks(g)?;
        let n2 = self.grid.len();
        let mut acc = vec![0.0; n2];
        for (i, fi) in bf.iter().enumerate() {
            for dj in -1_i32..=1 {
                let j = i as i32 + dj;
                if j < 0 || j > self.j_max + 1 {
                    continue;
                }
                let gj = &bg[j as usize];
                for (a, (x, y)) in acc.iter_mut().zip(fi.data().iter().zip(gj.data())) {
                    *a += x * y;
                }
            }
        }
        Field::from_data(self.grid, acc)
    }

    /// The frequency weight W = sum_{|i-j| <= 1} rho_i rho_j that the
    /// resonant product applies to a spectral pairing.  Because the
    /// partition telescopes to 1 and non-adjacent blocks are disjoint,
    /// W equals 1 at every grid frequency up to roundoff.
    pub fn adjacency_weight_table(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.grid.len()];
        for i in -1..=self.j_max {
            for dj in -1_i32..=1 {
                let j = i + dj;
                if j < -1 || j > self.j_max {
                    continue;
                }
                let ri = self.rho_table(i);
                let rj = self.rho_table(j);
                for ((wv, &a), &b) in w.iter_mut().zip(ri).zip(rj) {
                    *wv += a * b;
                }
            }
        }
        w
    }

    /// Spatial mean of the resonant product straight from the two spectra,
    /// via Parseval: mean(f o g) = N^-4 sum_k W(k) Re[Ff(k) conj(Fg(k))]
    /// with W from [`Self::adjacency_weight_table`].  Identical to averaging
    /// `resonant` but needs only two forward transforms.
    pub fn resonant_mean_from_spectra(&self, sf: &[Complex64], sg: &[Complex64]) -> f64 {
        let w = self.adjacency_weight_table();
        let n2 = self.grid.len() as f64;
        let mut acc = 0.0;
        for ((&wv, a), b) in w.iter().zip(sf).zip(sg) {
            acc += wv * (a.re * b.re + a.im * b.im);
        }
        acc / (n2 * n2)
    }
}
