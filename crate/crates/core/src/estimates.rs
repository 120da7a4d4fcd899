//! Verification harnesses for the solver's a-priori bounds.
//!
//! Five independent checks live here, each one a report generator over
//! immutable trajectories:
//!
//! * [`barrier_check`] — a pointwise barrier for nonnegative solutions of
//!   the absorbed heat equation: inside a box `P_n` the solution is bounded
//!   by `28 * max(1/dist^2, sqrt(sup|g|))` where `dist` is the distance to
//!   the boundary of the box and `g` the source.
//! * [`interior_bound_check`] — interior decay of boundary-driven
//!   solutions: the sup over the shrunken box `P_{n-l}` is controlled by
//!   `max(1/l^2, noise ceiling)` with a single constant over a sweep.
//! * [`shrink_iteration`] — the shrinking-box recursion
//!   `R_{i+1} = R_i + 2*C0 / sqrt(sup_{P_{n-R_i}})`, whose increments are
//!   calibrated so that the interior bound predicts halving of the sup at
//!   every step while it stays above the noise floor.
//! * [`UField`] / [`build_u_field`] — the two-variable increment field
//!   `U(z, zbar) = u(zbar) - u(z) - u(z) * (I xi(xbar) - I xi(x))` with its
//!   base-point gradient `nu` and the affine-centered remainder, feeding
//!   the two-variable Holder quotient of [`norms`].
//! * [`heat_gradient_check`] — the interior gradient estimate for caloric
//!   functions started from zero on a window: the gradient sup on the
//!   half-window is bounded by `K / L` times the best constant-offset
//!   approximation error on the full window, with one `K` across windows.

use serde::Serialize;

use crate::environment::{self, Environment, NoiseNorms};
use crate::error::{LabError, Result};
use crate::grid::{Field, GridSpec, Region};
use crate::mollifier::MollifierKit;
use crate::norms::{self, NormReport, TwoVariableField};
use crate::solver::{SemilinearProblem, SpaceTimeField, solve_imex};
use crate::{cutoff, fft};

/// Prefactor of the pointwise barrier; valid for absorption `-u^2`,
/// i.e. `kappa = 2` in the solver's `-(kappa/2) u^2` convention.
pub const BARRIER_CONSTANT: f64 = 28.0;

/// Relative tolerance granted to the positivity hypothesis: the spectral
/// heat factor is not a positive kernel on a finite grid, so nonnegative
/// data produce ringing excursions of this relative size.
const NEGATIVITY_SLACK: f64 = 1e-4;

/// Relative tolerance for "starts from zero" hypotheses.
const ZERO_START_SLACK: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Pointwise barrier
// ---------------------------------------------------------------------------

/// Outcome of a pointwise barrier comparison on a box.
#[derive(Debug, Clone, Serialize)]
pub struct BarrierReport {
    /// Half-width of the comparison box.
    pub n: f64,
    /// Sup of |g| over the box (the source term of the equation).
    pub source_sup: f64,
    /// Number of strictly interior grid points inspected.
    pub interior_points: usize,
    /// Points where the solution exceeded the barrier.
    pub violations: usize,
    /// Largest ratio solution / barrier over the interior points.
    pub worst_ratio: f64,
    /// Location of the worst ratio, when any interior point exists.
    pub worst_point: Option<[f64; 2]>,
}

/// Check the pointwise barrier `u <= 28 * max(1/dist^2, sqrt(sup|g|))` on
/// the box `P_n` for a trajectory of the absorbed heat equation
/// `(d/dt - Lap) u = -u^2 + g` with zero initial data and `u >= 0`.
///
/// The hypotheses are enforced: nonzero initial data, or negative
/// excursions beyond the spectral-ringing slack, are invalid input.
/// `dist` is the per-axis distance to the boundary of the box; points on
/// the boundary itself (where the barrier degenerates) are skipped.
pub fn barrier_check(u: &SpaceTimeField, g: &Field, n: f64) -> Result<BarrierReport> {
    let spec = *u.spec();
    spec.check_same(g.spec(), "barrier source")?;
    if !(n > 0.0 && n <= spec.side() / 2.0) {
        return Err(LabError::InvalidInput(format!(
            "barrier box half-width {n} must lie in (0, {}]",
            spec.side() / 2.0
        )));
    }
    let global = u.global_sup();
    if u.initial_slice().sup_norm() > ZERO_START_SLACK * (1.0 + global) {
        return Err(LabError::InvalidInput(
            "barrier hypotheses require zero initial data".into(),
        ));
    }
    let floor = u.envelope_min().min_value();
    if floor < -NEGATIVITY_SLACK * (1.0 + global) {
        return Err(LabError::InvalidInput(format!(
            "barrier hypotheses require a nonnegative solution; measured minimum {floor:.3e}"
        )));
    }

    let region = Region::pbox(n);
    let (source_sup, _) = g.sup_on(&region);
    let envelope = u.envelope_max();
    let mut interior_points = 0usize;
    let mut violations = 0usize;
    let mut worst_ratio = 0.0_f64;
    let mut worst_point = None;
    for (ix, iy) in region.indices(&spec) {
        let x = spec.coord(ix);
        let y = spec.coord(iy);
        let dist = (n - x).min(n + x).min(n - y).min(n + y);
        if dist <= 0.0 {
            continue;
        }
        interior_points += 1;
        let barrier = BARRIER_CONSTANT * (1.0 / (dist * dist)).max(source_sup.sqrt());
        let value = envelope.at(ix, iy);
        let ratio = value / barrier;
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_point = Some([x, y]);
        }
        if value > barrier * (1.0 + 1e-9) {
            violations += 1;
        }
    }
    Ok(BarrierReport {
        n,
        source_sup,
        interior_points,
        violations,
        worst_ratio,
        worst_point,
    })
}

// ---------------------------------------------------------------------------
// Noise ceiling: the right-hand side of the interior bound
// ---------------------------------------------------------------------------

/// One scale-swept noise norm raised to the power the interior bound
/// assigns it: `norm^(2 / (nodes * (1 - eps)))`.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseTerm {
    /// Which pairing the norm measures.
    pub symbol: String,
    /// Regularity exponent of the underlying seminorm.
    pub regularity: f64,
    /// Number of noise factors entering the pairing.
    pub nodes: u32,
    /// The raw scale-swept norm.
    pub norm: f64,
    /// The norm raised to `2 / (nodes * (1 - eps))`.
    pub term: f64,
}

/// The three noise terms of the interior bound and their maximum.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseCeiling {
    pub epsilon: f64,
    pub terms: Vec<NoiseTerm>,
    /// `max` of the three terms: the level below which the `1/l^2`
    /// mechanism dominates the interior bound.
    pub ceiling: f64,
}

/// Convert measured noise norms into the terms entering the interior
/// bound.  The exponents are `2 / (nodes * (1 - eps))` with one node for
/// the noise itself and two nodes for each pairing.
pub fn noise_ceiling(norms: &NoiseNorms) -> NoiseCeiling {
    let eps = norms.epsilon;
    let make = |symbol: &str, regularity: f64, nodes: u32, norm: f64| {
        let term = norm.powf(2.0 / (f64::from(nodes) * (1.0 - eps)));
        NoiseTerm {
            symbol: symbol.to_owned(),
            regularity,
            nodes,
            norm,
            term,
        }
    };
    let terms = vec![
        make("xi", -1.0 - eps, 1, norms.xi.value),
        make("i_xi_xi", -2.0 * eps, 2, norms.i_xi_xi.value),
        make("xi_x", -eps, 2, norms.xi_x.value),
    ];
    let ceiling = terms.iter().map(|t| t.term).fold(0.0, f64::max);
    NoiseCeiling {
        epsilon: eps,
        terms,
        ceiling,
    }
}

// ---------------------------------------------------------------------------
// Interior bound
// ---------------------------------------------------------------------------

/// Parameters of one interior-decay experiment: solve on the torus with
/// zero initial data and an annulus source of plateau height
/// `forcing_level` supported between `P_{n-1}` and `P_n`, then measure the
/// solution on the shrunken boxes `P_{n-l}`.
#[derive(Debug, Clone)]
pub struct InteriorConfig {
    /// Absorption strength (2 matches the barrier's `-u^2`).
    pub kappa: f64,
    /// Half-width of the box carrying the boundary source.
    pub n: f64,
    /// Interior depths to probe; each `l` must lie in `(0, n]`.
    pub l_values: Vec<f64>,
    /// Plateau height of the annulus source; `0` disables the source,
    /// positive values must be at least 1 (the ramp width is `1/m`).
    pub forcing_level: f64,
    /// Final time of the solve.
    pub horizon: f64,
    /// Time step of the solve.
    pub dt: f64,
    /// Regularity bookkeeping exponent for the noise terms.
    pub epsilon: f64,
}

impl InteriorConfig {
    /// Standard experiment at depth sweep `l in {1, 2, 4}`.
    pub fn new(n: f64, forcing_level: f64, horizon: f64, dt: f64) -> Self {
        InteriorConfig {
            kappa: 2.0,
            n,
            l_values: vec![1.0, 2.0, 4.0],
            forcing_level,
            horizon,
            dt,
            epsilon: 0.1,
        }
    }

    fn validate(&self, spec: &GridSpec) -> Result<()> {
        if !(self.n >= 2.0 && self.n <= spec.side() / 2.0) {
            return Err(LabError::InvalidInput(format!(
                "interior box half-width {} must lie in [2, {}] so the annulus source fits",
                self.n,
                spec.side() / 2.0
            )));
        }
        if self.l_values.is_empty() {
            return Err(LabError::InvalidInput(
                "interior sweep needs at least one depth".into(),
            ));
        }
        for &l in &self.l_values {
            if !(l > 0.0 && l <= self.n) {
                return Err(LabError::InvalidInput(format!(
                    "interior depth {l} must lie in (0, {}]",
                    self.n
                )));
            }
        }
        if self.forcing_level < 0.0 || (self.forcing_level > 0.0 && self.forcing_level < 1.0) {
            return Err(LabError::InvalidInput(format!(
                "forcing level must be 0 or at least 1, got {}",
                self.forcing_level
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(LabError::InvalidInput(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    fn forcing(&self, spec: &GridSpec) -> Result<Field> {
        if self.forcing_level == 0.0 {
            Ok(Field::zeros(*spec))
        } else {
            cutoff::annulus_forcing(spec, self.n - 2.0, self.forcing_level)
        }
    }
}

/// One depth of the interior sweep.
#[derive(Debug, Clone, Serialize)]
pub struct InteriorRow {
    /// Depth `l` below the source box.
    pub l: f64,
    /// Measured `sup |u|` over time and `P_{n-l}`.
    pub sup: f64,
    /// The curvature mechanism `1/l^2`.
    pub curvature: f64,
    /// Right-hand side of the bound: `max(1/l^2, noise ceiling)`.
    pub bound: f64,
    /// `sup / bound`; the report's uniform constant is the max over rows.
    pub ratio: f64,
}

/// Tabulated interior decay of one boundary-driven solution.
#[derive(Debug, Clone, Serialize)]
pub struct InteriorReport {
    pub n: f64,
    pub forcing_level: f64,
    pub kappa: f64,
    pub epsilon: f64,
    /// Noise terms of the environment, absent for potential-free runs.
    pub noise: Option<NoiseCeiling>,
    /// Rows in ascending depth order.
    pub rows: Vec<InteriorRow>,
    /// Smallest constant `K` with `sup <= K * bound` across all rows.
    pub uniform_constant: f64,
    /// Least-squares slope of `log sup` against `log l`, fitted over the
    /// rows where the curvature mechanism dominates the noise ceiling;
    /// absent when fewer than two such rows carry a positive sup.
    pub decay_slope: Option<f64>,
}

/// Run the interior experiment against a sampled environment.
pub fn interior_bound_check(
    env: &Environment,
    kit: &MollifierKit,
    cfg: &InteriorConfig,
) -> Result<InteriorReport> {
    cfg.validate(env.grid())?;
    let forcing = cfg.forcing(env.grid())?;
    let initial = Field::zeros(*env.grid());
    let problem = SemilinearProblem::from_env(env, cfg.kappa, initial, forcing, cfg.horizon)?;
    let noise = environment::noise_norms(env, kit, &Region::pbox(cfg.n), cfg.epsilon)?;
    interior_report(&problem, Some(noise_ceiling(&noise)), cfg)
}

/// Run the interior experiment with the potential disabled (pure heat
/// flow plus absorption and the boundary source).
pub fn interior_bound_check_potential_free(
    spec: &GridSpec,
    cfg: &InteriorConfig,
) -> Result<InteriorReport> {
    cfg.validate(spec)?;
    let forcing = cfg.forcing(spec)?;
    let initial = Field::zeros(*spec);
    let problem = SemilinearProblem::potential_free(cfg.kappa, initial, forcing, cfg.horizon)?;
    interior_report(&problem, None, cfg)
}

fn interior_report(
    problem: &SemilinearProblem,
    noise: Option<NoiseCeiling>,
    cfg: &InteriorConfig,
) -> Result<InteriorReport> {
    let run = solve_imex(problem, cfg.dt)?;
    let mut depths = cfg.l_values.clone();
    depths.sort_by(|a, b| a.total_cmp(b));
    depths.dedup();
    let ceiling = noise.as_ref().map_or(0.0, |c| c.ceiling);

    let mut rows = Vec::with_capacity(depths.len());
    for &l in &depths {
        let sup = run.sup_over_time_on(&Region::pbox(cfg.n - l))?;
        let curvature = 1.0 / (l * l);
        let bound = curvature.max(ceiling);
        rows.push(InteriorRow {
            l,
            sup,
            curvature,
            bound,
            ratio: sup / bound,
        });
    }
    for pair in rows.windows(2) {
        // Deeper boxes are nested inside shallower ones, so their sups
        // cannot grow; any increase means the measurement itself broke.
        if pair[1].sup > pair[0].sup * (1.0 + 1e-12) {
            return Err(LabError::Construction(format!(
                "interior sup grew from {:.6e} (depth {}) to {:.6e} (depth {})",
                pair[0].sup, pair[0].l, pair[1].sup, pair[1].l
            )));
        }
    }
    let uniform_constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.curvature >= ceiling && r.sup > 0.0)
        .map(|r| (r.l.ln(), r.sup.ln()))
        .collect();
    let decay_slope = fit_slope(&pts);
    Ok(InteriorReport {
        n: cfg.n,
        forcing_level: cfg.forcing_level,
        kappa: cfg.kappa,
        epsilon: cfg.epsilon,
        noise,
        rows,
        uniform_constant,
        decay_slope,
    })
}

/// Least-squares slope through `(x, y)` pairs; `None` below two distinct
/// abscissae.
fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

// ---------------------------------------------------------------------------
// Shrinking-box iteration
// ---------------------------------------------------------------------------

/// Why a shrinking-box run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShrinkHalt {
    /// The next radius would leave the starting box.
    RadiusExhausted,
    /// The smallness condition `c0 * sup >= noise floor` failed, so the
    /// self-improvement mechanism no longer applies.
    SmallnessFailed,
    /// The sup vanished; the increment is undefined (and nothing is left
    /// to bound).
    SupVanished,
    /// Safety cap on the number of steps.
    StepLimit,
}

/// One radius of the shrinking-box recursion.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShrinkStep {
    /// Accumulated radius `R_i` eaten from the boundary.
    pub radius: f64,
    /// `sup |u|` over time and `P_{n - R_i}`.
    pub sup: f64,
    /// `sup * R_i^2`; bounded along the trace when the `1/l^2` decay holds.
    pub product: f64,
}

/// Trace of the recursion `R_{i+1} = R_i + 2*C0 / sqrt(sup_i)`.
#[derive(Debug, Clone, Serialize)]
pub struct ShrinkTrace {
    pub n: f64,
    pub c0: f64,
    pub big_c0: f64,
    pub start_radius: f64,
    pub noise_floor: f64,
    pub steps: Vec<ShrinkStep>,
    pub halted: ShrinkHalt,
}

impl ShrinkTrace {
    /// Radius increments actually taken.
    pub fn increments(&self) -> Vec<f64> {
        self.steps
            .windows(2)
            .map(|w| w[1].radius - w[0].radius)
            .collect()
    }

    /// Consecutive sup ratios (the halving diagnostics); pairs whose
    /// leading sup vanishes are skipped.
    pub fn halving_ratios(&self) -> Vec<f64> {
        self.steps
            .windows(2)
            .filter(|w| w[0].sup > 0.0)
            .map(|w| w[1].sup / w[0].sup)
            .collect()
    }

    /// Largest `sup * R^2` along the trace.
    pub fn max_product(&self) -> f64 {
        self.steps.iter().map(|s| s.product).fold(0.0, f64::max)
    }
}

const SHRINK_STEP_CAP: usize = 64;

/// Run the shrinking-box recursion on a trajectory, eating inward from
/// the box `P_{n - start_radius}`.  The increment `2*C0 / sqrt(sup)` is
/// exactly the radius at which the interior bound's two branches
/// `2*C0^2 / R^2` and `sup / 2` coincide, so each step predicts a halving
/// of the sup while `c0 * sup` stays above `noise_floor`.  A positive
/// `start_radius` lets the recursion begin where its hypotheses hold —
/// the bound presumes no source on the current box, so a run driven by a
/// boundary annulus starts just inside it.
pub fn shrink_iteration(
    u: &SpaceTimeField,
    c0: f64,
    big_c0: f64,
    n: f64,
    start_radius: f64,
    noise_floor: f64,
) -> Result<ShrinkTrace> {
    if !(c0 > 0.0 && c0 <= 1.0) {
        return Err(LabError::InvalidInput(format!(
            "smallness coefficient must lie in (0, 1], got {c0}"
        )));
    }
    if !(big_c0 > 0.0 && big_c0.is_finite()) {
        return Err(LabError::InvalidInput(format!(
            "increment coefficient must be positive and finite, got {big_c0}"
        )));
    }
    if !(n > 0.0 && n <= u.spec().side() / 2.0) {
        return Err(LabError::InvalidInput(format!(
            "starting half-width {n} must lie in (0, {}]",
            u.spec().side() / 2.0
        )));
    }
    if !(start_radius >= 0.0 && start_radius < n) {
        return Err(LabError::InvalidInput(format!(
            "starting radius {start_radius} must lie in [0, {n})"
        )));
    }
    if !(noise_floor >= 0.0 && noise_floor.is_finite()) {
        return Err(LabError::InvalidInput(format!(
            "noise floor must be nonnegative and finite, got {noise_floor}"
        )));
    }

    let mut steps = Vec::new();
    let mut radius = start_radius;
    let halted = loop {
        if steps.len() >= SHRINK_STEP_CAP {
            break ShrinkHalt::StepLimit;
        }
        let sup = u.sup_over_time_on(&Region::pbox(n - radius))?;
        steps.push(ShrinkStep {
            radius,
            sup,
            product: sup * radius * radius,
        });
        if sup <= 0.0 {
            break ShrinkHalt::SupVanished;
        }
        if c0 * sup < noise_floor {
            break ShrinkHalt::SmallnessFailed;
        }
        let next = radius + 2.0 * big_c0 / sup.sqrt();
        if next > n {
            break ShrinkHalt::RadiusExhausted;
        }
        radius = next;
    };
    Ok(ShrinkTrace {
        n,
        c0,
        big_c0,
        start_radius,
        noise_floor,
        steps,
        halted,
    })
}

/// Measure the increment coefficient: the smallest `C0` from a doubling
/// search whose trace halves the sup at every step (within `tol`) while
/// the smallness condition holds.  Returns the coefficient and its trace.
/// The underlying bound only asserts that *some* sufficiently large
/// coefficient works, so the constant is fitted, never assumed.
pub fn calibrate_shrink(
    u: &SpaceTimeField,
    c0: f64,
    n: f64,
    start_radius: f64,
    noise_floor: f64,
    tol: f64,
) -> Result<(f64, ShrinkTrace)> {
    let mut big_c0 = 2.0f64.powi(-8);
    for _ in 0..24 {
        let trace = shrink_iteration(u, c0, big_c0, n, start_radius, noise_floor)?;
        let halves = trace
            .halving_ratios()
            .iter()
            .all(|&r| r <= 0.5 + tol);
        if halves && trace.steps.len() > 1 {
            return Ok((big_c0, trace));
        }
        big_c0 *= 2.0;
    }
    Err(LabError::NonContraction(
        "no increment coefficient below 2^16 halves the sup along the trace".into(),
    ))
}

// ---------------------------------------------------------------------------
// Two-variable increment field
// ---------------------------------------------------------------------------

/// The two-variable increment field
/// `U(z, zbar) = u(zbar) - u(z) - u(z) * (P(xbar) - P(x))`
/// over a fixed region of base points, where `P` is the potential
/// primitive (the smoothed-noise antiderivative under the inverse heat
/// operator).  Implements [`TwoVariableField`], so the two-variable
/// Holder quotient applies directly; the base-point gradient `nu` and the
/// affine-centered remainder are exposed for inspection.
#[derive(Debug)]
pub struct UField<'a> {
    u: &'a Field,
    primitive: &'a Field,
    region: Region,
    stencil_radius: f64,
}

impl<'a> UField<'a> {
    /// Build the field from a state `u` and a primitive on the same grid.
    /// The region fattened by the stencil radius must stay inside the
    /// half-period square, so partner points never wrap.
    pub fn new(
        u: &'a Field,
        primitive: &'a Field,
        region: Region,
        stencil_radius: f64,
    ) -> Result<Self> {
        let spec = u.spec();
        spec.check_same(primitive.spec(), "increment-field primitive")?;
        if !(stencil_radius > spec.h() && stencil_radius.is_finite()) {
            return Err(LabError::Resolution(format!(
                "stencil radius {stencil_radius} must exceed the grid spacing {}",
                spec.h()
            )));
        }
        let reach =
            region.center[0].abs().max(region.center[1].abs()) + region.half_width + stencil_radius;
        if reach > spec.side() / 2.0 + 1e-12 {
            return Err(LabError::InvalidInput(format!(
                "stencil of radius {stencil_radius} around {} exits the grid",
                region.describe()
            )));
        }
        Ok(UField {
            u,
            primitive,
            region,
            stencil_radius,
        })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn stencil_radius(&self) -> f64 {
        self.stencil_radius
    }

    /// Shortest wrapped displacement `xbar - x` between two grid points.
    pub fn displacement(&self, base: (usize, usize), partner: (usize, usize)) -> [f64; 2] {
        let spec = self.u.spec();
        let n = spec.n() as isize;
        let h = spec.h();
        let wrap = |from: usize, to: usize| -> f64 {
            let mut d = to as isize - from as isize;
            if d > n / 2 {
                d -= n;
            } else if d < -(n / 2) {
                d += n;
            }
            d as f64 * h
        };
        [wrap(base.0, partner.0), wrap(base.1, partner.1)]
    }

    /// Base-point gradient of `U(z, .)`, by central differences in the
    /// partner variable.
    pub fn nu(&self, base: (usize, usize)) -> [f64; 2] {
        let spec = self.u.spec();
        let h = spec.h();
        let xp = (spec.wrap(base.0 as isize + 1), base.1);
        let xm = (spec.wrap(base.0 as isize - 1), base.1);
        let yp = (base.0, spec.wrap(base.1 as isize + 1));
        let ym = (base.0, spec.wrap(base.1 as isize - 1));
        [
            (self.value(base, xp) - self.value(base, xm)) / (2.0 * h),
            (self.value(base, yp) - self.value(base, ym)) / (2.0 * h),
        ]
    }

    /// The affine-centered remainder `U(z, zbar) - nu(z) . (xbar - x)`,
    /// whose discrete partner-gradient vanishes at the base point.
    pub fn centered(&self, base: (usize, usize), partner: (usize, usize)) -> f64 {
        let nu = self.nu(base);
        let d = self.displacement(base, partner);
        self.value(base, partner) - nu[0] * d[0] - nu[1] * d[1]
    }

    /// The two-variable Holder quotient of the field over its region at
    /// exponent `alpha` (in `(1, 2)`), using the stencil radius as the
    /// pair-distance cap.
    pub fn holder_norm(&self, alpha: f64) -> Result<NormReport> {
        norms::two_variable_holder(self, alpha, &self.region, self.stencil_radius)
    }
}

impl TwoVariableField for UField<'_> {
    fn spec(&self) -> &GridSpec {
        self.u.spec()
    }

    fn value(&self, base: (usize, usize), partner: (usize, usize)) -> f64 {
        let ub = self.u.at(base.0, base.1);
        let up = self.u.at(partner.0, partner.1);
        let pb = self.primitive.at(base.0, base.1);
        let pp = self.primitive.at(partner.0, partner.1);
        up - ub - ub * (pp - pb)
    }
}

/// Increment field of a state against a sampled environment: the
/// primitive is the environment's smoothed-noise antiderivative.
pub fn build_u_field<'a>(
    u: &'a Field,
    env: &'a Environment,
    region: Region,
    stencil_radius: f64,
) -> Result<UField<'a>> {
    u.spec().check_same(env.grid(), "increment-field environment")?;
    UField::new(u, env.i_xi(), region, stencil_radius)
}

// ---------------------------------------------------------------------------
// Interior gradient estimate for caloric functions
// ---------------------------------------------------------------------------

/// One window of the gradient battery.
#[derive(Debug, Clone, Serialize)]
pub struct GradientCase {
    pub center: [f64; 2],
    /// Half-width `L` of the outer window.
    pub scale: f64,
    /// `sup |grad u|` over the stored time slices and the half window.
    pub gradient_sup: f64,
    /// Best constant-offset approximation error on the outer window:
    /// half the oscillation of `u` over time and the window.
    pub oscillation: f64,
    /// Measured constant `K = gradient_sup * L / oscillation`.
    pub constant: f64,
    /// The window carried no oscillation, so no constant is defined.
    pub degenerate: bool,
}

/// Gradient-estimate battery over a family of windows.
#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub cases: Vec<GradientCase>,
    /// Extremes of the measured constants over non-degenerate windows.
    pub k_min: f64,
    pub k_max: f64,
}

impl GradientReport {
    /// Ratio of the largest to the smallest measured constant; `1` when
    /// every window is degenerate.
    pub fn spread(&self) -> f64 {
        if self.k_min > 0.0 {
            self.k_max / self.k_min
        } else if self.k_max > 0.0 {
            f64::INFINITY
        } else {
            1.0
        }
    }
}

/// Verify the interior gradient estimate on a battery of windows: for a
/// trajectory that starts from zero on each window `B(x, L)` and is
/// driven only from outside, the gradient sup over `B(x, L/2)` is bounded
/// by `K / L` times the best constant-offset error on `B(x, L)`.  The
/// oscillation uses the exact per-step envelopes; the gradient is sampled
/// on the stored time slices.
pub fn heat_gradient_check(
    u: &SpaceTimeField,
    windows: &[([f64; 2], f64)],
) -> Result<GradientReport> {
    let spec = *u.spec();
    if windows.is_empty() {
        return Err(LabError::InvalidInput(
            "gradient battery needs at least one window".into(),
        ));
    }
    let global = u.global_sup();
    let mut inner_cells = Vec::with_capacity(windows.len());
    let mut outer_cells = Vec::with_capacity(windows.len());
    for &(center, scale) in windows {
        if !(scale > 0.0) {
            return Err(LabError::InvalidInput(format!(
                "window half-width must be positive, got {scale}"
            )));
        }
        let outer = Region::ball(center, scale);
        if center[0].abs().max(center[1].abs()) + scale > spec.side() / 2.0 + 1e-12 {
            return Err(LabError::InvalidInput(format!(
                "window {} exits the half-period square",
                outer.describe()
            )));
        }
        let (start, _) = u.initial_slice().sup_on(&outer);
        if start > ZERO_START_SLACK * (1.0 + global) {
            return Err(LabError::InvalidInput(format!(
                "trajectory must start from zero on {}; measured {start:.3e}",
                outer.describe()
            )));
        }
        let inner = Region::ball(center, scale / 2.0);
        let cells = inner.indices(&spec);
        if cells.is_empty() {
            return Err(LabError::Resolution(format!(
                "half window {} contains no grid points",
                inner.describe()
            )));
        }
        inner_cells.push(cells);
        outer_cells.push(outer.indices(&spec));
    }

    let mut grad_sup = vec![0.0_f64; windows.len()];
    for slice in u.slices() {
        let gx = fft::gradient_component(slice, 0);
        let gy = fft::gradient_component(slice, 1);
        for (case, cells) in inner_cells.iter().enumerate() {
            let mut best = grad_sup[case];
            for &(ix, iy) in cells {
                let g = gx.at(ix, iy).hypot(gy.at(ix, iy));
                if g > best {
                    best = g;
                }
            }
            grad_sup[case] = best;
        }
    }

    let mut cases = Vec::with_capacity(windows.len());
    let mut k_min = f64::INFINITY;
    let mut k_max = 0.0_f64;
    for (i, &(center, scale)) in windows.iter().enumerate() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(ix, iy) in &outer_cells[i] {
            lo = lo.min(u.envelope_min().at(ix, iy));
            hi = hi.max(u.envelope_max().at(ix, iy));
        }
        let oscillation = (hi - lo) / 2.0;
        let degenerate = oscillation <= 1e-12 * (1.0 + global);
        let constant = if degenerate {
            0.0
        } else {
            grad_sup[i] * scale / oscillation
        };
        if !degenerate {
            k_min = k_min.min(constant);
            k_max = k_max.max(constant);
        }
        cases.push(GradientCase {
            center,
            scale,
            gradient_sup: grad_sup[i],
            oscillation,
            constant,
            degenerate,
        });
    }
    if !k_min.is_finite() {
        k_min = 0.0;
    }
    Ok(GradientReport { cases, k_min, k_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::RenormEstimate;
    use crate::lp::LpDecomposition;
    use crate::quintic_step;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(side: f64, n: usize) -> GridSpec {
        GridSpec::periodic(side, n).unwrap()
    }

    /// A smooth bump of exact compact support: full height inside
    /// `radius - 1`, zero outside `radius` (Euclidean distance).
    fn compact_bump(spec: &GridSpec, center: [f64; 2], radius: f64, height: f64) -> Field {
        Field::from_fn(*spec, |x, y| {
            let d = (x - center[0]).hypot(y - center[1]);
            height * quintic_step(radius - d)
        })
    }

    fn absorbed_run(spec: &GridSpec, g: Field, horizon: f64, dt: f64) -> SpaceTimeField {
        let problem =
            SemilinearProblem::potential_free(2.0, Field::zeros(*spec), g, horizon).unwrap();
        solve_imex(&problem, dt).unwrap()
    }

    fn sample_env(side: f64, n: usize, alpha: f64, seed: u64) -> (Environment, MollifierKit) {
        let spec = grid(side, n);
        let kit = MollifierKit::build(&spec, 8, 1e-8).unwrap();
        let lp = LpDecomposition::build(&spec);
        let est = RenormEstimate::from_prediction(&kit, &lp, alpha).unwrap();
        let env = Environment::generate(&kit, alpha, seed, &est).unwrap();
        (env, kit)
    }

    #[test]
    fn barrier_keeps_zero_solution_at_zero() {
        let spec = grid(16.0, 64);
        let run = absorbed_run(&spec, Field::zeros(spec), 0.2, 1e-3);
        let report = barrier_check(&run, &Field::zeros(spec), 4.0).unwrap();
        assert_eq!(report.violations, 0);
        assert_eq!(report.worst_ratio, 0.0);
        assert!(report.interior_points > 0);
        assert!(report.worst_point.is_none());
    }

    #[test]
    fn barrier_matches_logistic_cap_for_unit_source() {
        // A spatially constant source makes the equation an ODE:
        // v' = -v^2 + 1, v(0) = 0, whose solution tanh(t) caps at the
        // square root of the source level.
        let spec = grid(16.0, 64);
        let run = absorbed_run(&spec, Field::constant(spec, 1.0), 1.0, 1e-3);
        let report = barrier_check(&run, &Field::constant(spec, 1.0), 4.0).unwrap();
        assert_eq!(report.violations, 0);
        assert!((report.source_sup - 1.0).abs() < 1e-12);
        assert!((run.global_sup() - 1.0f64.tanh()).abs() < 5e-3);
        // The barrier at the center is 28 * max(1/16, 1) = 28, so the
        // measured ratio stays a factor of ten inside it.
        assert!(report.worst_ratio < 0.05, "ratio {}", report.worst_ratio);
    }

    #[test]
    fn barrier_rejects_nonzero_initial_data() {
        let spec = grid(16.0, 64);
        let initial = compact_bump(&spec, [0.0, 0.0], 2.0, 1.0);
        let problem =
            SemilinearProblem::potential_free(2.0, initial, Field::zeros(spec), 0.1).unwrap();
        let run = solve_imex(&problem, 1e-3).unwrap();
        let err = barrier_check(&run, &Field::zeros(spec), 4.0).unwrap_err();
        assert!(matches!(err, LabError::InvalidInput(_)), "{err}");
    }

    #[test]
    fn barrier_holds_on_random_source_battery() {
        let spec = grid(16.0, 128);
        let mut rng = ChaCha8Rng::seed_from_u64(9001);
        let mut worst = 0.0_f64;
        for _ in 0..5 {
            let mut g = Field::zeros(spec);
            for _ in 0..3 {
                let cx = rng.random_range(-6.0..6.0);
                let cy = rng.random_range(-6.0..6.0);
                let height = rng.random_range(1.0..30.0);
                let radius = rng.random_range(1.0..3.0);
                let bump = compact_bump(&spec, [cx, cy], radius, height);
                g = g.zip_map(&bump, |a, b| a + b).unwrap();
            }
            let run = absorbed_run(&spec, g.clone(), 0.5, 5e-4);
            let report = barrier_check(&run, &g, 4.0).unwrap();
            assert_eq!(report.violations, 0, "worst ratio {}", report.worst_ratio);
            worst = worst.max(report.worst_ratio);
        }
        assert!(worst > 0.0 && worst < 1.0, "battery worst ratio {worst}");
    }

    #[test]
    fn noise_ceiling_applies_the_tree_exponents() {
        let (env, kit) = sample_env(8.0, 128, 0.5, 7);
        let norms = environment::noise_norms(&env, &kit, &Region::pbox(2.0), 0.1).unwrap();
        let ceiling = noise_ceiling(&norms);
        assert_eq!(ceiling.terms.len(), 3);
        let by_symbol = |s: &str| ceiling.terms.iter().find(|t| t.symbol == s).unwrap();
        let xi = by_symbol("xi");
        assert_eq!(xi.nodes, 1);
        assert!((xi.regularity + 1.1).abs() < 1e-12);
        assert!((xi.term - norms.xi.value.powf(2.0 / 0.9)).abs() < 1e-12 * xi.term.max(1.0));
        let pair = by_symbol("i_xi_xi");
        assert_eq!(pair.nodes, 2);
        assert!((pair.regularity + 0.2).abs() < 1e-12);
        assert!(
            (pair.term - norms.i_xi_xi.value.powf(2.0 / 1.8)).abs() < 1e-12 * pair.term.max(1.0)
        );
        let coord = by_symbol("xi_x");
        assert_eq!(coord.nodes, 2);
        assert!((coord.regularity + 0.1).abs() < 1e-12);
        assert!((coord.term - norms.xi_x.value.powf(2.0 / 1.8)).abs() < 1e-12 * coord.term.max(1.0));
        let max = ceiling.terms.iter().map(|t| t.term).fold(0.0, f64::max);
        assert_eq!(ceiling.ceiling, max);
        assert!(ceiling.ceiling > 0.0);
    }

    #[test]
    fn interior_without_forcing_stays_at_zero() {
        let spec = grid(20.0, 64);
        let mut cfg = InteriorConfig::new(8.0, 0.0, 0.1, 1e-3);
        cfg.l_values = vec![1.0, 2.0, 4.0];
        let report = interior_bound_check_potential_free(&spec, &cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.rows.iter().all(|r| r.sup == 0.0));
        assert_eq!(report.uniform_constant, 0.0);
        assert!(report.decay_slope.is_none());
        assert!(report.noise.is_none());
    }

    #[test]
    fn interior_rejects_bad_geometry() {
        let spec = grid(20.0, 64);
        let too_small = InteriorConfig::new(1.5, 10.0, 0.1, 1e-3);
        assert!(matches!(
            interior_bound_check_potential_free(&spec, &too_small).unwrap_err(),
            LabError::InvalidInput(_)
        ));
        let mut deep = InteriorConfig::new(8.0, 10.0, 0.1, 1e-3);
        deep.l_values = vec![9.0];
        assert!(matches!(
            interior_bound_check_potential_free(&spec, &deep).unwrap_err(),
            LabError::InvalidInput(_)
        ));
        let fractional = InteriorConfig::new(8.0, 0.5, 0.1, 1e-3);
        assert!(matches!(
            interior_bound_check_potential_free(&spec, &fractional).unwrap_err(),
            LabError::InvalidInput(_)
        ));
    }

    #[test]
    fn shrink_constant_solution_has_constant_increments() {
        // Pure heat flow preserves a constant, so the trace sees the
        // closed form: increments 2*C0/sqrt(c) at every step.
        let spec = grid(16.0, 64);
        let problem = SemilinearProblem::potential_free(
            0.0,
            Field::constant(spec, 4.0),
            Field::zeros(spec),
            0.02,
        )
        .unwrap();
        let run = solve_imex(&problem, 1e-3).unwrap();
        let trace = shrink_iteration(&run, 0.5, 0.7, 4.0, 0.0, 0.0).unwrap();
        assert_eq!(trace.halted, ShrinkHalt::RadiusExhausted);
        assert_eq!(trace.steps.len(), 6);
        for inc in trace.increments() {
            assert!((inc - 0.7).abs() < 1e-9, "increment {inc}");
        }
        for ratio in trace.halving_ratios() {
            assert!((ratio - 1.0).abs() < 1e-9);
        }
        for step in &trace.steps {
            assert!((step.product - 4.0 * step.radius * step.radius).abs() < 1e-6);
        }
    }

    #[test]
    fn shrink_halts_when_smallness_fails() {
        let spec = grid(16.0, 64);
        let problem = SemilinearProblem::potential_free(
            0.0,
            Field::constant(spec, 4.0),
            Field::zeros(spec),
            0.02,
        )
        .unwrap();
        let run = solve_imex(&problem, 1e-3).unwrap();
        // Floor above c0 * sup = 2: the recursion may not even start.
        let trace = shrink_iteration(&run, 0.5, 0.7, 4.0, 0.0, 3.0).unwrap();
        assert_eq!(trace.halted, ShrinkHalt::SmallnessFailed);
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.steps[0].radius, 0.0);
    }

    #[test]
    fn u_field_reduces_to_increment_without_primitive() {
        let spec = grid(8.0, 64);
        let u = Field::from_fn(spec, |x, y| (0.7 * x).sin() + 0.3 * (0.9 * y).cos());
        let zero = Field::zeros(spec);
        let field = UField::new(&u, &zero, Region::pbox(1.0), 0.5).unwrap();
        for &(b, p) in &[((8usize, 40usize), (11usize, 38usize)), ((32, 32), (30, 35))] {
            let expect = u.at(p.0, p.1) - u.at(b.0, b.1);
            assert_eq!(field.value(b, p), expect);
        }
        assert_eq!(field.value((20, 20), (20, 20)), 0.0);
    }

    #[test]
    fn u_field_constant_state_tracks_the_primitive() {
        let spec = grid(8.0, 64);
        let u = Field::constant(spec, 3.0);
        let primitive = Field::from_fn(spec, |x, y| {
            (std::f64::consts::TAU * x / 8.0).sin() + 0.5 * (std::f64::consts::TAU * y / 8.0).cos()
        });
        let field = UField::new(&u, &primitive, Region::pbox(1.0), 0.5).unwrap();

        let b = (20usize, 44usize);
        let p = (24usize, 41usize);
        let expect = -3.0 * (primitive.at(p.0, p.1) - primitive.at(b.0, b.1));
        assert!((field.value(b, p) - expect).abs() < 1e-14);
        assert_eq!(field.value(b, b), 0.0);

        // nu = -3 * grad(primitive) up to the O(h^2) central-difference
        // error of a smooth field.
        let gx = fft::gradient_component(&primitive, 0);
        let gy = fft::gradient_component(&primitive, 1);
        let nu = field.nu(b);
        assert!((nu[0] + 3.0 * gx.at(b.0, b.1)).abs() < 1e-2, "{nu:?}");
        assert!((nu[1] + 3.0 * gy.at(b.0, b.1)).abs() < 1e-2, "{nu:?}");

        // The centered remainder has a vanishing discrete gradient in the
        // partner variable at the base point.
        let h = spec.h();
        let xp = (spec.wrap(b.0 as isize + 1), b.1);
        let xm = (spec.wrap(b.0 as isize - 1), b.1);
        let grad = (field.centered(b, xp) - field.centered(b, xm)) / (2.0 * h);
        assert!(grad.abs() < 1e-12, "residual gradient {grad}");
    }

    #[test]
    fn u_field_guards_the_stencil_domain() {
        let spec = grid(8.0, 64);
        let u = Field::zeros(spec);
        let zero = Field::zeros(spec);
        let err = UField::new(&u, &zero, Region::pbox(3.0), 1.5).unwrap_err();
        assert!(matches!(err, LabError::InvalidInput(_)), "{err}");
        let err = UField::new(&u, &zero, Region::pbox(1.0), 0.05).unwrap_err();
        assert!(matches!(err, LabError::Resolution(_)), "{err}");
    }

    #[test]
    fn heat_gradient_zero_run_is_degenerate() {
        let spec = grid(16.0, 64);
        let problem = SemilinearProblem::potential_free(
            0.0,
            Field::zeros(spec),
            Field::zeros(spec),
            0.1,
        )
        .unwrap();
        let run = solve_imex(&problem, 1e-3).unwrap();
        let report = heat_gradient_check(&run, &[([0.0, 0.0], 1.0), ([1.0, 0.0], 2.0)]).unwrap();
        assert!(report.cases.iter().all(|c| c.degenerate));
        assert_eq!(report.k_max, 0.0);
        assert_eq!(report.spread(), 1.0);
    }

    #[test]
    fn heat_gradient_rejects_data_on_the_window() {
        let spec = grid(16.0, 64);
        let initial = compact_bump(&spec, [0.0, 0.0], 1.5, 1.0);
        let problem =
            SemilinearProblem::potential_free(0.0, initial, Field::zeros(spec), 0.1).unwrap();
        let run = solve_imex(&problem, 1e-3).unwrap();
        let err = heat_gradient_check(&run, &[([0.0, 0.0], 2.0)]).unwrap_err();
        assert!(matches!(err, LabError::InvalidInput(_)), "{err}");
    }
}
