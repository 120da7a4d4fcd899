//! Box cutoff families: annulus forcings and localizers.
//!
//! All profiles are radial in the sup-norm radius s = |x|_inf, so plateaus
//! and supports are exactly the boxes P_n = [-n, n]^2 used everywhere else.
//! Two shapes are provided:
//!
//! * the annulus forcing phi_n^m: zero on P_n and outside P_{n+2}, equal to
//!   the (large) level m on the closed annulus between the slightly grown
//!   box of sup-radius n + 1/m and P_{n+1}, with C^2 ramps in between.  As
//!   m grows the inner ramp steepens while the plateau value rises -- the
//!   "wall of absorption" driving the compact-support experiments;
//! * the localizer eta_r: one on P_{r-2}, zero outside P_{r-1}, C^2 ramp on
//!   the unit annulus in between, used to cut solutions down to a box
//!   without touching them in the interior.
//!
//! Ramps are the shared quintic step, so all profiles are C^2 in the
//! sup-norm radius (corners along the diagonals are inherited from the box
//! geometry itself).

use crate::grid::{Field, GridSpec, Region};
use crate::quintic_step;
use crate::{LabError, Result};

/// Sup-norm radial profile of the annulus forcing at level m.
fn forcing_profile(s: f64, n: f64, m: f64) -> f64 {
    if s <= n {
        0.0
    } else if s < n + 1.0 / m {
        m * quintic_step((s - n) * m)
    } else if s <= n + 1.0 {
        m
    } else if s < n + 2.0 {
        m * quintic_step(n + 2.0 - s)
    } else {
        0.0
    }
}

/// The annulus forcing phi_n^m sampled on the grid.
pub fn annulus_forcing(spec: &GridSpec, n: f64, m: f64) -> Result<Field> {
    if n < 0.0 {
        return Err(LabError::InvalidInput(format!(
            "inner box radius must be nonnegative, got {n}"
        )));
    }
    if m < 1.0 {
        return Err(LabError::InvalidInput(format!(
            "forcing level must be >= 1 so the ramp fits before the plateau, got {m}"
        )));
    }
    if n + 2.0 > spec.side() / 2.0 {
        return Err(LabError::InvalidInput(format!(
            "forcing support needs sup-radius {} but the domain only reaches {}",
            n + 2.0,
            spec.side() / 2.0
        )));
    }
    Ok(Field::from_fn(*spec, |x, y| {
        forcing_profile(x.abs().max(y.abs()), n, m)
    }))
}

/// The localizer eta_r: one on P_{r-2}, zero outside P_{r-1}.
pub fn localizer(spec: &GridSpec, r: f64) -> Result<Field> {
    if r < 2.0 {
        return Err(LabError::InvalidInput(format!(
            "localizer radius must be >= 2 so the inner plateau exists, got {r}"
        )));
    }
    if r - 1.0 > spec.side() / 2.0 {
        return Err(LabError::InvalidInput(format!(
            "localizer support needs sup-radius {} but the domain only reaches {}",
            r - 1.0,
            spec.side() / 2.0
        )));
    }
    Ok(Field::from_fn(*spec, |x, y| {
        quintic_step(r - 1.0 - x.abs().max(y.abs()))
    }))
}

/// The box geometry of one (n, m) cutoff pair, with the sampled fields.
#[derive(Debug, Clone)]
pub struct CutoffFamily {
    pub n: f64,
    pub m: f64,
    /// The inner box P_n the forcing vanishes on.
    pub inner: Region,
    /// The support box P_{n+2} of the forcing.
    pub support: Region,
    /// phi_n^m on the grid.
    pub forcing: Field,
    /// eta_{n+2} on the grid: one on P_n, zero outside P_{n+1}.
    pub localizer: Field,
}

/// Build the forcing phi_n^m together with the matching localizer
/// eta_{n+2} (plateau exactly the inner box P_n).
pub fn build_cutoffs(spec: &GridSpec, n: f64, m: f64) -> Result<CutoffFamily> {
    Ok(CutoffFamily {
        n,
        m,
        inner: Region::pbox(n),
        support: Region::pbox(n + 2.0),
        forcing: annulus_forcing(spec, n, m)?,
        localizer: localizer(spec, n + 2.0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forcing_vanishes_on_the_inner_box_and_far_field() {
        let spec = GridSpec::periodic(16.0, 256).unwrap();
        let phi = annulus_forcing(&spec, 4.0, 1000.0).unwrap();
        assert_eq!(phi.at_point(0.0, 0.0), 0.0);
        assert_eq!(phi.at_point(3.99, 3.99), 0.0);
        assert_eq!(phi.at_point(6.5, 0.0), 0.0);
        assert_eq!(phi.at_point(-7.5, 7.5), 0.0);
    }

    #[test]
    fn forcing_plateau_is_exactly_the_level() {
        let spec = GridSpec::periodic(16.0, 256).unwrap();
        let m = 1000.0;
        let phi = annulus_forcing(&spec, 4.0, m).unwrap();
        assert_eq!(phi.at_point(4.5, 0.0), m);
        assert_eq!(phi.at_point(-5.0, 2.0), m);
        assert_eq!(phi.at_point(4.5, -4.5), m);
    }

    #[test]
    fn forcing_range_is_zero_to_level() {
        let spec = GridSpec::periodic(16.0, 128).unwrap();
        for m in [1.0, 100.0, 10_000.0] {
            let phi = annulus_forcing(&spec, 3.0, m).unwrap();
            let lo = phi.data().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = phi.data().iter().cloned().fold(0.0_f64, f64::max);
            assert!(lo >= 0.0);
            assert!(hi <= m);
            assert_eq!(hi, m, "plateau sampled at level {m}");
        }
    }

    #[test]
    fn forcing_rejects_bad_geometry() {
        let spec = GridSpec::periodic(8.0, 64).unwrap();
        assert!(annulus_forcing(&spec, 3.0, 100.0).is_err());
        assert!(annulus_forcing(&spec, -1.0, 100.0).is_err());
        assert!(annulus_forcing(&spec, 1.0, 0.5).is_err());
    }

    #[test]
    fn localizer_plateaus_at_one_and_dies_at_the_support_edge() {
        let spec = GridSpec::periodic(16.0, 256).unwrap();
        let eta = localizer(&spec, 6.0).unwrap();
        assert_eq!(eta.at_point(0.0, 0.0), 1.0);
        assert_eq!(eta.at_point(4.0, -4.0), 1.0);
        assert_eq!(eta.at_point(5.0, 0.0), 0.0);
        assert_eq!(eta.at_point(7.0, 7.0), 0.0);
        let in_ramp = eta.at_point(4.5, 0.0);
        assert!(in_ramp > 0.0 && in_ramp < 1.0);
        let lo = eta.data().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eta.data().iter().cloned().fold(0.0_f64, f64::max);
        assert!(lo >= 0.0 && hi <= 1.0);
        assert!(localizer(&spec, 1.5).is_err());
        assert!(localizer(&spec, 9.5).is_err());
    }

    #[test]
    fn cutoff_family_pairs_forcing_with_matching_localizer() {
        let spec = GridSpec::periodic(16.0, 128).unwrap();
        let fam = build_cutoffs(&spec, 4.0, 100.0).unwrap();
        // The localizer plateau covers exactly the box the forcing spares.
        assert_eq!(fam.localizer.at_point(4.0, 0.0), 1.0);
        assert_eq!(fam.forcing.at_point(4.0, 0.0), 0.0);
        assert_eq!(fam.localizer.at_point(5.25, 0.0), 0.0);
        assert_eq!(fam.inner.half_width, 4.0);
        assert_eq!(fam.support.half_width, 6.0);
    }
}
