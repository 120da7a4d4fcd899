//! Admissible weights for localized norms.
//!
//! Two families, both functions of the sup-norm distance from the origin:
//!
//! * polynomial  p(a)(x) = (1 + |x|)^a, admissible with respect to the
//!   growth function log(1 + |x|) at rate |a|;
//! * stretched exponential  e(l)(x) = exp(l |x|^sigma) with sigma in
//!   (0, 1), admissible with respect to |x|^sigma at rate |l| (the bound
//!   theta(x) <= theta(y) exp(lambda |x-y|^sigma) follows from the
//!   sigma-subadditivity of t -> t^sigma).
//!
//! Norms divide by theta at the base point, so a > 0 / l > 0 tolerate
//! growth at infinity and negative parameters enforce decay.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum WeightKind {
    Polynomial,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Weight {
    kind: WeightKind,
    /// Exponent a for p(a), rate l for e(l).
    param: f64,
    /// Stretching exponent sigma for the exponential family.
    sigma: f64,
}

impl Weight {
    pub fn polynomial(a: f64) -> Self {
        Weight {
            kind: WeightKind::Polynomial,
            param: a,
            sigma: 1.0,
        }
    }

    pub fn exponential(l: f64, sigma: f64) -> Self {
        assert!(
            sigma > 0.0 && sigma < 1.0,
            "stretching exponent must lie in (0,1), got {sigma}"
        );
        Weight {
            kind: WeightKind::Exponential,
            param: l,
            sigma,
        }
    }

    /// The trivial weight p(0) = 1.
    pub fn flat() -> Self {
        Weight::polynomial(0.0)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let r = x[0].abs().max(x[1].abs());
        match self.kind {
            WeightKind::Polynomial => (1.0 + r).powf(self.param),
            WeightKind::Exponential => (self.param * r.powf(self.sigma)).exp(),
        }
    }

    /// Growth function omega the weight is admissible against.
    pub fn omega(&self, x: [f64; 2]) -> f64 {
        let r = x[0].abs().max(x[1].abs());
        match self.kind {
            WeightKind::Polynomial => (1.0 + r).ln(),
            WeightKind::Exponential => r.powf(self.sigma),
        }
    }

    /// Admissibility rate lambda in theta(x) <= theta(y) e^{lambda omega(x-y)}.
    pub fn lambda(&self) -> f64 {
        self.param.abs()
    }

    pub fn describe(&self) -> String {
        match self.kind {
            WeightKind::Polynomial => format!("p({})", self.param),
            WeightKind::Exponential => format!("e({},s={})", self.param, self.sigma),
        }
    }
}
