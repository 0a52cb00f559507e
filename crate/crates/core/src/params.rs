//! Problem parameters and the quantities derived from them.
//!
//! [`PerturbationParams`] holds the four physical knobs (mass ratio, mass
//! reduction factor of the radiating primary, oblateness of the smaller
//! primary, drag constant). Everything downstream consumes the derived
//! record [`DerivedParams`], which can also be built directly from
//! `(mu, epsilon, A2, W1)` when a study needs the drag strength decoupled
//! from the radiation factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationParams {
    pub mu: f64,
    pub q1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    pub cd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub mu: f64,
    pub q1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    pub epsilon: f64,
    pub n: f64,
    pub gamma: f64,
    pub delta: f64,
    #[serde(rename = "W1")]
    pub w1: f64,
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu.is_finite() && mu > 0.0 && mu <= 0.5) {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            reason: "must satisfy 0 < mu <= 1/2",
        });
    }
    Ok(())
}

fn check_q1(q1: f64) -> Result<()> {
    if !(q1.is_finite() && q1 > 0.0 && q1 <= 1.0) {
        return Err(Error::Domain {
            name: "q1",
            value: q1,
            reason: "must satisfy 0 < q1 <= 1",
        });
    }
    Ok(())
}

fn check_non_negative(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Domain {
            name,
            value: v,
            reason: "must be finite and non-negative",
        });
    }
    Ok(())
}

impl PerturbationParams {
    pub fn new(mu: f64, q1: f64, a2: f64, cd: f64) -> Result<Self> {
        let p = PerturbationParams { mu, q1, a2, cd };
        p.validate()?;
        Ok(p)
    }

    /// Unperturbed problem: no radiation, no oblateness, no drag.
    pub fn classical(mu: f64) -> Result<Self> {
        Self::new(mu, 1.0, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_mu(self.mu)?;
        check_q1(self.q1)?;
        check_non_negative("A2", self.a2)?;
        if !(self.cd.is_finite() && self.cd > 0.0) {
            return Err(Error::Domain {
                name: "cd",
                value: self.cd,
                reason: "must be finite and positive",
            });
        }
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        self.validate()?;
        let mu = self.mu;
        let q1 = self.q1;
        Ok(DerivedParams {
            mu,
            q1,
            a2: self.a2,
            epsilon: 1.0 - q1,
            n: (1.0 + 1.5 * self.a2).sqrt(),
            gamma: 1.0 - 2.0 * mu,
            delta: q1.cbrt(),
            w1: (1.0 - mu) * (1.0 - q1) / self.cd,
        })
    }

    /// Scales epsilon, A2 and W1 by `h`.
    ///
    /// W1 is proportional to epsilon at fixed `cd`, so scaling `1 - q1`
    /// scales the drag exactly and `cd` is left untouched.
    pub fn perturbation_scale(&self, h: f64) -> Result<Self> {
        self.validate()?;
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::Domain {
                name: "h",
                value: h,
                reason: "scale must lie in [0, 1]",
            });
        }
        Ok(PerturbationParams {
            mu: self.mu,
            q1: 1.0 - h * (1.0 - self.q1),
            a2: h * self.a2,
            cd: self.cd,
        })
    }
}

impl DerivedParams {
    /// Builds the derived record from `(mu, epsilon, A2, W1)` with W1 free.
    pub fn from_components(mu: f64, epsilon: f64, a2: f64, w1: f64) -> Result<Self> {
        check_mu(mu)?;
        check_q1(1.0 - epsilon)?;
        check_non_negative("epsilon", epsilon)?;
        check_non_negative("A2", a2)?;
        check_non_negative("W1", w1)?;
        let q1 = 1.0 - epsilon;
        Ok(DerivedParams {
            mu,
            q1,
            a2,
            epsilon,
            n: (1.0 + 1.5 * a2).sqrt(),
            gamma: 1.0 - 2.0 * mu,
            delta: q1.cbrt(),
            w1,
        })
    }

    pub fn classical(mu: f64) -> Result<Self> {
        Self::from_components(mu, 0.0, 0.0, 0.0)
    }

    /// Scales epsilon, A2 and W1 by `h`, keeping mu.
    pub fn scaled(&self, h: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::Domain {
                name: "h",
                value: h,
                reason: "scale must lie in [0, 1]",
            });
        }
        Self::from_components(self.mu, h * self.epsilon, h * self.a2, h * self.w1)
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::from_components(mu, self.epsilon, self.a2, self.w1)
    }

    /// `n * W1`, the combination in which drag enters every series.
    pub fn nw1(&self) -> f64 {
        self.n * self.w1
    }

    /// Largest of epsilon, A2 and nW1; first-order series degrade as it grows.
    pub fn perturbation_magnitude(&self) -> f64 {
        self.epsilon.max(self.a2).max(self.nw1())
    }

    pub fn is_classical(&self) -> bool {
        self.epsilon == 0.0 && self.a2 == 0.0 && self.w1 == 0.0
    }
}

/// Mass reduction factor of a grain from its radius `a` (cm), density `rho`
/// (g/cm^3) and radiation pressure efficiency `chi`, in CGS units.
pub fn mass_reduction_factor(chi: f64, a: f64, rho: f64) -> f64 {
    1.0 - 5.6e-5 * chi / (a * rho)
}
