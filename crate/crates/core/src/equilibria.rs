//! Triangular equilibrium points: closed-form series, the epsilon-form
//! polynomial, the shift constants used to move the origin to L4, and a
//! Newton refinement of `U_x = U_y = 0`.

use serde::{Deserialize, Serialize};

use crate::dynamics::rest_force;
use crate::error::{Error, Result};
use crate::params::DerivedParams;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const MAX_NEWTON_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    L4,
    L5,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::L4 => 1.0,
            Branch::L5 => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Series,
    EpsilonSeries,
    Refined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub x: f64,
    pub y: f64,
    pub branch: Branch,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftConstants {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub point: EquilibriumPoint,
    pub iterations: usize,
    pub residual_ux: f64,
    pub residual_uy: f64,
}

/// First-order closed form for L4/L5 including the drag and oblateness
/// corrections, with `x0 = delta^2/2 - mu` and `y0 = +-delta (1 - delta^2/4)^(1/2)`.
pub fn series_point(d: &DerivedParams, branch: Branch) -> Result<EquilibriumPoint> {
    let mu = d.mu;
    let dl2 = d.delta * d.delta;
    let x0 = 0.5 * dl2 - mu;
    let y0 = branch.sign() * d.delta * (1.0 - 0.25 * dl2).sqrt();
    let nw1 = d.nw1();
    let denom = 3.0 * mu * (1.0 - mu);

    if nw1 > 0.0 && (mu < 1e-6 || (denom * y0).abs() < 1e-300) {
        return Err(Error::Singular(format!(
            "drag correction divides by mu(1-mu)y0 = {:e}",
            mu * (1.0 - mu) * y0
        )));
    }

    let drag_x = if nw1 > 0.0 {
        nw1 * ((1.0 - mu) * (1.0 + 2.5 * d.a2) + mu * (1.0 - 0.5 * d.a2) * 0.5 * dl2) / (denom * y0)
    } else {
        0.0
    };
    // x0 distributed over the braces so x0 = 0 needs no division
    let x = x0 - drag_x - 0.5 * dl2 * d.a2;

    let drag_y = if nw1 > 0.0 {
        nw1 * dl2
            * (2.0 * mu - 1.0 - mu * (1.0 - 1.5 * d.a2) * 0.5 * dl2 + 3.5 * (1.0 - mu) * d.a2)
            / (denom * y0.powi(3))
    } else {
        0.0
    };
    let inner = 1.0 - drag_y - dl2 * (1.0 - 0.5 * dl2) * d.a2 / (y0 * y0);
    if inner <= 0.0 {
        return Err(Error::Singular(format!(
            "negative radicand {inner:e} in the ordinate series"
        )));
    }
    Ok(EquilibriumPoint { x, y: y0 * inner.sqrt(), branch, method: Method::Series })
}

/// L4 as a polynomial in gamma, epsilon, A2 and nW1.
pub fn epsilon_form_point(d: &DerivedParams) -> EquilibriumPoint {
    let (g, e, a2, nw) = (d.gamma, d.epsilon, d.a2, d.nw1());
    let x = g / 2.0 - e / 3.0 - a2 / 2.0 + a2 * e / 3.0
        - (9.0 + g) / (6.0 * SQRT3) * nw
        - 4.0 * g * e / (27.0 * SQRT3) * nw;
    let y = SQRT3 / 2.0
        * (1.0 - 2.0 * e / 9.0 - a2 / 3.0 - 2.0 * a2 * e / 9.0 + (1.0 + g) / (9.0 * SQRT3) * nw
            - 4.0 * g * e / (27.0 * SQRT3) * nw);
    EquilibriumPoint { x, y, branch: Branch::L4, method: Method::EpsilonSeries }
}

/// `a = x* + mu`, `b = y*` in the epsilon form.
pub fn shift_constants(d: &DerivedParams) -> ShiftConstants {
    let (g, e, a2, nw) = (d.gamma, d.epsilon, d.a2, d.nw1());
    let a = 0.5
        * (1.0 - 2.0 * e / 3.0 - a2 + 2.0 * a2 * e / 3.0 - (9.0 + g) / (3.0 * SQRT3) * nw
            - 8.0 * g * e / (27.0 * SQRT3) * nw);
    let b = SQRT3 / 2.0
        * (1.0 - 2.0 * e / 9.0 - a2 / 3.0 - 2.0 * a2 * e / 9.0 + (1.0 + g) / (9.0 * SQRT3) * nw
            - 4.0 * g * e / (27.0 * SQRT3) * nw);
    ShiftConstants { a, b }
}

/// Newton iteration on the rest-state force with a central-difference Jacobian.
pub fn refine_point(start: &EquilibriumPoint, d: &DerivedParams, tol: f64) -> Result<EquilibriumPoint> {
    refine_point_traced(start, d, tol).map(|r| r.point)
}

pub fn refine_point_traced(start: &EquilibriumPoint, d: &DerivedParams, tol: f64) -> Result<Refinement> {
    if !(tol > 0.0) {
        return Err(Error::Domain { name: "tol", value: tol, reason: "must be positive" });
    }
    let (mut x, mut y) = (start.x, start.y);
    let mut f = rest_force(x, y, d)?;
    let mut iterations = 0;
    while f.0.abs().max(f.1.abs()) > tol {
        if iterations == MAX_NEWTON_ITER {
            return Err(Error::NoConvergence { iterations, residual: f.0.abs().max(f.1.abs()) });
        }
        let hx = 1e-7 * x.abs().max(1.0);
        let hy = 1e-7 * y.abs().max(1.0);
        let (fxp, fxm) = (rest_force(x + hx, y, d)?, rest_force(x - hx, y, d)?);
        let (fyp, fym) = (rest_force(x, y + hy, d)?, rest_force(x, y - hy, d)?);
        let j11 = (fxp.0 - fxm.0) / (2.0 * hx);
        let j21 = (fxp.1 - fxm.1) / (2.0 * hx);
        let j12 = (fyp.0 - fym.0) / (2.0 * hy);
        let j22 = (fyp.1 - fym.1) / (2.0 * hy);
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-14 * (j11.abs() + j22.abs()).max(1e-300).powi(2) || !det.is_finite() {
            return Err(Error::Singular(format!("Newton Jacobian determinant {det:e}")));
        }
        x -= (j22 * f.0 - j12 * f.1) / det;
        y -= (-j21 * f.0 + j11 * f.1) / det;
        f = rest_force(x, y, d)?;
        iterations += 1;
    }
    Ok(Refinement {
        point: EquilibriumPoint { x, y, branch: start.branch, method: Method::Refined },
        iterations,
        residual_ux: f.0,
        residual_uy: f.1,
    })
}

/// Refined point starting from the series, the usual entry point.
pub fn refined_equilibrium(d: &DerivedParams, branch: Branch, tol: f64) -> Result<Refinement> {
    refine_point_traced(&series_point(d, branch)?, d, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp(mu: f64, e: f64, a2: f64, w1: f64) -> DerivedParams {
        DerivedParams::from_components(mu, e, a2, w1).unwrap()
    }

    #[test]
    fn classical_points_agree() {
        let d = dp(0.1, 0.0, 0.0, 0.0);
        let s = series_point(&d, Branch::L4).unwrap();
        assert!((s.x - 0.4).abs() < 1e-15);
        assert!((s.y - SQRT3 / 2.0).abs() < 1e-15);
        let e = epsilon_form_point(&d);
        assert!((e.x - d.gamma / 2.0).abs() < 1e-15 && (e.y - SQRT3 / 2.0).abs() < 1e-15);
        let r = refine_point_traced(&s, &d, 1e-12).unwrap();
        assert!(r.iterations <= 1);
        assert!((r.point.x - 0.4).abs() < 1e-14 && (r.point.y - SQRT3 / 2.0).abs() < 1e-14);
        let sc = shift_constants(&d);
        assert_eq!((sc.a, sc.b), (0.5, SQRT3 / 2.0));
    }

    #[test]
    fn l5_mirrors_l4_without_drag() {
        for &(mu, e, a2) in &[(0.01, 0.0005, 0.0), (0.2, 0.01, 0.003), (0.5, 0.0, 0.01)] {
            let d = dp(mu, e, a2, 0.0);
            let p4 = series_point(&d, Branch::L4).unwrap();
            let p5 = series_point(&d, Branch::L5).unwrap();
            assert_eq!(p4.x, p5.x);
            assert_eq!(p4.y, -p5.y);
            assert!(p4.y > 0.0 && p5.y < 0.0);
        }
    }

    #[test]
    fn small_radiation_series_point() {
        let d = dp(0.01, 0.0005, 0.0, 0.0);
        let p = series_point(&d, Branch::L4).unwrap();
        let delta = 0.9995f64.cbrt();
        assert!((p.x - (delta * delta / 2.0 - 0.01)).abs() < 1e-15);
        let r = refine_point(&p, &d, 1e-14).unwrap();
        // with no oblateness and no drag the series is the exact point
        assert!((r.x - p.x).abs() < 1e-12 && (r.y - p.y).abs() < 1e-12);
    }

    #[test]
    fn epsilon_form_reads_off() {
        let d = dp(0.2, 0.01, 0.0, 0.0);
        let p = epsilon_form_point(&d);
        assert!((p.x - (0.3 - 0.01 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn shift_constants_substitution() {
        let d = dp(0.2, 0.03, 0.0, 0.0);
        let s = shift_constants(&d);
        assert!((s.a - 0.49).abs() < 1e-15);
        assert!((s.b - SQRT3 / 2.0 * (1.0 - 0.03 * 2.0 / 9.0)).abs() < 1e-15);
        let e = epsilon_form_point(&d);
        assert!((s.a - d.mu - e.x).abs() < 1e-15 && (s.b - e.y).abs() < 1e-15);
    }

    #[test]
    fn drag_singular_for_tiny_mu() {
        let d = dp(1e-7, 0.01, 0.0, 1e-4);
        assert!(matches!(series_point(&d, Branch::L4), Err(Error::Singular(_))));
        assert!(series_point(&dp(1e-7, 0.01, 0.0, 0.0), Branch::L4).is_ok());
    }

    #[test]
    fn refine_meets_residual_quickly() {
        for &(mu, e, a2, w1) in &[
            (0.01, 0.01, 0.0, 0.0),
            (0.1, 0.005, 0.01, 1e-3),
            (0.3, 0.01, 0.002, 5e-3),
            (0.03, 0.0, 0.01, 0.0),
        ] {
            let d = dp(mu, e, a2, w1);
            let r = refined_equilibrium(&d, Branch::L4, 1e-12).unwrap();
            assert!(r.residual_ux.abs() <= 1e-12 && r.residual_uy.abs() <= 1e-12);
            assert!(r.iterations <= 8, "{} iterations", r.iterations);
            assert_eq!(r.point.method, Method::Refined);
            assert!(r.point.y > 0.0);
        }
    }

    #[test]
    fn series_error_is_second_order() {
        // fixed constant C over a grid: |refined - series| <= C * m^2
        let mut worst: f64 = 0.0;
        for &mu in &[0.05, 0.1, 0.3, 0.45] {
            for &m in &[1e-2, 3e-3, 1e-3] {
                let d = dp(mu, m, m, m);
                let s = series_point(&d, Branch::L4).unwrap();
                let r = refine_point(&s, &d, 1e-14).unwrap();
                let err = (r.x - s.x).hypot(r.y - s.y);
                let scale = d.epsilon.powi(2) + d.a2.powi(2) + d.nw1().powi(2);
                worst = worst.max(err / scale);
            }
        }
        assert!(worst < 200.0, "C = {worst}");
    }

    #[test]
    fn newton_gives_up() {
        let d = dp(0.1, 0.01, 0.0, 0.0);
        let s = series_point(&d, Branch::L4).unwrap();
        match refine_point(&s, &d, 1e-300) {
            Err(Error::NoConvergence { iterations, .. }) => assert_eq!(iterations, MAX_NEWTON_ITER),
            other => panic!("unexpected {other:?}"),
        }
    }
}
