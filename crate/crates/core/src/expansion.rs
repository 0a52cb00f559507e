//! Power-series expansion of the Lagrangian about L4.
//!
//! The closed-form quadratic (`E`, `F`, `G`) and cubic (`T1`..`T5`)
//! coefficients are evaluated exactly as tabulated. [`numeric_taylor_oracle`]
//! expands the exact Lagrangian about the refined equilibrium with truncated
//! Taylor arithmetic and is the independent reference for those tables.
//!
//! Conventions: `L2 = v^2/2 + n(x vy - vx y) + n^2 (x^2+y^2)/2 - E x^2 - F y^2 - G x y`
//! and `L3 = -(1/3!) {T1 x^3 + 3 T2 x^2 y + 3 T3 x y^2 + T4 y^3 + 6 T5}`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::equilibria::{refined_equilibrium, shift_constants, Branch, EquilibriumPoint};
use crate::error::Result;
use crate::params::DerivedParams;
use crate::taylor::Jet;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoeffs {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "G")]
    pub g: f64,
}

/// Position-quadratic, velocity-linear drag functional about `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DragCubic {
    #[serde(rename = "W1")]
    pub w1: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoeffs {
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    #[serde(rename = "T3")]
    pub t3: f64,
    #[serde(rename = "T4")]
    pub t4: f64,
    #[serde(rename = "T5")]
    pub t5: DragCubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H2Form {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub n: f64,
}

pub fn quadratic_coeffs(d: &DerivedParams) -> QuadraticCoeffs {
    let (g, e, a2, nw) = (d.gamma, d.epsilon, d.a2, d.nw1());
    let s3 = SQRT3;
    let ee = (2.0 - 6.0 * e - 3.0 * a2 - 31.0 * a2 * e / 2.0 - (69.0 + g) / (6.0 * s3) * nw
        + 2.0 * (307.0 + 75.0 * g) * e / (27.0 * s3) * nw
        + g * (2.0 * e + 12.0 * a2 + a2 * e / 3.0 + (199.0 + 17.0 * g) / (6.0 * s3) * nw
            - 2.0 * (226.0 + 99.0 * g) * e / (27.0 * s3) * nw))
        / 16.0;
    let ff = -(10.0 - 2.0 * e + 21.0 * a2 - 717.0 * a2 * e / 18.0 - (67.0 + 19.0 * g) / (6.0 * s3) * nw
        + 2.0 * (413.0 - 3.0 * g) * e / (27.0 * s3) * nw
        + g * (6.0 * e - 293.0 * a2 * e / 18.0 + (187.0 + 27.0 * g) / (6.0 * s3) * nw
            - 4.0 * (247.0 + 3.0 * g) * e / (27.0 * s3) * nw))
        / 16.0;
    let gg = s3 / 8.0
        * (2.0 * e + 6.0 * a2 - 37.0 * a2 * e / 2.0 - (13.0 + g) / (2.0 * s3) * nw
            + 2.0 * (79.0 - 7.0 * g) * e / (27.0 * s3) * nw
            - g * (6.0 - e / 3.0 + 13.0 * a2 - 33.0 * a2 * e / 2.0 + (11.0 - g) / (2.0 * s3) * nw
                - (186.0 - g) * e / (9.0 * s3) * nw));
    QuadraticCoeffs { e: ee, f: ff, g: gg }
}

pub fn cubic_coeffs(d: &DerivedParams) -> CubicCoeffs {
    let (g, e, a2, nw) = (d.gamma, d.epsilon, d.a2, d.nw1());
    let s3 = SQRT3;
    let t1 = 3.0 / 16.0
        * (16.0 / 3.0 * e + 6.0 * a2 - 979.0 / 18.0 * a2 * e + (143.0 + 9.0 * g) / (6.0 * s3) * nw
            + (459.0 + 376.0 * g) / (27.0 * s3) * nw * e
            + g * (14.0 + 4.0 * e / 3.0 + 25.0 * a2 - 1507.0 / 18.0 * a2 * e
                - (215.0 + 29.0 * g) / (6.0 * s3) * nw
                - 2.0 * (1174.0 + 169.0 * g) / (27.0 * s3) * nw * e));
    let t2 = 3.0 * s3 / 16.0
        * (14.0 - 16.0 / 3.0 * e + a2 / 3.0 - 367.0 / 18.0 * a2 * e
            + 115.0 * (1.0 + g) / (18.0 * s3) * nw
            - (959.0 - 136.0 * g) / (27.0 * s3) * nw * e
            + g * (32.0 * e / 3.0 + 40.0 * a2 - 382.0 / 9.0 * a2 * e
                + (511.0 + 53.0 * g) / (6.0 * s3) * nw
                - (2519.0 - 24.0 * g) / (27.0 * s3) * nw * e));
    let t3 = -9.0 / 16.0
        * (8.0 / 3.0 * e + 203.0 * a2 / 6.0 - 625.0 / 54.0 * a2 * e
            - (105.0 + 15.0 * g) / (18.0 * s3) * nw
            - (403.0 - 114.0 * g) / (81.0 * s3) * nw * e
            + g * (2.0 - 4.0 * e / 9.0 + 55.0 * a2 / 2.0 - 797.0 / 54.0 * a2 * e
                + (197.0 + 23.0 * g) / (18.0 * s3) * nw
                - (211.0 - 32.0 * g) / (81.0 * s3) * nw * e));
    let t4 = -9.0 * s3 / 16.0
        * (2.0 - 8.0 / 3.0 * e + 23.0 * a2 / 3.0 - 44.0 * a2 * e
            - (37.0 + g) / (18.0 * s3) * nw
            - (219.0 + 253.0 * g) / (81.0 * s3) * nw * e
            + g * (4.0 * e + 88.0 / 27.0 * a2 * e + (241.0 + 45.0 * g) / (18.0 * s3) * nw
                - (1558.0 - 126.0 * g) / (81.0 * s3) * nw * e));
    let sc = shift_constants(d);
    CubicCoeffs { t1, t2, t3, t4, t5: DragCubic { w1: d.w1, a: sc.a, b: sc.b } }
}

impl DragCubic {
    fn prefactor(&self) -> f64 {
        let s = self.a * self.a + self.b * self.b;
        self.w1 / (2.0 * s.powi(3))
    }

    /// The tabulated functional, including its position-linear piece.
    pub fn eval_full(&self, x: f64, y: f64, vx: f64, vy: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        let s = a * a + b * b;
        self.prefactor()
            * ((a * vx + b * vy) * (3.0 * (a * x + b * y) - (b * x - a * y).powi(2))
                - 2.0 * (x * vx + y * vy) * (a * x + b * y) * s)
    }

    /// Position-quadratic part, the piece that belongs to the cubic Lagrangian.
    pub fn eval(&self, x: f64, y: f64, vx: f64, vy: f64) -> f64 {
        let [cx, cy] = self.velocity_coeffs();
        vx * (cx[0] * x * x + cx[1] * x * y + cx[2] * y * y)
            + vy * (cy[0] * x * x + cy[1] * x * y + cy[2] * y * y)
    }

    /// `[[vx: x^2, xy, y^2], [vy: x^2, xy, y^2]]` coefficients of [`Self::eval`].
    pub fn velocity_coeffs(&self) -> [[f64; 3]; 2] {
        let (a, b) = (self.a, self.b);
        let s = a * a + b * b;
        let c = self.prefactor();
        [
            [
                c * (-a * b * b - 2.0 * a * s),
                c * (2.0 * a * a * b - 2.0 * b * s),
                c * (-a * a * a),
            ],
            [
                c * (-b * b * b),
                c * (2.0 * a * b * b - 2.0 * a * s),
                c * (-a * a * b - 2.0 * b * s),
            ],
        ]
    }
}

impl CubicCoeffs {
    /// `L3` at a phase-space point of the shifted frame.
    pub fn l3(&self, x: f64, y: f64, vx: f64, vy: f64) -> f64 {
        -(self.t1 * x.powi(3) + 3.0 * self.t2 * x * x * y + 3.0 * self.t3 * x * y * y
            + self.t4 * y.powi(3))
            / 6.0
            - self.t5.eval(x, y, vx, vy)
    }
}

pub fn h2_form(d: &DerivedParams) -> H2Form {
    let q = quadratic_coeffs(d);
    H2Form { e: q.e, f: q.f, g: q.g, n: d.n }
}

/// Canonical momenta `(p_x, p_y)` at an absolute rotating-frame state.
pub fn momenta(d: &DerivedParams, x: f64, y: f64, vx: f64, vy: f64) -> (f64, f64) {
    let r1sq = (x + d.mu).powi(2) + y * y;
    (
        vx - d.n * y + d.w1 * (x + d.mu) / (2.0 * r1sq),
        vy + d.n * x + d.w1 * y / (2.0 * r1sq),
    )
}

impl H2Form {
    pub fn from_coeffs(q: &QuadraticCoeffs, n: f64) -> Self {
        H2Form { e: q.e, f: q.f, g: q.g, n }
    }

    pub fn value(&self, x: f64, y: f64, px: f64, py: f64) -> f64 {
        0.5 * (px * px + py * py) + self.n * (y * px - x * py)
            + self.e * x * x
            + self.f * y * y
            + self.g * x * y
    }

    /// Matrix of Hamilton's equations for `(x, y, p_x, p_y)`.
    pub fn system_matrix(&self) -> [[f64; 4]; 4] {
        let n = self.n;
        [
            [0.0, n, 1.0, 0.0],
            [-n, 0.0, 0.0, 1.0],
            [-2.0 * self.e, -self.g, 0.0, n],
            [-self.g, -2.0 * self.f, -n, 0.0],
        ]
    }
}

/// Exponents of `(x, y, vx, vy)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Monomial(pub [u8; 4]);

impl Monomial {
    pub fn degree(&self) -> u8 {
        self.0.iter().sum()
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = ["x", "y", "vx", "vy"];
        let mut parts = Vec::new();
        for (k, &e) in self.0.iter().enumerate() {
            match e {
                0 => {}
                1 => parts.push(names[k].to_string()),
                _ => parts.push(format!("{}^{}", names[k], e)),
            }
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorTable {
    pub center: EquilibriumPoint,
    pub order: u8,
    pub n: f64,
    pub coeffs: BTreeMap<Monomial, f64>,
}

impl TaylorTable {
    pub fn coeff(&self, x: u8, y: u8, vx: u8, vy: u8) -> f64 {
        self.coeffs.get(&Monomial([x, y, vx, vy])).copied().unwrap_or(0.0)
    }

    /// `E`, `F`, `G` read off the exact quadratic part.
    pub fn quadratic(&self) -> QuadraticCoeffs {
        let h = 0.5 * self.n * self.n;
        QuadraticCoeffs {
            e: h - self.coeff(2, 0, 0, 0),
            f: h - self.coeff(0, 2, 0, 0),
            g: -self.coeff(1, 1, 0, 0),
        }
    }

    /// `[T1, T2, T3, T4]` read off the exact cubic part.
    pub fn cubic_t(&self) -> [f64; 4] {
        [
            -6.0 * self.coeff(3, 0, 0, 0),
            -2.0 * self.coeff(2, 1, 0, 0),
            -2.0 * self.coeff(1, 2, 0, 0),
            -6.0 * self.coeff(0, 3, 0, 0),
        ]
    }

    /// Drag-term coefficients in the layout of [`DragCubic::velocity_coeffs`].
    pub fn drag_velocity_coeffs(&self) -> [[f64; 3]; 2] {
        let mut out = [[0.0; 3]; 2];
        for (v, row) in out.iter_mut().enumerate() {
            let (vx, vy) = if v == 0 { (1, 0) } else { (0, 1) };
            *row = [
                -self.coeff(2, 0, vx, vy),
                -self.coeff(1, 1, vx, vy),
                -self.coeff(0, 2, vx, vy),
            ];
        }
        out
    }
}

/// Expands the exact Lagrangian about the refined L4 in `(x, y, vx, vy)` up
/// to total degree `order` (2 to 4).
pub fn numeric_taylor_oracle(d: &DerivedParams, order: u8) -> Result<TaylorTable> {
    assert!((2..=4).contains(&order), "order must be 2, 3 or 4");
    let center = refined_equilibrium(d, Branch::L4, 1e-14)?.point;
    let (xs, ys) = (center.x, center.y);
    let xa = Jet::var_x(xs);
    let ya = Jet::var_y(ys);
    let x1 = Jet::var_x(xs + d.mu);
    let x2 = Jet::var_x(xs + d.mu - 1.0);
    let r1sq = x1 * x1 + ya * ya;
    let r2sq = x2 * x2 + ya * ya;

    let n = d.n;
    let positional = (xa * xa + ya * ya).scale(0.5 * n * n)
        + r1sq.powf(-0.5).scale((1.0 - d.mu) * d.q1)
        + r2sq.powf(-0.5).scale(d.mu)
        + r2sq.powf(-1.5).scale(0.5 * d.mu * d.a2)
        - Jet::atan2(ys, xs + d.mu).scale(n * d.w1);
    let inv_r1sq = r1sq.powf(-1.0);
    let vx_coef = ya.scale(-n) + (x1 * inv_r1sq).scale(0.5 * d.w1);
    let vy_coef = xa.scale(n) + (ya * inv_r1sq).scale(0.5 * d.w1);

    let mut coeffs = BTreeMap::new();
    let ord = order as usize;
    let mut put = |m: [u8; 4], v: f64| {
        if v != 0.0 {
            coeffs.insert(Monomial(m), v);
        }
    };
    for i in 0..=ord {
        for j in 0..=ord - i {
            put([i as u8, j as u8, 0, 0], positional.coeff(i, j));
            if i + j < ord {
                put([i as u8, j as u8, 1, 0], vx_coef.coeff(i, j));
                put([i as u8, j as u8, 0, 1], vy_coef.coeff(i, j));
            }
        }
    }
    put([0, 0, 2, 0], 0.5);
    put([0, 0, 0, 2], 0.5);
    Ok(TaylorTable { center, order, n, coeffs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDiff {
    pub name: String,
    pub printed: f64,
    pub oracle: f64,
    pub abs_diff: f64,
}

/// Tabulated `E, F, G, T1..T4` against the Taylor oracle.
pub fn compare_with_oracle(d: &DerivedParams) -> Result<Vec<CoefficientDiff>> {
    let table = numeric_taylor_oracle(d, 3)?;
    let q = quadratic_coeffs(d);
    let c = cubic_coeffs(d);
    let oq = table.quadratic();
    let ot = table.cubic_t();
    let rows = [
        ("E", q.e, oq.e),
        ("F", q.f, oq.f),
        ("G", q.g, oq.g),
        ("T1", c.t1, ot[0]),
        ("T2", c.t2, ot[1]),
        ("T3", c.t3, ot[2]),
        ("T4", c.t4, ot[3]),
    ];
    Ok(rows
        .iter()
        .map(|&(name, printed, oracle)| CoefficientDiff {
            name: name.to_string(),
            printed,
            oracle,
            abs_diff: (printed - oracle).abs(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{accel, State};

    fn dp(mu: f64, e: f64, a2: f64, w1: f64) -> DerivedParams {
        DerivedParams::from_components(mu, e, a2, w1).unwrap()
    }

    #[test]
    fn classical_quadratic_limits() {
        for &mu in &[0.01, 0.2, 0.5] {
            let d = dp(mu, 0.0, 0.0, 0.0);
            let q = quadratic_coeffs(&d);
            assert!((q.e - 0.125).abs() < 1e-15);
            assert!((q.f + 0.625).abs() < 1e-15);
            assert!((q.g - SQRT3 / 8.0 * (-6.0 * d.gamma)).abs() < 1e-15);
        }
    }

    #[test]
    fn classical_cubic_limits() {
        let d = dp(0.1, 0.0, 0.0, 0.0);
        let c = cubic_coeffs(&d);
        assert!((c.t1 - 42.0 * d.gamma / 16.0).abs() < 1e-14);
        assert!((c.t4 + 9.0 * SQRT3 / 8.0).abs() < 1e-14);
    }

    #[test]
    fn drag_functional_vanishes_without_drag() {
        let c = cubic_coeffs(&dp(0.1, 0.02, 0.01, 0.0));
        assert_eq!(c.t5.eval_full(0.3, -0.2, 0.5, 0.7), 0.0);
        assert_eq!(c.t5.eval(0.3, -0.2, 0.5, 0.7), 0.0);
    }

    #[test]
    fn drag_functional_structure() {
        // linear in velocity, homogeneous quadratic in position
        let t5 = cubic_coeffs(&dp(0.1, 0.02, 0.01, 3e-3)).t5;
        let pts = [(0.3, -0.2, 0.5, 0.7), (-0.1, 0.4, -0.9, 0.2), (0.25, 0.25, 0.1, -0.3)];
        for &(x, y, vx, vy) in &pts {
            let f = t5.eval(x, y, vx, vy);
            assert!((t5.eval(x, y, 2.0 * vx, 2.0 * vy) - 2.0 * f).abs() < 1e-15);
            assert!((t5.eval(3.0 * x, 3.0 * y, vx, vy) - 9.0 * f).abs() < 1e-14);
            let sum = t5.eval(x, y, vx + 0.3, vy - 0.1);
            assert!((sum - f - t5.eval(x, y, 0.3, -0.1)).abs() < 1e-15);
            // eval is the position-even part of the full functional
            let even = 0.5 * (t5.eval_full(x, y, vx, vy) + t5.eval_full(-x, -y, vx, vy));
            assert!((even - f).abs() < 1e-14, "{even} vs {f}");
        }
    }

    #[test]
    fn oracle_classical_quadratic_matches() {
        for &mu in &[0.01, 0.2] {
            let d = dp(mu, 0.0, 0.0, 0.0);
            let t = numeric_taylor_oracle(&d, 3).unwrap();
            let q = t.quadratic();
            assert!((q.e - 0.125).abs() < 1e-12);
            assert!((q.f + 0.625).abs() < 1e-12);
            assert!((q.g + 3.0 * SQRT3 / 4.0 * d.gamma).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_classical_third_derivatives() {
        // third derivatives of sum m_i / r_i at the equilateral point
        let d = dp(0.2, 0.0, 0.0, 0.0);
        let t = numeric_taylor_oracle(&d, 3).unwrap().cubic_t();
        let g = d.gamma;
        assert!((t[0] + 21.0 * g / 8.0).abs() < 1e-12);
        assert!((t[1] - 3.0 * SQRT3 / 8.0).abs() < 1e-12);
        assert!((t[2] - 9.0 * (2.0 + 4.0 * g) / 16.0 * 0.0 - 9.0 * (1.0 + 2.0 * g) / 8.0).abs() < 1e-12);
        assert!((t[3] - 9.0 * SQRT3 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_velocity_terms() {
        let d = dp(0.1, 0.0, 0.0, 0.0);
        let t = numeric_taylor_oracle(&d, 2).unwrap();
        assert_eq!(t.coeff(0, 0, 2, 0), 0.5);
        assert!((t.coeff(1, 0, 0, 1) - 1.0).abs() < 1e-15);
        assert!((t.coeff(0, 1, 1, 0) + 1.0).abs() < 1e-15);
        assert_eq!(t.coeff(1, 1, 1, 0), 0.0);
    }

    #[test]
    fn oracle_against_finite_differences_of_potential() {
        // second derivative of U1 - nW1 atan2 at the refined point
        let d = dp(0.05, 0.03, 0.01, 2e-3);
        let t = numeric_taylor_oracle(&d, 3).unwrap();
        let (x, y) = (t.center.x, t.center.y);
        let h = 1e-4;
        let ux = |x: f64, y: f64| crate::dynamics::rest_force(x, y, &d).unwrap().0;
        let uxx = (ux(x + h, y) - ux(x - h, y)) / (2.0 * h);
        assert!((2.0 * t.coeff(2, 0, 0, 0) - uxx).abs() < 1e-7, "{} {}", 2.0 * t.coeff(2, 0, 0, 0), uxx);
        let uxxx = (ux(x + h, y) - 2.0 * ux(x, y) + ux(x - h, y)) / (h * h);
        assert!((6.0 * t.coeff(3, 0, 0, 0) - uxxx).abs() < 1e-5);
    }

    #[test]
    fn h2_vanishes_at_origin() {
        let h = h2_form(&dp(0.1, 0.01, 0.0, 0.0));
        assert_eq!(h.value(0.0, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn h2_flow_is_linearized_motion() {
        // classical: tabulated E, F, G are exact, so Hamilton's equations of
        // H2 must reproduce the Jacobian of the full acceleration
        let d = dp(0.03, 0.0, 0.0, 0.0);
        let p = refined_equilibrium(&d, Branch::L4, 1e-14).unwrap().point;
        let m = h2_form(&d).system_matrix();
        let h = 1e-6;
        let probe = |dx: f64, dy: f64| accel(&State::at_rest(p.x + dx, p.y + dy), &d).unwrap();
        let (axp, ayp) = probe(h, 0.0);
        let (axm, aym) = probe(-h, 0.0);
        let dax_dx = (axp - axm) / (2.0 * h);
        let day_dx = (ayp - aym) / (2.0 * h);
        // xdd = 2n vy + (n^2 - 2E) x - G y from H2
        let n = d.n;
        let from_h2_ax = n * n - 2.0 * (-m[2][0] / 2.0);
        assert!((dax_dx - from_h2_ax).abs() < 1e-7);
        assert!((day_dx - m[3][0]).abs() < 1e-7);
    }
}
