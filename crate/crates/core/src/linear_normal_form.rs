//! Linear stability about L4: characteristic quartic, critical mass,
//! frequencies, the Whittaker transformation and the first-order orbit.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::expansion::{quadratic_coeffs, H2Form, QuadraticCoeffs};
use crate::params::DerivedParams;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const RESONANCE_TOL: f64 = 1e-9;

pub const MU_CRIT_0: f64 = 0.0385208965045513718;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequencies {
    pub omega1: f64,
    pub omega2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    #[serde(rename = "D")]
    pub discriminant: f64,
    pub stable: bool,
    pub mu_crit: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhittakerTransform {
    #[serde(rename = "J13")]
    pub j13: f64,
    #[serde(rename = "J14")]
    pub j14: f64,
    #[serde(rename = "J21")]
    pub j21: f64,
    #[serde(rename = "J22")]
    pub j22: f64,
    #[serde(rename = "J23")]
    pub j23: f64,
    #[serde(rename = "J24")]
    pub j24: f64,
    pub l1: f64,
    pub l2: f64,
    pub k1: f64,
    pub k2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionAngle {
    #[serde(rename = "I1")]
    pub i1: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    pub phi1: f64,
    pub phi2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaResiduals {
    /// One residual per frequency, `omega_j` form.
    pub res_j: [f64; 2],
    /// `u = omega1 omega2` form.
    pub res_u: f64,
}

fn quartic_terms(q: &QuadraticCoeffs, n: f64) -> (f64, f64) {
    let n2 = n * n;
    (
        2.0 * (q.e + q.f + n2),
        4.0 * q.e * q.f - q.g * q.g + n2 * n2 - 2.0 * n2 * (q.e + q.f),
    )
}

pub fn discriminant(q: &QuadraticCoeffs, n: f64) -> f64 {
    let (b, c) = quartic_terms(q, n);
    b * b - 4.0 * c
}

/// The two values of `lambda^2`, larger magnitude first when real.
pub fn lambda_squared(q: &QuadraticCoeffs, n: f64) -> [Complex64; 2] {
    let (b, c) = quartic_terms(q, n);
    let sq = Complex64::new(b * b - 4.0 * c, 0.0).sqrt();
    // stable cancellation-free pair
    let big = if b >= 0.0 { -(b + sq) / 2.0 } else { (-b + sq) / 2.0 };
    let other = if big.norm() == 0.0 { Complex64::new(0.0, 0.0) } else { c / big };
    [big, other]
}

/// `[+sqrt(s1), -sqrt(s1), +sqrt(s2), -sqrt(s2)]` for the two `lambda^2` values.
pub fn characteristic_roots(q: &QuadraticCoeffs, n: f64) -> [Complex64; 4] {
    let [s1, s2] = lambda_squared(q, n);
    let (r1, r2) = (s1.sqrt(), s2.sqrt());
    [r1, -r1, r2, -r2]
}

/// Eigenvalues of the linear Hamiltonian system of `H2`.
pub fn matrix_eigenvalues(q: &QuadraticCoeffs, n: f64) -> [Complex64; 4] {
    let m = H2Form::from_coeffs(q, n).system_matrix();
    let a = Matrix4::from_fn(|i, j| m[i][j]);
    let ev = a.complex_eigenvalues();
    [ev[0], ev[1], ev[2], ev[3]]
}

/// Tabulated critical mass at the given perturbations.
pub fn mu_crit_printed(d: &DerivedParams) -> f64 {
    let (e, a, w) = (d.epsilon, d.a2, d.nw1());
    MU_CRIT_0 - 0.221895916277307669 * e + 2.1038871010983331 * a + 0.493433373141671349 * e * a
        + 0.704139054372097028 * w
        + 0.401154273957540929 * e * w
}

pub fn stability_with(q: &QuadraticCoeffs, d: &DerivedParams) -> StabilityReport {
    let disc = discriminant(q, d.n);
    let [s1, s2] = lambda_squared(q, d.n);
    let imaginary = |s: Complex64| s.im == 0.0 && s.re < 0.0;
    let mu_crit = mu_crit_printed(d);
    StabilityReport {
        discriminant: disc,
        stable: disc > 0.0 && imaginary(s1) && imaginary(s2),
        mu_crit,
        margin: mu_crit - d.mu,
    }
}

pub fn stability(d: &DerivedParams) -> StabilityReport {
    stability_with(&quadratic_coeffs(d), d)
}

pub fn frequencies_with(q: &QuadraticCoeffs, n: f64) -> Result<Frequencies> {
    let disc = discriminant(q, n);
    let [s1, s2] = lambda_squared(q, n);
    let roots = [(s1.re, s1.im), (s2.re, s2.im)];
    if disc.abs() < 1e-14 {
        return Err(Error::Resonance(format!("double root lambda^2 = {:e}, D = {disc:e}", s1.re)));
    }
    if !(disc > 0.0 && s1.re < 0.0 && s2.re < 0.0) {
        return Err(Error::Unstable { roots });
    }
    let (a, b) = ((-s1.re).sqrt(), (-s2.re).sqrt());
    Ok(Frequencies { omega1: a.max(b), omega2: a.min(b) })
}

pub fn frequencies(d: &DerivedParams) -> Result<Frequencies> {
    frequencies_with(&quadratic_coeffs(d), d.n)
}

/// Tabulated series for `omega1^2 + omega2^2`.
pub fn printed_frequency_sum(d: &DerivedParams) -> f64 {
    let (g, e, a, w, s3) = (d.gamma, d.epsilon, d.a2, d.nw1(), SQRT3);
    1.0 - g * e / 2.0 + 3.0 * g * a / 2.0 + 83.0 * e * a / 12.0 + 299.0 * g * e * a / 144.0
        - w / (24.0 * s3)
        + 5.0 * g * w / (8.0 * s3)
        - 53.0 * e * w / (54.0 * s3)
        - 5.0 * g * g * w / (24.0 * s3)
        + 173.0 * g * e * w / (54.0 * s3)
        - 3.0 * g * g * e * w / (36.0 * s3)
}

/// Tabulated series for `omega1^2 omega2^2`.
pub fn printed_frequency_product(d: &DerivedParams) -> f64 {
    let (g, e, a, w, s3) = (d.gamma, d.epsilon, d.a2, d.nw1(), SQRT3);
    27.0 / 16.0 - 27.0 * g * g / 16.0 + 9.0 * e / 8.0 + 9.0 * g * e / 8.0 - 3.0 * g * g * e / 8.0
        + 117.0 * g * a / 16.0
        - 241.0 * e * a / 32.0
        + 2515.0 * g * e * a / 192.0
        + 35.0 * w / (16.0 * s3)
        - 55.0 * s3 * g * w / 16.0
        - 5.0 * s3 * g * g * w / 4.0
        - 1277.0 * e * w / (288.0 * s3)
        + 5021.0 * g * e * w / (288.0 * s3)
        + 991.0 * g * g * e * w / (48.0 * s3)
}

pub fn gamma_relation_residual(d: &DerivedParams, f: &Frequencies) -> GammaResiduals {
    let (g, e, a, w, s3) = (d.gamma, d.epsilon, d.a2, d.nw1(), SQRT3);
    let c0 = 1.0 + 4.0 * e / 9.0 - 107.0 * e * a / 27.0 + 2.0 * g * e / 3.0 + 1579.0 * g * e * a / 324.0
        - 25.0 * w / (27.0 * s3)
        - 55.0 * g * w / (9.0 * s3)
        + 3809.0 * e * w / (486.0 * s3)
        + 4961.0 * g * e * w / (486.0 * s3);
    let c2 = -16.0 / 27.0 + 32.0 * e / 243.0 + 8.0 * g * e / 27.0 + 208.0 * a / 81.0 - 8.0 * g * a / 27.0
        - 4868.0 * e * a / 729.0
        - 563.0 * g * e * a / 243.0
        + 296.0 * w / (243.0 * s3)
        - 10.0 * g * w / (27.0 * s3)
        - 15892.0 * e * w / (2187.0 * s3)
        - 1864.0 * g * e * w / (729.0 * s3);
    let c4 = 16.0 / 27.0 - 32.0 * e / 243.0 - 208.0 * a / 81.0 - 1880.0 * e * a / 729.0
        - 2720.0 * w / (2187.0 * s3)
        + 49552.0 * e * w / (6561.0 * s3)
        - 80.0 * g * e * w / (2187.0 * s3);
    let rel_j = |om: f64| {
        let o2 = om * om;
        g * g - (c0 + c2 * o2 + c4 * o2 * o2)
    };
    let u = f.omega1 * f.omega2;
    let rhs_u = 1.0 + 4.0 * e / 9.0 - 107.0 * e * a / 27.0 - 25.0 * w / (27.0 * s3)
        + 3809.0 * e * w / (486.0 * s3)
        + g * (2.0 * e / 3.0 + 1579.0 * e * a / 324.0 - 55.0 * g * w / (9.0 * s3)
            + 4961.0 * g * e * w / (486.0 * s3))
        + (-16.0 / 27.0 + 32.0 * e / 243.0 + 208.0 * a / 81.0 - 1880.0 * e * a / 729.0
            + 320.0 * w / (243.0 * s3)
            - 15856.0 * e * w / (2187.0 * s3))
            * u
            * u;
    GammaResiduals { res_j: [rel_j(f.omega1), rel_j(f.omega2)], res_u: g * g - rhs_u }
}

/// The six tabulated entries of the Whittaker matrix.
pub fn whittaker_matrix(d: &DerivedParams, f: &Frequencies) -> Result<WhittakerTransform> {
    let (w1, w2) = (f.omega1, f.omega2);
    for (name, om) in [("omega1", w1), ("omega2", w2)] {
        if (2.0 * om * om - 1.0).abs() < RESONANCE_TOL {
            return Err(Error::Resonance(format!("{name}^2 = 1/2 makes k vanish")));
        }
    }
    let k1sq = 2.0 * w1 * w1 - 1.0;
    let k2sq = 1.0 - 2.0 * w2 * w2;
    if k1sq <= 0.0 || k2sq <= 0.0 {
        return Err(Error::Resonance(format!(
            "frequency ordering violated: k1^2 = {k1sq:e}, k2^2 = {k2sq:e}"
        )));
    }
    let (k1, k2) = (k1sq.sqrt(), k2sq.sqrt());
    let l1sq = 4.0 * w1 * w1 + 9.0;
    let l2sq = 4.0 * w2 * w2 + 9.0;
    let (l1, l2) = (l1sq.sqrt(), l2sq.sqrt());
    let (g, e, a, w, s3, n) = (d.gamma, d.epsilon, d.a2, d.nw1(), SQRT3, d.n);

    let b1 = |c: f64| e + 45.0 * a / 2.0 - 717.0 * a * e / 36.0 + (67.0 + 19.0 * g) / (12.0 * s3) * w
        - (c - 3.0 * g) / (27.0 * s3) * w * e;
    let b3 = e / 2.0 - 3.0 * a - 73.0 * a * e / 24.0 + (1.0 - 9.0 * g) / (24.0 * s3) * w
        + (53.0 - 39.0 * g) / (54.0 * s3) * w * e;
    let b2 = 3.0 * e - 293.0 * a / 36.0 + (187.0 + 27.0 * g) / (12.0 * s3) * w
        - 2.0 * (247.0 + 3.0 * g) / (27.0 * s3) * w * e;
    let b4 = |c: f64, cg: f64| e - 3.0 * a - 299.0 * a * e / 72.0 - (6.0 - 5.0 * g) / (12.0 * s3) * w
        - (c - cg * g) / (54.0 * s3) * w * e;

    let j13 = l1 / (2.0 * w1 * k1)
        * (1.0 - b1(431.0) / (2.0 * l1sq)
            + g / (2.0 * l1sq)
                * (3.0 * e - 29.0 * a / 36.0 - (187.0 + 27.0 * g) / (12.0 * s3) * w
                    - 2.0 * (247.0 + 3.0 * g) / (27.0 * s3) * w * e)
            - b3 / (2.0 * k1sq)
            - g / (4.0 * k1sq) * b4(266.0, 93.0)
            + e / (4.0 * l1sq * k1sq) * (3.0 * a / 4.0 + (33.0 + 14.0 * g) / (12.0 * s3) * w)
            + g * e / (8.0 * l1sq * k1sq) * (347.0 * a / 36.0 - (43.0 - 8.0 * g) / (4.0 * s3) * w));

    let j14 = l2 / (2.0 * w2 * k2)
        * (1.0 - b1(431.0) / (2.0 * l2sq) - g / (2.0 * l2sq) * b2 - b3 / (2.0 * k2sq)
            + g / (2.0 * k2sq) * b4(268.0, 9.0)
            - e / (4.0 * l2sq * k2sq) * (33.0 * a / 4.0 + (1643.0 - 93.0 * g) / (216.0 * s3) * w)
            + g * e / (4.0 * l2sq * k2sq) * (737.0 * a / 72.0 - (13.0 + 2.0 * g) / s3 * w));

    let j21 = -4.0 * n * w1 / (l1 * k1)
        * (1.0 + b1(413.0) / (2.0 * l1sq) - g / (2.0 * l1sq) * b2 - b3 / (2.0 * k1sq)
            - g / (4.0 * k1sq) * b4(268.0, 93.0)
            + e / (8.0 * l1sq * k1sq) * (33.0 * a / 4.0 + (68.0 - 10.0 * g) / (24.0 * s3) * w)
            + g * e / (8.0 * l1sq * k1sq) * (242.0 * a / 9.0 + (43.0 - 8.0 * g) / (4.0 * s3) * w));

    let j22 = 4.0 * n * w2 / (l2 * k2)
        * (1.0 + b1(413.0) / (2.0 * l2sq) - g / (2.0 * l2sq) * b2 + b3 / (2.0 * k2sq)
            - g / (4.0 * k2sq) * b4(268.0, 93.0)
            + e / (4.0 * l2sq * k2sq) * (33.0 * a / 4.0 + (34.0 + 5.0 * g) / (12.0 * s3) * w)
            + g * e / (8.0 * l2sq * k2sq) * (75.0 * a / 2.0 + (43.0 - 8.0 * g) / (4.0 * s3) * w));

    let head = 2.0 * e + 6.0 * a + 37.0 * a * e / 2.0 - (13.0 + g) / (2.0 * s3) * w
        + 2.0 * (79.0 - 7.0 * g) / (9.0 * s3) * w * e
        - g * (6.0 + 2.0 * e / 3.0 + 13.0 * a - 33.0 * a * e / 2.0 + (11.0 - g) / (2.0 * s3) * w
            - (186.0 - g) / (9.0 * s3) * w * e);
    let c51 = 51.0 * a + (14.0 + 8.0 * g) / (3.0 * s3) * w;
    let c3a = 3.0 * a + (19.0 + 6.0 * g) / (6.0 * s3) * w;
    let c135 = 6.0 * e + 135.0 * a - 808.0 * a * e / 9.0 - (67.0 + 19.0 * g) / (2.0 * s3) * w
        - (755.0 + 19.0 * g) / (9.0 * s3) * w * e;
    let c18 = 3.0 * e - 18.0 * a - 55.0 * a * e / 4.0 - (1.0 - 9.0 * g) / (4.0 * s3) * w
        + (923.0 - 60.0 * g) / (12.0 * s3) * w * e;
    let c34 = (34.0 - 5.0 * g) / (2.0 * s3) * w;

    let j23 = s3 / (4.0 * w1 * l1 * k1)
        * (head + c51 / (2.0 * l1sq) - e / k1sq * c3a - g / (2.0 * l1sq) * c135 - g / (2.0 * k1sq) * c18
            + g * e / (8.0 * l1sq * k1sq) * (9.0 * a / 2.0 + c34));

    // the last two brackets carry l1, k1 as tabulated
    let j24 = s3 / (4.0 * w2 * l2 * k2)
        * (head - c51 / (2.0 * l2sq) - e / k2sq * c3a - g / (2.0 * l2sq) * c135 - g / (2.0 * k1sq) * c18
            - g * e / (4.0 * l1sq * k1sq) * (99.0 * a / 2.0 + c34));

    Ok(WhittakerTransform { j13, j14, j21, j22, j23, j24, l1, l2, k1, k2 })
}

/// Shifted-frame state on the first-order orbit at angles `(phi1, phi2)`,
/// with `phi1' = omega1` and `phi2' = -omega2`.
pub fn orbit_state(f: &Frequencies, j: &WhittakerTransform, aa: &ActionAngle) -> State {
    let (w1, w2) = (f.omega1, f.omega2);
    let (c1, s1) = (aa.phi1.cos(), aa.phi1.sin());
    let (c2, s2) = (aa.phi2.cos(), aa.phi2.sin());
    let ax1 = j.j13 * (2.0 * w1 * aa.i1).sqrt();
    let ax2 = j.j14 * (2.0 * w2 * aa.i2).sqrt();
    let as1 = j.j21 * (2.0 * aa.i1 / w1).sqrt();
    let as2 = j.j22 * (2.0 * aa.i2 / w2).sqrt();
    let ac1 = j.j23 * (2.0 * w1 * aa.i1).sqrt();
    let ac2 = j.j24 * (2.0 * w2 * aa.i2).sqrt();
    State {
        x: ax1 * c1 + ax2 * c2,
        y: as1 * s1 + as2 * s2 + ac1 * c1 + ac2 * c2,
        vx: -ax1 * w1 * s1 + ax2 * w2 * s2,
        vy: as1 * w1 * c1 - as2 * w2 * c2 - ac1 * w1 * s1 + ac2 * w2 * s2,
    }
}

/// `(x(t), y(t))` in the shifted frame.
pub fn first_order_orbit(
    times: &[f64],
    f: &Frequencies,
    j: &WhittakerTransform,
    i1: f64,
    i2: f64,
    phase1: f64,
    phase2: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(i1 >= 0.0) || !(i2 >= 0.0) {
        return Err(Error::Domain { name: "I", value: i1.min(i2), reason: "actions must be non-negative" });
    }
    let mut xs = Vec::with_capacity(times.len());
    let mut ys = Vec::with_capacity(times.len());
    for &t in times {
        let aa = ActionAngle { i1, i2, phi1: f.omega1 * t + phase1, phi2: -f.omega2 * t + phase2 };
        let s = orbit_state(f, j, &aa);
        xs.push(s.x);
        ys.push(s.y);
    }
    Ok((xs, ys))
}

/// `max |H2 - (omega1 I1 - omega2 I2)| / (I1 + I2)` over an action-angle grid,
/// with `H2` and `J` both from the tabulated coefficients.
pub fn normal_form_residual(d: &DerivedParams) -> Result<f64> {
    let q = quadratic_coeffs(d);
    let f = frequencies_with(&q, d.n)?;
    let j = whittaker_matrix(d, &f)?;
    Ok(normal_form_residual_with(&H2Form::from_coeffs(&q, d.n), &f, &j))
}

pub fn normal_form_residual_with(h2: &H2Form, f: &Frequencies, j: &WhittakerTransform) -> f64 {
    let actions = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.3, 1.7), (2.0, 0.5)];
    let steps = 12;
    let mut worst: f64 = 0.0;
    for &(i1, i2) in &actions {
        for a in 0..steps {
            for b in 0..steps {
                let phi1 = std::f64::consts::TAU * a as f64 / steps as f64;
                let phi2 = std::f64::consts::TAU * (b as f64 + 0.37) / steps as f64;
                let s = orbit_state(f, j, &ActionAngle { i1, i2, phi1, phi2 });
                let px = s.vx - h2.n * s.y;
                let py = s.vy + h2.n * s.x;
                let h = h2.value(s.x, s.y, px, py);
                worst = worst.max((h - (f.omega1 * i1 - f.omega2 * i2)).abs() / (i1 + i2));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp(mu: f64, e: f64, a2: f64, w1: f64) -> DerivedParams {
        DerivedParams::from_components(mu, e, a2, w1).unwrap()
    }

    #[test]
    fn classical_lambda_squared() {
        let d = dp(0.01, 0.0, 0.0, 0.0);
        let q = quadratic_coeffs(&d);
        let disc = discriminant(&q, d.n);
        assert!((disc - (1.0 - 27.0 * 0.01 * 0.99)).abs() < 1e-14);
        let [s1, s2] = lambda_squared(&q, d.n);
        let r = disc.sqrt();
        assert!((s1.re + (1.0 + r) / 2.0).abs() < 1e-14);
        assert!((s2.re + (1.0 - r) / 2.0).abs() < 1e-14);
        assert!((s1.re + 0.92799).abs() < 1e-5 && (s2.re + 0.07201).abs() < 1e-5);
    }

    #[test]
    fn routh_mass_double_root() {
        let d = dp(MU_CRIT_0, 0.0, 0.0, 0.0);
        let q = quadratic_coeffs(&d);
        assert!(discriminant(&q, 1.0).abs() < 1e-12);
        let [s1, s2] = lambda_squared(&q, 1.0);
        assert!((s1.re + 0.5).abs() < 1e-6 && (s2.re + 0.5).abs() < 1e-6);
        assert!(matches!(frequencies_with(&q, 1.0), Err(Error::Resonance(_)) | Err(Error::Unstable { .. })));
    }

    #[test]
    fn unstable_beyond_routh() {
        let d = dp(0.04, 0.0, 0.0, 0.0);
        let [s1, _] = lambda_squared(&quadratic_coeffs(&d), 1.0);
        assert!(s1.im != 0.0);
        assert!(!stability(&d).stable);
        assert!(matches!(frequencies(&d), Err(Error::Unstable { .. })));
    }

    #[test]
    fn roots_pair_and_match_matrix() {
        for &(mu, e, a2, w1) in &[(0.01, 0.0, 0.0, 0.0), (0.02, 0.01, 0.003, 1e-3), (0.3, 0.0, 0.0, 0.0)] {
            let d = dp(mu, e, a2, w1);
            let q = quadratic_coeffs(&d);
            let r = characteristic_roots(&q, d.n);
            let sum = r.iter().fold(Complex64::new(0.0, 0.0), |s, z| s + z);
            assert_eq!(sum, Complex64::new(0.0, 0.0));
            let mut ev = matrix_eigenvalues(&q, d.n);
            for z in r {
                let (k, dist) = ev
                    .iter()
                    .enumerate()
                    .map(|(k, w)| (k, (w - z).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                assert!(dist < 1e-12, "{z} vs {:?}", ev);
                ev[k] = Complex64::new(f64::NAN, f64::NAN);
            }
        }
    }

    #[test]
    fn classical_frequencies() {
        let d = dp(0.01, 0.0, 0.0, 0.0);
        let f = frequencies(&d).unwrap();
        let r = (1.0 - 27.0 * 0.01 * 0.99f64).sqrt();
        assert!((f.omega1 - ((1.0 + r) / 2.0).sqrt()).abs() < 1e-12);
        assert!((f.omega2 - ((1.0 - r) / 2.0).sqrt()).abs() < 1e-12);
        assert!((f.omega1 - 0.9633221).abs() < 1e-7 && (f.omega2 - 0.2683477).abs() < 1e-7);
        assert!((f.omega1.powi(2) + f.omega2.powi(2) - 1.0).abs() < 1e-14);
        assert!((printed_frequency_sum(&d) - 1.0).abs() < 1e-15);
        let prod = 27.0 * 0.01 * 0.99 / 4.0;
        assert!((printed_frequency_product(&d) - prod).abs() < 1e-15);
        assert!((f.omega1.powi(2) * f.omega2.powi(2) - prod).abs() < 1e-14);
    }

    #[test]
    fn classical_mu_crit_and_a2_shift() {
        let s = stability(&dp(0.01, 0.0, 0.0, 0.0));
        assert_eq!(s.mu_crit, MU_CRIT_0);
        assert!(s.stable && s.margin > 0.0);
        let shifted = mu_crit_printed(&dp(0.01, 0.0, 0.001, 0.0));
        assert!((shifted - MU_CRIT_0 - 2.1038871010983331e-3).abs() < 1e-15);
    }

    #[test]
    fn classical_gamma_relations_vanish() {
        for &mu in &[0.005, 0.01, 0.03] {
            let d = dp(mu, 0.0, 0.0, 0.0);
            let r = gamma_relation_residual(&d, &frequencies(&d).unwrap());
            assert!(r.res_j[0].abs() < 1e-13 && r.res_j[1].abs() < 1e-13 && r.res_u.abs() < 1e-13, "{r:?}");
        }
    }

    #[test]
    fn classical_whittaker_entries() {
        let d = dp(0.01, 0.0, 0.0, 0.0);
        let f = frequencies(&d).unwrap();
        let j = whittaker_matrix(&d, &f).unwrap();
        let (l1, k1) = ((4.0 * f.omega1.powi(2) + 9.0).sqrt(), (2.0 * f.omega1.powi(2) - 1.0).sqrt());
        assert!((j.j13 - l1 / (2.0 * f.omega1 * k1)).abs() < 1e-15);
        assert!((j.j21 + 4.0 * f.omega1 / (l1 * k1)).abs() < 1e-15);
        assert!((j.j23 + 6.0 * SQRT3 * d.gamma / (4.0 * f.omega1 * l1 * k1)).abs() < 1e-15);
    }

    #[test]
    fn whittaker_rejects_half_frequency() {
        let d = dp(0.01, 0.0, 0.0, 0.0);
        let f = Frequencies { omega1: 0.5f64.sqrt(), omega2: 0.5f64.sqrt() };
        assert!(matches!(whittaker_matrix(&d, &f), Err(Error::Resonance(_))));
    }

    #[test]
    fn classical_normal_form_is_exact() {
        for &mu in &[0.001, 0.01, 0.03] {
            let r = normal_form_residual(&dp(mu, 0.0, 0.0, 0.0)).unwrap();
            assert!(r <= 1e-10, "mu {mu}: {r:e}");
        }
    }

    #[test]
    fn orbit_at_zero_action_is_equilibrium() {
        let d = dp(0.01, 0.0, 0.0, 0.0);
        let f = frequencies(&d).unwrap();
        let j = whittaker_matrix(&d, &f).unwrap();
        let (x, y) = first_order_orbit(&[0.0, 1.0, 2.5], &f, &j, 0.0, 0.0, 0.3, 0.1).unwrap();
        assert!(x.iter().chain(y.iter()).all(|v| *v == 0.0));
        assert!(first_order_orbit(&[0.0], &f, &j, -1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn single_mode_orbit_solves_linear_equations() {
        // the first-order orbit must satisfy the H2 equations of motion
        let d = dp(0.01, 0.0, 0.0, 0.0);
        let q = quadratic_coeffs(&d);
        let f = frequencies(&d).unwrap();
        let j = whittaker_matrix(&d, &f).unwrap();
        for &(i1, i2) in &[(1.0, 0.0), (0.0, 1.0), (0.4, 0.9)] {
            let t = 0.7;
            let h = 1e-4;
            let st = |t: f64| {
                orbit_state(&f, &j, &ActionAngle { i1, i2, phi1: f.omega1 * t + 0.2, phi2: -f.omega2 * t + 1.1 })
            };
            let (s, sp, sm) = (st(t), st(t + h), st(t - h));
            let ax = (sp.vx - sm.vx) / (2.0 * h);
            let ay = (sp.vy - sm.vy) / (2.0 * h);
            let rx = ax - (2.0 * d.n * s.vy + (d.n * d.n - 2.0 * q.e) * s.x - q.g * s.y);
            let ry = ay - (-2.0 * d.n * s.vx + (d.n * d.n - 2.0 * q.f) * s.y - q.g * s.x);
            assert!(rx.abs() < 1e-7 && ry.abs() < 1e-7, "{rx:e} {ry:e}");
        }
    }
}
