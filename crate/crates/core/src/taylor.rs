//! Truncated bivariate Taylor polynomials in the displacement `(x, y)`.
//!
//! Arithmetic is exact up to rounding for every retained coefficient, which
//! makes this the expansion oracle for the Lagrangian about L4.

use std::ops::{Add, Mul, Neg, Sub};

pub const DEG: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    c: [[f64; DEG + 1]; DEG + 1],
}

impl Jet {
    pub fn zero() -> Self {
        Jet { c: [[0.0; DEG + 1]; DEG + 1] }
    }

    pub fn constant(v: f64) -> Self {
        let mut j = Self::zero();
        j.c[0][0] = v;
        j
    }

    /// `x0 + x`
    pub fn var_x(x0: f64) -> Self {
        let mut j = Self::constant(x0);
        j.c[1][0] = 1.0;
        j
    }

    /// `y0 + y`
    pub fn var_y(y0: f64) -> Self {
        let mut j = Self::constant(y0);
        j.c[0][1] = 1.0;
        j
    }

    /// Coefficient of `x^i y^j`.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > DEG {
            0.0
        } else {
            self.c[i][j]
        }
    }

    pub fn value(&self) -> f64 {
        self.c[0][0]
    }

    pub fn scale(mut self, s: f64) -> Self {
        for row in self.c.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        self
    }

    /// `self^alpha` by the binomial series about the constant term.
    pub fn powf(self, alpha: f64) -> Self {
        let f0 = self.value();
        assert!(f0 > 0.0, "powf needs a positive constant term");
        let mut u = self;
        u.c[0][0] = 0.0;
        let u = u.scale(1.0 / f0);
        let mut term = Jet::constant(1.0);
        let mut out = Jet::constant(1.0);
        let mut binom = 1.0;
        for k in 1..=DEG {
            binom *= (alpha - (k as f64 - 1.0)) / k as f64;
            term = term * u;
            out = out + term.scale(binom);
        }
        out.scale(f0.powf(alpha))
    }

    /// `atan2(y0 + y, x0 + x)` expanded about `(x0, y0)`.
    pub fn atan2(y0: f64, x0: f64) -> Self {
        // Im log(1 + w), w = (x + i y) / (x0 + i y0)
        let r2 = x0 * x0 + y0 * y0;
        let mut wr = Jet::zero();
        let mut wi = Jet::zero();
        wr.c[1][0] = x0 / r2;
        wr.c[0][1] = y0 / r2;
        wi.c[1][0] = -y0 / r2;
        wi.c[0][1] = x0 / r2;
        let (mut pr, mut pi) = (Jet::constant(1.0), Jet::zero());
        let mut out = Jet::constant(y0.atan2(x0));
        for k in 1..=DEG {
            let nr = pr * wr - pi * wi;
            let ni = pr * wi + pi * wr;
            pr = nr;
            pi = ni;
            let s = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            out = out + pi.scale(s);
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        for i in 0..=DEG {
            for j in 0..=DEG - i {
                self.c[i][j] += o.c[i][j];
            }
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::zero();
        for i1 in 0..=DEG {
            for j1 in 0..=DEG - i1 {
                let a = self.c[i1][j1];
                if a == 0.0 {
                    continue;
                }
                for i2 in 0..=DEG - i1 - j1 {
                    for j2 in 0..=DEG - i1 - j1 - i2 {
                        out.c[i1 + i2][j1 + j2] += a * o.c[i2][j2];
                    }
                }
            }
        }
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, v: f64) -> Jet {
        self.c[0][0] += v;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(j: &Jet, x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..=DEG {
            for k in 0..=DEG - i {
                s += j.coeff(i, k) * x.powi(i as i32) * y.powi(k as i32);
            }
        }
        s
    }

    #[test]
    fn inverse_distance_matches_function() {
        let (x0, y0) = (0.5, 0.8);
        let r2 = Jet::var_x(x0) * Jet::var_x(x0) + Jet::var_y(y0) * Jet::var_y(y0);
        let inv = r2.powf(-0.5);
        for &(dx, dy) in &[(1e-2, 0.0), (0.0, -1e-2), (7e-3, 5e-3)] {
            let exact = 1.0 / ((x0 + dx).powi(2) + (y0 + dy).powi(2)).sqrt();
            // truncation error is fifth order in the displacement
            assert!((eval(&inv, dx, dy) - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn atan2_matches_function() {
        let (x0, y0) = (0.6, 0.9);
        let t = Jet::atan2(y0, x0);
        for &(dx, dy) in &[(1e-2, 0.0), (0.0, 1e-2), (-6e-3, 8e-3)] {
            let exact = (y0 + dy).atan2(x0 + dx);
            assert!((eval(&t, dx, dy) - exact).abs() < 1e-9);
        }
        // harmonic function: trace-free Hessian
        assert!((t.coeff(2, 0) + t.coeff(0, 2)).abs() < 1e-15);
    }

    #[test]
    fn product_truncates() {
        let x = Jet::var_x(0.0);
        let mut p = Jet::constant(1.0);
        for _ in 0..6 {
            p = p * x;
        }
        assert_eq!(p, Jet::zero());
    }
}
