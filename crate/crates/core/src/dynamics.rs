//! Equations of motion with radiation pressure, oblateness and
//! Poynting-Robertson drag, an adaptive Dormand-Prince integrator, and a
//! windowed periodogram used to read libration frequencies off trajectories.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DerivedParams;

const MIN_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl State {
    pub fn at_rest(x: f64, y: f64) -> Self {
        State { x, y, vx: 0.0, vy: 0.0 }
    }

    fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    fn from_array(a: [f64; 4]) -> Self {
        State { x: a[0], y: a[1], vx: a[2], vy: a[3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub params: DerivedParams,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,vx,vy\n");
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                t, s.x, s.y, s.vx, s.vy
            ));
        }
        out
    }
}

/// Distances to the primaries: `m1 = 1 - mu` sits at `(-mu, 0)`, `m2 = mu` at `(1 - mu, 0)`.
fn distances(x: f64, y: f64, d: &DerivedParams) -> Result<(f64, f64)> {
    let r1 = ((x + d.mu).powi(2) + y * y).sqrt();
    let r2 = ((x + d.mu - 1.0).powi(2) + y * y).sqrt();
    if !(r1 >= MIN_DISTANCE && r2 >= MIN_DISTANCE) {
        return Err(Error::Singular(format!(
            "too close to a primary at ({x}, {y}): r1 = {r1:e}, r2 = {r2:e}"
        )));
    }
    Ok((r1, r2))
}

/// `U1 = n^2 (x^2+y^2)/2 + (1-mu) q1 / r1 + mu / r2 + mu A2 / (2 r2^3)`.
pub fn potential(x: f64, y: f64, d: &DerivedParams) -> Result<f64> {
    let (r1, r2) = distances(x, y, d)?;
    Ok(0.5 * d.n * d.n * (x * x + y * y)
        + (1.0 - d.mu) * d.q1 / r1
        + d.mu / r2
        + 0.5 * d.mu * d.a2 / r2.powi(3))
}

/// Analytic gradient of [`potential`].
pub fn potential_gradient(x: f64, y: f64, d: &DerivedParams) -> Result<(f64, f64)> {
    let (r1, r2) = distances(x, y, d)?;
    let n2 = d.n * d.n;
    let k1 = (1.0 - d.mu) * d.q1 / r1.powi(3);
    let k2 = d.mu / r2.powi(3) + 1.5 * d.mu * d.a2 / r2.powi(5);
    let gx = n2 * x - k1 * (x + d.mu) - k2 * (x + d.mu - 1.0);
    let gy = n2 * y - k1 * y - k2 * y;
    Ok((gx, gy))
}

/// Drag components `(N1, N2)`.
fn drag_terms(s: &State, d: &DerivedParams, r1sq: f64) -> (f64, f64) {
    let xm = s.x + d.mu;
    let radial = (xm * s.vx + s.y * s.vy) / r1sq;
    let n1 = xm * radial + s.vx - d.n * s.y;
    let n2 = s.y * radial + s.vy + d.n * xm;
    (n1, n2)
}

/// Full acceleration including Coriolis and P-R drag.
pub fn accel(s: &State, d: &DerivedParams) -> Result<(f64, f64)> {
    let (gx, gy) = potential_gradient(s.x, s.y, d)?;
    let r1sq = (s.x + d.mu).powi(2) + s.y * s.y;
    let (n1, n2) = drag_terms(s, d, r1sq);
    let ax = 2.0 * d.n * s.vy + gx - d.w1 * n1 / r1sq;
    let ay = -2.0 * d.n * s.vx + gy - d.w1 * n2 / r1sq;
    Ok((ax, ay))
}

/// `(U_x, U_y)` with drag evaluated at rest; zero at an equilibrium.
pub fn rest_force(x: f64, y: f64, d: &DerivedParams) -> Result<(f64, f64)> {
    accel(&State::at_rest(x, y), d)
}

/// Conservative energy-like integral `v^2/2 - U1`; constant when `W1 = 0`.
pub fn jacobi_like(s: &State, d: &DerivedParams) -> Result<f64> {
    Ok(0.5 * (s.vx * s.vx + s.vy * s.vy) - potential(s.x, s.y, d)?)
}

fn rhs(s: [f64; 4], d: &DerivedParams) -> Result<[f64; 4]> {
    let (ax, ay) = accel(&State::from_array(s), d)?;
    Ok([s[2], s[3], ax, ay])
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension (Hairer, Norsett & Wanner).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn comb(y: &[f64; 4], h: f64, terms: &[(f64, &[f64; 4])]) -> [f64; 4] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..4 {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates from `s0` over `[0, t_end]`, sampling every `dt_out` with the
/// fourth-order dense output. `tol` is used as both absolute and relative
/// local error tolerance.
pub fn integrate(
    s0: State,
    d: &DerivedParams,
    t_end: f64,
    dt_out: f64,
    tol: f64,
) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain { name: "t_end", value: t_end, reason: "must be positive" });
    }
    if !(dt_out > 0.0 && dt_out.is_finite()) {
        return Err(Error::Domain { name: "dt_out", value: dt_out, reason: "must be positive" });
    }
    if !(tol > 0.0) {
        return Err(Error::Domain { name: "tol", value: tol, reason: "must be positive" });
    }

    let n_out = (t_end / dt_out + 1e-9).floor() as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(n_out + 1),
        states: Vec::with_capacity(n_out + 1),
        params: *d,
    };
    traj.times.push(0.0);
    traj.states.push(s0);
    let mut next_out = 1usize;

    let mut t = 0.0;
    let mut y = s0.to_array();
    let fail = |t: f64, reason: String, traj: &Trajectory| Error::Integration {
        t,
        reason,
        partial: Box::new(traj.clone()),
    };
    let mut k1 = match rhs(y, d) {
        Ok(k) => k,
        Err(e) => return Err(fail(t, e.to_string(), &traj)),
    };
    let mut h = (0.01 * tol.powf(0.2)).clamp(1e-6, dt_out.min(0.1));
    let h_min = 1e-14 * t_end.max(1.0);

    while next_out <= n_out {
        if h < h_min {
            return Err(fail(t, format!("step size underflow (h = {h:e})"), &traj));
        }
        let stage = || -> Result<_> {
            let k2 = rhs(comb(&y, h, &[(A21, &k1)]), d)?;
            let k3 = rhs(comb(&y, h, &[(A31, &k1), (A32, &k2)]), d)?;
            let k4 = rhs(comb(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]), d)?;
            let k5 = rhs(
                comb(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
                d,
            )?;
            let k6 = rhs(
                comb(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
                d,
            )?;
            let y_new = comb(
                &y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = rhs(y_new, d)?;
            Ok((k2, k3, k4, k5, k6, k7, y_new))
        };
        let (_k2, k3, k4, k5, k6, k7, y_new) = match stage() {
            Ok(v) => v,
            Err(_) => {
                // a stage left the domain; retry smaller
                h *= 0.25;
                continue;
            }
        };

        let mut err = 0.0;
        for i in 0..4 {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol + tol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / 4.0).sqrt();

        if err <= 1.0 {
            let t_new = t + h;
            // dense output coefficients
            let mut r2 = [0.0; 4];
            let mut r3 = [0.0; 4];
            let mut r4 = [0.0; 4];
            let mut r5 = [0.0; 4];
            for i in 0..4 {
                r2[i] = y_new[i] - y[i];
                r3[i] = h * k1[i] - r2[i];
                r4[i] = r2[i] - h * k7[i] - r3[i];
                r5[i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i]);
            }
            while next_out <= n_out {
                let t_out = next_out as f64 * dt_out;
                if t_out > t_new {
                    break;
                }
                let th = (t_out - t) / h;
                let th1 = 1.0 - th;
                let mut s = [0.0; 4];
                for i in 0..4 {
                    s[i] = y[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
                }
                traj.times.push(t_out);
                traj.states.push(State::from_array(s));
                next_out += 1;
            }
            t = t_new;
            y = y_new;
            k1 = k7;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    /// Radians per time unit.
    pub frequency: f64,
    pub amplitude: f64,
}

const ZERO_PAD: usize = 8;

/// Top `k` peaks of the Hann-windowed periodogram of `x(t)`.
///
/// The spectrum is zero-padded and each peak is refined by a parabola
/// through the log-magnitudes of its three neighbouring bins.
pub fn dominant_frequencies(traj: &Trajectory, k: usize) -> Result<Vec<SpectralPeak>> {
    let signal: Vec<f64> = traj.states.iter().map(|s| s.x).collect();
    dominant_frequencies_of(&traj.times, &signal, k)
}

pub fn dominant_frequencies_of(times: &[f64], signal: &[f64], k: usize) -> Result<Vec<SpectralPeak>> {
    let n = signal.len();
    if n < 16 || times.len() != n {
        return Err(Error::InsufficientData(format!(
            "need at least 16 uniformly spaced samples, got {n}"
        )));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::InsufficientData("sample times must increase".into()));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::InsufficientData("sampling is not uniform".into()));
        }
    }

    let mean = signal.iter().sum::<f64>() / n as f64;
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect();
    let wsum: f64 = window.iter().sum();

    let m = (n * ZERO_PAD).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .zip(&window)
        .map(|(s, w)| Complex::new((s - mean) * w, 0.0))
        .collect();
    buf.resize(m, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let half = m / 2;
    let mag: Vec<f64> = buf[..=half].iter().map(|c| c.norm()).collect();
    // main lobe of the Hann window spans +-2 raw bins
    let lobe = 2 * m / n + 1;

    let mut candidates: Vec<usize> = (1..half)
        .filter(|&i| i >= lobe && mag[i] > mag[i - 1] && mag[i] >= mag[i + 1] && mag[i] > 0.0)
        .collect();
    candidates.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));

    let mut chosen: Vec<usize> = Vec::new();
    for c in candidates {
        if chosen.len() == k {
            break;
        }
        if chosen.iter().all(|&o| o.abs_diff(c) > lobe) {
            chosen.push(c);
        }
    }

    let bin_to_omega = 2.0 * PI / (m as f64 * dt);
    Ok(chosen
        .into_iter()
        .map(|i| {
            let (a, b, c) = (mag[i - 1].ln(), mag[i].ln(), mag[i + 1].ln());
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            let peak = (b - 0.25 * (a - c) * shift).exp();
            SpectralPeak {
                frequency: (i as f64 + shift) * bin_to_omega,
                amplitude: 2.0 * peak / wsum,
            }
        })
        .collect())
}
