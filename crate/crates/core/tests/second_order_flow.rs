use lpnorm::birkhoff::{b1_series, generic_second_order_solve_with};
use lpnorm::dynamics::{integrate, State};
use lpnorm::equilibria::{refined_equilibrium, Branch};
use lpnorm::expansion::{cubic_coeffs, numeric_taylor_oracle, quadratic_coeffs};
use lpnorm::linear_normal_form::{frequencies, whittaker_matrix};
use lpnorm::poisson_series::{DAlembertSeries, FrequencyPair};
use lpnorm::DerivedParams;

/// Largest position error over `t in [0, 5]` when the orbit is started on and
/// compared against the series `(x, y)` with actions `(i, 0.7 i)`.
fn tracking_error(d: &DerivedParams, x: &DAlembertSeries, y: &DAlembertSeries, fp: &FrequencyPair, i: f64) -> f64 {
    let p = refined_equilibrium(d, Branch::L4, 1e-14).unwrap().point;
    let (i1, i2, c1, c2) = (i, 0.7 * i, 0.3, 1.1);
    let (vx, vy) = (x.apply_d(fp), y.apply_d(fp));
    let s0 = State {
        x: p.x + x.evaluate(i1, i2, c1, c2),
        y: p.y + y.evaluate(i1, i2, c1, c2),
        vx: vx.evaluate(i1, i2, c1, c2),
        vy: vy.evaluate(i1, i2, c1, c2),
    };
    let traj = integrate(s0, d, 5.0, 0.25, 1e-13).unwrap();
    let mut err: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let (a1, a2) = (fp.omega1 * t + c1, -fp.omega2 * t + c2);
        err = err
            .max((s.x - p.x - x.evaluate(i1, i2, a1, a2)).abs())
            .max((s.y - p.y - y.evaluate(i1, i2, a1, a2)).abs());
    }
    err
}

#[test]
fn second_order_series_tracks_the_flow_with_exact_cubic_terms() {
    let d = DerivedParams::classical(0.01).unwrap();
    let f = frequencies(&d).unwrap();
    let j = whittaker_matrix(&d, &f).unwrap();
    let fp = FrequencyPair { omega1: f.omega1, omega2: f.omega2 };
    let mut c = cubic_coeffs(&d);
    let t = numeric_taylor_oracle(&d, 3).unwrap().cubic_t();
    (c.t1, c.t2, c.t3, c.t4) = (t[0], t[1], t[2], t[3]);
    let sol = generic_second_order_solve_with(&quadratic_coeffs(&d), &c, d.n, &f, &j).unwrap();
    let (b1x, b1y) = b1_series(&f, &j);
    let (x2, y2) = (&b1x + &sol.b2_10, &b1y + &sol.b2_01);

    let (e1_hi, e2_hi) = (tracking_error(&d, &b1x, &b1y, &fp, 1e-6), tracking_error(&d, &x2, &y2, &fp, 1e-6));
    let (e1_lo, e2_lo) = (tracking_error(&d, &b1x, &b1y, &fp, 1e-7), tracking_error(&d, &x2, &y2, &fp, 1e-7));
    // first order leaves an O(I) error, second order an O(I^{3/2}) one
    assert!(e2_hi < 0.05 * e1_hi, "{e2_hi:e} vs {e1_hi:e}");
    assert!(e2_lo < 0.01 * e1_lo, "{e2_lo:e} vs {e1_lo:e}");
    let order = (e2_hi / e2_lo).log10();
    assert!(order > 1.3, "second-order error exponent {order}");
}

#[test]
fn tabulated_classical_cubic_terms_do_not_track_the_flow() {
    let d = DerivedParams::classical(0.01).unwrap();
    let f = frequencies(&d).unwrap();
    let j = whittaker_matrix(&d, &f).unwrap();
    let fp = FrequencyPair { omega1: f.omega1, omega2: f.omega2 };
    let sol = generic_second_order_solve_with(&quadratic_coeffs(&d), &cubic_coeffs(&d), d.n, &f, &j).unwrap();
    let (b1x, b1y) = b1_series(&f, &j);
    let e1 = tracking_error(&d, &b1x, &b1y, &fp, 1e-6);
    let e2 = tracking_error(&d, &(&b1x + &sol.b2_10), &(&b1y + &sol.b2_01), &fp, 1e-6);
    assert!(e2 > e1, "{e2:e} vs {e1:e}");
}
