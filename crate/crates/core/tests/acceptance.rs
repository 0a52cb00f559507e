//! Acceptance suite. Each test prints one PASS/FAIL line.
//!
//! `cargo test -p lpnorm --test acceptance -- --nocapture --test-threads=1`

use std::time::{Duration, Instant};

use lpnorm::verify::{self, CriterionResult, Suite};

fn report(r: CriterionResult, elapsed: Duration, budget: Option<Duration>) {
    println!("{r}");
    for (k, v) in &r.metrics {
        println!("    {k} = {v:.6e}");
    }
    if let Some(b) = budget {
        println!("    runtime {:.3}s (budget {:.0}s)", elapsed.as_secs_f64(), b.as_secs_f64());
        assert!(elapsed <= b, "criterion {} exceeded its runtime budget", r.id);
    }
    assert!(r.passed, "criterion {} failed: {}", r.id, r.summary);
}

fn timed(f: impl FnOnce() -> CriterionResult) -> (CriterionResult, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

#[test]
fn criterion_1_critical_mass() {
    let (r, t) = timed(verify::criterion_1);
    report(r, t, Some(Duration::from_secs(1)));
}

#[test]
fn criterion_2_stability_coefficients() {
    let (r, t) = timed(verify::criterion_2);
    report(r, t, Some(Duration::from_secs(10)));
}

#[test]
fn criterion_3_frequencies() {
    let (r, t) = timed(verify::criterion_3);
    report(r, t, None);
}

#[test]
fn criterion_4_series_order() {
    let (r, t) = timed(verify::criterion_4);
    report(r, t, Some(Duration::from_secs(30)));
}

#[test]
fn criterion_5_normal_form() {
    let (r, t) = timed(|| verify::criterion_5(true));
    report(r, t, None);
}

#[test]
fn criterion_6_frequency_oracle() {
    let (r, t) = timed(verify::criterion_6);
    report(r, t, Some(Duration::from_secs(60)));
}

#[test]
fn criterion_7_series_algebra() {
    let (r, t) = timed(verify::criterion_7);
    report(r, t, None);
}

#[test]
fn criterion_8_second_order() {
    let (r, t) = timed(|| verify::criterion_8(true));
    report(r, t, None);
}

#[test]
fn criterion_9_determinism() {
    let (r, t) = timed(|| verify::criterion_9(Suite::Classical));
    report(r, t, None);
}
