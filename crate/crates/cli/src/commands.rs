use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use lpnorm::birkhoff::{birkhoff, b1_series, Route};
use lpnorm::dynamics::{dominant_frequencies, integrate, rest_force, State};
use lpnorm::equilibria::{epsilon_form_point, refine_point_traced, series_point, Branch, EquilibriumPoint};
use lpnorm::expansion::{compare_with_oracle, cubic_coeffs, numeric_taylor_oracle, quadratic_coeffs};
use lpnorm::linear_normal_form::{
    frequencies, gamma_relation_residual, lambda_squared, normal_form_residual, printed_frequency_product,
    printed_frequency_sum, stability, whittaker_matrix, MU_CRIT_0,
};
use lpnorm::poisson_series::DAlembertSeries;
use lpnorm::verify::{oracle_critical_mass, run_suite, Suite};
use lpnorm::{DerivedParams, Error, PerturbationParams};

use crate::config::{
    parse_grid, positive, BirkhoffArgs, BranchArg, Command, ConfigError, EquilibriaArgs, Format, PhysArgs, RouteArg,
    SimulateArgs, SuiteArg, SweepArgs, VerifyArgs,
};
use crate::output::{to_json, Cell, Csv};

pub enum CliError {
    Config(String),
    Run(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { .. } => CliError::Config(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

pub struct Outcome {
    pub text: String,
    /// Extra files as `(path, contents)`.
    pub files: Vec<(PathBuf, String)>,
    /// Human-readable text that always goes to stdout.
    pub console: Option<String>,
    pub failed: bool,
}

impl Outcome {
    fn text(text: String) -> Self {
        Outcome { text, files: Vec::new(), console: None, failed: false }
    }
}

fn params(p: &PhysArgs) -> Result<DerivedParams, CliError> {
    let mu = p.mu.ok_or_else(|| CliError::Config("--mu is required".into()))?;
    let pp = PerturbationParams::new(mu, p.q1.unwrap_or(1.0), p.a2.unwrap_or(0.0), p.cd.unwrap_or(1.0))?;
    Ok(pp.derive()?)
}

fn only_json(format: Option<Format>, name: &str) -> Result<(), CliError> {
    match format {
        Some(Format::Csv) => Err(CliError::Config(format!("`{name}` only writes JSON"))),
        _ => Ok(()),
    }
}

pub fn run(cmd: &Command, format: Option<Format>, output: Option<&Path>) -> Result<Outcome, CliError> {
    match cmd {
        Command::Equilibria(a) => {
            only_json(format, "equilibria")?;
            equilibria(a)
        }
        Command::Stability(p) => {
            only_json(format, "stability")?;
            stability_cmd(p)
        }
        Command::Sweep(a) => sweep(a, format),
        Command::Expand(p) => {
            only_json(format, "expand")?;
            expand(p)
        }
        Command::NormalForm(p) => {
            only_json(format, "normal-form")?;
            normal_form(p)
        }
        Command::Birkhoff(a) => {
            only_json(format, "birkhoff")?;
            birkhoff_cmd(a)
        }
        Command::Simulate(a) => {
            if format == Some(Format::Json) {
                return Err(CliError::Config("`simulate` writes CSV".into()));
            }
            simulate(a, output)
        }
        Command::Verify(a) => {
            only_json(format, "verify")?;
            verify(a)
        }
    }
}

fn point_json(p: &EquilibriumPoint, d: &DerivedParams) -> Result<Value, CliError> {
    let (ux, uy) = rest_force(p.x, p.y, d)?;
    Ok(json!({
        "branch": p.branch,
        "method": p.method,
        "x": p.x,
        "y": p.y,
        "residual_Ux": ux,
        "residual_Uy": uy,
    }))
}

fn equilibria(a: &EquilibriaArgs) -> Result<Outcome, CliError> {
    let d = params(&a.phys)?;
    let tol = positive("tol", a.tol.unwrap_or(1e-14))?;
    let branch = match a.branch.unwrap_or(BranchArg::L4) {
        BranchArg::L4 => Branch::L4,
        BranchArg::L5 => Branch::L5,
    };
    let start = series_point(&d, branch)?;
    let mut points = vec![point_json(&start, &d)?];
    if branch == Branch::L4 {
        points.push(point_json(&epsilon_form_point(&d), &d)?);
    }
    let refined = refine_point_traced(&start, &d, tol)?;
    let mut last = point_json(&refined.point, &d)?;
    last["iterations"] = json!(refined.iterations);
    points.push(last);
    Ok(Outcome::text(to_json(&json!({ "params": d, "points": points }))))
}

fn stability_cmd(p: &PhysArgs) -> Result<Outcome, CliError> {
    let d = params(p)?;
    let s = stability(&d);
    let q = quadratic_coeffs(&d);
    let l = lambda_squared(&q, d.n);
    let f = frequencies(&d).ok();
    let out = json!({
        "params": d,
        "D": s.discriminant,
        "stable": s.stable,
        "mu_crit": s.mu_crit,
        "margin": s.margin,
        "lambda_squared": [[l[0].re, l[0].im], [l[1].re, l[1].im]],
        "omega1": f.map(|f| f.omega1),
        "omega2": f.map(|f| f.omega2),
    });
    Ok(Outcome::text(to_json(&out)))
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("LPNORM_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("LPNORM_THREADS must be a positive integer, got `{v}`")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Run(e.to_string()))
}

fn axis(grid: &Option<String>, single: Option<f64>) -> Result<Vec<f64>, CliError> {
    match grid {
        Some(g) => Ok(parse_grid(g)?),
        None => Ok(vec![single.unwrap_or(0.0)]),
    }
}

#[derive(Serialize)]
struct SweepRow {
    mu: f64,
    epsilon: f64,
    #[serde(rename = "A2")]
    a2: f64,
    #[serde(rename = "W1")]
    w1: f64,
    n: f64,
    #[serde(rename = "D")]
    d: f64,
    stable: bool,
    mu_crit: f64,
    mu_crit_shift: f64,
    margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_crit_oracle: Option<f64>,
}

fn sweep(a: &SweepArgs, format: Option<Format>) -> Result<Outcome, CliError> {
    let mus = match &a.mu_grid {
        Some(g) => parse_grid(g)?,
        None => return Err(CliError::Config("--mu-grid is required".into())),
    };
    let eps = axis(&a.epsilon_grid, a.epsilon)?;
    let a2s = axis(&a.a2_grid, a.a2)?;
    let w1s = axis(&a.w1_grid, a.w1)?;
    let mut configs = Vec::new();
    for &mu in &mus {
        for &e in &eps {
            for &a2 in &a2s {
                for &w1 in &w1s {
                    configs.push(DerivedParams::from_components(mu, e, a2, w1)?);
                }
            }
        }
    }
    let oracle = a.oracle;
    let rows: Vec<Result<SweepRow, CliError>> = thread_pool()?.install(|| {
        configs
            .par_iter()
            .map(|d| {
                let s = stability(d);
                let mu_crit_oracle = if oracle {
                    Some(oracle_critical_mass(d.epsilon, d.a2, d.w1)?)
                } else {
                    None
                };
                Ok(SweepRow {
                    mu: d.mu,
                    epsilon: d.epsilon,
                    a2: d.a2,
                    w1: d.w1,
                    n: d.n,
                    d: s.discriminant,
                    stable: s.stable,
                    mu_crit: s.mu_crit,
                    mu_crit_shift: s.mu_crit - MU_CRIT_0,
                    margin: s.margin,
                    mu_crit_oracle,
                })
            })
            .collect()
    });
    let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_, _>>()?;
    if format == Some(Format::Json) {
        return Ok(Outcome::text(to_json(&rows)));
    }
    let mut header = vec!["mu", "epsilon", "A2", "W1", "n", "D", "stable", "mu_crit", "mu_crit_shift", "margin"];
    if oracle {
        header.push("mu_crit_oracle");
    }
    let mut csv = Csv::new(&header);
    for r in &rows {
        let mut cells = vec![
            Cell::F(r.mu),
            Cell::F(r.epsilon),
            Cell::F(r.a2),
            Cell::F(r.w1),
            Cell::F(r.n),
            Cell::F(r.d),
            Cell::B(r.stable),
            Cell::F(r.mu_crit),
            Cell::F(r.mu_crit_shift),
            Cell::F(r.margin),
        ];
        if let Some(o) = r.mu_crit_oracle {
            cells.push(Cell::F(o));
        }
        csv.row(&cells);
    }
    Ok(Outcome::text(csv.finish()))
}

fn expand(p: &PhysArgs) -> Result<Outcome, CliError> {
    let d = params(p)?;
    let q = quadratic_coeffs(&d);
    let c = cubic_coeffs(&d);
    let table = numeric_taylor_oracle(&d, 3)?;
    let (oq, ot) = (table.quadratic(), table.cubic_t());
    let t5 = c.t5.velocity_coeffs();
    let ot5 = table.drag_velocity_coeffs();
    let rel = |a: f64, b: f64| {
        let den = b.abs().max(1e-300);
        if a == b {
            0.0
        } else {
            (a - b).abs() / den
        }
    };
    let mut max_rel: f64 = 0.0;
    for row in compare_with_oracle(&d)? {
        max_rel = max_rel.max(rel(row.printed, row.oracle));
    }
    for v in 0..2 {
        for k in 0..3 {
            max_rel = max_rel.max(rel(t5[v][k], ot5[v][k]));
        }
    }
    let t5_json = |m: [[f64; 3]; 2]| json!({"vx": m[0], "vy": m[1]});
    let out = json!({
        "params": d,
        "E": q.e, "F": q.f, "G": q.g,
        "T1": c.t1, "T2": c.t2, "T3": c.t3, "T4": c.t4,
        "T5_coeffs": t5_json(t5),
        "oracle": {
            "center": {"x": table.center.x, "y": table.center.y},
            "E": oq.e, "F": oq.f, "G": oq.g,
            "T1": ot[0], "T2": ot[1], "T3": ot[2], "T4": ot[3],
            "T5_coeffs": t5_json(ot5),
        },
        "max_rel_diff": max_rel,
    });
    Ok(Outcome::text(to_json(&out)))
}

fn normal_form(p: &PhysArgs) -> Result<Outcome, CliError> {
    let d = params(p)?;
    let f = frequencies(&d)?;
    let j = whittaker_matrix(&d, &f)?;
    let q = quadratic_coeffs(&d);
    let n2 = d.n * d.n;
    let out = json!({
        "params": d,
        "omega1": f.omega1,
        "omega2": f.omega2,
        "whittaker": j,
        "normal_form_residual": normal_form_residual(&d)?,
        "frequency_sum": {
            "tabulated": printed_frequency_sum(&d),
            "quartic": 2.0 * (q.e + q.f + n2),
        },
        "frequency_product": {
            "tabulated": printed_frequency_product(&d),
            "quartic": (f.omega1 * f.omega2).powi(2),
        },
        "gamma_relations": gamma_relation_residual(&d, &f),
    });
    Ok(Outcome::text(to_json(&out)))
}

fn birkhoff_cmd(a: &BirkhoffArgs) -> Result<Outcome, CliError> {
    let d = params(&a.phys)?;
    let route = match a.route.unwrap_or(RouteArg::Both) {
        RouteArg::Closed => Route::Closed,
        RouteArg::Generic => Route::Generic,
        RouteArg::Both => Route::Both,
    };
    let rep = birkhoff(&d, route)?;
    let h3 = &rep.h3;
    let out = json!({
        "params": d,
        "route": route,
        "omega1": rep.frequencies.omega1,
        "omega2": rep.frequencies.omega2,
        "tables": rep.tables,
        "r": rep.rs.map(|x| x.r.to_vec()),
        "s": rep.rs.map(|x| x.s.to_vec()),
        "h3": {
            "A30": h3.a30, "A21": h3.a21, "A12": h3.a12, "A03": h3.a03,
            "residuals": {"h3_norm": h3.h3_norm, "l3_on_b1_norm": h3.l3_on_b1_norm},
        },
        "discrepancies": rep.discrepancies,
        "max_rel_discrepancy": rep.max_rel_discrepancy,
    });
    let mut outcome = Outcome::text(to_json(&out));
    if let Some(dir) = &a.dump_series {
        std::fs::create_dir_all(dir)?;
        let (b1x, b1y) = b1_series(&rep.frequencies, &rep.whittaker);
        let mut dumps: BTreeMap<&str, &DAlembertSeries> = BTreeMap::new();
        dumps.insert("B1_10", &b1x);
        dumps.insert("B1_01", &b1y);
        if let Some((x, y)) = &rep.closed {
            dumps.insert("B2_10_closed", x);
            dumps.insert("B2_01_closed", y);
        }
        if let Some(g) = &rep.generic {
            dumps.insert("B2_10_generic", &g.b2_10);
            dumps.insert("B2_01_generic", &g.b2_01);
            dumps.insert("Phi2", &g.phi2);
            dumps.insert("Psi2", &g.psi2);
        }
        for (name, s) in dumps {
            outcome.files.push((dir.join(format!("{name}.txt")), s.to_text()));
        }
    }
    Ok(outcome)
}

fn simulate(a: &SimulateArgs, output: Option<&Path>) -> Result<Outcome, CliError> {
    let d = params(&a.phys)?;
    let t_end = positive("t-end", a.t_end.unwrap_or(500.0))?;
    let dt_out = positive("dt-out", a.dt_out.unwrap_or(0.1))?;
    let tol = positive("tol", a.tol.unwrap_or(1e-12))?;
    let (x0, y0) = match (a.x0, a.y0) {
        (Some(x), Some(y)) => (x, y),
        (x, y) => {
            let p = lpnorm::equilibria::refined_equilibrium(&d, Branch::L4, 1e-14)?.point;
            (x.unwrap_or(p.x + 1e-4), y.unwrap_or(p.y))
        }
    };
    let s0 = State { x: x0, y: y0, vx: a.vx0.unwrap_or(0.0), vy: a.vy0.unwrap_or(0.0) };
    let traj = integrate(s0, &d, t_end, dt_out, tol)?;
    let mut csv = Csv::new(&["t", "x", "y", "vx", "vy"]);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        csv.row(&[Cell::F(*t), Cell::F(s.x), Cell::F(s.y), Cell::F(s.vx), Cell::F(s.vy)]);
    }
    let mut outcome = Outcome::text(csv.finish());
    let sidecar = a.spectrum.clone().or_else(|| output.map(|o| {
        let mut s = o.as_os_str().to_owned();
        s.push(".spectrum.json");
        PathBuf::from(s)
    }));
    if let Some(path) = sidecar {
        let peaks = dominant_frequencies(&traj, 4)?;
        let f = frequencies(&d).ok();
        let spec = json!({
            "initial": s0,
            "samples": traj.len(),
            "peaks": peaks,
            "omega1": f.map(|f| f.omega1),
            "omega2": f.map(|f| f.omega2),
        });
        outcome.files.push((path, to_json(&spec)));
    }
    Ok(outcome)
}

fn verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let suite = match a.suite.unwrap_or(SuiteArg::Full) {
        SuiteArg::Classical => Suite::Classical,
        SuiteArg::Full => Suite::Full,
    };
    let rep = run_suite(suite);
    Ok(Outcome { text: to_json(&rep), files: Vec::new(), console: Some(rep.table()), failed: !rep.passed })
}
