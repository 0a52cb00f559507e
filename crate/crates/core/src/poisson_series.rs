//! Double D'Alembert series in the actions `I1, I2` and angles `phi1, phi2`.
//!
//! A term with key `(n, m, p, q, kind)` stands for
//! `I1^((n-m)/2) I2^(m/2) kind(p phi1 + q phi2)`. Keys are stored in
//! canonical form: `p >= 0`, and `q >= 0` when `p == 0`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEGREE: u8 = 4;
pub const TOL_DIV: f64 = 1e-8;
pub const TOL_RES: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Key {
    pub n: u8,
    pub m: u8,
    pub p: i8,
    pub q: i8,
    pub kind: Kind,
}

impl Key {
    pub fn is_critical(&self) -> bool {
        matches!((self.p, self.q), (1, 0) | (0, 1))
    }

    fn check(&self) -> Result<()> {
        let (n, m, p, q) = (self.n as i32, self.m as i32, self.p as i32, self.q as i32);
        let ok = m <= n
            && p >= 0
            && p <= n - m
            && (n - m - p) % 2 == 0
            && q.abs() <= m
            && (m - q).rem_euclid(2) == 0
            && !(p == 0 && q < 0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidTerm(format!("{self} violates the degree/parity rules")))
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            Kind::Cos => "cos",
            Kind::Sin => "sin",
        };
        write!(f, "{} {} {} {} {}", self.n, self.m, self.p, self.q, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPair {
    pub omega1: f64,
    pub omega2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    #[serde(flatten)]
    pub key: Key,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DAlembertSeries {
    terms: BTreeMap<Key, f64>,
    max_degree: u8,
}

impl Default for DAlembertSeries {
    fn default() -> Self {
        Self::zero()
    }
}

impl Serialize for DAlembertSeries {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter().map(|(key, coeff)| Term { key, coeff }))
    }
}

impl DAlembertSeries {
    pub fn zero() -> Self {
        Self::with_max_degree(DEFAULT_MAX_DEGREE)
    }

    pub fn with_max_degree(max_degree: u8) -> Self {
        DAlembertSeries { terms: BTreeMap::new(), max_degree }
    }

    pub fn constant(c: f64) -> Self {
        let mut s = Self::zero();
        s.push(Key { n: 0, m: 0, p: 0, q: 0, kind: Kind::Cos }, c);
        s
    }

    /// Single term; the angle combination is canonicalized first.
    pub fn monomial(n: u8, m: u8, p: i8, q: i8, kind: Kind, coeff: f64) -> Result<Self> {
        let mut s = Self::zero();
        s.add_term(n, m, p, q, kind, coeff)?;
        Ok(s)
    }

    pub fn max_degree(&self) -> u8 {
        self.max_degree
    }

    pub fn set_max_degree(&mut self, d: u8) {
        self.max_degree = d;
        self.terms.retain(|k, _| k.n <= d);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Key, f64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn get(&self, key: &Key) -> f64 {
        self.terms.get(key).copied().unwrap_or(0.0)
    }

    /// Coefficient of `kind(p phi1 + q phi2)` at degree `(n, m)`, with
    /// the angle combination canonicalized.
    pub fn coeff(&self, n: u8, m: u8, p: i8, q: i8, kind: Kind) -> f64 {
        let (key, sign) = canonical(n, m, p, q, kind);
        sign * self.get(&key)
    }

    pub fn add_term(&mut self, n: u8, m: u8, p: i8, q: i8, kind: Kind, coeff: f64) -> Result<()> {
        let (key, sign) = canonical(n, m, p, q, kind);
        key.check()?;
        if kind == Kind::Sin && key.p == 0 && key.q == 0 {
            return Ok(());
        }
        self.push(key, sign * coeff);
        Ok(())
    }

    fn push(&mut self, key: Key, c: f64) {
        if key.n > self.max_degree || c == 0.0 {
            return;
        }
        let v = self.terms.entry(key).or_insert(0.0);
        *v += c;
        if *v == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = Self::with_max_degree(self.max_degree);
        for (k, v) in self.iter() {
            out.push(k, v * c);
        }
        out
    }

    /// Drops coefficients with `|c| <= tol`.
    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, v| v.abs() > tol);
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest coefficient-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).max_abs()
    }

    /// Terms of total degree `n`.
    pub fn homogeneous(&self, n: u8) -> Self {
        let mut out = Self::with_max_degree(self.max_degree);
        for (k, v) in self.iter().filter(|(k, _)| k.n == n) {
            out.push(k, v);
        }
        out
    }

    /// Harmonics `(p, q)` in `{(1, 0), (0, 1)}`.
    pub fn critical_part(&self) -> Self {
        let mut out = Self::with_max_degree(self.max_degree);
        for (k, v) in self.iter().filter(|(k, _)| k.is_critical()) {
            out.push(k, v);
        }
        out
    }

    pub fn apply_d(&self, f: &FrequencyPair) -> Self {
        let mut out = Self::with_max_degree(self.max_degree);
        for (k, v) in self.iter() {
            let nu = k.p as f64 * f.omega1 - k.q as f64 * f.omega2;
            match k.kind {
                Kind::Cos if k.p == 0 && k.q == 0 => {}
                Kind::Cos => out.push(Key { kind: Kind::Sin, ..k }, -nu * v),
                Kind::Sin => out.push(Key { kind: Kind::Cos, ..k }, nu * v),
            }
        }
        out
    }

    pub fn apply_d2(&self, f: &FrequencyPair) -> Self {
        let mut out = Self::with_max_degree(self.max_degree);
        for (k, v) in self.iter() {
            let nu = k.p as f64 * f.omega1 - k.q as f64 * f.omega2;
            out.push(k, -nu * nu * v);
        }
        out
    }

    /// Divides every harmonic by its `Delta_{p,q}`.
    pub fn invert_delta(&self, f: &FrequencyPair) -> Result<Self> {
        let critical: Vec<String> = self.iter().filter(|(k, _)| k.is_critical()).map(|(k, _)| k.to_string()).collect();
        if !critical.is_empty() {
            return Err(Error::CriticalTerms { keys: critical });
        }
        let mut out = Self::with_max_degree(self.max_degree);
        for (k, v) in self.iter() {
            let den = delta_pq(k.p as i32, k.q as i32, f);
            if den.abs() < TOL_DIV {
                return Err(Error::SmallDivisor { what: format!("Delta({}, {}) at {k}", k.p, k.q), value: den });
            }
            out.push(k, v / den);
        }
        Ok(out)
    }

    pub fn evaluate(&self, i1: f64, i2: f64, phi1: f64, phi2: f64) -> f64 {
        let (s1, s2) = (i1.sqrt(), i2.sqrt());
        self.iter()
            .map(|(k, v)| {
                let amp = s1.powi((k.n - k.m) as i32) * s2.powi(k.m as i32);
                let ang = k.p as f64 * phi1 + k.q as f64 * phi2;
                v * amp * match k.kind {
                    Kind::Cos => ang.cos(),
                    Kind::Sin => ang.sin(),
                }
            })
            .sum()
    }

    /// One `n m p q kind coeff` line per term.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.iter() {
            s.push_str(&format!("{k} {v:.16e}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::zero();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| Error::Parse { line: i + 1, reason };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(err(format!("expected 6 fields, found {}", f.len())));
            }
            let int = |s: &str| s.parse::<i64>().map_err(|e| err(format!("{s}: {e}")));
            let (n, m, p, q) = (int(f[0])?, int(f[1])?, int(f[2])?, int(f[3])?);
            if !(0..=i8::MAX as i64).contains(&n) || !(0..=n).contains(&m) || p.abs() > n || q.abs() > n {
                return Err(err(format!("indices out of range: {n} {m} {p} {q}")));
            }
            let kind = match f[4] {
                "cos" => Kind::Cos,
                "sin" => Kind::Sin,
                other => return Err(err(format!("unknown kind {other}"))),
            };
            if kind == Kind::Sin && p == 0 && q == 0 {
                return Err(err("sin term with p = q = 0".into()));
            }
            let c: f64 = f[5].parse().map_err(|e| err(format!("{}: {e}", f[5])))?;
            if n as u8 > out.max_degree {
                out.max_degree = n as u8;
            }
            out.add_term(n as u8, m as u8, p as i8, q as i8, kind, c)
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn keys_valid(&self) -> bool {
        self.terms.keys().all(|k| k.check().is_ok() && !(k.kind == Kind::Sin && k.p == 0 && k.q == 0))
    }
}

fn canonical(n: u8, m: u8, p: i8, q: i8, kind: Kind) -> (Key, f64) {
    if p < 0 || (p == 0 && q < 0) {
        let sign = if kind == Kind::Sin { -1.0 } else { 1.0 };
        (Key { n, m, p: -p, q: -q, kind }, sign)
    } else {
        (Key { n, m, p, q, kind }, 1.0)
    }
}

impl fmt::Display for DAlembertSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl Add for &DAlembertSeries {
    type Output = DAlembertSeries;
    fn add(self, o: &DAlembertSeries) -> DAlembertSeries {
        let mut out = self.clone();
        out.max_degree = self.max_degree.min(o.max_degree);
        out.terms.retain(|k, _| k.n <= out.max_degree);
        for (k, v) in o.iter() {
            out.push(k, v);
        }
        out
    }
}

impl Sub for &DAlembertSeries {
    type Output = DAlembertSeries;
    fn sub(self, o: &DAlembertSeries) -> DAlembertSeries {
        self + &(-o)
    }
}

impl Neg for &DAlembertSeries {
    type Output = DAlembertSeries;
    fn neg(self) -> DAlembertSeries {
        self.scale(-1.0)
    }
}

impl Mul for &DAlembertSeries {
    type Output = DAlembertSeries;
    fn mul(self, o: &DAlembertSeries) -> DAlembertSeries {
        let mut out = DAlembertSeries::with_max_degree(self.max_degree.min(o.max_degree));
        for (a, va) in self.iter() {
            for (b, vb) in o.iter() {
                let n = a.n + b.n;
                if n > out.max_degree {
                    continue;
                }
                let m = a.m + b.m;
                let (pd, qd) = (a.p - b.p, a.q - b.q);
                let (ps, qs) = (a.p + b.p, a.q + b.q);
                let c = 0.5 * va * vb;
                let mut put = |p: i8, q: i8, kind: Kind, c: f64| {
                    let (key, sign) = canonical(n, m, p, q, kind);
                    if !(kind == Kind::Sin && key.p == 0 && key.q == 0) {
                        out.push(key, sign * c);
                    }
                };
                match (a.kind, b.kind) {
                    (Kind::Cos, Kind::Cos) => {
                        put(pd, qd, Kind::Cos, c);
                        put(ps, qs, Kind::Cos, c);
                    }
                    (Kind::Sin, Kind::Sin) => {
                        put(pd, qd, Kind::Cos, c);
                        put(ps, qs, Kind::Cos, -c);
                    }
                    (Kind::Sin, Kind::Cos) => {
                        put(ps, qs, Kind::Sin, c);
                        put(pd, qd, Kind::Sin, c);
                    }
                    (Kind::Cos, Kind::Sin) => {
                        put(ps, qs, Kind::Sin, c);
                        put(pd, qd, Kind::Sin, -c);
                    }
                }
            }
        }
        out
    }
}

impl Add for DAlembertSeries {
    type Output = DAlembertSeries;
    fn add(self, o: DAlembertSeries) -> DAlembertSeries {
        &self + &o
    }
}

impl Sub for DAlembertSeries {
    type Output = DAlembertSeries;
    fn sub(self, o: DAlembertSeries) -> DAlembertSeries {
        &self - &o
    }
}

impl Mul for DAlembertSeries {
    type Output = DAlembertSeries;
    fn mul(self, o: DAlembertSeries) -> DAlembertSeries {
        &self * &o
    }
}

impl Neg for DAlembertSeries {
    type Output = DAlembertSeries;
    fn neg(self) -> DAlembertSeries {
        -&self
    }
}

/// `[omega1^2 - nu^2][omega2^2 - nu^2]` with `nu = p omega1 - q omega2`.
pub fn delta_pq(p: i32, q: i32, f: &FrequencyPair) -> f64 {
    let nu = p as f64 * f.omega1 - q as f64 * f.omega2;
    let nu2 = nu * nu;
    // exact zero on the critical harmonics
    match (p.abs(), q.abs()) {
        (1, 0) | (0, 1) => 0.0,
        _ => (f.omega1 * f.omega1 - nu2) * (f.omega2 * f.omega2 - nu2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserCheck {
    pub satisfied: bool,
    pub witness: (i32, i32),
    pub min_value: f64,
}

/// Smallest `|k1 omega1 + k2 omega2|` over `0 < |k1| + |k2| <= kmax`.
pub fn moser_condition(f: &FrequencyPair, kmax: i32) -> MoserCheck {
    let mut best: (f64, (i32, i32)) = (f64::INFINITY, (0, 0));
    for k1 in 0..=kmax {
        for k2 in -kmax..=kmax {
            if k1.abs() + k2.abs() > kmax || (k1 == 0 && k2 <= 0) {
                continue;
            }
            let v = (k1 as f64 * f.omega1 + k2 as f64 * f.omega2).abs();
            let size = k1.abs() + k2.abs();
            let best_size = best.1 .0.abs() + best.1 .1.abs();
            if v < best.0 || (v == best.0 && size < best_size) {
                best = (v, (k1, k2));
            }
        }
    }
    MoserCheck { satisfied: best.0 > TOL_RES, witness: best.1, min_value: best.0 }
}

/// Random canonical series with degrees up to `max_n` and coefficients in
/// `[-1, 1]`, for property checks.
pub fn random_series<R: Rng>(rng: &mut R, max_n: u8, n_terms: usize) -> DAlembertSeries {
    let mut s = DAlembertSeries::zero();
    for _ in 0..n_terms {
        let n = rng.gen_range(0..=max_n);
        let m = rng.gen_range(0..=n);
        let pk = (n - m) / 2;
        let p = ((n - m) % 2 + 2 * rng.gen_range(0..=pk)) as i8;
        let q = -(m as i8) + 2 * rng.gen_range(0..=m) as i8;
        let kind = if rng.gen_bool(0.5) { Kind::Cos } else { Kind::Sin };
        let c = rng.gen_range(-1.0..=1.0);
        s.add_term(n, m, p, q, kind, c).expect("generator emits valid keys");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const F: FrequencyPair = FrequencyPair { omega1: 0.9633221090850995, omega2: 0.26834774854251275 };

    fn cos(n: u8, m: u8, p: i8, q: i8, c: f64) -> DAlembertSeries {
        DAlembertSeries::monomial(n, m, p, q, Kind::Cos, c).unwrap()
    }

    fn sin(n: u8, m: u8, p: i8, q: i8, c: f64) -> DAlembertSeries {
        DAlembertSeries::monomial(n, m, p, q, Kind::Sin, c).unwrap()
    }

    #[test]
    fn cos_squared() {
        let a = cos(1, 0, 1, 0, 1.0);
        let s = &a * &a;
        assert_eq!(s.len(), 2);
        assert_eq!(s.coeff(2, 0, 0, 0, Kind::Cos), 0.5);
        assert_eq!(s.coeff(2, 0, 2, 0, Kind::Cos), 0.5);
    }

    #[test]
    fn additive_inverse() {
        let a = &cos(1, 0, 1, 0, 0.3) + &sin(1, 1, 0, 1, -2.0);
        assert!((&a + &a.scale(-1.0)).is_empty());
    }

    #[test]
    fn first_order_square_by_hand() {
        // (A cos phi1 + B cos phi2)^2
        let (a, b) = (0.7, -1.3);
        let s = &cos(1, 0, 1, 0, a) + &cos(1, 1, 0, 1, b);
        let sq = &s * &s;
        assert!((sq.coeff(2, 0, 0, 0, Kind::Cos) - a * a / 2.0).abs() < 1e-15);
        assert!((sq.coeff(2, 0, 2, 0, Kind::Cos) - a * a / 2.0).abs() < 1e-15);
        assert!((sq.coeff(2, 2, 0, 0, Kind::Cos) - b * b / 2.0).abs() < 1e-15);
        assert!((sq.coeff(2, 2, 0, 2, Kind::Cos) - b * b / 2.0).abs() < 1e-15);
        assert!((sq.coeff(2, 1, 1, 1, Kind::Cos) - a * b).abs() < 1e-15);
        assert!((sq.coeff(2, 1, 1, -1, Kind::Cos) - a * b).abs() < 1e-15);
        assert_eq!(sq.len(), 6);
    }

    #[test]
    fn sine_sign_canonicalization() {
        let s = sin(2, 1, -1, 1, 1.0);
        assert_eq!(s.coeff(2, 1, 1, -1, Kind::Sin), -1.0);
        assert_eq!(s.coeff(2, 1, -1, 1, Kind::Sin), 1.0);
        assert!(DAlembertSeries::monomial(2, 0, 1, 0, Kind::Cos, 1.0).is_err());
        assert!(DAlembertSeries::monomial(2, 2, 0, 1, Kind::Cos, 1.0).is_err());
        assert!(sin(2, 0, 0, 0, 3.0).is_empty());
    }

    #[test]
    fn d_operator_examples() {
        let d = cos(2, 0, 2, 0, 1.0).apply_d(&F);
        assert_eq!(d.coeff(2, 0, 2, 0, Kind::Sin), -2.0 * F.omega1);
        let c = cos(2, 1, 1, 1, 1.0);
        let nu = F.omega1 - F.omega2;
        assert_eq!(c.apply_d2(&F).coeff(2, 1, 1, 1, Kind::Cos), -nu * nu);
        assert!(DAlembertSeries::constant(4.0).apply_d(&F).is_empty());
        let s = sin(1, 1, 0, 1, 1.0).apply_d(&F);
        assert_eq!(s.coeff(1, 1, 0, 1, Kind::Cos), -F.omega2);
    }

    #[test]
    fn delta_values() {
        assert_eq!(delta_pq(1, 0, &F), 0.0);
        assert_eq!(delta_pq(0, 1, &F), 0.0);
        assert_eq!(delta_pq(0, 0, &F), F.omega1.powi(2) * F.omega2.powi(2));
        let w1 = F.omega1;
        let expect = -3.0 * w1 * w1 * (F.omega2.powi(2) - 4.0 * w1 * w1);
        assert!((delta_pq(2, 0, &F) - expect).abs() < 1e-14);
    }

    #[test]
    fn inversion_examples() {
        let r = cos(2, 0, 2, 0, 3.0).invert_delta(&F).unwrap();
        assert!((r.coeff(2, 0, 2, 0, Kind::Cos) - 3.0 / delta_pq(2, 0, &F)).abs() < 1e-15);
        let c = DAlembertSeries::constant(2.0).invert_delta(&F).unwrap();
        assert!((c.coeff(0, 0, 0, 0, Kind::Cos) - 2.0 / (F.omega1 * F.omega2).powi(2)).abs() < 1e-14);
        match sin(1, 0, 1, 0, 1.0).invert_delta(&F) {
            Err(Error::CriticalTerms { keys }) => assert_eq!(keys, vec!["1 0 1 0 sin".to_string()]),
            other => panic!("{other:?}"),
        }
        let res = FrequencyPair { omega1: 0.8, omega2: 0.4 };
        // nu = 2 omega2 - ... : p = 0, q = 2 gives nu = -0.8, omega1^2 - nu^2 = 0
        assert!(matches!(cos(2, 2, 0, 2, 1.0).invert_delta(&res), Err(Error::SmallDivisor { .. })));
    }

    #[test]
    fn critical_part_examples() {
        let b1 = &cos(1, 0, 1, 0, 0.5) + &sin(1, 1, 0, 1, 0.25);
        assert_eq!(b1.critical_part(), b1);
        assert!(cos(2, 0, 2, 0, 1.0).critical_part().is_empty());
    }

    #[test]
    fn moser_examples() {
        let m = moser_condition(&FrequencyPair { omega1: 0.6, omega2: 0.3 }, 4);
        assert!(!m.satisfied);
        assert_eq!(m.witness, (1, -2));
        let eq = moser_condition(&FrequencyPair { omega1: 0.7, omega2: 0.7 }, 4);
        assert!(!eq.satisfied);
        assert_eq!(eq.witness, (1, -1));
        assert!(moser_condition(&F, 4).satisfied);
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_series(&mut rng, 4, 12);
        let back = DAlembertSeries::parse(&s.to_text()).unwrap();
        assert_eq!(back, s);
        assert!(DAlembertSeries::parse("1 0 1 0 tan 1.0").is_err());
        assert!(DAlembertSeries::parse("2 0 1 0 cos 1.0").is_err());
        assert!(DAlembertSeries::parse("2 0 0 0 sin 1.0").is_err());
        match DAlembertSeries::parse("# header\n\n1 0 1 0 cos x") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn evaluate_matches_trig() {
        let s = &cos(2, 1, 1, -1, 0.5) + &sin(1, 0, 1, 0, 2.0);
        let (i1, i2, a, b) = (0.3f64, 0.7f64, 0.4f64, 1.9f64);
        let expect = 0.5 * (i1 * i2).sqrt() * (a - b).cos() + 2.0 * i1.sqrt() * a.sin();
        assert!((s.evaluate(i1, i2, a, b) - expect).abs() < 1e-15);
    }

    #[test]
    fn truncation_at_max_degree() {
        let a = cos(3, 0, 3, 0, 1.0);
        assert!((&a * &a).is_empty());
        let mut b = a.clone();
        b.set_max_degree(8);
        assert_eq!((&b * &b).len(), 2);
    }

    fn series(seed: u64, max_n: u8) -> DAlembertSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..6);
        random_series(&mut rng, max_n, k)
    }

    proptest! {
        #[test]
        fn ring_axioms(sa in any::<u64>(), sb in any::<u64>(), sc in any::<u64>()) {
            let (a, b, c) = (series(sa, 2), series(sb, 2), series(sc, 2));
            prop_assert!((&a * &b).max_abs_diff(&(&b * &a)) < 1e-14);
            prop_assert!((&(&a * &b) * &c).max_abs_diff(&(&a * &(&b * &c))) < 1e-13);
            prop_assert!((&a * &(&b + &c)).max_abs_diff(&(&(&a * &b) + &(&a * &c))) < 1e-14);
            prop_assert!((&a + &b).max_abs_diff(&(&b + &a)) == 0.0);
            let one = DAlembertSeries::constant(1.0);
            prop_assert!((&a * &one).max_abs_diff(&a) < 1e-15);
        }

        #[test]
        fn d_is_a_derivation(sa in any::<u64>(), sb in any::<u64>()) {
            let (a, b) = (series(sa, 2), series(sb, 2));
            let lhs = (&a * &b).apply_d(&F);
            let rhs = &(&a.apply_d(&F) * &b) + &(&a * &b.apply_d(&F));
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-13);
            prop_assert!(a.apply_d(&F).apply_d(&F).max_abs_diff(&a.apply_d2(&F)) < 1e-14);
        }

        #[test]
        fn inversion_is_consistent(sa in any::<u64>()) {
            let a = &series(sa, 4) - &series(sa, 4).critical_part();
            let inv = a.invert_delta(&F).unwrap();
            let w1 = F.omega1 * F.omega1;
            let w2 = F.omega2 * F.omega2;
            let t = &inv.apply_d2(&F) + &inv.scale(w1);
            let back = &t.apply_d2(&F) + &t.scale(w2);
            prop_assert!(back.max_abs_diff(&a) < 1e-12);
        }

        #[test]
        fn parity_preserved(sa in any::<u64>(), sb in any::<u64>()) {
            let (a, b) = (series(sa, 3), series(sb, 3));
            prop_assert!(a.keys_valid() && b.keys_valid());
            prop_assert!((&a * &b).keys_valid());
            prop_assert!((&a + &b).keys_valid());
            prop_assert!(a.apply_d(&F).keys_valid());
        }
    }
}
