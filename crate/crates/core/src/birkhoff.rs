//! Second-order Birkhoff normalization about L4.
//!
//! `B2` is built two ways: from the tabulated `r`/`s` coefficients, and by
//! solving the second-order Lagrange equations through the series engine.
//! [`discrepancies`] compares the two coefficient by coefficient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{cubic_coeffs, quadratic_coeffs, CubicCoeffs, QuadraticCoeffs};
use crate::linear_normal_form::{frequencies_with, whittaker_matrix, Frequencies, WhittakerTransform};
use crate::params::DerivedParams;
use crate::poisson_series::{moser_condition, DAlembertSeries, FrequencyPair, Kind, TOL_DIV};

const SQRT3: f64 = 1.732_050_807_568_877_2;
pub const TOL_CRIT: f64 = 1e-8;

/// One of the two coefficient families; index `i` holds subscript `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTable {
    pub plain: [f64; 4],
    pub prime: [f64; 4],
    pub double_prime: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FGTables {
    #[serde(rename = "F")]
    pub f: HarmonicTable,
    #[serde(rename = "G")]
    pub g: HarmonicTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RSCoefficients {
    pub r: [f64; 10],
    pub s: [f64; 10],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H3Coefficients {
    #[serde(rename = "A30")]
    pub a30: f64,
    #[serde(rename = "A21")]
    pub a21: f64,
    #[serde(rename = "A12")]
    pub a12: f64,
    #[serde(rename = "A03")]
    pub a03: f64,
    /// Largest coefficient of the degree-3 part of `H3`.
    pub h3_norm: f64,
    /// Largest coefficient of `L3` evaluated on `B1` alone.
    pub l3_on_b1_norm: f64,
}

impl H3Coefficients {
    pub fn max_abs(&self) -> f64 {
        self.a30.abs().max(self.a21.abs()).max(self.a12.abs()).max(self.a03.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondOrderSolution {
    pub b1_10: DAlembertSeries,
    pub b1_01: DAlembertSeries,
    pub b2_10: DAlembertSeries,
    pub b2_01: DAlembertSeries,
    pub phi2: DAlembertSeries,
    pub psi2: DAlembertSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub component: String,
    pub key: String,
    pub closed_form: f64,
    pub generic: f64,
    pub abs_diff: f64,
    pub rel_diff: f64,
}

pub fn fg_tables(d: &DerivedParams) -> FGTables {
    let (g, e, a, w, s3) = (d.gamma, d.epsilon, d.a2, d.nw1(), SQRT3);
    let we = w * e;

    let f1 = -we / 6.0;
    let f2 = 3.0 / 32.0
        * (16.0 / 3.0 * e + 6.0 * a - 979.0 / 18.0 * a * e + (143.0 + 9.0 * g) / (6.0 * s3) * w
            + (555.0 + 376.0 * g) / (27.0 * s3) * we
            + g * (14.0 + 4.0 * e / 3.0 + 25.0 * a - 1507.0 / 18.0 * a * e
                - (215.0 + 29.0 * g) / (6.0 * s3) * w
                - 2.0 * (1174.0 + 169.0 * g) / (27.0 * s3) * we));
    let f3 = 3.0 * s3 / 16.0
        * (14.0 - 16.0 / 3.0 * e + 23.0 * a / 2.0 - 104.0 / 9.0 * a * e
            + 115.0 * (1.0 + g) / (18.0 * s3) * w
            - 2.0 * (439.0 - 68.0 * g) / (27.0 * s3) * we
            + g * (32.0 * e / 3.0 + 40.0 * a - 310.0 / 9.0 * a * e + (511.0 + 53.0 * g) / (6.0 * s3) * w
                - (2519.0 - 249.0 * g) / (27.0 * s3) * we));
    let f4 = -3.0 / 256.0
        * (364.0 + 420.0 * a - 17801.0 / 9.0 * a * e + (2821.0 + 189.0 * g) / (3.0 * s3) * w
            - (23077.0 + 9592.0 * g) / (27.0 * s3) * we
            + 28.0 * g
                * (23.0 + 100.0 * e / 21.0 + 849.0 * a / 14.0 + 59.0 / 7.0 * a * e
                    - (125.0 + 38.0 * g) / (6.0 * s3) * w
                    - (87613.0 - 213.0 * g) / (27.0 * s3) * we));

    let f1p = we / (3.0 * s3);
    let f2p = 3.0 * s3 / 16.0
        * (14.0 - 16.0 / 3.0 * e + a - 1367.0 / 18.0 * a * e + 115.0 * (1.0 + g) / (18.0 * s3) * w
            - (863.0 - 136.0 * g) / (27.0 * s3) * we
            + g * (32.0 * e / 3.0 + 40.0 * a - 382.0 / 9.0 * a * e + (511.0 + 53.0 * g) / (6.0 * s3) * w
                - (2519.0 - 24.0 * g) / (27.0 * s3) * we));
    let f3p = -9.0 / 8.0
        * (8.0 / 3.0 * e + 203.0 * a / 6.0 - 721.0 / 54.0 * a * e - (105.0 + 15.0 * g) / (18.0 * s3) * w
            - (319.0 - 114.0 * g) / (81.0 * s3) * we
            + g * (2.0 - 4.0 * e / 9.0 - 173.0 * a / 6.0 - 781.0 / 9.0 * a * e
                + (197.0 + 23.0 * g) / (18.0 * s3) * w
                - (265.0 - 32.0 * g) / (81.0 * s3) * we));
    let f4p = -3.0 * s3 / 16.0
        * (392.0 - 532.0 * e / 3.0 + 1918.0 * a / 3.0 - 28582.0 / 9.0 * a * e
            + (203.0 + 1211.0 * g) / (9.0 * s3) * w
            + (949.0 + 4378.0 * g) / (27.0 * s3) * we
            + 28.0 * g
                * (108.0 * e / 7.0 + 4037.0 * a / 84.0 - 611.0 / 21.0 * a * e
                    + (8397.0 + 919.0 * g) / (84.0 * s3) * w
                    - (92266.0 - 1869.0 * g) / (27.0 * s3) * we));

    let f1pp = we / 6.0;
    let f2pp = -9.0 / 32.0
        * (8.0 / 3.0 * e + 203.0 * a / 6.0 - 625.0 / 54.0 * a * e - (105.0 + 15.0 * g) / (18.0 * s3) * w
            - (307.0 - 114.0 * g) / (81.0 * s3) * we
            + g * (2.0 - 4.0 * e / 9.0 + 55.0 * a / 2.0 - 797.0 / 54.0 * a * e
                + (197.0 + 23.0 * g) / (18.0 * s3) * w
                - (211.0 - 32.0 * g) / (81.0 * s3) * we));
    let f3pp = -9.0 * s3 / 16.0
        * (2.0 - 8.0 / 3.0 * e + 55.0 * a / 6.0 - 134.0 / 3.0 * a * e - (37.0 + g) / (18.0 * s3) * w
            - (93.0 + 226.0 * g) / (81.0 * s3) * we
            + g * (4.0 * e + 169.0 / 27.0 * a * e + (241.0 + 45.0 * g) / (18.0 * s3) * w
                - (1558.0 - 126.0 * g) / (81.0 * s3) * we));
    let f4pp = 9.0 / 256.0
        * (212.0 / 3.0 * e + 2950.0 * a / 3.0 - 1370.0 / 27.0 * a * e - (771.0 + 237.0 * g) / (9.0 * s3) * w
            - 2.0 * (1907.0 - 984.0 * g) / (81.0 * s3) * we
            + 28.0 * g
                * (11.0 / 7.0 + 4.0 * e / 9.0 - 152.0 * a / 7.0 - 36965.0 / 504.0 * a * e
                    + (2569.0 + 277.0 * g) / (252.0 * s3) * w
                    + (22603.0 + 4396.0 * g) / (1134.0 * s3) * we));

    let g1 = -we / 6.0;
    let g2 = 3.0 / 32.0
        * (14.0 - 16.0 / 3.0 * e + a - 1367.0 / 18.0 * a * e + 115.0 * (1.0 + g) / (18.0 * s3) * w
            - (863.0 - 136.0 * g) / (27.0 * s3) * we
            + g * (32.0 * e / 3.0 + 40.0 * a - 382.0 / 9.0 * a * e + (511.0 + 53.0 * g) / (6.0 * s3) * w
                - (2519.0 - 24.0 * g) / (27.0 * s3) * we));
    let g3 = 3.0 * s3 / 16.0
        * (16.0 / 3.0 * e + 6.0 * a - 907.0 / 18.0 * a * e + (143.0 + 9.0 * g) / (6.0 * s3) * w
            + (477.0 + 403.0 * g) / (27.0 * s3) * we
            + g * (14.0 + 4.0 * e / 3.0 + 71.0 * a / 2.0 - 1489.0 / 18.0 * a * e
                - (215.0 + 29.0 * g) / (6.0 * s3) * w
                - 2.0 * (1174.0 + 169.0 * g) / (27.0 * s3) * we));
    let g4 = 3.0 * s3 / 256.0
        * (84.0 + 52.0 * e + 212.0 * a - 267.0 * a * e + 2.0 * (299.0 + 61.0 * g) / (3.0 * s3) * w
            - (14854.0 + 225.0 * g) / (27.0 * s3) * we
            + g * (32.0 * e + 156.0 * a + 649.0 * a * e - (562.0 + 8.0 * g) / (3.0 * s3) * w
                + (13285.0 + 5169.0 * g) / (27.0 * s3) * we));

    let g1p = -we / s3;
    let g2p = 9.0 / 16.0
        * (8.0 / 3.0 * e + 203.0 * a / 6.0 - 625.0 / 54.0 * a * e - (105.0 + 15.0 * g) / (18.0 * s3) * w
            - (307.0 - 114.0 * g) / (81.0 * s3) * we
            - g * (2.0 - 4.0 * e / 9.0 - 55.0 * a / 2.0 - 797.0 / 54.0 * a * e
                + (197.0 + 23.0 * g) / (18.0 * s3) * w
                - (211.0 - 32.0 * g) / (81.0 * s3) * we));
    let g3p = 3.0 * s3 / 8.0
        * (14.0 - 16.0 / 3.0 * e + 65.0 * a / 6.0 - 1439.0 / 18.0 * a * e + 115.0 * (1.0 + g) / (18.0 * s3) * w
            - (941.0 - 118.0 * g) / (27.0 * s3) * we
            + g * (32.0 * e / 3.0 - 40.0 * a - 310.0 / 9.0 * a * e + (511.0 + 53.0 * g) / (6.0 * s3) * w
                - (251.0 - 24.0 * g) / (27.0 * s3) * we));
    let g4p = -9.0 / 128.0
        * (12.0 * e - 287.0 * a + 847.0 / 9.0 * a * e - 2.0 * (28.0 + g) / s3 * w
            - 4.0 * (2210.0 - 69.0 * g) / (27.0 * s3) * we
            - g * (96.0 + 152.0 * e / 3.0 + 135.0 * a - 2320.0 / 9.0 * a * e
                + (497.0 - 123.0 * g) / (3.0 * s3) * w
                - 4.0 * (17697.0 + 32.0 * g) / (27.0 * s3) * we));

    let g1pp = -we / 6.0;
    let g2pp = 9.0 * s3 / 32.0
        * (2.0 - 8.0 / 3.0 * e + 23.0 * a / 3.0 - 44.0 * a * e - (37.0 + g) / (18.0 * s3) * w
            - (123.0 + 349.0 * g) / (3.0 * s3) * we
            + g * (4.0 * e + 88.0 * a / 27.0 + (421.0 + 45.0 * g) / (18.0 * s3) * w
                - (1558.0 - 126.0 * g) / (81.0 * s3) * we));
    let g3pp = -9.0 / 16.0
        * (8.0 / 9.0 * e + 203.0 * a / 6.0 - 589.0 / 54.0 * a * e - 5.0 * (51.0 + 2.0 * g) / (18.0 * s3) * w
            - (349.0 - 282.0 * g) / (81.0 * s3) * we
            + g * (2.0 - 4.0 * e / 9.0 - 26.0 * a - 412.0 / 27.0 * a * e
                + (197.0 + 23.0 * g) / (18.0 * s3) * w
                - (211.0 - 32.0 * g) / (81.0 * s3) * we));
    let g4pp = -9.0 * s3 / 256.0
        * (12.0 + 20.0 / 3.0 * e + 76.0 * a - 350.0 / 3.0 * a * e + 32.0 * g / (3.0 * s3) * w
            - 2.0 * (1529.0 + 450.0 * g) / (27.0 * s3) * we
            + g * (8.0 * e - 749.0 * a / 3.0 + 808.0 / 9.0 * a * e - (109.0 - 40.0 * g) / (3.0 * s3) * w
                + (35.0 - 1269.0 * g) / (27.0 * s3) * we));

    FGTables {
        f: HarmonicTable {
            plain: [f1, f2, f3, f4],
            prime: [f1p, f2p, f3p, f4p],
            double_prime: [f1pp, f2pp, f3pp, f4pp],
        },
        g: HarmonicTable {
            plain: [g1, g2, g3, g4],
            prime: [g1p, g2p, g3p, g4p],
            double_prime: [g1pp, g2pp, g3pp, g4pp],
        },
    }
}

fn checked(name: &str, den: f64) -> Result<f64> {
    if den.abs() < TOL_DIV {
        Err(Error::SmallDivisor { what: name.to_string(), value: den })
    } else {
        Ok(den)
    }
}

/// The ten tabulated harmonic coefficients for one table family. Called with
/// the `F` family this gives `r`, with the `G` family `s`.
pub fn harmonic_coefficients(f: &Frequencies, j: &WhittakerTransform, t: &HarmonicTable) -> Result<[f64; 10]> {
    let (w1, w2) = (f.omega1, f.omega2);
    let [t1, t2, t3, t4] = t.plain;
    let [_, t2p, t3p, t4p] = t.prime;
    let t1p = t.prime[0];
    let [t1pp, t2pp, t3pp, t4pp] = t.double_prime;
    let (j13, j14, j21, j22, j23, j24) = (j.j13, j.j14, j.j21, j.j22, j.j23, j.j24);
    let sq12 = (w1 * w2).sqrt();
    let r12 = (w1 / w2).sqrt();
    let r21 = (w2 / w1).sqrt();

    let d12 = checked("omega1^2 omega2^2", w1 * w1 * w2 * w2)?;
    let d3 = checked("3 omega1^2 (4 omega1^2 - omega2^2)", 3.0 * w1 * w1 * (4.0 * w1 * w1 - w2 * w2))?;
    let d4 = checked("3 omega2^2 (4 omega2^2 - omega1^2)", 3.0 * w2 * w2 * (4.0 * w2 * w2 - w1 * w1))?;
    let d5 = checked(
        "omega1 omega2 (2 omega1 + omega2)(4 omega1 + 2 omega2)",
        w1 * w2 * (2.0 * w1 + w2) * (4.0 * w1 + 2.0 * w2),
    )?;
    let d6 = checked(
        "omega1 omega2 (2 omega1 - omega2)(4 omega1 - 2 omega2)",
        w1 * w2 * (2.0 * w1 - w2) * (4.0 * w1 - 2.0 * w2),
    )?;
    let d9 = checked(
        "omega1 omega2 (2 omega1 + omega2)(omega1 + 2 omega2)",
        w1 * w2 * (2.0 * w1 + w2) * (w1 + 2.0 * w2),
    )?;
    let d10 = checked(
        "omega1 omega2 (2 omega1 - omega2)(2 omega2 - omega1)",
        w1 * w2 * (2.0 * w1 - w2) * (2.0 * w2 - w1),
    )?;

    let q1 = j21 * j21 / w1 - j23 * j23 * w1;
    let q2 = j22 * j22 / w2 - j24 * j24 * w2;
    let cross_a = j13 * j22 * r12 - j14 * j21 * r21;
    let cross_b = j21 * j24 * r21 - j22 * j23 * r12;
    let cross_b_plus = j21 * j24 * r21 + j22 * j23 * r12;
    let mix = |c: f64, cp: f64| (j13 * j14 * c + (j13 * j24 + j14 * j23) * cp) * sq12;
    let pair = j21 * j22 / sq12 + j23 * j24 * sq12;
    let pair_minus = j21 * j22 / sq12 - j23 * j24 * sq12;

    let r1 = (j13 * j13 * w1 * t4 + j13 * j23 * w1 * t4p + (j21 * j21 / w1 + j23 * j23 * w1) * t4pp) / d12;
    let r2 = (j14 * j14 * w2 * t4 + j14 * j24 * w2 * t4p + (j22 * j22 / w2 + j24 * j24 * w2) * t4pp) / d12;

    let r3 = -(8.0 * w1.powi(3) * j21 * (j13 * t1p + 2.0 * j23 * t1pp)
        + 4.0 * w1 * w1 * ((j13 * t2 + j23 * t2pp) * j13 * w1 - q1 * t1pp)
        - 2.0 * w1 * j21 * (j13 * t3p + 2.0 * j23 * t3pp)
        - w1 * j13 * (j13 * t4 + j23 * t4pp) * w1
        + q1 * t1pp)
        / d3;

    let r4 = (8.0 * w2.powi(3) * j22 * (j14 * t1p + 2.0 * j24 * t1pp)
        - 4.0 * w2 * w2 * ((j14 * t2 + j24 * t2pp) * j14 * w2 - q2 * t2pp)
        - 2.0 * w2 * j22 * (j14 * t3p + 2.0 * j24 * t3pp)
        - w2 * j14 * (j14 * t4 + j24 * t4pp) * w2
        - q2 * t4pp)
        / d4;

    let sp = w1 + w2;
    let r5 = (sp.powi(3) * (cross_a * t1p - 2.0 * cross_b * t1pp)
        - sp * sp * (2.0 * mix(t2, t2p) + pair * t2pp)
        - sp * (cross_a * t3p - 2.0 * cross_b * t3pp)
        + (2.0 * mix(t4, t4p) + 2.0 * pair * t4pp))
        / d5;

    let sm = w1 - w2;
    let odd = j21 * j22 * r21 + j22 * j23 * r12;
    let r6 = -(sm.powi(3) * (cross_a * t1p + 2.0 * cross_b_plus * t1pp)
        + sm * sm * (2.0 * mix(t2, t2p) - 2.0 * pair_minus * t2pp)
        - sm * (cross_a * t3p + 2.0 * odd * t3pp)
        - (2.0 * mix(t4, t4p) - 2.0 * pair_minus * t4pp))
        / d6;

    let r7 = (8.0 * w1.powi(3) * (j13 * (j13 * t1 + j23 * t1p) * w1 - q1 * t1pp)
        - 2.0 * w1 * (w1 * j13 * (j13 * t3 + j23 * t3p) - q1 * t3pp)
        - 4.0 * w1 * w1 * j21 * (j13 * t2 + j23 * t2pp) * w1
        + j21 * (j13 * t4p + 2.0 * j23 * t4pp))
        / d3;

    let r8 = -(8.0 * w2.powi(3) * (j14 * (j14 * t1 + j24 * t1p) * w2 - q2 * t1pp)
        + 4.0 * w2 * w2 * j22 * (j14 * t2 + 2.0 * j24 * t2pp) * w2
        - 2.0 * w2 * (w2 * j14 * (j14 * t3 + j24 * t3p) - q2 * t3pp)
        - j22 * (j14 * t4p + 2.0 * j24 * t4pp))
        / d4;

    // 2 multiplies only the J13 J14 product in the first bracket
    let mix_first = (2.0 * j13 * j14 * t1 + (j13 * j24 + j14 * j23) * t1p) * sq12;
    let r9 = (sp.powi(3) * (mix_first + 2.0 * pair * t1pp)
        - sp * sp * (cross_a * t2p - 2.0 * cross_b * t2pp)
        - sp * (2.0 * mix(t3, t3p) + 2.0 * pair * t3pp)
        - (cross_a * t4p - 2.0 * cross_b * t4pp))
        / d9;

    let r10 = (sm.powi(3) * (mix_first - 2.0 * pair_minus * t1pp)
        - sm * sm * (cross_a * t2p + 2.0 * cross_b_plus * t2pp)
        - sm * (2.0 * mix(t3, t3p) - 2.0 * pair_minus * t3pp)
        + (cross_a * t4p + 2.0 * cross_b * t4pp))
        / d10;

    Ok([r1, r2, r3, r4, r5, r6, r7, r8, r9, r10])
}

pub fn rs_coefficients(f: &Frequencies, j: &WhittakerTransform, t: &FGTables) -> Result<RSCoefficients> {
    Ok(RSCoefficients { r: harmonic_coefficients(f, j, &t.f)?, s: harmonic_coefficients(f, j, &t.g)? })
}

/// `(n, m, p, q, kind)` of the ten closed-form harmonics, in `r` order.
pub const B2_HARMONICS: [(u8, u8, i8, i8, Kind); 10] = [
    (2, 0, 0, 0, Kind::Cos),
    (2, 2, 0, 0, Kind::Cos),
    (2, 0, 2, 0, Kind::Cos),
    (2, 2, 0, 2, Kind::Cos),
    (2, 1, 1, -1, Kind::Cos),
    (2, 1, 1, 1, Kind::Cos),
    (2, 0, 2, 0, Kind::Sin),
    (2, 2, 0, 2, Kind::Sin),
    (2, 1, 1, -1, Kind::Sin),
    (2, 1, 1, 1, Kind::Sin),
];

fn series_from(c: &[f64; 10], sign: f64) -> DAlembertSeries {
    let mut s = DAlembertSeries::zero();
    for (&(n, m, p, q, kind), &v) in B2_HARMONICS.iter().zip(c) {
        s.add_term(n, m, p, q, kind, sign * v).expect("closed-form harmonics are canonical");
    }
    s
}

/// `(B2_10, B2_01)` from the tabulated coefficients.
pub fn b2_closed_form(rs: &RSCoefficients) -> (DAlembertSeries, DAlembertSeries) {
    (series_from(&rs.r, 1.0), series_from(&rs.s, -1.0))
}

/// First-order components `(B1_10, B1_01)`.
pub fn b1_series(f: &Frequencies, j: &WhittakerTransform) -> (DAlembertSeries, DAlembertSeries) {
    let (a1, a2) = ((2.0 * f.omega1).sqrt(), (2.0 * f.omega2).sqrt());
    let mut x = DAlembertSeries::zero();
    let mut y = DAlembertSeries::zero();
    let put = |s: &mut DAlembertSeries, m: u8, kind: Kind, c: f64| {
        let (p, q) = if m == 0 { (1, 0) } else { (0, 1) };
        s.add_term(1, m, p, q, kind, c).expect("first harmonics are canonical");
    };
    put(&mut x, 0, Kind::Cos, j.j13 * a1);
    put(&mut x, 1, Kind::Cos, j.j14 * a2);
    put(&mut y, 0, Kind::Sin, j.j21 * (2.0 / f.omega1).sqrt());
    put(&mut y, 1, Kind::Sin, j.j22 * (2.0 / f.omega2).sqrt());
    put(&mut y, 0, Kind::Cos, j.j23 * a1);
    put(&mut y, 1, Kind::Cos, j.j24 * a2);
    (x, y)
}

fn pair(f: &Frequencies) -> FrequencyPair {
    FrequencyPair { omega1: f.omega1, omega2: f.omega2 }
}

/// `(dL3/dx, dL3/dy)` on the series `x, y` with velocities `vx, vy`.
fn l3_gradient(
    c: &CubicCoeffs,
    x: &DAlembertSeries,
    y: &DAlembertSeries,
    vx: &DAlembertSeries,
    vy: &DAlembertSeries,
) -> (DAlembertSeries, DAlembertSeries) {
    let (xx, xy, yy) = (x * x, x * y, y * y);
    let cubic_x = &(&xx.scale(c.t1) + &xy.scale(2.0 * c.t2)) + &yy.scale(c.t3);
    let cubic_y = &(&xx.scale(c.t2) + &xy.scale(2.0 * c.t3)) + &yy.scale(c.t4);
    let [kx, ky] = c.t5.velocity_coeffs();
    // T5 = vx (kx0 x^2 + kx1 xy + kx2 y^2) + vy (ky0 x^2 + ky1 xy + ky2 y^2)
    let lin = |k: [f64; 3], dx: bool| {
        if dx {
            &x.scale(2.0 * k[0]) + &y.scale(k[1])
        } else {
            &x.scale(k[1]) + &y.scale(2.0 * k[2])
        }
    };
    let t5_x = &(vx * &lin(kx, true)) + &(vy * &lin(ky, true));
    let t5_y = &(vx * &lin(kx, false)) + &(vy * &lin(ky, false));
    (&cubic_x.scale(-0.5) - &t5_x, &cubic_y.scale(-0.5) - &t5_y)
}

pub fn generic_second_order_solve_with(
    q: &QuadraticCoeffs,
    c: &CubicCoeffs,
    n: f64,
    f: &Frequencies,
    j: &WhittakerTransform,
) -> Result<SecondOrderSolution> {
    let fp = pair(f);
    let moser = moser_condition(&fp, 4);
    if !moser.satisfied {
        return Err(Error::Resonance(format!(
            "Moser condition fails at k = {:?} (|k.omega| = {:e})",
            moser.witness, moser.min_value
        )));
    }
    let (b1x, b1y) = b1_series(f, j);
    let (vx, vy) = (b1x.apply_d(&fp), b1y.apply_d(&fp));
    let (x2, y2) = l3_gradient(c, &b1x, &b1y, &vx, &vy);

    let phi2 = &(&(&x2.apply_d2(&fp) + &x2.scale(2.0 * q.f - n * n)) + &y2.apply_d(&fp).scale(2.0 * n))
        - &y2.scale(q.g);
    let psi2 = &(&(&x2.apply_d(&fp).scale(2.0 * n) + &x2.scale(q.g)) - &y2.apply_d2(&fp))
        - &y2.scale(2.0 * q.e - n * n);

    for (name, s) in [("Phi2", &phi2), ("Psi2", &psi2)] {
        let crit = s.critical_part();
        if crit.max_abs() > TOL_CRIT * s.max_abs().max(f64::MIN_POSITIVE) {
            let keys = crit.iter().map(|(k, v)| format!("{name}: {k} = {v:e}")).collect();
            return Err(Error::CriticalTerms { keys });
        }
    }
    let strip = |s: &DAlembertSeries| s - &s.critical_part();
    let b2_10 = strip(&phi2).invert_delta(&fp)?;
    let b2_01 = -&strip(&psi2).invert_delta(&fp)?;
    Ok(SecondOrderSolution { b1_10: b1x, b1_01: b1y, b2_10, b2_01, phi2, psi2 })
}

pub fn generic_second_order_solve(
    d: &DerivedParams,
    f: &Frequencies,
    j: &WhittakerTransform,
) -> Result<SecondOrderSolution> {
    generic_second_order_solve_with(&quadratic_coeffs(d), &cubic_coeffs(d), d.n, f, j)
}

/// `H3 = -L3` on `x = B1 + B2`, `y = B1 + B2`, truncated at degree 3.
pub fn h3_coefficients(
    c: &CubicCoeffs,
    f: &Frequencies,
    b1: (&DAlembertSeries, &DAlembertSeries),
    b2: (&DAlembertSeries, &DAlembertSeries),
) -> H3Coefficients {
    let fp = pair(f);
    let eval_l3 = |x: &DAlembertSeries, y: &DAlembertSeries| {
        let (vx, vy) = (x.apply_d(&fp), y.apply_d(&fp));
        let (xx, yy) = (x * x, y * y);
        let cubic = &(&(&(&xx * x).scale(c.t1) + &(&xx * y).scale(3.0 * c.t2)) + &(&yy * x).scale(3.0 * c.t3))
            + &(&yy * y).scale(c.t4);
        let [kx, ky] = c.t5.velocity_coeffs();
        let quad = |k: [f64; 3]| &(&xx.scale(k[0]) + &(x * y).scale(k[1])) + &yy.scale(k[2]);
        let t5 = &(&vx * &quad(kx)) + &(&vy * &quad(ky));
        (&cubic.scale(-1.0 / 6.0) - &t5).homogeneous(3)
    };
    let x = b1.0 + b2.0;
    let y = b1.1 + b2.1;
    let h3 = -&eval_l3(&x, &y);
    let a = |m: u8| h3.coeff(3, m, 0, 0, Kind::Cos);
    H3Coefficients {
        a30: a(0),
        a21: a(1),
        a12: a(2),
        a03: a(3),
        h3_norm: h3.max_abs(),
        l3_on_b1_norm: eval_l3(b1.0, b1.1).max_abs(),
    }
}

/// Coefficient-wise comparison of the two `B2` routes. `rel_diff` is scaled
/// by the generic coefficient, floored at `1e-12` of the largest one.
pub fn discrepancies(
    closed: (&DAlembertSeries, &DAlembertSeries),
    generic: (&DAlembertSeries, &DAlembertSeries),
) -> Vec<Discrepancy> {
    let scale = generic.0.max_abs().max(generic.1.max_abs());
    let floor = 1e-12 * scale;
    let mut out = Vec::new();
    for (name, c, g) in [("B2_10", closed.0, generic.0), ("B2_01", closed.1, generic.1)] {
        let mut keys: Vec<_> = c.iter().map(|(k, _)| k).chain(g.iter().map(|(k, _)| k)).collect();
        keys.sort();
        keys.dedup();
        for k in keys {
            let (cv, gv) = (c.get(&k), g.get(&k));
            let abs = (cv - gv).abs();
            let den = gv.abs().max(floor);
            out.push(Discrepancy {
                component: name.to_string(),
                key: k.to_string(),
                closed_form: cv,
                generic: gv,
                abs_diff: abs,
                rel_diff: if den > 0.0 { abs / den } else { 0.0 },
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Closed,
    Generic,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirkhoffReport {
    pub frequencies: Frequencies,
    pub whittaker: WhittakerTransform,
    pub tables: FGTables,
    pub rs: Option<RSCoefficients>,
    pub closed: Option<(DAlembertSeries, DAlembertSeries)>,
    pub generic: Option<SecondOrderSolution>,
    pub h3: H3Coefficients,
    pub discrepancies: Vec<Discrepancy>,
    pub max_rel_discrepancy: Option<f64>,
}

/// Full second-order pipeline. `H3` uses the generic `B2` when available.
pub fn birkhoff(d: &DerivedParams, route: Route) -> Result<BirkhoffReport> {
    let q = quadratic_coeffs(d);
    let c = cubic_coeffs(d);
    let f = frequencies_with(&q, d.n)?;
    let j = whittaker_matrix(d, &f)?;
    let tables = fg_tables(d);
    let (rs, closed) = if route != Route::Generic {
        let rs = rs_coefficients(&f, &j, &tables)?;
        (Some(rs), Some(b2_closed_form(&rs)))
    } else {
        (None, None)
    };
    let generic = if route != Route::Closed {
        Some(generic_second_order_solve_with(&q, &c, d.n, &f, &j)?)
    } else {
        None
    };
    let (b1x, b1y) = b1_series(&f, &j);
    let b2 = match (&generic, &closed) {
        (Some(g), _) => (g.b2_10.clone(), g.b2_01.clone()),
        (None, Some(cl)) => cl.clone(),
        (None, None) => unreachable!("route selects at least one method"),
    };
    let h3 = h3_coefficients(&c, &f, (&b1x, &b1y), (&b2.0, &b2.1));
    let discrepancies = match (&closed, &generic) {
        (Some(cl), Some(g)) => discrepancies((&cl.0, &cl.1), (&g.b2_10, &g.b2_01)),
        _ => Vec::new(),
    };
    let max_rel_discrepancy = if discrepancies.is_empty() {
        None
    } else {
        Some(discrepancies.iter().fold(0.0_f64, |a, d| a.max(d.rel_diff)))
    };
    Ok(BirkhoffReport {
        frequencies: f,
        whittaker: j,
        tables,
        rs,
        closed,
        generic,
        h3,
        discrepancies,
        max_rel_discrepancy,
    })
}
