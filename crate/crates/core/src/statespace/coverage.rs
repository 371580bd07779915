// SPDX-License-Identifier: Apache-2.0

//! Cost of exhaustive pattern testing.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub const SECONDS_PER_YEAR: f64 = 3.156e7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    /// `inputs`, `gates` or `nodes`.
    pub basis: String,
    pub exponent: u32,
    /// 2^exponent, exact decimal.
    pub patterns: String,
    /// patterns / rate, exact rational rendered as a decimal with up to
    /// six fractional digits, or in scientific notation when large.
    pub seconds: String,
    pub seconds_f64: f64,
    pub years: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rate: f64,
    pub rows: Vec<CoverageRow>,
}

fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite rate")
}

fn render(r: &BigRational) -> String {
    let int = r.to_integer();
    if int.bits() > 40 {
        return format!("{:.6e}", r.to_f64().unwrap_or(f64::INFINITY));
    }
    let frac = r - BigRational::from_integer(int.clone());
    let scale = num_bigint::BigInt::from(1_000_000u32);
    let mut digits = (frac * BigRational::from_integer(scale.clone())).round().to_integer();
    let mut int = int;
    if digits == scale {
        int += 1;
        digits = Zero::zero();
    }
    if digits.is_zero() {
        return int.to_string();
    }
    let mut d = format!("{:06}", digits);
    while d.ends_with('0') {
        d.pop();
    }
    format!("{int}.{d}")
}

fn row(basis: &str, exponent: u32, rate: &BigRational) -> CoverageRow {
    let patterns = BigUint::one() << exponent;
    let p = BigRational::from_integer(patterns.clone().into());
    let secs = p / rate;
    let secs_f = secs.to_f64().unwrap_or(f64::INFINITY);
    let year = rational_from_f64(SECONDS_PER_YEAR);
    let years = (&secs / year).to_f64().unwrap_or(f64::INFINITY);
    CoverageRow {
        basis: basis.to_string(),
        exponent,
        patterns: patterns.to_string(),
        seconds: render(&secs),
        seconds_f64: secs_f,
        years,
    }
}

/// Rows for primary inputs, and optionally for gate and node counts.
/// `rate` is tests per second and must be positive and finite.
pub fn estimate_coverage(
    inputs: u32,
    gates: Option<u32>,
    nodes: Option<u32>,
    rate: f64,
) -> Option<CoverageReport> {
    if !(rate.is_finite() && rate > 0.0) {
        return None;
    }
    let r = rational_from_f64(rate);
    let mut rows = vec![row("inputs", inputs, &r)];
    if let Some(g) = gates {
        rows.push(row("gates", g, &r));
    }
    if let Some(n) = nodes {
        rows.push(row("nodes", n, &r));
    }
    Some(CoverageReport { rate, rows })
}
