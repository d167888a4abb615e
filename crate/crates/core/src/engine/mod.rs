//! n-step distributions, return probabilities, moments, balls and the
//! return-probability series.

mod exact;
mod float;

pub use exact::{exact_by_doubling, exact_by_stepping, ExactDist};
pub use float::{float_by_stepping, CompensatedSum, FloatDist, TRIM_THRESHOLD};

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{LatticePoint, RationalMoment, StepLaw};

/// Default largest n served by the exact backend.
pub const DEFAULT_EXACT_CAP: u64 = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("distribution built with denominator {dist} cannot be stepped with a law of denominator {law}")]
    DenominatorMismatch { dist: u64, law: u64 },
    #[error("n = {n} exceeds the exact backend cap of {cap}; use the float backend")]
    ExactCapExceeded { n: u64, cap: u64 },
    #[error("second moment is zero: the walk is degenerate and B_n is undefined")]
    ZeroSecondMoment,
    #[error("ball B_n needs n >= 1")]
    EmptyBallIndex,
    #[error("second moment {0} is too large for lattice enumeration")]
    MomentTooLarge(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Float,
}

/// How the exact backend answers a single-n query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExactMethod {
    /// n successive convolutions with the step law.
    #[default]
    Stepping,
    /// Binary doubling with full self-convolutions.
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub exact_cap: u64,
    pub exact_method: ExactMethod,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            exact_cap: DEFAULT_EXACT_CAP,
            exact_method: ExactMethod::default(),
        }
    }
}

impl EngineConfig {
    fn check_cap(&self, n: u64) -> Result<(), EngineError> {
        if n > self.exact_cap {
            Err(EngineError::ExactCapExceeded {
                n,
                cap: self.exact_cap,
            })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Exact(ExactDist),
    Float(FloatDist),
}

impl Distribution {
    pub fn n(&self) -> u64 {
        match self {
            Distribution::Exact(d) => d.n(),
            Distribution::Float(d) => d.n(),
        }
    }

    /// `P[Sₙ = p]` as a double, whichever backend produced it.
    pub fn probability_f64(&self, p: LatticePoint) -> f64 {
        match self {
            Distribution::Exact(d) => d.probability(p).to_f64().unwrap_or(f64::NAN),
            Distribution::Float(d) => d.mass(p),
        }
    }
}

pub fn distribution_at(law: &StepLaw, n: u64, backend: Backend) -> Result<Distribution, EngineError> {
    distribution_at_with(law, n, backend, &EngineConfig::default())
}

pub fn distribution_at_with(
    law: &StepLaw,
    n: u64,
    backend: Backend,
    config: &EngineConfig,
) -> Result<Distribution, EngineError> {
    Ok(match backend {
        Backend::Exact => {
            config.check_cap(n)?;
            Distribution::Exact(match config.exact_method {
                ExactMethod::Stepping => exact_by_stepping(law, n),
                ExactMethod::Doubling => exact_by_doubling(law, n),
            })
        }
        Backend::Float => Distribution::Float(float_by_stepping(law, n)),
    })
}

/// Exact `P[Sₙ = 0]`, reduced.
pub fn return_prob(law: &StepLaw, n: u64) -> Result<BigRational, EngineError> {
    return_prob_with(law, n, &EngineConfig::default())
}

pub fn return_prob_with(
    law: &StepLaw,
    n: u64,
    config: &EngineConfig,
) -> Result<BigRational, EngineError> {
    config.check_cap(n)?;
    Ok(exact_by_stepping(law, n).probability(LatticePoint::ORIGIN))
}

/// Exact `E‖Sₙ‖²`.
pub fn second_moment_of_dist(dist: &ExactDist) -> RationalMoment {
    dist.second_moment()
}

/// Lattice points with `‖x‖² < 2n · m2`, in row-major order.
pub fn ball_points(n: u64, m2: &RationalMoment) -> Result<Vec<LatticePoint>, EngineError> {
    let (limit, den) = ball_bound(n, m2)?;
    let r = isqrt(limit / den) as i64 + 1;
    let mut points = Vec::new();
    for y in -r..=r {
        for x in -r..=r {
            if in_ball(LatticePoint::new(x, y), limit, den) {
                points.push(LatticePoint::new(x, y));
            }
        }
    }
    Ok(points)
}

/// `|Bₙ|` without materializing the points.
pub fn ball_size(n: u64, m2: &RationalMoment) -> Result<u64, EngineError> {
    let (limit, den) = ball_bound(n, m2)?;
    let r = isqrt(limit / den) as i64 + 1;
    let mut count = 0u64;
    for y in 0..=r {
        // Largest x with x² + y² inside; rows are symmetric in x.
        let mut x = 0i64;
        if !in_ball(LatticePoint::new(0, y), limit, den) {
            break;
        }
        while in_ball(LatticePoint::new(x + 1, y), limit, den) {
            x += 1;
        }
        let row = 2 * x as u64 + 1;
        count += if y == 0 { row } else { 2 * row };
    }
    Ok(count)
}

/// Returns `(2n · m2.num, m2.den)` as integers for the strict test
/// `‖x‖² · den < 2n · num`.
fn ball_bound(n: u64, m2: &RationalMoment) -> Result<(u128, u128), EngineError> {
    if n == 0 {
        return Err(EngineError::EmptyBallIndex);
    }
    if !m2.is_positive() {
        return Err(EngineError::ZeroSecondMoment);
    }
    let too_large = || EngineError::MomentTooLarge(m2.to_string());
    let num = m2.numer().to_u128().ok_or_else(too_large)?;
    let den = m2.denom().to_u128().ok_or_else(too_large)?;
    let limit = num
        .checked_mul(2 * n as u128)
        .filter(|&l| l / den < (1u128 << 60))
        .ok_or_else(too_large)?;
    Ok((limit, den))
}

fn in_ball(p: LatticePoint, limit: u128, den: u128) -> bool {
    (p.norm2() as u128) * den < limit
}

fn isqrt(v: u128) -> u128 {
    let mut r = (v as f64).sqrt() as u128;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r
}

/// Exact `Σ_{x ∈ ball} P[Sₙ = x]`.
pub fn mass_in_ball(dist: &ExactDist, ball: &[LatticePoint]) -> BigRational {
    dist.mass_in(ball)
}

/// One row of the return-probability series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub n: u64,
    /// Exact `P[Sₙ = 0]`; `None` on the float backend.
    pub p_return_exact: Option<BigRational>,
    pub p_return: f64,
    /// `Σ_{k ≤ n} P[S_k = 0]`.
    pub partial_sum: f64,
}

/// Return probabilities and partial sums for `n = 0..=n_max`, one
/// convolution per row.
pub fn return_series(
    law: &StepLaw,
    n_max: u64,
    backend: Backend,
) -> Result<Vec<SeriesRow>, EngineError> {
    return_series_with(law, n_max, backend, &EngineConfig::default())
}

pub fn return_series_with(
    law: &StepLaw,
    n_max: u64,
    backend: Backend,
    config: &EngineConfig,
) -> Result<Vec<SeriesRow>, EngineError> {
    let mut rows = Vec::with_capacity(n_max as usize + 1);
    match backend {
        Backend::Exact => {
            config.check_cap(n_max)?;
            let d = BigUint::from(law.denominator());
            let mut dist = ExactDist::origin(law.denominator());
            // Partial sum kept exactly as a numerator over Dⁿ.
            let mut sum_num = BigUint::zero();
            for n in 0..=n_max {
                if n > 0 {
                    dist = dist.step(law)?;
                    sum_num *= &d;
                }
                let origin = dist.mass(LatticePoint::ORIGIN);
                sum_num += &origin;
                let den = dist.total_denominator();
                let p = exact::ratio(origin, den.clone());
                let partial = exact::ratio(sum_num.clone(), den);
                rows.push(SeriesRow {
                    n,
                    p_return: p.to_f64().unwrap_or(f64::NAN),
                    p_return_exact: Some(p),
                    partial_sum: partial.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Backend::Float => {
            let mut dist = FloatDist::origin();
            let mut spare = Vec::new();
            let mut sum = CompensatedSum::new();
            for n in 0..=n_max {
                if n > 0 {
                    let next = dist.step_reusing(law, spare);
                    spare = std::mem::replace(&mut dist, next).into_buffer();
                }
                let p = dist.mass(LatticePoint::ORIGIN);
                sum.add(p);
                rows.push(SeriesRow {
                    n,
                    p_return_exact: None,
                    p_return: p,
                    partial_sum: sum.value(),
                });
            }
        }
    }
    Ok(rows)
}

/// Renders a double with 17 significant digits.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

pub const SERIES_CSV_HEADER: &str = "n,p_return_num,p_return_den,p_return,partial_sum";

pub fn series_to_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::new();
    out.push_str(SERIES_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let (num, den) = match &r.p_return_exact {
            Some(p) => (p.numer().to_string(), p.denom().to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            r.n,
            num,
            den,
            format_sig17(r.p_return),
            format_sig17(r.partial_sum)
        )
        .expect("writing to a String cannot fail");
    }
    out
}

#[derive(Serialize)]
struct SeriesJson<'a> {
    n: u64,
    p_return_num: Option<String>,
    p_return_den: Option<String>,
    p_return: &'a str,
    partial_sum: &'a str,
}

/// One JSON object per line, same fields as the CSV.
pub fn series_to_json_lines(rows: &[SeriesRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let p = format_sig17(r.p_return);
        let s = format_sig17(r.partial_sum);
        let row = SeriesJson {
            n: r.n,
            p_return_num: r.p_return_exact.as_ref().map(|p| p.numer().to_string()),
            p_return_den: r.p_return_exact.as_ref().map(|p| p.denom().to_string()),
            p_return: &p,
            partial_sum: &s,
        };
        out.push_str(&serde_json::to_string(&row).expect("row serializes"));
        out.push('\n');
    }
    out
}
