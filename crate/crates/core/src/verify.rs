//! Finite-n certification of the recurrence argument for symmetric walks.
//!
//! For each n the verifier checks, with exact rationals only:
//!
//! * V1: `E‖Sₙ‖² = n · E‖X₁‖²`
//! * V2: `P[S₂ₙ = 0] = Σₓ P[Sₙ = x]²`
//! * V3: `P[Sₙ ∈ Bₙ] ≥ 1/2`, where `Bₙ = {x : ‖x‖² < 2n · E‖X₁‖²}`
//! * V4: `P[S₂ₙ = 0] ≥ P[Sₙ ∈ Bₙ]² / |Bₙ|`
//! * V5: `P[S₂ₙ = 0] ≥ 1 / (4 |Bₙ|)`
//!
//! plus the constant audit `P[S₂ₙ = 0] ≥ C / (4n)` with `C = 1 / max |Bₙ|/n`,
//! and the two-walk reduction `P[Sₙ⁽¹⁾ = Sₙ⁽²⁾] = P[Dₙ = 0]`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::engine::{
    ball_points, ball_size, EngineConfig, EngineError, ExactDist,
};
use crate::lattice::{LatticePoint, LawError, RationalMoment, StepLaw};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("step law is not symmetric; verify its difference law instead")]
    AsymmetricLaw,
    #[error("second moment is zero: the walk is degenerate and B_n is undefined")]
    ZeroSecondMoment,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Law(#[from] LawError),
}

/// How `P[S₂ₙ = 0]` entered the V2 comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnRoute {
    /// `2n` full convolution steps; checked against the split value too.
    Stepped,
    /// Only `Σₓ P[Sₙ = x] P[Sₙ = −x]`.
    Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRecord {
    pub n: u64,
    pub v1_moment_ok: bool,
    pub v2_symmetry_identity_ok: bool,
    pub v2_route: ReturnRoute,
    /// `P[S₂ₙ = 0]`.
    pub p_2n: BigRational,
    /// `P[Sₙ ∈ Bₙ]`.
    pub v3_markov_mass: BigRational,
    pub v3_ok: bool,
    /// `P[Sₙ ∈ Bₙ]² / |Bₙ|`.
    pub v4_cs_bound: BigRational,
    pub v4_ok: bool,
    /// `1 / (4 |Bₙ|)`.
    pub v5_floor: BigRational,
    pub v5_ok: bool,
    pub ball_size: u64,
    pub ball_ratio: f64,
}

impl VerificationRecord {
    pub fn all_ok(&self) -> bool {
        self.v1_moment_ok && self.v2_symmetry_identity_ok && self.v3_ok && self.v4_ok && self.v5_ok
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "n": self.n,
            "v1_moment_ok": self.v1_moment_ok,
            "v2_symmetry_identity_ok": self.v2_symmetry_identity_ok,
            "v2_route": self.v2_route,
            "p_2n": rational_json(&self.p_2n),
            "v3_markov_mass": rational_json(&self.v3_markov_mass),
            "v3_ok": self.v3_ok,
            "v4_cs_bound": rational_json(&self.v4_cs_bound),
            "v4_ok": self.v4_ok,
            "v5_floor": rational_json(&self.v5_floor),
            "v5_ok": self.v5_ok,
            "ball_size": self.ball_size,
            "ball_ratio": self.ball_ratio,
        })
    }
}

/// `{"num": "...", "den": "..."}` with decimal strings.
pub fn rational_json(r: &BigRational) -> serde_json::Value {
    json!({ "num": r.numer().to_string(), "den": r.denom().to_string() })
}

/// First failing n per check, or `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VerificationSummary {
    pub records: usize,
    pub v1_moment: Option<u64>,
    pub v2_symmetry_identity: Option<u64>,
    pub v3_markov_mass: Option<u64>,
    pub v4_cs_bound: Option<u64>,
    pub v5_floor: Option<u64>,
    pub all_pass: bool,
}

impl VerificationSummary {
    pub fn from_records(records: &[VerificationRecord]) -> Self {
        let first = |f: fn(&VerificationRecord) -> bool| {
            records.iter().find(|r| !f(r)).map(|r| r.n)
        };
        let mut s = VerificationSummary {
            records: records.len(),
            v1_moment: first(|r| r.v1_moment_ok),
            v2_symmetry_identity: first(|r| r.v2_symmetry_identity_ok),
            v3_markov_mass: first(|r| r.v3_ok),
            v4_cs_bound: first(|r| r.v4_ok),
            v5_floor: first(|r| r.v5_ok),
            all_pass: false,
        };
        s.all_pass = s.v1_moment.is_none()
            && s.v2_symmetry_identity.is_none()
            && s.v3_markov_mass.is_none()
            && s.v4_cs_bound.is_none()
            && s.v5_floor.is_none();
        s
    }
}

fn require_symmetric(law: &StepLaw) -> Result<(), VerifyError> {
    if law.is_symmetric() {
        Ok(())
    } else {
        Err(VerifyError::AsymmetricLaw)
    }
}

fn require_nondegenerate(law: &StepLaw) -> Result<RationalMoment, VerifyError> {
    let m2 = law.second_moment();
    if m2.is_zero() {
        Err(VerifyError::ZeroSecondMoment)
    } else {
        Ok(m2)
    }
}

fn check_cap(config: &EngineConfig, n: u64) -> Result<(), VerifyError> {
    if n > config.exact_cap {
        return Err(EngineError::ExactCapExceeded {
            n,
            cap: config.exact_cap,
        }
        .into());
    }
    Ok(())
}

fn frac(num: impl Into<BigInt>, den: impl Into<BigInt>) -> BigRational {
    BigRational::new(num.into(), den.into())
}

fn big(num: BigUint) -> BigRational {
    BigRational::from_integer(num.into())
}

/// Walks `ExactDist` forward one step at a time.
fn stepped(law: &StepLaw, n_max: u64) -> impl Iterator<Item = ExactDist> + '_ {
    let mut next = Some(ExactDist::origin(law.denominator()));
    (0..=n_max).map(move |n| {
        let cur = next.take().expect("iterator advanced in order");
        if n < n_max {
            next = Some(cur.step(law).expect("same law"));
        }
        cur
    })
}

fn moment_identity_holds(dist: &ExactDist, m2: &RationalMoment) -> bool {
    dist.second_moment().as_ratio() == &(m2.as_ratio() * BigInt::from(dist.n()))
}

/// V1 at a single n.
pub fn verify_moment_identity(law: &StepLaw, n: u64) -> Result<bool, VerifyError> {
    verify_moment_identity_with(law, n, &EngineConfig::default())
}

pub fn verify_moment_identity_with(
    law: &StepLaw,
    n: u64,
    config: &EngineConfig,
) -> Result<bool, VerifyError> {
    require_symmetric(law)?;
    check_cap(config, n)?;
    let dist = stepped(law, n).last().expect("n + 1 items");
    Ok(moment_identity_holds(&dist, &law.second_moment()))
}

/// V2 at a single n, with `P[S₂ₙ = 0]` from `2n` full steps.
pub fn verify_symmetry_identity(law: &StepLaw, n: u64) -> Result<bool, VerifyError> {
    verify_symmetry_identity_with(law, n, &EngineConfig::default())
}

pub fn verify_symmetry_identity_with(
    law: &StepLaw,
    n: u64,
    config: &EngineConfig,
) -> Result<bool, VerifyError> {
    require_symmetric(law)?;
    check_cap(config, 2 * n)?;
    let mut sum_sq = None;
    let mut p2n = BigUint::zero();
    for dist in stepped(law, 2 * n) {
        if dist.n() == n {
            sum_sq = Some(dist.sum_of_squares_numerator());
        }
        if dist.n() == 2 * n {
            p2n = dist.mass(LatticePoint::ORIGIN);
        }
    }
    // Both sides share the denominator D²ⁿ.
    Ok(sum_sq.expect("n <= 2n") == p2n)
}

/// V3 at a single n: the exact mass of `Sₙ` in `Bₙ` and whether it is at least 1/2.
pub fn verify_markov_mass(law: &StepLaw, n: u64) -> Result<(BigRational, bool), VerifyError> {
    require_symmetric(law)?;
    let m2 = require_nondegenerate(law)?;
    check_cap(&EngineConfig::default(), n)?;
    let ball = ball_points(n, &m2)?;
    let dist = stepped(law, n).last().expect("n + 1 items");
    let mass = dist.mass_in(&ball);
    let ok = mass >= frac(1, 2);
    Ok((mass, ok))
}

/// Per-n quantities from the law of `Sₙ`; V2 is finished once `P[S₂ₙ = 0]`
/// by stepping is known (or known to be out of reach).
struct Partial {
    record: VerificationRecord,
    sum_sq: BigUint,
    split: BigUint,
}

fn partial_record(dist: &ExactDist, m2: &RationalMoment) -> Result<Partial, VerifyError> {
    let n = dist.n();
    let ball = ball_points(n, m2)?;
    let ball_len = ball.len() as u64;
    let mass = dist.mass_in(&ball);
    let denom_2n = dist.total_denominator().pow(2u32);
    let split = dist.split_return_numerator();
    let sum_sq = dist.sum_of_squares_numerator();
    let p_2n = BigRational::new(split.clone().into(), denom_2n.into());

    let v4_cs_bound = &mass * &mass / BigInt::from(ball_len);
    let v5_floor = frac(1, 4 * ball_len);
    let v3_ok = mass >= frac(1, 2);
    let record = VerificationRecord {
        n,
        v1_moment_ok: moment_identity_holds(dist, m2),
        v2_symmetry_identity_ok: false,
        v2_route: ReturnRoute::Split,
        v4_ok: p_2n >= v4_cs_bound,
        v5_ok: p_2n >= v5_floor,
        p_2n,
        v3_markov_mass: mass,
        v3_ok,
        v4_cs_bound,
        v5_floor,
        ball_size: ball_len,
        ball_ratio: ball_len as f64 / n as f64,
    };
    debug_assert!(!record.v3_ok || record.v5_floor <= record.v4_cs_bound);
    Ok(Partial {
        record,
        sum_sq,
        split,
    })
}

fn finish(partial: Partial, stepped_2n: Option<&BigUint>) -> VerificationRecord {
    let Partial {
        mut record,
        sum_sq,
        split,
    } = partial;
    match stepped_2n {
        Some(full) => {
            record.v2_route = ReturnRoute::Stepped;
            record.v2_symmetry_identity_ok = *full == sum_sq && *full == split;
        }
        None => {
            record.v2_route = ReturnRoute::Split;
            record.v2_symmetry_identity_ok = split == sum_sq;
        }
    }
    record
}

/// V1–V5 at a single n. `P[S₂ₙ = 0]` is taken from 2n full steps when that
/// fits under the exact cap.
pub fn verify_cs_chain(law: &StepLaw, n: u64) -> Result<VerificationRecord, VerifyError> {
    verify_cs_chain_with(law, n, &EngineConfig::default())
}

pub fn verify_cs_chain_with(
    law: &StepLaw,
    n: u64,
    config: &EngineConfig,
) -> Result<VerificationRecord, VerifyError> {
    require_symmetric(law)?;
    let m2 = require_nondegenerate(law)?;
    if n == 0 {
        return Err(EngineError::EmptyBallIndex.into());
    }
    check_cap(config, n)?;
    let horizon = if 2 * n <= config.exact_cap { 2 * n } else { n };
    let mut partial = None;
    let mut full = None;
    for dist in stepped(law, horizon) {
        if dist.n() == n {
            partial = Some(partial_record(&dist, &m2)?);
        }
        if horizon == 2 * n && dist.n() == 2 * n {
            full = Some(dist.mass(LatticePoint::ORIGIN));
        }
    }
    Ok(finish(partial.expect("n <= horizon"), full.as_ref()))
}

/// V1–V5 for every `n` in `1..=n_max` from one incremental pass. V2 uses the
/// stepped `P[S₂ₙ = 0]` for `2n ≤ n_max` and the split value beyond.
pub fn verify_sweep(law: &StepLaw, n_max: u64) -> Result<Vec<VerificationRecord>, VerifyError> {
    verify_sweep_with(law, n_max, &EngineConfig::default())
}

pub fn verify_sweep_with(
    law: &StepLaw,
    n_max: u64,
    config: &EngineConfig,
) -> Result<Vec<VerificationRecord>, VerifyError> {
    require_symmetric(law)?;
    let m2 = require_nondegenerate(law)?;
    check_cap(config, n_max)?;
    let mut origin = Vec::with_capacity(n_max as usize + 1);
    let mut partials = Vec::with_capacity(n_max as usize);
    for dist in stepped(law, n_max) {
        origin.push(dist.mass(LatticePoint::ORIGIN));
        if dist.n() >= 1 {
            partials.push(partial_record(&dist, &m2)?);
        }
    }
    Ok(partials
        .into_iter()
        .map(|p| {
            let full = origin.get(2 * p.record.n as usize);
            finish(p, full)
        })
        .collect())
}

/// Result of the constant audit over `1..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantAudit {
    pub n_max: u64,
    /// `max |Bₙ| / n`, exact.
    pub k_exact: BigRational,
    /// n attaining the maximum (smallest such).
    pub k_argmax: u64,
    pub k: f64,
    /// `C = 1 / K`.
    pub c_exact: BigRational,
    pub c: f64,
    /// `P[S₂ₙ = 0] ≥ C / (4n)` held for every n.
    pub certified: bool,
    pub first_failure: Option<u64>,
}

impl ConstantAudit {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "n_max": self.n_max,
            "K": self.k,
            "K_exact": rational_json(&self.k_exact),
            "K_argmax": self.k_argmax,
            "C": self.c,
            "C_exact": rational_json(&self.c_exact),
            "certified": self.certified,
            "first_failure": self.first_failure,
        })
    }
}

/// `K = max_{n ≤ n_max} |Bₙ| / n`, exact, with the smallest maximizing n.
pub fn ball_ratio_sup(m2: &RationalMoment, n_max: u64) -> Result<(BigRational, u64), VerifyError> {
    let mut best = (BigRational::zero(), 0);
    for n in 1..=n_max {
        let r = frac(ball_size(n, m2)?, n);
        if r > best.0 {
            best = (r, n);
        }
    }
    Ok(best)
}

pub fn constant_audit(law: &StepLaw, n_max: u64) -> Result<ConstantAudit, VerifyError> {
    constant_audit_with(law, n_max, &EngineConfig::default())
}

pub fn constant_audit_with(
    law: &StepLaw,
    n_max: u64,
    config: &EngineConfig,
) -> Result<ConstantAudit, VerifyError> {
    require_symmetric(law)?;
    let m2 = require_nondegenerate(law)?;
    if n_max == 0 {
        return Err(EngineError::EmptyBallIndex.into());
    }
    check_cap(config, n_max)?;
    let (k_exact, k_argmax) = ball_ratio_sup(&m2, n_max)?;
    let c_exact = k_exact.recip();
    let mut first_failure = None;
    for dist in stepped(law, n_max).skip(1) {
        let n = dist.n();
        // P[S₂ₙ = 0] · 4n ≥ C, with P[S₂ₙ = 0] = split / D²ⁿ.
        let lhs = big(dist.split_return_numerator()) * BigInt::from(4 * n);
        let rhs = &c_exact * big(dist.total_denominator().pow(2u32));
        if lhs < rhs {
            first_failure = Some(n);
            break;
        }
    }
    Ok(ConstantAudit {
        n_max,
        k: k_exact.to_f64().unwrap_or(f64::NAN),
        c: c_exact.to_f64().unwrap_or(f64::NAN),
        k_exact,
        k_argmax,
        c_exact,
        certified: first_failure.is_none(),
        first_failure,
    })
}

/// Two-walk reduction certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionReport {
    pub law: StepLaw,
    pub diff_law: StepLaw,
    pub symmetric_ok: bool,
    /// n for which `P[Sₙ⁽¹⁾ = Sₙ⁽²⁾] = P[Dₙ = 0]` was certified.
    pub equality_ns: Vec<u64>,
    /// n for which it failed; empty on a correct engine.
    pub mismatch_ns: Vec<u64>,
}

impl ReductionReport {
    pub fn all_ok(&self) -> bool {
        self.symmetric_ok && self.mismatch_ns.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "law": crate::lattice::LawFile::from(&self.law),
            "diff_law": crate::lattice::LawFile::from(&self.diff_law),
            "symmetric_ok": self.symmetric_ok,
            "equality_ns": self.equality_ns,
            "mismatch_ns": self.mismatch_ns,
        })
    }
}

/// Builds the difference law and certifies, for every `n ≤ n_max`, that the
/// meeting probability of two independent walks, `Σₓ P[Sₙ = x]²`, equals the
/// return probability of the difference walk.
pub fn verify_reduction(law: &StepLaw, n_max: u64) -> Result<ReductionReport, VerifyError> {
    verify_reduction_with(law, n_max, &EngineConfig::default())
}

pub fn verify_reduction_with(
    law: &StepLaw,
    n_max: u64,
    config: &EngineConfig,
) -> Result<ReductionReport, VerifyError> {
    check_cap(config, n_max)?;
    let diff_law = law.difference()?;
    let symmetric_ok = diff_law.is_symmetric();
    let mut equality_ns = Vec::new();
    let mut mismatch_ns = Vec::new();
    for (walk, diff) in stepped(law, n_max).zip(stepped(&diff_law, n_max)) {
        let meet = BigRational::new(
            walk.sum_of_squares_numerator().into(),
            walk.total_denominator().pow(2u32).into(),
        );
        let ret = diff.probability(LatticePoint::ORIGIN);
        if meet == ret {
            equality_ns.push(walk.n());
        } else {
            mismatch_ns.push(walk.n());
        }
    }
    Ok(ReductionReport {
        law: law.clone(),
        diff_law,
        symmetric_ok,
        equality_ns,
        mismatch_ns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::bundled;

    fn p(x: i64, y: i64) -> LatticePoint {
        LatticePoint::new(x, y)
    }

    #[test]
    fn moment_identity_examples() {
        assert!(verify_moment_identity(&bundled::simple(), 10).unwrap());
        for (_, law) in bundled::all() {
            assert!(verify_moment_identity(&law, 0).unwrap());
        }
        let diff = bundled::difference_of_simple();
        assert!(verify_moment_identity(&diff, 5).unwrap());
        let d5 = crate::engine::exact_by_stepping(&diff, 5);
        assert_eq!(d5.second_moment(), RationalMoment::new(10, 1));
    }

    #[test]
    fn symmetry_identity_examples() {
        let s = bundled::simple();
        assert!(verify_symmetry_identity(&s, 1).unwrap());
        assert!(verify_symmetry_identity(&s, 2).unwrap());
        let drift = StepLaw::new([(p(1, 0), 1)], 1).unwrap();
        assert_eq!(
            verify_symmetry_identity(&drift, 1),
            Err(VerifyError::AsymmetricLaw)
        );
        assert_eq!(verify_moment_identity(&drift, 1), Err(VerifyError::AsymmetricLaw));
    }

    #[test]
    fn markov_mass_examples() {
        let s = bundled::simple();
        assert_eq!(verify_markov_mass(&s, 1).unwrap(), (frac(1, 1), true));
        assert!(verify_markov_mass(&s, 50).unwrap().1);
        assert!(verify_markov_mass(&bundled::lazy(), 20).unwrap().1);
        let dirac = StepLaw::dirac(LatticePoint::ORIGIN);
        assert_eq!(verify_markov_mass(&dirac, 3), Err(VerifyError::ZeroSecondMoment));
    }

    #[test]
    fn cs_chain_small_n() {
        let s = bundled::simple();
        let r1 = verify_cs_chain(&s, 1).unwrap();
        assert_eq!(r1.p_2n, frac(1, 4));
        assert_eq!(r1.ball_size, 5);
        assert_eq!(r1.v3_markov_mass, frac(1, 1));
        assert_eq!(r1.v4_cs_bound, frac(1, 5));
        assert_eq!(r1.v5_floor, frac(1, 20));
        assert_eq!(r1.v2_route, ReturnRoute::Stepped);
        assert!(r1.all_ok());

        let r2 = verify_cs_chain(&s, 2).unwrap();
        assert_eq!(r2.p_2n, frac(9, 64));
        assert_eq!(r2.ball_size, 9);
        assert_eq!(r2.v3_markov_mass, frac(12, 16));
        assert_eq!(r2.v4_cs_bound, frac(1, 16));
        assert!(r2.all_ok());
    }

    #[test]
    fn sweep_agrees_with_single_n() {
        let law = bundled::lazy();
        let sweep = verify_sweep(&law, 12).unwrap();
        assert_eq!(sweep.len(), 12);
        for rec in &sweep {
            let single = verify_cs_chain(&law, rec.n).unwrap();
            assert_eq!(single.p_2n, rec.p_2n);
            assert_eq!(single.v4_cs_bound, rec.v4_cs_bound);
            assert!(rec.all_ok());
            let expected_route = if 2 * rec.n <= 12 {
                ReturnRoute::Stepped
            } else {
                ReturnRoute::Split
            };
            assert_eq!(rec.v2_route, expected_route);
        }
        let summary = VerificationSummary::from_records(&sweep);
        assert!(summary.all_pass);
        assert_eq!(summary.records, 12);
    }

    #[test]
    fn summary_reports_first_failure() {
        let law = bundled::simple();
        let mut recs = verify_sweep(&law, 5).unwrap();
        recs[2].v4_ok = false;
        recs[4].v4_ok = false;
        let s = VerificationSummary::from_records(&recs);
        assert_eq!(s.v4_cs_bound, Some(3));
        assert_eq!(s.v1_moment, None);
        assert!(!s.all_pass);
    }

    #[test]
    fn audit_single_term_and_doubled_steps() {
        let s = bundled::simple();
        let a1 = constant_audit(&s, 1).unwrap();
        assert_eq!(a1.k_exact, frac(5, 1));
        assert!(a1.certified);
        let a = constant_audit(&s, 40).unwrap();
        let b = constant_audit(&bundled::doubled_simple(), 40).unwrap();
        assert!(a.certified && b.certified);
        let ratio = b.k / a.k;
        assert!((3.0..=5.0).contains(&ratio), "K ratio {ratio}");
    }

    #[test]
    fn reduction_examples() {
        let s = bundled::simple();
        let rep = verify_reduction(&s, 4).unwrap();
        assert!(rep.all_ok());
        assert_eq!(rep.equality_ns, vec![0, 1, 2, 3, 4]);

        let drift = StepLaw::new([(p(1, 0), 1)], 1).unwrap();
        let rep = verify_reduction(&drift, 6).unwrap();
        assert_eq!(rep.diff_law, StepLaw::dirac(LatticePoint::ORIGIN));
        assert!(rep.all_ok());
        assert_eq!(rep.equality_ns.len(), 7);

        let skew = StepLaw::new([(p(1, 0), 1), (p(0, 1), 1)], 2).unwrap();
        assert!(verify_reduction(&skew, 8).unwrap().all_ok());
    }

    #[test]
    fn record_json_shape() {
        let r = verify_cs_chain(&bundled::simple(), 1).unwrap();
        let v = r.to_json();
        assert_eq!(v["p_2n"]["num"], "1");
        assert_eq!(v["p_2n"]["den"], "4");
        assert_eq!(v["v2_route"], "stepped");
        assert_eq!(v["ball_size"], 5);
    }
}
