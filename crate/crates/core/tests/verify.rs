mod common;

use num_bigint::BigInt;
use z2walk::engine::{return_series, Backend, EngineConfig, EngineError};
use z2walk::lattice::{bundled, LatticePoint, StepLaw};
use z2walk::verify::{
    constant_audit, verify_cs_chain, verify_markov_mass, verify_moment_identity, verify_reduction,
    verify_sweep, verify_sweep_with, verify_symmetry_identity, ReturnRoute, VerificationSummary,
    VerifyError,
};

#[test]
fn sweep_passes_for_bundled_laws() {
    for (name, law) in bundled::all() {
        let records = verify_sweep(&law, 40).unwrap();
        let summary = VerificationSummary::from_records(&records);
        assert!(summary.all_pass, "{name}: {summary:?}");
        for r in &records {
            // V5 ≤ V4 whenever the Markov mass bound holds.
            assert!(r.v5_floor <= r.v4_cs_bound, "{name} n={}", r.n);
            // Literal form of the inequalities.
            let b = BigInt::from(r.ball_size);
            assert!(&r.p_2n * &b >= &r.v3_markov_mass * &r.v3_markov_mass);
            assert!(&r.p_2n * &b * BigInt::from(4) >= common::frac(1, 1));
        }
    }
}

#[test]
fn sweep_routes_and_single_n_agree() {
    let law = bundled::difference_of_simple();
    let records = verify_sweep(&law, 10).unwrap();
    for r in &records {
        let expected = if r.n <= 5 { ReturnRoute::Stepped } else { ReturnRoute::Split };
        assert_eq!(r.v2_route, expected);
        assert_eq!(verify_cs_chain(&law, r.n).unwrap().p_2n, r.p_2n);
        assert!(verify_symmetry_identity(&law, r.n).unwrap());
        assert!(verify_moment_identity(&law, r.n).unwrap());
        assert_eq!(verify_markov_mass(&law, r.n).unwrap().0, r.v3_markov_mass);
    }
}

#[test]
fn symmetric_random_laws_pass_the_chain() {
    for i in 0..20 {
        let law = common::symmetrized(&common::random_law(11, i, 2, 4, 5));
        if law.second_moment().is_zero() {
            continue;
        }
        let summary = VerificationSummary::from_records(&verify_sweep(&law, 12).unwrap());
        assert!(summary.all_pass, "{law}");
    }
}

#[test]
fn precondition_errors() {
    let drift = StepLaw::new([(LatticePoint::new(1, 0), 1)], 1).unwrap();
    assert_eq!(verify_sweep(&drift, 3).unwrap_err(), VerifyError::AsymmetricLaw);
    assert_eq!(verify_cs_chain(&drift, 3).unwrap_err(), VerifyError::AsymmetricLaw);
    let dirac = StepLaw::dirac(LatticePoint::ORIGIN);
    assert_eq!(verify_sweep(&dirac, 3).unwrap_err(), VerifyError::ZeroSecondMoment);
    assert_eq!(constant_audit(&dirac, 3).unwrap_err(), VerifyError::ZeroSecondMoment);
    let cfg = EngineConfig {
        exact_cap: 8,
        ..Default::default()
    };
    assert_eq!(
        verify_sweep_with(&bundled::simple(), 9, &cfg).unwrap_err(),
        VerifyError::Engine(EngineError::ExactCapExceeded { n: 9, cap: 8 })
    );
}

#[test]
fn reduction_on_random_laws() {
    for i in 0..100 {
        let law = common::random_law(5, i, 2, 5, 6);
        assert!(law.difference().unwrap().is_symmetric(), "{law}");
    }
    for i in 0..10 {
        let law = common::random_law(6, i, 1, 4, 3);
        let report = verify_reduction(&law, 8).unwrap();
        assert!(report.all_ok(), "{law}");
        assert_eq!(report.equality_ns, (0..=8).collect::<Vec<_>>());
    }
}

#[test]
fn divergence_trend_matches_audited_constant() {
    // Σ_{N < k ≤ 4N} P[S_k = 0] ≥ Σ_{N/2 < m ≤ 2N} C / (4m) ≈ (C/4) ln 4.
    let law = bundled::simple();
    let audit = constant_audit(&law, 100).unwrap();
    assert!(audit.certified);
    let n = 50usize;
    let rows = return_series(&law, 4 * n as u64, Backend::Exact).unwrap();
    let gain = rows[4 * n].partial_sum - rows[n].partial_sum;
    let floor = audit.c / 4.0 * 4f64.ln() - 1e-9;
    assert!(gain >= floor, "gain {gain} < {floor}");
}

#[test]
fn audit_constant_for_simple_walk() {
    let audit = constant_audit(&bundled::simple(), 200).unwrap();
    assert_eq!(audit.k_exact, common::frac(7, 1));
    assert_eq!(audit.k_argmax, 3);
    assert!(audit.certified);
}
