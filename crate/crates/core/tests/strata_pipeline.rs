//! Strata-module checks beyond the per-operation unit tests: the overall
//! ITT decomposition identity and the monotonicity filter on a noisy fit.

use modprior::bart::BartConfig;
use modprior::strata::{
    fit_strata, mixture_forward, simulate_trial, strata_probs, PointModel, StrataProbs,
    TrialConfig,
};
use modprior::rng::RngStream;

/// The identified overall ITT equals the membership-weighted average of the
/// per-stratum ITT effects in the forward model, pointwise and exactly.
#[test]
fn overall_itt_decomposes_over_strata() {
    let stream = RngStream::new(505, 0);
    for case in 0..500u64 {
        let u = |k: u64| stream.uniform_at(9 * case + k);
        let mut pi_a = 0.05 + u(0);
        let mut pi_c = 0.05 + u(1);
        let mut pi_n = 0.05 + u(2);
        let s = pi_a + pi_c + pi_n;
        pi_a /= s;
        pi_c /= s;
        pi_n = 1.0 - (pi_a + pi_c);
        let m = PointModel {
            pi: StrataProbs { pi_a, pi_c, pi_n },
            gamma_a10: u(3),
            gamma_a11: u(4),
            gamma_n00: u(5),
            gamma_n01: u(6),
            gamma_c00: u(7),
            gamma_c11: u(8),
        };
        // Overall ITT from the observable arms.
        let ey_z1 = pi_c * m.gamma_c11 + pi_a * m.gamma_a11 + pi_n * m.gamma_n01;
        let ey_z0 = pi_c * m.gamma_c00 + pi_a * m.gamma_a10 + pi_n * m.gamma_n00;
        let overall = ey_z1 - ey_z0;
        // Per-stratum population effects, membership weighted.
        let weighted = pi_c * (m.gamma_c11 - m.gamma_c00)
            + pi_a * (m.gamma_a11 - m.gamma_a10)
            + pi_n * (m.gamma_n01 - m.gamma_n00);
        assert!(
            (overall - weighted).abs() < 1e-12,
            "case {case}: {overall} vs {weighted}"
        );
        // And the same observables come back through the mixture map.
        let basis = mixture_forward(&m).unwrap();
        let pi2 = strata_probs(&basis).unwrap();
        assert!((pi2.pi_c - pi_c).abs() < 1e-12);
    }
}

/// A small, noisy treatment fit leaves the monotonicity constraint in doubt
/// at some grid points: the filter rejects a nonzero fraction without
/// rejecting everything, and the rate is reported.
#[test]
fn weak_fit_rejection_rate_interior() {
    let trial = simulate_trial(&TrialConfig { n: 160, seed: 12, n_age: 6, b_a: 0.0, b_n: 0.0 })
        .unwrap();
    let cfg = BartConfig {
        n_trees: 20,
        n_burn: 100,
        n_keep: 300,
        n_cutpoints: 15,
        k: 1.0, // weak shrinkage: noisy arm estimates
        seed: 3,
        ..BartConfig::default()
    };
    let basis = fit_strata(&trial.records, &trial.grid, &cfg, 31).unwrap();
    assert!(
        basis.rejection_rate > 0.0 && basis.rejection_rate < 1.0,
        "rejection rate {} not interior",
        basis.rejection_rate
    );
    // Kept draws satisfy monotonicity at every grid point.
    for k in 0..basis.n_draws() {
        for j in 0..basis.n_points() {
            assert!(basis.p_t_z1.get(k, j) >= basis.p_t_z0.get(k, j));
        }
    }
}
