//! The identified observable basis and its algebra: strata probabilities,
//! bounds for the unidentified outcome cells, the forward mixture map, and
//! the complier-cell solver.

use crate::error::{Error, Result};
use crate::util::Matrix;

/// Observable cells at one design point: treatment-uptake probabilities per
/// instrument arm and the four outcome cells `Pr(Y=1 | T=t, Z=z, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifiedBasis {
    pub p_t_z0: f64,
    pub p_t_z1: f64,
    pub p_y_00: f64,
    pub p_y_11: f64,
    pub p_y_01: f64,
    pub p_y_10: f64,
}

impl IdentifiedBasis {
    pub fn validate(&self) -> Result<()> {
        for v in [self.p_t_z0, self.p_t_z1, self.p_y_00, self.p_y_11, self.p_y_01, self.p_y_10] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("basis cell out of [0,1]: {v}")));
            }
        }
        if self.p_t_z1 < self.p_t_z0 {
            return Err(Error::MonotonicityViolated(format!(
                "Pr(T=1|Z=1) = {} < Pr(T=1|Z=0) = {}",
                self.p_t_z1, self.p_t_z0
            )));
        }
        Ok(())
    }
}

/// Strata membership probabilities; an exact simplex by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrataProbs {
    pub pi_a: f64,
    pub pi_c: f64,
    pub pi_n: f64,
}

/// Always-takers are the treated-under-control, compliers the arm
/// difference, never-takers the remainder.
pub fn strata_probs(basis: &IdentifiedBasis) -> Result<StrataProbs> {
    basis.validate()?;
    let pi_a = basis.p_t_z0;
    let pi_c = basis.p_t_z1 - basis.p_t_z0;
    // Defined off the partial sum so pi_a + pi_c + pi_n == 1 exactly.
    let pi_n = 1.0 - (pi_a + pi_c);
    if pi_n < 0.0 {
        return Err(Error::invalid(format!("treatment uptake exceeds 1: pi_n = {pi_n}")));
    }
    Ok(StrataProbs { pi_a, pi_c, pi_n })
}

/// Feasible range of an unidentified outcome cell for stratum `s` mixed with
/// compliers: the mixture equation restricted to the unit square. `pi_s` is
/// the stratum's probability, `p_obs` the observed mixed cell. Returns
/// `(lower, upper)`, never empty.
pub fn gamma_bounds(pi_s: f64, pi_c: f64, p_obs: f64) -> Result<(f64, f64)> {
    if pi_s <= 0.0 {
        return Err(Error::StratumAbsent(format!("pi = {pi_s}; bounded cell is vacuous")));
    }
    let scale = (pi_s + pi_c) / pi_s;
    let lower = (scale * p_obs - pi_c / pi_s).max(0.0);
    let upper = (scale * p_obs).min(1.0);
    Ok((lower, upper))
}

/// Forward map from a full strata model at one point to the observable
/// cells. Inverse of `strata_probs` + `solve_compliers` on its image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointModel {
    pub pi: StrataProbs,
    pub gamma_a10: f64,
    pub gamma_a11: f64,
    pub gamma_n00: f64,
    pub gamma_n01: f64,
    pub gamma_c00: f64,
    pub gamma_c11: f64,
}

pub fn mixture_forward(m: &PointModel) -> Result<IdentifiedBasis> {
    let StrataProbs { pi_a, pi_c, pi_n } = m.pi;
    let denom_00 = pi_c + pi_n;
    let denom_11 = pi_c + pi_a;
    if denom_00 == 0.0 || denom_11 == 0.0 {
        return Err(Error::StratumAbsent(
            "a mixed observable cell has no contributing stratum".into(),
        ));
    }
    Ok(IdentifiedBasis {
        p_t_z0: pi_a,
        p_t_z1: pi_a + pi_c,
        p_y_00: (pi_c * m.gamma_c00 + pi_n * m.gamma_n00) / denom_00,
        p_y_11: (pi_c * m.gamma_c11 + pi_a * m.gamma_a11) / denom_11,
        p_y_01: m.gamma_n01,
        p_y_10: m.gamma_a10,
    })
}

/// Solve the two mixed cells for the complier outcome probabilities given
/// the unidentified pair `(gamma_n00, gamma_a11)`. Results outside [0,1]
/// mean the pair left the identified-set support and the draw must be
/// rejected.
pub fn solve_compliers(
    basis: &IdentifiedBasis,
    pi: &StrataProbs,
    gamma_n00: f64,
    gamma_a11: f64,
) -> Result<(f64, f64)> {
    if pi.pi_c <= 0.0 {
        return Err(Error::StratumAbsent("no compliers; complier cells are vacuous".into()));
    }
    let gamma_c00 = ((pi.pi_c + pi.pi_n) * basis.p_y_00 - pi.pi_n * gamma_n00) / pi.pi_c;
    let gamma_c11 = ((pi.pi_c + pi.pi_a) * basis.p_y_11 - pi.pi_a * gamma_a11) / pi.pi_c;
    let tol = 1e-12;
    if !(-tol..=1.0 + tol).contains(&gamma_c00) || !(-tol..=1.0 + tol).contains(&gamma_c11) {
        return Err(Error::SupportViolation(format!(
            "complier cells ({gamma_c00}, {gamma_c11}) outside [0,1]"
        )));
    }
    Ok((gamma_c00.clamp(0.0, 1.0), gamma_c11.clamp(0.0, 1.0)))
}

/// Joint monotonicity filter over paired draws of the two treatment arms on
/// a grid: keep draws with `Pr(T=1|Z=1,x) >= Pr(T=1|Z=0,x)` everywhere.
/// Returns the kept draw indices and the rejection rate.
pub fn monotone_filter(p_t_z0: &Matrix, p_t_z1: &Matrix) -> Result<(Vec<usize>, f64)> {
    if p_t_z0.nrows() != p_t_z1.nrows() || p_t_z0.ncols() != p_t_z1.ncols() {
        return Err(Error::invalid("arm draws have mismatched shapes"));
    }
    let k = p_t_z0.nrows();
    let mut kept = Vec::with_capacity(k);
    for draw in 0..k {
        let ok = (0..p_t_z0.ncols()).all(|j| p_t_z1.get(draw, j) >= p_t_z0.get(draw, j));
        if ok {
            kept.push(draw);
        }
    }
    if kept.is_empty() {
        return Err(Error::MonotonicityViolated(
            "all draws violate compliance monotonicity; consider more data or a coarser grid"
                .into(),
        ));
    }
    let rate = 1.0 - kept.len() as f64 / k as f64;
    Ok((kept, rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn basis_for(pi: &StrataProbs, m: &PointModel) -> IdentifiedBasis {
        let mut mm = *m;
        mm.pi = *pi;
        mixture_forward(&mm).unwrap()
    }

    #[test]
    fn strata_probs_arithmetic() {
        let b = IdentifiedBasis {
            p_t_z0: 0.2,
            p_t_z1: 0.7,
            p_y_00: 0.5,
            p_y_11: 0.5,
            p_y_01: 0.5,
            p_y_10: 0.5,
        };
        let pi = strata_probs(&b).unwrap();
        assert_eq!(pi.pi_a, 0.2);
        assert!((pi.pi_c - 0.5).abs() < 1e-15);
        assert!((pi.pi_n - 0.3).abs() < 1e-15);
        assert_eq!(pi.pi_a + pi.pi_c + pi.pi_n, 1.0);
    }

    #[test]
    fn no_compliers_when_arms_match() {
        let b = IdentifiedBasis {
            p_t_z0: 0.5,
            p_t_z1: 0.5,
            p_y_00: 0.4,
            p_y_11: 0.6,
            p_y_01: 0.5,
            p_y_10: 0.5,
        };
        assert_eq!(strata_probs(&b).unwrap().pi_c, 0.0);
    }

    #[test]
    fn simplex_exact_over_random_cells() {
        let stream = RngStream::new(6, 0);
        for i in 0..20_000 {
            let a = stream.uniform_at(2 * i);
            let b = stream.uniform_at(2 * i + 1);
            let (p0, p1) = (a.min(b), a.max(b));
            let basis = IdentifiedBasis {
                p_t_z0: p0,
                p_t_z1: p1,
                p_y_00: 0.5,
                p_y_11: 0.5,
                p_y_01: 0.5,
                p_y_10: 0.5,
            };
            let pi = strata_probs(&basis).unwrap();
            assert_eq!(pi.pi_a + pi.pi_c + pi.pi_n, 1.0, "draw {i}");
        }
    }

    #[test]
    fn bounds_hand_cases() {
        // pi_c = 0: the mixed cell is the stratum cell itself.
        let (lo, hi) = gamma_bounds(0.5, 0.0, 0.37).unwrap();
        assert!((lo - 0.37).abs() < 1e-15 && (hi - 0.37).abs() < 1e-15);
        // Even split at p = 0.5: completely uninformative.
        let (lo, hi) = gamma_bounds(0.5, 0.5, 0.5).unwrap();
        assert_eq!((lo, hi), (0.0, 1.0));
        assert!(gamma_bounds(0.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn bounds_match_feasibility_grid() {
        // Brute-force oracle: gamma_s is feasible iff the implied complier
        // cell lies in [0,1]. Scan a 1e-3 grid and compare extremes.
        let stream = RngStream::new(8, 3);
        for case in 0..200u64 {
            let pi_s = 0.05 + 0.9 * stream.uniform_at(3 * case);
            let pi_c = (1.0 - pi_s) * stream.uniform_at(3 * case + 1);
            let p_obs = stream.uniform_at(3 * case + 2);
            let (lo, hi) = gamma_bounds(pi_s, pi_c, p_obs).unwrap();
            let mut feas_lo = f64::INFINITY;
            let mut feas_hi = f64::NEG_INFINITY;
            for g in 0..=1000 {
                let gamma_s = g as f64 / 1000.0;
                let gamma_c = if pi_c == 0.0 {
                    if (gamma_s - p_obs).abs() < 1e-9 { 0.5 } else { f64::NAN }
                } else {
                    ((pi_s + pi_c) * p_obs - pi_s * gamma_s) / pi_c
                };
                if (0.0..=1.0).contains(&gamma_c) {
                    feas_lo = feas_lo.min(gamma_s);
                    feas_hi = feas_hi.max(gamma_s);
                }
            }
            if feas_lo.is_finite() {
                assert!((feas_lo - lo).abs() <= 1.5e-3, "case {case}: {feas_lo} vs {lo}");
                assert!((feas_hi - hi).abs() <= 1.5e-3, "case {case}: {feas_hi} vs {hi}");
            }
        }
    }

    #[test]
    fn degenerate_mixture_returns_common_cell() {
        let pi = StrataProbs { pi_a: 0.25, pi_c: 0.5, pi_n: 0.25 };
        let m = PointModel {
            pi,
            gamma_a10: 0.6,
            gamma_a11: 0.6,
            gamma_n00: 0.6,
            gamma_n01: 0.6,
            gamma_c00: 0.6,
            gamma_c11: 0.6,
        };
        let b = mixture_forward(&m).unwrap();
        assert!((b.p_y_00 - 0.6).abs() < 1e-15);
        assert!((b.p_y_11 - 0.6).abs() < 1e-15);
    }

    #[test]
    fn round_trip_identity() {
        let stream = RngStream::new(7, 1);
        for case in 0..2000u64 {
            let u = |k: u64| stream.uniform_at(9 * case + k);
            let mut pi_a = u(0);
            let mut pi_c = u(1);
            let mut pi_n = u(2);
            let s = pi_a + pi_c + pi_n;
            pi_a /= s;
            pi_c /= s;
            pi_n = 1.0 - (pi_a + pi_c);
            if pi_c <= 1e-3 {
                continue;
            }
            let m = PointModel {
                pi: StrataProbs { pi_a, pi_c, pi_n },
                gamma_a10: u(3),
                gamma_a11: u(4),
                gamma_n00: u(5),
                gamma_n01: u(6),
                gamma_c00: u(7),
                gamma_c11: u(8),
            };
            let basis = mixture_forward(&m).unwrap();
            let pi2 = strata_probs(&basis).unwrap();
            assert!((pi2.pi_a - pi_a).abs() < 1e-12);
            assert!((pi2.pi_c - pi_c).abs() < 1e-12);
            let (c00, c11) = solve_compliers(&basis, &pi2, m.gamma_n00, m.gamma_a11).unwrap();
            assert!((c00 - m.gamma_c00).abs() < 1e-12, "case {case}");
            assert!((c11 - m.gamma_c11).abs() < 1e-12, "case {case}");
        }
    }

    #[test]
    fn boundary_theta_hits_complier_extremes() {
        let pi = StrataProbs { pi_a: 0.3, pi_c: 0.5, pi_n: 0.2 };
        let m = PointModel {
            pi,
            gamma_a10: 0.5,
            gamma_a11: 0.4,
            gamma_n00: 0.7,
            gamma_n01: 0.5,
            gamma_c00: 0.0,
            gamma_c11: 1.0,
        };
        let basis = basis_for(&pi, &m);
        let (c00, c11) = solve_compliers(&basis, &pi, 0.7, 0.4).unwrap();
        assert!(c00.abs() < 1e-12);
        assert!((c11 - 1.0).abs() < 1e-12);
        // pi_n = 0: the 00 cell is the complier cell directly.
        let pi0 = StrataProbs { pi_a: 0.4, pi_c: 0.6, pi_n: 0.0 };
        let m0 = PointModel { pi: pi0, gamma_c00: 0.33, ..m };
        let b0 = basis_for(&pi0, &m0);
        let (c00, _) = solve_compliers(&b0, &pi0, 0.9, 0.4).unwrap();
        assert!((c00 - 0.33).abs() < 1e-12);
    }

    #[test]
    fn support_violation_is_rejected() {
        let pi = StrataProbs { pi_a: 0.45, pi_c: 0.1, pi_n: 0.45 };
        let basis = IdentifiedBasis {
            p_t_z0: 0.45,
            p_t_z1: 0.55,
            p_y_00: 0.9,
            p_y_11: 0.5,
            p_y_01: 0.5,
            p_y_10: 0.5,
        };
        // gamma_n00 small forces the complier cell above 1.
        let err = solve_compliers(&basis, &pi, 0.01, 0.5).unwrap_err();
        assert!(matches!(err, Error::SupportViolation(_)));
    }

    #[test]
    fn monotone_filter_cases() {
        let z0 = Matrix::from_rows(&[vec![0.3], vec![0.6]]);
        let z1 = Matrix::from_rows(&[vec![0.5], vec![0.4]]);
        let (kept, rate) = monotone_filter(&z0, &z1).unwrap();
        assert_eq!(kept, vec![0]);
        assert!((rate - 0.5).abs() < 1e-15);
        // Swapped arms: everything rejected.
        let err = monotone_filter(&Matrix::from_rows(&[vec![0.9]]), &Matrix::from_rows(&[vec![0.1]]));
        assert!(err.is_err());
        // One grid point, correct ordering: nothing rejected.
        let (kept, rate) =
            monotone_filter(&Matrix::from_rows(&[vec![0.1]]), &Matrix::from_rows(&[vec![0.9]]))
                .unwrap();
        assert_eq!((kept.len(), rate), (1, 0.0));
    }
}
