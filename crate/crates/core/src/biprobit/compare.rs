//! Probit-scale comparison of estimated versus true cheating probabilities.

use super::BiprobitDraws;
use crate::dist::{gaussian_cdf, gaussian_quantile};
use crate::error::{Error, Result};
use crate::util::{quantile, Matrix};

/// One design point on the normal-linear-predictor scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonPoint {
    pub true_probit: f64,
    pub modular_probit: f64,
    pub biprobit_probit: f64,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub points: Vec<ComparisonPoint>,
    pub rmse_modular: f64,
    pub rmse_biprobit: f64,
    /// Fraction of points whose true probability falls inside the modular
    /// pointwise 90% credible interval.
    pub modular_coverage90: f64,
}

/// Clip to (0,1) before the probit map so boundary estimates stay finite.
fn to_probit(p: f64) -> f64 {
    gaussian_quantile(p.clamp(1e-6, 1.0 - 1e-6))
}

/// Posterior mean of `Pr(Z = 1 | x) = Phi(gamma0 + x' gamma)` per point.
pub fn posterior_cheat_prob(draws: &BiprobitDraws, x: &Matrix) -> Vec<f64> {
    let k = draws.draws.len() as f64;
    (0..x.nrows())
        .map(|i| {
            draws.draws.iter().map(|d| gaussian_cdf(d.cheat_mean(x.row(i)))).sum::<f64>() / k
        })
        .collect()
}

/// Compare both methods against the truth on the probit scale.
///
/// `p_true[j]` is the actual `Pr(Z = 1 | x_j)`, `biprobit_mean[j]` the
/// comparator's posterior-mean probability, and `modular_p_draws` the
/// stage-2 p draws (rows are posterior draws, columns design points).
pub fn evaluate_comparison(
    p_true: &[f64],
    biprobit_mean: &[f64],
    modular_p_draws: &Matrix,
) -> Result<Comparison> {
    let j = p_true.len();
    if biprobit_mean.len() != j || modular_p_draws.ncols() != j {
        return Err(Error::invalid("comparison inputs cover different point sets"));
    }
    if modular_p_draws.nrows() == 0 {
        return Err(Error::invalid("no modular draws to compare"));
    }
    let mut points = Vec::with_capacity(j);
    let mut sse_mod = 0.0;
    let mut sse_bi = 0.0;
    let mut covered = 0usize;
    for idx in 0..j {
        let col: Vec<f64> = (0..modular_p_draws.nrows())
            .map(|k| modular_p_draws.get(k, idx))
            .collect();
        let p_mod = crate::util::mean(&col);
        let point = ComparisonPoint {
            true_probit: to_probit(p_true[idx]),
            modular_probit: to_probit(p_mod),
            biprobit_probit: to_probit(biprobit_mean[idx]),
        };
        sse_mod += (point.modular_probit - point.true_probit).powi(2);
        sse_bi += (point.biprobit_probit - point.true_probit).powi(2);
        let (lo, hi) = (quantile(&col, 0.05), quantile(&col, 0.95));
        if p_true[idx] >= lo && p_true[idx] <= hi {
            covered += 1;
        }
        points.push(point);
    }
    Ok(Comparison {
        points,
        rmse_modular: (sse_mod / j as f64).sqrt(),
        rmse_biprobit: (sse_bi / j as f64).sqrt(),
        modular_coverage90: covered as f64 / j as f64,
    })
}
