//! Prior-data contradiction scores for the surveillance model.

use super::spec::SurveillanceSpec;
use crate::bart::PhiDraws;
use crate::dist::gaussian_cdf;
use crate::error::{Error, Result};
use crate::util::Matrix;

/// Per-point conflict score: the average over phi draws of the prior mass
/// the surveillance model places below the identified lower bound
/// `F^-1(phi_j / c0)`, with the prior mean `c0` plugged in for the bound.
/// Scores near 1 flag regions where the model sits outside the identified
/// set; with `sigma = 0` the score is the indicator of contradiction.
pub fn model_check_residual(
    phi: &PhiDraws,
    spec: &SurveillanceSpec,
    h_grid: &Matrix,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let j = phi.n_points();
    if h_grid.nrows() != j {
        return Err(Error::invalid("basis grid does not match phi design points"));
    }
    let lin = spec.linear_predictor(h_grid)?;
    let k = phi.n_draws();
    let mut scores = vec![0.0; j];
    for kk in 0..k {
        let phi_k = phi.draw(kk);
        for idx in 0..j {
            let ratio = phi_k[idx] / spec.c0;
            let mass = if ratio >= 1.0 {
                1.0
            } else {
                let bound = spec.link.quantile(ratio);
                if spec.sigma == 0.0 {
                    f64::from(lin[idx] < bound)
                } else {
                    gaussian_cdf((bound - lin[idx]) / spec.sigma)
                }
            };
            scores[idx] += mass;
        }
    }
    for s in scores.iter_mut() {
        *s /= k as f64;
    }
    Ok(scores)
}
