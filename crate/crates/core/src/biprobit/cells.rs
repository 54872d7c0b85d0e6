//! The four observable-cell probabilities of the partially observed
//! bivariate probit with no false positives.

use super::BiprobitParams;
use crate::dist::{binormal_cdf, gaussian_cdf};

/// `(p_cc, p_cn, p_nc, p_nn)`: cheat-and-caught, cheat-not-caught,
/// not-cheat-caught (structurally zero), not-cheat-not-caught. Nonnegative
/// and summing to one up to rounding.
pub fn wang_cell_probs(x: &[f64], params: &BiprobitParams) -> (f64, f64, f64, f64) {
    let mz = params.cheat_mean(x);
    let mw = params.catch_mean(x);
    let p_cheat = gaussian_cdf(mz);
    let p_cc = binormal_cdf(mz, mw, params.rho);
    let p_cn = (p_cheat - p_cc).max(0.0);
    let p_nn = 1.0 - p_cheat;
    (p_cc, p_cn, 0.0, p_nn)
}
