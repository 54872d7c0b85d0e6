//! Surveillance-model configuration: link, coefficients, noise scale, and
//! the bound prior, plus intercept calibration.

use serde::{Deserialize, Serialize};

use super::basis::{BasisSpec, VarTransform};
use crate::dist::{gaussian_cdf, gaussian_quantile};
use crate::error::{Error, Result};
use crate::util::{fnv1a, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Probit,
    Logit,
}

impl Link {
    /// `F(v)`: link-scale value to probability.
    pub fn cdf(&self, v: f64) -> f64 {
        match self {
            Link::Probit => gaussian_cdf(v),
            Link::Logit => {
                // Evaluate from the smaller exponent side for stability.
                if v >= 0.0 {
                    1.0 / (1.0 + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// `F^-1(p)` for `p` in (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Link::Probit => gaussian_quantile(p),
            Link::Logit => (p / (1.0 - p)).ln(),
        }
    }
}

fn default_concentration() -> f64 {
    10.0
}

/// A named prior configuration for the surveillance probability theta(x):
/// `F^-1(theta_x) ~ Normal(h(x)' beta, sigma^2)` truncated to the identified
/// set, with a `Beta(concentration * c0, concentration * (1 - c0))` prior on
/// the global bound c. `c0 = 1` degenerates to no upper bound (c = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveillanceSpec {
    pub name: String,
    pub link: Link,
    pub sigma: f64,
    pub c0: f64,
    #[serde(default = "default_concentration")]
    pub concentration: f64,
    pub basis: BasisSpec,
    /// Coefficients; the intercept comes first when the basis includes one.
    pub beta: Vec<f64>,
}

impl SurveillanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if self.c0 <= 0.0 || self.c0 > 1.0 || self.c0.is_nan() {
            return Err(Error::invalid(format!("c0 must lie in (0, 1], got {}", self.c0)));
        }
        if self.concentration <= 0.0 || self.concentration.is_nan() {
            return Err(Error::invalid("concentration must be positive"));
        }
        if self.beta.len() != self.basis.output_dim() {
            return Err(Error::invalid(format!(
                "beta has {} entries but the basis produces {} columns",
                self.beta.len(),
                self.basis.output_dim()
            )));
        }
        Ok(())
    }

    pub fn hash(&self) -> u64 {
        fnv1a(serde_json::to_string(self).expect("spec serializes").as_bytes())
    }

    /// Linear predictor `h' beta` for each row of a basis matrix.
    pub fn linear_predictor(&self, h: &Matrix) -> Result<Vec<f64>> {
        if h.ncols() != self.beta.len() {
            return Err(Error::invalid(format!(
                "basis matrix has {} columns, beta has {}",
                h.ncols(),
                self.beta.len()
            )));
        }
        Ok((0..h.nrows())
            .map(|i| h.row(i).iter().zip(&self.beta).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Replace the intercept so the average of `F(h' beta)` over the rows of
    /// `h` equals `target`.
    pub fn calibrate_intercept(&mut self, h: &Matrix, target: f64) -> Result<f64> {
        if !self.basis.include_intercept {
            return Err(Error::invalid("cannot calibrate a basis without an intercept"));
        }
        let mut rest = vec![0.0; h.nrows()];
        for (i, r) in rest.iter_mut().enumerate() {
            *r = h.row(i).iter().zip(&self.beta).skip(1).map(|(a, b)| a * b).sum();
        }
        let b0 = calibrate_intercept(self.link, &rest, target)?;
        self.beta[0] = b0;
        Ok(b0)
    }

    /// Surveillance model A: media attention and qui tam industries raise
    /// discovery; intercept calibrated to a 30% average discovery rate.
    pub fn model_a(sigma: f64, c0: f64) -> Self {
        SurveillanceSpec {
            name: format!("model_A_sigma{sigma}_c{c0}"),
            link: Link::Logit,
            sigma,
            c0,
            concentration: 10.0,
            basis: standard_basis(),
            beta: vec![0.0, -2.5, 2.0, 0.0, 0.0, 1.0],
        }
    }

    /// Surveillance model B: adds a negative cash and positive net-income
    /// adjustment, intercept recalibrated to the same discovery rate.
    pub fn model_b(sigma: f64, c0: f64) -> Self {
        SurveillanceSpec {
            name: format!("model_B_sigma{sigma}_c{c0}"),
            link: Link::Logit,
            sigma,
            c0,
            concentration: 10.0,
            basis: standard_basis(),
            beta: vec![-0.85, -2.5, 2.0, -1.5, 2.5, 1.0],
        }
    }

    /// The eight-model sensitivity grid: A/B crossed with
    /// sigma in {0.25, 0.5} and c0 in {0.4, 0.8}.
    pub fn preset_grid() -> Vec<SurveillanceSpec> {
        let mut out = Vec::with_capacity(8);
        for make in [Self::model_a as fn(f64, f64) -> _, Self::model_b as fn(f64, f64) -> _] {
            for &sigma in &[0.25, 0.5] {
                for &c0 in &[0.4, 0.8] {
                    out.push(make(sigma, c0));
                }
            }
        }
        out
    }
}

fn standard_basis() -> BasisSpec {
    BasisSpec {
        vars: vec![
            VarTransform::affine("fiscal_year"),
            VarTransform::shifted_log("ft_hits", 1.0),
            VarTransform::affine("cash"),
            VarTransform::shifted_log("net_income", 1.0),
            VarTransform::affine("qui_tam"),
        ],
        include_intercept: true,
    }
}

/// Solve for the intercept `b0` with `mean_i F(b0 + rest_i) = target` by
/// bisection; the mean is strictly increasing in `b0`, so the root is
/// unique. Converges to a residual at most 1e-10.
pub fn calibrate_intercept(link: Link, rest: &[f64], target: f64) -> Result<f64> {
    if rest.is_empty() {
        return Err(Error::invalid("calibration requires at least one design row"));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("target rate must lie in (0,1), got {target}")));
    }
    let mean_at = |b0: f64| rest.iter().map(|&r| link.cdf(b0 + r)).sum::<f64>() / rest.len() as f64;
    let mut lo = -50.0;
    let mut hi = 50.0;
    while mean_at(lo) > target {
        lo *= 2.0;
    }
    while mean_at(hi) < target {
        hi *= 2.0;
    }
    let mut mid = 0.0;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let m = mean_at(mid);
        if (m - target).abs() <= 1e-10 {
            return Ok(mid);
        }
        if m < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}
