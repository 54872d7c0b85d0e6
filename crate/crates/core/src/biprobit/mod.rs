//! Partially observed bivariate probit comparator: cell probabilities,
//! simulation designs, a Gibbs sampler with a Metropolis step for the
//! correlation, and probit-scale comparison against the modular pipeline.

mod cells;
mod compare;
mod gibbs;
mod simulate;

pub use cells::wang_cell_probs;
pub use compare::{evaluate_comparison, posterior_cheat_prob, Comparison, ComparisonPoint};
pub use gibbs::{gibbs_fit, BiprobitDraws, GibbsConfig};
pub use simulate::{simulate, SimData, SimTruth};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Latent-utility parameters: cheat equation `(gamma0, gamma)`, catch
/// equation `(beta0, beta)`, latent correlation `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiprobitParams {
    pub gamma0: f64,
    pub gamma: Vec<f64>,
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub rho: f64,
}

impl BiprobitParams {
    /// Reference parameter point for the simulation designs. The exclusion
    /// restriction holds: x3 is omitted from the cheat equation and x2 from
    /// the catch equation.
    pub fn reference() -> Self {
        BiprobitParams {
            gamma0: -0.5,
            gamma: vec![-1.0, 0.75, 0.0],
            beta0: -0.5,
            beta: vec![-0.75, 0.0, -0.5],
            rho: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.abs() >= 1.0 {
            return Err(Error::invalid(format!("rho must lie in (-1,1), got {}", self.rho)));
        }
        if self.gamma.len() != self.beta.len() {
            return Err(Error::invalid("gamma and beta must have equal length"));
        }
        Ok(())
    }

    /// Linear cheat-equation mean `gamma0 + x' gamma`.
    pub fn cheat_mean(&self, x: &[f64]) -> f64 {
        self.gamma0 + dot(x, &self.gamma)
    }

    /// Linear catch-equation mean `beta0 + x' beta`.
    pub fn catch_mean(&self, x: &[f64]) -> f64 {
        self.beta0 + dot(x, &self.beta)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Linear,
    Sine,
}

/// Simulation design: three covariates, `x1 ~ Uniform(-pi/2, pi/2)` and
/// `x2, x3 ~ Uniform(-3pi/2, 3pi/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub kind: DesignKind,
    pub n: usize,
}

impl SimDesign {
    /// Latent means of the (cheat, catch) pair. The sine design places beta
    /// in the first component and gamma in the second, exactly as specified.
    pub fn latent_means(&self, x: &[f64], params: &BiprobitParams) -> (f64, f64) {
        match self.kind {
            DesignKind::Linear => (params.cheat_mean(x), params.catch_mean(x)),
            DesignKind::Sine => {
                let mz = 0.5
                    + x.iter()
                        .zip(&params.beta)
                        .map(|(xi, b)| (xi + std::f64::consts::PI).sin() * b)
                        .sum::<f64>();
                let mw =
                    x.iter().zip(&params.gamma).map(|(xi, g)| xi.sin() * g).sum::<f64>();
                (mz, mw)
            }
        }
    }
}
