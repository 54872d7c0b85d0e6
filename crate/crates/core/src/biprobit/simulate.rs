//! Simulation from the latent bivariate-probit designs, retaining the hidden
//! truth in a sidecar for evaluation only.

use std::f64::consts::PI;

use super::{BiprobitParams, SimDesign};
use crate::dist::{binormal_cdf, gaussian_cdf};
use crate::error::Result;
use crate::rng::RngStream;
use crate::util::Matrix;

/// Hidden truth for one simulated record. Never fed to any fitting path.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub z: u8,
    pub w: u8,
    /// Pr(Z = 1 | x).
    pub p_true: f64,
    /// Pr(W = 1 | Z = 1, x) — the true surveillance probability.
    pub theta_true: f64,
    /// Pr(Z = 1, W = 1 | x) — the identified component.
    pub phi_true: f64,
}

#[derive(Debug, Clone)]
pub struct SimData {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub truth: Vec<SimTruth>,
}

/// Draw covariates and latent utilities, emit `Y = 1(Z* > 0) 1(W* > 0)`.
pub fn simulate(design: &SimDesign, params: &BiprobitParams, stream: &RngStream) -> Result<SimData> {
    params.validate()?;
    let mut rng = stream.seq();
    let n = design.n;
    let rho = params.rho;
    let rho_c = (1.0 - rho * rho).sqrt();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let x = vec![
            -PI / 2.0 + PI * rng.uniform(),
            -1.5 * PI + 3.0 * PI * rng.uniform(),
            -1.5 * PI + 3.0 * PI * rng.uniform(),
        ];
        let (mz, mw) = design.latent_means(&x, params);
        let e1 = rng.standard_normal();
        let e2 = rng.standard_normal();
        let z_star = mz + e1;
        let w_star = mw + rho * e1 + rho_c * e2;
        let z = u8::from(z_star > 0.0);
        let w = u8::from(w_star > 0.0);
        y.push(z & w);
        let p_true = gaussian_cdf(mz);
        let phi_true = binormal_cdf(mz, mw, rho);
        let theta_true = if p_true > 0.0 { (phi_true / p_true).min(1.0) } else { 0.0 };
        truth.push(SimTruth { z, w, p_true, theta_true, phi_true });
        rows.push(x);
    }
    Ok(SimData { x: Matrix::from_rows(&rows), y, truth })
}
