//! Gibbs sampler for the partially observed bivariate probit: truncated
//! latent draws, conjugate normal coefficient updates, and a reflected
//! random-walk Metropolis step for the correlation.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::BiprobitParams;
use crate::dist::{trunc_normal_draw, TruncInterval};
use crate::error::{Error, Result};
use crate::rng::{RngStream, SeqRng};
use crate::util::Matrix;

#[derive(Debug, Clone, Copy)]
pub struct GibbsConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    /// Prior variance of each regression coefficient.
    pub prior_variance: f64,
    /// Random-walk scale for the correlation update.
    pub rho_step: f64,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig { n_iter: 5000, n_burn: 1000, prior_variance: 100.0, rho_step: 0.05, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct BiprobitDraws {
    pub draws: Vec<BiprobitParams>,
    pub rho_accept_rate: f64,
}

impl BiprobitDraws {
    /// Posterior mean and standard deviation of each parameter, in the order
    /// `gamma0, gamma.., beta0, beta.., rho`.
    pub fn summary(&self) -> Vec<(String, f64, f64)> {
        let p = self.draws[0].gamma.len();
        let names: Vec<String> = std::iter::once("gamma0".to_string())
            .chain((0..p).map(|i| format!("gamma{}", i + 1)))
            .chain(std::iter::once("beta0".to_string()))
            .chain((0..p).map(|i| format!("beta{}", i + 1)))
            .chain(std::iter::once("rho".to_string()))
            .collect();
        let extract = |d: &BiprobitParams| -> Vec<f64> {
            std::iter::once(d.gamma0)
                .chain(d.gamma.iter().copied())
                .chain(std::iter::once(d.beta0))
                .chain(d.beta.iter().copied())
                .chain(std::iter::once(d.rho))
                .collect()
        };
        let rows: Vec<Vec<f64>> = self.draws.iter().map(extract).collect();
        names
            .into_iter()
            .enumerate()
            .map(|(j, name)| {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                (name, crate::util::mean(&col), crate::util::sd(&col))
            })
            .collect()
    }
}

struct LatentState {
    z: Vec<f64>,
    w: Vec<f64>,
}

struct Block {
    vars: Vec<usize>,
    design: DMatrix<f64>,
    xtx: DMatrix<f64>,
}

impl Block {
    fn new(x: &Matrix, vars: &[usize]) -> Result<Self> {
        let n = x.nrows();
        for &v in vars {
            if v >= x.ncols() {
                return Err(Error::invalid(format!("equation variable index {v} out of range")));
            }
        }
        let mut design = DMatrix::zeros(n, vars.len() + 1);
        for i in 0..n {
            design[(i, 0)] = 1.0;
            for (j, &v) in vars.iter().enumerate() {
                design[(i, j + 1)] = x.get(i, v);
            }
        }
        let xtx = design.transpose() * &design;
        Ok(Block { vars: vars.to_vec(), design, xtx })
    }

    fn scatter(&self, coef: &DVector<f64>, intercept: &mut f64, full: &mut [f64]) {
        *intercept = coef[0];
        full.iter_mut().for_each(|v| *v = 0.0);
        for (j, &v) in self.vars.iter().enumerate() {
            full[v] = coef[j + 1];
        }
    }
}

/// Fit by Gibbs sampling, imposing the equation-specific variable sets
/// (the exclusion restrictions that identify the model when only the joint
/// indicator `Y = Z W` is observed). Excluded coefficients are fixed at 0.
///
/// `y_i = 1` constrains the latent pair to the positive quadrant; `y_i = 0`
/// to its complement, sampled by component-wise conditional truncated
/// normals within the region.
pub fn gibbs_fit(
    x: &Matrix,
    y: &[u8],
    cheat_vars: &[usize],
    catch_vars: &[usize],
    config: &GibbsConfig,
) -> Result<BiprobitDraws> {
    let n = x.nrows();
    let p = x.ncols();
    if n == 0 || y.len() != n {
        return Err(Error::invalid("empty data or response length mismatch"));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::invalid("response must be binary 0/1"));
    }
    let mut rng = RngStream::new(config.seed, 0x6269_7072_u64).seq();

    let cheat_block = Block::new(x, cheat_vars)?;
    let catch_block = Block::new(x, catch_vars)?;

    let mut params = BiprobitParams {
        gamma0: 0.0,
        gamma: vec![0.0; p],
        beta0: 0.0,
        beta: vec![0.0; p],
        rho: 0.0,
    };
    let mut lat = LatentState {
        z: y.iter().map(|&v| if v == 1 { 0.5 } else { -0.5 }).collect(),
        w: y.iter().map(|&v| if v == 1 { 0.5 } else { -0.5 }).collect(),
    };

    let mut draws = Vec::with_capacity(config.n_iter.saturating_sub(config.n_burn));
    let mut rho_proposals = 0u64;
    let mut rho_accepts = 0u64;

    for it in 0..config.n_iter {
        draw_latents(x, y, &params, &mut lat, &mut rng)?;
        update_coefficients(
            &cheat_block,
            &catch_block,
            x,
            &mut params,
            &lat,
            config.prior_variance,
            &mut rng,
        )?;
        update_rho(x, &mut params, &lat, config.rho_step, &mut rng, &mut rho_proposals, &mut rho_accepts);
        if it >= config.n_burn {
            draws.push(params.clone());
        }
    }
    if draws.is_empty() {
        return Err(Error::invalid("n_iter must exceed n_burn"));
    }
    Ok(BiprobitDraws {
        draws,
        rho_accept_rate: rho_accepts as f64 / rho_proposals.max(1) as f64,
    })
}

fn draw_latents(
    x: &Matrix,
    y: &[u8],
    params: &BiprobitParams,
    lat: &mut LatentState,
    rng: &mut SeqRng,
) -> Result<()> {
    let rho = params.rho;
    let csd = (1.0 - rho * rho).sqrt();
    for i in 0..y.len() {
        let xi = x.row(i);
        let mz = params.cheat_mean(xi);
        let mw = params.catch_mean(xi);
        if y[i] == 1 {
            let mean_z = mz + rho * (lat.w[i] - mw);
            lat.z[i] = trunc_normal_draw(mean_z, csd, TruncInterval::above(0.0), rng.uniform())?;
            let mean_w = mw + rho * (lat.z[i] - mz);
            lat.w[i] = trunc_normal_draw(mean_w, csd, TruncInterval::above(0.0), rng.uniform())?;
        } else {
            // Complement region {not both positive}: each component is
            // unconstrained while the other is nonpositive, truncated below
            // zero otherwise.
            let mean_z = mz + rho * (lat.w[i] - mw);
            lat.z[i] = if lat.w[i] > 0.0 {
                trunc_normal_draw(mean_z, csd, TruncInterval::below(0.0), rng.uniform())?
            } else {
                mean_z + csd * crate::dist::gaussian_quantile(rng.uniform())
            };
            let mean_w = mw + rho * (lat.z[i] - mz);
            lat.w[i] = if lat.z[i] > 0.0 {
                trunc_normal_draw(mean_w, csd, TruncInterval::below(0.0), rng.uniform())?
            } else {
                mean_w + csd * crate::dist::gaussian_quantile(rng.uniform())
            };
        }
    }
    Ok(())
}

fn update_coefficients(
    cheat_block: &Block,
    catch_block: &Block,
    x: &Matrix,
    params: &mut BiprobitParams,
    lat: &LatentState,
    prior_variance: f64,
    rng: &mut SeqRng,
) -> Result<()> {
    let n = x.nrows();
    let rho = params.rho;
    let cvar = 1.0 - rho * rho;

    // Cheat block: regress z* - rho (w* - mw) on the design, noise 1 - rho^2.
    let mut t = DVector::zeros(n);
    for i in 0..n {
        let mw = params.catch_mean(x.row(i));
        t[i] = lat.z[i] - rho * (lat.w[i] - mw);
    }
    let gamma = conjugate_block(&cheat_block.design, &cheat_block.xtx, &t, cvar, prior_variance, rng)?;
    cheat_block.scatter(&gamma, &mut params.gamma0, &mut params.gamma);

    // Catch block, using the refreshed cheat coefficients.
    for i in 0..n {
        let mz = params.cheat_mean(x.row(i));
        t[i] = lat.w[i] - rho * (lat.z[i] - mz);
    }
    let beta = conjugate_block(&catch_block.design, &catch_block.xtx, &t, cvar, prior_variance, rng)?;
    catch_block.scatter(&beta, &mut params.beta0, &mut params.beta);
    Ok(())
}

fn conjugate_block(
    xd: &DMatrix<f64>,
    xtx: &DMatrix<f64>,
    target: &DVector<f64>,
    cond_var: f64,
    prior_variance: f64,
    rng: &mut SeqRng,
) -> Result<DVector<f64>> {
    let p = xd.ncols();
    let mut precision = xtx / cond_var;
    for j in 0..p {
        precision[(j, j)] += 1.0 / prior_variance;
    }
    let chol = Cholesky::new(precision)
        .ok_or_else(|| Error::invalid("coefficient precision not positive definite"))?;
    let xt_t = xd.transpose() * target / cond_var;
    let mean = chol.solve(&xt_t);
    // Sample mean + L^-T eps, covariance = precision^-1.
    let eps = DVector::from_iterator(p, (0..p).map(|_| rng.standard_normal()));
    let draw = chol.l().transpose().solve_upper_triangular(&eps).ok_or_else(|| {
        Error::invalid("triangular solve failed in coefficient update")
    })?;
    Ok(mean + draw)
}

fn update_rho(
    x: &Matrix,
    params: &mut BiprobitParams,
    lat: &LatentState,
    step: f64,
    rng: &mut SeqRng,
    proposals: &mut u64,
    accepts: &mut u64,
) {
    *proposals += 1;
    let mut proposal = params.rho + step * rng.standard_normal();
    // Reflect at the boundary; the prior is uniform on (-1, 1).
    while proposal.abs() > 1.0 {
        proposal = if proposal > 1.0 { 2.0 - proposal } else { -2.0 - proposal };
    }
    let ll = |rho: f64| -> f64 {
        let c = 1.0 - rho * rho;
        let n = x.nrows() as f64;
        let mut quad = 0.0;
        for i in 0..x.nrows() {
            let xi = x.row(i);
            let ez = lat.z[i] - params.cheat_mean(xi);
            let ew = lat.w[i] - params.catch_mean(xi);
            quad += ez * ez - 2.0 * rho * ez * ew + ew * ew;
        }
        -0.5 * n * c.ln() - quad / (2.0 * c)
    };
    let log_ratio = ll(proposal) - ll(params.rho);
    if rng.uniform().ln() < log_ratio {
        params.rho = proposal;
        *accepts += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latent_signs_always_consistent() {
        let stream = RngStream::new(4, 8);
        let rows: Vec<Vec<f64>> =
            (0..60).map(|i| vec![stream.uniform_at(i) * 2.0 - 1.0]).collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<u8> = (0..60).map(|i| u8::from(stream.uniform_at(600 + i) < 0.3)).collect();
        let mut rng = RngStream::new(3, 1).seq();
        let params = BiprobitParams {
            gamma0: 0.2,
            gamma: vec![0.5],
            beta0: -0.1,
            beta: vec![0.3],
            rho: 0.4,
        };
        let mut lat = LatentState {
            z: y.iter().map(|&v| if v == 1 { 0.5 } else { -0.5 }).collect(),
            w: y.iter().map(|&v| if v == 1 { 0.5 } else { -0.5 }).collect(),
        };
        for _ in 0..50 {
            draw_latents(&x, &y, &params, &mut lat, &mut rng).unwrap();
            for i in 0..y.len() {
                if y[i] == 1 {
                    assert!(lat.z[i] > 0.0 && lat.w[i] > 0.0);
                } else {
                    assert!(!(lat.z[i] > 0.0 && lat.w[i] > 0.0));
                }
            }
        }
    }

    #[test]
    fn reflection_keeps_rho_inside() {
        let stream = RngStream::new(10, 2);
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![stream.uniform_at(i)]).collect();
        let x = Matrix::from_rows(&rows);
        let y: Vec<u8> = (0..40).map(|i| u8::from(stream.uniform_at(77 + i) < 0.5)).collect();
        let cfg = GibbsConfig { n_iter: 120, n_burn: 20, seed: 5, ..GibbsConfig::default() };
        let out = gibbs_fit(&x, &y, &[0], &[0], &cfg).unwrap();
        assert!(out.draws.iter().all(|d| d.rho.abs() < 1.0));
        assert_eq!(out.draws.len(), 100);
    }
}
