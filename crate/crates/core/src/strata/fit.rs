//! Identified-basis fitting for the encouragement design and the posterior
//! ITT pipeline.
//!
//! The observable model factorizes into a treatment model `Pr(T | Z, x)` and
//! an outcome model `Pr(Y | T, Z, x)`; each gets one probit sum-of-trees fit
//! with the arm indicators appended as binary covariates. Draws of the two
//! fits are paired by index, and treatment draws violating compliance
//! monotonicity anywhere on the grid reject the whole joint draw.

use super::identified::{monotone_filter, solve_compliers, strata_probs, IdentifiedBasis};
use super::impute::{impute_and_itt, IttEstimate};
use super::prior::{sample_direct_effects, DirectEffectPrior};
use super::{ObsRecord, StrataModel};
use crate::bart::{fit_probit_bart, BartConfig};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::util::{mean, sd, Matrix};

/// Posterior draws of the identified observable basis on a covariate grid,
/// already filtered for monotonicity.
#[derive(Debug, Clone)]
pub struct StrataBasisDraws {
    pub grid: Matrix,
    pub p_t_z0: Matrix,
    pub p_t_z1: Matrix,
    pub p_y_00: Matrix,
    pub p_y_11: Matrix,
    pub p_y_01: Matrix,
    pub p_y_10: Matrix,
    /// Fraction of treatment draws rejected by the monotonicity filter.
    pub rejection_rate: f64,
    pub warnings: Vec<String>,
}

impl StrataBasisDraws {
    pub fn n_draws(&self) -> usize {
        self.p_t_z0.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.grid.nrows()
    }

    pub fn basis_at(&self, draw: usize, point: usize) -> IdentifiedBasis {
        IdentifiedBasis {
            p_t_z0: self.p_t_z0.get(draw, point),
            p_t_z1: self.p_t_z1.get(draw, point),
            p_y_00: self.p_y_00.get(draw, point),
            p_y_11: self.p_y_11.get(draw, point),
            p_y_01: self.p_y_01.get(draw, point),
            p_y_10: self.p_y_10.get(draw, point),
        }
    }
}

fn with_extra_columns(x: &Matrix, extras: &[f64]) -> Vec<f64> {
    let mut row = Vec::with_capacity(x.ncols() + extras.len());
    row.extend_from_slice(x.row(0));
    row.extend_from_slice(extras);
    row
}

fn stack_arms(grid: &Matrix, arms: &[&[f64]]) -> Matrix {
    let d = grid.ncols();
    let extra = arms[0].len();
    let mut rows = Vec::with_capacity(grid.nrows() * arms.len());
    for arm in arms {
        for i in 0..grid.nrows() {
            let mut row = Vec::with_capacity(d + extra);
            row.extend_from_slice(grid.row(i));
            row.extend_from_slice(arm);
            rows.push(row);
        }
    }
    Matrix::from_rows(&rows)
}

fn slice_block(draws: &Matrix, block: usize, j: usize) -> Matrix {
    let mut data = Vec::with_capacity(draws.nrows() * j);
    for k in 0..draws.nrows() {
        let row = draws.row(k);
        data.extend_from_slice(&row[block * j..(block + 1) * j]);
    }
    Matrix::new(draws.nrows(), j, data)
}

/// Fit the treatment and outcome models and extract identified-basis draws
/// on `grid`, keeping only monotone treatment draws (the outcome fit's draw
/// of the same index is kept with it).
pub fn fit_strata(
    records: &[ObsRecord],
    grid: &Matrix,
    config: &BartConfig,
    seed: u64,
) -> Result<StrataBasisDraws> {
    if records.is_empty() {
        return Err(Error::invalid("no records"));
    }
    let d = records[0].x.len();
    if grid.ncols() != d {
        return Err(Error::invalid("grid covariate dimension mismatch"));
    }
    for r in records {
        r.validate()?;
        if r.x.len() != d {
            return Err(Error::invalid("ragged covariate rows"));
        }
        if r.z == 0 && r.t == 1 {
            // Always-takers exist; nothing to validate beyond binarity.
        }
    }

    let seed_stream = RngStream::new(seed, 0x5354_5241);

    // Treatment model: covariates (x, z), response t.
    let x_treat = Matrix::from_rows(
        &records
            .iter()
            .map(|r| {
                let m = Matrix::from_rows(std::slice::from_ref(&r.x));
                with_extra_columns(&m, &[r.z as f64])
            })
            .collect::<Vec<_>>(),
    );
    let t_resp: Vec<u8> = records.iter().map(|r| r.t).collect();
    let treat_grid = stack_arms(grid, &[&[0.0], &[1.0]]);
    let treat_cfg = BartConfig { seed: seed_stream.bits_at(0), ..config.clone() };
    let treat_fit = fit_probit_bart(&x_treat, &t_resp, &treat_grid, &treat_cfg)?;

    // Outcome model: covariates (x, t, z), response y.
    let x_out = Matrix::from_rows(
        &records
            .iter()
            .map(|r| {
                let m = Matrix::from_rows(std::slice::from_ref(&r.x));
                with_extra_columns(&m, &[r.t as f64, r.z as f64])
            })
            .collect::<Vec<_>>(),
    );
    let y_resp: Vec<u8> = records.iter().map(|r| r.y).collect();
    let out_grid = stack_arms(grid, &[&[0.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]]);
    let out_cfg = BartConfig { seed: seed_stream.bits_at(1), ..config.clone() };
    let out_fit = fit_probit_bart(&x_out, &y_resp, &out_grid, &out_cfg)?;

    let j = grid.nrows();
    let p_t_z0_all = slice_block(&treat_fit.phi.draws, 0, j);
    let p_t_z1_all = slice_block(&treat_fit.phi.draws, 1, j);
    let (kept, rejection_rate) = monotone_filter(&p_t_z0_all, &p_t_z1_all)?;

    let select = |m: &Matrix| -> Matrix {
        let mut data = Vec::with_capacity(kept.len() * j);
        for &k in &kept {
            data.extend_from_slice(m.row(k));
        }
        Matrix::new(kept.len(), j, data)
    };
    let mut warnings = treat_fit.warnings;
    warnings.extend(out_fit.warnings);
    Ok(StrataBasisDraws {
        grid: grid.clone(),
        p_t_z0: select(&p_t_z0_all),
        p_t_z1: select(&p_t_z1_all),
        p_y_00: select(&slice_block(&out_fit.phi.draws, 0, j)),
        p_y_11: select(&slice_block(&out_fit.phi.draws, 1, j)),
        p_y_01: select(&slice_block(&out_fit.phi.draws, 2, j)),
        p_y_10: select(&slice_block(&out_fit.phi.draws, 3, j)),
        rejection_rate,
        warnings,
    })
}

/// Posterior summary of the per-stratum ITT effects.
#[derive(Debug, Clone, Default)]
pub struct IttPosterior {
    pub samples: Vec<IttEstimate>,
    /// Joint draws rejected because the complier cells left [0,1].
    pub support_rejections: usize,
    pub draws_used: usize,
}

impl IttPosterior {
    fn collect(&self, pick: impl Fn(&IttEstimate) -> Option<f64>) -> Vec<f64> {
        self.samples.iter().filter_map(pick).collect()
    }

    /// `(mean, sd, n_draws)` of a stratum's ITT across completed data sets,
    /// or `None` when the stratum was always empty.
    pub fn summary(&self, pick: impl Fn(&IttEstimate) -> Option<f64>) -> Option<(f64, f64, usize)> {
        let vals = self.collect(pick);
        if vals.is_empty() {
            return None;
        }
        let sdev = if vals.len() > 1 { sd(&vals) } else { 0.0 };
        Some((mean(&vals), sdev, vals.len()))
    }
}

/// For each basis draw: draw the unidentified pair from the direct-effect
/// prior, solve the complier cells (rejecting support violations), impute
/// strata and missing outcomes, and record the completed-data ITT effects.
pub fn strata_itt(
    records: &[ObsRecord],
    basis: &StrataBasisDraws,
    prior: &DirectEffectPrior,
    seed: u64,
) -> Result<IttPosterior> {
    let j = basis.n_points();
    let base = RngStream::new(seed, 0x495454);
    let mut out = IttPosterior::default();
    for k in 0..basis.n_draws() {
        let mut rng = base.substream(k as u64).seq();
        let gamma_n01: Vec<f64> = (0..j).map(|p| basis.p_y_01.get(k, p)).collect();
        let gamma_a10: Vec<f64> = (0..j).map(|p| basis.p_y_10.get(k, p)).collect();
        let theta = sample_direct_effects(&gamma_n01, &gamma_a10, prior, &mut rng)?;

        let mut model = StrataModel {
            grid: basis.grid.clone(),
            pi_a: Vec::with_capacity(j),
            pi_c: Vec::with_capacity(j),
            pi_n: Vec::with_capacity(j),
            gamma_a10,
            gamma_a11: theta.gamma_a11,
            gamma_n00: theta.gamma_n00,
            gamma_n01,
            gamma_c00: Vec::with_capacity(j),
            gamma_c11: Vec::with_capacity(j),
        };
        let mut rejected = false;
        for p in 0..j {
            let b = basis.basis_at(k, p);
            let pi = strata_probs(&b)?;
            match solve_compliers(&b, &pi, model.gamma_n00[p], model.gamma_a11[p]) {
                Ok((c00, c11)) => {
                    model.pi_a.push(pi.pi_a);
                    model.pi_c.push(pi.pi_c);
                    model.pi_n.push(pi.pi_n);
                    model.gamma_c00.push(c00);
                    model.gamma_c11.push(c11);
                }
                Err(Error::SupportViolation(_)) | Err(Error::StratumAbsent(_)) => {
                    rejected = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if rejected {
            out.support_rejections += 1;
            continue;
        }
        let (_, itt) = impute_and_itt(records, &model, &mut rng)?;
        out.samples.push(itt);
        out.draws_used += 1;
    }
    if out.draws_used == 0 {
        return Err(Error::SupportViolation(
            "every joint draw violated the identified-set support".into(),
        ));
    }
    Ok(out)
}

const BASIS_MAGIC: [u8; 4] = *b"SBAS";
const BASIS_VERSION: u32 = 1;

/// Serialize basis draws: magic, version, K, J, grid columns, the grid, the
/// rejection rate, then the six K x J blocks in a fixed order. All numbers
/// little-endian.
pub fn write_basis_file(path: &std::path::Path, basis: &StrataBasisDraws) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&BASIS_MAGIC)?;
    w.write_all(&BASIS_VERSION.to_le_bytes())?;
    w.write_all(&(basis.n_draws() as u64).to_le_bytes())?;
    w.write_all(&(basis.n_points() as u64).to_le_bytes())?;
    w.write_all(&(basis.grid.ncols() as u64).to_le_bytes())?;
    for v in basis.grid.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&basis.rejection_rate.to_le_bytes())?;
    for block in
        [&basis.p_t_z0, &basis.p_t_z1, &basis.p_y_00, &basis.p_y_11, &basis.p_y_01, &basis.p_y_10]
    {
        for v in block.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_basis_file(path: &std::path::Path) -> Result<StrataBasisDraws> {
    use std::io::Read;
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != BASIS_MAGIC {
        return Err(Error::invalid("not a strata basis file"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != BASIS_VERSION {
        return Err(Error::invalid("unsupported strata basis version"));
    }
    let mut b8 = [0u8; 8];
    let mut read_u64 = |r: &mut dyn Read| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let k = read_u64(&mut r)? as usize;
    let j = read_u64(&mut r)? as usize;
    let d = read_u64(&mut r)? as usize;
    let read_f64s = |r: &mut dyn Read, n: usize| -> Result<Vec<f64>> {
        let mut out = vec![0.0; n];
        let mut buf = [0u8; 8];
        for v in out.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(out)
    };
    let grid = Matrix::new(j, d, read_f64s(&mut r, j * d)?);
    let rejection_rate = read_f64s(&mut r, 1)?[0];
    let mut blocks = Vec::with_capacity(6);
    for _ in 0..6 {
        blocks.push(Matrix::new(k, j, read_f64s(&mut r, k * j)?));
    }
    let p_y_10 = blocks.pop().unwrap();
    let p_y_01 = blocks.pop().unwrap();
    let p_y_11 = blocks.pop().unwrap();
    let p_y_00 = blocks.pop().unwrap();
    let p_t_z1 = blocks.pop().unwrap();
    let p_t_z0 = blocks.pop().unwrap();
    Ok(StrataBasisDraws {
        grid,
        p_t_z0,
        p_t_z1,
        p_y_00,
        p_y_11,
        p_y_01,
        p_y_10,
        rejection_rate,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strata::simulate::{simulate_trial, TrialConfig};

    #[test]
    fn basis_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.bin");
        let grid = Matrix::from_rows(&[vec![0.1, 0.0], vec![0.9, 1.0]]);
        let m = |v: f64| Matrix::new(3, 2, vec![v; 6]);
        let basis = StrataBasisDraws {
            grid,
            p_t_z0: m(0.2),
            p_t_z1: m(0.7),
            p_y_00: m(0.5),
            p_y_11: m(0.6),
            p_y_01: m(0.55),
            p_y_10: m(0.65),
            rejection_rate: 0.125,
            warnings: Vec::new(),
        };
        write_basis_file(&path, &basis).unwrap();
        let back = read_basis_file(&path).unwrap();
        assert_eq!(back.grid, basis.grid);
        assert_eq!(back.p_y_10, basis.p_y_10);
        assert_eq!(back.rejection_rate, 0.125);
    }

    #[test]
    fn small_end_to_end_pipeline() {
        let trial = simulate_trial(&TrialConfig {
            n: 600,
            seed: 5,
            n_age: 4,
            b_a: 0.0,
            b_n: 0.0,
        })
        .unwrap();
        let cfg = BartConfig {
            n_trees: 30,
            n_burn: 100,
            n_keep: 60,
            n_cutpoints: 20,
            ..BartConfig::default()
        };
        let basis = fit_strata(&trial.records, &trial.grid, &cfg, 9).unwrap();
        assert!(basis.n_draws() > 0);
        assert!(basis.rejection_rate < 1.0);
        let post =
            strata_itt(&trial.records, &basis, &DirectEffectPrior::centered(0.1), 11).unwrap();
        let (m, s, n) = post.summary(|e| e.itt_c).unwrap();
        assert!(n > 10, "too few usable draws: {n}");
        assert!(m.is_finite() && s >= 0.0);
        assert!((-1.0..=1.0).contains(&m));
    }
}
