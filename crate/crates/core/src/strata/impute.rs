//! Imputation of principal-strata membership and missing potential
//! outcomes, and the completed-data intention-to-treat effects.

use std::collections::HashMap;

use super::{ObsRecord, StrataModel};
use crate::error::{Error, Result};
use crate::rng::SeqRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stratum {
    AlwaysTaker,
    NeverTaker,
    Complier,
}

/// Per-stratum intention-to-treat estimate from one completed data set.
/// `None` when the stratum is empty (reported as absent, never as 0).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IttEstimate {
    pub itt_c: Option<f64>,
    pub itt_n: Option<f64>,
    pub itt_a: Option<f64>,
    pub n_c: usize,
    pub n_n: usize,
    pub n_a: usize,
}

/// Full conditional of stratum membership given one observation.
///
/// `(z=1, t=0)` records are never-takers and `(z=0, t=1)` always-takers with
/// probability one; `(z=t=1)` mixes compliers and always-takers with odds
/// `pi_c L_c : pi_a L_a` where `L_s` is the Bernoulli likelihood of the
/// observed outcome under `gamma_s^{tz}`; `(z=t=0)` mixes compliers and
/// never-takers analogously. Returns `(Pr[a], Pr[n], Pr[c])`.
#[allow(clippy::too_many_arguments)]
pub fn stratum_posterior(
    z: u8,
    t: u8,
    y: u8,
    pi: (f64, f64, f64),
    gamma_a11: f64,
    gamma_n00: f64,
    gamma_c11: f64,
    gamma_c00: f64,
) -> Result<(f64, f64, f64)> {
    let (pi_a, pi_c, pi_n) = pi;
    let bern = |p: f64, y: u8| if y == 1 { p } else { 1.0 - p };
    match (z, t) {
        (1, 0) => Ok((0.0, 1.0, 0.0)),
        (0, 1) => Ok((1.0, 0.0, 0.0)),
        (1, 1) => {
            let wa = pi_a * bern(gamma_a11, y);
            let wc = pi_c * bern(gamma_c11, y);
            let s = wa + wc;
            if s <= 0.0 {
                return Err(Error::invalid("zero-probability (z=1,t=1) cell"));
            }
            Ok((wa / s, 0.0, wc / s))
        }
        (0, 0) => {
            let wn = pi_n * bern(gamma_n00, y);
            let wc = pi_c * bern(gamma_c00, y);
            let s = wn + wc;
            if s <= 0.0 {
                return Err(Error::invalid("zero-probability (z=0,t=0) cell"));
            }
            Ok((0.0, wn / s, wc / s))
        }
        _ => Err(Error::invalid("binary fields out of range")),
    }
}

fn gamma_at(model: &StrataModel, s: Stratum, t: u8, z: u8, j: usize) -> f64 {
    match (s, t, z) {
        (Stratum::AlwaysTaker, 1, 0) => model.gamma_a10[j],
        (Stratum::AlwaysTaker, 1, 1) => model.gamma_a11[j],
        (Stratum::NeverTaker, 0, 0) => model.gamma_n00[j],
        (Stratum::NeverTaker, 0, 1) => model.gamma_n01[j],
        (Stratum::Complier, 0, 0) => model.gamma_c00[j],
        (Stratum::Complier, 1, 1) => model.gamma_c11[j],
        _ => unreachable!("stratum {s:?} cannot produce t={t} under z={z}"),
    }
}

/// Treatment a stratum member receives under instrument arm `z`.
fn treatment_under(s: Stratum, z: u8) -> u8 {
    match s {
        Stratum::AlwaysTaker => 1,
        Stratum::NeverTaker => 0,
        Stratum::Complier => z,
    }
}

/// Impute strata memberships and the missing potential outcome for every
/// record under one model draw, then evaluate the completed-data ITT per
/// stratum.
///
/// Records are matched to the model's design grid by exact covariate
/// equality. Each record consumes exactly two uniforms (membership, then
/// the missing outcome), in record order.
pub fn impute_and_itt(
    records: &[ObsRecord],
    model: &StrataModel,
    rng: &mut SeqRng,
) -> Result<(Vec<Stratum>, IttEstimate)> {
    let mut grid_index: HashMap<Vec<u64>, usize> = HashMap::new();
    for j in 0..model.grid.nrows() {
        let key: Vec<u64> = model.grid.row(j).iter().map(|v| v.to_bits()).collect();
        grid_index.entry(key).or_insert(j);
    }

    let mut strata = Vec::with_capacity(records.len());
    let mut sums = HashMap::from([
        (Stratum::Complier, (0.0f64, 0usize)),
        (Stratum::NeverTaker, (0.0, 0)),
        (Stratum::AlwaysTaker, (0.0, 0)),
    ]);
    for rec in records {
        rec.validate()?;
        let key: Vec<u64> = rec.x.iter().map(|v| v.to_bits()).collect();
        let &j = grid_index.get(&key).ok_or_else(|| {
            Error::invalid(format!("record covariates {:?} not on the model grid", rec.x))
        })?;
        let pi = (model.pi_a[j], model.pi_c[j], model.pi_n[j]);
        let (wa, wn, _wc) = stratum_posterior(
            rec.z,
            rec.t,
            rec.y,
            pi,
            model.gamma_a11[j],
            model.gamma_n00[j],
            model.gamma_c11[j],
            model.gamma_c00[j],
        )?;
        let u = rng.uniform();
        let s = if u < wa {
            Stratum::AlwaysTaker
        } else if u < wa + wn {
            Stratum::NeverTaker
        } else {
            Stratum::Complier
        };
        // Missing potential outcome: the counterfactual instrument arm.
        let z_mis = 1 - rec.z;
        let t_mis = treatment_under(s, z_mis);
        let p_mis = gamma_at(model, s, t_mis, z_mis, j);
        let y_mis = u8::from(rng.uniform() < p_mis);

        // Completed-data contribution Y(.,1) - Y(.,0).
        let (y1, y0) = if rec.z == 1 { (rec.y, y_mis) } else { (y_mis, rec.y) };
        let entry = sums.get_mut(&s).unwrap();
        entry.0 += y1 as f64 - y0 as f64;
        entry.1 += 1;
        strata.push(s);
    }

    let take = |s: Stratum| -> (Option<f64>, usize) {
        let (sum, n) = sums[&s];
        if n == 0 {
            (None, 0)
        } else {
            (Some(sum / n as f64), n)
        }
    };
    let (itt_c, n_c) = take(Stratum::Complier);
    let (itt_n, n_n) = take(Stratum::NeverTaker);
    let (itt_a, n_a) = take(Stratum::AlwaysTaker);
    Ok((strata, IttEstimate { itt_c, itt_n, itt_a, n_c, n_n, n_a }))
}
