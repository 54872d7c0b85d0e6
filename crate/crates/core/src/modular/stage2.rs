//! Stage 2: truncated draws of the bound c and the surveillance probability
//! theta over stored phi draws, reconstruction of p = phi / theta, prevalence
//! summaries, and refit-free sensitivity runs.
//!
//! Stage 2 reads only the phi artifact, never the raw training data; that is
//! the factorization boundary that makes replaying it under a different prior
//! a pure post-processing step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::SurveillanceSpec;
use crate::bart::PhiDraws;
use crate::dist::{trunc_beta_draw, trunc_normal_draw, TruncInterval};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::util::{dedup_rows, hash_matrix, quantile, Matrix};

/// A joint draw of the bound and the surveillance probabilities, constrained
/// to the identified-set support: `c >= max_j phi_j` and
/// `phi_j / c <= theta_j <= 1` for every design point.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaDraw {
    pub c: f64,
    pub theta: Vec<f64>,
}

/// Draw the global bound c given one phi draw: a Beta(concentration * c0,
/// concentration * (1 - c0)) prior truncated below at `max_j phi_j`.
/// `c0 = 1` means no informative upper bound; c is pinned at 1.
pub fn sample_c(phi_draw: &[f64], c0: f64, concentration: f64, u: f64) -> Result<f64> {
    if c0 == 1.0 {
        return Ok(1.0);
    }
    let max_phi = phi_draw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_phi <= 0.0 || max_phi >= 1.0 || max_phi.is_nan() {
        return Err(Error::invalid(format!("phi draw outside (0,1): max = {max_phi}")));
    }
    trunc_beta_draw(concentration * c0, concentration * (1.0 - c0), max_phi, u).map_err(|e| {
        match e {
            Error::TruncationMassUnderflow { context } => Error::TruncationMassUnderflow {
                context: format!("bound prior conflicts with identified phi: {context}"),
            },
            other => other,
        }
    })
}

/// Draw theta at every design point given the bound: independently per
/// point, `F^-1(theta_j) ~ Normal(h_j' beta, sigma^2)` truncated below at
/// `F^-1(phi_j / c)`.
///
/// `point_class` groups identical design rows: duplicates share one draw, so
/// theta is a function of x rather than of the observation index. Uniforms
/// are addressed by `(draw stream, class index)`, which is what keeps common
/// random numbers aligned across prior settings.
pub fn sample_theta(
    phi_draw: &[f64],
    c: f64,
    spec: &SurveillanceSpec,
    h_grid: &Matrix,
    point_class: &[usize],
    draw_stream: &RngStream,
) -> Result<ThetaDraw> {
    let j = phi_draw.len();
    if h_grid.nrows() != j || point_class.len() != j {
        return Err(Error::invalid("phi draw, basis grid, and point classes disagree in length"));
    }
    let lin = spec.linear_predictor(h_grid)?;
    let n_class = point_class.iter().copied().max().map_or(0, |m| m + 1);
    let mut class_theta: Vec<f64> = vec![f64::NAN; n_class];
    let mut degenerate_conflicts: Vec<usize> = Vec::new();
    let mut theta = vec![0.0; j];
    for idx in 0..j {
        let class = point_class[idx];
        if class_theta[class].is_nan() {
            let ratio = phi_draw[idx] / c;
            let value = if ratio >= 1.0 {
                // phi and c within one ulp: the support collapses to {1}.
                1.0
            } else {
                let bound = spec.link.quantile(ratio);
                if spec.sigma == 0.0 {
                    if lin[idx] < bound {
                        degenerate_conflicts.push(idx);
                        f64::NAN
                    } else {
                        spec.link.cdf(lin[idx]).max(ratio)
                    }
                } else {
                    let u = draw_stream.uniform_at(1 + class as u64);
                    let v =
                        trunc_normal_draw(lin[idx], spec.sigma, TruncInterval::above(bound), u)?;
                    // Guard the F/F^-1 round trip so support holds bit-exactly.
                    spec.link.cdf(v).max(ratio)
                }
            };
            class_theta[class] = value;
        }
        theta[idx] = class_theta[class];
    }
    if !degenerate_conflicts.is_empty() {
        return Err(Error::DegeneratePriorConflict { points: degenerate_conflicts });
    }
    Ok(ThetaDraw { c, theta })
}

/// `p_j = phi_j / theta_j`, clamped into the mathematically guaranteed
/// `[phi_j, c]` to absorb division rounding.
pub fn reconstruct_p(phi_draw: &[f64], theta_draw: &ThetaDraw) -> Vec<f64> {
    phi_draw
        .iter()
        .zip(&theta_draw.theta)
        .map(|(&phi, &th)| (phi / th).clamp(phi, theta_draw.c))
        .collect()
}

/// Prevalence across design points, per draw and summarized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceSummary {
    /// Per-draw mean of p over the design points.
    pub alpha: Vec<f64>,
    /// Per-draw sum of p (the count form).
    pub alpha_count: Vec<f64>,
    /// (5%, 50%, 95%) quantiles of alpha across draws.
    pub quantiles: (f64, f64, f64),
    pub groups: Vec<GroupPrevalence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPrevalence {
    pub label: String,
    pub n_points: usize,
    pub quantiles: (f64, f64, f64),
}

fn q3(values: &[f64]) -> (f64, f64, f64) {
    (quantile(values, 0.05), quantile(values, 0.5), quantile(values, 0.95))
}

/// Summarize p draws into overall and (optionally) per-group prevalence.
pub fn prevalence(p_draws: &Matrix, group_labels: Option<&[String]>) -> Result<PrevalenceSummary> {
    let (k, j) = (p_draws.nrows(), p_draws.ncols());
    if k == 0 || j == 0 {
        return Err(Error::invalid("prevalence requires nonempty draws"));
    }
    let mut alpha = Vec::with_capacity(k);
    let mut alpha_count = Vec::with_capacity(k);
    for kk in 0..k {
        let s: f64 = p_draws.row(kk).iter().sum();
        alpha_count.push(s);
        alpha.push(s / j as f64);
    }
    let mut groups = Vec::new();
    if let Some(labels) = group_labels {
        if labels.len() != j {
            return Err(Error::invalid(format!(
                "group labels cover {} points, draws have {j}",
                labels.len()
            )));
        }
        let mut levels: Vec<String> = labels.to_vec();
        levels.sort();
        levels.dedup();
        for level in levels {
            let idx: Vec<usize> = (0..j).filter(|&i| labels[i] == level).collect();
            let per_draw: Vec<f64> = (0..k)
                .map(|kk| idx.iter().map(|&i| p_draws.get(kk, i)).sum::<f64>() / idx.len() as f64)
                .collect();
            groups.push(GroupPrevalence {
                label: level,
                n_points: idx.len(),
                quantiles: q3(&per_draw),
            });
        }
    }
    Ok(PrevalenceSummary { quantiles: q3(&alpha), alpha, alpha_count, groups })
}

/// A recorded prior-data conflict: the affected phi draw was skipped, never
/// silently adjusted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictEvent {
    pub draw: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Copy)]
pub struct Stage2Options {
    pub seed: u64,
    /// Share the uniform stream across specs per (draw, point). Required for
    /// draw-level monotone comparisons between prior settings.
    pub common_random_numbers: bool,
    /// Distinguishes streams across specs when CRN is off.
    pub spec_index: u64,
}

impl Default for Stage2Options {
    fn default() -> Self {
        Stage2Options { seed: 0, common_random_numbers: true, spec_index: 0 }
    }
}

/// Output of one stage-2 replay for one spec.
#[derive(Debug, Clone)]
pub struct Stage2Output {
    pub spec_name: String,
    /// Kept draws of p, aligned with `kept`.
    pub p_draws: Matrix,
    pub theta_draws: Matrix,
    pub c_draws: Vec<f64>,
    /// Indices of phi draws that produced a kept joint draw.
    pub kept: Vec<usize>,
    pub conflicts: Vec<ConflictEvent>,
    /// Hash of the phi payload actually consumed.
    pub phi_content_hash: u64,
    pub spec_hash: u64,
}

const STAGE2_STREAM: u64 = 0x7468_6574_6131;

type DrawOutcome = std::result::Result<(f64, ThetaDraw, Vec<f64>), ConflictEvent>;

/// Replay stage 2 for one spec over every phi draw. Draws are independent
/// given their indexed streams, so the loop parallelizes without affecting
/// output content.
pub fn run_stage2(
    phi: &PhiDraws,
    spec: &SurveillanceSpec,
    h_grid: &Matrix,
    opts: &Stage2Options,
) -> Result<Stage2Output> {
    spec.validate()?;
    let j = phi.n_points();
    if h_grid.nrows() != j {
        return Err(Error::invalid("basis grid does not match phi design points"));
    }
    if hash_matrix(&phi.grid) != phi.provenance.grid_hash {
        return Err(Error::ProvenanceMismatch(
            "phi grid does not match the grid hash recorded at fit time".into(),
        ));
    }
    let (point_class, _) = dedup_rows(&phi.grid);
    let base = if opts.common_random_numbers {
        RngStream::new(opts.seed, STAGE2_STREAM)
    } else {
        RngStream::new(opts.seed, STAGE2_STREAM).substream(opts.spec_index)
    };

    let k = phi.n_draws();
    let results: Vec<DrawOutcome> = (0..k)
        .into_par_iter()
        .map(|kk| {
            let phi_k = phi.draw(kk);
            let draw_stream = base.substream(kk as u64);
            let c = match sample_c(phi_k, spec.c0, spec.concentration, draw_stream.uniform_at(0)) {
                Ok(c) => c,
                Err(Error::TruncationMassUnderflow { context }) => {
                    return Err(ConflictEvent { draw: kk, detail: context });
                }
                Err(e) => return Err(ConflictEvent { draw: kk, detail: format!("fatal: {e}") }),
            };
            match sample_theta(phi_k, c, spec, h_grid, &point_class, &draw_stream) {
                Ok(th) => {
                    let p = reconstruct_p(phi_k, &th);
                    Ok((c, th, p))
                }
                Err(Error::TruncationMassUnderflow { context }) => {
                    Err(ConflictEvent { draw: kk, detail: context })
                }
                Err(Error::DegeneratePriorConflict { points }) => Err(ConflictEvent {
                    draw: kk,
                    detail: format!("degenerate prior contradicts bound at points {points:?}"),
                }),
                Err(e) => Err(ConflictEvent { draw: kk, detail: format!("fatal: {e}") }),
            }
        })
        .collect();

    let mut kept = Vec::with_capacity(k);
    let mut conflicts = Vec::new();
    let mut c_draws = Vec::with_capacity(k);
    let mut p_data = Vec::with_capacity(k * j);
    let mut theta_data = Vec::with_capacity(k * j);
    for (kk, res) in results.into_iter().enumerate() {
        match res {
            Ok((c, th, p)) => {
                kept.push(kk);
                c_draws.push(c);
                theta_data.extend_from_slice(&th.theta);
                p_data.extend_from_slice(&p);
            }
            Err(ev) => {
                if ev.detail.starts_with("fatal:") {
                    return Err(Error::invalid(ev.detail));
                }
                conflicts.push(ev);
            }
        }
    }
    Ok(Stage2Output {
        spec_name: spec.name.clone(),
        p_draws: Matrix::new(kept.len(), j, p_data),
        theta_draws: Matrix::new(kept.len(), j, theta_data),
        c_draws,
        kept,
        conflicts,
        phi_content_hash: phi.content_hash(),
        spec_hash: spec.hash(),
    })
}

/// One spec's result within a sensitivity run.
#[derive(Debug, Clone)]
pub struct SensitivityRun {
    pub output: Stage2Output,
    pub prevalence: PrevalenceSummary,
}

/// Replay stage 2 for each spec against a single phi artifact. Exactly one
/// stage-1 fit backs the entire grid; every spec records the hash of the phi
/// payload it consumed, and those hashes are verified identical.
pub fn sensitivity_run(
    phi: &PhiDraws,
    specs: &[SurveillanceSpec],
    grid_columns: &[String],
    opts: &Stage2Options,
    group_labels: Option<&[String]>,
) -> Result<Vec<SensitivityRun>> {
    if specs.is_empty() {
        return Err(Error::invalid("sensitivity run needs at least one spec"));
    }
    let mut runs = Vec::with_capacity(specs.len());
    let mut consumed_hash = None;
    for (s, spec) in specs.iter().enumerate() {
        let h = spec.basis.apply(&phi.grid, grid_columns)?;
        let spec_opts = Stage2Options { spec_index: s as u64, ..*opts };
        let output = run_stage2(phi, spec, &h, &spec_opts)?;
        match consumed_hash {
            None => consumed_hash = Some(output.phi_content_hash),
            Some(prev) => {
                if prev != output.phi_content_hash {
                    return Err(Error::ProvenanceMismatch(format!(
                        "spec '{}' consumed a different phi payload",
                        spec.name
                    )));
                }
            }
        }
        let prev = prevalence(&output.p_draws, group_labels)?;
        runs.push(SensitivityRun { output, prevalence: prev });
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drawfile::Provenance;
    use crate::modular::basis::{BasisSpec, VarTransform};
    use crate::modular::spec::Link;

    fn identity_basis() -> BasisSpec {
        BasisSpec {
            vars: vec![VarTransform {
                var: "m".into(),
                transform: crate::modular::basis::TransformKind::Affine,
                shift: None,
                min: Some(0.0),
                max: Some(1.0),
            }],
            include_intercept: false,
        }
    }

    fn toy_phi(k: usize, values: &[f64]) -> PhiDraws {
        let j = values.len();
        let grid = Matrix::from_rows(
            &(0..j).map(|i| vec![i as f64]).collect::<Vec<_>>(),
        );
        let mut data = Vec::with_capacity(k * j);
        for kk in 0..k {
            for &v in values {
                data.push((v + 0.001 * kk as f64).min(0.99));
            }
        }
        let draws = Matrix::new(k, j, data);
        let provenance = Provenance {
            config_hash: 1,
            data_hash: 2,
            grid_hash: crate::util::hash_matrix(&grid),
            seed: 7,
        };
        PhiDraws { grid, draws, provenance }
    }

    fn spec_with_mean(mean: f64, sigma: f64, c0: f64) -> SurveillanceSpec {
        SurveillanceSpec {
            name: "toy".into(),
            link: Link::Probit,
            sigma,
            c0,
            concentration: 10.0,
            basis: identity_basis(),
            beta: vec![mean],
        }
    }

    #[test]
    fn c_support_contains_max_phi() {
        for i in 1..100 {
            let u = i as f64 / 100.0;
            let c = sample_c(&[0.5, 0.2], 0.3, 10.0, u).unwrap();
            assert!(c > 0.5 && c < 1.0, "u={u}: c={c}");
        }
    }

    #[test]
    fn c_untruncated_limit_matches_beta_mean() {
        // With max phi near 0 the truncation never binds, so draws are plain
        // Beta(10 c0, 10 (1 - c0)) with mean c0.
        let stream = RngStream::new(3, 0);
        let phi = [1e-12];
        let n = 100_000u64;
        let mean =
            (0..n).map(|i| sample_c(&phi, 0.4, 10.0, stream.uniform_at(i)).unwrap()).sum::<f64>()
                / n as f64;
        assert!((mean - 0.4).abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn c_degenerate_when_c0_is_one() {
        assert_eq!(sample_c(&[0.9], 1.0, 10.0, 0.37).unwrap(), 1.0);
    }

    #[test]
    fn theta_support_exact() {
        let phi = toy_phi(50, &[0.3, 0.05, 0.6, 0.6]);
        let spec = spec_with_mean(0.0, 0.5, 0.8);
        let h = Matrix::from_rows(&[vec![0.0], vec![0.0], vec![0.0], vec![0.0]]);
        let out = run_stage2(&phi, &spec, &h, &Stage2Options::default()).unwrap();
        assert!(out.conflicts.is_empty());
        for (row, &kk) in out.kept.iter().enumerate() {
            let c = out.c_draws[row];
            let phi_k = phi.draw(kk);
            let max_phi = phi_k.iter().cloned().fold(0.0, f64::max);
            assert!(c >= max_phi);
            for j in 0..phi.n_points() {
                let th = out.theta_draws.get(row, j);
                assert!(th >= phi_k[j] / c, "theta below bound");
                assert!(th <= 1.0);
                let p = out.p_draws.get(row, j);
                assert!(p >= phi_k[j] && p <= c);
            }
        }
    }

    #[test]
    fn equal_rows_share_theta() {
        let mut phi = toy_phi(5, &[0.2, 0.2, 0.4]);
        // Make rows 0 and 1 identical in the grid.
        phi.grid = Matrix::from_rows(&[vec![7.0], vec![7.0], vec![8.0]]);
        phi.provenance.grid_hash = crate::util::hash_matrix(&phi.grid);
        let spec = spec_with_mean(0.3, 0.5, 1.0);
        let h = Matrix::from_rows(&[vec![0.3], vec![0.3], vec![0.8]]);
        let out = run_stage2(&phi, &spec, &h, &Stage2Options::default()).unwrap();
        for row in 0..out.theta_draws.nrows() {
            assert_eq!(out.theta_draws.get(row, 0), out.theta_draws.get(row, 1));
        }
    }

    #[test]
    fn sigma_zero_conflict_is_an_error_not_a_clamp() {
        let phi = toy_phi(3, &[0.5]);
        // Mean far below the bound F^-1(0.5 / 0.8).
        let spec = spec_with_mean(-3.0, 0.0, 0.8);
        let h = Matrix::from_rows(&[vec![1.0]]);
        let err = sample_theta(
            phi.draw(0),
            0.8,
            &spec,
            &h,
            &[0],
            &RngStream::new(0, 0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegeneratePriorConflict { .. }));
    }

    #[test]
    fn sigma_zero_consistent_prior_is_deterministic() {
        let phi = toy_phi(3, &[0.1]);
        let spec = spec_with_mean(1.5, 0.0, 1.0);
        let h = Matrix::from_rows(&[vec![1.0]]);
        let th =
            sample_theta(phi.draw(0), 1.0, &spec, &h, &[0], &RngStream::new(0, 0)).unwrap();
        assert!((th.theta[0] - crate::dist::gaussian_cdf(1.5)).abs() < 1e-15);
    }

    #[test]
    fn reconstruct_examples() {
        let th = ThetaDraw { c: 1.0, theta: vec![1.0, 0.5, 0.3] };
        let p = reconstruct_p(&[0.3, 0.3, 0.003], &th);
        assert!((p[0] - 0.3).abs() < 1e-15);
        assert!((p[1] - 0.6).abs() < 1e-15);
        assert!((p[2] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn prevalence_constant_p() {
        let p = Matrix::new(2, 10, vec![0.1; 20]);
        let s = prevalence(&p, None).unwrap();
        assert!((s.alpha[0] - 0.1).abs() < 1e-15);
        assert!((s.alpha_count[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prevalence_groups() {
        let p = Matrix::new(1, 4, vec![0.1, 0.2, 0.3, 0.4]);
        let labels: Vec<String> =
            ["b", "a", "b", "a"].iter().map(|s| s.to_string()).collect();
        let s = prevalence(&p, Some(&labels)).unwrap();
        assert_eq!(s.groups.len(), 2);
        assert_eq!(s.groups[0].label, "a");
        assert!((s.groups[0].quantiles.1 - 0.3).abs() < 1e-12);
        assert!((s.groups[1].quantiles.1 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn duplicated_specs_are_bit_identical() {
        let phi = toy_phi(40, &[0.1, 0.25, 0.4]);
        let spec = spec_with_mean(0.2, 0.4, 0.8);
        let h = Matrix::from_rows(&[vec![0.2], vec![0.2], vec![0.2]]);
        let a = run_stage2(&phi, &spec, &h, &Stage2Options::default()).unwrap();
        let b = run_stage2(
            &phi,
            &spec,
            &h,
            &Stage2Options { spec_index: 5, ..Stage2Options::default() },
        )
        .unwrap();
        assert_eq!(a.p_draws, b.p_draws);
        assert_eq!(a.c_draws, b.c_draws);
        assert_eq!(a.phi_content_hash, b.phi_content_hash);
    }

    #[test]
    fn grid_provenance_mismatch_refused() {
        let mut phi = toy_phi(2, &[0.1]);
        phi.provenance.grid_hash ^= 1;
        let spec = spec_with_mean(0.0, 0.3, 1.0);
        let h = Matrix::from_rows(&[vec![0.0]]);
        let err = run_stage2(&phi, &spec, &h, &Stage2Options::default()).unwrap_err();
        assert!(matches!(err, Error::ProvenanceMismatch(_)));
    }

    #[test]
    fn crn_monotone_in_intercept() {
        let phi = toy_phi(60, &[0.05, 0.15, 0.3, 0.02]);
        let spec_lo = spec_with_mean(-0.5, 0.4, 0.8);
        let spec_hi = spec_with_mean(0.5, 0.4, 0.8);
        let h = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0], vec![1.0]]);
        let opts = Stage2Options::default();
        let lo = run_stage2(&phi, &spec_lo, &h, &opts).unwrap();
        let hi = run_stage2(&phi, &spec_hi, &h, &opts).unwrap();
        assert_eq!(lo.kept, hi.kept);
        for r in 0..lo.p_draws.nrows() {
            for j in 0..lo.p_draws.ncols() {
                assert!(hi.theta_draws.get(r, j) >= lo.theta_draws.get(r, j));
                assert!(hi.p_draws.get(r, j) <= lo.p_draws.get(r, j));
            }
        }
    }
}
