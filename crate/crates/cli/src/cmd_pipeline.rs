//! The two-stage pipeline commands. Stage separation is structural: fit-phi
//! writes the phi artifact and never samples theta; the stage-2 commands
//! read only the artifact (plus its grid) and refuse hash mismatches.

use std::path::{Path, PathBuf};

use clap::Args;

use modprior::bart::{fit_probit_bart, BartConfig, PhiDraws};
use modprior::dataset::{load_csv, read_grid_csv, write_grid_csv};
use modprior::drawfile::{
    export_draws_csv, read_draw_file, write_draw_file, Provenance, MAGIC_P, MAGIC_PHI,
};
use modprior::modular::{
    model_check_residual, prevalence, run_stage2, sensitivity_run, Stage2Options, Stage2Output,
    SurveillanceSpec,
};
use modprior::util::{hash_matrix, quantile, Matrix};

use crate::errors::{require_file, CliError, CliResult};
use crate::manifest::ManifestBuilder;
use crate::{ensure_out_dir, DrawFormat, OutArgs};

#[derive(Args)]
pub struct FitPhiArgs {
    #[command(flatten)]
    out: OutArgs,
    /// Training data CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the binary response column.
    #[arg(long)]
    response: String,
    /// Optional categorical group column (propagated to the grid CSV).
    #[arg(long)]
    group: Option<String>,
    /// Sampler configuration JSON; defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Evaluate phi on this grid CSV instead of the training rows.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Build a profile grid: vary this covariate over its observed range.
    #[arg(long)]
    profile_vary: Option<String>,
    /// Row index whose other covariates the profile grid holds fixed.
    #[arg(long, default_value_t = 0)]
    profile_row: usize,
    #[arg(long, default_value_t = 50)]
    profile_points: usize,
    /// Fit basis parameters (and optionally intercepts) for these specs.
    #[arg(long)]
    spec_template: Option<PathBuf>,
    /// Calibrate each emitted spec's intercept to this mean rate.
    #[arg(long)]
    calibrate: Option<f64>,
    #[arg(long, value_enum, default_value = "binary")]
    format: DrawFormat,
}

fn load_bart_config(path: Option<&Path>, seed: u64) -> CliResult<BartConfig> {
    let mut cfg: BartConfig = match path {
        Some(p) => {
            require_file(p)?;
            serde_json::from_str(&std::fs::read_to_string(p)?)?
        }
        None => BartConfig::default(),
    };
    cfg.seed = seed;
    Ok(cfg)
}

pub fn fit_phi(args: FitPhiArgs) -> CliResult<()> {
    ensure_out_dir(&args.out.out)?;
    require_file(&args.data)?;
    let data = load_csv(&args.data, &args.response, args.group.as_deref())?;
    let cfg = load_bart_config(args.config.as_deref(), args.out.seed)?;

    let (grid, group_labels): (Matrix, Option<Vec<String>>) = match (&args.grid, &args.profile_vary)
    {
        (Some(_), Some(_)) => {
            return Err(CliError::schema("--grid and --profile-vary are mutually exclusive"))
        }
        (Some(path), None) => {
            require_file(path)?;
            let (cols, grid) = read_grid_csv(path)?;
            if cols != data.columns {
                return Err(CliError::schema(format!(
                    "grid columns {cols:?} do not match data covariates {:?}",
                    data.columns
                )));
            }
            (grid, None)
        }
        (None, Some(var)) => (profile_grid(&data.x, &data.columns, var, args.profile_row, args.profile_points)?, None),
        (None, None) => (data.x.clone(), data.groups.clone()),
    };

    let fit = fit_probit_bart(&data.x, &data.y, &grid, &cfg)?;
    for w in &fit.warnings {
        eprintln!("modprior: warning: {w}");
    }

    let mut manifest = ManifestBuilder::new(args.out.seed);
    manifest.config_hash("bart", cfg.hash());
    manifest.data_hash("training", fit.phi.provenance.data_hash);
    manifest.data_hash("grid", fit.phi.provenance.grid_hash);

    let phi_path = args.out.out.join("phi.bin");
    write_draw_file(&phi_path, MAGIC_PHI, &fit.phi.draws, &fit.phi.provenance)?;
    manifest.artifact(&phi_path);
    if matches!(args.format, DrawFormat::Csv | DrawFormat::Both) {
        let csv_path = args.out.out.join("phi.csv");
        export_draws_csv(&csv_path, &fit.phi.draws, "phi")?;
        manifest.artifact(&csv_path);
    }
    let grid_path = args.out.out.join("grid.csv");
    write_grid_csv(&grid_path, &data.columns, &grid)?;
    manifest.artifact(&grid_path);
    if let Some(labels) = &group_labels {
        let path = args.out.out.join("groups.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["point_index", "group"])?;
        for (i, g) in labels.iter().enumerate() {
            w.write_record([i.to_string(), g.clone()])?;
        }
        w.flush()?;
        manifest.artifact(&path);
    }

    if let Some(template) = &args.spec_template {
        require_file(template)?;
        let specs: Vec<SurveillanceSpec> =
            serde_json::from_str(&std::fs::read_to_string(template)?)?;
        let mut fitted = Vec::with_capacity(specs.len());
        for mut spec in specs {
            let (basis, h) = modprior::modular::make_basis(&data.x, &data.columns, &spec.basis)?;
            spec.basis = basis;
            if let Some(target) = args.calibrate {
                spec.calibrate_intercept(&h, target)?;
            }
            spec.validate()?;
            fitted.push(spec);
        }
        let spec_path = args.out.out.join("specs.json");
        std::fs::write(&spec_path, serde_json::to_string_pretty(&fitted)?)?;
        manifest.artifact(&spec_path);
    }

    manifest.write(&args.out.out)?;
    Ok(())
}

fn profile_grid(
    x: &Matrix,
    columns: &[String],
    vary: &str,
    row: usize,
    points: usize,
) -> CliResult<Matrix> {
    let var_idx = columns
        .iter()
        .position(|c| c == vary)
        .ok_or_else(|| CliError::schema(format!("profile variable '{vary}' not found")))?;
    if row >= x.nrows() {
        return Err(CliError::schema(format!("profile row {row} out of range")));
    }
    if points < 2 {
        return Err(CliError::schema("profile grid needs at least 2 points"));
    }
    let col = x.column(var_idx);
    let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
        (a.min(v), b.max(v))
    });
    let base = x.row(row).to_vec();
    let rows: Vec<Vec<f64>> = (0..points)
        .map(|i| {
            let mut r = base.clone();
            r[var_idx] = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            r
        })
        .collect();
    Ok(Matrix::from_rows(&rows))
}

/// Load a phi artifact and its grid, verifying the recorded grid hash.
pub fn load_phi(phi_path: &Path, grid_path: &Path) -> CliResult<(PhiDraws, Vec<String>)> {
    require_file(phi_path)?;
    require_file(grid_path)?;
    let (draws, provenance) = read_draw_file(phi_path, MAGIC_PHI)?;
    let (columns, grid) = read_grid_csv(grid_path)?;
    if hash_matrix(&grid) != provenance.grid_hash {
        return Err(CliError {
            kind: crate::errors::ErrorKind::HashMismatch,
            detail: format!(
                "grid {} does not match the grid recorded in {}",
                grid_path.display(),
                phi_path.display()
            ),
        });
    }
    if grid.nrows() != draws.ncols() {
        return Err(CliError::schema("grid row count does not match phi points"));
    }
    Ok((PhiDraws { grid, draws, provenance }, columns))
}

fn load_spec(path: &Path) -> CliResult<SurveillanceSpec> {
    require_file(path)?;
    let spec: SurveillanceSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    spec.validate().map_err(|e| CliError::schema(e.to_string()))?;
    if !spec.basis.is_fitted() {
        return Err(CliError::schema(format!(
            "spec '{}' has unfitted basis parameters; emit specs via fit-phi --spec-template",
            spec.name
        )));
    }
    Ok(spec)
}

fn write_stage2_outputs(
    out_dir: &Path,
    prefix: &str,
    output: &Stage2Output,
    phi: &PhiDraws,
    format: DrawFormat,
    group_labels: Option<&[String]>,
    manifest: &mut ManifestBuilder,
) -> CliResult<()> {
    let p_path = out_dir.join(format!("{prefix}p.bin"));
    let provenance = Provenance {
        config_hash: output.spec_hash,
        data_hash: output.phi_content_hash,
        grid_hash: phi.provenance.grid_hash,
        seed: phi.provenance.seed,
    };
    write_draw_file(&p_path, MAGIC_P, &output.p_draws, &provenance)?;
    manifest.artifact(&p_path);
    if matches!(format, DrawFormat::Csv | DrawFormat::Both) {
        let csv_path = out_dir.join(format!("{prefix}p.csv"));
        export_draws_csv(&csv_path, &output.p_draws, "p")?;
        manifest.artifact(&csv_path);
    }

    // Pointwise posterior quantiles of p.
    let summary_path = out_dir.join(format!("{prefix}summary.csv"));
    let mut w = csv::Writer::from_path(&summary_path)?;
    w.write_record(["point_index", "q05", "q50", "q95"])?;
    for j in 0..output.p_draws.ncols() {
        let col: Vec<f64> = (0..output.p_draws.nrows()).map(|k| output.p_draws.get(k, j)).collect();
        w.write_record([
            j.to_string(),
            format!("{:.10}", quantile(&col, 0.05)),
            format!("{:.10}", quantile(&col, 0.5)),
            format!("{:.10}", quantile(&col, 0.95)),
        ])?;
    }
    w.flush()?;
    manifest.artifact(&summary_path);

    let prev = prevalence(&output.p_draws, group_labels)?;
    let prev_path = out_dir.join(format!("{prefix}prevalence.csv"));
    let mut w = csv::Writer::from_path(&prev_path)?;
    w.write_record(["draw_index", "alpha", "alpha_count"])?;
    for (row, &kk) in output.kept.iter().enumerate() {
        w.write_record([
            kk.to_string(),
            format!("{:.12}", prev.alpha[row]),
            format!("{:.12}", prev.alpha_count[row]),
        ])?;
    }
    w.flush()?;
    manifest.artifact(&prev_path);
    if !prev.groups.is_empty() {
        let path = out_dir.join(format!("{prefix}prevalence_groups.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["group", "n_points", "q05", "q50", "q95"])?;
        for g in &prev.groups {
            w.write_record([
                g.label.clone(),
                g.n_points.to_string(),
                format!("{:.10}", g.quantiles.0),
                format!("{:.10}", g.quantiles.1),
                format!("{:.10}", g.quantiles.2),
            ])?;
        }
        w.flush()?;
        manifest.artifact(&path);
    }

    if !output.conflicts.is_empty() {
        let path = out_dir.join(format!("{prefix}conflicts.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["draw_index", "detail"])?;
        for ev in &output.conflicts {
            w.write_record([ev.draw.to_string(), ev.detail.clone()])?;
        }
        w.flush()?;
        manifest.artifact(&path);
        eprintln!(
            "modprior: warning: {} phi draw(s) conflicted with the prior for '{}'",
            output.conflicts.len(),
            output.spec_name
        );
    }
    Ok(())
}

fn load_group_labels(path: Option<&Path>) -> CliResult<Option<Vec<String>>> {
    let Some(path) = path else { return Ok(None) };
    require_file(path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        labels.push(rec.get(1).unwrap_or_default().to_string());
    }
    Ok(Some(labels))
}

#[derive(Args)]
pub struct SampleThetaArgs {
    #[command(flatten)]
    out: OutArgs,
    #[arg(long)]
    phi: PathBuf,
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    /// Optional groups.csv from fit-phi for per-group prevalence.
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "binary")]
    format: DrawFormat,
}

pub fn sample_theta(args: SampleThetaArgs) -> CliResult<()> {
    ensure_out_dir(&args.out.out)?;
    let (phi, columns) = load_phi(&args.phi, &args.grid)?;
    let spec = load_spec(&args.spec)?;
    let groups = load_group_labels(args.groups.as_deref())?;
    let h = spec.basis.apply(&phi.grid, &columns)?;
    let opts = Stage2Options { seed: args.out.seed, ..Stage2Options::default() };
    let output = run_stage2(&phi, &spec, &h, &opts)?;

    let mut manifest = ManifestBuilder::new(args.out.seed);
    manifest.config_hash("spec", output.spec_hash);
    manifest.data_hash("phi_content", output.phi_content_hash);
    write_stage2_outputs(
        &args.out.out,
        "",
        &output,
        &phi,
        args.format,
        groups.as_deref(),
        &mut manifest,
    )?;
    manifest.write(&args.out.out)?;
    Ok(())
}

#[derive(Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    out: OutArgs,
    #[arg(long)]
    phi: PathBuf,
    #[arg(long)]
    grid: PathBuf,
    /// JSON array of fitted specs.
    #[arg(long)]
    specs: PathBuf,
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "binary")]
    format: DrawFormat,
    /// Disable common random numbers across specs.
    #[arg(long)]
    independent_streams: bool,
}

pub fn sensitivity(args: SensitivityArgs) -> CliResult<()> {
    ensure_out_dir(&args.out.out)?;
    let (phi, columns) = load_phi(&args.phi, &args.grid)?;
    require_file(&args.specs)?;
    let specs: Vec<SurveillanceSpec> = serde_json::from_str(&std::fs::read_to_string(&args.specs)?)?;
    for spec in &specs {
        spec.validate().map_err(|e| CliError::schema(e.to_string()))?;
        if !spec.basis.is_fitted() {
            return Err(CliError::schema(format!("spec '{}' has unfitted basis", spec.name)));
        }
    }
    let groups = load_group_labels(args.groups.as_deref())?;
    let opts = Stage2Options {
        seed: args.out.seed,
        common_random_numbers: !args.independent_streams,
        spec_index: 0,
    };
    let runs = sensitivity_run(&phi, &specs, &columns, &opts, groups.as_deref())?;

    let mut manifest = ManifestBuilder::new(args.out.seed);
    manifest.data_hash("phi_content", runs[0].output.phi_content_hash);
    let mut index = Vec::with_capacity(runs.len());
    for run in &runs {
        let prefix = format!("{}_", sanitize(&run.output.spec_name));
        write_stage2_outputs(
            &args.out.out,
            &prefix,
            &run.output,
            &phi,
            args.format,
            groups.as_deref(),
            &mut manifest,
        )?;
        manifest.config_hash(&run.output.spec_name, run.output.spec_hash);
        index.push(serde_json::json!({
            "spec": run.output.spec_name,
            "phi_content_hash": format!("{:016x}", run.output.phi_content_hash),
            "kept_draws": run.output.kept.len(),
            "conflicts": run.output.conflicts.len(),
            "alpha_q05": run.prevalence.quantiles.0,
            "alpha_q50": run.prevalence.quantiles.1,
            "alpha_q95": run.prevalence.quantiles.2,
        }));
    }
    let index_path = args.out.out.join("sensitivity.json");
    std::fs::write(&index_path, serde_json::to_string_pretty(&index)?)?;
    manifest.artifact(&index_path);
    manifest.write(&args.out.out)?;
    Ok(())
}

#[derive(Args)]
pub struct CheckArgs {
    #[command(flatten)]
    out: OutArgs,
    #[arg(long)]
    phi: PathBuf,
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    spec: PathBuf,
}

pub fn check(args: CheckArgs) -> CliResult<()> {
    ensure_out_dir(&args.out.out)?;
    let (phi, columns) = load_phi(&args.phi, &args.grid)?;
    let spec = load_spec(&args.spec)?;
    let h = spec.basis.apply(&phi.grid, &columns)?;
    let scores = model_check_residual(&phi, &spec, &h)?;
    let path = args.out.out.join("residuals.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["point_index", "score"])?;
    for (j, s) in scores.iter().enumerate() {
        w.write_record([j.to_string(), format!("{s:.10}")])?;
    }
    w.flush()?;
    let mut manifest = ManifestBuilder::new(args.out.seed);
    manifest.config_hash("spec", spec.hash());
    manifest.artifact(&path);
    manifest.write(&args.out.out)?;
    Ok(())
}

pub fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}
