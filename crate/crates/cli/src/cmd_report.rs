//! Figure rendering from summary CSVs.

use std::path::PathBuf;

use clap::{Args, Subcommand};

use modprior::util::quantile;

use crate::errors::{require_file, CliError, CliResult};
use crate::manifest::ManifestBuilder;
use crate::svg::SvgCanvas;

#[derive(Subcommand)]
pub enum ReportCommand {
    /// Quantile boxes of posterior prevalence, one box per input CSV.
    Prevalence(PrevalenceArgs),
    /// Median line and 90% band of p over a varying covariate.
    Profile(ProfileArgs),
}

#[derive(Args)]
pub struct PrevalenceArgs {
    /// Per-spec prevalence CSVs (draw_index, alpha, alpha_count).
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct ProfileArgs {
    /// Pointwise summary CSV (point_index, q05, q50, q95).
    #[arg(long)]
    summary: PathBuf,
    /// Grid CSV the summary points refer to.
    #[arg(long)]
    grid: PathBuf,
    /// Covariate to place on the horizontal axis.
    #[arg(long)]
    vary: String,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(cmd: ReportCommand) -> CliResult<()> {
    match cmd {
        ReportCommand::Prevalence(args) => prevalence(args),
        ReportCommand::Profile(args) => profile(args),
    }
}

fn read_column(path: &std::path::Path, name: &str) -> CliResult<Vec<f64>> {
    require_file(path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::schema(format!("{} lacks column '{name}'", path.display())))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(
            rec.get(idx)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| CliError::schema(format!("bad value in {}", path.display())))?,
        );
    }
    if out.is_empty() {
        return Err(CliError::schema(format!("{} has no rows", path.display())));
    }
    Ok(out)
}

fn prevalence(args: PrevalenceArgs) -> CliResult<()> {
    let mut labels = Vec::new();
    let mut boxes = Vec::new();
    let mut y_max: f64 = 0.0;
    for path in &args.inputs {
        let alphas = read_column(path, "alpha")?;
        let qs = [
            quantile(&alphas, 0.05),
            quantile(&alphas, 0.25),
            quantile(&alphas, 0.5),
            quantile(&alphas, 0.75),
            quantile(&alphas, 0.95),
        ];
        y_max = y_max.max(qs[4]);
        labels.push(
            path.file_stem()
                .map(|s| s.to_string_lossy().replace("_prevalence", ""))
                .unwrap_or_default(),
        );
        boxes.push(qs);
    }
    let y_max = (y_max * 1.15).max(1e-12);
    let provenance: Vec<String> = args.inputs.iter().map(|p| p.display().to_string()).collect();
    let mut canvas = SvgCanvas::new(
        (140 * labels.len() + 160) as f64,
        420.0,
        &provenance.join(" "),
    );
    canvas.axes("prior setting", "posterior prevalence", 0.0, y_max);
    canvas.quantile_boxes(&labels, &boxes, y_max);
    std::fs::write(&args.out, canvas.finish())?;
    let mut manifest = ManifestBuilder::new(0);
    manifest.artifact(&args.out);
    manifest.write_to(&args.out.with_extension("manifest.json"))?;
    Ok(())
}

fn profile(args: ProfileArgs) -> CliResult<()> {
    let lo = read_column(&args.summary, "q05")?;
    let mid = read_column(&args.summary, "q50")?;
    let hi = read_column(&args.summary, "q95")?;
    require_file(&args.grid)?;
    let (columns, grid) = modprior::dataset::read_grid_csv(&args.grid)?;
    let vidx = columns
        .iter()
        .position(|c| c == &args.vary)
        .ok_or_else(|| CliError::schema(format!("grid lacks column '{}'", args.vary)))?;
    if grid.nrows() != mid.len() {
        return Err(CliError::schema("summary and grid row counts differ"));
    }
    let x = grid.column(vidx);
    // Order by the varying covariate.
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let los: Vec<f64> = order.iter().map(|&i| lo[i]).collect();
    let mids: Vec<f64> = order.iter().map(|&i| mid[i]).collect();
    let his: Vec<f64> = order.iter().map(|&i| hi[i]).collect();
    let y_max = his.iter().cloned().fold(0.0f64, f64::max).max(1e-12) * 1.15;

    let mut canvas = SvgCanvas::new(
        640.0,
        420.0,
        &format!("summary={} grid={} vary={}", args.summary.display(), args.grid.display(), args.vary),
    );
    canvas.axes(&args.vary, "Pr(event | x)", 0.0, y_max);
    canvas.profile_band(&xs, &los, &mids, &his, y_max);
    std::fs::write(&args.out, canvas.finish())?;
    let mut manifest = ManifestBuilder::new(0);
    manifest.artifact(&args.out);
    manifest.write_to(&args.out.with_extension("manifest.json"))?;
    Ok(())
}
