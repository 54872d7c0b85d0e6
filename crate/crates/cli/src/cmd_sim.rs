//! Simulation, comparator fitting, and comparison commands.

use std::path::PathBuf;

use clap::Args;

use modprior::biprobit::{
    evaluate_comparison, gibbs_fit, posterior_cheat_prob, simulate as simulate_design,
    BiprobitDraws, BiprobitParams, DesignKind, GibbsConfig, SimDesign,
};
use modprior::dataset::load_csv;
use modprior::drawfile::{read_draw_file, MAGIC_P};
use modprior::rng::RngStream;
use modprior::util::fnv1a;

use crate::errors::{require_file, CliError, CliResult};
use crate::manifest::ManifestBuilder;
use crate::svg::SvgCanvas;
use crate::{ensure_out_dir, OutArgs};

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DesignArg {
    Linear,
    Sine,
}

pub fn simulate(
    out: OutArgs,
    design: DesignArg,
    n: usize,
    params_path: Option<PathBuf>,
) -> CliResult<()> {
    ensure_out_dir(&out.out)?;
    let params: BiprobitParams = match &params_path {
        Some(p) => {
            require_file(p)?;
            serde_json::from_str(&std::fs::read_to_string(p)?)?
        }
        None => BiprobitParams::reference(),
    };
    let kind = match design {
        DesignArg::Linear => DesignKind::Linear,
        DesignArg::Sine => DesignKind::Sine,
    };
    let sim = simulate_design(&SimDesign { kind, n }, &params, &RngStream::new(out.seed, 0))?;

    let data_path = out.out.join("data.csv");
    let mut w = csv::Writer::from_path(&data_path)?;
    w.write_record(["x1", "x2", "x3", "y"])?;
    for i in 0..n {
        let r = sim.x.row(i);
        w.write_record([
            format!("{:.17e}", r[0]),
            format!("{:.17e}", r[1]),
            format!("{:.17e}", r[2]),
            sim.y[i].to_string(),
        ])?;
    }
    w.flush()?;

    let truth_path = out.out.join("truth.csv");
    let mut w = csv::Writer::from_path(&truth_path)?;
    w.write_record(["z", "w", "p_true", "theta_true", "phi_true"])?;
    for t in &sim.truth {
        w.write_record([
            t.z.to_string(),
            t.w.to_string(),
            format!("{:.17e}", t.p_true),
            format!("{:.17e}", t.theta_true),
            format!("{:.17e}", t.phi_true),
        ])?;
    }
    w.flush()?;

    let mut manifest = ManifestBuilder::new(out.seed);
    manifest.config_hash("params", fnv1a(serde_json::to_string(&params)?.as_bytes()));
    manifest.artifact(&data_path);
    manifest.artifact(&truth_path);
    manifest.write(&out.out)?;
    Ok(())
}

fn parse_vars(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| t.trim().parse::<usize>().map_err(|_| CliError::schema(format!("bad index '{t}'"))))
        .collect()
}

#[derive(Args)]
pub struct FitBiprobitArgs {
    #[command(flatten)]
    out: OutArgs,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    /// Comma-separated covariate indices entering the cheat equation.
    #[arg(long, default_value = "0,1")]
    cheat_vars: String,
    /// Comma-separated covariate indices entering the catch equation.
    #[arg(long, default_value = "0,2")]
    catch_vars: String,
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    #[arg(long, default_value_t = 1000)]
    burn: usize,
}

pub fn fit_biprobit(args: FitBiprobitArgs) -> CliResult<()> {
    ensure_out_dir(&args.out.out)?;
    require_file(&args.data)?;
    let data = load_csv(&args.data, &args.response, None)?;
    let cheat = parse_vars(&args.cheat_vars)?;
    let catch = parse_vars(&args.catch_vars)?;
    let cfg = GibbsConfig {
        n_iter: args.iters,
        n_burn: args.burn,
        seed: args.out.seed,
        ..GibbsConfig::default()
    };
    let fit = gibbs_fit(&data.x, &data.y, &cheat, &catch, &cfg)?;

    let draws_path = args.out.out.join("biprobit_draws.csv");
    write_draws_csv(&draws_path, &fit)?;
    let summary_path = args.out.out.join("biprobit_summary.csv");
    let mut w = csv::Writer::from_path(&summary_path)?;
    w.write_record(["parameter", "mean", "sd"])?;
    for (name, mean, sd) in fit.summary() {
        w.write_record([name, format!("{mean:.8}"), format!("{sd:.8}")])?;
    }
    w.flush()?;

    let mut manifest = ManifestBuilder::new(args.out.seed);
    manifest.artifact(&draws_path);
    manifest.artifact(&summary_path);
    manifest.write(&args.out.out)?;
    eprintln!("modprior: rho acceptance rate {:.3}", fit.rho_accept_rate);
    Ok(())
}

fn write_draws_csv(path: &std::path::Path, fit: &BiprobitDraws) -> CliResult<()> {
    let p = fit.draws[0].gamma.len();
    let mut header = vec!["gamma0".to_string()];
    header.extend((0..p).map(|i| format!("gamma{}", i + 1)));
    header.push("beta0".to_string());
    header.extend((0..p).map(|i| format!("beta{}", i + 1)));
    header.push("rho".to_string());
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for d in &fit.draws {
        let mut row = vec![format!("{:.12}", d.gamma0)];
        row.extend(d.gamma.iter().map(|v| format!("{v:.12}")));
        row.push(format!("{:.12}", d.beta0));
        row.extend(d.beta.iter().map(|v| format!("{v:.12}")));
        row.push(format!("{:.12}", d.rho));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_draws_csv(path: &std::path::Path) -> CliResult<BiprobitDraws> {
    require_file(path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let p = headers.iter().filter(|h| h.starts_with("gamma") && *h != "gamma0").count();
    let mut draws = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| -> CliResult<f64> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::schema("bad numeric field in draws CSV"))
        };
        let gamma0 = get(0)?;
        let gamma: Vec<f64> = (0..p).map(|i| get(1 + i)).collect::<CliResult<_>>()?;
        let beta0 = get(1 + p)?;
        let beta: Vec<f64> = (0..p).map(|i| get(2 + p + i)).collect::<CliResult<_>>()?;
        let rho = get(2 + 2 * p)?;
        draws.push(BiprobitParams { gamma0, gamma, beta0, beta, rho });
    }
    if draws.is_empty() {
        return Err(CliError::schema("draws CSV has no rows"));
    }
    Ok(BiprobitDraws { draws, rho_accept_rate: f64::NAN })
}

#[derive(Args)]
pub struct CompareArgs {
    #[command(flatten)]
    out: OutArgs,
    /// Simulation truth sidecar CSV.
    #[arg(long)]
    truth: PathBuf,
    /// Covariate data the estimates refer to (row-aligned with truth).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    /// Comparator parameter draws CSV.
    #[arg(long)]
    biprobit_draws: PathBuf,
    /// Modular p-draw artifact over the same points.
    #[arg(long)]
    p_draws: PathBuf,
}

pub fn compare(args: CompareArgs) -> CliResult<()> {
    ensure_out_dir(&args.out.out)?;
    require_file(&args.truth)?;
    require_file(&args.p_draws)?;
    let data = load_csv(&args.data, &args.response, None)?;
    let p_true = read_truth_column(&args.truth, "p_true")?;
    if p_true.len() != data.n_rows() {
        return Err(CliError::schema("truth and data row counts differ"));
    }
    let bi = read_draws_csv(&args.biprobit_draws)?;
    let bi_mean = posterior_cheat_prob(&bi, &data.x);
    let (p_draws, _) = read_draw_file(&args.p_draws, MAGIC_P)?;
    let cmp = evaluate_comparison(&p_true, &bi_mean, &p_draws)?;

    let scatter_path = args.out.out.join("scatter.csv");
    let mut w = csv::Writer::from_path(&scatter_path)?;
    w.write_record(["point_index", "true_probit", "modular_probit", "biprobit_probit"])?;
    for (i, pt) in cmp.points.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format!("{:.8}", pt.true_probit),
            format!("{:.8}", pt.modular_probit),
            format!("{:.8}", pt.biprobit_probit),
        ])?;
    }
    w.flush()?;

    let summary_path = args.out.out.join("comparison.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&serde_json::json!({
            "rmse_modular": cmp.rmse_modular,
            "rmse_biprobit": cmp.rmse_biprobit,
            "modular_coverage90": cmp.modular_coverage90,
            "n_points": cmp.points.len(),
        }))?,
    )?;

    let svg_path = args.out.out.join("comparison.svg");
    let truth_probit: Vec<f64> = cmp.points.iter().map(|p| p.true_probit).collect();
    let modular: Vec<f64> = cmp.points.iter().map(|p| p.modular_probit).collect();
    let biprobit: Vec<f64> = cmp.points.iter().map(|p| p.biprobit_probit).collect();
    let lo = truth_probit.iter().chain(&modular).chain(&biprobit).cloned().fold(f64::INFINITY, f64::min);
    let hi = truth_probit.iter().chain(&modular).chain(&biprobit).cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut canvas = SvgCanvas::new(
        560.0,
        560.0,
        &format!("truth={} p_draws={}", args.truth.display(), args.p_draws.display()),
    );
    canvas.axes("true probit", "estimated probit", lo, hi);
    canvas.comparison_scatter(&truth_probit, &modular, &biprobit, (lo, hi));
    std::fs::write(&svg_path, canvas.finish())?;

    let mut manifest = ManifestBuilder::new(args.out.seed);
    manifest.artifact(&scatter_path);
    manifest.artifact(&summary_path);
    manifest.artifact(&svg_path);
    manifest.write(&args.out.out)?;
    println!(
        "rmse_modular={:.6} rmse_biprobit={:.6} coverage90={:.4}",
        cmp.rmse_modular, cmp.rmse_biprobit, cmp.modular_coverage90
    );
    Ok(())
}

fn read_truth_column(path: &std::path::Path, column: &str) -> CliResult<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| CliError::schema(format!("column '{column}' not in {}", path.display())))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(
            rec.get(idx)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::schema("bad numeric truth value"))?,
        );
    }
    Ok(out)
}
