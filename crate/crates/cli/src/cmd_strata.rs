//! Encouragement-design commands: trial simulation, identified-basis
//! fitting, and per-stratum ITT posteriors.

use std::path::PathBuf;

use clap::{Args, Subcommand};

use modprior::bart::BartConfig;
use modprior::strata::{
    fit_strata, read_basis_file, simulate_trial, strata_itt, write_basis_file, DirectEffectPrior,
    ObsRecord, TrialConfig,
};
use modprior::util::Matrix;

use crate::errors::{require_file, CliError, CliResult};
use crate::manifest::ManifestBuilder;
use crate::{ensure_out_dir, OutArgs};

#[derive(Subcommand)]
pub enum StrataCommand {
    /// Generate a synthetic encouragement trial with known truth.
    Simulate {
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        n_age: usize,
        /// True direct effect for always-takers (log odds).
        #[arg(long, default_value_t = 0.0)]
        b_a: f64,
        /// True direct effect for never-takers (log odds).
        #[arg(long, default_value_t = 0.0)]
        b_n: f64,
    },
    /// Fit the treatment and outcome models; store identified-basis draws.
    Fit {
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Impute strata and potential outcomes; summarize per-stratum ITT.
    Itt(IttArgs),
}

#[derive(Args)]
pub struct IttArgs {
    #[command(flatten)]
    out: OutArgs,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    basis: PathBuf,
    /// Direct-effect prior: `centered:<sigma>` or `informed`.
    #[arg(long)]
    prior: String,
}

pub fn run(cmd: StrataCommand) -> CliResult<()> {
    match cmd {
        StrataCommand::Simulate { out, n, n_age, b_a, b_n } => simulate(out, n, n_age, b_a, b_n),
        StrataCommand::Fit { out, data, grid, config } => fit(out, data, grid, config),
        StrataCommand::Itt(args) => itt(args),
    }
}

fn trial_columns() -> Vec<String> {
    vec!["age".into(), "comorbid".into()]
}

fn simulate(out: OutArgs, n: usize, n_age: usize, b_a: f64, b_n: f64) -> CliResult<()> {
    ensure_out_dir(&out.out)?;
    let trial = simulate_trial(&TrialConfig { n, seed: out.seed, n_age, b_a, b_n })?;

    let data_path = out.out.join("trial.csv");
    let mut w = csv::Writer::from_path(&data_path)?;
    w.write_record(["age", "comorbid", "z", "t", "y"])?;
    for r in &trial.records {
        w.write_record([
            format!("{:.17e}", r.x[0]),
            format!("{:.17e}", r.x[1]),
            r.z.to_string(),
            r.t.to_string(),
            r.y.to_string(),
        ])?;
    }
    w.flush()?;

    let grid_path = out.out.join("grid.csv");
    modprior::dataset::write_grid_csv(&grid_path, &trial_columns(), &trial.grid)?;

    let truth_path = out.out.join("truth.json");
    std::fs::write(
        &truth_path,
        serde_json::to_string_pretty(&serde_json::json!({
            "true_itt_c": trial.true_itt_c,
            "b_a": b_a,
            "b_n": b_n,
        }))?,
    )?;

    let mut manifest = ManifestBuilder::new(out.seed);
    manifest.artifact(&data_path);
    manifest.artifact(&grid_path);
    manifest.artifact(&truth_path);
    manifest.write(&out.out)?;
    Ok(())
}

fn load_trial(path: &std::path::Path) -> CliResult<Vec<ObsRecord>> {
    require_file(path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> CliResult<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::schema(format!("trial CSV lacks column '{name}'")))
    };
    let (zi, ti, yi) = (find("z")?, find("t")?, find("y")?);
    let covs: Vec<usize> = (0..headers.len()).filter(|i| ![zi, ti, yi].contains(i)).collect();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let bin = |i: usize| -> CliResult<u8> {
            match rec.get(i).map(str::trim) {
                Some("0") => Ok(0),
                Some("1") => Ok(1),
                other => Err(CliError::schema(format!("expected 0/1, got {other:?}"))),
            }
        };
        let x: Vec<f64> = covs
            .iter()
            .map(|&i| {
                rec.get(i)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| CliError::schema("non-numeric covariate in trial CSV"))
            })
            .collect::<CliResult<_>>()?;
        records.push(ObsRecord { z: bin(zi)?, t: bin(ti)?, y: bin(yi)?, x });
    }
    if records.is_empty() {
        return Err(CliError::schema("trial CSV has no rows"));
    }
    Ok(records)
}

fn fit(out: OutArgs, data: PathBuf, grid: PathBuf, config: Option<PathBuf>) -> CliResult<()> {
    ensure_out_dir(&out.out)?;
    let records = load_trial(&data)?;
    require_file(&grid)?;
    let (_, grid_m): (Vec<String>, Matrix) = modprior::dataset::read_grid_csv(&grid)?;
    let cfg: BartConfig = match &config {
        Some(p) => {
            require_file(p)?;
            serde_json::from_str(&std::fs::read_to_string(p)?)?
        }
        None => BartConfig::default(),
    };
    let basis = fit_strata(&records, &grid_m, &cfg, out.seed)?;
    for w in &basis.warnings {
        eprintln!("modprior: warning: {w}");
    }
    eprintln!("modprior: monotonicity rejection rate {:.4}", basis.rejection_rate);

    let basis_path = out.out.join("basis.bin");
    write_basis_file(&basis_path, &basis)?;
    let mut manifest = ManifestBuilder::new(out.seed);
    manifest.config_hash("bart", cfg.hash());
    manifest.artifact(&basis_path);
    manifest.write(&out.out)?;
    Ok(())
}

fn parse_prior(s: &str) -> CliResult<DirectEffectPrior> {
    if s == "informed" {
        return Ok(DirectEffectPrior::informed());
    }
    if let Some(sigma) = s.strip_prefix("centered:") {
        let sigma: f64 =
            sigma.parse().map_err(|_| CliError::schema(format!("bad prior scale '{sigma}'")))?;
        if sigma < 0.0 {
            return Err(CliError::schema("prior scale must be nonnegative"));
        }
        return Ok(DirectEffectPrior::centered(sigma));
    }
    Err(CliError::schema(format!(
        "unknown prior '{s}'; expected centered:<sigma> or informed"
    )))
}

fn itt(args: IttArgs) -> CliResult<()> {
    ensure_out_dir(&args.out.out)?;
    let records = load_trial(&args.data)?;
    require_file(&args.basis)?;
    let basis = read_basis_file(&args.basis)?;
    let prior = parse_prior(&args.prior)?;
    let post = strata_itt(&records, &basis, &prior, args.out.seed)?;

    let path = args.out.out.join("itt.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["stratum", "posterior_mean", "posterior_sd", "n_draws"])?;
    type SummaryRow<'a> = (&'a str, Option<(f64, f64, usize)>);
    let rows: [SummaryRow; 3] = [
        ("complier", post.summary(|e| e.itt_c)),
        ("never_taker", post.summary(|e| e.itt_n)),
        ("always_taker", post.summary(|e| e.itt_a)),
    ];
    for (name, summary) in rows {
        match summary {
            Some((mean, sd, n)) => {
                w.write_record([name, &format!("{mean:.8}"), &format!("{sd:.8}"), &n.to_string()])?
            }
            None => w.write_record([name, "absent", "absent", "0"])?,
        }
    }
    w.flush()?;

    let stats_path = args.out.out.join("itt_stats.json");
    std::fs::write(
        &stats_path,
        serde_json::to_string_pretty(&serde_json::json!({
            "prior": args.prior,
            "draws_used": post.draws_used,
            "support_rejections": post.support_rejections,
        }))?,
    )?;

    let mut manifest = ManifestBuilder::new(args.out.seed);
    manifest.artifact(&path);
    manifest.artifact(&stats_path);
    manifest.write(&args.out.out)?;
    Ok(())
}
