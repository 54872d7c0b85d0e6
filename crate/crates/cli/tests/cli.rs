//! End-to-end CLI behavior: determinism of artifacts, exit-code contract,
//! stage separation, and the profile slope reversal between surveillance
//! presets.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modprior"))
}

fn run_ok(args: &[&str]) {
    let out = bin().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "command {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn run_expect_code(args: &[&str], code: i32) -> String {
    let out = bin().args(args).output().expect("spawn");
    assert_eq!(
        out.status.code(),
        Some(code),
        "command {:?}: expected exit {code}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stderr).to_string()
}

fn file_hash(path: &Path) -> u64 {
    modprior::util::fnv1a(&std::fs::read(path).unwrap())
}

struct Env {
    #[allow(dead_code)]
    dir: tempfile::TempDir,
    root: PathBuf,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Env { dir, root }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn arg(&self, rel: &str) -> String {
        self.path(rel).display().to_string()
    }

    fn write(&self, rel: &str, content: &str) {
        std::fs::write(self.path(rel), content).unwrap();
    }
}

const SMALL_BART: &str = r#"{"n_trees": 30, "alpha_split": 0.95, "beta_split": 2.0, "k": 2.0,
"n_cutpoints": 25, "n_burn": 80, "n_keep": 60, "thin": 1, "seed": 0}"#;

fn simulate_and_fit(env: &Env) {
    env.write("bart.json", SMALL_BART);
    run_ok(&[
        "simulate",
        "--design",
        "linear",
        "--n",
        "250",
        "--seed",
        "3",
        "--out",
        &env.arg("sim"),
    ]);
    run_ok(&[
        "fit-phi",
        "--data",
        &env.arg("sim/data.csv"),
        "--response",
        "y",
        "--config",
        &env.arg("bart.json"),
        "--seed",
        "5",
        "--out",
        &env.arg("phi"),
    ]);
}

#[test]
fn fit_phi_is_deterministic() {
    let env = Env::new();
    simulate_and_fit(&env);
    run_ok(&[
        "fit-phi",
        "--data",
        &env.arg("sim/data.csv"),
        "--response",
        "y",
        "--config",
        &env.arg("bart.json"),
        "--seed",
        "5",
        "--out",
        &env.arg("phi2"),
    ]);
    assert_eq!(file_hash(&env.path("phi/phi.bin")), file_hash(&env.path("phi2/phi.bin")));
    assert_eq!(file_hash(&env.path("phi/grid.csv")), file_hash(&env.path("phi2/grid.csv")));
    // Manifests record identical artifact hashes even though wall clocks differ.
    let m1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(env.path("phi/manifest.json")).unwrap())
            .unwrap();
    let m2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(env.path("phi2/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m1["artifacts"][0]["hash"], m2["artifacts"][0]["hash"]);
}

#[test]
fn exit_codes_are_distinct() {
    let env = Env::new();
    simulate_and_fit(&env);

    // Missing stage-1 artifact for a stage-2 command: exit 4.
    env.write(
        "spec.json",
        r#"{"name": "s", "link": "probit", "sigma": 0.3, "c0": 0.8,
            "basis": {"vars": [{"var": "x1", "transform": "affine", "min": 0.0, "max": 1.0}], "intercept": false},
            "beta": [1.0]}"#,
    );
    let err = run_expect_code(
        &[
            "sample-theta",
            "--phi",
            &env.arg("nope/phi.bin"),
            "--grid",
            &env.arg("phi/grid.csv"),
            "--spec",
            &env.arg("spec.json"),
            "--out",
            &env.arg("t1"),
        ],
        4,
    );
    assert!(err.contains("kind=missing_artifact"), "{err}");

    // Hash mismatch between phi artifact and a doctored grid: exit 3.
    let grid = std::fs::read_to_string(env.path("phi/grid.csv")).unwrap();
    let mut lines: Vec<&str> = grid.lines().collect();
    let doctored_line = lines[1].replace(['1', '2'], "3");
    lines[1] = &doctored_line;
    env.write("grid_bad.csv", &(lines.join("\n") + "\n"));
    let err = run_expect_code(
        &[
            "sample-theta",
            "--phi",
            &env.arg("phi/phi.bin"),
            "--grid",
            &env.arg("grid_bad.csv"),
            "--spec",
            &env.arg("spec.json"),
            "--out",
            &env.arg("t2"),
        ],
        3,
    );
    assert!(err.contains("kind=hash_mismatch"), "{err}");

    // Schema violation (unknown field in the spec JSON): exit 2.
    env.write(
        "spec_bad.json",
        r#"{"name": "s", "link": "probit", "sigma": 0.3, "c0": 0.8, "typo_field": 1,
            "basis": {"vars": [], "intercept": true}, "beta": [0.0]}"#,
    );
    let err = run_expect_code(
        &[
            "sample-theta",
            "--phi",
            &env.arg("phi/phi.bin"),
            "--grid",
            &env.arg("phi/grid.csv"),
            "--spec",
            &env.arg("spec_bad.json"),
            "--out",
            &env.arg("t3"),
        ],
        2,
    );
    assert!(err.contains("kind=schema_violation"), "{err}");
}

#[test]
fn sensitivity_consumes_one_phi_artifact() {
    let env = Env::new();
    simulate_and_fit(&env);
    env.write(
        "specs.json",
        r#"[
          {"name": "a", "link": "probit", "sigma": 0.25, "c0": 0.8,
           "basis": {"vars": [{"var": "x1", "transform": "affine", "min": -2.0, "max": 2.0}], "intercept": true},
           "beta": [0.2, 0.5]},
          {"name": "b", "link": "probit", "sigma": 0.5, "c0": 0.4,
           "basis": {"vars": [{"var": "x1", "transform": "affine", "min": -2.0, "max": 2.0}], "intercept": true},
           "beta": [0.2, 0.5]},
          {"name": "a_dup", "link": "probit", "sigma": 0.25, "c0": 0.8,
           "basis": {"vars": [{"var": "x1", "transform": "affine", "min": -2.0, "max": 2.0}], "intercept": true},
           "beta": [0.2, 0.5]}
        ]"#,
    );
    run_ok(&[
        "sensitivity",
        "--phi",
        &env.arg("phi/phi.bin"),
        "--grid",
        &env.arg("phi/grid.csv"),
        "--specs",
        &env.arg("specs.json"),
        "--seed",
        "9",
        "--out",
        &env.arg("sens"),
    ]);
    let index: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(env.path("sens/sensitivity.json")).unwrap())
            .unwrap();
    let hashes: Vec<&str> =
        index.as_array().unwrap().iter().map(|e| e["phi_content_hash"].as_str().unwrap()).collect();
    assert_eq!(hashes.len(), 3);
    assert!(hashes.iter().all(|h| h == &hashes[0]), "phi hashes differ: {hashes:?}");
    // Identical specs under different names produce identical draws and
    // summaries (the binary headers differ by the recorded spec hash only).
    let (pa, _) =
        modprior::drawfile::read_draw_file(&env.path("sens/a_p.bin"), modprior::drawfile::MAGIC_P)
            .unwrap();
    let (pd, _) = modprior::drawfile::read_draw_file(
        &env.path("sens/a_dup_p.bin"),
        modprior::drawfile::MAGIC_P,
    )
    .unwrap();
    assert_eq!(pa, pd);
    assert_eq!(
        file_hash(&env.path("sens/a_summary.csv")),
        file_hash(&env.path("sens/a_dup_summary.csv"))
    );
    assert_eq!(
        file_hash(&env.path("sens/a_prevalence.csv")),
        file_hash(&env.path("sens/a_dup_prevalence.csv"))
    );
}

/// The cash/net-income slope reversal between surveillance presets: with a
/// flat identified component, a positive surveillance slope turns into a
/// falling cheating-probability profile and vice versa.
#[test]
fn profile_band_direction_flips_between_presets() {
    let env = Env::new();
    // Misconduct-shaped synthetic data with the preset covariate names.
    let stream = modprior::rng::RngStream::new(77, 0);
    let mut rows = String::from("fiscal_year,ft_hits,cash,net_income,qui_tam,y\n");
    let mut counter = 0u64;
    let mut next = || {
        let u = stream.uniform_at(counter);
        counter += 1;
        u
    };
    for _ in 0..400 {
        let fy = 2004.0 + (next() * 7.0).floor();
        let hits = (3.0 * next()).exp() - 1.0;
        let cash = 0.6 * next();
        let income = (2.0 * next() - 3.0_f64).exp();
        let qt = f64::from(next() < 0.2);
        // The response does not depend on net income at all.
        let p = 0.04 + 0.08 * qt + 0.04 * cash;
        let y = u8::from(next() < p);
        rows.push_str(&format!("{fy},{hits:.6},{cash:.6},{income:.6},{qt},{y}\n"));
    }
    env.write("data.csv", &rows);
    env.write("bart.json", SMALL_BART);

    // Preset templates with unfitted bases; fit-phi fits and calibrates them.
    let presets = serde_json::json!([
        serde_json::from_str::<serde_json::Value>(
            &serde_json::to_string(&modprior::modular::SurveillanceSpec::model_a(0.25, 0.8)).unwrap()
        ).unwrap(),
        serde_json::from_str::<serde_json::Value>(
            &serde_json::to_string(&modprior::modular::SurveillanceSpec::model_b(0.25, 0.8)).unwrap()
        ).unwrap(),
    ]);
    env.write("presets.json", &presets.to_string());

    run_ok(&[
        "fit-phi",
        "--data",
        &env.arg("data.csv"),
        "--response",
        "y",
        "--config",
        &env.arg("bart.json"),
        "--seed",
        "4",
        "--profile-vary",
        "net_income",
        "--profile-row",
        "0",
        "--profile-points",
        "30",
        "--spec-template",
        &env.arg("presets.json"),
        "--calibrate",
        "0.3",
        "--out",
        &env.arg("phi"),
    ]);

    let specs: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(env.path("phi/specs.json")).unwrap())
            .unwrap();
    for (i, name) in ["spec_a.json", "spec_b.json"].iter().enumerate() {
        env.write(name, &specs[i].to_string());
    }
    for (spec, out) in [("spec_a.json", "theta_a"), ("spec_b.json", "theta_b")] {
        run_ok(&[
            "sample-theta",
            "--phi",
            &env.arg("phi/phi.bin"),
            "--grid",
            &env.arg("phi/grid.csv"),
            "--spec",
            &env.arg(spec),
            "--seed",
            "6",
            "--out",
            &env.arg(out),
        ]);
        run_ok(&[
            "report",
            "profile",
            "--summary",
            &env.arg(&format!("{out}/summary.csv")),
            "--grid",
            &env.arg("phi/grid.csv"),
            "--vary",
            "net_income",
            "--out",
            &env.arg(&format!("{out}/profile.svg")),
        ]);
        let svg = std::fs::read_to_string(env.path(&format!("{out}/profile.svg"))).unwrap();
        assert!(svg.contains("<!-- source:"), "missing provenance comment");
        assert!(svg.contains("<polygon"), "missing band polygon");
    }

    // Slope of the median band over the profile: model A has no income
    // coefficient, model B's positive coefficient pushes p down with income.
    let slope = |out: &str| -> f64 {
        let mut rdr = csv::Reader::from_path(env.path(&format!("{out}/summary.csv"))).unwrap();
        let q50: Vec<f64> =
            rdr.records().map(|r| r.unwrap().get(2).unwrap().parse().unwrap()).collect();
        q50.last().unwrap() - q50.first().unwrap()
    };
    let (slope_a, slope_b) = (slope("theta_a"), slope("theta_b"));
    assert!(
        slope_b < 0.0 && slope_b < slope_a,
        "expected reversal: slope_a = {slope_a:.5}, slope_b = {slope_b:.5}"
    );
}

#[test]
fn strata_pipeline_runs_end_to_end() {
    let env = Env::new();
    env.write("bart.json", SMALL_BART);
    run_ok(&[
        "strata",
        "simulate",
        "--n",
        "500",
        "--seed",
        "2",
        "--n-age",
        "4",
        "--out",
        &env.arg("trial"),
    ]);
    run_ok(&[
        "strata",
        "fit",
        "--data",
        &env.arg("trial/trial.csv"),
        "--grid",
        &env.arg("trial/grid.csv"),
        "--config",
        &env.arg("bart.json"),
        "--seed",
        "6",
        "--out",
        &env.arg("basis"),
    ]);
    for prior in ["centered:0.1", "centered:0.25", "informed"] {
        let out = format!("itt_{}", prior.replace([':', '.'], "_"));
        run_ok(&[
            "strata",
            "itt",
            "--data",
            &env.arg("trial/trial.csv"),
            "--basis",
            &env.arg("basis/basis.bin"),
            "--prior",
            prior,
            "--seed",
            "8",
            "--out",
            &env.arg(&out),
        ]);
        let itt = std::fs::read_to_string(env.path(&format!("{out}/itt.csv"))).unwrap();
        assert!(itt.lines().count() == 4, "{itt}");
        assert!(itt.contains("complier"));
    }
    let bad = run_expect_code(
        &[
            "strata",
            "itt",
            "--data",
            &env.arg("trial/trial.csv"),
            "--basis",
            &env.arg("basis/basis.bin"),
            "--prior",
            "bogus",
            "--seed",
            "8",
            "--out",
            &env.arg("itt_bad"),
        ],
        2,
    );
    assert!(bad.contains("kind=schema_violation"));
}

#[test]
fn report_prevalence_renders_boxes() {
    let env = Env::new();
    env.write(
        "prev_a.csv",
        "draw_index,alpha,alpha_count\n0,0.01,5\n1,0.02,10\n2,0.015,7.5\n3,0.03,15\n",
    );
    env.write(
        "prev_b.csv",
        "draw_index,alpha,alpha_count\n0,0.02,10\n1,0.04,20\n2,0.025,12.5\n3,0.05,25\n",
    );
    run_ok(&[
        "report",
        "prevalence",
        "--inputs",
        &env.arg("prev_a.csv"),
        &env.arg("prev_b.csv"),
        "--out",
        &env.arg("prev.svg"),
    ]);
    let svg = std::fs::read_to_string(env.path("prev.svg")).unwrap();
    assert!(svg.contains("<rect") && svg.contains("<!-- source:"));
}
