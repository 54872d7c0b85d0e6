//! Synthetic encouragement-trial generator over an age-by-comorbidity grid,
//! with known strata and potential-outcome probabilities.

use super::impute::Stratum;
use super::{ObsRecord, StrataModel};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::util::Matrix;

#[derive(Debug, Clone, Copy)]
pub struct TrialConfig {
    pub n: usize,
    pub seed: u64,
    /// Number of distinct age levels on the unit interval.
    pub n_age: usize,
    /// True direct effects on the log-odds scale; zero means the exclusion
    /// restrictions hold in truth.
    pub b_a: f64,
    pub b_n: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig { n: 5000, seed: 0, n_age: 10, b_a: 0.0, b_n: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct TrialData {
    pub records: Vec<ObsRecord>,
    /// Unique covariate combinations (age level, comorbidity).
    pub grid: Matrix,
    /// The true model on the grid.
    pub truth: StrataModel,
    /// Population complier effect, complier-weighted over the covariate law.
    pub true_itt_c: f64,
}

fn expit(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

const P_COMORBID: f64 = 0.3;

/// Truth at one covariate point. Compliance shifts sharply with age;
/// outcomes worsen with age and comorbidity; the treatment helps compliers.
fn truth_at(age: f64, com: f64, b_a: f64, b_n: f64) -> ([f64; 3], [f64; 6]) {
    let bump = expit((age - 0.65) * 12.0);
    let pi_a = 0.15 + 0.35 * bump;
    let pi_n = (0.55 - 0.30 * bump - 0.10 * com).max(0.05);
    let pi_c = 1.0 - (pi_a + pi_n);

    let gamma_c00 = expit(2.2 - 0.8 * age - 0.9 * com);
    let gamma_c11 = expit(2.2 - 0.8 * age - 0.9 * com + 0.45);
    let gamma_n00 = expit(1.8 - 1.0 * age - 1.0 * com);
    let gamma_n01 = if b_n == 0.0 { gamma_n00 } else { expit(logit(gamma_n00) + b_n) };
    let gamma_a10 = expit(2.0 - 0.5 * age - 0.8 * com);
    let gamma_a11 = if b_a == 0.0 { gamma_a10 } else { expit(logit(gamma_a10) + b_a) };
    ([pi_a, pi_c, pi_n], [gamma_a10, gamma_a11, gamma_n00, gamma_n01, gamma_c00, gamma_c11])
}

pub fn simulate_trial(config: &TrialConfig) -> Result<TrialData> {
    if config.n == 0 || config.n_age == 0 {
        return Err(Error::invalid("trial size and age grid must be positive"));
    }
    let ages: Vec<f64> =
        (0..config.n_age).map(|i| (i as f64 + 0.5) / config.n_age as f64).collect();

    // Grid rows: age-major, comorbidity minor.
    let mut grid_rows = Vec::with_capacity(config.n_age * 2);
    let mut truth = StrataModel {
        grid: Matrix::zeros(0, 0),
        pi_a: Vec::new(),
        pi_c: Vec::new(),
        pi_n: Vec::new(),
        gamma_a10: Vec::new(),
        gamma_a11: Vec::new(),
        gamma_n00: Vec::new(),
        gamma_n01: Vec::new(),
        gamma_c00: Vec::new(),
        gamma_c11: Vec::new(),
    };
    let mut itt_num = 0.0;
    let mut itt_den = 0.0;
    for &age in &ages {
        for com in [0.0, 1.0] {
            let ([pi_a, pi_c, pi_n], [a10, a11, n00, n01, c00, c11]) =
                truth_at(age, com, config.b_a, config.b_n);
            grid_rows.push(vec![age, com]);
            truth.pi_a.push(pi_a);
            truth.pi_c.push(pi_c);
            truth.pi_n.push(pi_n);
            truth.gamma_a10.push(a10);
            truth.gamma_a11.push(a11);
            truth.gamma_n00.push(n00);
            truth.gamma_n01.push(n01);
            truth.gamma_c00.push(c00);
            truth.gamma_c11.push(c11);
            let w = (1.0 / config.n_age as f64)
                * if com == 1.0 { P_COMORBID } else { 1.0 - P_COMORBID };
            itt_num += w * pi_c * (c11 - c00);
            itt_den += w * pi_c;
        }
    }
    truth.grid = Matrix::from_rows(&grid_rows);

    let stream = RngStream::new(config.seed, 0x7472_6961);
    let mut rng = stream.seq();
    let mut records = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let age = ages[rng.index(config.n_age)];
        let com = f64::from(rng.uniform() < P_COMORBID);
        let ([pi_a, pi_c, _], [a10, a11, n00, n01, c00, c11]) =
            truth_at(age, com, config.b_a, config.b_n);
        let z = u8::from(rng.uniform() < 0.5);
        let us = rng.uniform();
        let s = if us < pi_a {
            Stratum::AlwaysTaker
        } else if us < pi_a + pi_c {
            Stratum::Complier
        } else {
            Stratum::NeverTaker
        };
        let t = match s {
            Stratum::AlwaysTaker => 1,
            Stratum::NeverTaker => 0,
            Stratum::Complier => z,
        };
        let gamma = match (s, t, z) {
            (Stratum::AlwaysTaker, 1, 0) => a10,
            (Stratum::AlwaysTaker, 1, 1) => a11,
            (Stratum::NeverTaker, 0, 0) => n00,
            (Stratum::NeverTaker, 0, 1) => n01,
            (Stratum::Complier, 0, 0) => c00,
            (Stratum::Complier, 1, 1) => c11,
            _ => unreachable!(),
        };
        let y = u8::from(rng.uniform() < gamma);
        records.push(ObsRecord { z, t, y, x: vec![age, com] });
    }
    Ok(TrialData { records, grid: truth.grid.clone(), truth, true_itt_c: itt_num / itt_den })
}
