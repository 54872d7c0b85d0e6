//! Shared test oracles: independent quadrature, KS machinery, and a
//! synthetic misconduct-like data generator.

#![allow(dead_code)]

use modprior::rng::RngStream;
use modprior::util::Matrix;

/// One-sample Kolmogorov-Smirnov statistic against a CDF.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((((i + 1) as f64) / n - f).abs());
        d = d.max((f - i as f64 / n).abs());
    }
    d
}

/// Asymptotic KS critical value at level alpha.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Simpson quadrature of `f` over `[a, b]` with `2m` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let n = 2 * m;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Standard normal CDF by quadrature of the density; an implementation-
/// independent oracle.
pub fn normal_cdf_oracle(z: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if z < -9.0 {
        return 0.0;
    }
    if z > 9.0 {
        return 1.0;
    }
    0.5 + simpson(pdf, 0.0, z.abs(), 4000) * z.signum()
}

/// A misconduct-like synthetic data set: five named covariates, a rare
/// binary response, and an industry group label.
pub struct MisconductData {
    pub columns: Vec<String>,
    pub x: Matrix,
    pub y: Vec<u8>,
    pub groups: Vec<String>,
    pub phi_true: Vec<f64>,
}

pub fn misconduct_columns() -> Vec<String> {
    ["fiscal_year", "ft_hits", "cash", "net_income", "qui_tam"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

pub fn synthetic_misconduct(n: usize, seed: u64) -> MisconductData {
    let stream = RngStream::new(seed, 0xAAEE);
    let mut rng = stream.seq();
    let sic = ["A", "B", "C", "D", "E", "F", "G", "H", "I", "J"];
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    let mut phi_true = Vec::with_capacity(n);
    for _ in 0..n {
        let fiscal_year = 2004.0 + (rng.index(7) as f64);
        let ft_hits = ((3.5 * rng.uniform()).exp() - 1.0).max(0.0);
        let cash = 0.6 * rng.uniform();
        let net_income = (2.0 * rng.uniform() - 4.0_f64).exp();
        let qui_tam = f64::from(rng.uniform() < 0.2);
        let sic_code = sic[rng.index(sic.len())];
        // Rare event: base rate about half a percent, increasing with media
        // exposure and falling over the years.
        let lin = -5.6 + 0.05 * ft_hits.ln_1p() - 0.12 * (fiscal_year - 2004.0)
            + 0.5 * qui_tam
            + 0.8 * cash;
        let phi = 1.0 / (1.0 + (-lin).exp());
        phi_true.push(phi);
        y.push(u8::from(rng.uniform() < phi));
        groups.push(sic_code.to_string());
        rows.push(vec![fiscal_year, ft_hits, cash, net_income, qui_tam]);
    }
    MisconductData { columns: misconduct_columns(), x: Matrix::from_rows(&rows), y, groups, phi_true }
}
