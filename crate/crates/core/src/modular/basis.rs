//! Covariate basis transforms for the surveillance prior mean.
//!
//! Each variable is rescaled affinely onto the unit interval, optionally
//! after a shifted log. Fitted parameters (min/max) are stored so the same
//! transform applies verbatim to new design points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Affine,
    ShiftedLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarTransform {
    /// Column name in the source data.
    pub var: String,
    pub transform: TransformKind,
    /// Shift added before the log (shifted_log only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    /// Fitted rescale parameters on the (possibly logged) scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl VarTransform {
    pub fn affine(var: &str) -> Self {
        VarTransform { var: var.to_string(), transform: TransformKind::Affine, shift: None, min: None, max: None }
    }

    pub fn shifted_log(var: &str, shift: f64) -> Self {
        VarTransform {
            var: var.to_string(),
            transform: TransformKind::ShiftedLog,
            shift: Some(shift),
            min: None,
            max: None,
        }
    }

    fn pre(&self, v: f64, row: usize) -> Result<f64> {
        match self.transform {
            TransformKind::Affine => Ok(v),
            TransformKind::ShiftedLog => {
                let shift = self.shift.unwrap_or(0.0);
                let arg = v + shift;
                if arg <= 0.0 {
                    return Err(Error::invalid(format!(
                        "shifted log of variable '{}' has nonpositive argument {arg} at row {row}",
                        self.var
                    )));
                }
                Ok(arg.ln())
            }
        }
    }
}

/// A fitted (or fittable) basis `h(x)`: one transformed column per variable,
/// preceded by an intercept column when `include_intercept` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub vars: Vec<VarTransform>,
    #[serde(rename = "intercept", default = "default_true")]
    pub include_intercept: bool,
}

fn default_true() -> bool {
    true
}

impl BasisSpec {
    pub fn output_dim(&self) -> usize {
        self.vars.len() + usize::from(self.include_intercept)
    }

    pub fn is_fitted(&self) -> bool {
        self.vars.iter().all(|v| v.min.is_some() && v.max.is_some())
    }

    fn column_index(&self, columns: &[String], var: &str) -> Result<usize> {
        columns
            .iter()
            .position(|c| c == var)
            .ok_or_else(|| Error::invalid(format!("basis variable '{var}' not found in columns {columns:?}")))
    }

    /// Apply the stored transforms to new rows. Requires a fitted basis.
    pub fn apply(&self, x: &Matrix, columns: &[String]) -> Result<Matrix> {
        if !self.is_fitted() {
            return Err(Error::invalid("basis parameters unfitted; run make_basis first"));
        }
        let n = x.nrows();
        let mut h = Matrix::zeros(n, self.output_dim());
        let icpt = usize::from(self.include_intercept);
        if self.include_intercept {
            for i in 0..n {
                h.set(i, 0, 1.0);
            }
        }
        for (k, vt) in self.vars.iter().enumerate() {
            let j = self.column_index(columns, &vt.var)?;
            let (lo, hi) = (vt.min.unwrap(), vt.max.unwrap());
            let span = hi - lo;
            for i in 0..n {
                let t = vt.pre(x.get(i, j), i)?;
                let scaled = if span == 0.0 { 0.0 } else { (t - lo) / span };
                h.set(i, icpt + k, scaled);
            }
        }
        Ok(h)
    }
}

/// Fit transform parameters on raw data and return the fitted basis together
/// with the transformed matrix. The minimum of each (logged) column maps to
/// 0 and the maximum to 1.
pub fn make_basis(x: &Matrix, columns: &[String], spec: &BasisSpec) -> Result<(BasisSpec, Matrix)> {
    if x.nrows() == 0 {
        return Err(Error::invalid("cannot fit a basis on empty data"));
    }
    let mut fitted = spec.clone();
    for vt in fitted.vars.iter_mut() {
        let j = columns
            .iter()
            .position(|c| c == &vt.var)
            .ok_or_else(|| Error::invalid(format!("basis variable '{}' not found", vt.var)))?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..x.nrows() {
            let t = vt.pre(x.get(i, j), i)?;
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if hi <= lo || hi.is_nan() || lo.is_nan() {
            return Err(Error::invalid(format!(
                "variable '{}' is constant; cannot rescale to the unit interval",
                vt.var
            )));
        }
        vt.min = Some(lo);
        vt.max = Some(hi);
    }
    let h = fitted.apply(x, columns)?;
    Ok((fitted, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn affine_rescale() {
        let x = Matrix::from_rows(&[vec![0.0], vec![5.0], vec![10.0]]);
        let spec = BasisSpec { vars: vec![VarTransform::affine("a")], include_intercept: false };
        let (_, h) = make_basis(&x, &cols(&["a"]), &spec).unwrap();
        assert_eq!(h.column(0), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn shifted_log_two_point() {
        let x = Matrix::from_rows(&[vec![0.0], vec![9.0]]);
        let spec =
            BasisSpec { vars: vec![VarTransform::shifted_log("v", 1.0)], include_intercept: false };
        let (_, h) = make_basis(&x, &cols(&["v"]), &spec).unwrap();
        assert_eq!(h.column(0), vec![0.0, 1.0]);
    }

    #[test]
    fn reapplication_is_idempotent() {
        let x = Matrix::from_rows(&[vec![1.0, 3.0], vec![4.0, 9.0], vec![2.5, 6.0]]);
        let spec = BasisSpec {
            vars: vec![VarTransform::affine("a"), VarTransform::shifted_log("b", 1.0)],
            include_intercept: true,
        };
        let names = cols(&["a", "b"]);
        let (fitted, h) = make_basis(&x, &names, &spec).unwrap();
        let h2 = fitted.apply(&x, &names).unwrap();
        assert_eq!(h, h2);
        assert_eq!(h.ncols(), 3);
        assert_eq!(h.get(0, 0), 1.0);
    }

    #[test]
    fn nonpositive_log_argument_names_variable_and_row() {
        let x = Matrix::from_rows(&[vec![0.5], vec![-2.0]]);
        let spec =
            BasisSpec { vars: vec![VarTransform::shifted_log("income", 1.0)], include_intercept: false };
        let err = make_basis(&x, &cols(&["income"]), &spec).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("income") && msg.contains("row 1"), "{msg}");
    }

    #[test]
    fn json_round_trip() {
        let spec = BasisSpec {
            vars: vec![VarTransform::affine("x"), VarTransform::shifted_log("y", 2.0)],
            include_intercept: true,
        };
        let s = serde_json::to_string(&spec).unwrap();
        let back: BasisSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);
    }
}
