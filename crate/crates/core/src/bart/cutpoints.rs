//! Per-variable cutpoint grids for split-rule proposals.

use crate::error::{Error, Result};
use crate::util::{quantile_sorted, Matrix};

/// Quantile-based cutpoint grids. Variables without at least two distinct
/// values are excluded from splitting and reported, not erred on.
#[derive(Debug, Clone, PartialEq)]
pub struct Cutpoints {
    grids: Vec<Vec<f64>>,
    splittable: Vec<usize>,
    excluded: Vec<usize>,
}

impl Cutpoints {
    pub fn grids(&self) -> &[Vec<f64>] {
        &self.grids
    }

    /// Variable indices with a nonempty grid, ascending.
    pub fn splittable(&self) -> &[usize] {
        &self.splittable
    }

    /// Variables dropped for having fewer than two distinct values.
    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }

    pub fn grid_len(&self, var: usize) -> usize {
        self.grids[var].len()
    }

    pub fn value(&self, var: usize, cut_index: usize) -> f64 {
        self.grids[var][cut_index]
    }

    pub fn n_vars(&self) -> usize {
        self.grids.len()
    }
}

/// Build cutpoint grids from empirical quantiles at levels `i / (n + 1)`,
/// `i = 1..=n`, deduplicated. Quantile-based grids make split decisions
/// depend only on covariate ranks, so strictly monotone transforms of a
/// column leave the fitted model unchanged.
pub fn build_cutpoints(x: &Matrix, n_cutpoints: usize) -> Result<Cutpoints> {
    if n_cutpoints == 0 {
        return Err(Error::invalid("n_cutpoints must be positive"));
    }
    let mut grids = Vec::with_capacity(x.ncols());
    let mut splittable = Vec::new();
    let mut excluded = Vec::new();
    for j in 0..x.ncols() {
        let mut col = x.column(j);
        col.sort_by(|a, b| a.partial_cmp(b).expect("NaN covariate"));
        let distinct = col.windows(2).any(|w| w[0] < w[1]);
        if !distinct {
            excluded.push(j);
            grids.push(Vec::new());
            continue;
        }
        let mut grid = Vec::with_capacity(n_cutpoints);
        for i in 1..=n_cutpoints {
            let q = i as f64 / (n_cutpoints + 1) as f64;
            let v = quantile_sorted(&col, q);
            if grid.last() != Some(&v) {
                grid.push(v);
            }
        }
        if grid.is_empty() {
            excluded.push(j);
            grids.push(Vec::new());
        } else {
            splittable.push(j);
            grids.push(grid);
        }
    }
    if splittable.is_empty() {
        return Err(Error::invalid("no splittable covariates"));
    }
    Ok(Cutpoints { grids, splittable, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_four() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let c = build_cutpoints(&x, 1).unwrap();
        assert_eq!(c.grids()[0], vec![2.5]);
    }

    #[test]
    fn constant_column_excluded() {
        let x = Matrix::from_rows(&[vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]]);
        let c = build_cutpoints(&x, 4).unwrap();
        assert_eq!(c.excluded(), &[0]);
        assert_eq!(c.splittable(), &[1]);
    }

    #[test]
    fn quartiles_match_sort_oracle() {
        let stream = crate::rng::RngStream::new(9, 0);
        let col: Vec<f64> = (0..100).map(|i| stream.uniform_at(i)).collect();
        let x = Matrix::from_rows(&col.iter().map(|&v| vec![v]).collect::<Vec<_>>());
        let c = build_cutpoints(&x, 3).unwrap();
        let mut sorted = col.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want: Vec<f64> =
            [0.25, 0.5, 0.75].iter().map(|&q| quantile_sorted(&sorted, q)).collect();
        assert_eq!(c.grids()[0], want);
    }

    #[test]
    fn grids_monotone_increasing() {
        let x = Matrix::from_rows(&[
            vec![3.0],
            vec![1.0],
            vec![1.0],
            vec![7.0],
            vec![2.0],
            vec![2.0],
        ]);
        let c = build_cutpoints(&x, 10).unwrap();
        let g = &c.grids()[0];
        assert!(g.windows(2).all(|w| w[0] < w[1]), "{g:?}");
    }
}
