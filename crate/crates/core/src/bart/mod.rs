//! Probit sum-of-trees sampler for the identified probability function.
//!
//! `fit_probit_bart` runs the backfitting chain on binary observations and
//! records, for every kept iteration, `Phi(f(x*) + probit_offset)` at a
//! fixed grid of design points. The resulting [`PhiDraws`] artifact is the
//! only thing later pipeline stages are allowed to read.

mod cutpoints;
mod sampler;
mod tree;

pub use cutpoints::{build_cutpoints, Cutpoints};
pub use sampler::{leaf_posterior, MoveStats, SamplerState};
pub use tree::{split_prob, tree_log_prior, RegTree, SplitRule, TreeEnsemble};

use crate::dist::{gaussian_cdf, gaussian_quantile};
use crate::drawfile::Provenance;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::util::{fnv1a, hash_matrix, Matrix};
use serde::{Deserialize, Serialize};

/// Sampler configuration. `sigma_mu = 3 / (k sqrt(L))` is derived, not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BartConfig {
    /// Number of trees L.
    pub n_trees: usize,
    /// Split probability scale: a node at depth d splits with probability
    /// `alpha_split * (1 + d)^(-beta_split)`.
    pub alpha_split: f64,
    pub beta_split: f64,
    /// Leaf-shrinkage factor; larger k shrinks the fit toward the offset.
    pub k: f64,
    pub n_cutpoints: usize,
    pub n_burn: usize,
    pub n_keep: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for BartConfig {
    fn default() -> Self {
        BartConfig {
            n_trees: 200,
            alpha_split: 0.95,
            beta_split: 2.0,
            k: 2.0,
            n_cutpoints: 100,
            n_burn: 500,
            n_keep: 1000,
            thin: 1,
            seed: 0,
        }
    }
}

impl BartConfig {
    pub fn sigma_mu(&self) -> f64 {
        3.0 / (self.k * (self.n_trees as f64).sqrt())
    }

    /// Stronger leaf shrinkage for rare-event fits, keeping estimated
    /// probabilities away from 0/1 in sparse regions.
    pub fn rare_event_preset() -> Self {
        BartConfig { k: 3.0, ..BartConfig::default() }
    }

    pub fn hash(&self) -> u64 {
        let mut bytes = Vec::with_capacity(9 * 8);
        bytes.extend_from_slice(&(self.n_trees as u64).to_le_bytes());
        bytes.extend_from_slice(&self.alpha_split.to_bits().to_le_bytes());
        bytes.extend_from_slice(&self.beta_split.to_bits().to_le_bytes());
        bytes.extend_from_slice(&self.k.to_bits().to_le_bytes());
        bytes.extend_from_slice(&(self.n_cutpoints as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.n_burn as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.n_keep as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.thin as u64).to_le_bytes());
        bytes.extend_from_slice(&self.seed.to_le_bytes());
        fnv1a(&bytes)
    }

    fn validate(&self) -> Result<()> {
        if self.n_keep == 0 {
            return Err(Error::invalid("n_keep must be positive"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be positive"));
        }
        if !(self.alpha_split > 0.0 && self.alpha_split < 1.0) {
            return Err(Error::invalid("alpha_split must lie in (0,1)"));
        }
        if self.beta_split < 0.0 {
            return Err(Error::invalid("beta_split must be nonnegative"));
        }
        if self.k <= 0.0 {
            return Err(Error::invalid("k must be positive"));
        }
        Ok(())
    }
}

/// Posterior draws of phi on a design grid, plus the provenance needed to
/// audit any downstream reuse.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiDraws {
    pub grid: Matrix,
    /// K x J, entries strictly inside (0, 1).
    pub draws: Matrix,
    pub provenance: Provenance,
}

impl PhiDraws {
    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.draws.ncols()
    }

    pub fn draw(&self, k: usize) -> &[f64] {
        self.draws.row(k)
    }

    /// Bit-exact hash of the draw payload; stage 2 records this per
    /// consumption so refit-free reuse is verifiable.
    pub fn content_hash(&self) -> u64 {
        hash_matrix(&self.draws)
    }
}

/// Output of a stage-1 fit: the phi artifact plus non-fatal warnings and
/// acceptance statistics.
#[derive(Debug, Clone)]
pub struct BartFit {
    pub phi: PhiDraws,
    pub warnings: Vec<String>,
    pub moves: MoveStats,
}

fn hash_training_data(x: &Matrix, y: &[u8]) -> u64 {
    let mut bytes = Vec::with_capacity(16 + x.data().len() * 8 + y.len());
    bytes.extend_from_slice(&(x.nrows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(x.ncols() as u64).to_le_bytes());
    for v in x.data() {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    bytes.extend_from_slice(y);
    fnv1a(&bytes)
}

/// Fit the probit sum-of-trees model to binary pairs `(y_i, x_i)` and record
/// phi draws at the `grid` design points.
///
/// The probit offset is set once to `Phi^-1(mean(y))` (clamped away from 0/1
/// for a constant response) and held fixed; the trees absorb the rest.
pub fn fit_probit_bart(x: &Matrix, y: &[u8], grid: &Matrix, config: &BartConfig) -> Result<BartFit> {
    config.validate()?;
    if y.iter().any(|&v| v > 1) {
        return Err(Error::invalid("response must be binary 0/1"));
    }
    let n = x.nrows();
    if n == 0 || y.len() != n {
        return Err(Error::invalid("empty training data or response length mismatch"));
    }
    let mut warnings = Vec::new();

    let cuts = build_cutpoints(x, config.n_cutpoints)?;
    if !cuts.excluded().is_empty() {
        warnings.push(format!(
            "covariates excluded from splitting (fewer than two distinct values): {:?}",
            cuts.excluded()
        ));
    }

    let n_ones = y.iter().filter(|&&v| v == 1).count();
    if n_ones == 0 || n_ones == n {
        warnings.push("response is constant; phi is flat-identified".to_string());
    }
    let ybar = (n_ones as f64).clamp(0.5, n as f64 - 0.5) / n as f64;
    let offset = gaussian_quantile(ybar);

    let stream = RngStream::new(config.seed, 0);
    let mut state = SamplerState::new(x, y, grid, cuts, config, offset, stream.seq())?;

    let k_draws = config.n_keep;
    let j = grid.nrows();
    let mut draws = Vec::with_capacity(k_draws * j);
    let total = config.n_burn + config.n_keep * config.thin;
    let tiny = f64::MIN_POSITIVE;
    let almost_one = 1.0f64.next_down();
    for it in 0..total {
        state.mcmc_iteration()?;
        let post = it + 1;
        if post > config.n_burn && (post - config.n_burn).is_multiple_of(config.thin) {
            for jdx in 0..j {
                let phi = gaussian_cdf(state.grid_latent(jdx)).clamp(tiny, almost_one);
                draws.push(phi);
            }
        }
    }

    let provenance = Provenance {
        config_hash: config.hash(),
        data_hash: hash_training_data(x, y),
        grid_hash: hash_matrix(grid),
        seed: config.seed,
    };
    Ok(BartFit {
        phi: PhiDraws { grid: grid.clone(), draws: Matrix::new(k_draws, j, draws), provenance },
        warnings,
        moves: state.moves,
    })
}

/// Draw one ensemble from the tree prior alone (no data): structures from
/// the depth-penalized branching process, rules uniform over the available
/// grids, leaves `Normal(0, sigma_mu^2)`.
pub fn sample_prior_ensemble(
    cuts: &Cutpoints,
    config: &BartConfig,
    rng: &mut crate::rng::SeqRng,
) -> TreeEnsemble {
    let sigma_mu = config.sigma_mu();
    let mut trees = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        let mut tree = RegTree::new_leaf();
        let mut frontier = vec![tree.root()];
        while let Some(idx) = frontier.pop() {
            let d = tree.depth(idx);
            // Depth cap: the branching process dies out long before this.
            let p = if d >= 20 { 0.0 } else { split_prob(d, config.alpha_split, config.beta_split) };
            if rng.uniform() < p {
                let vi = rng.index(cuts.splittable().len());
                let var_index = cuts.splittable()[vi];
                let cut_index = rng.index(cuts.grid_len(var_index));
                let (l, r) = tree.grow(idx, SplitRule { var_index, cut_index });
                frontier.push(r);
                frontier.push(l);
            } else {
                tree.set_mu(idx, sigma_mu * gaussian_quantile(rng.uniform()));
            }
        }
        trees.push(tree);
    }
    TreeEnsemble { trees, probit_offset: 0.0, cutpoints: cuts.clone() }
}
