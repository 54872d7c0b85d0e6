//! Backfitting MCMC for the probit sum-of-trees model.
//!
//! One iteration is: (a) redraw the latent utilities by truncated-normal
//! data augmentation, (b) for each tree, one Metropolis-Hastings structure
//! move (GROW / PRUNE / CHANGE) against the marginal likelihood with leaf
//! values integrated out, (c) conjugate redraw of every leaf value. The
//! chain is strictly sequential; all randomness comes from one counter-based
//! stream, so a (seed, config, data) triple fully determines the output.

use super::cutpoints::Cutpoints;
use super::tree::{split_prob, RegTree, SplitRule, TreeEnsemble};
use super::BartConfig;
use crate::dist::{gaussian_quantile, trunc_normal_draw, TruncInterval};
use crate::error::{Error, Result};
use crate::rng::SeqRng;
use crate::util::Matrix;

const P_GROW: f64 = 0.25;
const P_PRUNE: f64 = 0.25;

/// Leaf full conditional given `n` residuals summing to `s`, unit latent
/// variance, and a `Normal(0, sigma_mu^2)` prior.
pub fn leaf_posterior(n: u32, sum: f64, sigma_mu: f64) -> (f64, f64) {
    let v = sigma_mu * sigma_mu;
    let denom = 1.0 + n as f64 * v;
    (sum * v / denom, (v / denom).sqrt())
}

/// Log marginal likelihood contribution of one leaf, up to terms that are
/// constant across structure moves on a fixed member set.
#[inline]
fn log_marginal(n: u32, sum: f64, sigma_mu: f64) -> f64 {
    let v = sigma_mu * sigma_mu;
    let denom = 1.0 + n as f64 * v;
    0.5 * (-denom.ln() + v * sum * sum / denom)
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct LeafStats {
    pub n: u32,
    pub sum: f64,
}

/// Counts of proposed and accepted structure moves.
#[derive(Debug, Clone, Copy, Default)]
pub struct MoveStats {
    pub grow: (u64, u64),
    pub prune: (u64, u64),
    pub change: (u64, u64),
}

pub struct SamplerState<'d> {
    x: &'d Matrix,
    y: &'d [u8],
    grid: &'d Matrix,
    cuts: Cutpoints,
    sigma_mu: f64,
    alpha_split: f64,
    beta_split: f64,
    offset: f64,
    trees: Vec<RegTree>,
    z: Vec<f64>,
    train_fit: Vec<f64>,
    grid_fit: Vec<f64>,
    train_leaf: Vec<Vec<u32>>,
    grid_leaf: Vec<Vec<u32>>,
    rng: SeqRng,
    pub moves: MoveStats,
}

impl<'d> SamplerState<'d> {
    pub fn new(
        x: &'d Matrix,
        y: &'d [u8],
        grid: &'d Matrix,
        cuts: Cutpoints,
        config: &BartConfig,
        offset: f64,
        rng: SeqRng,
    ) -> Result<Self> {
        let n = x.nrows();
        if n == 0 || y.len() != n {
            return Err(Error::invalid("training data empty or response length mismatch"));
        }
        if grid.ncols() != x.ncols() {
            return Err(Error::invalid("grid covariate dimension mismatch"));
        }
        let l = config.n_trees;
        if l == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        let trees: Vec<RegTree> = (0..l).map(|_| RegTree::new_leaf()).collect();
        // Latents start on the correct side of zero; iteration (a) redraws them.
        let z = y.iter().map(|&yi| if yi == 1 { 0.5 } else { -0.5 }).collect();
        Ok(SamplerState {
            x,
            y,
            grid,
            cuts,
            sigma_mu: config.sigma_mu(),
            alpha_split: config.alpha_split,
            beta_split: config.beta_split,
            offset,
            trees,
            z,
            train_fit: vec![0.0; n],
            grid_fit: vec![0.0; grid.nrows()],
            train_leaf: vec![vec![0; n]; l],
            grid_leaf: vec![vec![0; grid.nrows()]; l],
            rng,
            moves: MoveStats::default(),
        })
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn latents(&self) -> &[f64] {
        &self.z
    }

    pub fn grid_latent(&self, j: usize) -> f64 {
        self.offset + self.grid_fit[j]
    }

    pub fn ensemble(&self) -> TreeEnsemble {
        TreeEnsemble {
            trees: self.trees.clone(),
            probit_offset: self.offset,
            cutpoints: self.cuts.clone(),
        }
    }

    /// One full MCMC sweep: data augmentation, a structure move and leaf
    /// redraw for every tree.
    pub fn mcmc_iteration(&mut self) -> Result<()> {
        self.draw_latents()?;
        for l in 0..self.trees.len() {
            self.update_tree(l)?;
        }
        Ok(())
    }

    fn draw_latents(&mut self) -> Result<()> {
        for i in 0..self.z.len() {
            let mean = self.offset + self.train_fit[i];
            let trunc =
                if self.y[i] == 1 { TruncInterval::above(0.0) } else { TruncInterval::below(0.0) };
            let u = self.rng.uniform();
            self.z[i] = trunc_normal_draw(mean, 1.0, trunc, u).map_err(|e| {
                Error::invalid(format!("latent augmentation failed at row {i}: {e}"))
            })?;
        }
        Ok(())
    }

    pub(crate) fn residual_stats(&self, l: usize) -> Vec<LeafStats> {
        let tree = &self.trees[l];
        let mut stats = vec![LeafStats::default(); tree_arena_len(tree)];
        for i in 0..self.z.len() {
            let leaf = self.train_leaf[l][i] as usize;
            let r = self.z[i] - self.offset - self.train_fit[i] + tree.mu(leaf);
            stats[leaf].n += 1;
            stats[leaf].sum += r;
        }
        stats
    }

    fn update_tree(&mut self, l: usize) -> Result<()> {
        let mut stats = self.residual_stats(l);

        // Snapshot this tree's contribution per point; the structure move and
        // leaf redraw below may change assignments and values together.
        let old_train: Vec<f64> =
            self.train_leaf[l].iter().map(|&b| self.trees[l].mu(b as usize)).collect();
        let old_grid: Vec<f64> =
            self.grid_leaf[l].iter().map(|&b| self.trees[l].mu(b as usize)).collect();

        let u_move = self.rng.uniform();
        let single = self.trees[l].n_leaves() == 1;
        if single || u_move < P_GROW {
            self.try_grow(l, &mut stats);
        } else if u_move < P_GROW + P_PRUNE {
            self.try_prune(l, &mut stats);
        } else {
            self.try_change(l, &mut stats);
        }

        self.redraw_leaves(l, &stats);

        for i in 0..self.train_fit.len() {
            self.train_fit[i] += self.trees[l].mu(self.train_leaf[l][i] as usize) - old_train[i];
        }
        for j in 0..self.grid_fit.len() {
            self.grid_fit[j] += self.trees[l].mu(self.grid_leaf[l][j] as usize) - old_grid[j];
        }
        Ok(())
    }

    fn pick_rule(&mut self) -> SplitRule {
        let vi = self.rng.index(self.cuts.splittable().len());
        let var_index = self.cuts.splittable()[vi];
        let cut_index = self.rng.index(self.cuts.grid_len(var_index));
        SplitRule { var_index, cut_index }
    }

    /// Stats of the proposed children of `leaf` under `rule`, plus the
    /// member rows (train indices) going left.
    fn split_leaf_stats(
        &self,
        l: usize,
        leaf: usize,
        rule: SplitRule,
    ) -> (LeafStats, LeafStats, Vec<u32>) {
        let tree = &self.trees[l];
        let cutval = self.cuts.value(rule.var_index, rule.cut_index);
        let mut left = LeafStats::default();
        let mut right = LeafStats::default();
        let mut left_rows = Vec::new();
        for i in 0..self.z.len() {
            if self.train_leaf[l][i] as usize != leaf {
                continue;
            }
            let r = self.z[i] - self.offset - self.train_fit[i] + tree.mu(leaf);
            if self.x.get(i, rule.var_index) < cutval {
                left.n += 1;
                left.sum += r;
                left_rows.push(i as u32);
            } else {
                right.n += 1;
                right.sum += r;
            }
        }
        (left, right, left_rows)
    }

    /// Log MH ratio for growing `leaf` with `rule`, together with the child
    /// stats. `None` when a child would be empty (auto-reject).
    pub(crate) fn grow_log_ratio(
        &self,
        l: usize,
        stats: &[LeafStats],
        leaf: usize,
        rule: SplitRule,
    ) -> Option<(f64, LeafStats, LeafStats, Vec<u32>)> {
        let tree = &self.trees[l];
        let (left, right, left_rows) = self.split_leaf_stats(l, leaf, rule);
        if left.n == 0 || right.n == 0 {
            return None;
        }
        let d = tree.depth(leaf);
        let a_d = split_prob(d, self.alpha_split, self.beta_split);
        let a_d1 = split_prob(d + 1, self.alpha_split, self.beta_split);
        let log_prior = a_d.ln() - (1.0 - a_d).ln() + 2.0 * (1.0 - a_d1).ln();
        let sm = self.sigma_mu;
        let parent = stats[leaf];
        let log_lik = log_marginal(left.n, left.sum, sm) + log_marginal(right.n, right.sum, sm)
            - log_marginal(parent.n, parent.sum, sm);
        // Proposal: forward picks a leaf (uniform; rule factors cancel against
        // the rule prior); reverse picks the new no-grandchild node.
        let p_grow = if tree.n_leaves() == 1 { 1.0 } else { P_GROW };
        let n_nog_after = {
            let base = tree.nog_nodes().len();
            let parent_was_nog = match tree.parent(leaf) {
                Some(p) => {
                    let (a, b) = tree.children(p);
                    let sib = if a == leaf { b } else { a };
                    tree.is_leaf(sib)
                }
                None => false,
            };
            base + 1 - usize::from(parent_was_nog)
        };
        let log_proposal = P_PRUNE.ln() - (n_nog_after as f64).ln()
            - (p_grow.ln() - (tree.n_leaves() as f64).ln());
        Some((log_prior + log_lik + log_proposal, left, right, left_rows))
    }

    /// Log MH ratio for pruning the no-grandchild node `nog`.
    pub(crate) fn prune_log_ratio(&self, l: usize, stats: &[LeafStats], nog: usize) -> f64 {
        let tree = &self.trees[l];
        let (lc, rc) = tree.children(nog);
        let (sl, sr) = (stats[lc], stats[rc]);
        let merged = LeafStats { n: sl.n + sr.n, sum: sl.sum + sr.sum };
        let d = tree.depth(nog);
        let a_d = split_prob(d, self.alpha_split, self.beta_split);
        let a_d1 = split_prob(d + 1, self.alpha_split, self.beta_split);
        let log_prior = (1.0 - a_d).ln() - a_d.ln() - 2.0 * (1.0 - a_d1).ln();
        let sm = self.sigma_mu;
        let log_lik = log_marginal(merged.n, merged.sum, sm)
            - log_marginal(sl.n, sl.sum, sm)
            - log_marginal(sr.n, sr.sum, sm);
        // Reverse move grows the merged leaf back; forward picks among the
        // current no-grandchild nodes.
        let n_leaves_after = tree.n_leaves() - 1;
        let p_grow_after = if n_leaves_after == 1 { 1.0 } else { P_GROW };
        let log_proposal = p_grow_after.ln() - (n_leaves_after as f64).ln()
            - (P_PRUNE.ln() - (tree.nog_nodes().len() as f64).ln());
        log_prior + log_lik + log_proposal
    }

    fn try_grow(&mut self, l: usize, stats: &mut Vec<LeafStats>) {
        self.moves.grow.0 += 1;
        let leaves = self.trees[l].leaves();
        let leaf = leaves[self.rng.index(leaves.len())];
        let rule = self.pick_rule();
        let Some((log_ratio, left, right, left_rows)) = self.grow_log_ratio(l, stats, leaf, rule)
        else {
            return;
        };
        let u = self.rng.uniform();
        if u.ln() >= log_ratio {
            return;
        }
        self.moves.grow.1 += 1;
        let (lc, rc) = self.trees[l].grow(leaf, rule);
        let max_idx = lc.max(rc);
        if stats.len() <= max_idx {
            stats.resize(max_idx + 1, LeafStats::default());
        }
        stats[lc] = left;
        stats[rc] = right;
        // Reassign training rows of the split leaf.
        let mut li = 0usize;
        for i in 0..self.z.len() {
            if self.train_leaf[l][i] as usize == leaf {
                let goes_left = li < left_rows.len() && left_rows[li] == i as u32;
                if goes_left {
                    li += 1;
                    self.train_leaf[l][i] = lc as u32;
                } else {
                    self.train_leaf[l][i] = rc as u32;
                }
            }
        }
        // Reassign grid rows by routing through the new rule.
        let cutval = self.cuts.value(rule.var_index, rule.cut_index);
        for j in 0..self.grid.nrows() {
            if self.grid_leaf[l][j] as usize == leaf {
                self.grid_leaf[l][j] = if self.grid.get(j, rule.var_index) < cutval {
                    lc as u32
                } else {
                    rc as u32
                };
            }
        }
    }

    fn try_prune(&mut self, l: usize, stats: &mut [LeafStats]) {
        self.moves.prune.0 += 1;
        let nogs = self.trees[l].nog_nodes();
        let nog = nogs[self.rng.index(nogs.len())];
        let log_ratio = self.prune_log_ratio(l, stats, nog);
        let u = self.rng.uniform();
        if u.ln() >= log_ratio {
            return;
        }
        self.moves.prune.1 += 1;
        let (lc, rc) = self.trees[l].children(nog);
        stats[nog] = LeafStats {
            n: stats[lc].n + stats[rc].n,
            sum: stats[lc].sum + stats[rc].sum,
        };
        self.trees[l].prune(nog);
        for i in 0..self.z.len() {
            let a = self.train_leaf[l][i] as usize;
            if a == lc || a == rc {
                self.train_leaf[l][i] = nog as u32;
            }
        }
        for j in 0..self.grid.nrows() {
            let a = self.grid_leaf[l][j] as usize;
            if a == lc || a == rc {
                self.grid_leaf[l][j] = nog as u32;
            }
        }
    }

    fn try_change(&mut self, l: usize, stats: &mut [LeafStats]) {
        self.moves.change.0 += 1;
        let internals = self.trees[l].internals();
        let node = internals[self.rng.index(internals.len())];
        let rule = self.pick_rule();
        if rule == self.trees[l].rule(node) {
            // Self-move: always accepted, nothing changes.
            self.moves.change.1 += 1;
            return;
        }
        let tree = &self.trees[l];
        let sub_leaves = tree.subtree_leaves(node);
        let in_subtree = {
            let mut mask = vec![false; tree_arena_len(tree)];
            for &s in &sub_leaves {
                mask[s] = true;
            }
            mask
        };
        // Re-route subtree members under the proposed rule.
        let mut new_stats = vec![LeafStats::default(); tree_arena_len(tree)];
        let mut new_assign: Vec<(u32, u32)> = Vec::new();
        for i in 0..self.z.len() {
            let cur = self.train_leaf[l][i] as usize;
            if !in_subtree[cur] {
                continue;
            }
            let leaf_old = cur;
            let r = self.z[i] - self.offset - self.train_fit[i] + tree.mu(leaf_old);
            let leaf_new = route_with_rule(tree, node, rule, self.x.row(i), &self.cuts);
            new_stats[leaf_new].n += 1;
            new_stats[leaf_new].sum += r;
            new_assign.push((i as u32, leaf_new as u32));
        }
        if sub_leaves.iter().any(|&s| new_stats[s].n == 0) {
            return; // auto-reject: an empty leaf under the proposal
        }
        let sm = self.sigma_mu;
        let mut log_ratio = 0.0;
        for &s in &sub_leaves {
            log_ratio += log_marginal(new_stats[s].n, new_stats[s].sum, sm)
                - log_marginal(stats[s].n, stats[s].sum, sm);
        }
        let u = self.rng.uniform();
        if u.ln() >= log_ratio {
            return;
        }
        self.moves.change.1 += 1;
        self.trees[l].set_rule(node, rule);
        for &(i, leaf) in &new_assign {
            self.train_leaf[l][i as usize] = leaf;
        }
        for &s in &sub_leaves {
            stats[s] = new_stats[s];
        }
        for j in 0..self.grid.nrows() {
            let cur = self.grid_leaf[l][j] as usize;
            if in_subtree[cur] {
                self.grid_leaf[l][j] =
                    route_with_rule(&self.trees[l], node, rule, self.grid.row(j), &self.cuts) as u32;
            }
        }
    }

    fn redraw_leaves(&mut self, l: usize, stats: &[LeafStats]) {
        let leaves = self.trees[l].leaves();
        for &b in &leaves {
            let s = stats[b];
            let (m, sd) = leaf_posterior(s.n, s.sum, self.sigma_mu);
            let mu_new = m + sd * gaussian_quantile(self.rng.uniform());
            self.trees[l].set_mu(b, mu_new);
        }
    }
}

/// Route `x` into the subtree at `node`, overriding the rule at `node` only.
fn route_with_rule(
    tree: &RegTree,
    node: usize,
    rule: SplitRule,
    x: &[f64],
    cuts: &Cutpoints,
) -> usize {
    let (left, right) = tree.children(node);
    let next = if x[rule.var_index] < cuts.value(rule.var_index, rule.cut_index) {
        left
    } else {
        right
    };
    tree.leaf_from(next, x, cuts)
}

fn tree_arena_len(tree: &RegTree) -> usize {
    // Leaves and internals index into the arena; the highest live index
    // bounds the stats tables.
    tree.leaves().iter().chain(tree.internals().iter()).copied().max().unwrap_or(0) + 1
}
