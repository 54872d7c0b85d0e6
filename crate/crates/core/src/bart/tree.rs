//! Binary regression trees with arena storage and the sum-of-trees ensemble.

use super::cutpoints::Cutpoints;

/// A split rule: send `x[var_index] < cutpoint` left, the rest right.
/// `cut_index` addresses the variable's precomputed cutpoint grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRule {
    pub var_index: usize,
    pub cut_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum NodeKind {
    Leaf { mu: f64 },
    Internal { rule: SplitRule, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Node {
    pub kind: NodeKind,
    pub depth: u32,
    pub parent: Option<usize>,
}

/// A binary regression tree. Nodes live in an arena so indices stay stable
/// across grow/prune moves; freed slots are recycled.
#[derive(Debug, Clone, PartialEq)]
pub struct RegTree {
    nodes: Vec<Node>,
    free: Vec<usize>,
    root: usize,
    n_leaves: usize,
}

impl RegTree {
    /// A single root leaf with value 0.
    pub fn new_leaf() -> Self {
        RegTree {
            nodes: vec![Node { kind: NodeKind::Leaf { mu: 0.0 }, depth: 0, parent: None }],
            free: Vec::new(),
            root: 0,
            n_leaves: 1,
        }
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn is_leaf(&self, idx: usize) -> bool {
        matches!(self.nodes[idx].kind, NodeKind::Leaf { .. })
    }

    pub fn depth(&self, idx: usize) -> u32 {
        self.nodes[idx].depth
    }

    pub fn mu(&self, idx: usize) -> f64 {
        match self.nodes[idx].kind {
            NodeKind::Leaf { mu } => mu,
            _ => panic!("mu of internal node"),
        }
    }

    pub fn set_mu(&mut self, idx: usize, value: f64) {
        match &mut self.nodes[idx].kind {
            NodeKind::Leaf { mu } => *mu = value,
            _ => panic!("set_mu of internal node"),
        }
    }

    pub fn rule(&self, idx: usize) -> SplitRule {
        match self.nodes[idx].kind {
            NodeKind::Internal { rule, .. } => rule,
            _ => panic!("rule of leaf"),
        }
    }

    pub fn set_rule(&mut self, idx: usize, new_rule: SplitRule) {
        match &mut self.nodes[idx].kind {
            NodeKind::Internal { rule, .. } => *rule = new_rule,
            _ => panic!("set_rule of leaf"),
        }
    }

    pub fn children(&self, idx: usize) -> (usize, usize) {
        match self.nodes[idx].kind {
            NodeKind::Internal { left, right, .. } => (left, right),
            _ => panic!("children of leaf"),
        }
    }

    pub fn parent(&self, idx: usize) -> Option<usize> {
        self.nodes[idx].parent
    }

    /// Leaf indices in depth-first (left-before-right) order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_leaves);
        self.visit(self.root, &mut |t, idx| {
            if t.is_leaf(idx) {
                out.push(idx);
            }
        });
        out
    }

    /// Internal nodes in depth-first order.
    pub fn internals(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(self.root, &mut |t, idx| {
            if !t.is_leaf(idx) {
                out.push(idx);
            }
        });
        out
    }

    /// Internal nodes whose children are both leaves (prunable).
    pub fn nog_nodes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(self.root, &mut |t, idx| {
            if !t.is_leaf(idx) {
                let (l, r) = t.children(idx);
                if t.is_leaf(l) && t.is_leaf(r) {
                    out.push(idx);
                }
            }
        });
        out
    }

    fn visit(&self, idx: usize, f: &mut impl FnMut(&RegTree, usize)) {
        f(self, idx);
        if let NodeKind::Internal { left, right, .. } = self.nodes[idx].kind {
            self.visit(left, f);
            self.visit(right, f);
        }
    }

    /// Leaves of the subtree rooted at `idx`.
    pub fn subtree_leaves(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit_from(idx, &mut |t, i| {
            if t.is_leaf(i) {
                out.push(i);
            }
        });
        out
    }

    fn visit_from(&self, idx: usize, f: &mut impl FnMut(&RegTree, usize)) {
        f(self, idx);
        if let NodeKind::Internal { left, right, .. } = self.nodes[idx].kind {
            self.visit_from(left, f);
            self.visit_from(right, f);
        }
    }

    fn alloc(&mut self, node: Node) -> usize {
        if let Some(idx) = self.free.pop() {
            self.nodes[idx] = node;
            idx
        } else {
            self.nodes.push(node);
            self.nodes.len() - 1
        }
    }

    /// Split leaf `idx` with `rule`; returns the new `(left, right)` leaves,
    /// both carrying the old leaf value.
    pub fn grow(&mut self, idx: usize, rule: SplitRule) -> (usize, usize) {
        assert!(self.is_leaf(idx));
        let mu = self.mu(idx);
        let depth = self.nodes[idx].depth + 1;
        let left = self.alloc(Node { kind: NodeKind::Leaf { mu }, depth, parent: Some(idx) });
        let right = self.alloc(Node { kind: NodeKind::Leaf { mu }, depth, parent: Some(idx) });
        self.nodes[idx].kind = NodeKind::Internal { rule, left, right };
        self.n_leaves += 1;
        (left, right)
    }

    /// Collapse the no-grandchild node `idx` back into a leaf with value 0.
    pub fn prune(&mut self, idx: usize) {
        let (l, r) = self.children(idx);
        assert!(self.is_leaf(l) && self.is_leaf(r), "prune target must have leaf children");
        self.free.push(l);
        self.free.push(r);
        self.nodes[idx].kind = NodeKind::Leaf { mu: 0.0 };
        self.n_leaves -= 1;
    }

    /// Route `x` from `start` to its leaf.
    pub fn leaf_from(&self, start: usize, x: &[f64], cuts: &Cutpoints) -> usize {
        let mut idx = start;
        loop {
            match self.nodes[idx].kind {
                NodeKind::Leaf { .. } => return idx,
                NodeKind::Internal { rule, left, right } => {
                    idx = if x[rule.var_index] < cuts.value(rule.var_index, rule.cut_index) {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn leaf_of(&self, x: &[f64], cuts: &Cutpoints) -> usize {
        self.leaf_from(self.root, x, cuts)
    }

    pub fn evaluate(&self, x: &[f64], cuts: &Cutpoints) -> f64 {
        self.mu(self.leaf_of(x, cuts))
    }
}

/// Probability that a node at depth `d` splits: `alpha (1 + d)^(-beta)`.
#[inline]
pub fn split_prob(depth: u32, alpha_split: f64, beta_split: f64) -> f64 {
    alpha_split * (1.0 + depth as f64).powf(-beta_split)
}

/// Log prior of the tree's branching structure: each internal node
/// contributes `ln alpha(1+d)^-beta`, each leaf `ln(1 - alpha(1+d)^-beta)`.
/// Split-rule selection probabilities are handled in the move ratios, not
/// here.
pub fn tree_log_prior(tree: &RegTree, alpha_split: f64, beta_split: f64) -> f64 {
    let mut lp = 0.0;
    for idx in tree.internals() {
        lp += split_prob(tree.depth(idx), alpha_split, beta_split).ln();
    }
    for idx in tree.leaves() {
        let p = split_prob(tree.depth(idx), alpha_split, beta_split);
        lp += if p == 0.0 { 0.0 } else { (1.0 - p).ln() };
    }
    lp
}

/// Sum of trees plus a fixed probit offset. Owns its cutpoint grids so
/// evaluation is self-contained.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub trees: Vec<RegTree>,
    pub probit_offset: f64,
    pub cutpoints: Cutpoints,
}

impl TreeEnsemble {
    /// Latent-scale evaluation: `probit_offset + sum_l g_l(x)`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.probit_offset + self.trees.iter().map(|t| t.evaluate(x, &self.cutpoints)).sum::<f64>()
    }
}
