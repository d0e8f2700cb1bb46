//! CART trees grown best-first under a leaf budget, and bootstrap bagging.
//!
//! Regression splits maximise the reduction in squared error; classification
//! splits maximise the reduction in Gini impurity (weighted by node size).
//! The leaf with the largest achievable reduction is split next until the
//! budget is reached or no split helps.

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;
use crate::simskin::Location;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreePreset {
    Fine,
    Medium,
    Coarse,
}

impl TreePreset {
    pub fn max_leaves(self) -> usize {
        match self {
            TreePreset::Fine => 100,
            TreePreset::Medium => 20,
            TreePreset::Coarse => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TreePreset::Fine => "fine",
            TreePreset::Medium => "medium",
            TreePreset::Coarse => "coarse",
        }
    }
}

pub const BAGGED_TREE_COUNT: usize = 30;

/// Regression value or class labels for training.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Regression(&'a [f64]),
    Classification(&'a [Location]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Node {
    Split {
        feature: usize,
        #[serde(with = "crate::hexfloat")]
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Regression: `[mean]`. Classification: class proportions `[A, B, C]`.
    Leaf {
        #[serde(with = "crate::hexfloat::vec")]
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

struct SplitChoice {
    gain: f64,
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

/// Per-node statistics that support the split criterion.
#[derive(Clone, Copy, Default)]
struct Stats {
    n: f64,
    sum: f64,
    counts: [f64; 3],
}

impl Stats {
    fn add(&mut self, t: &Targets, i: usize, sign: f64) {
        self.n += sign;
        match t {
            Targets::Regression(y) => self.sum += sign * y[i],
            Targets::Classification(c) => self.counts[c[i].index()] += sign,
        }
    }

    /// Quantity whose increase equals the impurity decrease:
    /// `sum^2 / n` for squared error, `sum(count^2) / n` for Gini.
    fn score(&self, t: &Targets) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        match t {
            Targets::Regression(_) => self.sum * self.sum / self.n,
            Targets::Classification(_) => self.counts.iter().map(|c| c * c).sum::<f64>() / self.n,
        }
    }
}

fn leaf_value(t: &Targets, idx: &[usize]) -> Vec<f64> {
    match t {
        Targets::Regression(y) => vec![idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64],
        Targets::Classification(c) => {
            let mut counts = [0.0; 3];
            for &i in idx {
                counts[c[i].index()] += 1.0;
            }
            counts.map(|v| v / idx.len() as f64).to_vec()
        }
    }
}

#[allow(clippy::needless_range_loop)]
fn best_split(x: &[[f64; 4]], t: &Targets, idx: &[usize]) -> Option<SplitChoice> {
    if idx.len() < 2 {
        return None;
    }
    let mut total = Stats::default();
    for &i in idx {
        total.add(t, i, 1.0);
    }
    let parent = total.score(t);
    let impurity = match t {
        Targets::Regression(y) => idx.iter().map(|&i| y[i] * y[i]).sum::<f64>() - parent,
        Targets::Classification(_) => total.n - parent,
    };
    if impurity <= 1e-12 * total.n {
        return None;
    }

    let mut best: Option<(f64, usize, f64, usize)> = None;
    let mut order = idx.to_vec();
    for feature in 0..4 {
        order.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]).then(a.cmp(&b)));
        let mut left = Stats::default();
        let mut right = total;
        for pos in 0..order.len() - 1 {
            let i = order[pos];
            left.add(t, i, 1.0);
            right.add(t, i, -1.0);
            let (lo, hi) = (x[i][feature], x[order[pos + 1]][feature]);
            if lo == hi {
                continue;
            }
            let gain = left.score(t) + right.score(t) - parent;
            if best.is_none_or(|(g, ..)| gain > g) {
                best = Some((gain, feature, lo + (hi - lo) / 2.0, pos + 1));
            }
        }
    }
    let (gain, feature, threshold, _) = best?;
    if gain <= 1e-10 * impurity {
        return None;
    }
    let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] <= threshold);
    Some(SplitChoice { gain, feature, threshold, left, right })
}

impl Tree {
    pub fn fit(x: &[[f64; 4]], t: Targets, idx: &[usize], max_leaves: usize) -> Tree {
        let mut nodes = vec![Node::Leaf { value: leaf_value(&t, idx) }];
        // Open leaves: (node id, pending split).
        let mut frontier: Vec<(usize, SplitChoice)> = Vec::new();
        if let Some(s) = best_split(x, &t, idx) {
            frontier.push((0, s));
        }
        let mut leaves = 1;
        while leaves < max_leaves && !frontier.is_empty() {
            // Largest gain; ties go to the lowest node id.
            let pick = (0..frontier.len())
                .max_by(|&a, &b| {
                    frontier[a]
                        .1
                        .gain
                        .total_cmp(&frontier[b].1.gain)
                        .then(frontier[b].0.cmp(&frontier[a].0))
                })
                .expect("frontier is non-empty");
            let (id, split) = frontier.swap_remove(pick);
            let left_id = nodes.len();
            let right_id = left_id + 1;
            nodes.push(Node::Leaf { value: leaf_value(&t, &split.left) });
            nodes.push(Node::Leaf { value: leaf_value(&t, &split.right) });
            nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left: left_id, right: right_id };
            leaves += 1;
            if let Some(s) = best_split(x, &t, &split.left) {
                frontier.push((left_id, s));
            }
            if let Some(s) = best_split(x, &t, &split.right) {
                frontier.push((right_id, s));
            }
        }
        Tree { nodes }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn leaf(&self, x: &[f64; 4]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split { feature, threshold, left, right } => {
                    id = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn predict_value(&self, x: &[f64; 4]) -> f64 {
        self.leaf(x)[0]
    }

    pub fn class_scores(&self, x: &[f64; 4]) -> [f64; 3] {
        let v = self.leaf(x);
        [v[0], v[1], v[2]]
    }
}

/// First index of the maximum; earlier (alphabetically smaller) labels win ties.
pub fn argmax3(scores: &[f64; 3]) -> Location {
    let mut best = 0;
    for i in 1..3 {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    Location::ALL[best]
}

/// Bootstrap ensemble of fine trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaggedTrees {
    pub members: Vec<Tree>,
}

impl BaggedTrees {
    /// Tree `i` uses the `i`-th `fork()` of a generator seeded with `seed`
    /// and draws `n` bootstrap indices with `below(n)`.
    pub fn fit(x: &[[f64; 4]], t: Targets, seed: u64) -> Self {
        let n = x.len();
        let mut master = SplitMix64::new(seed);
        let members = (0..BAGGED_TREE_COUNT)
            .map(|_| {
                let mut rng = SplitMix64::new(master.fork());
                let idx: Vec<usize> = (0..n).map(|_| rng.below(n)).collect();
                Tree::fit(x, t, &idx, TreePreset::Fine.max_leaves())
            })
            .collect();
        Self { members }
    }

    pub fn predict_value(&self, x: &[f64; 4]) -> f64 {
        self.members.iter().map(|t| t.predict_value(x)).sum::<f64>() / self.members.len() as f64
    }

    /// Vote shares of the member trees' predicted labels.
    pub fn class_scores(&self, x: &[f64; 4]) -> [f64; 3] {
        let mut votes = [0.0; 3];
        for t in &self.members {
            votes[argmax3(&t.class_scores(x)).index()] += 1.0;
        }
        votes.map(|v| v / self.members.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<[f64; 4]> {
        (0..n).map(|i| {
            let t = i as f64 / n as f64;
            [t, (t * 7.0).sin(), 1.0 - t, (t * 3.0).cos()]
        }).collect()
    }

    #[test]
    fn leaf_budget_is_respected() {
        let x = grid(400);
        let y: Vec<f64> = x.iter().map(|r| (r[0] * 10.0).sin() * 5.0 + r[1]).collect();
        let all: Vec<usize> = (0..400).collect();
        for preset in [TreePreset::Fine, TreePreset::Medium, TreePreset::Coarse] {
            let tree = Tree::fit(&x, Targets::Regression(&y), &all, preset.max_leaves());
            assert_eq!(tree.leaf_count(), preset.max_leaves());
        }
    }

    #[test]
    fn step_function_is_learned_exactly() {
        let x = grid(100);
        let y: Vec<f64> = x.iter().map(|r| if r[0] < 0.5 { 1.0 } else { 3.0 }).collect();
        let all: Vec<usize> = (0..100).collect();
        let tree = Tree::fit(&x, Targets::Regression(&y), &all, 100);
        assert_eq!(tree.leaf_count(), 2);
        assert_eq!(tree.predict_value(&[0.2, 0.0, 0.0, 0.0]), 1.0);
        assert_eq!(tree.predict_value(&[0.8, 0.0, 0.0, 0.0]), 3.0);
    }

    #[test]
    fn constant_targets_give_single_leaf() {
        let x = grid(30);
        let y = vec![12.0; 30];
        let all: Vec<usize> = (0..30).collect();
        let tree = Tree::fit(&x, Targets::Regression(&y), &all, 100);
        assert_eq!(tree.nodes.len(), 1);
    }

    #[test]
    fn gini_split_separates_classes() {
        let x = grid(90);
        let labels: Vec<Location> = (0..90).map(|i| Location::ALL[i / 30]).collect();
        let all: Vec<usize> = (0..90).collect();
        let tree = Tree::fit(&x, Targets::Classification(&labels), &all, 4);
        for (i, r) in x.iter().enumerate() {
            assert_eq!(argmax3(&tree.class_scores(r)), labels[i]);
        }
        assert_eq!(tree.leaf_count(), 3);
    }

    #[test]
    fn argmax_ties_prefer_first_label() {
        assert_eq!(argmax3(&[0.5, 0.5, 0.0]), Location::A);
        assert_eq!(argmax3(&[0.0, 0.5, 0.5]), Location::B);
    }
}
