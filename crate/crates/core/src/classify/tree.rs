//! CART classification trees with Gini impurity.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::majority;
use crate::label::Label;
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Nodes with fewer samples become leaves.
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { min_samples_split: 2, max_depth: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf { counts: [usize; 2] },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Nodes are stored in an arena; the root is node 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// `n_left·gini_left + n_right·gini_right`
    pub impurity: f64,
    purity: Purity,
}

/// `Σ_side (c0² + c1²) / n_side` as an exact fraction; larger is purer.
/// Comparing these by cross-multiplication keeps equal partitions equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of(left: [usize; 2], right: [usize; 2]) -> Self {
        let sq = |c: [usize; 2]| (c[0] * c[0] + c[1] * c[1]) as u128;
        let (nl, nr) = ((left[0] + left[1]) as u128, (right[0] + right[1]) as u128);
        Purity { num: sq(left) * nr + sq(right) * nl, den: nl * nr }
    }

    /// Impurity is lower when purity is higher.
    fn impurity_cmp(&self, other: &Purity) -> std::cmp::Ordering {
        (other.num * self.den).cmp(&(self.num * other.den))
    }
}

/// Weighted Gini of a two-child partition from class counts.
pub fn partition_impurity(left: [usize; 2], right: [usize; 2]) -> f64 {
    let part = |c: [usize; 2]| {
        let n = (c[0] + c[1]) as f64;
        if n == 0.0 {
            0.0
        } else {
            n - ((c[0] * c[0] + c[1] * c[1]) as f64) / n
        }
    };
    part(left) + part(right)
}

/// True when `a` should replace the incumbent `b`: lower impurity, then
/// lower feature index, then lower threshold.
pub fn better(a: &SplitChoice, b: &SplitChoice) -> bool {
    a.purity
        .impurity_cmp(&b.purity)
        .then(a.feature.cmp(&b.feature))
        .then(a.threshold.total_cmp(&b.threshold))
        .is_lt()
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi || !m.is_finite() {
        lo
    } else {
        m
    }
}

/// Best threshold on one feature, or `None` if the feature is constant over
/// `samples`.
pub fn best_split_on_feature(x: &Matrix, y: &[Label], samples: &[usize], feature: usize) -> Option<SplitChoice> {
    let mut order: Vec<(f64, usize)> = samples.iter().map(|&i| (x.get(i, feature), y[i].class_id())).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = [0usize; 2];
    for &(_, c) in &order {
        total[c] += 1;
    }
    let mut left = [0usize; 2];
    let mut best: Option<SplitChoice> = None;
    for k in 0..order.len() - 1 {
        left[order[k].1] += 1;
        let (lo, hi) = (order[k].0, order[k + 1].0);
        if lo == hi {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let cand = SplitChoice {
            feature,
            threshold: midpoint(lo, hi),
            impurity: partition_impurity(left, right),
            purity: Purity::of(left, right),
        };
        if best.as_ref().is_none_or(|b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    best
}

pub(crate) struct FeaturePolicy<'a, R: Rng> {
    /// Stop after this many non-constant features have been examined.
    pub max_features: usize,
    pub rng: Option<&'a mut R>,
}

impl DecisionTree {
    pub fn fit(params: &TreeParams, x: &Matrix, y: &[Label]) -> Self {
        let samples: Vec<usize> = (0..x.rows()).collect();
        let mut policy: FeaturePolicy<'_, rand_chacha::ChaCha8Rng> = FeaturePolicy { max_features: x.cols(), rng: None };
        Self::fit_samples(params, x, y, &samples, &mut policy)
    }

    /// Grows a tree over `samples` (which may repeat rows, as in a bootstrap).
    pub(crate) fn fit_samples<R: Rng>(
        params: &TreeParams,
        x: &Matrix,
        y: &[Label],
        samples: &[usize],
        policy: &mut FeaturePolicy<'_, R>,
    ) -> Self {
        let mut tree = DecisionTree { nodes: Vec::new() };
        tree.grow(params, x, y, samples.to_vec(), 0, policy);
        tree
    }

    fn grow<R: Rng>(
        &mut self,
        params: &TreeParams,
        x: &Matrix,
        y: &[Label],
        samples: Vec<usize>,
        depth: usize,
        policy: &mut FeaturePolicy<'_, R>,
    ) -> usize {
        let id = self.nodes.len();
        let mut counts = [0usize; 2];
        for &i in &samples {
            counts[y[i].class_id()] += 1;
        }
        self.nodes.push(Node::Leaf { counts });
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || samples.len() < params.min_samples_split || params.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let mut features: Vec<usize> = (0..x.cols()).collect();
        if let Some(rng) = policy.rng.as_deref_mut() {
            features.shuffle(rng);
        }
        let mut best: Option<SplitChoice> = None;
        let mut visited = 0;
        for f in features {
            if visited >= policy.max_features {
                break;
            }
            if let Some(c) = best_split_on_feature(x, y, &samples, f) {
                visited += 1;
                if best.as_ref().is_none_or(|b| better(&c, b)) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else { return id };
        let (l, r): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| x.get(i, split.feature) <= split.threshold);
        let left = self.grow(params, x, y, l, depth + 1, policy);
        let right = self.grow(params, x, y, r, depth + 1, policy);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }

    fn leaf_counts(&self, row: &[f64]) -> [usize; 2] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return *counts,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> Label {
        majority(self.leaf_counts(row))
    }

    pub fn success_fraction(&self, row: &[f64]) -> f64 {
        let c = self.leaf_counts(row);
        c[1] as f64 / (c[0] + c[1]) as f64
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
