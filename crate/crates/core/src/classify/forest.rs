use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, FeaturePolicy, TreeParams};
use super::majority;
use crate::label::Label;
use crate::matrix::Matrix;
use crate::par::{self, Execution};
use crate::seed;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// `max(1, floor(sqrt(p)))`
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => p,
            MaxFeatures::Count(n) => n.clamp(1, p.max(1)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, bootstrap: true, max_features: MaxFeatures::Sqrt, tree: TreeParams::default() }
    }
}

/// Bagged CART trees with per-split feature subsampling; majority vote.
#[derive(Clone, Debug)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(params: &ForestParams, x: &Matrix, y: &[Label], seed: u64, exec: Execution) -> Self {
        let n = x.rows();
        let max_features = params.max_features.resolve(x.cols());
        let base = seed::derive(seed, "random-forest");
        let trees = par::map_indices(exec, params.n_trees.max(1), |t| {
            let mut rng = seed::rng(seed::derive_index(base, t as u64));
            let samples: Vec<usize> =
                if params.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
            let mut policy = FeaturePolicy { max_features, rng: Some(&mut rng) };
            DecisionTree::fit_samples(&params.tree, x, y, &samples, &mut policy)
        });
        RandomForest { trees }
    }

    fn votes(&self, row: &[f64]) -> [usize; 2] {
        let mut v = [0; 2];
        for t in &self.trees {
            v[t.predict(row).class_id()] += 1;
        }
        v
    }

    pub fn predict(&self, row: &[f64]) -> Label {
        majority(self.votes(row))
    }

    pub fn vote_fraction(&self, row: &[f64]) -> f64 {
        self.votes(row)[1] as f64 / self.trees.len() as f64
    }
}
