use serde::{Deserialize, Serialize};

use super::{majority, ClassifyError, ModelKind};
use crate::label::Label;
use crate::matrix::{squared_distance, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

/// Euclidean k-nearest-neighbours with uniform votes. Equal distances are
/// ordered by training row index.
#[derive(Clone, Debug)]
pub struct Knn {
    k: usize,
    rows: Matrix,
    labels: Vec<Label>,
}

impl Knn {
    pub fn fit(params: &KnnParams, x: &Matrix, y: &[Label]) -> Result<Self, ClassifyError> {
        if params.k == 0 || x.rows() < params.k {
            return Err(ClassifyError::Fit {
                kind: ModelKind::Knn,
                message: format!("k = {} needs at least k training rows, got {}", params.k, x.rows()),
            });
        }
        Ok(Knn { k: params.k, rows: x.clone(), labels: y.to_vec() })
    }

    /// Indices of the k nearest training rows.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self.rows.iter_rows().map(|r| squared_distance(r, row)).zip(0..).collect();
        let k = self.k;
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    fn votes(&self, row: &[f64]) -> [usize; 2] {
        let mut counts = [0; 2];
        for i in self.neighbours(row) {
            counts[self.labels[i].class_id()] += 1;
        }
        counts
    }

    pub fn predict(&self, row: &[f64]) -> Label {
        majority(self.votes(row))
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        self.votes(row)[1] as f64 / self.k as f64
    }
}
