use serde::{Deserialize, Serialize};

use crate::label::Label;
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NbParams {
    /// Added to every variance, as a fraction of the largest feature variance.
    pub var_smoothing: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { var_smoothing: 1e-9 }
    }
}

/// Gaussian naive Bayes with class priors from training frequencies.
#[derive(Clone, Debug)]
pub struct GaussianNb {
    pub log_prior: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    pub epsilon: f64,
}

fn column_stats(x: &Matrix, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let p = x.cols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for &i in rows {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; p];
    for &i in rows {
        for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

impl GaussianNb {
    pub fn fit(params: &NbParams, x: &Matrix, y: &[Label]) -> Self {
        let all: Vec<usize> = (0..x.rows()).collect();
        let (_, overall_var) = column_stats(x, &all);
        let epsilon = params.var_smoothing * overall_var.iter().copied().fold(0.0, f64::max);
        let mut means: [Vec<f64>; 2] = Default::default();
        let mut variances: [Vec<f64>; 2] = Default::default();
        let mut log_prior = [0.0; 2];
        for class in 0..2 {
            let rows: Vec<usize> = all.iter().copied().filter(|&i| y[i].class_id() == class).collect();
            let (m, mut v) = column_stats(x, &rows);
            v.iter_mut().for_each(|s| *s += epsilon);
            means[class] = m;
            variances[class] = v;
            log_prior[class] = (rows.len() as f64 / x.rows() as f64).ln();
        }
        GaussianNb { log_prior, means, variances, epsilon }
    }

    pub fn joint_log_likelihood(&self, row: &[f64], class: usize) -> f64 {
        let mut ll = self.log_prior[class];
        for ((x, m), v) in row.iter().zip(&self.means[class]).zip(&self.variances[class]) {
            ll -= 0.5 * (2.0 * std::f64::consts::PI * v).ln() + (x - m) * (x - m) / (2.0 * v);
        }
        ll
    }

    pub fn log_posterior_difference(&self, row: &[f64]) -> f64 {
        self.joint_log_likelihood(row, 1) - self.joint_log_likelihood(row, 0)
    }

    pub fn predict(&self, row: &[f64]) -> Label {
        if self.log_posterior_difference(row) > 0.0 {
            Label::Success
        } else {
            Label::Other
        }
    }
}
