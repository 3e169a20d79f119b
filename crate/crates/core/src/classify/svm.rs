//! C-SVM trained with an SMO solver using second-order working-set
//! selection.

use serde::{Deserialize, Serialize};

use super::{ClassifyError, ModelKind};
use crate::label::Label;
use crate::matrix::{dot, squared_distance, Matrix};

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Rbf,
    Linear,
}

impl std::str::FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rbf" => Ok(Kernel::Rbf),
            "linear" => Ok(Kernel::Linear),
            other => Err(format!("unknown kernel {other:?} (expected rbf or linear)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    /// `1 / (p · Var(X))` over all entries of the training matrix.
    Scale,
    Value(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: Kernel,
    pub gamma: Gamma,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, kernel: Kernel::Rbf, gamma: Gamma::Scale, tol: 1e-3, max_iter: 10_000 }
    }
}

#[derive(Clone, Debug)]
pub struct Svm {
    pub kernel: Kernel,
    pub gamma: f64,
    /// Dual coefficients for every training row, in row order.
    pub alphas: Vec<f64>,
    pub support_vectors: Matrix,
    /// `alpha_i · y_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub rho: f64,
    /// `½ αᵀQα − Σα` at the solution.
    pub dual_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn kernel_value(kernel: Kernel, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kernel {
        Kernel::Rbf => (-gamma * squared_distance(a, b)).exp(),
        Kernel::Linear => dot(a, b),
    }
}

pub fn resolve_gamma(gamma: Gamma, x: &Matrix) -> f64 {
    match gamma {
        Gamma::Value(g) => g,
        Gamma::Scale => {
            let v = x.entry_variance();
            if v > 0.0 {
                1.0 / (x.cols() as f64 * v)
            } else {
                1.0
            }
        }
    }
}

impl Svm {
    pub fn fit(params: &SvmParams, x: &Matrix, labels: &[Label]) -> Result<Self, ClassifyError> {
        let fail = |message: String| Err(ClassifyError::Fit { kind: ModelKind::Svm, message });
        if !(params.c > 0.0) {
            return fail(format!("C must be positive, got {}", params.c));
        }
        let gamma = resolve_gamma(params.gamma, x);
        if params.kernel == Kernel::Rbf && !(gamma > 0.0 && gamma.is_finite()) {
            return fail(format!("gamma must be positive, got {gamma}"));
        }
        let n = x.rows();
        let c = params.c;
        let y: Vec<f64> = labels.iter().map(|l| if *l == Label::Success { 1.0 } else { -1.0 }).collect();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = kernel_value(params.kernel, gamma, x.row(i), x.row(j));
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];

        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let is_upper = |a: f64| a >= c;
        let is_lower = |a: f64| a <= 0.0;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < params.max_iter {
            // i: maximal violating index from the "up" set
            let mut gmax = f64::NEG_INFINITY;
            let mut i_sel = None;
            for t in 0..n {
                let up = if y[t] > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
                if up && -y[t] * grad[t] >= gmax {
                    gmax = -y[t] * grad[t];
                    i_sel = Some(t);
                }
            }
            let mut gmax2 = f64::NEG_INFINITY;
            let mut j_sel = None;
            let mut obj_min = f64::INFINITY;
            if let Some(i) = i_sel {
                for t in 0..n {
                    let low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
                    if !low {
                        continue;
                    }
                    gmax2 = gmax2.max(y[t] * grad[t]);
                    let diff = gmax + y[t] * grad[t];
                    if diff > 0.0 {
                        let quad = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
                        let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= obj_min {
                            obj_min = obj;
                            j_sel = Some(t);
                        }
                    }
                }
            }
            if gmax + gmax2 < params.tol {
                converged = true;
                break;
            }
            let (Some(i), Some(j)) = (i_sel, j_sel) else {
                converged = true;
                break;
            };
            iterations += 1;

            let (old_ai, old_aj) = (alpha[i], alpha[j]);
            let quad = {
                let v = k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j];
                if v > 0.0 { v } else { TAU }
            };
            if y[i] != y[j] {
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_ai, alpha[j] - old_aj);
            for t in 0..n {
                grad[t] += q(t, i) * di + q(t, j) * dj;
            }
        }
        if !converged {
            log::warn!("SVM solver stopped at the iteration cap ({}) before reaching tol {}", params.max_iter, params.tol);
        }

        let rho = {
            let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut nr_free, mut sum_free) = (0usize, 0.0);
            for t in 0..n {
                let yg = y[t] * grad[t];
                if is_upper(alpha[t]) {
                    if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
                } else if is_lower(alpha[t]) {
                    if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
                } else {
                    nr_free += 1;
                    sum_free += yg;
                }
            }
            if nr_free > 0 { sum_free / nr_free as f64 } else { (ub + lb) / 2.0 }
        };
        let dual_objective = alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>() / 2.0;
        let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
        Ok(Svm {
            kernel: params.kernel,
            gamma,
            coefficients: support.iter().map(|&t| alpha[t] * y[t]).collect(),
            support_vectors: x.select_rows(&support),
            alphas: alpha,
            rho,
            dual_objective,
            iterations,
            converged,
        })
    }

    /// Signed margin; positive means Success.
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.support_vectors
            .iter_rows()
            .zip(&self.coefficients)
            .map(|(sv, c)| c * kernel_value(self.kernel, self.gamma, sv, row))
            .sum::<f64>()
            - self.rho
    }

    pub fn predict(&self, row: &[f64]) -> Label {
        if self.decision(row) > 0.0 {
            Label::Success
        } else {
            Label::Other
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label::{Other, Success};

    #[test]
    fn two_point_hard_margin() {
        let x = Matrix::from_rows(&[[-1.0], [1.0]]).unwrap();
        let p = SvmParams { kernel: Kernel::Linear, c: 10.0, ..SvmParams::default() };
        let m = Svm::fit(&p, &x, &[Other, Success]).unwrap();
        assert!(m.converged);
        assert!((m.alphas[0] - 0.5).abs() < 1e-9 && (m.alphas[1] - 0.5).abs() < 1e-9);
        assert!(m.rho.abs() < 1e-9);
        assert!((m.dual_objective + 0.5).abs() < 1e-9);
        assert!((m.decision(&[1.0]) - 1.0).abs() < 1e-9);
        assert!((m.decision(&[-1.0]) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn scale_gamma() {
        let x = Matrix::from_rows(&[[0.0, 2.0], [2.0, 0.0]]).unwrap();
        assert_eq!(resolve_gamma(Gamma::Scale, &x), 0.5);
        let c = Matrix::from_rows(&[[3.0], [3.0]]).unwrap();
        assert_eq!(resolve_gamma(Gamma::Scale, &c), 1.0);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [0.2], [0.3], [0.4], [0.5]]).unwrap();
        let y = [Other, Success, Other, Success, Other, Success];
        let p = SvmParams { max_iter: 1, ..SvmParams::default() };
        let m = Svm::fit(&p, &x, &y).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 1);
    }
}
