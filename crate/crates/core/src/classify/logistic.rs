//! L2-regularised logistic regression fitted with L-BFGS.

use serde::{Deserialize, Serialize};

use crate::label::Label;
use crate::matrix::{dot, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrParams {
    /// Inverse regularisation strength.
    pub c: f64,
    pub max_iter: usize,
    /// Stop when the largest absolute gradient component falls below this.
    pub tol: f64,
    pub history: usize,
}

impl Default for LrParams {
    fn default() -> Self {
        LrParams { c: 1.0, max_iter: 100, tol: 1e-4, history: 10 }
    }
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `½‖w‖² + C Σ log(1 + exp(-yᵢ(w·xᵢ + b)))` and its gradient, with
/// `params = [w…, b]` and `y_signed[i] ∈ {-1, +1}`. The intercept is not
/// penalised.
pub fn objective_and_gradient(params: &[f64], x: &Matrix, y_signed: &[f64], c: f64) -> (f64, Vec<f64>) {
    let p = x.cols();
    let (w, b) = (&params[..p], params[p]);
    let mut f = 0.5 * dot(w, w);
    let mut g: Vec<f64> = w.to_vec();
    g.push(0.0);
    for (row, &y) in x.iter_rows().zip(y_signed) {
        let margin = y * (dot(w, row) + b);
        f += c * log1p_exp(-margin);
        // d/dmargin log(1+e^-m) = -sigmoid(-m)
        let coef = -c * y * sigmoid(-margin);
        for (gj, xj) in g[..p].iter_mut().zip(row) {
            *gj += coef * xj;
        }
        g[p] += coef;
    }
    (f, g)
}

#[derive(Clone, Debug)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl LogisticRegression {
    pub fn fit(params: &LrParams, x: &Matrix, y: &[Label]) -> Self {
        let y_signed: Vec<f64> = y.iter().map(|l| if *l == Label::Success { 1.0 } else { -1.0 }).collect();
        let eval = |theta: &[f64]| objective_and_gradient(theta, x, &y_signed, params.c);
        let (theta, iterations, converged) = lbfgs(eval, vec![0.0; x.cols() + 1], params);
        if !converged {
            log::warn!("logistic regression stopped after {iterations} iterations without reaching tol {}", params.tol);
        }
        let intercept = theta[x.cols()];
        let mut weights = theta;
        weights.truncate(x.cols());
        LogisticRegression { weights, intercept, iterations, converged }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.intercept
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }

    pub fn predict(&self, row: &[f64]) -> Label {
        if self.decision(row) > 0.0 {
            Label::Success
        } else {
            Label::Other
        }
    }
}

/// Limited-memory BFGS with a backtracking Armijo line search.
/// Returns (argmin, iterations, converged).
fn lbfgs<F>(eval: F, mut x: Vec<f64>, params: &LrParams) -> (Vec<f64>, usize, bool)
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (mut f, mut g) = eval(&x);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    for iter in 0..params.max_iter {
        if max_abs(&g) <= params.tol {
            return (x, iter, true);
        }
        // two-loop recursion
        let mut q = g.clone();
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alpha[i] = rho * dot(&s_hist[i], &q);
            for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        let gamma = if m > 0 { dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]) } else { 1.0 / max_abs(&g).max(1.0) };
        q.iter_mut().for_each(|v| *v *= gamma);
        for i in 0..m {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &q);
            for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // not a descent direction; restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let mut step = 1.0;
        let (x_new, f_new, g_new) = loop {
            let cand: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let (fc, gc) = eval(&cand);
            if fc <= f + 1e-4 * step * slope {
                break (cand, fc, gc);
            }
            step *= 0.5;
            if step < 1e-20 {
                return (x, iter, false);
            }
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &yv) > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
            if s_hist.len() == params.history {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(yv);
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }
    let converged = max_abs(&g) <= params.tol;
    (x, params.max_iter, converged)
}
