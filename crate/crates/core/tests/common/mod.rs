//! Synthetic data and independent reference implementations shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

pub mod checks;

use bestseller_core::classify::{DecisionTree, Node};
use bestseller_core::corpus::{Corpus, Document};
use bestseller_core::{Label, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draw (Box-Muller).
pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `n` rows per class; class `c` has mean `means[c]` and per-feature
/// standard deviations `scales`. Success rows come first.
pub fn gaussian_classes(n: usize, means: [&[f64]; 2], scales: &[f64], seed: u64) -> (Matrix, Vec<Label>) {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, label) in [(0, Label::Success), (1, Label::Other)] {
        for _ in 0..n {
            rows.push(means[c].iter().zip(scales).map(|(m, s)| m + s * normal(&mut r)).collect::<Vec<f64>>());
            labels.push(label);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), labels)
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| normal(&mut r)).collect()).unwrap()
}

pub fn document(id: &str, label: Label, tokens: Vec<String>) -> Document {
    Document {
        id: id.to_string(),
        title: format!("Title {id}"),
        author: format!("Author {id}"),
        year: 1900,
        label,
        subject: None,
        raw_text: tokens.join(" "),
        tokens: Some(tokens),
    }
}

/// Alphabetic pseudo-word for index `i` ("wa", "wb", ... "wba", ...).
pub fn word(i: usize) -> String {
    let mut s = String::from("w");
    let mut n = i;
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    s
}

/// Two classes of `n_docs / 2` documents each. Each class draws tokens
/// uniformly from its own `vocab`-word list; the lists share
/// `round(overlap · vocab)` words.
pub fn overlap_corpus(n_docs: usize, vocab: usize, overlap: f64, doc_len: usize, seed: u64) -> Corpus {
    let shared = (overlap * vocab as f64).round() as usize;
    let success_words: Vec<String> = (0..vocab).map(word).collect();
    let other_words: Vec<String> = (0..shared).chain(vocab..2 * vocab - shared).map(word).collect();
    let mut r = rng(seed);
    let docs = (0..n_docs)
        .map(|i| {
            let (label, words) =
                if i % 2 == 0 { (Label::Success, &success_words) } else { (Label::Other, &other_words) };
            let tokens = (0..doc_len).map(|_| words[r.gen_range(0..words.len())].clone()).collect();
            document(&format!("doc{i:04}"), label, tokens)
        })
        .collect();
    Corpus::new(docs)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Class means and the pooled within-class scatter matrix.
pub fn scatter(x: &Matrix, y: &[Label]) -> ([Vec<f64>; 2], Vec<Vec<f64>>) {
    let p = x.cols();
    let mut means: [Vec<f64>; 2] = [vec![0.0; p], vec![0.0; p]];
    let mut counts = [0.0; 2];
    for (row, l) in x.iter_rows().zip(y) {
        let c = l.class_id();
        counts[c] += 1.0;
        for j in 0..p {
            means[c][j] += row[j];
        }
    }
    for c in 0..2 {
        means[c].iter_mut().for_each(|m| *m /= counts[c]);
    }
    let mut sw = vec![vec![0.0; p]; p];
    for (row, l) in x.iter_rows().zip(y) {
        let m = &means[l.class_id()];
        for a in 0..p {
            for b in 0..p {
                sw[a][b] += (row[a] - m[a]) * (row[b] - m[b]);
            }
        }
    }
    (means, sw)
}

/// Majority label among the `k` nearest rows by a full scan; equal
/// distances go to the lower row index, vote ties to Other.
pub fn knn_oracle(x: &Matrix, y: &[Label], k: usize, q: &[f64]) -> Label {
    let mut d: Vec<(f64, usize)> = (0..x.rows())
        .map(|i| (x.row(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let succ = d[..k].iter().filter(|(_, i)| y[*i] == Label::Success).count();
    if 2 * succ > k {
        Label::Success
    } else {
        Label::Other
    }
}

#[derive(Debug)]
pub enum OracleTree {
    Leaf([usize; 2]),
    Split { feature: usize, threshold: f64, left: Box<OracleTree>, right: Box<OracleTree> },
}

/// CART by exhaustive enumeration of every (feature, midpoint) split,
/// scoring partitions exactly with integer arithmetic.
pub fn tree_oracle(x: &Matrix, y: &[Label], rows: &[usize]) -> OracleTree {
    let mut counts = [0usize; 2];
    for &i in rows {
        counts[y[i].class_id()] += 1;
    }
    if counts[0] == 0 || counts[1] == 0 || rows.len() < 2 {
        return OracleTree::Leaf(counts);
    }
    // maximise Σ_side Σ_c n_c² / n_side, kept as the fraction num/den
    let mut best: Option<(u128, u128, usize, f64)> = None;
    for f in 0..x.cols() {
        let mut values: Vec<f64> = rows.iter().map(|&i| x.get(i, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let mut l = [0u128; 2];
            let mut r = [0u128; 2];
            for &i in rows {
                let side = if x.get(i, f) <= t { &mut l } else { &mut r };
                side[y[i].class_id()] += 1;
            }
            let (nl, nr) = (l[0] + l[1], r[0] + r[1]);
            let num = (l[0] * l[0] + l[1] * l[1]) * nr + (r[0] * r[0] + r[1] * r[1]) * nl;
            let den = nl * nr;
            let better = match best {
                None => true,
                Some((bn, bd, bf, bt)) => {
                    let lhs = num * bd;
                    let rhs = bn * den;
                    lhs > rhs || (lhs == rhs && (f < bf || (f == bf && t < bt)))
                }
            };
            if better {
                best = Some((num, den, f, t));
            }
        }
    }
    let Some((_, _, feature, threshold)) = best else { return OracleTree::Leaf(counts) };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.get(i, feature) <= threshold);
    OracleTree::Split {
        feature,
        threshold,
        left: Box::new(tree_oracle(x, y, &l)),
        right: Box::new(tree_oracle(x, y, &r)),
    }
}

/// Structural equality of a fitted tree and the oracle tree.
pub fn same_tree(tree: &DecisionTree, node: usize, oracle: &OracleTree) -> bool {
    match (&tree.nodes[node], oracle) {
        (Node::Leaf { counts }, OracleTree::Leaf(c)) => counts == c,
        (
            Node::Split { feature, threshold, left, right },
            OracleTree::Split { feature: f, threshold: t, left: l, right: r },
        ) => {
            feature == f
                && (threshold - t).abs() <= 1e-12 * t.abs().max(1.0)
                && same_tree(tree, *left, l)
                && same_tree(tree, *right, r)
        }
        _ => false,
    }
}

/// Gaussian naive Bayes log-posterior difference (Success minus Other),
/// computed directly from the definition.
pub fn nb_oracle(x: &Matrix, y: &[Label], smoothing: f64, q: &[f64]) -> f64 {
    let n = x.rows() as f64;
    let p = x.cols();
    let mut max_var: f64 = 0.0;
    for j in 0..p {
        let col: Vec<f64> = (0..x.rows()).map(|i| x.get(i, j)).collect();
        let m = col.iter().sum::<f64>() / n;
        max_var = max_var.max(col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n);
    }
    let eps = smoothing * max_var;
    let jll = |label: Label| {
        let rows: Vec<usize> = (0..x.rows()).filter(|&i| y[i] == label).collect();
        let nc = rows.len() as f64;
        let mut total = (nc / n).ln();
        for j in 0..p {
            let m = rows.iter().map(|&i| x.get(i, j)).sum::<f64>() / nc;
            let v = rows.iter().map(|&i| (x.get(i, j) - m).powi(2)).sum::<f64>() / nc + eps;
            total += -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (q[j] - m).powi(2) / (2.0 * v);
        }
        total
    };
    jll(Label::Success) - jll(Label::Other)
}

/// Soft-margin primal `½‖w‖² + C Σ max(0, 1 − y(w·x + b))`.
pub fn svm_primal(w: &[f64], b: f64, x: &Matrix, y: &[f64], c: f64) -> f64 {
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(row, yi)| (1.0 - yi * (row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b)).max(0.0))
        .sum();
    reg + c * hinge
}

/// Minimum of the 2-feature linear primal by coarse-to-fine grid search
/// over (w1, w2, b).
pub fn svm_primal_grid_min(x: &Matrix, y: &[f64], c: f64) -> f64 {
    assert_eq!(x.cols(), 2);
    let mut center = [0.0; 3];
    let mut half = 4.0;
    let mut best = f64::INFINITY;
    for _ in 0..7 {
        let steps = 40;
        let h = half / steps as f64;
        let mut arg = center;
        for i in -steps..=steps {
            for j in -steps..=steps {
                for k in -steps..=steps {
                    let p = [center[0] + i as f64 * h, center[1] + j as f64 * h, center[2] + k as f64 * h];
                    let v = svm_primal(&p[..2], p[2], x, y, c);
                    if v < best {
                        best = v;
                        arg = p;
                    }
                }
            }
        }
        center = arg;
        half = 4.0 * h;
    }
    best
}
