//! One function per acceptance check. Each returns a short summary on
//! success and a diagnosis on failure.

use std::time::Instant;

use bestseller_core::bow;
use bestseller_core::classify::{
    self, objective_and_gradient, DecisionTree, ForestParams, GaussianNb, Hyperparameters, Kernel, Knn, KnnParams,
    MaxFeatures, ModelKind, ModelSpec, NbParams, RandomForest, Svm, SvmParams, TreeParams,
};
use bestseller_core::corpus::Corpus;
use bestseller_core::d2v::{self, loss_and_gradient, D2VConfig};
use bestseller_core::density::{self, kde_at, trapezoid};
use bestseller_core::evaluate::{
    self, cross_validate, split, CVScheme, CellFilter, ExperimentConfig, GridOptions, Preprocessing, StandardizeScope,
};
use bestseller_core::preprocess::{preprocess_document, LemmaLexicon, StopwordList};
use bestseller_core::project::{lda_axis, semaxis_axis, AxisMethod, ProjectionResult};
use bestseller_core::{EmbeddingKind, EmbeddingMatrix, Execution, Label, Matrix};
use rand::seq::SliceRandom;
use rand::Rng;

use super::*;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

fn random_labels<R: Rng>(r: &mut R, n: usize) -> Vec<Label> {
    loop {
        let y: Vec<Label> = (0..n).map(|_| if r.gen_bool(0.5) { Label::Success } else { Label::Other }).collect();
        if y.contains(&Label::Success) && y.contains(&Label::Other) {
            return y;
        }
    }
}

fn integer_matrix<R: Rng>(r: &mut R, n: usize, p: usize, lo: i32, hi: i32) -> Matrix {
    Matrix::from_vec(n, p, (0..n * p).map(|_| r.gen_range(lo..=hi) as f64).collect()).unwrap()
}

// ---- preprocessing ----

pub fn preprocessing_golden() -> Check {
    let start = Instant::now();
    let text = "It is difficult to live up to this kind of thing, and my thoughts drift to the auld schule-house and Domsie.";
    let tokens = preprocess_document(text, &StopwordList::builtin(), &LemmaLexicon::builtin());
    let elapsed = start.elapsed().as_secs_f64();
    let expected = ["difficult", "live", "kind", "thing", "thought", "drift", "auld", "schule", "house", "domsie"];
    ensure!(tokens == expected, "got {tokens:?}");
    ensure!(elapsed < 1.0, "took {elapsed:.3}s including lexicon load");
    Ok(format!("10 tokens match in {elapsed:.3}s"))
}

// ---- classifiers ----

pub fn knn_matches_brute_force() -> Check {
    let mut queries = 0;
    for seed in 0..30 {
        let mut r = rng(seed);
        let n = r.gen_range(5..=50);
        let p = r.gen_range(1..=3);
        // small integer grid so distance ties are common
        let x = integer_matrix(&mut r, n, p, -3, 3);
        let y = random_labels(&mut r, n);
        let model = Knn::fit(&KnnParams { k: 5 }, &x, &y).map_err(|e| e.to_string())?;
        let probes = integer_matrix(&mut r, 20, p, -4, 4);
        for q in probes.iter_rows().chain(x.iter_rows()) {
            let want = knn_oracle(&x, &y, 5, q);
            ensure!(model.predict(q) == want, "seed {seed}: query {q:?} predicted {} want {want}", model.predict(q));
            queries += 1;
        }
    }
    Ok(format!("{queries} queries agree"))
}

pub fn tree_matches_enumeration() -> Check {
    for seed in 0..300 {
        let mut r = rng(seed);
        let n = r.gen_range(2..=8);
        let p = r.gen_range(1..=3);
        let x = integer_matrix(&mut r, n, p, 0, 3);
        let y = random_labels(&mut r, n);
        let tree = DecisionTree::fit(&TreeParams::default(), &x, &y);
        let oracle = tree_oracle(&x, &y, &(0..n).collect::<Vec<_>>());
        ensure!(same_tree(&tree, 0, &oracle), "seed {seed}: tree {:?} oracle {oracle:?}", tree.nodes);
    }
    Ok("300 trees identical to exhaustive enumeration".into())
}

pub fn naive_bayes_matches_hand_posteriors() -> Check {
    // class means 1 and 5, variances 1: at x = 4 the log-odds are
    // (9 - 1) / 2 = 4, at x = 3 they are 0
    let x = Matrix::from_rows(&[[0.0], [2.0], [4.0], [6.0]]).unwrap();
    let y = [Label::Other, Label::Other, Label::Success, Label::Success];
    let nb = GaussianNb::fit(&NbParams::default(), &x, &y);
    let at4 = nb.log_posterior_difference(&[4.0]);
    let at3 = nb.log_posterior_difference(&[3.0]);
    ensure!((at4 - 4.0).abs() < 1e-6, "log-odds at 4 = {at4}");
    ensure!(at3.abs() < 1e-9, "log-odds at 3 = {at3}");
    for seed in 0..50 {
        let mut r = rng(seed);
        let n = r.gen_range(4..30);
        let x = random_matrix(n, 3, seed + 1000);
        let y = random_labels(&mut r, n);
        let nb = GaussianNb::fit(&NbParams::default(), &x, &y);
        for q in random_matrix(10, 3, seed + 2000).iter_rows() {
            let (got, want) = (nb.log_posterior_difference(q), nb_oracle(&x, &y, 1e-9, q));
            ensure!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "seed {seed}: {got} vs {want}");
        }
    }
    Ok("hand values and 500 random posteriors agree".into())
}

pub fn single_tree_forest_is_a_tree() -> Check {
    let params = ForestParams { n_trees: 1, bootstrap: false, max_features: MaxFeatures::All, ..ForestParams::default() };
    for seed in 0..20 {
        let mut r = rng(seed);
        let x = integer_matrix(&mut r, 30, 4, 0, 5);
        let y = random_labels(&mut r, 30);
        let forest = RandomForest::fit(&params, &x, &y, seed, Execution::Sequential);
        let tree = DecisionTree::fit(&TreeParams::default(), &x, &y);
        ensure!(forest.trees[0] == tree, "seed {seed}: forest tree differs from the plain tree");
        for q in integer_matrix(&mut r, 20, 4, 0, 5).iter_rows() {
            ensure!(forest.predict(q) == tree.predict(q), "seed {seed}: predictions differ");
        }
    }
    Ok("20 one-tree forests equal their tree".into())
}

pub fn svm_dual_matches_primal() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..4 {
        let (x, y) = gaussian_classes(3, [&[1.0, 0.5], &[-0.5, -1.0]], &[1.0, 1.0], seed);
        let ys: Vec<f64> = y.iter().map(|l| if *l == Label::Success { 1.0 } else { -1.0 }).collect();
        let params = SvmParams { kernel: Kernel::Linear, ..SvmParams::default() };
        let m = Svm::fit(&params, &x, &y).map_err(|e| e.to_string())?;
        ensure!(m.converged, "seed {seed}: SMO did not converge");
        let dual = -m.dual_objective;
        let mut w = [0.0; 2];
        for (sv, c) in m.support_vectors.iter_rows().zip(&m.coefficients) {
            w[0] += c * sv[0];
            w[1] += c * sv[1];
        }
        let at_solution = svm_primal(&w, -m.rho, &x, &ys, params.c);
        let grid = svm_primal_grid_min(&x, &ys, params.c);
        let gap = (grid - dual).abs().max((at_solution - grid).abs());
        worst = worst.max(gap);
        ensure!(gap <= 1e-3, "seed {seed}: dual {dual}, primal grid {grid}, primal at SMO solution {at_solution}");
    }
    Ok(format!("largest objective gap {worst:.2e}"))
}

pub fn logistic_gradient_matches_finite_differences() -> Check {
    let mut worst: f64 = 0.0;
    for probe in 0..100u64 {
        let mut r = rng(probe);
        let x = random_matrix(20, 3, probe + 500);
        let y: Vec<f64> = (0..20).map(|_| if r.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let params: Vec<f64> = (0..4).map(|_| normal(&mut r)).collect();
        let c = 1.0;
        let (_, g) = objective_and_gradient(&params, &x, &y, c);
        let h = 1e-5;
        let fd: Vec<f64> = (0..params.len())
            .map(|j| {
                let mut up = params.clone();
                let mut down = params.clone();
                up[j] += h;
                down[j] -= h;
                (objective_and_gradient(&up, &x, &y, c).0 - objective_and_gradient(&down, &x, &y, c).0) / (2.0 * h)
            })
            .collect();
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|a| a * a).sum::<f64>().sqrt());
        let rel = diff / scale.max(1e-12);
        worst = worst.max(rel);
        ensure!(rel <= 1e-5, "probe {probe}: relative error {rel:.3e}");
    }
    Ok(format!("worst relative error {worst:.2e} over 100 probes"))
}

// ---- doc2vec ----

pub fn d2v_gradient_matches_finite_differences() -> Check {
    let (dim, vocab) = (8, 12);
    let mut worst: f64 = 0.0;
    for probe in 0..100u64 {
        let mut r = rng(probe);
        let w = random_matrix(vocab, dim, probe + 7000).map(|v| 0.5 * v);
        let h: Vec<f64> = (0..dim).map(|_| 0.5 * normal(&mut r)).collect();
        let target = r.gen_range(0..vocab);
        let negatives: Vec<usize> = (0..5).map(|_| r.gen_range(0..vocab)).collect();
        let (_, grads) = loss_and_gradient(&h, target, &negatives, &w);
        let eps = 1e-5;
        let loss_at = |h: &[f64], w: &Matrix| loss_and_gradient(h, target, &negatives, w).0;
        let mut analytic = grads.h.clone();
        let mut numeric = Vec::new();
        for j in 0..dim {
            let (mut up, mut down) = (h.clone(), h.clone());
            up[j] += eps;
            down[j] -= eps;
            numeric.push((loss_at(&up, &w) - loss_at(&down, &w)) / (2.0 * eps));
        }
        let mut words: Vec<usize> = grads.outputs.iter().map(|(wd, _)| *wd).collect();
        words.sort();
        words.dedup();
        for &wd in &words {
            let mut total = vec![0.0; dim];
            for (_, g) in grads.outputs.iter().filter(|(x, _)| *x == wd) {
                for (t, v) in total.iter_mut().zip(g) {
                    *t += v;
                }
            }
            analytic.extend(total);
            for j in 0..dim {
                let (mut up, mut down) = (w.clone(), w.clone());
                up.set(wd, j, w.get(wd, j) + eps);
                down.set(wd, j, w.get(wd, j) - eps);
                numeric.push((loss_at(&h, &up) - loss_at(&h, &down)) / (2.0 * eps));
            }
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = diff / scale.max(1e-12);
        worst = worst.max(rel);
        ensure!(rel <= 1e-4, "probe {probe}: relative error {rel:.3e}");
    }
    Ok(format!("worst relative error {worst:.2e} over 100 probes"))
}

/// Two-topic toy corpus: even documents favour the first half of the
/// vocabulary, odd ones the second.
pub fn topic_corpus(n_docs: usize, vocab: usize, doc_len: usize, seed: u64) -> Corpus {
    let mut r = rng(seed);
    let docs = (0..n_docs)
        .map(|i| {
            let half = vocab / 2;
            let tokens = (0..doc_len)
                .map(|_| {
                    let own = r.gen_bool(0.8);
                    let base = if (i % 2 == 0) == own { 0 } else { half };
                    word(base + r.gen_range(0..half))
                })
                .collect();
            let label = if i % 2 == 0 { Label::Success } else { Label::Other };
            document(&format!("t{i:03}"), label, tokens)
        })
        .collect();
    Corpus::new(docs)
}

pub fn d2v_loss_decreases() -> Check {
    let corpus = topic_corpus(20, 30, 200, 3);
    let config = D2VConfig { dim: 16, epochs: 20, seed: 11, deterministic: true, ..D2VConfig::default() };
    let model = d2v::train(&corpus, &config).map_err(|e| e.to_string())?;
    let l = &model.training_loss_per_epoch;
    for e in 1..5 {
        ensure!(l[e] < l[e - 1], "epoch {} loss {} is not below {}; losses {:?}", e + 1, l[e], l[e - 1], &l[..5]);
    }
    Ok(format!("first five epoch losses {:.4?}", &l[..5]))
}

pub fn d2v_duplicate_documents_align() -> Check {
    // each document favours its own random subset of the vocabulary
    let mut r = rng(5);
    let vocab = 200;
    let docs = (0..30)
        .map(|i| {
            let favourites: Vec<usize> = (0..20).map(|_| r.gen_range(0..vocab)).collect();
            let tokens = (0..300)
                .map(|_| word(if r.gen_bool(0.7) { favourites[r.gen_range(0..20)] } else { r.gen_range(0..vocab) }))
                .collect();
            document(&format!("u{i:03}"), if i % 2 == 0 { Label::Success } else { Label::Other }, tokens)
        })
        .collect();
    let mut corpus = Corpus::new(docs);
    let mut dup = corpus.documents[0].clone();
    dup.id = "duplicate".into();
    corpus.documents.push(dup);
    let config = D2VConfig { dim: 32, epochs: 40, seed: 17, deterministic: true, ..D2VConfig::default() };
    let model = d2v::train(&corpus, &config).map_err(|e| e.to_string())?;
    let v = &model.doc_vectors;
    let n = v.rows();
    let pair = cosine(v.row(0), v.row(n - 1));
    let mut others = Vec::new();
    for i in 0..n - 1 {
        for j in i + 1..n - 1 {
            others.push(cosine(v.row(i), v.row(j)));
        }
    }
    others.sort_by(f64::total_cmp);
    let p95 = others[(0.95 * (others.len() - 1) as f64).round() as usize];
    ensure!(pair > p95, "duplicate cosine {pair:.4} does not exceed the 95th percentile {p95:.4}");
    Ok(format!("duplicate cosine {pair:.4} vs 95th percentile {p95:.4}"))
}

// ---- projections ----

fn as_embedding(x: Matrix) -> EmbeddingMatrix {
    let ids = (0..x.rows()).map(|i| format!("r{i}")).collect();
    EmbeddingMatrix::new(EmbeddingKind::D2v, ids, x).unwrap()
}

pub fn lda_matches_closed_form() -> Check {
    let (mut x, y) = gaussian_classes(400, [&[1.0, 0.5, -0.5, 0.2], &[0.0; 4]], &[3.0, 1.0, 0.3, 0.5], 21);
    // correlate two features so the scatter is not diagonal
    for i in 0..x.rows() {
        let v = x.get(i, 1) + 0.6 * x.get(i, 0);
        x.set(i, 1, v);
    }
    let (means, sw) = scatter(&x, &y);
    let delta: Vec<f64> = means[1].iter().zip(&means[0]).map(|(s, o)| s - o).collect();
    let want = solve(sw, delta);
    let all: Vec<usize> = (0..x.rows()).collect();
    let axis = lda_axis(&as_embedding(x), &y, &all, 0.0).map_err(|e| e.to_string())?;
    let cos = cosine(&axis.direction, &want);
    ensure!(cos >= 0.999, "cosine with S_W^-1 Δμ is {cos}");
    Ok(format!("cosine with S_W⁻¹Δμ {cos:.6}"))
}

pub fn lda_isotropic_is_semaxis() -> Check {
    let (x, y) = gaussian_classes(3000, [&[0.8, -0.3, 0.4, 0.0, 0.2], &[0.0; 5]], &[1.0; 5], 22);
    let all: Vec<usize> = (0..x.rows()).collect();
    let m = as_embedding(x);
    let lda = lda_axis(&m, &y, &all, 1e-3).map_err(|e| e.to_string())?;
    let sem = semaxis_axis(&m, &y, &all).map_err(|e| e.to_string())?;
    let cos = cosine(&lda.direction, &sem.direction);
    ensure!(cos >= 0.999, "cosine between LDA and SemAxis is {cos}");
    Ok(format!("cosine with SemAxis {cos:.6}"))
}

// ---- cross-validation ----

pub fn loo_matches_enumeration() -> Check {
    // hand-enumerated 1-NN outcomes on four points of a line
    let x = Matrix::from_rows(&[[0.0], [1.0], [3.0], [4.0]]).unwrap();
    let one_nn = ModelSpec::new(Hyperparameters::Knn(KnnParams { k: 1 }), 0);
    let cases = [
        ([Label::Other, Label::Other, Label::Success, Label::Success], 1.0),
        ([Label::Other, Label::Success, Label::Other, Label::Success], 0.0),
    ];
    for (y, want) in cases {
        let out = cross_validate(&x, &y, &one_nn, &CVScheme::loo(), Preprocessing::Raw, StandardizeScope::Fold, Execution::Sequential)
            .map_err(|e| e.to_string())?;
        ensure!(out.accuracy == want && out.std.is_none(), "labels {y:?}: accuracy {} want {want}", out.accuracy);
    }
    for seed in 0..10 {
        let mut r = rng(seed);
        let n = r.gen_range(5..=10);
        let x = random_matrix(n, 2, seed + 90);
        let mut y = random_labels(&mut r, n);
        // at least two of each class so every training fold has both
        y[0] = Label::Success;
        y[1] = Label::Success;
        y[2] = Label::Other;
        y[3] = Label::Other;
        for kind in ModelKind::ALL {
            let spec = ModelSpec::default_for(kind, seed);
            let spec = match kind {
                ModelKind::Knn => ModelSpec::new(Hyperparameters::Knn(KnnParams { k: 3 }), seed),
                _ => spec,
            };
            for prep in [Preprocessing::Raw, Preprocessing::Standardized] {
                let out = cross_validate(&x, &y, &spec, &CVScheme::loo(), prep, StandardizeScope::Fold, Execution::Sequential)
                    .map_err(|e| e.to_string())?;
                let mut correct = 0;
                for i in 0..n {
                    let train: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                    let xs = match prep {
                        Preprocessing::Raw => x.clone(),
                        Preprocessing::Standardized => bestseller_core::matrix::Scaler::fit(&x, &train).transform(&x),
                    };
                    let ty: Vec<Label> = train.iter().map(|&j| y[j]).collect();
                    let mut fold_spec = spec.clone();
                    fold_spec.seed = bestseller_core::seed::derive_index(bestseller_core::seed::derive(spec.seed, "fold"), i as u64);
                    let m = classify::fit(&fold_spec, &xs.select_rows(&train), &ty).map_err(|e| e.to_string())?;
                    if m.predict(&xs.select_rows(&[i])).map_err(|e| e.to_string())?[0] == y[i] {
                        correct += 1;
                    }
                }
                let want = correct as f64 / n as f64;
                ensure!(out.accuracy == want, "seed {seed} {kind} {prep}: {} vs enumerated {want}", out.accuracy);
            }
        }
    }
    Ok("hand cases and 120 enumerated LOO runs agree".into())
}

pub fn stratified_folds_balanced() -> Check {
    let labels: Vec<Label> = (0..219).map(|i| if i < 110 { Label::Success } else { Label::Other }).collect();
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let splits = split(labels.len(), &labels, &CVScheme::kfold(10, seed)).map_err(|e| e.to_string())?;
        ensure!(splits.len() == 10, "seed {seed}: {} folds", splits.len());
        let mut seen = vec![false; labels.len()];
        for s in &splits {
            for &i in &s.test {
                ensure!(!seen[i], "seed {seed}: index {i} in two test folds");
                seen[i] = true;
            }
            for class in [Label::Success, Label::Other] {
                let total = labels.iter().filter(|&&l| l == class).count() as f64;
                let here = s.test.iter().filter(|&&i| labels[i] == class).count() as f64;
                let dev = (here - total / 10.0).abs();
                worst = worst.max(dev);
                ensure!(dev <= 1.0, "seed {seed}: class {class} deviates by {dev}");
            }
        }
        ensure!(seen.iter().all(|&s| s), "seed {seed}: folds do not cover every index");
    }
    Ok(format!("largest per-fold class deviation {worst:.2} over 100 seeds"))
}

pub fn permutation_null() -> Check {
    let (x, y) = gaussian_classes(50, [&[1.0, 1.0, 0.0, 0.0, 0.0], &[0.0; 5]], &[1.0; 5], 31);
    let spec = ModelSpec::default_for(ModelKind::Lr, 0);
    let mut accs = Vec::new();
    for seed in 0..20 {
        let mut shuffled = y.clone();
        shuffled.shuffle(&mut rng(seed + 100));
        let out = cross_validate(&x, &shuffled, &spec, &CVScheme::kfold(10, seed), Preprocessing::Raw, StandardizeScope::Fold, Execution::Sequential)
            .map_err(|e| e.to_string())?;
        accs.push(out.accuracy);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let (lo, hi) = accs.iter().fold((1.0f64, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    ensure!((mean - 0.5).abs() <= 0.15, "mean shuffled-label accuracy {mean:.3} (range {lo:.2}..{hi:.2})");
    Ok(format!("mean {mean:.3} over 20 seeds (range {lo:.2}..{hi:.2})"))
}

// ---- end to end ----

fn bow_lr_loo(corpus: &Corpus) -> Result<f64, String> {
    let vocab = bow::build_vocabulary(corpus, 0.5).map_err(|e| e.to_string())?;
    let m = bow::bow_matrix(corpus, &vocab, Execution::Parallel).map_err(|e| e.to_string())?;
    let spec = ModelSpec::default_for(ModelKind::Lr, 0);
    let out = cross_validate(&m.values, &corpus.labels(), &spec, &CVScheme::loo(), Preprocessing::Standardized, StandardizeScope::Fold, Execution::Parallel)
        .map_err(|e| e.to_string())?;
    Ok(out.accuracy)
}

pub fn synthetic_signal_is_found() -> Check {
    let corpus = overlap_corpus(200, 100, 0.8, 2000, 41);
    let acc = bow_lr_loo(&corpus)?;
    ensure!(acc >= 0.95, "80% overlap: LOO accuracy {acc:.3}");
    Ok(format!("80% overlap: LOO accuracy {acc:.3}"))
}

pub fn synthetic_noise_is_chance() -> Check {
    let corpus = overlap_corpus(200, 100, 1.0, 2000, 42);
    let acc = bow_lr_loo(&corpus)?;
    ensure!((acc - 0.5).abs() <= 0.15, "no-signal LOO accuracy {acc:.3}");
    Ok(format!("100% overlap: LOO accuracy {acc:.3}"))
}

// ---- densities ----

pub fn kde_curves_integrate_to_one() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..30u64 {
        let mut r = rng(seed);
        let (ns, no) = (r.gen_range(2..60), r.gen_range(2..60));
        let scale = 10f64.powf(r.gen_range(-2.0..2.0));
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for (n, label, shift) in [(ns, Label::Success, 1.0), (no, Label::Other, -1.0)] {
            for _ in 0..n {
                scores.push(scale * (shift + normal(&mut r)));
                labels.push(label);
            }
        }
        let result = ProjectionResult {
            doc_ids: (0..scores.len()).map(|i| i.to_string()).collect(),
            labels,
            scores,
            method: AxisMethod::SemAxis,
            embedding: EmbeddingKind::Bow,
            skipped: Vec::new(),
        };
        let curve = density::kde(&result, 512).map_err(|e| e.to_string())?;
        for label in [Label::Success, Label::Other] {
            let area = trapezoid(&curve.grid, curve.class(label).unwrap());
            worst = worst.max((area - 1.0).abs());
            ensure!((area - 1.0).abs() <= 1e-3, "seed {seed} {label}: area {area}");
        }
    }
    Ok(format!("worst |area - 1| = {worst:.2e} over 60 curves"))
}

pub fn kde_point_pair_density() -> Check {
    // points 0 and 2 with h = 1: at x = 1 both kernels give φ(1)
    let d = kde_at(&[0.0, 2.0], 1.0, 1.0);
    ensure!((d - 0.24197).abs() <= 1e-4, "density {d}");
    Ok(format!("density {d:.6}"))
}

// ---- determinism ----

pub fn grid_is_deterministic() -> Check {
    let corpus = overlap_corpus(40, 30, 0.8, 300, 51);
    let config = ExperimentConfig::parse(
        "[bow]\nmin_fraction = 0.5\n[d2v]\ndims = 8\nepochs = 3\n[models]\nmodels = knn,lr,nb,dt,rf,svm\nrf_trees = 10\n\
         [validation]\nschemes = loo,kfold\nk = 5\nseed = 9\n",
    )
    .map_err(|e| e.to_string())?;
    let options = GridOptions { exec: Execution::Parallel, deterministic: true, cache_dir: None, filter: CellFilter::default() };
    let a = evaluate::run_grid(&corpus, &config, &options).map_err(|e| e.to_string())?;
    let b = evaluate::run_grid(&corpus, &config, &options).map_err(|e| e.to_string())?;
    ensure!(a.failed_cells() == 0, "{} failed cells", a.failed_cells());
    ensure!(a.body.cells.len() == 2 * 2 * 6 * 2, "{} cells", a.body.cells.len());
    ensure!(a.body_json() == b.body_json(), "report bodies differ");
    Ok(format!("{} cells, identical {}-byte bodies", a.body.cells.len(), a.body_json().len()))
}

pub fn d2v_is_deterministic() -> Check {
    let corpus = topic_corpus(12, 40, 150, 61);
    let config = D2VConfig { dim: 16, epochs: 5, seed: 3, deterministic: true, ..D2VConfig::default() };
    let a = d2v::train_with(&corpus, &config, Execution::Parallel).map_err(|e| e.to_string())?;
    let b = d2v::train_with(&corpus, &config, Execution::Parallel).map_err(|e| e.to_string())?;
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure!(bits(&a.doc_vectors) == bits(&b.doc_vectors), "doc vectors differ");
    Ok(format!("{} doc vectors bit-identical", a.doc_vectors.rows()))
}
