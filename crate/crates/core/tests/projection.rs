mod common;

use bestseller_core::density::kde_at;
use bestseller_core::project::{loo_fold, loo_projection, AxisMethod, LooOptions};
use bestseller_core::{EmbeddingKind, EmbeddingMatrix, Execution, Label};
use common::checks;
use common::*;
use proptest::prelude::*;

fn pass(check: checks::Check) {
    if let Err(why) = check {
        panic!("{why}");
    }
}

#[test]
fn lda_closed_form() {
    pass(checks::lda_matches_closed_form());
}

#[test]
fn isotropic_lda_is_semaxis() {
    pass(checks::lda_isotropic_is_semaxis());
}

#[test]
fn kde_normalization() {
    pass(checks::kde_curves_integrate_to_one());
}

#[test]
fn kde_two_points() {
    pass(checks::kde_point_pair_density());
}

#[test]
fn kde_single_point_is_a_normal_density() {
    assert!((kde_at(&[0.0], 1.0, 0.0) - 0.398_942_280_4).abs() < 1e-9);
    assert!((kde_at(&[3.0], 2.0, 3.0) - 0.398_942_280_4 / 2.0).abs() < 1e-9);
}

fn embedding(x: bestseller_core::Matrix) -> EmbeddingMatrix {
    let ids = (0..x.rows()).map(|i| format!("d{i}")).collect();
    EmbeddingMatrix::new(EmbeddingKind::Bow, ids, x).unwrap()
}

#[test]
fn separated_classes_project_apart() {
    let (x, y) = gaussian_classes(20, [&[3.0, 0.0, 0.0], &[0.0; 3]], &[1.0; 3], 8);
    let m = embedding(x);
    for method in [AxisMethod::SemAxis, AxisMethod::Lda] {
        let options = LooOptions { method, ..LooOptions::default() };
        let result = loo_projection(&m, &y, &options, Execution::Parallel).unwrap();
        assert!(result.skipped.is_empty());
        let mean = |l| {
            let s = result.scores_for(l);
            s.iter().sum::<f64>() / s.len() as f64
        };
        assert!(mean(Label::Success) > mean(Label::Other), "{method:?}");
    }
}

proptest! {
    // the held-out row must not influence the axis it is projected on
    #[test]
    fn held_out_row_does_not_leak(shift in -50.0f64..50.0, held in 0usize..12, standardize: bool, lda: bool) {
        let (x, y) = gaussian_classes(6, [&[1.0, 0.0, 2.0], &[0.0; 3]], &[1.0; 3], 5);
        let mut moved = x.clone();
        for j in 0..3 {
            moved.set(held, j, x.get(held, j) + shift * (j as f64 + 1.0));
        }
        let method = if lda { AxisMethod::Lda } else { AxisMethod::SemAxis };
        let options = LooOptions { method, shrinkage: 1e-3, standardize };
        let (a, _) = loo_fold(&embedding(x), &y, held, &options).unwrap();
        let (b, _) = loo_fold(&embedding(moved), &y, held, &options).unwrap();
        prop_assert_eq!(a.direction, b.direction);
    }
}
