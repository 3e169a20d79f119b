mod common;

use bestseller_core::d2v::{self, D2VConfig, D2VModel};
use bestseller_core::Execution;
use common::checks;

fn pass(check: checks::Check) {
    if let Err(why) = check {
        panic!("{why}");
    }
}

#[test]
fn gradient_check() {
    pass(checks::d2v_gradient_matches_finite_differences());
}

#[test]
fn loss_decreases() {
    pass(checks::d2v_loss_decreases());
}

#[test]
fn duplicates_align() {
    pass(checks::d2v_duplicate_documents_align());
}

#[test]
fn deterministic_mode_is_bit_identical() {
    pass(checks::d2v_is_deterministic());
}

#[test]
fn model_file_round_trip() {
    let corpus = checks::topic_corpus(6, 20, 60, 9);
    let config = D2VConfig { dim: 8, epochs: 2, seed: 4, deterministic: true, ..D2VConfig::default() };
    let model = d2v::train_with(&corpus, &config, Execution::Sequential).unwrap();
    let mut buf = Vec::new();
    model.write_text(&mut buf).unwrap();
    let back = D2VModel::read_text(buf.as_slice()).unwrap();
    assert_eq!(back.doc_ids, model.doc_ids);
    assert_eq!(back.vocabulary, model.vocabulary);
    assert_eq!(back.doc_vectors, model.doc_vectors);
    assert_eq!(back.output_weights, model.output_weights);
    assert!(back.training_loss_per_epoch.is_empty());
}

#[test]
fn seed_changes_vectors() {
    let corpus = checks::topic_corpus(6, 20, 60, 9);
    let base = D2VConfig { dim: 8, epochs: 2, deterministic: true, ..D2VConfig::default() };
    let a = d2v::train(&corpus, &D2VConfig { seed: 1, ..base.clone() }).unwrap();
    let b = d2v::train(&corpus, &D2VConfig { seed: 2, ..base }).unwrap();
    assert_ne!(a.doc_vectors, b.doc_vectors);
}
