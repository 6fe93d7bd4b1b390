//! `train`: fits the baseline linear classifier on the training corpus in
//! the configured vocabulary and records the space next to the model.

use serde::Serialize;

use conserva_core::learn::{evaluate_model, train, EvalReport};

use crate::config::Config;
use crate::error::CliError;

use super::{
    kind_slug, prepare_out, space_file_name, train_corpus, write_text, BASELINE_MODEL,
    Vocabulary,
};

#[derive(Serialize)]
struct TrainReport {
    space: String,
    space_sha256: String,
    features: usize,
    train_malicious: usize,
    train_benign: usize,
    ignored_paths: usize,
    selected_features: Vec<String>,
    train_eval: EvalReport,
}

pub fn run(cfg: &Config) -> Result<(), CliError> {
    prepare_out(cfg)?;
    let voc = Vocabulary::from_config(cfg)?;
    let corpus = train_corpus(cfg, &voc)?;

    let model = train(&corpus.data, &cfg.learning.train)?;
    let train_eval = evaluate_model(&model, &corpus.data)?;

    write_text(&cfg.out, &space_file_name(voc.kind), &corpus.space.to_file_string())?;
    write_text(&cfg.out, BASELINE_MODEL, &model.to_json())?;

    let malicious = corpus.malicious.len();
    let report = TrainReport {
        space: kind_slug(voc.kind).to_string(),
        space_sha256: corpus.space.sha256_hex(),
        features: corpus.space.len(),
        train_malicious: malicious,
        train_benign: corpus.ids.len() - malicious,
        ignored_paths: corpus.ignored,
        selected_features: model.selected_features().into_iter().collect(),
        train_eval: train_eval.clone(),
    };
    super::write_json(&cfg.out, "train_summary.json", &report)?;

    println!(
        "trained on {} documents over {} {} features ({} selected), training AUC {:.3}",
        corpus.ids.len(),
        corpus.space.len(),
        kind_slug(voc.kind),
        report.selected_features.len(),
        train_eval.auc
    );
    Ok(())
}
