//! `retrain`: hardens the classifier against each configured attack by
//! iterative adversarial retraining, saving one model per attack.

use serde::Serialize;

use conserva_core::learn::{retrain_iterative, AttackConfig, ConfiguredAttack, IterationLog};

use crate::config::Config;
use crate::error::CliError;

use super::{
    effective_frozen, prepare_out, retrained_model_name, train_corpus, write_json, write_text,
    Vocabulary,
};

#[derive(Serialize)]
struct RetrainRun {
    name: String,
    model: String,
    iterations: Vec<IterationLog>,
    final_dataset_size: usize,
}

#[derive(Serialize)]
struct RetrainReport {
    attacks: Vec<RetrainRun>,
}

pub fn run(cfg: &Config) -> Result<(), CliError> {
    prepare_out(cfg)?;
    let voc = Vocabulary::from_config(cfg)?;
    // Retraining starts from the same corpus and space the baseline was
    // trained on; the attack seeds are the malicious training vectors.
    let corpus = train_corpus(cfg, &voc)?;

    let mut runs = Vec::new();
    let mut models = Vec::new();
    for entry in &cfg.learning.attacks {
        let frozen = effective_frozen(cfg, entry, &voc, &corpus.space)?;
        let generator = ConfiguredAttack {
            config: AttackConfig {
                kind: entry.config.kind.clone(),
                frozen,
                rng_seed: entry.config.rng_seed,
            },
        };
        let outcome = retrain_iterative(
            &corpus.data,
            &corpus.malicious,
            &generator,
            &cfg.learning.train,
            &cfg.learning.retrain,
        )?;
        let file = retrained_model_name(&entry.name);
        write_text(&cfg.out, &file, &outcome.model.to_json())?;
        models.push(file.clone());
        runs.push(RetrainRun {
            name: entry.name.clone(),
            model: file,
            iterations: outcome.iterations,
            final_dataset_size: outcome.final_dataset_size,
        });
    }

    write_json(&cfg.out, "retrain_report.json", &RetrainReport { attacks: runs })?;

    println!("retrained {} models, one per attack", models.len());
    println!("report written to {}", cfg.out.join("retrain_report.json").display());
    Ok(())
}
