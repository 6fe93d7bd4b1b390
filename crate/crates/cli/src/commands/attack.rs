//! `attack`: runs every configured evasion attack against the baseline
//! model over the malicious test documents.

use std::collections::BTreeSet;

use serde::Serialize;

use conserva_core::learn::{AttackConfig, ConfiguredAttack, RobustnessReport, VariantGenerator};

use crate::config::Config;
use crate::error::CliError;

use super::{
    attack_inputs, effective_frozen, load_model, load_space, prepare_out, write_json,
    BASELINE_MODEL, Vocabulary,
};

#[derive(Serialize)]
struct DocOutcome {
    doc: String,
    evaded: bool,
    flips: usize,
    score_before: f64,
    score_after: f64,
}

#[derive(Serialize)]
struct AttackRun {
    name: String,
    #[serde(flatten)]
    config: AttackConfig,
    robustness: RobustnessReport,
    per_doc: Vec<DocOutcome>,
}

#[derive(Serialize)]
struct AttackReport {
    model: String,
    attacks: Vec<AttackRun>,
}

pub fn run(cfg: &Config) -> Result<(), CliError> {
    prepare_out(cfg)?;
    let voc = Vocabulary::from_config(cfg)?;
    let space = load_space(cfg, voc.kind)?;
    let model = load_model(cfg, BASELINE_MODEL, &space)?;
    let inputs = attack_inputs(cfg, &voc, &space)?;

    let mut runs = Vec::new();
    let mut rates = Vec::new();
    for entry in &cfg.learning.attacks {
        let frozen: BTreeSet<String> = effective_frozen(cfg, entry, &voc, &space)?;
        let config = AttackConfig {
            kind: entry.config.kind.clone(),
            frozen,
            rng_seed: entry.config.rng_seed,
        };
        let generator = ConfiguredAttack { config: config.clone() };

        let mut per_doc = Vec::new();
        let (mut evaded, mut flips) = (0usize, 0usize);
        for (i, x) in inputs.malicious.iter().enumerate() {
            let result = generator.generate(&model, i, x)?;
            if result.evaded {
                evaded += 1;
                flips += result.flips;
            }
            per_doc.push(DocOutcome {
                doc: inputs.malicious_ids[i].clone(),
                evaded: result.evaded,
                flips: result.flips,
                score_before: model.score(x)?,
                score_after: result.score,
            });
        }
        let total = inputs.malicious.len();
        let robustness = RobustnessReport {
            total,
            evaded,
            evasion_rate: if total == 0 { 0.0 } else { evaded as f64 / total as f64 },
            mean_flips: (evaded > 0).then(|| flips as f64 / evaded as f64),
        };
        rates.push((entry.name.clone(), robustness.evasion_rate));
        runs.push(AttackRun { name: entry.name.clone(), config, robustness, per_doc });
    }

    write_json(
        &cfg.out,
        "attack_report.json",
        &AttackReport { model: BASELINE_MODEL.to_string(), attacks: runs },
    )?;

    for (name, rate) in &rates {
        println!("attack {name}: evasion rate {rate:.3}");
    }
    println!("report written to {}", cfg.out.join("attack_report.json").display());
    Ok(())
}
