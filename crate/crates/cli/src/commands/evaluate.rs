//! `evaluate`: scores the baseline and any retrained models on the held-out
//! corpus, both clean and under every configured attack.

use serde::Serialize;

use conserva_core::learn::{
    evasion_robustness, evaluate_model, AttackConfig, ConfiguredAttack, EvalReport, LinearModel,
    RobustnessReport,
};

use crate::config::Config;
use crate::error::CliError;

use super::{
    effective_frozen, load_model, load_space, prepare_out, retrained_model_name, test_corpus,
    write_json, BASELINE_MODEL, LabeledCorpus, Vocabulary,
};

#[derive(Serialize)]
pub struct AttackRobustness {
    pub attack: String,
    #[serde(flatten)]
    pub report: RobustnessReport,
}

#[derive(Serialize)]
pub struct ModelEvaluation {
    pub name: String,
    pub file: String,
    pub clean: EvalReport,
    pub robustness: Vec<AttackRobustness>,
}

#[derive(Serialize)]
pub struct Evaluation {
    pub models: Vec<ModelEvaluation>,
}

pub fn run(cfg: &Config) -> Result<Evaluation, CliError> {
    prepare_out(cfg)?;
    let voc = Vocabulary::from_config(cfg)?;
    let space = load_space(cfg, voc.kind)?;
    let test = test_corpus(cfg, &voc, &space)?;

    let mut models = Vec::new();
    let baseline = load_model(cfg, BASELINE_MODEL, &space)?;
    models.push(evaluate_one(cfg, &voc, &test, "baseline", BASELINE_MODEL, &baseline)?);

    for entry in &cfg.learning.attacks {
        let file = retrained_model_name(&entry.name);
        if !cfg.out.join(&file).exists() {
            continue;
        }
        let model = load_model(cfg, &file, &space)?;
        models.push(evaluate_one(cfg, &voc, &test, &entry.name, &file, &model)?);
    }

    let evaluation = Evaluation { models };
    write_json(&cfg.out, "evaluation.json", &evaluation)?;

    for m in &evaluation.models {
        let worst = m
            .robustness
            .iter()
            .map(|r| r.report.evasion_rate)
            .fold(0.0f64, f64::max);
        println!(
            "model {}: clean AUC {:.3}, worst-case evasion rate {:.3}",
            m.name, m.clean.auc, worst
        );
    }
    println!("report written to {}", cfg.out.join("evaluation.json").display());
    Ok(evaluation)
}

fn evaluate_one(
    cfg: &Config,
    voc: &Vocabulary,
    test: &LabeledCorpus,
    name: &str,
    file: &str,
    model: &LinearModel,
) -> Result<ModelEvaluation, CliError> {
    let clean = evaluate_model(model, &test.data)?;
    let mut robustness = Vec::new();
    for entry in &cfg.learning.attacks {
        let frozen = effective_frozen(cfg, entry, voc, &test.space)?;
        let generator = ConfiguredAttack {
            config: AttackConfig {
                kind: entry.config.kind.clone(),
                frozen,
                rng_seed: entry.config.rng_seed,
            },
        };
        let report = evasion_robustness(model, &test.malicious, &generator)?;
        robustness.push(AttackRobustness { attack: entry.name.clone(), report });
    }
    Ok(ModelEvaluation {
        name: name.to_string(),
        file: file.to_string(),
        clean,
        robustness,
    })
}
