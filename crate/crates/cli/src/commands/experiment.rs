//! `experiment`: the whole pipeline in one run — vocabularies, conserved
//! features, baseline, attacks, retraining, evaluation — plus a comparison
//! table of baseline versus retrained robustness.

use serde::Serialize;

use crate::config::Config;
use crate::error::CliError;

use super::{evaluate, prepare_out, write_json};

#[derive(Serialize)]
struct ComparisonRow {
    attack: String,
    baseline_evasion_rate: f64,
    retrained_evasion_rate: f64,
    /// Baseline minus retrained: positive when retraining reduced evasion.
    evasion_reduction: f64,
    baseline_auc: f64,
    retrained_auc: f64,
    /// Retrained minus baseline: negative when hardening cost clean accuracy.
    auc_change: f64,
}

#[derive(Serialize)]
struct ExperimentReport {
    conserved_features: Option<usize>,
    comparison: Vec<ComparisonRow>,
}

pub fn run(cfg: &Config) -> Result<(), CliError> {
    prepare_out(cfg)?;

    super::extract::run(cfg)?;

    let wants_conserved = cfg.learning.attacks.iter().any(|a| a.freeze_conserved);
    let conserved_features = if cfg.oracle.is_some() {
        Some(super::conserve::run(cfg)?.s.len())
    } else if wants_conserved {
        return Err(CliError::config(
            "an attack freezes conserved features but no oracle is configured",
        ));
    } else {
        None
    };

    super::train::run(cfg)?;
    super::attack::run(cfg)?;
    super::retrain::run(cfg)?;
    let evaluation = super::evaluate::run(cfg)?;

    let report = ExperimentReport {
        conserved_features,
        comparison: comparison_rows(&evaluation),
    };
    write_json(&cfg.out, "experiment_report.json", &report)?;

    for row in &report.comparison {
        println!(
            "attack {}: evasion {:.3} -> {:.3}, AUC {:.3} -> {:.3}",
            row.attack,
            row.baseline_evasion_rate,
            row.retrained_evasion_rate,
            row.baseline_auc,
            row.retrained_auc
        );
    }
    println!("report written to {}", cfg.out.join("experiment_report.json").display());
    Ok(())
}

fn comparison_rows(evaluation: &evaluate::Evaluation) -> Vec<ComparisonRow> {
    let find = |name: &str| evaluation.models.iter().find(|m| m.name == name);
    let rate = |m: &evaluate::ModelEvaluation, attack: &str| {
        m.robustness
            .iter()
            .find(|r| r.attack == attack)
            .map(|r| r.report.evasion_rate)
    };
    let mut rows = Vec::new();
    let Some(baseline) = find("baseline") else {
        return rows;
    };
    for m in &evaluation.models {
        if m.name == "baseline" {
            continue;
        }
        // Each retrained model is named after the attack it was hardened
        // against; compare both models under that same attack.
        let (Some(base_rate), Some(hard_rate)) = (rate(baseline, &m.name), rate(m, &m.name))
        else {
            continue;
        };
        rows.push(ComparisonRow {
            attack: m.name.clone(),
            baseline_evasion_rate: base_rate,
            retrained_evasion_rate: hard_rate,
            evasion_reduction: base_rate - hard_rate,
            baseline_auc: baseline.clean.auc,
            retrained_auc: m.clean.auc,
            auc_change: m.clean.auc - baseline.clean.auc,
        });
    }
    rows
}
