//! `conserve`: probes every seed against the oracle, unifies the per-seed
//! conserved sets, and projects the result into the other vocabularies.

use std::sync::Arc;

use serde::Serialize;

use conserva_core::features::build_path_space;
use conserva_core::pipeline::{
    conserve_seed, conserved_sets_to_jsonl, forward_elimination, map_to_counts, map_to_hidost,
    uniform_to_json, PipelineError, ProbeParams, UniformResult,
};

use crate::config::Config;
use crate::docs::{load_document, load_nonempty_dir};
use crate::error::CliError;

use super::{
    build_oracle, load_count_defs, load_rules, prepare_out, write_json, write_text,
    COUNTS_REPORT, HIDOST_REPORT, PER_SEED_REPORT, UNIFORM_REPORT,
};

#[derive(Serialize)]
struct SkippedSeed {
    seed: String,
    error: String,
}

#[derive(Serialize)]
struct ConserveReport {
    donor: String,
    probed: Vec<String>,
    skipped: Vec<SkippedSeed>,
}

pub fn run(cfg: &Config) -> Result<UniformResult, CliError> {
    prepare_out(cfg)?;
    let oracle_cfg = cfg.require_oracle()?;
    let handle = build_oracle(oracle_cfg)?;
    let rules = load_rules(cfg)?;
    let defs = load_count_defs(cfg)?;

    let seeds = load_nonempty_dir("corpus.seeds", cfg.require_seeds()?)?;
    let benign = load_nonempty_dir("corpus.benign", cfg.require_benign()?)?;
    // The replacement donor is configurable; otherwise it is the first
    // benign document (ids are sorted, so the choice is deterministic).
    let (donor_id, donor_graph) = match &cfg.corpus.donor {
        Some(path) => {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("donor")
                .to_string();
            (id, load_document(path)?)
        }
        None => (benign[0].id.clone(), benign[0].graph.clone()),
    };

    let depth = cfg.pipeline.depth_limit;
    let params = ProbeParams { depth_limit: depth, workers: cfg.workers };
    let graphs: Vec<_> = seeds.iter().map(|d| d.graph.clone()).collect();
    let space = Arc::new(build_path_space(&graphs, depth));

    let mut per_seed = Vec::new();
    let mut probed = Vec::new();
    let mut skipped = Vec::new();
    for seed in &seeds {
        match conserve_seed(seed, &donor_graph, handle.oracle(), &space, params) {
            Ok(sets) => {
                probed.push(seed.id.clone());
                per_seed.push(sets);
            }
            // A seed the oracle does not flag has nothing to probe; record it
            // and keep going.
            Err(PipelineError::SeedNotMalicious { seed_id }) => {
                skipped.push(SkippedSeed {
                    seed: seed_id.clone(),
                    error: format!("seed '{seed_id}' is not flagged malicious at baseline"),
                });
            }
            Err(e) => return Err(CliError::from(e)),
        }
    }
    handle.persist()?;
    if per_seed.is_empty() {
        return Err(CliError::data(
            "no seed was flagged malicious at baseline; nothing to probe",
        ));
    }

    let uniform = forward_elimination(&per_seed, cfg.pipeline.beta);
    let hidost = map_to_hidost(&uniform.s, &rules).map_err(CliError::data)?;
    let counts = map_to_counts(&seeds, &per_seed, &defs, cfg.pipeline.beta, depth)?;

    skipped.sort_by(|a, b| a.seed.cmp(&b.seed));

    write_text(&cfg.out, PER_SEED_REPORT, &conserved_sets_to_jsonl(&per_seed))?;
    write_text(&cfg.out, UNIFORM_REPORT, &uniform_to_json(&uniform))?;
    write_json(&cfg.out, HIDOST_REPORT, &hidost)?;
    write_json(&cfg.out, COUNTS_REPORT, &counts)?;
    println!(
        "probed {} seeds ({} skipped), {} conserved features survive unification",
        per_seed.len(),
        skipped.len(),
        uniform.s.len()
    );
    write_json(
        &cfg.out,
        "conserve_summary.json",
        &ConserveReport { donor: donor_id, probed, skipped },
    )?;

    println!("reports written to {}", cfg.out.display());
    Ok(uniform)
}
