//! `map`: re-projects an existing unified conserved set onto the
//! consolidated-path and count vocabularies without re-running the oracle.

use conserva_core::pipeline::{map_to_counts, map_to_hidost, parse_uniform_json};

use crate::config::Config;
use crate::docs::load_nonempty_dir;
use crate::error::CliError;

use super::{
    load_count_defs, load_rules, prepare_out, read_out_text, read_per_seed, write_json,
    COUNTS_REPORT, HIDOST_REPORT, UNIFORM_REPORT,
};

pub struct MapSummary {
    pub hidost_features: usize,
    pub count_features: usize,
}

pub fn run(cfg: &Config) -> Result<MapSummary, CliError> {
    prepare_out(cfg)?;
    const HINT: &str = "run `conserva conserve` first";
    let uniform =
        parse_uniform_json(&read_out_text(cfg, UNIFORM_REPORT, HINT)?).map_err(CliError::data)?;
    let per_seed = read_per_seed(cfg, HINT)?;
    let seeds = load_nonempty_dir("corpus.seeds", cfg.require_seeds()?)?;

    let rules = load_rules(cfg)?;
    let defs = load_count_defs(cfg)?;
    let hidost = map_to_hidost(&uniform.s, &rules).map_err(CliError::data)?;
    let counts =
        map_to_counts(&seeds, &per_seed, &defs, cfg.pipeline.beta, cfg.pipeline.depth_limit)?;

    write_json(&cfg.out, HIDOST_REPORT, &hidost)?;
    write_json(&cfg.out, COUNTS_REPORT, &counts)?;

    let summary = MapSummary {
        hidost_features: hidost.features.len(),
        count_features: counts.uniform.s.len(),
    };
    println!(
        "mapped {} conserved paths to {} consolidated features and {} count features",
        uniform.s.len(),
        summary.hidost_features,
        summary.count_features
    );
    Ok(summary)
}
