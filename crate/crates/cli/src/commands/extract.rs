//! `extract`: builds every feature vocabulary from the training corpus and
//! vectorizes each configured document group against all of them.

use std::sync::Arc;

use serde::Serialize;

use conserva_core::features::{
    build_consolidated_space, build_path_space, consolidate, count_defs_to_string, count_space,
    extract_counts, extract_paths, rules_to_string, vectorize, FeatureKind, StructuralPath,
};
use conserva_core::pipeline::SeedRecord;

use crate::config::Config;
use crate::docs::{load_dir, load_nonempty_dir};
use crate::error::CliError;

use super::{load_count_defs, load_rules, prepare_out, space_file_name, write_text};

#[derive(Serialize)]
struct GroupCounts {
    on: usize,
    ignored: usize,
}

#[derive(Serialize)]
struct DocRow<'a> {
    doc: &'a str,
    group: &'a str,
    sl2013: GroupCounts,
    hidost: GroupCounts,
    counts: GroupCounts,
}

pub fn run(cfg: &Config) -> Result<(), CliError> {
    prepare_out(cfg)?;
    let rules = load_rules(cfg)?;
    let defs = load_count_defs(cfg)?;
    let depth = cfg.pipeline.depth_limit;

    let seeds = load_nonempty_dir("corpus.seeds", cfg.require_seeds()?)?;
    let benign = load_nonempty_dir("corpus.benign", cfg.require_benign()?)?;
    let test_malicious = match &cfg.corpus.test_malicious {
        Some(dir) => load_dir(dir)?,
        None => Vec::new(),
    };
    let test_benign = match &cfg.corpus.test_benign {
        Some(dir) => load_dir(dir)?,
        None => Vec::new(),
    };

    let train_graphs: Vec<_> =
        seeds.iter().chain(benign.iter()).map(|d| d.graph.clone()).collect();
    let sl_space = Arc::new(build_path_space(&train_graphs, depth));
    let hd_space = Arc::new(build_consolidated_space(&train_graphs, depth, &rules));
    let ct_space = Arc::new(count_space(&defs));

    write_text(&cfg.out, &space_file_name(FeatureKind::Sl2013), &sl_space.to_file_string())?;
    write_text(&cfg.out, &space_file_name(FeatureKind::Hidost), &hd_space.to_file_string())?;
    write_text(&cfg.out, &space_file_name(FeatureKind::PdfRateB), &ct_space.to_file_string())?;
    write_text(&cfg.out, "consolidation_rules.txt", &rules_to_string(&rules))?;
    write_text(&cfg.out, "count_features.json", &count_defs_to_string(&defs))?;

    let groups: [(&str, &[SeedRecord]); 4] = [
        ("seed", &seeds),
        ("benign", &benign),
        ("test_malicious", &test_malicious),
        ("test_benign", &test_benign),
    ];
    let mut lines = String::new();
    let mut documents = 0;
    for (group, docs) in groups {
        for doc in docs {
            documents += 1;
            let paths = extract_paths(&doc.graph, depth);
            let (sl, sl_ignored) = vectorize(&paths, &sl_space);
            let consolidated: std::collections::BTreeSet<StructuralPath> =
                paths.iter().map(|p| consolidate(p, &rules)).collect();
            let (hd, hd_ignored) = vectorize(&consolidated, &hd_space);
            let ct = extract_counts(&doc.graph, &defs, &ct_space);
            let on = |v: &conserva_core::features::FeatureVector| {
                v.bits().iter().filter(|&&b| b).count()
            };
            let row = DocRow {
                doc: &doc.id,
                group,
                sl2013: GroupCounts { on: on(&sl), ignored: sl_ignored },
                hidost: GroupCounts { on: on(&hd), ignored: hd_ignored },
                counts: GroupCounts { on: on(&ct), ignored: 0 },
            };
            lines.push_str(&serde_json::to_string(&row).expect("row encodes"));
            lines.push('\n');
        }
    }
    write_text(&cfg.out, "features.jsonl", &lines)?;

    println!(
        "extracted {} documents: {} path features, {} consolidated, {} counts",
        documents,
        sl_space.len(),
        hd_space.len(),
        ct_space.len()
    );
    println!("reports written to {}", cfg.out.display());
    Ok(())
}
