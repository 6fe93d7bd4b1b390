//! End-to-end pipeline run over the synthetic demo corpus, checked against
//! hand-derived expectations.
//!
//! The expectations below were worked out on paper from the corpus
//! definitions and the toy scanner's two signatures (a script-call token
//! under `/OpenAction/JS` or `/Names/JavaScript/Names/JS`):
//!
//! - Deleting or benignly replacing the payload path (or any prefix of it)
//!   silences the scanner, so those paths are conserved per seed.
//! - Every other structural feature survives deletion (the payload stays),
//!   so it lands in the obligatory set.
//! - No seed contradicts another often enough to reach the default
//!   elimination threshold, so unification is a plain union.

use std::collections::BTreeSet;
use std::sync::Arc;

use conserva_core::corpus::{corpus_rules, demo_corpus};
use conserva_core::features::{build_path_space, default_count_defs, extract_paths, vectorize};
use conserva_core::learn::{
    evaluate_model, train, Dataset, Label, TrainParams,
};
use conserva_core::oracle::RuleOracle;
use conserva_core::pipeline::{
    conserve_seed, forward_elimination, map_to_counts, map_to_hidost, overlap_analysis, Beta,
    ConservedSets, ProbeParams, TraceAction,
};

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

const PAYLOAD_VIA_OPEN_ACTION: &[&str] = &["/OpenAction", "/OpenAction/JS"];
const PAYLOAD_VIA_NAME_TREE: &[&str] = &[
    "/Names",
    "/Names/JavaScript",
    "/Names/JavaScript/Names",
    "/Names/JavaScript/Names/JS",
];

fn run_conservation() -> (Vec<ConservedSets>, Arc<conserva_core::FeatureSpace>) {
    let corpus = demo_corpus();
    let oracle = RuleOracle::new(corpus.rules.clone());
    let graphs: Vec<_> = corpus
        .seeds
        .iter()
        .chain(&corpus.benign)
        .map(|r| r.graph.clone())
        .collect();
    let space = Arc::new(build_path_space(&graphs, 10));
    let params = ProbeParams { depth_limit: 10, workers: 4 };
    let per_seed: Vec<ConservedSets> = corpus
        .seeds
        .iter()
        .map(|seed| conserve_seed(seed, &corpus.donor, &oracle, &space, params).unwrap())
        .collect();
    (per_seed, space)
}

#[test]
fn per_seed_conserved_sets_match_the_hand_derivation() {
    let (per_seed, _) = run_conservation();
    let by_id: std::collections::BTreeMap<&str, &ConservedSets> =
        per_seed.iter().map(|cs| (cs.seed_id.as_str(), cs)).collect();

    assert_eq!(by_id["seed-open-action"].s, set(PAYLOAD_VIA_OPEN_ACTION));
    assert_eq!(by_id["seed-names-tree"].s, set(PAYLOAD_VIA_NAME_TREE));
    assert_eq!(by_id["seed-decoys"].s, set(PAYLOAD_VIA_OPEN_ACTION));
    assert_eq!(by_id["seed-names-pair"].s, set(PAYLOAD_VIA_NAME_TREE));

    // The first seed's obligatory set, exhaustively: every extracted path
    // that is not part of the payload.
    assert_eq!(
        by_id["seed-open-action"].o,
        set(&[
            "/Type",
            "/Pages",
            "/Pages/Type",
            "/Pages/Kids",
            "/Pages/Kids/Type",
            "/Pages/Kids/Parent",
            "/Pages/Kids/MediaBox",
            "/Pages/Count",
            "/OpenAction/S",
        ])
    );

    for cs in &per_seed {
        assert!(cs.inconclusive.is_empty(), "{} had errors", cs.seed_id);
        // S and O are disjoint and every probed feature has a dependents
        // entry.
        assert!(cs.s.intersection(&cs.o).next().is_none());
        for f in cs.s.iter().chain(&cs.o) {
            assert!(cs.d.contains_key(f), "{}: no dependents entry for {f}", cs.seed_id);
        }
    }

    // Deleting a payload prefix takes its suffixes with it.
    let d = &by_id["seed-open-action"].d;
    assert_eq!(d["/OpenAction"], set(&["/OpenAction/JS", "/OpenAction/S"]));
    assert!(d["/OpenAction/JS"].is_empty());
    let d = &by_id["seed-names-pair"].d;
    assert_eq!(
        d["/Names"],
        set(&[
            "/Names/JavaScript",
            "/Names/JavaScript/Names",
            "/Names/JavaScript/Names/JS",
            "/Names/JavaScript/Names/S",
        ])
    );
}

#[test]
fn unification_keeps_both_payload_routes() {
    let (per_seed, _) = run_conservation();
    let uniform = forward_elimination(&per_seed, Beta::default());
    let mut expected = set(PAYLOAD_VIA_OPEN_ACTION);
    expected.extend(set(PAYLOAD_VIA_NAME_TREE));
    assert_eq!(uniform.s, expected);
    assert!(uniform.eliminated.is_empty());
    assert!(uniform.trace.iter().all(|t| t.action == TraceAction::Kept));
    // Each payload route is conserved in exactly two seeds and obligatory
    // in none (the other seeds never exhibit it at all).
    for entry in &uniform.trace {
        assert_eq!(entry.s_count, 2, "{}", entry.feature);
        assert_eq!(entry.o_count, 0, "{}", entry.feature);
    }
}

#[test]
fn consolidation_with_no_rules_is_the_identity_mapping() {
    let (per_seed, _) = run_conservation();
    let uniform = forward_elimination(&per_seed, Beta::default());
    let mapped = map_to_hidost(&uniform.s, &conserva_core::default_rules()).unwrap();
    assert_eq!(mapped.features, uniform.s);
    assert!(mapped.collisions.is_empty());
}

#[test]
fn count_feature_projection_matches_the_hand_derivation() {
    let corpus = demo_corpus();
    let (per_seed, _) = run_conservation();
    let defs = default_count_defs();
    let mapping = map_to_counts(&corpus.seeds, &per_seed, &defs, Beta::default(), 10).unwrap();

    let by_id: std::collections::BTreeMap<&str, &ConservedSets> =
        mapping.per_seed.iter().map(|cs| (cs.seed_id.as_str(), cs)).collect();

    // Deleting the payload clears the script token counts; which ones
    // depends on whether the JavaScript name lives inline (open action,
    // counted once) or duplicated (name tree: key plus action S entry, so
    // one deletion cannot clear it).
    assert_eq!(by_id["seed-open-action"].s, set(&["count_javascript", "count_js"]));
    assert_eq!(by_id["seed-open-action"].o, set(&["count_page"]));
    assert_eq!(by_id["seed-names-tree"].s, set(&["count_js"]));
    assert_eq!(by_id["seed-names-tree"].o, set(&["count_page"]));
    assert_eq!(by_id["seed-decoys"].s, set(&["count_javascript", "count_js"]));
    assert_eq!(by_id["seed-decoys"].o, set(&["count_box_other", "count_page"]));
    assert_eq!(by_id["seed-names-pair"].s, set(&["count_js"]));
    assert_eq!(by_id["seed-names-pair"].o, set(&["count_page"]));

    assert_eq!(mapping.uniform.s, set(&["count_javascript", "count_js"]));
    assert!(mapping.uniform.eliminated.is_empty());
}

#[test]
fn conserved_features_overlap_with_what_a_sparse_model_selects() {
    let corpus = demo_corpus();
    let (per_seed, space) = run_conservation();
    let uniform = forward_elimination(&per_seed, Beta::default());

    let mut data = Dataset::new(space.clone());
    for rec in &corpus.seeds {
        let (v, _) = vectorize(&extract_paths(&rec.graph, 10), &space);
        data.push(&v, Label::Malicious).unwrap();
    }
    for rec in &corpus.benign {
        let (v, _) = vectorize(&extract_paths(&rec.graph, 10), &space);
        data.push(&v, Label::Benign).unwrap();
    }
    let model = train(&data, &TrainParams::default()).unwrap();
    let report = evaluate_model(&model, &data).unwrap();
    assert_eq!(report.accuracy, 1.0, "the corpus is linearly separable");

    let overlap = overlap_analysis(&uniform.s, &model.selected_features());
    assert_eq!(overlap.conserved_size, 6);
    assert!(
        overlap.overlap_size > 0,
        "a model separating this corpus must lean on some conserved feature"
    );
}

#[test]
fn replay_produces_identical_reports() {
    // Everything downstream of the oracle is deterministic, so two
    // independent runs must render byte-identical reports.
    let corpus = demo_corpus();
    let oracle = RuleOracle::new(corpus_rules());
    let graphs: Vec<_> = corpus
        .seeds
        .iter()
        .chain(&corpus.benign)
        .map(|r| r.graph.clone())
        .collect();
    let run = |workers: usize| {
        let space = Arc::new(build_path_space(&graphs, 10));
        let params = ProbeParams { depth_limit: 10, workers };
        let per_seed: Vec<ConservedSets> = corpus
            .seeds
            .iter()
            .map(|seed| conserve_seed(seed, &corpus.donor, &oracle, &space, params).unwrap())
            .collect();
        let uniform = forward_elimination(&per_seed, Beta::default());
        (
            conserva_core::pipeline::conserved_sets_to_jsonl(&per_seed),
            conserva_core::pipeline::uniform_to_json(&uniform),
        )
    };
    // Worker count must not affect the output either.
    assert_eq!(run(1), run(8));
}
