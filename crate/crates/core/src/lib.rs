//! Conserva: finding the structural features of malicious PDFs that their
//! payloads cannot live without, and using them to harden classifiers.
//!
//! The crate is organized as a pipeline:
//!
//! - [`pdf`] parses PDF files into an object graph, serializes graphs back
//!   to bytes deterministically, and round-trips graphs through a JSON
//!   interchange form.
//! - [`features`] extracts structural-path features from a graph, applies
//!   consolidation rules, and maintains feature spaces and binary vectors,
//!   including binarized count features.
//! - [`mutation`] deletes or replaces the value at every realization of a
//!   structural path, reporting which features flipped as a side effect.
//! - [`oracle`] abstracts the malice judge: in-process signature rules, a
//!   verdict cache, or an external scanner command.
//! - [`pipeline`] runs the deletion and replacement probes per seed,
//!   unifies per-seed results across the corpus by forward elimination,
//!   and projects the outcome onto consolidated-path and count-feature
//!   vocabularies.
//! - [`learn`] trains linear classifiers, attacks them in feature space,
//!   and evaluates iterative adversarial retraining with conserved features
//!   frozen.
//! - [`corpus`] builds a synthetic demonstration corpus with a toy
//!   signature scanner so the whole pipeline can run hermetically.
//!
//! Everything observable is deterministic: object maps are ordered,
//! randomized algorithms draw from seeded ChaCha streams, and report
//! renderers emit byte-stable output.

pub mod corpus;
pub mod features;
pub mod learn;
pub mod mutation;
pub mod oracle;
pub mod pdf;
pub mod pipeline;

pub use features::{
    build_consolidated_space, build_path_space, consolidate, count_space, default_count_defs,
    default_rules, extract_counts, extract_paths, parse_count_defs, parse_rules, vectorize,
    ConsolidationRule, CountFeatureDef, FeatureKind, FeatureSpace, FeatureVector, StructuralPath,
};
pub use learn::{
    coordinate_greedy, evaluate_model, evasion_robustness, l1_sweep, retrain_iterative, roc_auc,
    run_attack, salt_pepper, train, AttackConfig, AttackKind, AttackResult, ConfiguredAttack,
    Dataset, EvalReport, IterationLog, Label, LearnError, LinearModel, Regularizer, RetrainOutcome,
    RetrainParams, RobustnessReport, SweepMode, SweepResult, TrainParams, VariantGenerator,
};
pub use mutation::{
    delete_path, locate_sites, probe_dependents, replace_path, select_donor, MutationError,
    MutationOutcome, Site, SiteStep,
};
pub use oracle::{
    CachedOracle, CommandOracle, MaliceOracle, OracleError, Outcome, PayloadPredicate, RuleOracle,
    SignatureRule, Verdict,
};
pub use pdf::{
    graph_to_json, load_graph_json, parse_pdf, serialize_pdf, Dict, ObjRef, ObjectGraph, PdfError,
    PdfObject, Provenance, StreamObject,
};
pub use pipeline::{
    conserve_seed, conserved_sets_to_jsonl, deletion_pass, forward_elimination, map_to_counts,
    map_to_hidost, overlap_analysis, parse_conserved_sets_jsonl, parse_uniform_json,
    replacement_pass, uniform_to_json, Beta, ConservedSets, CountMapping, HidostMapping,
    OverlapReport, PipelineError, ProbeParams, SeedRecord, TraceAction, TraceEntry, UniformResult,
};
