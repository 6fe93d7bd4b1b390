//! The subcommands, plus the plumbing they share: report writing, oracle
//! construction, vocabulary handling, and corpus vectorization.

pub mod attack;
pub mod conserve;
pub mod evaluate;
pub mod experiment;
pub mod extract;
pub mod map;
pub mod retrain;
pub mod train;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use conserva_core::features::{
    build_consolidated_space, build_path_space, consolidate, count_space, default_count_defs,
    default_rules, extract_counts, extract_paths, parse_count_defs, parse_rules,
    ConsolidationRule, CountFeatureDef, FeatureKind, FeatureSpace, FeatureVector, StructuralPath,
    vectorize,
};
use conserva_core::learn::{Dataset, Label, LinearModel};
use conserva_core::oracle::{
    CachedOracle, CommandOracle, MaliceOracle, OracleError, RuleOracle, SignatureRule, Verdict,
};
use conserva_core::pdf::ObjectGraph;
use conserva_core::pipeline::{parse_conserved_sets_jsonl, parse_uniform_json, SeedRecord};

use crate::config::{AttackEntry, Config, OracleConfig};
use crate::docs::load_nonempty_dir;
use crate::error::CliError;

// ---- report files ----------------------------------------------------------

pub(crate) const RUN_CONFIG: &str = "run_config.json";
pub(crate) const PER_SEED_REPORT: &str = "conserved_per_seed.jsonl";
pub(crate) const UNIFORM_REPORT: &str = "conserved_uniform.json";
pub(crate) const HIDOST_REPORT: &str = "conserved_hidost.json";
pub(crate) const COUNTS_REPORT: &str = "conserved_counts.json";
pub(crate) const BASELINE_MODEL: &str = "model_baseline.json";

pub(crate) fn retrained_model_name(attack: &str) -> String {
    format!("model_retrained_{attack}.json")
}

pub(crate) fn space_file_name(kind: FeatureKind) -> String {
    format!("space_{}.txt", kind_slug(kind))
}

pub(crate) fn kind_slug(kind: FeatureKind) -> &'static str {
    match kind {
        FeatureKind::Sl2013 => "sl2013",
        FeatureKind::Hidost => "hidost",
        FeatureKind::PdfRateB => "counts",
    }
}

/// Creates the output directory and materializes the configuration into it.
pub(crate) fn prepare_out(cfg: &Config) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| {
        CliError::config(format!("cannot create output directory {}: {e}", cfg.out.display()))
    })?;
    write_text(&cfg.out, RUN_CONFIG, &cfg.to_pretty_json())?;
    Ok(())
}

pub(crate) fn write_text(out: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = out.join(name);
    std::fs::write(&path, text)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub(crate) fn write_json<T: Serialize>(
    out: &Path,
    name: &str,
    value: &T,
) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report encodes");
    text.push('\n');
    write_text(out, name, &text)
}

/// Reads a report produced by an earlier command in the same output
/// directory.
pub(crate) fn read_out_text(cfg: &Config, name: &str, hint: &str) -> Result<String, CliError> {
    let path = cfg.out.join(name);
    std::fs::read_to_string(&path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e} ({hint})", path.display())))
}

// ---- vocabulary ------------------------------------------------------------

/// Everything needed to turn a document into a feature vector in the
/// configured vocabulary.
pub(crate) struct Vocabulary {
    pub kind: FeatureKind,
    pub rules: Vec<ConsolidationRule>,
    pub defs: Vec<CountFeatureDef>,
    pub depth: usize,
}

impl Vocabulary {
    pub fn from_config(cfg: &Config) -> Result<Self, CliError> {
        Ok(Vocabulary {
            kind: cfg.learning.space,
            rules: load_rules(cfg)?,
            defs: load_count_defs(cfg)?,
            depth: cfg.pipeline.depth_limit,
        })
    }

    pub fn build_space(&self, graphs: &[ObjectGraph]) -> FeatureSpace {
        match self.kind {
            FeatureKind::Sl2013 => build_path_space(graphs, self.depth),
            FeatureKind::Hidost => build_consolidated_space(graphs, self.depth, &self.rules),
            FeatureKind::PdfRateB => count_space(&self.defs),
        }
    }

    /// Vectorizes one document; the second value counts the document's
    /// distinct paths that had no slot in the space.
    pub fn vectorize(
        &self,
        graph: &ObjectGraph,
        space: &Arc<FeatureSpace>,
    ) -> (FeatureVector, usize) {
        match self.kind {
            FeatureKind::Sl2013 => vectorize(&extract_paths(graph, self.depth), space),
            FeatureKind::Hidost => {
                let consolidated: BTreeSet<StructuralPath> = extract_paths(graph, self.depth)
                    .iter()
                    .map(|p| consolidate(p, &self.rules))
                    .collect();
                vectorize(&consolidated, space)
            }
            FeatureKind::PdfRateB => (extract_counts(graph, &self.defs, space), 0),
        }
    }
}

pub(crate) fn load_rules(cfg: &Config) -> Result<Vec<ConsolidationRule>, CliError> {
    match &cfg.pipeline.consolidation_rules {
        None => Ok(default_rules()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            parse_rules(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
        }
    }
}

pub(crate) fn load_count_defs(cfg: &Config) -> Result<Vec<CountFeatureDef>, CliError> {
    match &cfg.pipeline.count_features {
        None => Ok(default_count_defs()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            parse_count_defs(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
        }
    }
}

// ---- oracle ----------------------------------------------------------------

/// A built oracle plus the bookkeeping to persist a write-back cache.
pub(crate) struct OracleHandle {
    oracle: Box<dyn MaliceOracle>,
    cache: Option<(Arc<CachedOracle>, PathBuf)>,
}

impl OracleHandle {
    pub fn oracle(&self) -> &dyn MaliceOracle {
        self.oracle.as_ref()
    }

    /// Writes newly recorded verdicts back to the store file, if the
    /// configuration asked for that.
    pub fn persist(&self) -> Result<(), CliError> {
        if let Some((cache, path)) = &self.cache {
            std::fs::write(path, cache.store_to_string())
                .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }
}

/// Delegation shim so a cache the command keeps a handle on can still be
/// passed around as a plain oracle.
struct SharedCache(Arc<CachedOracle>);

impl MaliceOracle for SharedCache {
    fn evaluate(&self, pdf: &[u8]) -> Result<Verdict, OracleError> {
        self.0.evaluate(pdf)
    }

    fn max_parallelism(&self) -> usize {
        self.0.max_parallelism()
    }
}

pub(crate) fn build_oracle(cfg: &OracleConfig) -> Result<OracleHandle, CliError> {
    if let OracleConfig::Cached { store, fallback, write_back: true } = cfg {
        let map = read_store(store)?;
        let oracle = match fallback {
            None => CachedOracle::strict(map),
            Some(inner) => CachedOracle::with_fallback(map, build_plain(inner)?),
        };
        let arc = Arc::new(oracle);
        return Ok(OracleHandle {
            oracle: Box::new(SharedCache(arc.clone())),
            cache: Some((arc, store.clone())),
        });
    }
    Ok(OracleHandle { oracle: build_plain(cfg)?, cache: None })
}

fn build_plain(cfg: &OracleConfig) -> Result<Box<dyn MaliceOracle>, CliError> {
    match cfg {
        OracleConfig::Rule { rules } => {
            let text = std::fs::read_to_string(rules)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", rules.display())))?;
            let rules: Vec<SignatureRule> = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", rules.display())))?;
            Ok(Box::new(RuleOracle::new(rules)))
        }
        OracleConfig::Cached { store, fallback, .. } => {
            let map = read_store(store)?;
            Ok(Box::new(match fallback {
                None => CachedOracle::strict(map),
                Some(inner) => CachedOracle::with_fallback(map, build_plain(inner)?),
            }))
        }
        OracleConfig::Command { program, timeout_ms, parallelism } => Ok(Box::new(
            CommandOracle::new(program.clone(), Duration::from_millis(*timeout_ms), *parallelism),
        )),
    }
}

fn read_store(store: &Path) -> Result<BTreeMap<String, (conserva_core::oracle::Outcome, Vec<String>)>, CliError> {
    if !store.exists() {
        return Ok(BTreeMap::new());
    }
    let text = std::fs::read_to_string(store)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", store.display())))?;
    CachedOracle::parse_store(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", store.display())))
}

// ---- corpora as datasets ----------------------------------------------------

/// A labeled, vectorized corpus over one feature space.
pub(crate) struct LabeledCorpus {
    pub space: Arc<FeatureSpace>,
    pub data: Dataset,
    /// Document ids aligned with the dataset rows.
    pub ids: Vec<String>,
    /// The malicious vectors in row order (attack inputs).
    pub malicious: Vec<FeatureVector>,
    pub malicious_ids: Vec<String>,
    /// Distinct paths across all documents that had no slot in the space.
    pub ignored: usize,
}

fn assemble(
    voc: &Vocabulary,
    space: Arc<FeatureSpace>,
    groups: &[(&[SeedRecord], Label)],
) -> Result<LabeledCorpus, CliError> {
    let mut data = Dataset::new(space.clone());
    let mut ids = Vec::new();
    let mut malicious = Vec::new();
    let mut malicious_ids = Vec::new();
    let mut ignored = 0;
    for (docs, label) in groups {
        for doc in *docs {
            let (v, dropped) = voc.vectorize(&doc.graph, &space);
            ignored += dropped;
            data.push(&v, *label)?;
            ids.push(doc.id.clone());
            if *label == Label::Malicious {
                malicious.push(v);
                malicious_ids.push(doc.id.clone());
            }
        }
    }
    Ok(LabeledCorpus { space, data, ids, malicious, malicious_ids, ignored })
}

/// Loads the training corpus and builds its feature space from it.
pub(crate) fn train_corpus(cfg: &Config, voc: &Vocabulary) -> Result<LabeledCorpus, CliError> {
    let seeds = load_nonempty_dir("corpus.seeds", cfg.require_seeds()?)?;
    let benign = load_nonempty_dir("corpus.benign", cfg.require_benign()?)?;
    let graphs: Vec<ObjectGraph> = seeds
        .iter()
        .chain(benign.iter())
        .map(|d| d.graph.clone())
        .collect();
    let space = Arc::new(voc.build_space(&graphs));
    assemble(voc, space, &[(&seeds, Label::Malicious), (&benign, Label::Benign)])
}

/// Loads the clean test corpus into an existing space.
pub(crate) fn test_corpus(
    cfg: &Config,
    voc: &Vocabulary,
    space: &Arc<FeatureSpace>,
) -> Result<LabeledCorpus, CliError> {
    let mal = load_nonempty_dir("corpus.test_malicious", cfg.require_test_malicious()?)?;
    let ben = load_nonempty_dir("corpus.test_benign", cfg.require_test_benign()?)?;
    assemble(voc, space.clone(), &[(&mal, Label::Malicious), (&ben, Label::Benign)])
}

/// Loads only the malicious test documents (the attack inputs).
pub(crate) fn attack_inputs(
    cfg: &Config,
    voc: &Vocabulary,
    space: &Arc<FeatureSpace>,
) -> Result<LabeledCorpus, CliError> {
    let mal = load_nonempty_dir("corpus.test_malicious", cfg.require_test_malicious()?)?;
    assemble(voc, space.clone(), &[(&mal, Label::Malicious)])
}

// ---- trained artifacts -------------------------------------------------------

pub(crate) fn load_space(cfg: &Config, kind: FeatureKind) -> Result<Arc<FeatureSpace>, CliError> {
    let text = read_out_text(cfg, &space_file_name(kind), "run `conserva train` first")?;
    Ok(Arc::new(FeatureSpace::from_file_string(kind, &text)))
}

pub(crate) fn load_model(
    cfg: &Config,
    name: &str,
    space: &Arc<FeatureSpace>,
) -> Result<LinearModel, CliError> {
    let text = read_out_text(cfg, name, "run `conserva train` first")?;
    LinearModel::from_json(&text, space.clone()).map_err(CliError::from)
}

// ---- frozen features ---------------------------------------------------------

/// The attack's full frozen set: the explicit names (validated against the
/// space) plus, when requested, the unified conserved features of the
/// active vocabulary, read from the probe reports.
pub(crate) fn effective_frozen(
    cfg: &Config,
    entry: &AttackEntry,
    voc: &Vocabulary,
    space: &Arc<FeatureSpace>,
) -> Result<BTreeSet<String>, CliError> {
    let mut frozen = entry.config.frozen.clone();
    for name in &frozen {
        if space.index_of(name).is_none() {
            return Err(CliError::config(format!(
                "attack '{}' freezes unknown feature '{name}'",
                entry.name
            )));
        }
    }
    if entry.freeze_conserved {
        let conserved = conserved_names(cfg, voc)?;
        frozen.extend(conserved.into_iter().filter(|n| space.index_of(n).is_some()));
    }
    Ok(frozen)
}

/// The unified conserved set expressed in the active vocabulary.
fn conserved_names(cfg: &Config, voc: &Vocabulary) -> Result<BTreeSet<String>, CliError> {
    const HINT: &str = "run `conserva conserve` first to freeze conserved features";
    match voc.kind {
        FeatureKind::Sl2013 => {
            let uniform = parse_uniform_json(&read_out_text(cfg, UNIFORM_REPORT, HINT)?)
                .map_err(CliError::data)?;
            Ok(uniform.s)
        }
        FeatureKind::Hidost => {
            let uniform = parse_uniform_json(&read_out_text(cfg, UNIFORM_REPORT, HINT)?)
                .map_err(CliError::data)?;
            let mut out = BTreeSet::new();
            for name in &uniform.s {
                let path = StructuralPath::parse(name).map_err(CliError::data)?;
                out.insert(consolidate(&path, &voc.rules).render());
            }
            Ok(out)
        }
        FeatureKind::PdfRateB => {
            let text = read_out_text(cfg, COUNTS_REPORT, HINT)?;
            let mapping: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::data(format!("{COUNTS_REPORT}: {e}")))?;
            let names = mapping
                .get("uniform")
                .and_then(|u| u.get("S"))
                .and_then(|s| s.as_array())
                .ok_or_else(|| {
                    CliError::data(format!("{COUNTS_REPORT}: missing uniform conserved set"))
                })?;
            names
                .iter()
                .map(|v| {
                    v.as_str().map(str::to_string).ok_or_else(|| {
                        CliError::data(format!("{COUNTS_REPORT}: non-string feature name"))
                    })
                })
                .collect()
        }
    }
}

/// Reads the per-seed probe report back in.
pub(crate) fn read_per_seed(
    cfg: &Config,
    hint: &str,
) -> Result<Vec<conserva_core::pipeline::ConservedSets>, CliError> {
    parse_conserved_sets_jsonl(&read_out_text(cfg, PER_SEED_REPORT, hint)?)
        .map_err(CliError::data)
}
