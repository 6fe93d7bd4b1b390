//! Run configuration: one JSON document, overridable by `CPATH_*`
//! environment variables and the global command-line flags.
//!
//! Precedence, highest first: command-line flags, environment variables,
//! the configuration file, built-in defaults. Relative paths inside the
//! file resolve against the file's directory; paths from flags or the
//! environment resolve against the working directory.
//!
//! Recognized environment variables:
//!
//! - `CPATH_CONFIG` — configuration file (like `--config`)
//! - `CPATH_OUT` — output directory (like `--out`)
//! - `CPATH_SEED` — root RNG seed (like `--seed`)
//! - `CPATH_WORKERS`, `CPATH_DEPTH_LIMIT`, `CPATH_BETA`
//! - `CPATH_SEEDS`, `CPATH_BENIGN`, `CPATH_DONOR`,
//!   `CPATH_TEST_MALICIOUS`, `CPATH_TEST_BENIGN` — corpus directories
//! - `CPATH_CONSOLIDATION_RULES`, `CPATH_COUNT_FEATURES` — vocabulary files
//! - `CPATH_SPACE` — training vocabulary (`sl2013`, `hidost`, `pdf_rate_b`)
//! - `CPATH_ORACLE_KIND` plus `CPATH_ORACLE_RULES`, `CPATH_ORACLE_STORE`,
//!   `CPATH_ORACLE_PROGRAM`, `CPATH_ORACLE_TIMEOUT_MS`,
//!   `CPATH_ORACLE_PARALLELISM` — replaces the oracle wholesale; the
//!   `KIND` variable is required whenever any other oracle variable is set.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use conserva_core::features::FeatureKind;
use conserva_core::learn::{AttackConfig, AttackKind, Regularizer, RetrainParams, TrainParams};
use conserva_core::pipeline::Beta;

use crate::error::CliError;

/// Values taken from the command line; they win over everything else.
#[derive(Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// The fully materialized configuration. Every command embeds this in its
/// `run_config.json` so a report names all the knobs that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct Config {
    pub corpus: CorpusConfig,
    pub oracle: Option<OracleConfig>,
    pub pipeline: PipelineConfig,
    pub learning: LearningConfig,
    pub out: PathBuf,
    pub rng_seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusConfig {
    /// Malicious documents used for probing and training.
    pub seeds: Option<PathBuf>,
    /// Benign documents used for training and as replacement donors.
    pub benign: Option<PathBuf>,
    /// Donor document for the replacement pass; defaults to the first
    /// benign document.
    pub donor: Option<PathBuf>,
    pub test_malicious: Option<PathBuf>,
    pub test_benign: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleConfig {
    /// In-process signature rules (JSON list of rules).
    Rule { rules: PathBuf },
    /// Verdicts keyed by content hash, JSON Lines store. Without a
    /// fallback, a miss is an error (strict replay).
    Cached {
        store: PathBuf,
        fallback: Option<Box<OracleConfig>>,
        /// Persist newly recorded verdicts back to the store file.
        write_back: bool,
    },
    /// External scanner program, invoked once per document.
    Command { program: PathBuf, timeout_ms: u64, parallelism: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub depth_limit: usize,
    pub beta: Beta,
    /// Consolidation rule file; absent means the built-in (empty) rule set.
    pub consolidation_rules: Option<PathBuf>,
    /// Count-feature definition file; absent means the built-in set.
    pub count_features: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LearningConfig {
    /// Which vocabulary classifiers are trained on.
    pub space: FeatureKind,
    pub train: TrainParams,
    pub attacks: Vec<AttackEntry>,
    pub retrain: RetrainParams,
}

/// One configured attack. `freeze_conserved` extends the frozen set with
/// the unified conserved features of the active vocabulary.
#[derive(Debug, Clone, Serialize)]
pub struct AttackEntry {
    pub name: String,
    pub freeze_conserved: bool,
    #[serde(flatten)]
    pub config: AttackConfig,
}

// ---- raw file form ---------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    corpus: Option<RawCorpus>,
    oracle: Option<RawOracle>,
    pipeline: Option<RawPipeline>,
    learning: Option<RawLearning>,
    out: Option<String>,
    rng_seed: Option<u64>,
    workers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorpus {
    seeds: Option<String>,
    benign: Option<String>,
    donor: Option<String>,
    test_malicious: Option<String>,
    test_benign: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawOracle {
    Rule {
        rules: String,
    },
    Cached {
        store: String,
        fallback: Option<Box<RawOracle>>,
        #[serde(default)]
        write_back: bool,
    },
    Command {
        program: String,
        timeout_ms: Option<u64>,
        parallelism: Option<usize>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPipeline {
    depth_limit: Option<usize>,
    beta: Option<Beta>,
    consolidation_rules: Option<String>,
    count_features: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLearning {
    space: Option<FeatureKind>,
    train: Option<RawTrain>,
    attacks: Option<Vec<RawAttack>>,
    retrain: Option<RawRetrain>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    reg: Option<Regularizer>,
    epochs: Option<usize>,
    eta0: Option<f64>,
    decay: Option<f64>,
    rng_seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct RawAttack {
    name: Option<String>,
    #[serde(default)]
    freeze_conserved: bool,
    #[serde(default)]
    frozen: BTreeSet<String>,
    rng_seed: Option<u64>,
    #[serde(flatten)]
    kind: AttackKind,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRetrain {
    max_iterations: Option<usize>,
    stop_when_no_new: Option<bool>,
}

// ---- loading ---------------------------------------------------------------

pub fn load(overrides: &Overrides) -> Result<Config, CliError> {
    let config_path = match &overrides.config {
        Some(p) => Some(p.clone()),
        None => env_string("CPATH_CONFIG")?.map(PathBuf::from),
    };
    let (raw, base_dir) = match &config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            let raw: RawConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
            let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            (raw, base)
        }
        None => (RawConfig::default(), PathBuf::from(".")),
    };
    resolve(raw, &base_dir, overrides)
}

fn env_string(key: &str) -> Result<Option<String>, CliError> {
    match std::env::var(key) {
        Ok(v) => Ok(Some(v)),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::config(format!("{key}: {e}"))),
    }
}

fn env_parsed<T: std::str::FromStr>(key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    match env_string(key)? {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| CliError::config(format!("{key}='{v}': {e}"))),
    }
}

/// A corpus/vocabulary path from the environment (working-directory
/// relative), falling back to the file value rebased onto the config dir.
fn pick_path(
    env_key: &str,
    file_value: Option<&String>,
    base: &Path,
) -> Result<Option<PathBuf>, CliError> {
    if let Some(v) = env_string(env_key)? {
        return Ok(Some(PathBuf::from(v)));
    }
    Ok(file_value.map(|v| rebase(base, v)))
}

fn rebase(base: &Path, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn require_exists(what: &str, path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::config(format!("{what} does not exist: {}", path.display())))
    }
}

fn resolve(raw: RawConfig, base: &Path, overrides: &Overrides) -> Result<Config, CliError> {
    let rng_seed = overrides
        .seed
        .or(env_parsed::<u64>("CPATH_SEED")?)
        .or(raw.rng_seed)
        .unwrap_or(7);

    let out = overrides
        .out
        .clone()
        .or(env_string("CPATH_OUT")?.map(PathBuf::from))
        .or(raw.out.as_ref().map(|v| rebase(base, v)))
        .unwrap_or_else(|| PathBuf::from("out"));

    let workers = env_parsed::<usize>("CPATH_WORKERS")?
        .or(raw.workers)
        .unwrap_or(4);
    if workers == 0 {
        return Err(CliError::config("workers must be at least 1"));
    }

    let raw_corpus = raw.corpus.unwrap_or_default();
    let corpus = CorpusConfig {
        seeds: pick_path("CPATH_SEEDS", raw_corpus.seeds.as_ref(), base)?,
        benign: pick_path("CPATH_BENIGN", raw_corpus.benign.as_ref(), base)?,
        donor: pick_path("CPATH_DONOR", raw_corpus.donor.as_ref(), base)?,
        test_malicious: pick_path(
            "CPATH_TEST_MALICIOUS",
            raw_corpus.test_malicious.as_ref(),
            base,
        )?,
        test_benign: pick_path("CPATH_TEST_BENIGN", raw_corpus.test_benign.as_ref(), base)?,
    };
    for (what, path) in [
        ("corpus.seeds", &corpus.seeds),
        ("corpus.benign", &corpus.benign),
        ("corpus.donor", &corpus.donor),
        ("corpus.test_malicious", &corpus.test_malicious),
        ("corpus.test_benign", &corpus.test_benign),
    ] {
        if let Some(p) = path {
            require_exists(what, p)?;
        }
    }

    let raw_pipeline = raw.pipeline.unwrap_or_default();
    let depth_limit = env_parsed::<usize>("CPATH_DEPTH_LIMIT")?
        .or(raw_pipeline.depth_limit)
        .unwrap_or(10);
    if depth_limit == 0 {
        return Err(CliError::config("pipeline.depth_limit must be at least 1"));
    }
    let beta = match env_string("CPATH_BETA")? {
        Some(v) => v
            .parse::<Beta>()
            .map_err(|e| CliError::config(format!("CPATH_BETA='{v}': {e}")))?,
        None => raw_pipeline.beta.unwrap_or_default(),
    };
    if !beta.is_positive() {
        return Err(CliError::config("pipeline.beta must be positive"));
    }
    let consolidation_rules = pick_path(
        "CPATH_CONSOLIDATION_RULES",
        raw_pipeline.consolidation_rules.as_ref(),
        base,
    )?;
    if let Some(p) = &consolidation_rules {
        require_exists("pipeline.consolidation_rules", p)?;
    }
    let count_features =
        pick_path("CPATH_COUNT_FEATURES", raw_pipeline.count_features.as_ref(), base)?;
    if let Some(p) = &count_features {
        require_exists("pipeline.count_features", p)?;
    }

    let oracle = resolve_oracle(raw.oracle, base)?;

    let raw_learning = raw.learning.unwrap_or_default();
    let space = match env_string("CPATH_SPACE")? {
        Some(v) => serde_json::from_value(serde_json::Value::String(v.clone()))
            .map_err(|_| CliError::config(format!("CPATH_SPACE='{v}': unknown vocabulary")))?,
        None => raw_learning.space.unwrap_or(FeatureKind::Sl2013),
    };
    let defaults = TrainParams::default();
    let rt = raw_learning.train.unwrap_or_default();
    let train = TrainParams {
        reg: rt.reg.unwrap_or(defaults.reg),
        epochs: rt.epochs.unwrap_or(defaults.epochs),
        eta0: rt.eta0.unwrap_or(defaults.eta0),
        decay: rt.decay.unwrap_or(defaults.decay),
        rng_seed: rt.rng_seed.unwrap_or(rng_seed),
    };
    let attacks = resolve_attacks(raw_learning.attacks, rng_seed)?;
    let rr = raw_learning.retrain.unwrap_or_default();
    let retrain_defaults = RetrainParams::default();
    let retrain = RetrainParams {
        max_iterations: rr.max_iterations.unwrap_or(retrain_defaults.max_iterations),
        stop_when_no_new: rr.stop_when_no_new.unwrap_or(retrain_defaults.stop_when_no_new),
    };

    Ok(Config {
        corpus,
        oracle,
        pipeline: PipelineConfig { depth_limit, beta, consolidation_rules, count_features },
        learning: LearningConfig { space, train, attacks, retrain },
        out,
        rng_seed,
        workers,
    })
}

fn resolve_oracle(raw: Option<RawOracle>, base: &Path) -> Result<Option<OracleConfig>, CliError> {
    let env_kind = env_string("CPATH_ORACLE_KIND")?;
    let any_param = ["RULES", "STORE", "PROGRAM", "TIMEOUT_MS", "PARALLELISM"]
        .iter()
        .map(|s| env_string(&format!("CPATH_ORACLE_{s}")))
        .collect::<Result<Vec<_>, _>>()?
        .iter()
        .any(Option::is_some);
    if env_kind.is_none() && any_param {
        return Err(CliError::config(
            "CPATH_ORACLE_* variables need CPATH_ORACLE_KIND to be set",
        ));
    }
    if let Some(kind) = env_kind {
        // The environment replaces the oracle wholesale; parameters are
        // working-directory relative.
        let cfg = match kind.as_str() {
            "rule" => {
                let rules = env_string("CPATH_ORACLE_RULES")?
                    .ok_or_else(|| CliError::config("rule oracle needs CPATH_ORACLE_RULES"))?;
                OracleConfig::Rule { rules: PathBuf::from(rules) }
            }
            "cached" => {
                let store = env_string("CPATH_ORACLE_STORE")?
                    .ok_or_else(|| CliError::config("cached oracle needs CPATH_ORACLE_STORE"))?;
                OracleConfig::Cached {
                    store: PathBuf::from(store),
                    fallback: None,
                    write_back: false,
                }
            }
            "command" => {
                let program = env_string("CPATH_ORACLE_PROGRAM")?
                    .ok_or_else(|| CliError::config("command oracle needs CPATH_ORACLE_PROGRAM"))?;
                OracleConfig::Command {
                    program: PathBuf::from(program),
                    timeout_ms: env_parsed::<u64>("CPATH_ORACLE_TIMEOUT_MS")?.unwrap_or(60_000),
                    parallelism: env_parsed::<usize>("CPATH_ORACLE_PARALLELISM")?.unwrap_or(1),
                }
            }
            other => {
                return Err(CliError::config(format!(
                    "CPATH_ORACLE_KIND='{other}': expected rule, cached, or command"
                )))
            }
        };
        validate_oracle(&cfg)?;
        return Ok(Some(cfg));
    }
    let Some(raw) = raw else { return Ok(None) };
    let cfg = rebase_oracle(raw, base);
    validate_oracle(&cfg)?;
    Ok(Some(cfg))
}

fn rebase_oracle(raw: RawOracle, base: &Path) -> OracleConfig {
    match raw {
        RawOracle::Rule { rules } => OracleConfig::Rule { rules: rebase(base, &rules) },
        RawOracle::Cached { store, fallback, write_back } => OracleConfig::Cached {
            store: rebase(base, &store),
            fallback: fallback.map(|f| Box::new(rebase_oracle(*f, base))),
            write_back,
        },
        RawOracle::Command { program, timeout_ms, parallelism } => {
            // Bare program names are left for PATH lookup at spawn time.
            let program = if program.contains(std::path::MAIN_SEPARATOR) {
                rebase(base, &program)
            } else {
                PathBuf::from(program)
            };
            OracleConfig::Command {
                program,
                timeout_ms: timeout_ms.unwrap_or(60_000),
                parallelism: parallelism.unwrap_or(1).max(1),
            }
        }
    }
}

fn validate_oracle(cfg: &OracleConfig) -> Result<(), CliError> {
    match cfg {
        OracleConfig::Rule { rules } => require_exists("oracle.rules", rules),
        OracleConfig::Cached { store, fallback, .. } => {
            // A missing store is only acceptable when a fallback can fill
            // it; strict replay requires recorded verdicts.
            if !store.exists() && fallback.is_none() {
                return Err(CliError::config(format!(
                    "oracle.store does not exist: {}",
                    store.display()
                )));
            }
            if let Some(f) = fallback {
                validate_oracle(f)?;
            }
            Ok(())
        }
        // A missing program is an oracle failure at evaluation time, not a
        // configuration error: PATH lookup happens at spawn.
        OracleConfig::Command { .. } => Ok(()),
    }
}

fn resolve_attacks(
    raw: Option<Vec<RawAttack>>,
    rng_seed: u64,
) -> Result<Vec<AttackEntry>, CliError> {
    let raw = raw.unwrap_or_else(|| {
        vec![
            RawAttack {
                name: Some("coordinate-greedy".into()),
                freeze_conserved: false,
                frozen: BTreeSet::new(),
                rng_seed: None,
                kind: AttackKind::default(),
            },
            RawAttack {
                name: Some("coordinate-greedy-frozen".into()),
                freeze_conserved: true,
                frozen: BTreeSet::new(),
                rng_seed: None,
                kind: AttackKind::default(),
            },
            RawAttack {
                name: Some("salt-pepper".into()),
                freeze_conserved: false,
                frozen: BTreeSet::new(),
                rng_seed: None,
                kind: AttackKind::SaltPepper { max_draws: 10, epsilon: 1000 },
            },
        ]
    });
    let mut entries = Vec::with_capacity(raw.len());
    let mut names = BTreeSet::new();
    for (i, a) in raw.into_iter().enumerate() {
        let slug = match a.kind {
            AttackKind::CoordinateGreedy { .. } => "coordinate-greedy",
            AttackKind::SaltPepper { .. } => "salt-pepper",
        };
        let name = a.name.unwrap_or_else(|| format!("{slug}-{}", i + 1));
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
        {
            return Err(CliError::config(format!(
                "attack name '{name}' must be lowercase letters, digits, '-' or '_' \
                 (it becomes part of a file name)"
            )));
        }
        if !names.insert(name.clone()) {
            return Err(CliError::config(format!("duplicate attack name '{name}'")));
        }
        entries.push(AttackEntry {
            name,
            freeze_conserved: a.freeze_conserved,
            config: AttackConfig {
                kind: a.kind,
                frozen: a.frozen,
                rng_seed: a.rng_seed.unwrap_or(rng_seed),
            },
        });
    }
    Ok(entries)
}

impl Config {
    /// The materialized form embedded in every report directory.
    pub fn to_pretty_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config encodes");
        text.push('\n');
        text
    }

    pub fn require_seeds(&self) -> Result<&Path, CliError> {
        self.corpus
            .seeds
            .as_deref()
            .ok_or_else(|| CliError::config("corpus.seeds is required by this command"))
    }

    pub fn require_benign(&self) -> Result<&Path, CliError> {
        self.corpus
            .benign
            .as_deref()
            .ok_or_else(|| CliError::config("corpus.benign is required by this command"))
    }

    pub fn require_test_malicious(&self) -> Result<&Path, CliError> {
        self.corpus
            .test_malicious
            .as_deref()
            .ok_or_else(|| CliError::config("corpus.test_malicious is required by this command"))
    }

    pub fn require_test_benign(&self) -> Result<&Path, CliError> {
        self.corpus
            .test_benign
            .as_deref()
            .ok_or_else(|| CliError::config("corpus.test_benign is required by this command"))
    }

    pub fn require_oracle(&self) -> Result<&OracleConfig, CliError> {
        self.oracle
            .as_ref()
            .ok_or_else(|| CliError::config("an oracle is required by this command"))
    }
}
