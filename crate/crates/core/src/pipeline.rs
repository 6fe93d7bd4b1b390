//! The conserved-feature pipeline.
//!
//! For each malicious seed document, every structural-path feature the seed
//! exhibits is probed twice against a malice oracle:
//!
//! 1. **Deletion pass** — the path is deleted. If the document stays
//!    malicious the feature is *obligatory* (`O`): the payload survives
//!    without it. If the document turns benign the feature is *preliminarily
//!    conserved*: removing it broke the malicious behaviour.
//! 2. **Replacement pass** — each preliminary feature's value is replaced
//!    with benign donor content, which keeps the path present but swaps the
//!    payload underneath it. Features that stay malicious under replacement
//!    are demoted to `O` (the path itself was never load-bearing); features
//!    that turn benign are *conserved* (`S`): an attacker cannot keep the
//!    malicious behaviour while clearing them.
//!
//! Deletion side effects are tracked per feature (`D[j]`: the features that
//!    flip alongside `j`), because eliminating a feature must drag its
//!    dependents along.
//!
//! Per-seed results are unified across seeds by forward elimination: a
//! feature seen obligatory often enough relative to how often it was
//! conserved (threshold `β`) is discarded together with its dependents.
//! The surviving set is what a conservative defender can freeze.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::features::{
    consolidate, count_space, extract_counts, extract_paths, ConsolidationRule, CountFeatureDef,
    FeatureSpace, StructuralPath,
};
use crate::mutation::{delete_path, replace_path, select_donor, MutationError};
use crate::oracle::{MaliceOracle, OracleError, Outcome};
use crate::pdf::{serialize_pdf, ObjectGraph, PdfError};

/// One corpus document: a stable identifier plus its parsed graph.
#[derive(Debug, Clone)]
pub struct SeedRecord {
    pub id: String,
    pub graph: ObjectGraph,
}

/// Per-seed probe result. Feature names are rendered paths (or count-feature
/// names after the count mapping). `S`, `O` and `inconclusive` are pairwise
/// disjoint; `D` maps each probed feature to the features that flipped
/// alongside it during deletion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConservedSets {
    #[serde(rename = "seed")]
    pub seed_id: String,
    #[serde(rename = "S")]
    pub s: BTreeSet<String>,
    #[serde(rename = "O")]
    pub o: BTreeSet<String>,
    pub inconclusive: BTreeSet<String>,
    #[serde(rename = "D")]
    pub d: BTreeMap<String, BTreeSet<String>>,
}

impl ConservedSets {
    fn empty(seed_id: String) -> Self {
        ConservedSets {
            seed_id,
            s: BTreeSet::new(),
            o: BTreeSet::new(),
            inconclusive: BTreeSet::new(),
            d: BTreeMap::new(),
        }
    }
}

/// Elimination threshold, kept as an exact rational so `o ≥ β·s` never
/// depends on floating-point rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Beta {
    num: u64,
    den: u64,
}

impl Beta {
    pub fn new(num: u64, den: u64) -> Result<Self, String> {
        if den == 0 {
            return Err("beta denominator must be non-zero".into());
        }
        let g = gcd(num.max(1), den);
        Ok(Beta { num: num / g, den: den / g })
    }

    pub fn from_integer(n: u64) -> Self {
        Beta { num: n, den: 1 }
    }

    /// Whether `o_count ≥ β · s_count`, evaluated in integers.
    pub fn meets(&self, o_count: usize, s_count: usize) -> bool {
        (o_count as u128) * (self.den as u128) >= (self.num as u128) * (s_count as u128)
    }

    pub fn is_positive(&self) -> bool {
        self.num > 0
    }
}

impl Default for Beta {
    fn default() -> Self {
        Beta::from_integer(3)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

impl std::fmt::Display for Beta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl std::str::FromStr for Beta {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: u64 = num.trim().parse().map_err(|_| format!("bad beta numerator '{num}'"))?;
            let den: u64 = den.trim().parse().map_err(|_| format!("bad beta denominator '{den}'"))?;
            return Beta::new(num, den);
        }
        if let Some((whole, frac)) = s.split_once('.') {
            let whole: u64 = if whole.is_empty() {
                0
            } else {
                whole.parse().map_err(|_| format!("bad beta '{s}'"))?
            };
            if frac.len() > 18 || frac.chars().any(|c| !c.is_ascii_digit()) {
                return Err(format!("bad beta '{s}'"));
            }
            let scale = 10u64.pow(frac.len() as u32);
            let frac_v: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| format!("bad beta '{s}'"))? };
            return Beta::new(whole * scale + frac_v, scale);
        }
        let n: u64 = s.parse().map_err(|_| format!("bad beta '{s}'"))?;
        Ok(Beta::from_integer(n))
    }
}

impl Serialize for Beta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Beta;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a beta threshold: integer, decimal, or \"p/q\" string")
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Beta, E> {
                Ok(Beta::from_integer(v))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Beta, E> {
                if v < 0 {
                    return Err(E::custom("beta must be non-negative"));
                }
                Ok(Beta::from_integer(v as u64))
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Beta, E> {
                format!("{v}").parse().map_err(E::custom)
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Beta, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("seed '{seed_id}' is not flagged malicious by the oracle at baseline")]
    SeedNotMalicious { seed_id: String },
    #[error("oracle failed on seed '{seed_id}': {source}")]
    Oracle {
        seed_id: String,
        #[source]
        source: OracleError,
    },
    #[error("seed '{seed_id}' could not be serialized: {source}")]
    Serialize {
        seed_id: String,
        #[source]
        source: PdfError,
    },
    #[error("mutation failed on seed '{seed_id}': {source}")]
    Mutation {
        seed_id: String,
        #[source]
        source: MutationError,
    },
    #[error("no probe results for seed '{seed_id}'")]
    MissingSeed { seed_id: String },
    #[error("seed '{seed_id}' carries an invalid feature name '{name}': {reason}")]
    BadFeatureName {
        seed_id: String,
        name: String,
        reason: String,
    },
}

/// Knobs shared by the probing passes.
#[derive(Debug, Clone, Copy)]
pub struct ProbeParams {
    pub depth_limit: usize,
    /// Upper bound on concurrent probes; clamped to the oracle's declared
    /// parallelism.
    pub workers: usize,
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams { depth_limit: 10, workers: 1 }
    }
}

fn effective_workers(params: ProbeParams, oracle: &dyn MaliceOracle) -> usize {
    params.workers.max(1).min(oracle.max_parallelism().max(1))
}

/// Runs `f` over `items` with at most `workers` threads, preserving order.
pub(crate) fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let n = items.len();
    if workers <= 1 || n <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut out: Vec<Option<R>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let (tx, rx) = std::sync::mpsc::channel();
        for _ in 0..workers.min(n) {
            let tx = tx.clone();
            let next = &next;
            let f = &f;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= n {
                    break;
                }
                if tx.send((i, f(&items[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, r) in rx {
            out[i] = Some(r);
        }
    });
    out.into_iter().map(|r| r.expect("every index was produced")).collect()
}

/// Checks the baseline verdict and probes every present-path feature by
/// deletion. Features whose deletion turns the document benign land in `S`
/// (preliminary); features that stay malicious land in `O`; oracle errors
/// route the feature to `inconclusive`. `D` records each probe's collateral
/// flips (within the space, target excluded).
pub fn deletion_pass(
    seed: &SeedRecord,
    oracle: &dyn MaliceOracle,
    space: &FeatureSpace,
    params: ProbeParams,
) -> Result<ConservedSets, PipelineError> {
    let baseline = serialize_pdf(&seed.graph)
        .map_err(|source| PipelineError::Serialize { seed_id: seed.id.clone(), source })?;
    let verdict = oracle
        .evaluate(&baseline)
        .map_err(|source| PipelineError::Oracle { seed_id: seed.id.clone(), source })?;
    if !verdict.is_malicious() {
        return Err(PipelineError::SeedNotMalicious { seed_id: seed.id.clone() });
    }

    let features: Vec<StructuralPath> = extract_paths(&seed.graph, params.depth_limit)
        .into_iter()
        .filter(|p| space.index_of(&p.render()).is_some())
        .collect();

    let workers = effective_workers(params, oracle);
    let probes = parallel_map(&features, workers, |path| {
        probe_one(seed, path, None, oracle, space, params.depth_limit)
    });

    let mut sets = ConservedSets::empty(seed.id.clone());
    for (path, probe) in features.iter().zip(probes) {
        let name = path.render();
        sets.d.insert(name.clone(), probe.dependents);
        match probe.verdict {
            Ok(Outcome::Malicious) => {
                sets.o.insert(name);
            }
            Ok(Outcome::Benign) => {
                sets.s.insert(name);
            }
            Err(_) => {
                sets.inconclusive.insert(name);
            }
        }
    }
    Ok(sets)
}

struct Probe {
    dependents: BTreeSet<String>,
    verdict: Result<Outcome, OracleError>,
}

/// Probes one feature: deletion when `donor` is `None`, replacement
/// otherwise.
fn probe_one(
    seed: &SeedRecord,
    path: &StructuralPath,
    donor: Option<&ObjectGraph>,
    oracle: &dyn MaliceOracle,
    space: &FeatureSpace,
    depth_limit: usize,
) -> Probe {
    let outcome = match donor {
        None => delete_path(&seed.graph, path, depth_limit),
        Some(d) => {
            let value = select_donor(d, path);
            replace_path(&seed.graph, path, &value, depth_limit)
        }
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            return Probe {
                dependents: BTreeSet::new(),
                verdict: Err(OracleError::ProtocolViolation(format!("mutation failed: {e}"))),
            }
        }
    };
    let dependents: BTreeSet<String> = outcome
        .flipped
        .iter()
        .filter(|p| *p != path)
        .map(|p| p.render())
        .filter(|n| space.index_of(n).is_some())
        .collect();
    let verdict = serialize_pdf(&outcome.graph)
        .map_err(|e| OracleError::ProtocolViolation(format!("mutant serialization failed: {e}")))
        .and_then(|bytes| oracle.evaluate(&bytes))
        .map(|v| v.outcome);
    Probe { dependents, verdict }
}

/// Re-probes the preliminary `S` features by replacement with benign donor
/// content. Features that stay malicious move to `O`; errors move the
/// feature to `inconclusive`; the rest stay conserved.
pub fn replacement_pass(
    seed: &SeedRecord,
    prelim: &ConservedSets,
    donor: &ObjectGraph,
    oracle: &dyn MaliceOracle,
    space: &FeatureSpace,
    params: ProbeParams,
) -> Result<ConservedSets, PipelineError> {
    let mut candidates: Vec<StructuralPath> = Vec::with_capacity(prelim.s.len());
    for n in &prelim.s {
        candidates.push(StructuralPath::parse(n).map_err(|reason| {
            PipelineError::BadFeatureName { seed_id: seed.id.clone(), name: n.clone(), reason }
        })?);
    }
    let workers = effective_workers(params, oracle);
    let probes = parallel_map(&candidates, workers, |path| {
        probe_one(seed, path, Some(donor), oracle, space, params.depth_limit)
    });

    let mut out = prelim.clone();
    for (path, probe) in candidates.iter().zip(probes) {
        let name = path.render();
        match probe.verdict {
            Ok(Outcome::Malicious) => {
                // The path survives with benign content underneath: it was
                // never load-bearing for the malicious behaviour.
                out.s.remove(&name);
                out.o.insert(name);
            }
            Ok(Outcome::Benign) => {}
            Err(_) => {
                out.s.remove(&name);
                out.inconclusive.insert(name);
            }
        }
    }
    Ok(out)
}

/// Both passes in sequence.
pub fn conserve_seed(
    seed: &SeedRecord,
    donor: &ObjectGraph,
    oracle: &dyn MaliceOracle,
    space: &FeatureSpace,
    params: ProbeParams,
) -> Result<ConservedSets, PipelineError> {
    let prelim = deletion_pass(seed, oracle, space, params)?;
    replacement_pass(seed, &prelim, donor, oracle, space, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceAction {
    Kept,
    Eliminated,
    Skipped,
}

/// One forward-elimination decision, in iteration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub feature: String,
    pub o_count: usize,
    pub s_count: usize,
    pub action: TraceAction,
}

/// The unified conserved set and the audit trail that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformResult {
    #[serde(rename = "S")]
    pub s: BTreeSet<String>,
    pub eliminated: BTreeSet<String>,
    pub beta: Beta,
    pub trace: Vec<TraceEntry>,
    /// Every feature that entered the skip set, including dependents that
    /// were dragged out without their own trace entry. Not part of the
    /// report format.
    #[serde(skip)]
    pub visited: BTreeSet<String>,
}

/// Unifies per-seed conserved sets by forward elimination.
///
/// Starting from `S = ∪ S_i`, features are visited in lexicographic order of
/// the snapshot taken before elimination. A feature already dragged out as a
/// dependent is skipped. Otherwise, with `o` = number of seeds that found it
/// obligatory and `s` = number that found it conserved, `o ≥ β·s` eliminates
/// the feature together with its deletion dependents `D[j] = ∪ D_i[j]`.
pub fn forward_elimination(sets: &[ConservedSets], beta: Beta) -> UniformResult {
    let mut s: BTreeSet<String> = sets.iter().flat_map(|cs| cs.s.iter().cloned()).collect();
    let snapshot: Vec<String> = s.iter().cloned().collect();
    let mut union_d: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for cs in sets {
        for (j, deps) in &cs.d {
            union_d.entry(j.clone()).or_default().extend(deps.iter().cloned());
        }
    }

    let mut q: BTreeSet<String> = BTreeSet::new();
    let mut trace = Vec::with_capacity(snapshot.len());
    for j in &snapshot {
        let o_count = sets.iter().filter(|cs| cs.o.contains(j)).count();
        let s_count = sets.iter().filter(|cs| cs.s.contains(j)).count();
        if q.contains(j) {
            trace.push(TraceEntry {
                feature: j.clone(),
                o_count,
                s_count,
                action: TraceAction::Skipped,
            });
            continue;
        }
        if beta.meets(o_count, s_count) {
            let mut group: BTreeSet<String> =
                union_d.get(j).cloned().unwrap_or_default();
            group.insert(j.clone());
            for g in &group {
                s.remove(g);
                q.insert(g.clone());
            }
            trace.push(TraceEntry {
                feature: j.clone(),
                o_count,
                s_count,
                action: TraceAction::Eliminated,
            });
        } else {
            trace.push(TraceEntry {
                feature: j.clone(),
                o_count,
                s_count,
                action: TraceAction::Kept,
            });
        }
    }

    let eliminated: BTreeSet<String> =
        snapshot.iter().filter(|j| !s.contains(*j)).cloned().collect();
    UniformResult { s, eliminated, beta, trace, visited: q }
}

/// The consolidated-path view of a unified conserved set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HidostMapping {
    pub features: BTreeSet<String>,
    /// Consolidated target to the conserved paths that map onto it.
    pub sources: BTreeMap<String, BTreeSet<String>>,
    /// Targets claimed by more than one conserved path.
    pub collisions: BTreeMap<String, BTreeSet<String>>,
}

/// Applies consolidation rules to each conserved path.
pub fn map_to_hidost(
    uniform_s: &BTreeSet<String>,
    rules: &[ConsolidationRule],
) -> Result<HidostMapping, String> {
    let mut sources: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for name in uniform_s {
        let path = StructuralPath::parse(name)?;
        let target = consolidate(&path, rules).render();
        sources.entry(target).or_default().insert(name.clone());
    }
    let features: BTreeSet<String> = sources.keys().cloned().collect();
    let collisions: BTreeMap<String, BTreeSet<String>> =
        sources.iter().filter(|(_, v)| v.len() > 1).map(|(k, v)| (k.clone(), v.clone())).collect();
    Ok(HidostMapping { features, sources, collisions })
}

/// The count-feature view of per-seed conserved sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountMapping {
    pub per_seed: Vec<ConservedSets>,
    pub uniform: UniformResult,
}

/// Projects per-seed path sets onto count features.
///
/// For each seed, deleting a conserved path and watching which count bits
/// fall from 1 to 0 yields the seed's conserved count features; bits that
/// fall only under obligatory-path deletions form the obligatory side.
/// Inconclusive paths contribute nothing. The per-seed sets are then unified
/// with the same forward elimination used for paths.
pub fn map_to_counts(
    seeds: &[SeedRecord],
    per_seed: &[ConservedSets],
    defs: &[CountFeatureDef],
    beta: Beta,
    depth_limit: usize,
) -> Result<CountMapping, PipelineError> {
    let space = std::sync::Arc::new(count_space(defs));
    let by_id: BTreeMap<&str, &SeedRecord> = seeds.iter().map(|s| (s.id.as_str(), s)).collect();

    let mut mapped = Vec::with_capacity(per_seed.len());
    for cs in per_seed {
        let seed = by_id
            .get(cs.seed_id.as_str())
            .ok_or_else(|| PipelineError::MissingSeed { seed_id: cs.seed_id.clone() })?;
        let base = extract_counts(&seed.graph, defs, &space);

        let flips_for = |names: &BTreeSet<String>| -> Result<BTreeSet<String>, PipelineError> {
            let mut flipped = BTreeSet::new();
            for name in names {
                let path = StructuralPath::parse(name).map_err(|reason| {
                    PipelineError::BadFeatureName {
                        seed_id: cs.seed_id.clone(),
                        name: name.clone(),
                        reason,
                    }
                })?;
                let outcome = delete_path(&seed.graph, &path, depth_limit)
                    .map_err(|source| PipelineError::Mutation { seed_id: cs.seed_id.clone(), source })?;
                let counts = extract_counts(&outcome.graph, defs, &space);
                for (i, fname) in space.names().iter().enumerate() {
                    if base.bits()[i] && !counts.bits()[i] {
                        flipped.insert(fname.clone());
                    }
                }
            }
            Ok(flipped)
        };

        let s_side = flips_for(&cs.s)?;
        let o_flips = flips_for(&cs.o)?;
        let o_side: BTreeSet<String> = o_flips.difference(&s_side).cloned().collect();

        mapped.push(ConservedSets {
            seed_id: cs.seed_id.clone(),
            s: s_side,
            o: o_side,
            inconclusive: BTreeSet::new(),
            d: BTreeMap::new(),
        });
    }
    let uniform = forward_elimination(&mapped, beta);
    Ok(CountMapping { per_seed: mapped, uniform })
}

/// How much of a model's selected feature set is conserved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub conserved_size: usize,
    pub selected_size: usize,
    pub overlap_size: usize,
    pub overlap: BTreeSet<String>,
}

pub fn overlap_analysis(conserved: &BTreeSet<String>, selected: &BTreeSet<String>) -> OverlapReport {
    let overlap: BTreeSet<String> = conserved.intersection(selected).cloned().collect();
    OverlapReport {
        conserved_size: conserved.len(),
        selected_size: selected.len(),
        overlap_size: overlap.len(),
        overlap,
    }
}

/// Renders per-seed sets as JSON Lines (one seed per line).
pub fn conserved_sets_to_jsonl(sets: &[ConservedSets]) -> String {
    let mut out = String::new();
    for cs in sets {
        out.push_str(&serde_json::to_string(cs).expect("conserved sets encode"));
        out.push('\n');
    }
    out
}

pub fn parse_conserved_sets_jsonl(text: &str) -> Result<Vec<ConservedSets>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(line).map_err(|e| format!("conserved sets line {}: {e}", i + 1))?,
        );
    }
    Ok(out)
}

pub fn uniform_to_json(u: &UniformResult) -> String {
    let mut text = serde_json::to_string_pretty(u).expect("uniform result encode");
    text.push('\n');
    text
}

pub fn parse_uniform_json(text: &str) -> Result<UniformResult, String> {
    serde_json::from_str(text).map_err(|e| format!("uniform result: {e}"))
}
