//! Structural features of PDF object graphs.
//!
//! Two feature families are supported:
//!
//! - **Structural paths**: sequences of dictionary keys walked from the
//!   document catalog, rendered like `/OpenAction/JS`. Arrays are transparent
//!   (they contribute no component) and references are followed. A path is a
//!   binary feature: present or not.
//! - **Count features**: named counters over token occurrences anywhere in
//!   the graph (dictionary keys and name values), binarized against a
//!   per-feature threshold. These mirror the count-style inputs of
//!   ensemble structural classifiers.
//!
//! Path consolidation rules rewrite path families onto canonical
//! representatives (for example collapsing per-page subtrees), which is how
//! path features are aligned with coarser path vocabularies.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::pdf::{Dict, ObjectGraph, PdfObject};

/// A structural path: the dictionary keys on a walk from the catalog.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StructuralPath(Vec<String>);

impl StructuralPath {
    /// Builds a path from components. Components must be non-empty.
    pub fn new(components: Vec<String>) -> Result<Self, String> {
        if components.is_empty() {
            return Err("a structural path needs at least one component".into());
        }
        if components.iter().any(String::is_empty) {
            return Err("structural path components must be non-empty".into());
        }
        Ok(StructuralPath(components))
    }

    /// Parses the rendered form, e.g. `/Names/JavaScript`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let rest = text
            .strip_prefix('/')
            .ok_or_else(|| format!("path '{text}' does not start with '/'"))?;
        Self::new(rest.split('/').map(str::to_string).collect())
    }

    pub fn components(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn render(&self) -> String {
        format!("/{}", self.0.join("/"))
    }
}

impl fmt::Display for StructuralPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Serialize for StructuralPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for StructuralPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        StructuralPath::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Extracts every structural path of the graph, up to `depth_limit`
/// components per path.
///
/// Traversal starts at the catalog dictionary, records one path per
/// dictionary key encountered, recurses into values, passes through arrays
/// without adding a component, follows references, and never revisits an
/// object number already on the current chain (so cyclic documents
/// terminate).
pub fn extract_paths(graph: &ObjectGraph, depth_limit: usize) -> BTreeSet<StructuralPath> {
    let mut out = BTreeSet::new();
    if depth_limit == 0 {
        return out;
    }
    let mut chain = vec![graph.root_number()];
    let mut comps: Vec<String> = Vec::new();
    walk_dict(graph, graph.root_dict(), &mut chain, &mut comps, depth_limit, &mut out);
    out
}

fn walk_dict(
    graph: &ObjectGraph,
    dict: &Dict,
    chain: &mut Vec<u32>,
    comps: &mut Vec<String>,
    limit: usize,
    out: &mut BTreeSet<StructuralPath>,
) {
    if comps.len() >= limit {
        return;
    }
    for (key, value) in dict {
        comps.push(key.clone());
        out.insert(StructuralPath(comps.clone()));
        walk_value(graph, value, chain, comps, limit, out);
        comps.pop();
    }
}

fn walk_value(
    graph: &ObjectGraph,
    value: &PdfObject,
    chain: &mut Vec<u32>,
    comps: &mut Vec<String>,
    limit: usize,
    out: &mut BTreeSet<StructuralPath>,
) {
    match value {
        PdfObject::Dictionary(d) => walk_dict(graph, d, chain, comps, limit, out),
        PdfObject::Stream(s) => walk_dict(graph, &s.dict, chain, comps, limit, out),
        PdfObject::Array(items) => {
            for item in items {
                walk_value(graph, item, chain, comps, limit, out);
            }
        }
        PdfObject::Reference(r) => {
            // Follow the reference chain, putting every visited object
            // number on the chain guard so cycles stop the walk.
            let before = chain.len();
            let mut cur = *r;
            let terminal = loop {
                if chain.contains(&cur.number) {
                    break None;
                }
                chain.push(cur.number);
                match graph.objects().get(&cur.number) {
                    None => break None,
                    Some(PdfObject::Reference(next)) => cur = *next,
                    Some(obj) => break Some(obj),
                }
            };
            if let Some(obj) = terminal {
                walk_value(graph, obj, chain, comps, limit, out);
            }
            chain.truncate(before);
        }
        _ => {}
    }
}

/// One rewrite rule: a pattern path, optionally ending in a `*` wildcard that
/// matches exactly one arbitrary component, and the replacement path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsolidationRule {
    pattern: Vec<String>,
    wildcard: bool,
    replacement: Vec<String>,
}

impl ConsolidationRule {
    /// The number of leading components the pattern consumes.
    fn pattern_len(&self) -> usize {
        self.pattern.len() + usize::from(self.wildcard)
    }

    /// Whether the pattern matches a prefix of `comps`.
    fn matches(&self, comps: &[String]) -> bool {
        if comps.len() < self.pattern_len() {
            return false;
        }
        self.pattern.iter().zip(comps).all(|(p, c)| p == c)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("rule file line {line}: {reason}")]
pub struct RuleParseError {
    pub line: usize,
    pub reason: String,
}

/// Parses a consolidation rule file: one `pattern -> replacement` per line,
/// `#` comments and blank lines ignored.
pub fn parse_rules(text: &str) -> Result<Vec<ConsolidationRule>, RuleParseError> {
    let mut rules = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (lhs, rhs) = body
            .split_once("->")
            .ok_or_else(|| RuleParseError { line, reason: "missing '->'".into() })?;
        let lhs = lhs.trim();
        let rhs = rhs.trim();
        let mut pattern = StructuralPath::parse(lhs)
            .map_err(|reason| RuleParseError { line, reason })?
            .0;
        let wildcard = pattern.last().map(String::as_str) == Some("*");
        if wildcard {
            pattern.pop();
        }
        if pattern.iter().any(|c| c == "*") {
            return Err(RuleParseError {
                line,
                reason: "'*' is only allowed as the final pattern component".into(),
            });
        }
        let replacement = StructuralPath::parse(rhs)
            .map_err(|reason| RuleParseError { line, reason })?
            .0;
        if replacement.iter().any(|c| c == "*") {
            return Err(RuleParseError { line, reason: "replacement may not contain '*'".into() });
        }
        rules.push(ConsolidationRule { pattern, wildcard, replacement });
    }
    Ok(rules)
}

/// Renders rules back to the file format.
pub fn rules_to_string(rules: &[ConsolidationRule]) -> String {
    let mut out = String::new();
    for r in rules {
        let mut pat = r.pattern.clone();
        if r.wildcard {
            pat.push("*".into());
        }
        out.push_str(&format!("/{} -> /{}\n", pat.join("/"), r.replacement.join("/")));
    }
    out
}

/// The default rule set is empty: consolidation is the identity unless a
/// deployment supplies its own vocabulary-specific rules. (An empty set is
/// trivially idempotent, which downstream mappings rely on.)
pub fn default_rules() -> Vec<ConsolidationRule> {
    Vec::new()
}

/// Applies the first matching rule to a path: the matched prefix is replaced
/// by the rule's replacement, the suffix is kept. At most one rule is applied
/// per call; non-matching paths are returned unchanged.
pub fn consolidate(path: &StructuralPath, rules: &[ConsolidationRule]) -> StructuralPath {
    for rule in rules {
        if rule.matches(&path.0) {
            let mut comps = rule.replacement.clone();
            comps.extend(path.0[rule.pattern_len()..].iter().cloned());
            return StructuralPath(comps);
        }
    }
    path.clone()
}

/// Which vocabulary a feature space belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Raw structural paths.
    Sl2013,
    /// Consolidated structural paths.
    Hidost,
    /// Binarized count features.
    PdfRateB,
}

/// An ordered, deduplicated feature vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpace {
    kind: FeatureKind,
    names: Vec<String>,
}

impl FeatureSpace {
    pub fn new(kind: FeatureKind, names: impl IntoIterator<Item = String>) -> Self {
        let set: BTreeSet<String> = names.into_iter().collect();
        FeatureSpace { kind, names: set.into_iter().collect() }
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    /// File form: one feature name per line, sorted, LF line endings.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for n in &self.names {
            out.push_str(n);
            out.push('\n');
        }
        out
    }

    pub fn from_file_string(kind: FeatureKind, text: &str) -> Self {
        FeatureSpace::new(kind, text.lines().filter(|l| !l.is_empty()).map(str::to_string))
    }

    /// Hex SHA-256 of the file form; model files pin the space they were
    /// trained against with this digest.
    pub fn sha256_hex(&self) -> String {
        let digest = Sha256::digest(self.to_file_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A binary feature vector aligned with a shared [`FeatureSpace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    space: Arc<FeatureSpace>,
    bits: Vec<bool>,
}

impl FeatureVector {
    pub fn new(space: Arc<FeatureSpace>, bits: Vec<bool>) -> Self {
        assert_eq!(space.len(), bits.len(), "vector length must match its space");
        FeatureVector { space, bits }
    }

    pub fn zeros(space: Arc<FeatureSpace>) -> Self {
        let n = space.len();
        FeatureVector { space, bits: vec![false; n] }
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        self.space.index_of(name).map(|i| self.bits[i])
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    /// Names of the features that are on.
    pub fn on_names(&self) -> Vec<&str> {
        self.space
            .names()
            .iter()
            .zip(&self.bits)
            .filter_map(|(n, &b)| b.then_some(n.as_str()))
            .collect()
    }
}

/// Builds the raw structural-path space over a corpus: the union of every
/// graph's extracted paths.
pub fn build_path_space(graphs: &[ObjectGraph], depth_limit: usize) -> FeatureSpace {
    let mut names = BTreeSet::new();
    for g in graphs {
        for p in extract_paths(g, depth_limit) {
            names.insert(p.render());
        }
    }
    FeatureSpace::new(FeatureKind::Sl2013, names)
}

/// Builds the consolidated structural-path space over a corpus.
pub fn build_consolidated_space(
    graphs: &[ObjectGraph],
    depth_limit: usize,
    rules: &[ConsolidationRule],
) -> FeatureSpace {
    let mut names = BTreeSet::new();
    for g in graphs {
        for p in extract_paths(g, depth_limit) {
            names.insert(consolidate(&p, rules).render());
        }
    }
    FeatureSpace::new(FeatureKind::Hidost, names)
}

/// Projects a path set onto a path-kind space. Returns the vector and the
/// number of distinct paths that had no slot in the space.
pub fn vectorize(paths: &BTreeSet<StructuralPath>, space: &Arc<FeatureSpace>) -> (FeatureVector, usize) {
    assert!(
        matches!(space.kind(), FeatureKind::Sl2013 | FeatureKind::Hidost),
        "vectorize expects a path-kind space"
    );
    let mut v = FeatureVector::zeros(Arc::clone(space));
    let mut ignored = 0;
    for p in paths {
        match space.index_of(&p.render()) {
            Some(i) => v.bits[i] = true,
            None => ignored += 1,
        }
    }
    (v, ignored)
}

/// One count feature: its name, the tokens it counts, and the binarization
/// threshold (the bit is on when the count is at least the threshold).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountFeatureDef {
    pub name: String,
    #[serde(rename = "match")]
    pub match_tokens: BTreeSet<String>,
    #[serde(default = "default_threshold")]
    pub threshold: u32,
}

fn default_threshold() -> u32 {
    1
}

/// The stock count-feature vocabulary.
pub fn default_count_defs() -> Vec<CountFeatureDef> {
    let def = |name: &str, tokens: &[&str]| CountFeatureDef {
        name: name.to_string(),
        match_tokens: tokens.iter().map(|t| t.to_string()).collect(),
        threshold: 1,
    };
    vec![
        def("count_box_other", &["ArtBox", "BleedBox", "CropBox", "TrimBox"]),
        def("count_javascript", &["JavaScript"]),
        def("count_js", &["JS"]),
        def("count_page", &["Page"]),
    ]
}

/// Parses a count-feature definition file (a JSON array of definitions).
pub fn parse_count_defs(text: &str) -> Result<Vec<CountFeatureDef>, String> {
    serde_json::from_str(text).map_err(|e| format!("count definition file: {e}"))
}

pub fn count_defs_to_string(defs: &[CountFeatureDef]) -> String {
    let mut text = serde_json::to_string_pretty(defs).expect("count defs encode");
    text.push('\n');
    text
}

/// The feature space spanned by a definition list.
pub fn count_space(defs: &[CountFeatureDef]) -> FeatureSpace {
    FeatureSpace::new(FeatureKind::PdfRateB, defs.iter().map(|d| d.name.clone()))
}

/// Counts occurrences of a token anywhere in the graph: every dictionary key
/// equal to the token and every name value equal to it, across all objects
/// (reachable or not) and the trailer.
pub fn count_occurrences(graph: &ObjectGraph, token: &str) -> usize {
    fn walk(v: &PdfObject, token: &str) -> usize {
        match v {
            PdfObject::Name(n) => usize::from(n == token),
            PdfObject::Array(a) => a.iter().map(|v| walk(v, token)).sum(),
            PdfObject::Dictionary(d) => walk_dict(d, token),
            PdfObject::Stream(s) => walk_dict(&s.dict, token),
            _ => 0,
        }
    }
    fn walk_dict(d: &Dict, token: &str) -> usize {
        d.iter()
            .map(|(k, v)| usize::from(k == token) + walk(v, token))
            .sum()
    }
    walk_dict(graph.trailer(), token)
        + graph.objects().values().map(|v| walk(v, token)).sum::<usize>()
}

/// Extracts the binarized count-feature vector of a graph.
pub fn extract_counts(graph: &ObjectGraph, defs: &[CountFeatureDef], space: &Arc<FeatureSpace>) -> FeatureVector {
    assert!(matches!(space.kind(), FeatureKind::PdfRateB), "extract_counts expects a count-kind space");
    let mut v = FeatureVector::zeros(Arc::clone(space));
    for def in defs {
        let total: usize = def.match_tokens.iter().map(|t| count_occurrences(graph, t)).sum();
        if let Some(i) = space.index_of(&def.name) {
            v.bits[i] = total >= def.threshold as usize;
        }
    }
    v
}
