//! Malice oracles: black boxes that label PDF bytes malicious or benign.
//!
//! Three implementations cover the practical deployment modes:
//!
//! - [`RuleOracle`]: in-process signature matching over structural paths,
//!   used by the synthetic corpus and the test suites. Fast and fully
//!   parallel.
//! - [`CachedOracle`]: verdicts keyed by SHA-256 of the PDF bytes, backed by
//!   a JSON Lines store. Strict mode fails on a miss (exact replay of a
//!   recorded run); permissive mode falls through to a wrapped oracle and
//!   records the answer.
//! - [`CommandOracle`]: spawns an external scanner per document. Protocol:
//!   `<program> <pdf-path>` must exit 0 and print a single JSON object
//!   `{"verdict": "malicious"|"benign", "signatures": [...]}` on stdout.
//!
//! Every oracle upholds one invariant: a verdict is `Malicious` if and only
//! if it names at least one signature.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::features::StructuralPath;
use crate::mutation::{locate_sites, site_value};
use crate::pdf::{parse_pdf, PdfObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Malicious,
    Benign,
}

/// An oracle's answer for one document.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Names of the signatures that fired; non-empty exactly when the
    /// outcome is `Malicious`.
    pub signatures: Vec<String>,
    /// Wall-clock evaluation time. Kept in memory for diagnostics; never
    /// serialized into reports, which must be byte-reproducible.
    pub latency: Duration,
}

impl Verdict {
    pub fn is_malicious(&self) -> bool {
        self.outcome == Outcome::Malicious
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum OracleError {
    #[error("oracle timed out after {0:?}")]
    Timeout(Duration),
    #[error("oracle protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("oracle could not parse the document: {0}")]
    ParseFailure(String),
}

/// A black-box malice judge.
pub trait MaliceOracle: Send + Sync {
    fn evaluate(&self, pdf: &[u8]) -> Result<Verdict, OracleError>;

    /// How many concurrent `evaluate` calls the oracle tolerates. Probing
    /// code clamps its worker count to this.
    fn max_parallelism(&self) -> usize {
        1
    }
}

/// What a signature requires of the value at its path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadPredicate {
    /// The resolved value is structurally non-empty (non-empty text/array/
    /// dictionary/stream payload; names, numbers and booleans always pass;
    /// null fails).
    AnyNonEmpty,
    /// The raw bytes of a text or stream value contain this token. Bytes of
    /// the payload are examined as-is, without decoding stream filters.
    ContainsToken(String),
}

/// A signature: a structural path that must be present, plus a predicate on
/// the value found there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureRule {
    pub id: String,
    pub path: StructuralPath,
    pub predicate: PayloadPredicate,
}

/// In-process oracle matching signature rules against the parsed graph.
pub struct RuleOracle {
    rules: Vec<SignatureRule>,
}

impl RuleOracle {
    pub fn new(rules: Vec<SignatureRule>) -> Self {
        RuleOracle { rules }
    }

    pub fn rules(&self) -> &[SignatureRule] {
        &self.rules
    }
}

fn predicate_holds(graph: &crate::pdf::ObjectGraph, value: &PdfObject, pred: &PayloadPredicate) -> bool {
    let value = graph.resolve_value(value);
    match pred {
        PayloadPredicate::AnyNonEmpty => match value {
            PdfObject::Null => false,
            PdfObject::Boolean(_) | PdfObject::Number(_) | PdfObject::Name(_) => true,
            PdfObject::Text(t) => !t.is_empty(),
            PdfObject::Array(a) => !a.is_empty(),
            PdfObject::Dictionary(d) => !d.is_empty(),
            PdfObject::Stream(s) => !s.data.is_empty(),
            PdfObject::Reference(_) => unreachable!("references were resolved"),
        },
        PayloadPredicate::ContainsToken(token) => {
            let needle = token.as_bytes();
            let hay: &[u8] = match value {
                PdfObject::Text(t) => t,
                PdfObject::Stream(s) => &s.data,
                _ => return false,
            };
            !needle.is_empty()
                && hay.len() >= needle.len()
                && hay.windows(needle.len()).any(|w| w == needle)
        }
    }
}

impl MaliceOracle for RuleOracle {
    fn evaluate(&self, pdf: &[u8]) -> Result<Verdict, OracleError> {
        let start = Instant::now();
        let graph = parse_pdf(pdf).map_err(|e| OracleError::ParseFailure(e.to_string()))?;
        let mut signatures = Vec::new();
        for rule in &self.rules {
            let fired = locate_sites(&graph, &rule.path).iter().any(|site| {
                site_value(&graph, site)
                    .map(|v| predicate_holds(&graph, v, &rule.predicate))
                    .unwrap_or(false)
            });
            if fired {
                signatures.push(rule.id.clone());
            }
        }
        let outcome = if signatures.is_empty() { Outcome::Benign } else { Outcome::Malicious };
        Ok(Verdict { outcome, signatures, latency: start.elapsed() })
    }

    fn max_parallelism(&self) -> usize {
        usize::MAX
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    sha256: String,
    verdict: Outcome,
    #[serde(default)]
    signatures: Vec<String>,
}

/// Verdict cache keyed by SHA-256 of the document bytes.
pub struct CachedOracle {
    store: Mutex<BTreeMap<String, (Outcome, Vec<String>)>>,
    fallback: Option<Box<dyn MaliceOracle>>,
}

impl CachedOracle {
    /// Strict replay: a miss is a protocol violation.
    pub fn strict(store: BTreeMap<String, (Outcome, Vec<String>)>) -> Self {
        CachedOracle { store: Mutex::new(store), fallback: None }
    }

    /// Permissive: misses are answered by `fallback` and recorded.
    pub fn with_fallback(
        store: BTreeMap<String, (Outcome, Vec<String>)>,
        fallback: Box<dyn MaliceOracle>,
    ) -> Self {
        CachedOracle { store: Mutex::new(store), fallback: Some(fallback) }
    }

    pub fn sha256_hex(bytes: &[u8]) -> String {
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parses a JSON Lines store: one record per line,
    /// `{"sha256": ..., "verdict": "malicious"|"benign", "signatures": [...]}`.
    pub fn parse_store(text: &str) -> Result<BTreeMap<String, (Outcome, Vec<String>)>, OracleError> {
        let mut out = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: CacheRecord = serde_json::from_str(line).map_err(|e| {
                OracleError::ProtocolViolation(format!("cache store line {}: {e}", i + 1))
            })?;
            out.insert(rec.sha256, (rec.verdict, rec.signatures));
        }
        Ok(out)
    }

    /// Renders the store back to JSON Lines in key order.
    pub fn store_to_string(&self) -> String {
        let store = self.store.lock().expect("cache lock");
        let mut out = String::new();
        for (sha256, (verdict, signatures)) in store.iter() {
            let rec = CacheRecord {
                sha256: sha256.clone(),
                verdict: *verdict,
                signatures: signatures.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("cache record encode"));
            out.push('\n');
        }
        out
    }
}

impl MaliceOracle for CachedOracle {
    fn evaluate(&self, pdf: &[u8]) -> Result<Verdict, OracleError> {
        let start = Instant::now();
        let key = Self::sha256_hex(pdf);
        if let Some((outcome, signatures)) = self.store.lock().expect("cache lock").get(&key) {
            return Ok(Verdict {
                outcome: *outcome,
                signatures: signatures.clone(),
                latency: start.elapsed(),
            });
        }
        match &self.fallback {
            None => Err(OracleError::ProtocolViolation(format!(
                "strict cache has no verdict for sha256 {key}"
            ))),
            Some(inner) => {
                let verdict = inner.evaluate(pdf)?;
                self.store
                    .lock()
                    .expect("cache lock")
                    .insert(key, (verdict.outcome, verdict.signatures.clone()));
                Ok(verdict)
            }
        }
    }

    fn max_parallelism(&self) -> usize {
        match &self.fallback {
            None => usize::MAX,
            Some(inner) => inner.max_parallelism(),
        }
    }
}

/// External scanner invoked per document.
pub struct CommandOracle {
    program: PathBuf,
    timeout: Duration,
    parallelism: usize,
}

#[derive(Debug, Deserialize)]
struct CommandReply {
    verdict: String,
    #[serde(default)]
    signatures: Vec<String>,
}

impl CommandOracle {
    pub fn new(program: PathBuf, timeout: Duration, parallelism: usize) -> Self {
        CommandOracle { program, timeout, parallelism: parallelism.max(1) }
    }
}

impl MaliceOracle for CommandOracle {
    fn evaluate(&self, pdf: &[u8]) -> Result<Verdict, OracleError> {
        let start = Instant::now();
        let mut tmp = tempfile::NamedTempFile::new()
            .map_err(|e| OracleError::ProtocolViolation(format!("temp file: {e}")))?;
        tmp.write_all(pdf)
            .and_then(|_| tmp.flush())
            .map_err(|e| OracleError::ProtocolViolation(format!("temp file write: {e}")))?;

        let mut child = std::process::Command::new(&self.program)
            .arg(tmp.path())
            .stdout(std::process::Stdio::piped())
            .stderr(std::process::Stdio::null())
            .spawn()
            .map_err(|e| {
                OracleError::ProtocolViolation(format!(
                    "failed to launch {}: {e}",
                    self.program.display()
                ))
            })?;

        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) => {
                    if start.elapsed() > self.timeout {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err(OracleError::Timeout(self.timeout));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(OracleError::ProtocolViolation(format!("wait failed: {e}"))),
            }
        };

        let mut stdout = String::new();
        if let Some(mut pipe) = child.stdout.take() {
            let _ = pipe.read_to_string(&mut stdout);
        }
        if !status.success() {
            return Err(OracleError::ProtocolViolation(format!(
                "scanner exited with {status}"
            )));
        }
        let reply: CommandReply = serde_json::from_str(stdout.trim())
            .map_err(|e| OracleError::ProtocolViolation(format!("bad scanner reply: {e}")))?;
        let outcome = match reply.verdict.as_str() {
            "malicious" => Outcome::Malicious,
            "benign" => Outcome::Benign,
            other => {
                return Err(OracleError::ProtocolViolation(format!(
                    "unknown verdict '{other}'"
                )))
            }
        };
        if outcome == Outcome::Malicious && reply.signatures.is_empty() {
            return Err(OracleError::ProtocolViolation(
                "malicious verdict without signature names".into(),
            ));
        }
        if outcome == Outcome::Benign && !reply.signatures.is_empty() {
            return Err(OracleError::ProtocolViolation(
                "benign verdict that names signatures".into(),
            ));
        }
        Ok(Verdict { outcome, signatures: reply.signatures, latency: start.elapsed() })
    }

    fn max_parallelism(&self) -> usize {
        self.parallelism
    }
}
