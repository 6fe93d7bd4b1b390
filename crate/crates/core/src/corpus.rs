//! A small, fully synthetic demonstration corpus.
//!
//! The documents are built programmatically: four malicious seeds whose
//! script payloads a toy signature scanner flags, three benign documents,
//! and a benign donor used as the source of replacement content. Together
//! with [`corpus_rules`] they exercise the whole pipeline end to end with
//! no external scanner and no real malware.
//!
//! The payloads are inert strings that merely *look* like script calls to
//! the toy scanner; nothing here is executable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::features::StructuralPath;
use crate::oracle::{PayloadPredicate, SignatureRule};
use crate::pdf::{serialize_pdf, Dict, ObjRef, ObjectGraph, PdfObject, Provenance};
use crate::pipeline::SeedRecord;

fn name(s: &str) -> PdfObject {
    PdfObject::Name(s.to_string())
}

fn text(s: &str) -> PdfObject {
    PdfObject::Text(s.as_bytes().to_vec())
}

fn num(v: f64) -> PdfObject {
    PdfObject::Number(v)
}

fn refer(n: u32) -> PdfObject {
    PdfObject::Reference(ObjRef::new(n))
}

fn dict(entries: Vec<(&str, PdfObject)>) -> Dict {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn graph(objects: Vec<(u32, PdfObject)>) -> ObjectGraph {
    let objects: BTreeMap<u32, PdfObject> = objects.into_iter().collect();
    let trailer = dict(vec![("Root", refer(1))]);
    ObjectGraph::new(objects, trailer, Provenance::Synthetic)
        .expect("synthetic documents are well-formed")
}

/// Objects 2 (page tree) and 3 (single page); the page optionally carries a
/// crop box so that box-count features have something to see.
fn page_tree(with_crop_box: bool) -> Vec<(u32, PdfObject)> {
    let mut page = dict(vec![
        ("Type", name("Page")),
        ("Parent", refer(2)),
        ("MediaBox", PdfObject::Array(vec![num(0.0), num(0.0), num(612.0), num(792.0)])),
    ]);
    if with_crop_box {
        page.insert(
            "CropBox".to_string(),
            PdfObject::Array(vec![num(10.0), num(10.0), num(600.0), num(780.0)]),
        );
    }
    vec![
        (
            2,
            PdfObject::Dictionary(dict(vec![
                ("Type", name("Pages")),
                ("Kids", PdfObject::Array(vec![refer(3)])),
                ("Count", num(1.0)),
            ])),
        ),
        (3, PdfObject::Dictionary(page)),
    ]
}

fn script_action(payload: &str) -> PdfObject {
    PdfObject::Dictionary(dict(vec![("S", name("JavaScript")), ("JS", text(payload))]))
}

/// A document whose payload hangs directly off the catalog's open action.
pub fn seed_open_action() -> ObjectGraph {
    let mut objects = page_tree(false);
    objects.push((
        1,
        PdfObject::Dictionary(dict(vec![
            ("Type", name("Catalog")),
            ("Pages", refer(2)),
            ("OpenAction", script_action("app.alert('opened');")),
        ])),
    ));
    graph(objects)
}

/// A document whose payload lives in the name tree, with the action object
/// referenced indirectly. There is no open action.
pub fn seed_names_tree() -> ObjectGraph {
    let mut objects = page_tree(false);
    objects.push((
        1,
        PdfObject::Dictionary(dict(vec![
            ("Type", name("Catalog")),
            ("Pages", refer(2)),
            (
                "Names",
                PdfObject::Dictionary(dict(vec![(
                    "JavaScript",
                    PdfObject::Dictionary(dict(vec![(
                        "Names",
                        PdfObject::Array(vec![text("init"), refer(4)]),
                    )])),
                )])),
            ),
        ])),
    ));
    objects.push((4, script_action("app.alert('from the name tree');")));
    graph(objects)
}

/// An open-action payload surrounded by benign decoy structure: an empty
/// form, an outline stub, a layout hint, and a cropped page.
pub fn seed_decoys() -> ObjectGraph {
    let mut objects = page_tree(true);
    objects.push((
        1,
        PdfObject::Dictionary(dict(vec![
            ("Type", name("Catalog")),
            ("Pages", refer(2)),
            ("OpenAction", script_action("app.launchURL('http://example.invalid/');")),
            ("AcroForm", PdfObject::Dictionary(dict(vec![("Fields", PdfObject::Array(vec![]))]))),
            (
                "Outlines",
                PdfObject::Dictionary(dict(vec![("Type", name("Outlines")), ("Count", num(0.0))])),
            ),
            ("PageLayout", name("SinglePage")),
        ])),
    ));
    graph(objects)
}

/// A name tree carrying two separate payload entries; clearing the payload
/// path must clear both.
pub fn seed_names_pair() -> ObjectGraph {
    let mut objects = page_tree(false);
    objects.push((
        1,
        PdfObject::Dictionary(dict(vec![
            ("Type", name("Catalog")),
            ("Pages", refer(2)),
            (
                "Names",
                PdfObject::Dictionary(dict(vec![(
                    "JavaScript",
                    PdfObject::Dictionary(dict(vec![(
                        "Names",
                        PdfObject::Array(vec![text("first"), refer(4), text("second"), refer(5)]),
                    )])),
                )])),
            ),
        ])),
    ));
    objects.push((4, script_action("app.alert('first entry');")));
    objects.push((5, script_action("app.beep(0);")));
    graph(objects)
}

/// A bare benign document.
pub fn benign_plain() -> ObjectGraph {
    let mut objects = page_tree(false);
    objects.push((
        1,
        PdfObject::Dictionary(dict(vec![
            ("Type", name("Catalog")),
            ("Pages", refer(2)),
            (
                "ViewerPreferences",
                PdfObject::Dictionary(dict(vec![("FitWindow", PdfObject::Boolean(true))])),
            ),
        ])),
    ));
    graph(objects)
}

/// A benign document with a populated destination name tree. Doubles as the
/// replacement donor: it offers a benign `/Names` subtree and harmless
/// fallback content, and its text never contains a script-call token.
pub fn benign_dests() -> ObjectGraph {
    let mut objects = page_tree(false);
    objects.push((
        1,
        PdfObject::Dictionary(dict(vec![
            ("Type", name("Catalog")),
            ("Pages", refer(2)),
            (
                "Names",
                PdfObject::Dictionary(dict(vec![(
                    "Dests",
                    PdfObject::Dictionary(dict(vec![(
                        "Names",
                        PdfObject::Array(vec![text("home"), refer(4)]),
                    )])),
                )])),
            ),
        ])),
    ));
    objects.push((
        4,
        PdfObject::Dictionary(dict(vec![(
            "D",
            PdfObject::Array(vec![refer(3), name("XYZ")]),
        )])),
    ));
    graph(objects)
}

/// A benign document with a cropped page and a language hint.
pub fn benign_cropped() -> ObjectGraph {
    let mut objects = page_tree(true);
    objects.push((
        1,
        PdfObject::Dictionary(dict(vec![
            ("Type", name("Catalog")),
            ("Pages", refer(2)),
            ("Lang", text("en")),
        ])),
    ));
    graph(objects)
}

/// The toy scanner's signatures: a script-call token under either payload
/// location.
pub fn corpus_rules() -> Vec<SignatureRule> {
    vec![
        SignatureRule {
            id: "open-action-script".to_string(),
            path: StructuralPath::parse("/OpenAction/JS").expect("literal path"),
            predicate: PayloadPredicate::ContainsToken("app.".to_string()),
        },
        SignatureRule {
            id: "name-tree-script".to_string(),
            path: StructuralPath::parse("/Names/JavaScript/Names/JS").expect("literal path"),
            predicate: PayloadPredicate::ContainsToken("app.".to_string()),
        },
    ]
}

/// The demonstration corpus, fully materialized.
pub struct Corpus {
    pub seeds: Vec<SeedRecord>,
    pub benign: Vec<SeedRecord>,
    pub donor: ObjectGraph,
    pub rules: Vec<SignatureRule>,
}

pub fn demo_corpus() -> Corpus {
    let seed = |id: &str, graph: ObjectGraph| SeedRecord { id: id.to_string(), graph };
    Corpus {
        seeds: vec![
            seed("seed-open-action", seed_open_action()),
            seed("seed-names-tree", seed_names_tree()),
            seed("seed-decoys", seed_decoys()),
            seed("seed-names-pair", seed_names_pair()),
        ],
        benign: vec![
            seed("benign-plain", benign_plain()),
            seed("benign-dests", benign_dests()),
            seed("benign-cropped", benign_cropped()),
        ],
        donor: benign_dests(),
        rules: corpus_rules(),
    }
}

/// Where [`write_demo_corpus`] put everything.
pub struct CorpusPaths {
    pub seeds_dir: PathBuf,
    pub benign_dir: PathBuf,
    pub donor: PathBuf,
    pub rules: PathBuf,
}

/// Serializes the demo corpus into a directory tree:
/// `seeds/*.pdf`, `benign/*.pdf`, `donor.pdf`, and `rules.json`.
pub fn write_demo_corpus(root: &Path) -> std::io::Result<CorpusPaths> {
    let corpus = demo_corpus();
    let seeds_dir = root.join("seeds");
    let benign_dir = root.join("benign");
    std::fs::create_dir_all(&seeds_dir)?;
    std::fs::create_dir_all(&benign_dir)?;

    let write_doc = |dir: &Path, rec: &SeedRecord| -> std::io::Result<()> {
        let bytes = serialize_pdf(&rec.graph)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        std::fs::write(dir.join(format!("{}.pdf", rec.id)), bytes)
    };
    for rec in &corpus.seeds {
        write_doc(&seeds_dir, rec)?;
    }
    for rec in &corpus.benign {
        write_doc(&benign_dir, rec)?;
    }

    let donor = root.join("donor.pdf");
    let donor_bytes = serialize_pdf(&corpus.donor)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
    std::fs::write(&donor, donor_bytes)?;

    let rules = root.join("rules.json");
    let mut rules_text =
        serde_json::to_string_pretty(&corpus.rules).expect("signature rules encode");
    rules_text.push('\n');
    std::fs::write(&rules, rules_text)?;

    Ok(CorpusPaths { seeds_dir, benign_dir, donor, rules })
}
