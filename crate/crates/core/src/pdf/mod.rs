//! PDF object model.
//!
//! This module turns raw PDF bytes into an [`ObjectGraph`] (numbered objects
//! plus a trailer dictionary), repacks a graph into a single-revision PDF
//! file, and converts graphs to and from a JSON interchange form so that
//! corpora can be stored and inspected as text.
//!
//! The parser is deliberately lenient in the places real-world files are
//! sloppy (stream lengths, missing `endobj`) and strict about the things the
//! rest of the crate depends on: a resolvable `/Root` in the trailer and no
//! encryption.

mod json;
mod lexer;
mod parse;
mod serialize;

pub use json::{graph_to_json, load_graph_json};
pub use parse::parse_pdf;
pub use serialize::serialize_pdf;

use std::collections::BTreeMap;
use std::fmt;

/// Dictionary body: key names (without the leading `/`) to values.
///
/// A `BTreeMap` keeps key order canonical, which makes serialization and
/// feature extraction deterministic.
pub type Dict = BTreeMap<String, PdfObject>;

/// An indirect reference, e.g. `4 0 R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjRef {
    pub number: u32,
    pub generation: u16,
}

impl ObjRef {
    pub fn new(number: u32) -> Self {
        ObjRef { number, generation: 0 }
    }
}

impl fmt::Display for ObjRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} R", self.number, self.generation)
    }
}

/// A stream object: its dictionary plus the raw (still encoded) payload.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamObject {
    pub dict: Dict,
    pub data: Vec<u8>,
}

/// Any PDF value.
///
/// `Text` holds the raw bytes of a string object (literal or hex — the
/// distinction is not preserved). `Name` holds the decoded token without the
/// leading slash.
#[derive(Debug, Clone, PartialEq)]
pub enum PdfObject {
    Null,
    Boolean(bool),
    Number(f64),
    Text(Vec<u8>),
    Name(String),
    Array(Vec<PdfObject>),
    Dictionary(Dict),
    Stream(StreamObject),
    Reference(ObjRef),
}

impl PdfObject {
    /// The dictionary carried by this value, if it is a dictionary or a
    /// stream (whose dictionary is treated transparently).
    pub fn dict_like(&self) -> Option<&Dict> {
        match self {
            PdfObject::Dictionary(d) => Some(d),
            PdfObject::Stream(s) => Some(&s.dict),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            PdfObject::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_name(&self) -> Option<&str> {
        match self {
            PdfObject::Name(n) => Some(n),
            _ => None,
        }
    }
}

/// Where a graph came from. Recorded so that reports and debugging output can
/// distinguish parsed files from JSON-loaded or mutated graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ParsedPdf,
    LoadedJson,
    Mutated,
    /// Built programmatically (demo corpus, tests).
    Synthetic,
}

/// Location context for parse errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorSite {
    Offset(usize),
    Object(u32),
}

impl fmt::Display for ErrorSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorSite::Offset(o) => write!(f, "byte offset {o}"),
            ErrorSite::Object(n) => write!(f, "object {n}"),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum PdfError {
    #[error("malformed pdf at {at}: {reason}")]
    MalformedPdf { at: ErrorSite, reason: String },
    #[error("unsupported construct at {at}: {construct}")]
    UnsupportedConstruct { at: ErrorSite, construct: String },
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("serialization failure: {reason}")]
    SerializationFailure { reason: String },
}

impl PdfError {
    pub(crate) fn malformed(offset: usize, reason: impl Into<String>) -> Self {
        PdfError::MalformedPdf { at: ErrorSite::Offset(offset), reason: reason.into() }
    }
}

static NULL_OBJECT: PdfObject = PdfObject::Null;

/// A parsed document: numbered objects plus the trailer dictionary.
///
/// Invariants enforced at construction:
/// - the trailer's `Root` is a reference that resolves to a dictionary;
/// - the trailer carries no `Encrypt` entry (encrypted documents are
///   rejected at parse/load time);
/// - every stream's declared `/Length` equals its payload length.
///
/// Dangling references (to absent object numbers) are legal; they resolve to
/// `Null` and are listed by [`ObjectGraph::dangling`].
#[derive(Debug, Clone)]
pub struct ObjectGraph {
    objects: BTreeMap<u32, PdfObject>,
    trailer: Dict,
    provenance: Provenance,
    root_number: u32,
    dangling: Vec<ObjRef>,
}

impl ObjectGraph {
    /// Builds a graph, validating invariants. The error string names the
    /// failed invariant; callers wrap it in the error type appropriate to
    /// their input format.
    pub fn new(
        mut objects: BTreeMap<u32, PdfObject>,
        trailer: Dict,
        provenance: Provenance,
    ) -> Result<Self, String> {
        // Object number 0 is the head of the free list in PDF files and can
        // never be the target of a live reference.
        objects.remove(&0);
        if trailer.contains_key("Encrypt") {
            return Err("trailer carries an Encrypt entry; encrypted documents are not supported".into());
        }
        let root_ref = match trailer.get("Root") {
            Some(PdfObject::Reference(r)) => *r,
            Some(_) => return Err("trailer Root is not an indirect reference".into()),
            None => return Err("trailer has no Root entry".into()),
        };
        let root_number = match resolve_ref_number(&objects, root_ref) {
            Some((num, PdfObject::Dictionary(_))) => num,
            Some(_) => return Err("trailer Root does not resolve to a dictionary".into()),
            None => return Err("trailer Root reference does not resolve".into()),
        };
        for obj in objects.values_mut() {
            normalize_stream_lengths(obj);
        }
        let dangling = collect_dangling(&objects, &trailer);
        Ok(ObjectGraph { objects, trailer, provenance, root_number, dangling })
    }

    pub fn objects(&self) -> &BTreeMap<u32, PdfObject> {
        &self.objects
    }

    pub fn trailer(&self) -> &Dict {
        &self.trailer
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// References that do not resolve to any object in the graph, in
    /// ascending order, deduplicated.
    pub fn dangling(&self) -> &[ObjRef] {
        &self.dangling
    }

    /// Object number of the document catalog (the trailer `Root`, with any
    /// reference chain followed).
    pub fn root_number(&self) -> u32 {
        self.root_number
    }

    /// The document catalog dictionary.
    pub fn root_dict(&self) -> &Dict {
        match &self.objects[&self.root_number] {
            PdfObject::Dictionary(d) => d,
            _ => unreachable!("root invariant checked at construction"),
        }
    }

    /// Follows a reference (and any chain of references) to the value it
    /// names. Dangling or cyclic chains resolve to `Null`.
    pub fn resolve(&self, r: ObjRef) -> &PdfObject {
        match resolve_ref_number(&self.objects, r) {
            Some((_, obj)) => obj,
            None => &NULL_OBJECT,
        }
    }

    /// Like [`ObjectGraph::resolve`], but takes any value: references are
    /// chased, everything else is returned as-is.
    pub fn resolve_value<'a>(&'a self, v: &'a PdfObject) -> &'a PdfObject {
        match v {
            PdfObject::Reference(r) => self.resolve(*r),
            other => other,
        }
    }
}

/// Follows a chain of references, guarding against cycles. Returns the
/// terminal object number and the (non-reference) object stored there.
fn resolve_ref_number(
    objects: &BTreeMap<u32, PdfObject>,
    start: ObjRef,
) -> Option<(u32, &PdfObject)> {
    let mut seen = Vec::new();
    let mut cur = start.number;
    loop {
        if seen.contains(&cur) {
            return None;
        }
        seen.push(cur);
        match objects.get(&cur) {
            None => return None,
            Some(PdfObject::Reference(next)) => cur = next.number,
            Some(obj) => return Some((cur, obj)),
        }
    }
}

fn normalize_stream_lengths(obj: &mut PdfObject) {
    match obj {
        PdfObject::Stream(s) => {
            s.dict.insert("Length".to_string(), PdfObject::Number(s.data.len() as f64));
            for v in s.dict.values_mut() {
                normalize_stream_lengths(v);
            }
        }
        PdfObject::Dictionary(d) => {
            for v in d.values_mut() {
                normalize_stream_lengths(v);
            }
        }
        PdfObject::Array(a) => {
            for v in a.iter_mut() {
                normalize_stream_lengths(v);
            }
        }
        _ => {}
    }
}

fn collect_dangling(objects: &BTreeMap<u32, PdfObject>, trailer: &Dict) -> Vec<ObjRef> {
    let mut out = std::collections::BTreeSet::new();
    fn walk(v: &PdfObject, objects: &BTreeMap<u32, PdfObject>, out: &mut std::collections::BTreeSet<ObjRef>) {
        match v {
            PdfObject::Reference(r) => {
                if !objects.contains_key(&r.number) {
                    out.insert(*r);
                }
            }
            PdfObject::Array(a) => a.iter().for_each(|v| walk(v, objects, out)),
            PdfObject::Dictionary(d) => d.values().for_each(|v| walk(v, objects, out)),
            PdfObject::Stream(s) => s.dict.values().for_each(|v| walk(v, objects, out)),
            _ => {}
        }
    }
    for v in trailer.values() {
        walk(v, objects, &mut out);
    }
    for v in objects.values() {
        walk(v, objects, &mut out);
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_objects() -> BTreeMap<u32, PdfObject> {
        let mut root = Dict::new();
        root.insert("Type".into(), PdfObject::Name("Catalog".into()));
        let mut objects = BTreeMap::new();
        objects.insert(1, PdfObject::Dictionary(root));
        objects
    }

    fn minimal_trailer() -> Dict {
        let mut t = Dict::new();
        t.insert("Root".into(), PdfObject::Reference(ObjRef::new(1)));
        t
    }

    #[test]
    fn construction_requires_resolvable_root_dictionary() {
        let g = ObjectGraph::new(minimal_objects(), minimal_trailer(), Provenance::ParsedPdf);
        assert!(g.is_ok());

        let mut t = minimal_trailer();
        t.insert("Root".into(), PdfObject::Reference(ObjRef::new(9)));
        assert!(ObjectGraph::new(minimal_objects(), t, Provenance::ParsedPdf).is_err());

        let mut objs = minimal_objects();
        objs.insert(1, PdfObject::Number(3.0));
        assert!(ObjectGraph::new(objs, minimal_trailer(), Provenance::ParsedPdf).is_err());

        assert!(ObjectGraph::new(minimal_objects(), Dict::new(), Provenance::ParsedPdf).is_err());
    }

    #[test]
    fn root_reference_chains_are_followed() {
        let mut objects = minimal_objects();
        objects.insert(2, PdfObject::Reference(ObjRef::new(1)));
        let mut t = Dict::new();
        t.insert("Root".into(), PdfObject::Reference(ObjRef::new(2)));
        let g = ObjectGraph::new(objects, t, Provenance::ParsedPdf).unwrap();
        assert_eq!(g.root_number(), 1);
    }

    #[test]
    fn cyclic_reference_chain_resolves_to_null() {
        let mut objects = minimal_objects();
        objects.insert(2, PdfObject::Reference(ObjRef::new(3)));
        objects.insert(3, PdfObject::Reference(ObjRef::new(2)));
        let g = ObjectGraph::new(objects, minimal_trailer(), Provenance::ParsedPdf).unwrap();
        assert_eq!(*g.resolve(ObjRef::new(2)), PdfObject::Null);
    }

    #[test]
    fn dangling_references_are_listed_and_resolve_to_null() {
        let mut objects = minimal_objects();
        objects.insert(
            2,
            PdfObject::Array(vec![PdfObject::Reference(ObjRef::new(7)), PdfObject::Reference(ObjRef::new(7))]),
        );
        let g = ObjectGraph::new(objects, minimal_trailer(), Provenance::ParsedPdf).unwrap();
        assert_eq!(g.dangling(), &[ObjRef::new(7)]);
        assert_eq!(*g.resolve(ObjRef::new(7)), PdfObject::Null);
    }

    #[test]
    fn encrypted_trailer_is_rejected() {
        let mut t = minimal_trailer();
        t.insert("Encrypt".into(), PdfObject::Reference(ObjRef::new(5)));
        let err = ObjectGraph::new(minimal_objects(), t, Provenance::ParsedPdf).unwrap_err();
        assert!(err.contains("Encrypt"));
    }

    #[test]
    fn stream_lengths_are_normalized_at_construction() {
        let mut objects = minimal_objects();
        let mut sdict = Dict::new();
        sdict.insert("Length".into(), PdfObject::Number(999.0));
        objects.insert(2, PdfObject::Stream(StreamObject { dict: sdict, data: b"abc".to_vec() }));
        let g = ObjectGraph::new(objects, minimal_trailer(), Provenance::ParsedPdf).unwrap();
        match &g.objects()[&2] {
            PdfObject::Stream(s) => assert_eq!(s.dict["Length"], PdfObject::Number(3.0)),
            _ => panic!("expected stream"),
        }
    }
}
