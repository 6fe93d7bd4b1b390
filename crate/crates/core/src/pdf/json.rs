//! JSON interchange form for object graphs.
//!
//! The encoding keeps corpora diffable and lets other tooling construct
//! graphs without writing PDF syntax:
//!
//! ```json
//! {
//!   "trailer": { "Root": {"ref": 1} },
//!   "objects": {
//!     "1": { "dict": { "Type": {"name": "Catalog"} } },
//!     "2": { "dict": { "Length": 3 }, "stream_b64": "cSBR" }
//!   }
//! }
//! ```
//!
//! Scalars map directly (`null`, booleans, numbers, arrays); the tagged
//! wrappers are `{"name": str}`, `{"text_b64": base64}`, `{"ref": int,
//! "gen": int?}`, `{"dict": {...}}`, and `{"dict": {...}, "stream_b64":
//! base64}` for streams. Malformed input is reported with the JSON path of
//! the offending node.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::{Map, Value};

use super::{Dict, ObjRef, ObjectGraph, PdfError, PdfObject, Provenance, StreamObject};

fn violation(path: &str, reason: impl Into<String>) -> PdfError {
    PdfError::SchemaViolation { path: path.to_string(), reason: reason.into() }
}

/// Loads a graph from its JSON interchange form.
pub fn load_graph_json(text: &str) -> Result<ObjectGraph, PdfError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| violation("$", format!("invalid json: {e}")))?;
    let top = value.as_object().ok_or_else(|| violation("$", "document is not an object"))?;
    for key in top.keys() {
        if key != "trailer" && key != "objects" {
            return Err(violation("$", format!("unknown top-level key '{key}'")));
        }
    }
    let trailer_v = top.get("trailer").ok_or_else(|| violation("$", "missing 'trailer'"))?;
    let objects_v = top.get("objects").ok_or_else(|| violation("$", "missing 'objects'"))?;

    let trailer = decode_dict_body(
        trailer_v.as_object().ok_or_else(|| violation("$.trailer", "trailer is not an object"))?,
        "$.trailer",
    )?;

    let objects_map =
        objects_v.as_object().ok_or_else(|| violation("$.objects", "objects is not an object"))?;
    let mut objects: BTreeMap<u32, PdfObject> = BTreeMap::new();
    for (key, v) in objects_map {
        let path = format!("$.objects.{key}");
        let num: u32 = key
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| violation(&path, "object keys must be positive decimal numbers"))?;
        objects.insert(num, decode_object(v, &path)?);
    }

    ObjectGraph::new(objects, trailer, Provenance::LoadedJson)
        .map_err(|reason| violation("$.trailer", reason))
}

fn decode_dict_body(map: &Map<String, Value>, path: &str) -> Result<Dict, PdfError> {
    let mut out = Dict::new();
    for (k, v) in map {
        out.insert(k.clone(), decode_object(v, &format!("{path}.{k}"))?);
    }
    Ok(out)
}

fn decode_object(v: &Value, path: &str) -> Result<PdfObject, PdfError> {
    match v {
        Value::Null => Ok(PdfObject::Null),
        Value::Bool(b) => Ok(PdfObject::Boolean(*b)),
        Value::Number(n) => {
            let f = n.as_f64().ok_or_else(|| violation(path, "number out of range"))?;
            Ok(PdfObject::Number(f))
        }
        Value::String(_) => Err(violation(path, "bare strings are not part of the encoding; use {\"text_b64\": ...} or {\"name\": ...}")),
        Value::Array(items) => {
            let mut out = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                out.push(decode_object(item, &format!("{path}[{i}]"))?);
            }
            Ok(PdfObject::Array(out))
        }
        Value::Object(map) => decode_tagged(map, path),
    }
}

fn decode_tagged(map: &Map<String, Value>, path: &str) -> Result<PdfObject, PdfError> {
    if map.contains_key("ref") {
        for k in map.keys() {
            if k != "ref" && k != "gen" {
                return Err(violation(path, format!("unexpected key '{k}' beside 'ref'")));
            }
        }
        let number = map["ref"]
            .as_u64()
            .filter(|n| *n > 0 && *n <= u32::MAX as u64)
            .ok_or_else(|| violation(path, "'ref' must be a positive object number"))?;
        let generation = match map.get("gen") {
            None => 0,
            Some(g) => g
                .as_u64()
                .filter(|g| *g <= u16::MAX as u64)
                .ok_or_else(|| violation(path, "'gen' must be a small non-negative integer"))?
                as u16,
        };
        return Ok(PdfObject::Reference(ObjRef { number: number as u32, generation }));
    }
    if map.contains_key("name") {
        if map.len() != 1 {
            return Err(violation(path, "'name' must be the only key"));
        }
        let name = map["name"].as_str().ok_or_else(|| violation(path, "'name' must be a string"))?;
        if name.is_empty() {
            return Err(violation(path, "name tokens must be non-empty"));
        }
        return Ok(PdfObject::Name(name.to_string()));
    }
    if map.contains_key("text_b64") {
        if map.len() != 1 {
            return Err(violation(path, "'text_b64' must be the only key"));
        }
        let b64 = map["text_b64"].as_str().ok_or_else(|| violation(path, "'text_b64' must be a string"))?;
        let bytes = BASE64.decode(b64).map_err(|e| violation(path, format!("invalid base64: {e}")))?;
        return Ok(PdfObject::Text(bytes));
    }
    if map.contains_key("dict") {
        for k in map.keys() {
            if k != "dict" && k != "stream_b64" {
                return Err(violation(path, format!("unexpected key '{k}' beside 'dict'")));
            }
        }
        let inner = map["dict"]
            .as_object()
            .ok_or_else(|| violation(&format!("{path}.dict"), "'dict' must be an object"))?;
        let dict = decode_dict_body(inner, &format!("{path}.dict"))?;
        if let Some(sv) = map.get("stream_b64") {
            let b64 = sv.as_str().ok_or_else(|| violation(path, "'stream_b64' must be a string"))?;
            let data = BASE64.decode(b64).map_err(|e| violation(path, format!("invalid base64: {e}")))?;
            return Ok(PdfObject::Stream(StreamObject { dict, data }));
        }
        return Ok(PdfObject::Dictionary(dict));
    }
    Err(violation(path, "object does not match any encoding (expected ref/name/text_b64/dict)"))
}

/// Renders a graph to its JSON interchange form (pretty-printed, with keys
/// in canonical order, so output is deterministic).
pub fn graph_to_json(graph: &ObjectGraph) -> String {
    let mut top = Map::new();
    top.insert("trailer".into(), encode_dict_body(graph.trailer()));
    let mut objects = Map::new();
    for (num, obj) in graph.objects() {
        objects.insert(num.to_string(), encode_object(obj));
    }
    top.insert("objects".into(), Value::Object(objects));
    let mut text = serde_json::to_string_pretty(&Value::Object(top)).expect("json encoding cannot fail");
    text.push('\n');
    text
}

fn encode_dict_body(d: &Dict) -> Value {
    let mut map = Map::new();
    for (k, v) in d {
        map.insert(k.clone(), encode_object(v));
    }
    Value::Object(map)
}

fn encode_object(obj: &PdfObject) -> Value {
    match obj {
        PdfObject::Null => Value::Null,
        PdfObject::Boolean(b) => Value::Bool(*b),
        PdfObject::Number(n) => {
            if n.fract() == 0.0 && n.abs() < 9e15 {
                Value::Number((*n as i64).into())
            } else {
                serde_json::Number::from_f64(*n).map(Value::Number).unwrap_or(Value::Null)
            }
        }
        PdfObject::Text(t) => {
            let mut map = Map::new();
            map.insert("text_b64".into(), Value::String(BASE64.encode(t)));
            Value::Object(map)
        }
        PdfObject::Name(n) => {
            let mut map = Map::new();
            map.insert("name".into(), Value::String(n.clone()));
            Value::Object(map)
        }
        PdfObject::Array(items) => Value::Array(items.iter().map(encode_object).collect()),
        PdfObject::Dictionary(d) => {
            let mut map = Map::new();
            map.insert("dict".into(), encode_dict_body(d));
            Value::Object(map)
        }
        PdfObject::Stream(s) => {
            let mut map = Map::new();
            map.insert("dict".into(), encode_dict_body(&s.dict));
            map.insert("stream_b64".into(), Value::String(BASE64.encode(&s.data)));
            Value::Object(map)
        }
        PdfObject::Reference(r) => {
            let mut map = Map::new();
            map.insert("ref".into(), Value::Number(r.number.into()));
            if r.generation != 0 {
                map.insert("gen".into(), Value::Number(r.generation.into()));
            }
            Value::Object(map)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "trailer": { "Root": {"ref": 1} },
        "objects": {
            "1": { "dict": { "Type": {"name": "Catalog"},
                             "Pages": {"ref": 2} } },
            "2": { "dict": { "Kids": [ {"ref": 3} ], "Count": 1 } },
            "3": { "dict": { "Contents": {"ref": 4} } },
            "4": { "dict": {}, "stream_b64": "cSBR" }
        }
    }"#;

    #[test]
    fn loads_a_minimal_document() {
        let g = load_graph_json(MINIMAL).unwrap();
        assert_eq!(g.objects().len(), 4);
        assert_eq!(g.root_number(), 1);
        match &g.objects()[&4] {
            PdfObject::Stream(s) => assert_eq!(s.data, b"q Q"),
            _ => panic!("expected stream"),
        }
    }

    #[test]
    fn round_trips_through_json() {
        let g = load_graph_json(MINIMAL).unwrap();
        let text = graph_to_json(&g);
        let g2 = load_graph_json(&text).unwrap();
        assert_eq!(g.objects(), g2.objects());
        assert_eq!(g.trailer(), g2.trailer());
        // A second render is byte-identical.
        assert_eq!(text, graph_to_json(&g2));
    }

    #[test]
    fn missing_root_is_a_schema_violation() {
        let err = load_graph_json(r#"{"trailer": {}, "objects": {"1": {"dict": {}}}}"#).unwrap_err();
        match err {
            PdfError::SchemaViolation { path, reason } => {
                assert_eq!(path, "$.trailer");
                assert!(reason.contains("Root"), "reason: {reason}");
            }
            other => panic!("expected schema violation, got {other:?}"),
        }
    }

    #[test]
    fn bad_nodes_report_their_path() {
        let err = load_graph_json(
            r#"{"trailer": {"Root": {"ref": 1}},
                "objects": {"1": {"dict": {"Kids": [{"glorp": 1}]}}}}"#,
        )
        .unwrap_err();
        match err {
            PdfError::SchemaViolation { path, .. } => assert_eq!(path, "$.objects.1.dict.Kids[0]"),
            other => panic!("expected schema violation, got {other:?}"),
        }
    }

    #[test]
    fn bare_strings_are_rejected() {
        let err = load_graph_json(
            r#"{"trailer": {"Root": {"ref": 1}}, "objects": {"1": {"dict": {"T": "x"}}}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, PdfError::SchemaViolation { .. }));
    }

    #[test]
    fn reference_generation_defaults_to_zero() {
        let g = load_graph_json(MINIMAL).unwrap();
        match &g.objects()[&1] {
            PdfObject::Dictionary(d) => {
                assert_eq!(d["Pages"], PdfObject::Reference(ObjRef { number: 2, generation: 0 }))
            }
            _ => panic!("expected dict"),
        }
    }
}
