//! Single-revision PDF writer.
//!
//! Repacks an [`ObjectGraph`] into a fresh file: one body, one classic
//! cross-reference table, one trailer. All generation numbers are written as
//! 0 and dangling references degrade to `null`, so the output stands alone
//! regardless of the revision history of the file the graph came from.
//! Output is byte-deterministic for a given graph.

use super::{Dict, ObjectGraph, PdfError, PdfObject};

/// Serializes a graph to PDF bytes.
pub fn serialize_pdf(graph: &ObjectGraph) -> Result<Vec<u8>, PdfError> {
    let mut out = Vec::with_capacity(1024);
    out.extend_from_slice(b"%PDF-1.5\n");
    // Binary marker comment so transports treat the file as binary.
    out.extend_from_slice(b"%\xc7\xec\x8f\xa2\n");

    let max_num = *graph.objects().keys().next_back().unwrap_or(&0);
    let mut offsets: Vec<Option<usize>> = vec![None; max_num as usize + 1];

    for (&num, obj) in graph.objects() {
        offsets[num as usize] = Some(out.len());
        out.extend_from_slice(format!("{num} 0 obj\n").as_bytes());
        write_object(&mut out, obj, graph, true)?;
        out.extend_from_slice(b"\nendobj\n");
    }

    let xref_off = out.len();
    out.extend_from_slice(format!("xref\n0 {}\n", max_num + 1).as_bytes());
    out.extend_from_slice(b"0000000000 65535 f\r\n");
    for num in 1..=max_num {
        match offsets[num as usize] {
            Some(off) => out.extend_from_slice(format!("{off:010} 00000 n\r\n").as_bytes()),
            None => out.extend_from_slice(b"0000000000 65535 f\r\n"),
        }
    }

    let mut trailer: Dict = graph.trailer().clone();
    trailer.remove("Prev");
    trailer.remove("XRefStm");
    trailer.insert("Size".into(), PdfObject::Number((max_num + 1) as f64));
    out.extend_from_slice(b"trailer\n");
    write_object(&mut out, &PdfObject::Dictionary(trailer), graph, false)?;
    out.extend_from_slice(format!("\nstartxref\n{xref_off}\n%%EOF\n").as_bytes());
    Ok(out)
}

fn write_object(
    out: &mut Vec<u8>,
    obj: &PdfObject,
    graph: &ObjectGraph,
    top: bool,
) -> Result<(), PdfError> {
    match obj {
        PdfObject::Null => out.extend_from_slice(b"null"),
        PdfObject::Boolean(true) => out.extend_from_slice(b"true"),
        PdfObject::Boolean(false) => out.extend_from_slice(b"false"),
        PdfObject::Number(n) => write_number(out, *n)?,
        PdfObject::Text(t) => write_text(out, t),
        PdfObject::Name(n) => write_name(out, n),
        PdfObject::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b' ');
                }
                write_object(out, item, graph, false)?;
            }
            out.push(b']');
        }
        PdfObject::Dictionary(d) => write_dict(out, d, graph)?,
        PdfObject::Stream(s) => {
            // A stream is only representable as the body of an indirect
            // object; anywhere else the file format has no syntax for it.
            if !top {
                return Err(PdfError::SerializationFailure {
                    reason: "stream nested inside another value".into(),
                });
            }
            let mut dict = s.dict.clone();
            dict.insert("Length".into(), PdfObject::Number(s.data.len() as f64));
            write_dict(out, &dict, graph)?;
            out.extend_from_slice(b"\nstream\n");
            out.extend_from_slice(&s.data);
            out.extend_from_slice(b"\nendstream");
        }
        PdfObject::Reference(r) => {
            // Dangling references are written as null so the output never
            // points at objects it does not carry.
            if graph.objects().contains_key(&r.number) {
                out.extend_from_slice(format!("{} 0 R", r.number).as_bytes());
            } else {
                out.extend_from_slice(b"null");
            }
        }
    }
    Ok(())
}

fn write_dict(out: &mut Vec<u8>, d: &Dict, graph: &ObjectGraph) -> Result<(), PdfError> {
    out.extend_from_slice(b"<<");
    for (i, (k, v)) in d.iter().enumerate() {
        if i > 0 {
            out.push(b' ');
        }
        write_name(out, k);
        out.push(b' ');
        write_object(out, v, graph, false)?;
    }
    out.extend_from_slice(b">>");
    Ok(())
}

fn write_number(out: &mut Vec<u8>, n: f64) -> Result<(), PdfError> {
    if !n.is_finite() {
        return Err(PdfError::SerializationFailure { reason: format!("non-finite number {n}") });
    }
    if n.fract() == 0.0 && n.abs() < 9e15 {
        out.extend_from_slice(format!("{}", n as i64).as_bytes());
    } else {
        out.extend_from_slice(format!("{n}").as_bytes());
    }
    Ok(())
}

fn write_name(out: &mut Vec<u8>, name: &str) {
    out.push(b'/');
    for &b in name.as_bytes() {
        let escape = b == b'#'
            || b <= b' '
            || b > b'~'
            || matches!(b, b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%');
        if escape {
            out.extend_from_slice(format!("#{b:02X}").as_bytes());
        } else {
            out.push(b);
        }
    }
}

fn write_text(out: &mut Vec<u8>, t: &[u8]) {
    let printable = t.iter().all(|&b| (0x20..=0x7e).contains(&b) && !matches!(b, b'(' | b')' | b'\\'));
    if printable {
        out.push(b'(');
        out.extend_from_slice(t);
        out.push(b')');
    } else {
        out.push(b'<');
        for b in t {
            out.extend_from_slice(format!("{b:02x}").as_bytes());
        }
        out.push(b'>');
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ObjRef, Provenance, StreamObject};
    use super::*;
    use std::collections::BTreeMap;

    fn graph(objects: Vec<(u32, PdfObject)>) -> ObjectGraph {
        let mut trailer = Dict::new();
        trailer.insert("Root".into(), PdfObject::Reference(ObjRef::new(1)));
        ObjectGraph::new(objects.into_iter().collect::<BTreeMap<_, _>>(), trailer, Provenance::ParsedPdf)
            .unwrap()
    }

    fn catalog() -> (u32, PdfObject) {
        let mut d = Dict::new();
        d.insert("Type".into(), PdfObject::Name("Catalog".into()));
        (1, PdfObject::Dictionary(d))
    }

    #[test]
    fn output_is_deterministic() {
        let g = graph(vec![catalog()]);
        assert_eq!(serialize_pdf(&g).unwrap(), serialize_pdf(&g).unwrap());
    }

    #[test]
    fn dangling_reference_serializes_as_null() {
        let mut d = Dict::new();
        d.insert("Type".into(), PdfObject::Name("Catalog".into()));
        d.insert("Missing".into(), PdfObject::Reference(ObjRef::new(42)));
        let g = graph(vec![(1, PdfObject::Dictionary(d))]);
        let bytes = serialize_pdf(&g).unwrap();
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("/Missing null"), "got: {text}");
        assert!(!text.contains("42 0 R"));
    }

    #[test]
    fn round_trips_through_the_parser() {
        let mut page = Dict::new();
        page.insert("Type".into(), PdfObject::Name("Page".into()));
        page.insert("Contents".into(), PdfObject::Reference(ObjRef::new(3)));
        let mut cat = Dict::new();
        cat.insert("Type".into(), PdfObject::Name("Catalog".into()));
        cat.insert("Kids".into(), PdfObject::Array(vec![PdfObject::Reference(ObjRef::new(2))]));
        cat.insert("Label".into(), PdfObject::Text(b"weird\x01bytes".to_vec()));
        let stream = StreamObject { dict: Dict::new(), data: b"q 1 0 0 1 0 0 cm Q".to_vec() };
        let g = graph(vec![
            (1, PdfObject::Dictionary(cat)),
            (2, PdfObject::Dictionary(page)),
            (3, PdfObject::Stream(stream)),
        ]);
        let bytes = serialize_pdf(&g).unwrap();
        let back = super::super::parse_pdf(&bytes).unwrap();
        assert_eq!(back.objects().len(), 3);
        assert_eq!(back.objects()[&1], g.objects()[&1]);
        assert_eq!(back.objects()[&2], g.objects()[&2]);
        match (&back.objects()[&3], &g.objects()[&3]) {
            (PdfObject::Stream(a), PdfObject::Stream(b)) => assert_eq!(a.data, b.data),
            _ => panic!("expected streams"),
        }
    }

    #[test]
    fn nested_streams_are_rejected() {
        let stream = StreamObject { dict: Dict::new(), data: b"x".to_vec() };
        let mut d = Dict::new();
        d.insert("Type".into(), PdfObject::Name("Catalog".into()));
        d.insert("Bad".into(), PdfObject::Array(vec![PdfObject::Stream(stream)]));
        let g = graph(vec![(1, PdfObject::Dictionary(d))]);
        assert!(matches!(
            serialize_pdf(&g),
            Err(PdfError::SerializationFailure { .. })
        ));
    }

    #[test]
    fn gaps_in_object_numbers_become_free_entries() {
        let mut d = Dict::new();
        d.insert("Type".into(), PdfObject::Name("Catalog".into()));
        let g = graph(vec![(1, PdfObject::Dictionary(d.clone())), (5, PdfObject::Number(7.0))]);
        let bytes = serialize_pdf(&g).unwrap();
        let back = super::super::parse_pdf(&bytes).unwrap();
        assert_eq!(back.objects().keys().copied().collect::<Vec<_>>(), vec![1, 5]);
    }
}
