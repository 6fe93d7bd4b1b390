//! PDF file reader: cross-reference discovery, object loading, stream
//! payload recovery.
//!
//! The reader starts from the trailing `startxref`, walks the chain of
//! cross-reference sections (classic tables, cross-reference streams, and
//! hybrid files carrying both), then materializes every referenced object,
//! including objects packed inside object streams. Linearization hints are
//! ignored; the chain walk already reaches every section.

use std::collections::BTreeMap;

use flate2::read::ZlibDecoder;
use std::io::Read;

use super::lexer::{Lexer, Token};
use super::{Dict, ErrorSite, ObjRef, ObjectGraph, PdfError, PdfObject, Provenance, StreamObject};

/// Parses a complete PDF file into an object graph.
pub fn parse_pdf(bytes: &[u8]) -> Result<ObjectGraph, PdfError> {
    if bytes.is_empty() {
        return Err(PdfError::malformed(0, "empty input"));
    }
    let start = find_startxref(bytes)?;
    let mut accum = XrefAccum::default();
    load_xref_chain(bytes, start, &mut accum)?;

    if accum.trailer.contains_key("Encrypt") {
        return Err(PdfError::UnsupportedConstruct {
            at: ErrorSite::Offset(start),
            construct: "encryption".into(),
        });
    }

    let mut objects: BTreeMap<u32, PdfObject> = BTreeMap::new();
    let mut packed: Vec<(u32, u32)> = Vec::new(); // (container stream object, packed object number)
    for (&num, entry) in &accum.entries {
        match *entry {
            XrefEntry::Offset(off) => {
                let (parsed_num, obj) = parse_indirect_at(bytes, off, Some(&accum))?;
                // Trust the object header over the table when they disagree;
                // sloppy writers shift offsets by a revision.
                objects.entry(parsed_num).or_insert(obj);
            }
            XrefEntry::InStream { container, .. } => packed.push((container, num)),
        }
    }

    // Second pass: unpack object streams.
    let containers: std::collections::BTreeSet<u32> = packed.iter().map(|&(c, _)| c).collect();
    for container in containers {
        let stream = match objects.get(&container) {
            Some(PdfObject::Stream(s)) => s.clone(),
            // A missing or non-stream container leaves its objects dangling,
            // which the graph tolerates.
            _ => continue,
        };
        let unpacked = unpack_object_stream(&stream, container)?;
        for (num, obj) in unpacked {
            objects.entry(num).or_insert(obj);
        }
    }

    ObjectGraph::new(objects, accum.trailer, Provenance::ParsedPdf)
        .map_err(|reason| PdfError::MalformedPdf { at: ErrorSite::Offset(start), reason })
}

#[derive(Debug, Clone, Copy)]
enum XrefEntry {
    Offset(usize),
    InStream { container: u32, _index: u32 },
}

#[derive(Default)]
struct XrefAccum {
    entries: BTreeMap<u32, XrefEntry>,
    trailer: Dict,
}

impl XrefAccum {
    /// Entries and trailer keys from newer sections win; the chain is walked
    /// newest-first, so only absent slots are filled.
    fn add_entry(&mut self, num: u32, entry: XrefEntry) {
        self.entries.entry(num).or_insert(entry);
    }

    fn merge_trailer(&mut self, dict: Dict) {
        for (k, v) in dict {
            self.trailer.entry(k).or_insert(v);
        }
    }
}

fn find_startxref(bytes: &[u8]) -> Result<usize, PdfError> {
    let needle = b"startxref";
    let hit = bytes
        .windows(needle.len())
        .rposition(|w| w == needle)
        .ok_or_else(|| PdfError::malformed(bytes.len(), "no startxref keyword"))?;
    let mut lx = Lexer::new(bytes, hit + needle.len());
    match lx.next_token()? {
        Token::Integer(v) if v >= 0 => Ok(v as usize),
        _ => Err(PdfError::malformed(hit, "startxref is not followed by a byte offset")),
    }
}

fn load_xref_chain(bytes: &[u8], start: usize, accum: &mut XrefAccum) -> Result<(), PdfError> {
    let mut visited = Vec::new();
    let mut next = Some(start);
    while let Some(off) = next {
        if visited.contains(&off) {
            break;
        }
        visited.push(off);
        if off >= bytes.len() {
            return Err(PdfError::malformed(off, "cross-reference offset beyond end of file"));
        }
        let mut lx = Lexer::new(bytes, off);
        let at = lx.peek_pos();
        let section_trailer = if bytes[at..].starts_with(b"xref") {
            load_classic_table(bytes, at, accum)?
        } else {
            load_xref_stream(bytes, at, accum)?
        };
        // Hybrid files: a classic table may point at a supplemental
        // cross-reference stream carrying the packed-object entries.
        if let Some(PdfObject::Number(x)) = section_trailer.get("XRefStm") {
            let xoff = *x as usize;
            if !visited.contains(&xoff) {
                visited.push(xoff);
                let mut xlx = Lexer::new(bytes, xoff);
                let xat = xlx.peek_pos();
                load_xref_stream(bytes, xat, accum)?;
            }
        }
        next = match section_trailer.get("Prev") {
            Some(PdfObject::Number(p)) => Some(*p as usize),
            _ => None,
        };
        accum.merge_trailer(section_trailer);
    }
    Ok(())
}

/// Parses `xref` table subsections and the trailing `trailer` dictionary.
/// Returns this section's trailer.
fn load_classic_table(bytes: &[u8], off: usize, accum: &mut XrefAccum) -> Result<Dict, PdfError> {
    let mut lx = Lexer::new(bytes, off);
    match lx.next_token()? {
        Token::Keyword(k) if k == "xref" => {}
        _ => return Err(PdfError::malformed(off, "expected xref keyword")),
    }
    loop {
        let at = lx.peek_pos();
        match lx.next_token()? {
            Token::Keyword(k) if k == "trailer" => break,
            Token::Integer(first) if first >= 0 => {
                let count = match lx.next_token()? {
                    Token::Integer(c) if c >= 0 => c as u32,
                    _ => return Err(PdfError::malformed(at, "bad xref subsection header")),
                };
                for i in 0..count {
                    let eat = lx.peek_pos();
                    let offset = match lx.next_token()? {
                        Token::Integer(v) if v >= 0 => v as usize,
                        _ => return Err(PdfError::malformed(eat, "bad xref entry offset")),
                    };
                    let _generation = match lx.next_token()? {
                        Token::Integer(v) if v >= 0 => v,
                        _ => return Err(PdfError::malformed(eat, "bad xref entry generation")),
                    };
                    match lx.next_token()? {
                        Token::Keyword(k) if k == "n" => {
                            if offset > 0 {
                                accum.add_entry(first as u32 + i, XrefEntry::Offset(offset));
                            }
                        }
                        Token::Keyword(k) if k == "f" => {}
                        _ => return Err(PdfError::malformed(eat, "bad xref entry type")),
                    }
                }
            }
            _ => return Err(PdfError::malformed(at, "unexpected token in xref table")),
        }
    }
    let tat = lx.peek_pos();
    match parse_object(&mut lx)? {
        PdfObject::Dictionary(d) => Ok(d),
        _ => Err(PdfError::malformed(tat, "trailer is not a dictionary")),
    }
}

/// Parses a cross-reference stream section. Its dictionary doubles as the
/// section trailer.
fn load_xref_stream(bytes: &[u8], off: usize, accum: &mut XrefAccum) -> Result<Dict, PdfError> {
    let (_, obj) = parse_indirect_at(bytes, off, None)?;
    let stream = match obj {
        PdfObject::Stream(s) => s,
        _ => return Err(PdfError::malformed(off, "cross-reference offset does not point at a table or stream")),
    };
    let data = decode_stream(&stream, off)?;

    let widths: Vec<usize> = match stream.dict.get("W") {
        Some(PdfObject::Array(a)) => a
            .iter()
            .map(|v| v.as_number().map(|n| n as usize))
            .collect::<Option<_>>()
            .ok_or_else(|| PdfError::malformed(off, "non-numeric W entry in cross-reference stream"))?,
        _ => return Err(PdfError::malformed(off, "cross-reference stream lacks W")),
    };
    if widths.len() < 3 {
        return Err(PdfError::malformed(off, "cross-reference stream W has fewer than three fields"));
    }
    let size = match stream.dict.get("Size") {
        Some(PdfObject::Number(n)) => *n as u32,
        _ => return Err(PdfError::malformed(off, "cross-reference stream lacks Size")),
    };
    let index: Vec<(u32, u32)> = match stream.dict.get("Index") {
        Some(PdfObject::Array(a)) => {
            let nums: Option<Vec<u32>> = a.iter().map(|v| v.as_number().map(|n| n as u32)).collect();
            let nums = nums.ok_or_else(|| PdfError::malformed(off, "non-numeric Index entry"))?;
            nums.chunks(2).filter(|c| c.len() == 2).map(|c| (c[0], c[1])).collect()
        }
        _ => vec![(0, size)],
    };

    let row = widths.iter().sum::<usize>();
    if row == 0 {
        return Err(PdfError::malformed(off, "cross-reference stream has zero-width rows"));
    }
    let mut cursor = 0usize;
    for (start, count) in index {
        for i in 0..count {
            if cursor + row > data.len() {
                // Truncated tables are tolerated; remaining objects stay dangling.
                break;
            }
            let mut fields = [0u64; 3];
            for (fi, &w) in widths.iter().take(3).enumerate() {
                let mut v = 0u64;
                for _ in 0..w {
                    v = (v << 8) | data[cursor] as u64;
                    cursor += 1;
                }
                fields[fi] = v;
            }
            // Skip any extra fields beyond the standard three.
            cursor += row - widths.iter().take(3).sum::<usize>();
            let kind = if widths[0] == 0 { 1 } else { fields[0] };
            let num = start + i;
            match kind {
                0 => {}
                1 => {
                    if fields[1] > 0 {
                        accum.add_entry(num, XrefEntry::Offset(fields[1] as usize));
                    }
                }
                2 => accum.add_entry(
                    num,
                    XrefEntry::InStream { container: fields[1] as u32, _index: fields[2] as u32 },
                ),
                _ => {}
            }
        }
    }
    Ok(stream.dict)
}

/// Parses `N G obj ... endobj` at a byte offset. Returns the object number
/// from the header and the parsed body.
fn parse_indirect_at(
    bytes: &[u8],
    off: usize,
    xref: Option<&XrefAccum>,
) -> Result<(u32, PdfObject), PdfError> {
    if off >= bytes.len() {
        return Err(PdfError::malformed(off, "object offset beyond end of file"));
    }
    let mut lx = Lexer::new(bytes, off);
    let num = match lx.next_token()? {
        Token::Integer(v) if v > 0 => v as u32,
        _ => return Err(PdfError::malformed(off, "expected object number")),
    };
    match lx.next_token()? {
        Token::Integer(v) if v >= 0 => v,
        _ => return Err(PdfError::malformed(off, "expected generation number")),
    };
    match lx.next_token()? {
        Token::Keyword(k) if k == "obj" => {}
        _ => return Err(PdfError::malformed(off, "expected obj keyword")),
    }
    let body = parse_object(&mut lx)?;

    // A stream keyword after the dictionary upgrades it to a stream object.
    let save = lx.pos();
    let obj = match lx.next_token() {
        Ok(Token::Keyword(k)) if k == "stream" => {
            let dict = match body {
                PdfObject::Dictionary(d) => d,
                _ => return Err(PdfError::MalformedPdf {
                    at: ErrorSite::Object(num),
                    reason: "stream keyword after a non-dictionary".into(),
                }),
            };
            let data = read_stream_payload(bytes, &mut lx, &dict, num, xref)?;
            PdfObject::Stream(StreamObject { dict, data })
        }
        _ => {
            lx.set_pos(save);
            body
        }
    };
    // endobj is consumed when present; files missing it still parse.
    let save = lx.pos();
    match lx.next_token() {
        Ok(Token::Keyword(k)) if k == "endobj" => {}
        _ => lx.set_pos(save),
    }
    Ok((num, obj))
}

/// Reads a stream payload after the `stream` keyword, using the declared
/// `/Length` when it is sound and scanning for `endstream` otherwise.
fn read_stream_payload(
    bytes: &[u8],
    lx: &mut Lexer,
    dict: &Dict,
    num: u32,
    xref: Option<&XrefAccum>,
) -> Result<Vec<u8>, PdfError> {
    // The stream keyword is followed by CRLF or LF.
    let mut start = lx.pos();
    if bytes.get(start) == Some(&b'\r') {
        start += 1;
    }
    if bytes.get(start) == Some(&b'\n') {
        start += 1;
    }

    let declared = match dict.get("Length") {
        Some(PdfObject::Number(n)) if *n >= 0.0 => Some(*n as usize),
        Some(PdfObject::Reference(r)) => resolve_length_object(bytes, xref, *r),
        _ => None,
    };

    if let Some(len) = declared {
        let end = start + len;
        if end <= bytes.len() {
            let mut check = Lexer::new(bytes, end);
            let save = check.pos();
            if let Ok(Token::Keyword(k)) = check.next_token() {
                if k == "endstream" {
                    lx.set_pos(check.pos());
                    return Ok(bytes[start..end].to_vec());
                }
            }
            check.set_pos(save);
        }
    }

    // Declared length missing or inconsistent: recover by scanning for the
    // nearest endstream keyword.
    let needle = b"endstream";
    let rel = bytes[start..]
        .windows(needle.len())
        .position(|w| w == needle)
        .ok_or_else(|| PdfError::MalformedPdf {
            at: ErrorSite::Object(num),
            reason: "stream payload has no endstream".into(),
        })?;
    let mut end = start + rel;
    // Trim the end-of-line marker that precedes endstream.
    if end > start && bytes[end - 1] == b'\n' {
        end -= 1;
    }
    if end > start && bytes[end - 1] == b'\r' {
        end -= 1;
    }
    lx.set_pos(start + rel + needle.len());
    Ok(bytes[start..end].to_vec())
}

/// Resolves an indirect `/Length` by parsing the referenced number object.
fn resolve_length_object(bytes: &[u8], xref: Option<&XrefAccum>, r: ObjRef) -> Option<usize> {
    let accum = xref?;
    match accum.entries.get(&r.number) {
        Some(&XrefEntry::Offset(off)) => {
            // The nested parse gets no xref: a length object is a bare
            // number, and withholding the table bounds the recursion.
            let (_, obj) = parse_indirect_at(bytes, off, None).ok()?;
            match obj {
                PdfObject::Number(n) if n >= 0.0 => Some(n as usize),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Parses one object (scalar, collection, or reference) from the token stream.
pub(super) fn parse_object(lx: &mut Lexer) -> Result<PdfObject, PdfError> {
    let at = lx.peek_pos();
    let tok = lx.next_token()?;
    match tok {
        Token::Integer(i) => {
            //`I G R` is a reference; plain integers rewind the lookahead.
            let save = lx.pos();
            if i > 0 {
                if let Ok(Token::Integer(g)) = lx.next_token() {
                    if (0..=u16::MAX as i64).contains(&g) {
                        if let Ok(Token::Keyword(k)) = lx.next_token() {
                            if k == "R" {
                                return Ok(PdfObject::Reference(ObjRef {
                                    number: i as u32,
                                    generation: g as u16,
                                }));
                            }
                        }
                    }
                }
            }
            lx.set_pos(save);
            Ok(PdfObject::Number(i as f64))
        }
        Token::Real(v) => Ok(PdfObject::Number(v)),
        Token::Name(n) => Ok(PdfObject::Name(n)),
        Token::Text(t) => Ok(PdfObject::Text(t)),
        Token::ArrayOpen => {
            let mut items = Vec::new();
            loop {
                let save = lx.pos();
                match lx.next_token()? {
                    Token::ArrayClose => return Ok(PdfObject::Array(items)),
                    _ => {
                        lx.set_pos(save);
                        items.push(parse_object(lx)?);
                    }
                }
            }
        }
        Token::DictOpen => {
            let mut dict = Dict::new();
            loop {
                let save = lx.pos();
                match lx.next_token()? {
                    Token::DictClose => return Ok(PdfObject::Dictionary(dict)),
                    Token::Name(key) => {
                        let value = parse_object(lx)?;
                        // Duplicate keys: the last occurrence wins.
                        dict.insert(key, value);
                    }
                    _ => return Err(PdfError::malformed(save, "dictionary key is not a name")),
                }
            }
        }
        Token::Keyword(k) => match k.as_str() {
            "true" => Ok(PdfObject::Boolean(true)),
            "false" => Ok(PdfObject::Boolean(false)),
            "null" => Ok(PdfObject::Null),
            other => Err(PdfError::malformed(at, format!("unexpected keyword '{other}'"))),
        },
        Token::ArrayClose | Token::DictClose => Err(PdfError::malformed(at, "unexpected closing delimiter")),
    }
}

/// Decodes a stream payload for internal consumption (cross-reference and
/// object streams): FlateDecode plus the standard row predictors.
fn decode_stream(stream: &StreamObject, at: usize) -> Result<Vec<u8>, PdfError> {
    let filters: Vec<String> = match stream.dict.get("Filter") {
        None | Some(PdfObject::Null) => vec![],
        Some(PdfObject::Name(n)) => vec![n.clone()],
        Some(PdfObject::Array(a)) => a
            .iter()
            .map(|v| v.as_name().map(str::to_string))
            .collect::<Option<_>>()
            .ok_or_else(|| PdfError::malformed(at, "non-name entry in Filter array"))?,
        Some(_) => return Err(PdfError::malformed(at, "Filter is neither a name nor an array")),
    };
    let parms: Vec<Option<&Dict>> = match stream.dict.get("DecodeParms") {
        None | Some(PdfObject::Null) => vec![None; filters.len()],
        Some(PdfObject::Dictionary(d)) => vec![Some(d)],
        Some(PdfObject::Array(a)) => a.iter().map(|v| v.dict_like()).collect(),
        Some(_) => vec![None; filters.len()],
    };

    let mut data = stream.data.clone();
    for (i, f) in filters.iter().enumerate() {
        match f.as_str() {
            "FlateDecode" | "Fl" => {
                data = inflate(&data, at)?;
                if let Some(Some(p)) = parms.get(i) {
                    data = apply_predictor(data, p, at)?;
                }
            }
            other => {
                return Err(PdfError::UnsupportedConstruct {
                    at: ErrorSite::Offset(at),
                    construct: format!("stream filter {other} on a structural stream"),
                })
            }
        }
    }
    Ok(data)
}

fn inflate(data: &[u8], at: usize) -> Result<Vec<u8>, PdfError> {
    let mut out = Vec::new();
    let mut dec = ZlibDecoder::new(data);
    match dec.read_to_end(&mut out) {
        Ok(_) => Ok(out),
        Err(_) => {
            // Some writers emit raw deflate without the zlib wrapper.
            let mut out = Vec::new();
            let mut dec = flate2::read::DeflateDecoder::new(data);
            dec.read_to_end(&mut out)
                .map_err(|e| PdfError::malformed(at, format!("flate decode failed: {e}")))?;
            Ok(out)
        }
    }
}

fn dict_usize(d: &Dict, key: &str, default: usize) -> usize {
    match d.get(key) {
        Some(PdfObject::Number(n)) if *n >= 0.0 => *n as usize,
        _ => default,
    }
}

fn apply_predictor(data: Vec<u8>, parms: &Dict, at: usize) -> Result<Vec<u8>, PdfError> {
    let predictor = dict_usize(parms, "Predictor", 1);
    if predictor <= 1 {
        return Ok(data);
    }
    let colors = dict_usize(parms, "Colors", 1);
    let bpc = dict_usize(parms, "BitsPerComponent", 8);
    let columns = dict_usize(parms, "Columns", 1);
    if bpc != 8 {
        return Err(PdfError::UnsupportedConstruct {
            at: ErrorSite::Offset(at),
            construct: format!("predictor with {bpc} bits per component"),
        });
    }
    let stride = colors.max(1) * columns.max(1);

    if predictor == 2 {
        // TIFF horizontal differencing.
        let mut out = data;
        for row in out.chunks_mut(stride) {
            for i in colors..row.len() {
                row[i] = row[i].wrapping_add(row[i - colors]);
            }
        }
        return Ok(out);
    }

    // PNG predictors: each row is prefixed with a filter-type byte.
    let row_len = stride + 1;
    let mut out = Vec::with_capacity(data.len());
    let mut prev = vec![0u8; stride];
    for row in data.chunks(row_len) {
        if row.len() < 2 {
            break;
        }
        let ftype = row[0];
        let mut cur = row[1..].to_vec();
        match ftype {
            0 => {}
            1 => {
                for i in colors..cur.len() {
                    cur[i] = cur[i].wrapping_add(cur[i - colors]);
                }
            }
            2 => {
                for i in 0..cur.len() {
                    cur[i] = cur[i].wrapping_add(prev[i]);
                }
            }
            3 => {
                for i in 0..cur.len() {
                    let left = if i >= colors { cur[i - colors] as u16 } else { 0 };
                    cur[i] = cur[i].wrapping_add(((left + prev[i] as u16) / 2) as u8);
                }
            }
            4 => {
                for i in 0..cur.len() {
                    let a = if i >= colors { cur[i - colors] as i16 } else { 0 };
                    let b = prev[i] as i16;
                    let c = if i >= colors { prev[i - colors] as i16 } else { 0 };
                    let p = a + b - c;
                    let (pa, pb, pc) = ((p - a).abs(), (p - b).abs(), (p - c).abs());
                    let pred = if pa <= pb && pa <= pc { a } else if pb <= pc { b } else { c };
                    cur[i] = cur[i].wrapping_add(pred as u8);
                }
            }
            other => {
                return Err(PdfError::malformed(at, format!("unknown png predictor filter {other}")))
            }
        }
        // Pad short trailing rows so `prev` keeps the full stride.
        let mut full = cur.clone();
        full.resize(stride, 0);
        prev = full;
        out.extend_from_slice(&cur);
    }
    Ok(out)
}

/// Unpacks the objects carried by an object stream (`/Type /ObjStm`).
fn unpack_object_stream(stream: &StreamObject, container: u32) -> Result<Vec<(u32, PdfObject)>, PdfError> {
    let data = decode_stream(stream, 0).map_err(|e| match e {
        PdfError::MalformedPdf { reason, .. } => {
            PdfError::MalformedPdf { at: ErrorSite::Object(container), reason }
        }
        other => other,
    })?;
    let n = match stream.dict.get("N") {
        Some(PdfObject::Number(v)) if *v >= 0.0 => *v as usize,
        _ => return Ok(vec![]),
    };
    let first = match stream.dict.get("First") {
        Some(PdfObject::Number(v)) if *v >= 0.0 => *v as usize,
        _ => return Ok(vec![]),
    };
    let mut header = Lexer::new(&data, 0);
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let num = match header.next_token() {
            Ok(Token::Integer(v)) if v > 0 => v as u32,
            _ => break,
        };
        let off = match header.next_token() {
            Ok(Token::Integer(v)) if v >= 0 => v as usize,
            _ => break,
        };
        pairs.push((num, off));
    }
    let mut out = Vec::with_capacity(pairs.len());
    for (num, off) in pairs {
        let pos = first + off;
        if pos >= data.len() {
            continue;
        }
        let mut lx = Lexer::new(&data, pos);
        if let Ok(obj) = parse_object(&mut lx) {
            out.push((num, obj));
        }
    }
    Ok(out)
}

/// Consumes trailing whitespace; used by tests to assert full-token parses.
#[cfg(test)]
pub(super) fn parse_standalone_object(src: &[u8]) -> Result<PdfObject, PdfError> {
    let mut lx = Lexer::new(src, 0);
    let obj = parse_object(&mut lx)?;
    lx.skip_whitespace();
    if lx.pos() != src.len() {
        return Err(PdfError::malformed(lx.pos(), "trailing bytes after object"));
    }
    Ok(obj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_collections_references() {
        let obj = parse_standalone_object(b"<< /A [1 2 0 R (s)] /B << /C null >> /D 4.5 >>").unwrap();
        let d = match obj {
            PdfObject::Dictionary(d) => d,
            _ => panic!("expected dictionary"),
        };
        assert_eq!(
            d["A"],
            PdfObject::Array(vec![
                PdfObject::Number(1.0),
                PdfObject::Reference(ObjRef { number: 2, generation: 0 }),
                PdfObject::Text(b"s".to_vec()),
            ])
        );
        assert_eq!(d["D"], PdfObject::Number(4.5));
    }

    #[test]
    fn integer_pairs_without_r_are_numbers() {
        let obj = parse_standalone_object(b"[1 2 3]").unwrap();
        assert_eq!(
            obj,
            PdfObject::Array(vec![PdfObject::Number(1.0), PdfObject::Number(2.0), PdfObject::Number(3.0)])
        );
    }

    #[test]
    fn duplicate_dictionary_keys_last_wins() {
        let obj = parse_standalone_object(b"<< /K 1 /K 2 >>").unwrap();
        match obj {
            PdfObject::Dictionary(d) => assert_eq!(d["K"], PdfObject::Number(2.0)),
            _ => panic!("expected dictionary"),
        }
    }
}
