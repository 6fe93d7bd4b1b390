//! Byte-level tokenizer for PDF syntax.
//!
//! Produces the token stream shared by the body parser and the xref reader.
//! Strings and names are decoded here (escape sequences, `#xx` name escapes);
//! higher-level structure (dictionaries, arrays, references) is the parser's
//! job.

use super::PdfError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    Integer(i64),
    Real(f64),
    Name(String),
    /// Literal `(...)` or hex `<...>` string, already decoded to raw bytes.
    Text(Vec<u8>),
    ArrayOpen,
    ArrayClose,
    DictOpen,
    DictClose,
    /// Bare keyword such as `obj`, `endobj`, `stream`, `R`, `true`, `xref`.
    Keyword(String),
}

pub(crate) fn is_whitespace(b: u8) -> bool {
    matches!(b, b'\0' | b'\t' | b'\n' | b'\x0c' | b'\r' | b' ')
}

pub(crate) fn is_delimiter(b: u8) -> bool {
    matches!(b, b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%')
}

fn is_regular(b: u8) -> bool {
    !is_whitespace(b) && !is_delimiter(b)
}

fn hex_val(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

pub(crate) struct Lexer<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(buf: &'a [u8], pos: usize) -> Self {
        Lexer { buf, pos }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn set_pos(&mut self, pos: usize) {
        self.pos = pos;
    }

    fn byte(&self, at: usize) -> Option<u8> {
        self.buf.get(at).copied()
    }

    pub fn skip_whitespace(&mut self) {
        loop {
            match self.byte(self.pos) {
                Some(b) if is_whitespace(b) => self.pos += 1,
                Some(b'%') => {
                    // Comment runs to end of line.
                    while let Some(b) = self.byte(self.pos) {
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                        self.pos += 1;
                    }
                }
                _ => return,
            }
        }
    }

    /// Position of the next token, after whitespace and comments.
    pub fn peek_pos(&mut self) -> usize {
        self.skip_whitespace();
        self.pos
    }

    fn err(&self, at: usize, reason: impl Into<String>) -> PdfError {
        PdfError::malformed(at, reason)
    }

    pub fn next_token(&mut self) -> Result<Token, PdfError> {
        self.skip_whitespace();
        let start = self.pos;
        let b = self.byte(start).ok_or_else(|| self.err(start, "unexpected end of input"))?;
        match b {
            b'[' => {
                self.pos += 1;
                Ok(Token::ArrayOpen)
            }
            b']' => {
                self.pos += 1;
                Ok(Token::ArrayClose)
            }
            b'<' => {
                if self.byte(start + 1) == Some(b'<') {
                    self.pos += 2;
                    Ok(Token::DictOpen)
                } else {
                    self.pos += 1;
                    self.hex_string(start)
                }
            }
            b'>' => {
                if self.byte(start + 1) == Some(b'>') {
                    self.pos += 2;
                    Ok(Token::DictClose)
                } else {
                    Err(self.err(start, "stray '>'"))
                }
            }
            b'(' => {
                self.pos += 1;
                self.literal_string(start)
            }
            b'/' => {
                self.pos += 1;
                self.name(start)
            }
            b'+' | b'-' | b'.' | b'0'..=b'9' => self.number(start),
            _ if is_regular(b) => {
                let mut end = start;
                while let Some(c) = self.byte(end) {
                    if is_regular(c) {
                        end += 1;
                    } else {
                        break;
                    }
                }
                self.pos = end;
                let word = String::from_utf8_lossy(&self.buf[start..end]).into_owned();
                Ok(Token::Keyword(word))
            }
            _ => Err(self.err(start, format!("unexpected byte 0x{b:02x}"))),
        }
    }

    fn name(&mut self, start: usize) -> Result<Token, PdfError> {
        let mut out = Vec::new();
        while let Some(b) = self.byte(self.pos) {
            if !is_regular(b) {
                break;
            }
            if b == b'#' {
                let h = self.byte(self.pos + 1).and_then(hex_val);
                let l = self.byte(self.pos + 2).and_then(hex_val);
                // A '#' not followed by two hex digits is kept verbatim,
                // matching common lenient readers.
                if let (Some(h), Some(l)) = (h, l) {
                    out.push(h * 16 + l);
                    self.pos += 3;
                    continue;
                }
            }
            out.push(b);
            self.pos += 1;
        }
        if out.is_empty() {
            return Err(self.err(start, "empty name token"));
        }
        Ok(Token::Name(String::from_utf8_lossy(&out).into_owned()))
    }

    fn number(&mut self, start: usize) -> Result<Token, PdfError> {
        let mut end = start;
        if matches!(self.byte(end), Some(b'+') | Some(b'-')) {
            end += 1;
        }
        let mut saw_digit = false;
        let mut saw_dot = false;
        while let Some(b) = self.byte(end) {
            match b {
                b'0'..=b'9' => {
                    saw_digit = true;
                    end += 1;
                }
                b'.' if !saw_dot => {
                    saw_dot = true;
                    end += 1;
                }
                _ => break,
            }
        }
        if !saw_digit {
            return Err(self.err(start, "malformed number"));
        }
        self.pos = end;
        let text = std::str::from_utf8(&self.buf[start..end]).expect("digits are ascii");
        if saw_dot {
            let v: f64 = text.parse().map_err(|_| self.err(start, "malformed real number"))?;
            Ok(Token::Real(v))
        } else {
            match text.parse::<i64>() {
                Ok(v) => Ok(Token::Integer(v)),
                // Out-of-range integers degrade to reals rather than failing.
                Err(_) => {
                    let v: f64 = text.parse().map_err(|_| self.err(start, "malformed number"))?;
                    Ok(Token::Real(v))
                }
            }
        }
    }

    fn literal_string(&mut self, start: usize) -> Result<Token, PdfError> {
        let mut out = Vec::new();
        let mut depth = 1usize;
        loop {
            let b = self.byte(self.pos).ok_or_else(|| self.err(start, "unterminated literal string"))?;
            self.pos += 1;
            match b {
                b'(' => {
                    depth += 1;
                    out.push(b);
                }
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(Token::Text(out));
                    }
                    out.push(b);
                }
                b'\\' => {
                    let e = self.byte(self.pos).ok_or_else(|| self.err(start, "unterminated escape"))?;
                    self.pos += 1;
                    match e {
                        b'n' => out.push(b'\n'),
                        b'r' => out.push(b'\r'),
                        b't' => out.push(b'\t'),
                        b'b' => out.push(0x08),
                        b'f' => out.push(0x0c),
                        b'(' | b')' | b'\\' => out.push(e),
                        b'0'..=b'7' => {
                            let mut v = (e - b'0') as u32;
                            for _ in 0..2 {
                                match self.byte(self.pos) {
                                    Some(d @ b'0'..=b'7') => {
                                        v = v * 8 + (d - b'0') as u32;
                                        self.pos += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push((v & 0xff) as u8);
                        }
                        // Backslash before a line break is a continuation.
                        b'\r' => {
                            if self.byte(self.pos) == Some(b'\n') {
                                self.pos += 1;
                            }
                        }
                        b'\n' => {}
                        other => out.push(other),
                    }
                }
                // Any end-of-line inside a literal string reads as a single \n.
                b'\r' => {
                    if self.byte(self.pos) == Some(b'\n') {
                        self.pos += 1;
                    }
                    out.push(b'\n');
                }
                _ => out.push(b),
            }
        }
    }

    fn hex_string(&mut self, start: usize) -> Result<Token, PdfError> {
        let mut digits = Vec::new();
        loop {
            let b = self.byte(self.pos).ok_or_else(|| self.err(start, "unterminated hex string"))?;
            self.pos += 1;
            if b == b'>' {
                break;
            }
            if is_whitespace(b) {
                continue;
            }
            match hex_val(b) {
                Some(v) => digits.push(v),
                None => return Err(self.err(start, format!("invalid hex digit 0x{b:02x}"))),
            }
        }
        if digits.len() % 2 == 1 {
            digits.push(0);
        }
        let bytes = digits.chunks(2).map(|p| p[0] * 16 + p[1]).collect();
        Ok(Token::Text(bytes))
    }
}
