//! PDS3 Object Description Language labels.
//!
//! Accepted subset: `KEYWORD = value` assignments, `OBJECT`/`GROUP` blocks
//! (with their `END_OBJECT`/`END_GROUP` closers, name optional), `^POINTER`
//! statements, `/* ... */` comments, numeric units in angle brackets,
//! sequences `( )` and sets `{ }` nested at most one level, and values that
//! continue over several lines. Parsing stops at the top-level `END`, so an
//! attached label can be handed over together with its binary payload.
//!
//! The lexer works on bytes. Bytes `>= 0x80` are only allowed inside quoted
//! strings; quoted text is kept verbatim (UTF-8 when valid, Latin-1 otherwise).

use std::fmt::Write as _;

use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdlError {
    #[error("line {line}: unbalanced block: {detail}")]
    UnbalancedBlock { line: usize, detail: String },
    #[error("label has no END statement")]
    MissingEnd,
    #[error("line {line}: malformed value: {detail}")]
    MalformedValue { line: usize, detail: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("pointer ^{0} is a record offset and RECORD_BYTES is unknown")]
    NeedsRecordBytes(String),
    #[error("pointer ^{name}: {detail}")]
    BadPointer { name: String, detail: String },
}

pub type Result<T> = std::result::Result<T, OdlError>;

#[derive(Debug, Clone, PartialEq)]
pub enum OdlValue {
    Integer(i64),
    Real { value: f64, unit: Option<String> },
    Text(String),
    Symbol(String),
    DateTime(String),
    Sequence(Vec<OdlValue>),
    Set(Vec<OdlValue>),
}

impl OdlValue {
    pub fn real(value: f64) -> Self {
        OdlValue::Real { value, unit: None }
    }

    /// Integer view; reals are accepted when they hold an exact integer.
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            OdlValue::Integer(i) => Some(*i),
            OdlValue::Real { value, .. }
                if value.fract() == 0.0 && value.abs() < 9.007_199_254_740_992e15 =>
            {
                Some(*value as i64)
            }
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            OdlValue::Integer(i) => Some(*i as f64),
            OdlValue::Real { value, .. } => Some(*value),
            _ => None,
        }
    }

    /// String view of text, symbol and datetime values.
    pub fn as_str(&self) -> Option<&str> {
        match self {
            OdlValue::Text(s) | OdlValue::Symbol(s) | OdlValue::DateTime(s) => Some(s),
            _ => None,
        }
    }

    pub fn unit(&self) -> Option<&str> {
        match self {
            OdlValue::Real { unit, .. } => unit.as_deref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatementKind {
    Assignment,
    Pointer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdlStatement {
    pub keyword: String,
    pub value: OdlValue,
    pub kind: StatementKind,
}

impl OdlStatement {
    pub fn new(keyword: impl Into<String>, value: OdlValue) -> Self {
        let keyword = keyword.into();
        let kind = if keyword.starts_with('^') {
            StatementKind::Pointer
        } else {
            StatementKind::Assignment
        };
        OdlStatement {
            keyword,
            value,
            kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Object,
    Group,
}

impl BlockKind {
    fn opener(self) -> &'static str {
        match self {
            BlockKind::Object => "OBJECT",
            BlockKind::Group => "GROUP",
        }
    }

    fn closer(self) -> &'static str {
        match self {
            BlockKind::Object => "END_OBJECT",
            BlockKind::Group => "END_GROUP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdlBlock {
    pub kind: BlockKind,
    pub name: String,
    pub body: OdlLabel,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OdlLabel {
    pub statements: Vec<OdlStatement>,
    pub children: Vec<OdlBlock>,
}

impl OdlLabel {
    /// First statement at this level with the given keyword (case-insensitive).
    pub fn get(&self, keyword: &str) -> Option<&OdlValue> {
        self.statements
            .iter()
            .find(|s| s.keyword.eq_ignore_ascii_case(keyword))
            .map(|s| &s.value)
    }

    /// First child block at this level with the given name.
    pub fn child(&self, name: &str) -> Option<&OdlBlock> {
        self.children
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetUnit {
    Bytes,
    Records,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointerInfo {
    /// `None` for attached labels: the payload lives in the label's own file.
    pub target_file: Option<String>,
    pub offset: u64,
    pub offset_unit: OffsetUnit,
}

impl PointerInfo {
    /// Converts a record offset to bytes. Record offsets are 1-based.
    pub fn resolve(&self, name: &str, record_bytes: Option<u64>) -> Result<PointerInfo> {
        match self.offset_unit {
            OffsetUnit::Bytes => Ok(self.clone()),
            OffsetUnit::Records => {
                let rb =
                    record_bytes.ok_or_else(|| OdlError::NeedsRecordBytes(name.to_string()))?;
                let offset =
                    (self.offset - 1)
                        .checked_mul(rb)
                        .ok_or_else(|| OdlError::BadPointer {
                            name: name.to_string(),
                            detail: "byte offset overflows".into(),
                        })?;
                Ok(PointerInfo {
                    target_file: self.target_file.clone(),
                    offset,
                    offset_unit: OffsetUnit::Bytes,
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Bare(String),
    Quoted(String),
    SingleQuoted(String),
    Unit(String),
    Equals,
    Open(u8),
    Close(u8),
    Comma,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
}

fn is_special(b: u8) -> bool {
    matches!(
        b,
        b'=' | b'(' | b')' | b'{' | b'}' | b',' | b'<' | b'>' | b'"' | b'\''
    )
}

fn decode_text(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_string(),
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

impl<'a> Lexer<'a> {
    fn malformed(&self, detail: impl Into<String>) -> OdlError {
        OdlError::MalformedValue {
            line: self.line,
            detail: detail.into(),
        }
    }

    fn skip_trivia(&mut self) -> Result<()> {
        while self.pos < self.src.len() {
            let b = self.src[self.pos];
            match b {
                b'\n' => {
                    self.line += 1;
                    self.pos += 1;
                }
                b' ' | b'\t' | b'\r' | 0x0c => self.pos += 1,
                b'/' if self.src.get(self.pos + 1) == Some(&b'*') => {
                    let start_line = self.line;
                    self.pos += 2;
                    loop {
                        match self.src.get(self.pos) {
                            None => {
                                return Err(OdlError::MalformedValue {
                                    line: start_line,
                                    detail: "unterminated comment".into(),
                                })
                            }
                            Some(b'*') if self.src.get(self.pos + 1) == Some(&b'/') => {
                                self.pos += 2;
                                break;
                            }
                            Some(b'\n') => {
                                self.line += 1;
                                self.pos += 1;
                            }
                            Some(_) => self.pos += 1,
                        }
                    }
                }
                _ => break,
            }
        }
        Ok(())
    }

    /// Reads up to the closing delimiter, counting newlines. CRLF inside
    /// quotes is normalized to LF.
    fn delimited(&mut self, close: u8, what: &str) -> Result<Vec<u8>> {
        let start_line = self.line;
        self.pos += 1;
        let mut out = Vec::new();
        loop {
            match self.src.get(self.pos) {
                None => {
                    return Err(OdlError::MalformedValue {
                        line: start_line,
                        detail: format!("unterminated {what}"),
                    })
                }
                Some(&b) if b == close => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(b'\r') if self.src.get(self.pos + 1) == Some(&b'\n') => self.pos += 1,
                Some(&b) => {
                    if b == b'\n' {
                        self.line += 1;
                    }
                    out.push(b);
                    self.pos += 1;
                }
            }
        }
    }

    fn next(&mut self) -> Result<Option<(Tok, usize)>> {
        self.skip_trivia()?;
        let Some(&b) = self.src.get(self.pos) else {
            return Ok(None);
        };
        let line = self.line;
        let tok = match b {
            b'=' => {
                self.pos += 1;
                Tok::Equals
            }
            b'(' | b'{' => {
                self.pos += 1;
                Tok::Open(b)
            }
            b')' | b'}' => {
                self.pos += 1;
                Tok::Close(b)
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b'"' => Tok::Quoted(decode_text(&self.delimited(b'"', "quoted string")?)),
            b'\'' => Tok::SingleQuoted(decode_text(&self.delimited(b'\'', "quoted symbol")?)),
            b'<' => {
                let raw = self.delimited(b'>', "unit")?;
                if raw.iter().any(|&c| c >= 0x80 || c == b'\n') {
                    return Err(OdlError::MalformedValue {
                        line,
                        detail: "invalid unit".into(),
                    });
                }
                Tok::Unit(decode_text(&raw))
            }
            b'>' => return Err(self.malformed("stray '>'")),
            _ => {
                let start = self.pos;
                while let Some(&c) = self.src.get(self.pos) {
                    if c.is_ascii_whitespace() || c == 0x0c || is_special(c) {
                        break;
                    }
                    if c == b'/' && self.src.get(self.pos + 1) == Some(&b'*') {
                        break;
                    }
                    if c >= 0x80 {
                        return Err(self.malformed(format!(
                            "non-ASCII byte 0x{c:02X} outside a quoted string"
                        )));
                    }
                    if c < 0x20 || c == 0x7f {
                        return Err(self.malformed(format!("control byte 0x{c:02X}")));
                    }
                    self.pos += 1;
                }
                // ASCII-only by the checks above.
                Tok::Bare(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
            }
        };
        Ok(Some((tok, line)))
    }
}

// ---------------------------------------------------------------------------
// token classification

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == ':')
}

fn is_keyword(s: &str) -> bool {
    is_identifier(s.strip_prefix('^').unwrap_or(s))
}

/// Unquoted symbol values: identifier-like, also allowing `.-/+`
/// (e.g. `N/A`, `CE4-PCAM`).
fn is_bare_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || "_:.-/+".contains(c))
}

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn is_integer_text(s: &str) -> bool {
    all_digits(s.strip_prefix(['+', '-']).unwrap_or(s))
}

fn is_real_text(s: &str) -> bool {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let mantissa_ok = match mantissa.split_once('.') {
        Some((int, frac)) => {
            (all_digits(int) || int.is_empty())
                && (all_digits(frac) || frac.is_empty())
                && !(int.is_empty() && frac.is_empty())
        }
        None => all_digits(mantissa),
    };
    let has_dot = mantissa.contains('.');
    match exponent {
        Some(e) => mantissa_ok && is_integer_text(e),
        None => mantissa_ok && has_dot,
    }
}

fn parse_radix(s: &str) -> Option<std::result::Result<i64, ()>> {
    let (sign, body) = match s.as_bytes().first() {
        Some(b'-') => (-1i128, &s[1..]),
        Some(b'+') => (1, &s[1..]),
        _ => (1, s),
    };
    let body = body.strip_suffix('#')?;
    let (base, digits) = body.split_once('#')?;
    if !all_digits(base) {
        return None;
    }
    let base: u32 = base.parse().ok()?;
    if !(2..=16).contains(&base) || digits.is_empty() {
        return Some(Err(()));
    }
    let magnitude = match u64::from_str_radix(digits, base) {
        Ok(m) => m as i128,
        Err(_) => return Some(Err(())),
    };
    Some(i64::try_from(sign * magnitude).map_err(|_| ()))
}

fn is_time(s: &str) -> bool {
    let s = s.strip_suffix('Z').unwrap_or(s);
    let (hms, frac) = match s.split_once('.') {
        Some((a, b)) => (a, Some(b)),
        None => (s, None),
    };
    if let Some(f) = frac {
        if !all_digits(f) {
            return false;
        }
    }
    let parts: Vec<&str> = hms.split(':').collect();
    let ok_len = if frac.is_some() {
        parts.len() == 3
    } else {
        parts.len() == 2 || parts.len() == 3
    };
    ok_len && parts.iter().all(|p| p.len() == 2 && all_digits(p))
}

fn is_date(s: &str) -> bool {
    let parts: Vec<&str> = s.split('-').collect();
    match parts.as_slice() {
        [y, m, d] => {
            y.len() == 4 && m.len() == 2 && d.len() == 2 && parts.iter().all(|p| all_digits(p))
        }
        [y, doy] => y.len() == 4 && doy.len() == 3 && all_digits(y) && all_digits(doy),
        _ => false,
    }
}

fn is_datetime(s: &str) -> bool {
    match s.split_once('T') {
        Some((date, time)) => is_date(date) && is_time(time),
        None => is_date(s) || is_time(s),
    }
}

fn classify_bare(s: &str, line: usize) -> Result<OdlValue> {
    let malformed = |detail: String| OdlError::MalformedValue { line, detail };
    if is_integer_text(s) {
        return s
            .parse::<i64>()
            .map(OdlValue::Integer)
            .map_err(|_| malformed(format!("integer out of 64-bit range: {s}")));
    }
    if let Some(r) = parse_radix(s) {
        return r
            .map(OdlValue::Integer)
            .map_err(|_| malformed(format!("bad based integer: {s}")));
    }
    if is_real_text(s) {
        return s
            .parse::<f64>()
            .map(OdlValue::real)
            .map_err(|_| malformed(format!("bad real: {s}")));
    }
    if is_datetime(s) {
        return Ok(OdlValue::DateTime(s.to_string()));
    }
    if is_bare_symbol(s) {
        return Ok(OdlValue::Symbol(s.to_string()));
    }
    Err(malformed(format!("unrecognized token {s:?}")))
}

// ---------------------------------------------------------------------------
// parser

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<Option<(Tok, usize)>>,
}

impl<'a> Parser<'a> {
    fn next(&mut self) -> Result<Option<(Tok, usize)>> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next(),
        }
    }

    fn peek(&mut self) -> Result<Option<&Tok>> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next()?);
        }
        Ok(self.peeked.as_ref().unwrap().as_ref().map(|(t, _)| t))
    }

    fn block(&mut self, open: Option<(BlockKind, &str, usize)>) -> Result<OdlLabel> {
        let mut label = OdlLabel::default();
        loop {
            let Some((tok, line)) = self.next()? else {
                return Err(match open {
                    Some((kind, name, at)) => OdlError::UnbalancedBlock {
                        line: at,
                        detail: format!("{} = {name} is never closed", kind.opener()),
                    },
                    None => OdlError::MissingEnd,
                });
            };
            let word = match tok {
                Tok::Bare(w) => w,
                other => {
                    return Err(OdlError::MalformedValue {
                        line,
                        detail: format!("expected a keyword, found {other:?}"),
                    })
                }
            };
            let upper = word.to_ascii_uppercase();
            match upper.as_str() {
                "END" => {
                    return match open {
                        None => Ok(label),
                        Some((kind, name, _)) => Err(OdlError::UnbalancedBlock {
                            line,
                            detail: format!("END inside {} = {name}", kind.opener()),
                        }),
                    };
                }
                "END_OBJECT" | "END_GROUP" => {
                    let kind = if upper == "END_OBJECT" {
                        BlockKind::Object
                    } else {
                        BlockKind::Group
                    };
                    let Some((open_kind, open_name, _)) = open else {
                        return Err(OdlError::UnbalancedBlock {
                            line,
                            detail: format!("{upper} without an opener"),
                        });
                    };
                    if kind != open_kind {
                        return Err(OdlError::UnbalancedBlock {
                            line,
                            detail: format!("{upper} closes {} = {open_name}", open_kind.opener()),
                        });
                    }
                    if self.peek()? == Some(&Tok::Equals) {
                        self.next()?;
                        let name = self.block_name()?;
                        if !name.eq_ignore_ascii_case(open_name) {
                            return Err(OdlError::UnbalancedBlock {
                                line,
                                detail: format!("{upper} = {name} closes {open_name}"),
                            });
                        }
                    }
                    return Ok(label);
                }
                _ => {}
            }
            self.expect_equals(line, &word)?;
            match upper.as_str() {
                "OBJECT" | "BEGIN_OBJECT" | "GROUP" | "BEGIN_GROUP" => {
                    let kind = if upper.ends_with("OBJECT") {
                        BlockKind::Object
                    } else {
                        BlockKind::Group
                    };
                    let name = self.block_name()?;
                    let body = self.block(Some((kind, &name, line)))?;
                    label.children.push(OdlBlock { kind, name, body });
                }
                _ => {
                    if !is_keyword(&word) {
                        return Err(OdlError::MalformedValue {
                            line,
                            detail: format!("invalid keyword {word:?}"),
                        });
                    }
                    let value = self.value(0)?;
                    label.statements.push(OdlStatement::new(word, value));
                }
            }
        }
    }

    fn expect_equals(&mut self, line: usize, keyword: &str) -> Result<()> {
        match self.next()? {
            Some((Tok::Equals, _)) => Ok(()),
            _ => Err(OdlError::MalformedValue {
                line,
                detail: format!("expected '=' after {keyword}"),
            }),
        }
    }

    fn block_name(&mut self) -> Result<String> {
        match self.next()? {
            Some((Tok::Bare(name), _)) if is_identifier(&name) => Ok(name),
            Some((tok, line)) => Err(OdlError::MalformedValue {
                line,
                detail: format!("invalid block name {tok:?}"),
            }),
            None => Err(OdlError::MissingEnd),
        }
    }

    fn value(&mut self, depth: usize) -> Result<OdlValue> {
        let Some((tok, line)) = self.next()? else {
            return Err(OdlError::MissingEnd);
        };
        match tok {
            Tok::Quoted(s) => Ok(OdlValue::Text(s)),
            Tok::SingleQuoted(s) => Ok(OdlValue::Symbol(s)),
            Tok::Bare(s) => {
                let v = classify_bare(&s, line)?;
                if matches!(self.peek()?, Some(Tok::Unit(_))) {
                    let Some((Tok::Unit(unit), _)) = self.next()? else {
                        unreachable!()
                    };
                    return match v.as_f64() {
                        Some(value) => Ok(OdlValue::Real {
                            value,
                            unit: Some(unit),
                        }),
                        None => Err(OdlError::MalformedValue {
                            line,
                            detail: format!("unit <{unit}> on a non-numeric value"),
                        }),
                    };
                }
                Ok(v)
            }
            Tok::Open(open) => {
                if depth >= 2 {
                    return Err(OdlError::MalformedValue {
                        line,
                        detail: "sequences nest at most one level".into(),
                    });
                }
                let close = if open == b'(' { b')' } else { b'}' };
                let mut items = Vec::new();
                if self.peek()? == Some(&Tok::Close(close)) {
                    self.next()?;
                } else {
                    loop {
                        items.push(self.value(depth + 1)?);
                        match self.next()? {
                            Some((Tok::Comma, _)) => continue,
                            Some((Tok::Close(c), _)) if c == close => break,
                            Some((t, l)) => {
                                return Err(OdlError::MalformedValue {
                                    line: l,
                                    detail: format!(
                                        "expected ',' or '{}', found {t:?}",
                                        close as char
                                    ),
                                })
                            }
                            None => return Err(OdlError::MissingEnd),
                        }
                    }
                }
                // A unit after the closer, as in `(1.0, 2.0) <NM>`, applies
                // to every element that has none of its own.
                if matches!(self.peek()?, Some(Tok::Unit(_))) {
                    let Some((Tok::Unit(unit), line)) = self.next()? else {
                        unreachable!()
                    };
                    for item in &mut items {
                        distribute_unit(item, &unit, line)?;
                    }
                }
                Ok(if open == b'(' {
                    OdlValue::Sequence(items)
                } else {
                    OdlValue::Set(items)
                })
            }
            other => Err(OdlError::MalformedValue {
                line,
                detail: format!("unexpected {other:?}"),
            }),
        }
    }
}

fn distribute_unit(item: &mut OdlValue, unit: &str, line: usize) -> Result<()> {
    match item {
        OdlValue::Integer(i) => {
            *item = OdlValue::Real {
                value: *i as f64,
                unit: Some(unit.to_string()),
            };
        }
        OdlValue::Real { unit: u @ None, .. } => *u = Some(unit.to_string()),
        OdlValue::Real { .. } => {}
        OdlValue::Sequence(items) | OdlValue::Set(items) => {
            for inner in items {
                distribute_unit(inner, unit, line)?;
            }
        }
        _ => {
            return Err(OdlError::MalformedValue {
                line,
                detail: format!("unit <{unit}> on a non-numeric value"),
            })
        }
    }
    Ok(())
}

pub fn parse_odl(text: &str) -> Result<OdlLabel> {
    parse_odl_bytes(text.as_bytes())
}

/// Parses a label from raw bytes. Anything after the top-level `END` is
/// never inspected.
pub fn parse_odl_bytes(bytes: &[u8]) -> Result<OdlLabel> {
    let mut parser = Parser {
        lexer: Lexer {
            src: bytes,
            pos: 0,
            line: 1,
        },
        peeked: None,
    };
    parser.block(None)
}

// ---------------------------------------------------------------------------
// lookup

/// Resolves `["IMAGE", "LINES"]`-style paths; the first match in document
/// order wins.
pub fn lookup<'a, S: AsRef<str>>(label: &'a OdlLabel, path: &[S]) -> Result<&'a OdlValue> {
    fn walk<'a, S: AsRef<str>>(label: &'a OdlLabel, path: &[S]) -> Option<&'a OdlValue> {
        match path {
            [] => None,
            [keyword] => label.get(keyword.as_ref()),
            [block, rest @ ..] => label
                .children
                .iter()
                .filter(|c| c.name.eq_ignore_ascii_case(block.as_ref()))
                .find_map(|c| walk(&c.body, rest)),
        }
    }
    walk(label, path).ok_or_else(|| {
        OdlError::NotFound(
            path.iter()
                .map(|p| p.as_ref())
                .collect::<Vec<_>>()
                .join("/"),
        )
    })
}

/// Reads a top-level `^NAME` pointer without resolving record offsets.
pub fn pointer_info(label: &OdlLabel, name: &str) -> Result<PointerInfo> {
    let keyword = format!("^{name}");
    let value = label
        .get(&keyword)
        .ok_or_else(|| OdlError::NotFound(keyword.clone()))?;
    let bad = |detail: &str| OdlError::BadPointer {
        name: name.to_string(),
        detail: detail.to_string(),
    };
    let offset_of = |v: &OdlValue| -> Result<(u64, OffsetUnit)> {
        let n = v.as_i64().ok_or_else(|| bad("offset is not an integer"))?;
        if n < 1 {
            return Err(bad("offsets are 1-based"));
        }
        match v.unit() {
            None => Ok((n as u64, OffsetUnit::Records)),
            Some(u) if u.eq_ignore_ascii_case("BYTES") => Ok((n as u64 - 1, OffsetUnit::Bytes)),
            Some(u) => Err(bad(&format!("unsupported offset unit <{u}>"))),
        }
    };
    match value {
        OdlValue::Text(file) | OdlValue::Symbol(file) => Ok(PointerInfo {
            target_file: Some(file.clone()),
            offset: 0,
            offset_unit: OffsetUnit::Bytes,
        }),
        OdlValue::Integer(_) | OdlValue::Real { .. } => {
            let (offset, offset_unit) = offset_of(value)?;
            Ok(PointerInfo {
                target_file: None,
                offset,
                offset_unit,
            })
        }
        OdlValue::Sequence(items) => match items.as_slice() {
            [file, off] => {
                let file = file
                    .as_str()
                    .ok_or_else(|| bad("file name is not a string"))?;
                let (offset, offset_unit) = offset_of(off)?;
                Ok(PointerInfo {
                    target_file: Some(file.to_string()),
                    offset,
                    offset_unit,
                })
            }
            [file] => Ok(PointerInfo {
                target_file: Some(
                    file.as_str()
                        .ok_or_else(|| bad("file name is not a string"))?
                        .to_string(),
                ),
                offset: 0,
                offset_unit: OffsetUnit::Bytes,
            }),
            _ => Err(bad("expected (file, offset)")),
        },
        _ => Err(bad("unsupported pointer form")),
    }
}

/// Resolves `^NAME` to a byte offset. Record offsets need `record_bytes`.
pub fn pointer_target(
    label: &OdlLabel,
    name: &str,
    record_bytes: Option<u64>,
) -> Result<PointerInfo> {
    pointer_info(label, name)?.resolve(name, record_bytes)
}

// ---------------------------------------------------------------------------
// output

fn format_real(value: f64) -> String {
    // Debug keeps a '.' or an exponent, so the text re-parses as a real.
    format!("{value:?}")
}

fn write_value(out: &mut String, value: &OdlValue) {
    match value {
        OdlValue::Integer(i) => write!(out, "{i}").unwrap(),
        OdlValue::Real { value, unit } => {
            out.push_str(&format_real(*value));
            if let Some(u) = unit {
                write!(out, " <{u}>").unwrap();
            }
        }
        OdlValue::Text(s) => write!(out, "\"{s}\"").unwrap(),
        OdlValue::Symbol(s) => {
            if is_bare_symbol(s) {
                out.push_str(s)
            } else {
                write!(out, "'{s}'").unwrap()
            }
        }
        OdlValue::DateTime(s) => out.push_str(s),
        OdlValue::Sequence(items) | OdlValue::Set(items) => {
            let (open, close) = if matches!(value, OdlValue::Sequence(_)) {
                ('(', ')')
            } else {
                ('{', '}')
            };
            out.push(open);
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, item);
            }
            out.push(close);
        }
    }
}

fn write_block(out: &mut String, label: &OdlLabel, depth: usize) {
    let indent = "  ".repeat(depth);
    for stmt in &label.statements {
        write!(out, "{indent}{} = ", stmt.keyword).unwrap();
        write_value(out, &stmt.value);
        out.push('\n');
    }
    for child in &label.children {
        writeln!(out, "{indent}{} = {}", child.kind.opener(), child.name).unwrap();
        write_block(out, &child.body, depth + 1);
        writeln!(out, "{indent}{} = {}", child.kind.closer(), child.name).unwrap();
    }
}

/// Canonical text: one statement per line, two spaces per nesting level,
/// statements before child blocks, LF endings.
pub fn serialize_odl(label: &OdlLabel) -> String {
    let mut out = String::new();
    write_block(&mut out, label, 0);
    out.push_str("END\n");
    out
}

pub fn value_to_json(value: &OdlValue) -> Value {
    match value {
        OdlValue::Integer(i) => json!(i),
        OdlValue::Real { value, unit: None } => json!(value),
        OdlValue::Real {
            value,
            unit: Some(u),
        } => json!({ "value": value, "unit": u }),
        OdlValue::Text(s) | OdlValue::Symbol(s) | OdlValue::DateTime(s) => json!(s),
        OdlValue::Sequence(items) | OdlValue::Set(items) => {
            Value::Array(items.iter().map(value_to_json).collect())
        }
    }
}

/// JSON tree: keywords map to values, child blocks nest under their names,
/// values with units render as `{"value": v, "unit": u}`.
pub fn label_to_json(label: &OdlLabel) -> Value {
    let entries = label
        .statements
        .iter()
        .map(|s| (s.keyword.as_str(), value_to_json(&s.value)))
        .chain(
            label
                .children
                .iter()
                .map(|c| (c.name.as_str(), label_to_json(&c.body))),
        );
    // Repeated keywords or blocks collapse into one array in document order.
    let mut grouped: Map<String, Value> = Map::new();
    let mut counts = std::collections::HashMap::new();
    let entries: Vec<_> = entries.collect();
    for (key, _) in &entries {
        *counts.entry(*key).or_insert(0usize) += 1;
    }
    for (key, value) in entries {
        if counts[key] > 1 {
            match grouped
                .entry(key)
                .or_insert_with(|| Value::Array(Vec::new()))
            {
                Value::Array(items) => items.push(value),
                _ => unreachable!(),
            }
        } else {
            grouped.insert(key.to_string(), value);
        }
    }
    Value::Object(grouped)
}
