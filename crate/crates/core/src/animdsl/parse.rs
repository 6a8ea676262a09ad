use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::ast::{Easing, Entry, Offset, Property, Script, Sign, TimelineParams, Track};

/// Byte range into the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax { expected: Vec<String>, found: String },
    UnknownProperty(String),
    UnknownEasing(String),
    NonPositiveDuration,
    NegativeDelay,
    InvalidTrackValue { property: String, value: String },
    DuplicateTrack(String),
    DuplicateKey(String),
    MissingDuration,
    BadOffset(String),
    UnterminatedString,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax { expected, found } => write!(f, "expected one of {}, found {found}", expected.join(" ")),
            ParseErrorKind::UnknownProperty(p) => write!(f, "unknown property `{p}`"),
            ParseErrorKind::UnknownEasing(e) => write!(f, "unknown easing `{e}`"),
            ParseErrorKind::NonPositiveDuration => f.write_str("duration must be > 0"),
            ParseErrorKind::NegativeDelay => f.write_str("delay must be >= 0"),
            ParseErrorKind::InvalidTrackValue { property, value } => write!(f, "value {value} is not allowed for `{property}`"),
            ParseErrorKind::DuplicateTrack(p) => write!(f, "property `{p}` given twice"),
            ParseErrorKind::DuplicateKey(k) => write!(f, "`{k}` given twice"),
            ParseErrorKind::MissingDuration => f.write_str("entry has no `duration`"),
            ParseErrorKind::BadOffset(s) => write!(f, "bad offset \"{s}\" (want \"<ms>\", \"+=<ms>\" or \"-=<ms>\")"),
            ParseErrorKind::UnterminatedString => f.write_str("unterminated string"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: Span,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Punct(char),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexed {
    tok: Tok,
    span: Span,
}

fn position(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn error(src: &str, kind: ParseErrorKind, span: Span) -> ParseError {
    let (line, col) = position(src, span.start);
    ParseError { kind, span, line, col }
}

fn lex(src: &str) -> Result<Vec<Lexed>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Lexed { tok: Tok::Ident(src[start..i].into()), span: Span { start, end: i } });
        } else if c.is_ascii_digit() || (c == b'-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push(Lexed { tok: Tok::Number(src[start..i].into()), span: Span { start, end: i } });
        } else if c == b'"' {
            let start = i;
            i += 1;
            let mut s = String::new();
            loop {
                let Some(ch) = src[i..].chars().next() else {
                    return Err(error(src, ParseErrorKind::UnterminatedString, Span { start, end: src.len() }));
                };
                match ch {
                    '"' => {
                        i += 1;
                        break;
                    }
                    '\\' => {
                        let next = src[i + 1..].chars().next();
                        match next {
                            Some(e @ ('"' | '\\')) => {
                                s.push(e);
                                i += 2;
                            }
                            Some('n') => {
                                s.push('\n');
                                i += 2;
                            }
                            _ => {
                                s.push('\\');
                                i += 1;
                            }
                        }
                    }
                    '\n' => return Err(error(src, ParseErrorKind::UnterminatedString, Span { start, end: i })),
                    _ => {
                        s.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
            out.push(Lexed { tok: Tok::Str(s), span: Span { start, end: i } });
        } else if b"(){}[],;:=".contains(&c) {
            out.push(Lexed { tok: Tok::Punct(c as char), span: Span { start: i, end: i + 1 } });
            i += 1;
        } else {
            let ch = src[i..].chars().next().expect("in bounds");
            let span = Span { start: i, end: i + ch.len_utf8() };
            return Err(error(src, ParseErrorKind::Syntax { expected: vec!["token".into()], found: format!("`{ch}`") }, span));
        }
    }
    out.push(Lexed { tok: Tok::Eof, span: Span { start: src.len(), end: src.len() } });
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Lexed>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Lexed {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> &Lexed {
        let i = self.pos;
        if !matches!(self.toks[i].tok, Tok::Eof) {
            self.pos += 1;
        }
        &self.toks[i]
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        error(
            self.src,
            ParseErrorKind::Syntax { expected: expected.iter().map(|s| s.to_string()).collect(), found: t.tok.describe() },
            t.span,
        )
    }

    fn punct(&mut self, c: char) -> Result<Span, ParseError> {
        if self.peek().tok == Tok::Punct(c) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&[&format!("`{c}`")]))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<Span, ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if s == kw => Ok(self.bump().span),
            _ => Err(self.unexpected(&[&format!("`{kw}`")])),
        }
    }

    fn boolean(&mut self) -> Result<bool, ParseError> {
        let v = match &self.peek().tok {
            Tok::Ident(s) if s == "true" => true,
            Tok::Ident(s) if s == "false" => false,
            _ => return Err(self.unexpected(&["`true`", "`false`"])),
        };
        self.bump();
        Ok(v)
    }

    fn number(&mut self) -> Result<(f64, Span), ParseError> {
        match &self.peek().tok {
            Tok::Number(n) => {
                let v: f64 = n.parse().expect("lexer only emits valid decimals");
                let span = self.bump().span;
                Ok((v, span))
            }
            _ => Err(self.unexpected(&["number"])),
        }
    }

    fn string(&mut self) -> Result<(String, Span), ParseError> {
        match &self.peek().tok {
            Tok::Str(s) => {
                let s = s.clone();
                Ok((s, self.bump().span))
            }
            _ => Err(self.unexpected(&["string"])),
        }
    }

    fn err(&self, kind: ParseErrorKind, span: Span) -> ParseError {
        error(self.src, kind, span)
    }

    fn script(&mut self) -> Result<Script, ParseError> {
        self.keyword("timeline")?;
        self.punct('(')?;
        self.keyword("loop")?;
        self.punct('=')?;
        let loop_ = self.boolean()?;
        self.punct(',')?;
        self.keyword("autoplay")?;
        self.punct('=')?;
        let autoplay = self.boolean()?;
        self.punct(')')?;
        self.punct('{')?;
        let mut entries = Vec::new();
        loop {
            match &self.peek().tok {
                Tok::Punct('}') => {
                    self.bump();
                    break;
                }
                Tok::Ident(s) if s == "add" => entries.push(self.entry()?),
                _ => return Err(self.unexpected(&["`add`", "`}`"])),
            }
        }
        if !matches!(self.peek().tok, Tok::Eof) {
            return Err(self.unexpected(&["end of input"]));
        }
        Ok(Script { params: TimelineParams { loop_, autoplay }, entries })
    }

    fn entry(&mut self) -> Result<Entry, ParseError> {
        let add_span = self.keyword("add")?;
        self.punct('(')?;
        let (target, _) = self.string()?;
        self.punct(',')?;
        self.punct('{')?;
        let mut tracks = BTreeMap::new();
        loop {
            let (prop, span) = match &self.peek().tok {
                Tok::Ident(name) => {
                    let name = name.clone();
                    let span = self.bump().span;
                    let prop: Property = name.parse().map_err(|_| self.err(ParseErrorKind::UnknownProperty(name.clone()), span))?;
                    (prop, span)
                }
                _ => return Err(self.unexpected(&["property"])),
            };
            self.punct(':')?;
            self.punct('[')?;
            let (from, from_span) = self.number()?;
            self.punct(',')?;
            let (to, to_span) = self.number()?;
            self.punct(']')?;
            for (v, s) in [(from, from_span), (to, to_span)] {
                if !prop.accepts(v) {
                    let value = self.src[s.start..s.end].to_string();
                    return Err(self.err(ParseErrorKind::InvalidTrackValue { property: prop.name().into(), value }, s));
                }
            }
            if tracks.insert(prop, Track { from, to }).is_some() {
                return Err(self.err(ParseErrorKind::DuplicateTrack(prop.name().into()), span));
            }
            match self.peek().tok {
                Tok::Punct(',') => {
                    self.bump();
                }
                Tok::Punct('}') => {
                    self.bump();
                    break;
                }
                _ => return Err(self.unexpected(&["`,`", "`}`"])),
            }
        }

        let mut duration = None;
        let mut delay = None;
        let mut easing = None;
        let mut offset = None;
        loop {
            match self.peek().tok {
                Tok::Punct(',') => {
                    self.bump();
                }
                Tok::Punct(')') => {
                    self.bump();
                    break;
                }
                _ => return Err(self.unexpected(&["`,`", "`)`"])),
            }
            let (key, key_span) = match &self.peek().tok {
                Tok::Ident(k) if ["duration", "delay", "easing", "offset"].contains(&k.as_str()) => {
                    let k = k.clone();
                    (k, self.bump().span)
                }
                _ => return Err(self.unexpected(&["`duration`", "`delay`", "`easing`", "`offset`"])),
            };
            self.punct('=')?;
            let dup = match key.as_str() {
                "duration" => {
                    let (v, s) = self.number()?;
                    if v <= 0.0 {
                        return Err(self.err(ParseErrorKind::NonPositiveDuration, s));
                    }
                    duration.replace(v).is_some()
                }
                "delay" => {
                    let (v, s) = self.number()?;
                    if v < 0.0 {
                        return Err(self.err(ParseErrorKind::NegativeDelay, s));
                    }
                    delay.replace(v).is_some()
                }
                "easing" => {
                    let (name, s) = self.string()?;
                    let e: Easing = name.parse().map_err(|_| self.err(ParseErrorKind::UnknownEasing(name.clone()), s))?;
                    easing.replace(e).is_some()
                }
                _ => {
                    let (text, s) = self.string()?;
                    let o = parse_offset(&text).ok_or_else(|| self.err(ParseErrorKind::BadOffset(text.clone()), s))?;
                    offset.replace(o).is_some()
                }
            };
            if dup {
                return Err(self.err(ParseErrorKind::DuplicateKey(key), key_span));
            }
        }
        self.punct(';')?;
        let duration = duration.ok_or_else(|| self.err(ParseErrorKind::MissingDuration, add_span))?;
        Ok(Entry {
            target,
            tracks,
            duration,
            delay: delay.unwrap_or(0.0),
            easing: easing.unwrap_or_default(),
            offset: offset.unwrap_or_default(),
        })
    }
}

fn parse_offset(text: &str) -> Option<Offset> {
    let digits = |s: &str| (!s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())).then(|| s.parse::<u64>().ok()).flatten();
    if let Some(rest) = text.strip_prefix("+=") {
        digits(rest).map(|ms| Offset::Relative(Sign::Plus, ms))
    } else if let Some(rest) = text.strip_prefix("-=") {
        digits(rest).map(|ms| Offset::Relative(Sign::Minus, ms))
    } else {
        digits(text).map(Offset::Absolute)
    }
}

pub fn parse(text: &str) -> Result<Script, ParseError> {
    let toks = lex(text)?;
    Parser { src: text, toks, pos: 0 }.script()
}
