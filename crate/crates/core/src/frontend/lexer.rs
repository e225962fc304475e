//! Tokenizer with indentation tracking.
//!
//! Produces NEWLINE / INDENT / DEDENT tokens the way the reference
//! tokenizer does: no NEWLINE inside brackets, blank and comment-only lines
//! are skipped, backslash continues a line.

use super::ast::Span;
use super::SyntaxFailure;

#[derive(Debug, Clone, PartialEq)]
pub enum NumLit {
    Int(String),
    Float(String),
    Imag(String),
}

/// Raw piece of an f-string body before the embedded expressions are parsed.
#[derive(Debug, Clone, PartialEq)]
pub enum RawFPart {
    Literal(String),
    Expr {
        source: String,
        span: Span,
        conversion: Option<char>,
        spec: Vec<RawFPart>,
        /// Text preceding `=` in `{x=}` (emitted as a literal prefix).
        debug_text: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrLit {
    Plain { value: String, bytes: bool },
    Formatted(Vec<RawFPart>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokKind {
    Name(String),
    Number(NumLit),
    Str(StrLit),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    EndMarker,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokKind,
    pub span: Span,
}

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@", "&", "|", "^", "~", "<", ">", "(", ")", "[", "]", "{", "}",
    ",", ":", ".", ";", "=",
];

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
    indents: Vec<u32>,
    depth: usize,
    open_brackets: Vec<(char, Span)>,
    unclosed: Option<SyntaxFailure>,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, SyntaxFailure> {
    let (tokens, unclosed) = tokenize_lenient(source)?;
    match unclosed {
        Some(e) => Err(e),
        None => Ok(tokens),
    }
}

/// Like [`tokenize`], but an unclosed bracket at end of input is returned
/// alongside a complete token stream so the parser can report an earlier
/// error first.
pub fn tokenize_lenient(source: &str) -> Result<(Vec<Token>, Option<SyntaxFailure>), SyntaxFailure> {
    let mut lx = Lexer {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        tokens: Vec::new(),
        indents: vec![0],
        depth: 0,
        open_brackets: Vec::new(),
        unclosed: None,
    };
    lx.run()?;
    Ok((lx.tokens, lx.unclosed))
}

fn fail<T>(message: impl Into<String>, span: Span) -> Result<T, SyntaxFailure> {
    Err(SyntaxFailure { message: message.into(), span })
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> Span {
        Span::new(self.line, self.col)
    }

    fn push(&mut self, kind: TokKind, span: Span) {
        self.tokens.push(Token { kind, span });
    }

    fn last_is_newline_or_start(&self) -> bool {
        matches!(
            self.tokens.last().map(|t| &t.kind),
            None | Some(TokKind::Newline) | Some(TokKind::Indent) | Some(TokKind::Dedent)
        )
    }

    fn run(&mut self) -> Result<(), SyntaxFailure> {
        let mut at_line_start = true;
        loop {
            if at_line_start && self.depth == 0 {
                at_line_start = false;
                if self.handle_indentation()? {
                    at_line_start = true;
                    continue;
                }
            }
            let Some(c) = self.peek() else { break };
            match c {
                '\n' => {
                    let span = self.here();
                    self.bump();
                    if self.depth == 0 {
                        if !self.last_is_newline_or_start() {
                            self.push(TokKind::Newline, span);
                        }
                        at_line_start = true;
                    }
                }
                '\r' => {
                    self.bump();
                }
                ' ' | '\t' | '\x0c' => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '\\' => {
                    let span = self.here();
                    self.bump();
                    if self.peek() == Some('\r') {
                        self.bump();
                    }
                    match self.peek() {
                        Some('\n') => {
                            self.bump();
                        }
                        None => return fail("unexpected EOF after line continuation", span),
                        _ => return fail("unexpected character after line continuation character", span),
                    }
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) => {
                    self.number()?;
                }
                c if is_id_start(c) => {
                    if let Some((prefix_len, quote_follows)) = self.string_prefix() {
                        if quote_follows {
                            self.string(prefix_len)?;
                            continue;
                        }
                    }
                    self.name();
                }
                '"' | '\'' => self.string(0)?,
                _ => self.operator()?,
            }
        }
        let end = self.here();
        if let Some(&(c, span)) = self.open_brackets.first() {
            self.unclosed = Some(SyntaxFailure { message: format!("'{c}' was never closed"), span });
        }
        if !self.last_is_newline_or_start() {
            self.push(TokKind::Newline, end);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(TokKind::Dedent, end);
        }
        self.push(TokKind::EndMarker, end);
        Ok(())
    }

    /// Returns true if the line was blank (consumed), false otherwise.
    fn handle_indentation(&mut self) -> Result<bool, SyntaxFailure> {
        let mut width: u32 = 0;
        let start = self.pos;
        while let Some(c) = self.peek() {
            match c {
                ' ' => width += 1,
                '\t' => width = (width / 8 + 1) * 8,
                '\x0c' => width = 0,
                _ => break,
            }
            self.bump();
        }
        match self.peek() {
            None => return Ok(false),
            Some('\n') | Some('#') | Some('\r') => {
                // blank or comment-only line
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                if self.peek() == Some('\n') {
                    self.bump();
                    return Ok(true);
                }
                return Ok(false);
            }
            Some('\\') if self.peek_at(1) == Some('\n') => {
                // continuation line starting with a backslash: treat as part of indentation
                let _ = start;
            }
            _ => {}
        }
        let span = self.here();
        let current = *self.indents.last().unwrap_or(&0);
        if width > current {
            if self.tokens.is_empty() {
                return fail("unexpected indent", span);
            }
            self.indents.push(width);
            self.push(TokKind::Indent, span);
        } else if width < current {
            while *self.indents.last().unwrap_or(&0) > width {
                self.indents.pop();
                self.push(TokKind::Dedent, span);
            }
            if *self.indents.last().unwrap_or(&0) != width {
                return fail("unindent does not match any outer indentation level", span);
            }
        }
        Ok(false)
    }

    fn name(&mut self) {
        let span = self.here();
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if is_id_continue(c) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        self.push(TokKind::Name(s), span);
    }

    /// Detects string prefixes such as `r`, `b`, `f`, `rb`, `Rf`.
    fn string_prefix(&self) -> Option<(usize, bool)> {
        let mut n = 0;
        while n < 3 {
            match self.peek_at(n) {
                Some(c) if "rRbBfFuU".contains(c) => n += 1,
                Some('"') | Some('\'') if n > 0 => {
                    let prefix: String = self.chars[self.pos..self.pos + n].iter().collect::<String>().to_lowercase();
                    let valid = matches!(prefix.as_str(), "r" | "b" | "f" | "u" | "rb" | "br" | "rf" | "fr");
                    return Some((n, valid));
                }
                _ => return None,
            }
        }
        None
    }

    fn number(&mut self) -> Result<(), SyntaxFailure> {
        let span = self.here();
        let mut s = String::new();
        let take_digits = |lx: &mut Lexer, s: &mut String, radix: u32| {
            while let Some(c) = lx.peek() {
                if c.is_digit(radix) || c == '_' {
                    if c != '_' {
                        s.push(c);
                    }
                    lx.bump();
                } else {
                    break;
                }
            }
        };
        if self.peek() == Some('0') && matches!(self.peek_at(1), Some('x' | 'X' | 'o' | 'O' | 'b' | 'B')) {
            let radix = match self.peek_at(1) {
                Some('x' | 'X') => 16,
                Some('o' | 'O') => 8,
                _ => 2,
            };
            self.bump();
            self.bump();
            let mut digits = String::new();
            take_digits(self, &mut digits, radix);
            if digits.is_empty() {
                return fail("invalid number literal", span);
            }
            let value = i128::from_str_radix(&digits, radix)
                .map(|v| v.to_string())
                .unwrap_or_else(|_| format!("0{}{}", radix, digits));
            self.check_number_end(span)?;
            self.push(TokKind::Number(NumLit::Int(value)), span);
            return Ok(());
        }
        take_digits(self, &mut s, 10);
        let mut is_float = false;
        if self.peek() == Some('.') && !matches!(self.peek_at(1), Some('.')) {
            is_float = true;
            s.push('.');
            self.bump();
            take_digits(self, &mut s, 10);
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let sign = self.peek_at(1);
            let digit_at = if matches!(sign, Some('+' | '-')) { 2 } else { 1 };
            if self.peek_at(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                is_float = true;
                s.push('e');
                self.bump();
                if matches!(sign, Some('+' | '-')) {
                    s.push(self.bump().unwrap_or('+'));
                }
                take_digits(self, &mut s, 10);
            }
        }
        if matches!(self.peek(), Some('j' | 'J')) {
            self.bump();
            self.check_number_end(span)?;
            self.push(TokKind::Number(NumLit::Imag(s)), span);
            return Ok(());
        }
        self.check_number_end(span)?;
        if !is_float && s.len() > 1 && s.starts_with('0') && s.chars().any(|c| c != '0') {
            return fail("leading zeros in decimal integer literals are not permitted", span);
        }
        let kind = if is_float { NumLit::Float(s) } else { NumLit::Int(s) };
        self.push(TokKind::Number(kind), span);
        Ok(())
    }

    fn check_number_end(&self, span: Span) -> Result<(), SyntaxFailure> {
        match self.peek() {
            Some(c) if is_id_continue(c) => fail("invalid decimal literal", span),
            _ => Ok(()),
        }
    }

    fn operator(&mut self) -> Result<(), SyntaxFailure> {
        let span = self.here();
        for op in OPERATORS {
            let n = op.chars().count();
            if self.pos + n <= self.chars.len() && self.chars[self.pos..self.pos + n].iter().copied().eq(op.chars()) {
                for _ in 0..n {
                    self.bump();
                }
                match *op {
                    "(" | "[" | "{" => {
                        self.depth += 1;
                        self.open_brackets.push((op.chars().next().unwrap_or('('), span));
                    }
                    ")" | "]" | "}" => {
                        if self.depth == 0 {
                            return fail(format!("unmatched '{op}'"), span);
                        }
                        self.depth -= 1;
                        self.open_brackets.pop();
                    }
                    _ => {}
                }
                self.push(TokKind::Op(op), span);
                return Ok(());
            }
        }
        let c = self.peek().unwrap_or('?');
        fail(format!("invalid character '{c}'"), span)
    }

    fn string(&mut self, prefix_len: usize) -> Result<(), SyntaxFailure> {
        let span = self.here();
        let prefix: String = (0..prefix_len).filter_map(|_| self.bump()).collect::<String>().to_lowercase();
        let raw = prefix.contains('r');
        let bytes = prefix.contains('b');
        let fstring = prefix.contains('f');
        let quote = self.bump().unwrap_or('"');
        let triple = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        if triple {
            self.bump();
            self.bump();
        }
        let body_start = self.here();
        let mut body = String::new();
        loop {
            let Some(c) = self.peek() else {
                return fail("unterminated string literal", span);
            };
            if c == '\\' {
                body.push(c);
                self.bump();
                match self.bump() {
                    Some(n) => body.push(n),
                    None => return fail("unterminated string literal", span),
                }
                continue;
            }
            if c == '\n' && !triple {
                return fail("unterminated string literal", span);
            }
            if c == quote {
                if !triple {
                    self.bump();
                    break;
                }
                if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                    self.bump();
                    self.bump();
                    self.bump();
                    break;
                }
            }
            body.push(c);
            self.bump();
        }
        let lit = if fstring {
            StrLit::Formatted(split_fstring(&body, raw, body_start)?)
        } else {
            let value = if raw { body } else { decode_escapes(&body) };
            StrLit::Plain { value, bytes }
        };
        self.push(TokKind::Str(lit), span);
        Ok(())
    }
}

fn is_id_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_id_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Decodes backslash escapes of a non-raw literal body.
pub fn decode_escapes(body: &str) -> String {
    let chars: Vec<char> = body.chars().collect();
    let mut out = String::with_capacity(body.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c != '\\' || i + 1 >= chars.len() {
            out.push(c);
            i += 1;
            continue;
        }
        let n = chars[i + 1];
        i += 2;
        match n {
            '\n' => {}
            '\\' => out.push('\\'),
            '\'' => out.push('\''),
            '"' => out.push('"'),
            'a' => out.push('\x07'),
            'b' => out.push('\x08'),
            'f' => out.push('\x0c'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            't' => out.push('\t'),
            'v' => out.push('\x0b'),
            'x' | 'u' | 'U' => {
                let len = match n {
                    'x' => 2,
                    'u' => 4,
                    _ => 8,
                };
                let hex: String = chars[i..(i + len).min(chars.len())].iter().collect();
                match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                    Some(ch) if hex.len() == len => {
                        out.push(ch);
                        i += len;
                    }
                    _ => {
                        out.push('\\');
                        out.push(n);
                    }
                }
            }
            '0'..='7' => {
                let mut v = n.to_digit(8).unwrap_or(0);
                let mut k = 0;
                while k < 2 && i < chars.len() && chars[i].is_digit(8) {
                    v = v * 8 + chars[i].to_digit(8).unwrap_or(0);
                    i += 1;
                    k += 1;
                }
                out.push(char::from_u32(v).unwrap_or('?'));
            }
            'N' if i < chars.len() && chars[i] == '{' => {
                // named unicode escapes are kept verbatim
                let mut name = String::from("\\N");
                while i < chars.len() {
                    name.push(chars[i]);
                    i += 1;
                    if chars[i - 1] == '}' {
                        break;
                    }
                }
                out.push_str(&name);
            }
            other => {
                out.push('\\');
                out.push(other);
            }
        }
    }
    out
}

fn offset_span(start: Span, chars: &[char], upto: usize) -> Span {
    let mut line = start.line;
    let mut col = start.col;
    for &c in &chars[..upto.min(chars.len())] {
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    Span::new(line, col)
}

/// Splits an f-string body into literal text and embedded expression sources.
fn split_fstring(body: &str, raw: bool, start: Span) -> Result<Vec<RawFPart>, SyntaxFailure> {
    let chars: Vec<char> = body.chars().collect();
    let mut i = 0;
    split_fstring_range(&chars, &mut i, raw, start, false)
}

fn split_fstring_range(
    chars: &[char],
    i: &mut usize,
    raw: bool,
    start: Span,
    in_spec: bool,
) -> Result<Vec<RawFPart>, SyntaxFailure> {
    let mut parts = Vec::new();
    let mut lit = String::new();
    let flush = |lit: &mut String, parts: &mut Vec<RawFPart>| {
        if !lit.is_empty() {
            let text = if raw { lit.clone() } else { decode_escapes(lit) };
            parts.push(RawFPart::Literal(text));
            lit.clear();
        }
    };
    while *i < chars.len() {
        let c = chars[*i];
        if c == '{' {
            if !in_spec && chars.get(*i + 1) == Some(&'{') {
                lit.push('{');
                *i += 2;
                continue;
            }
            flush(&mut lit, &mut parts);
            parts.push(fstring_field(chars, i, raw, start)?);
            continue;
        }
        if c == '}' {
            if in_spec {
                break;
            }
            if chars.get(*i + 1) == Some(&'}') {
                lit.push('}');
                *i += 2;
                continue;
            }
            return fail("f-string: single '}' is not allowed", offset_span(start, chars, *i));
        }
        if c == '\\' && !raw && *i + 1 < chars.len() {
            lit.push(c);
            lit.push(chars[*i + 1]);
            *i += 2;
            continue;
        }
        lit.push(c);
        *i += 1;
    }
    flush(&mut lit, &mut parts);
    Ok(parts)
}

/// Parses one `{expr[=][!c][:spec]}` field; `*i` points at the `{`.
fn fstring_field(chars: &[char], i: &mut usize, raw: bool, start: Span) -> Result<RawFPart, SyntaxFailure> {
    let open = *i;
    *i += 1;
    let expr_start = *i;
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let err_span = offset_span(start, chars, open);
    while *i < chars.len() {
        let c = chars[*i];
        if let Some(q) = quote {
            if c == q {
                quote = None;
            }
            *i += 1;
            continue;
        }
        match c {
            '\'' | '"' => quote = Some(c),
            '(' | '[' | '{' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            '}' if depth > 0 => depth -= 1,
            '}' | ':' if depth == 0 => break,
            '!' if depth == 0 && chars.get(*i + 1) != Some(&'=') => break,
            '=' if depth == 0 => {
                let prev = if *i > expr_start { chars[*i - 1] } else { ' ' };
                let next = chars.get(*i + 1).copied().unwrap_or(' ');
                if !"=!<>".contains(prev) && next != '=' {
                    let rest: String = chars[*i + 1..].iter().take_while(|c| c.is_whitespace()).collect();
                    let after = chars.get(*i + 1 + rest.chars().count()).copied();
                    if matches!(after, Some('}') | Some('!') | Some(':')) {
                        break;
                    }
                }
            }
            '#' => return fail("f-string expression part cannot include '#'", err_span),
            _ => {}
        }
        *i += 1;
    }
    if *i >= chars.len() {
        return fail("f-string: expecting '}'", err_span);
    }
    let mut source: String = chars[expr_start..*i].iter().collect();
    if source.trim().is_empty() {
        return fail("f-string: empty expression not allowed", err_span);
    }
    let mut debug_text = None;
    if chars[*i] == '=' {
        let mut text = source.clone();
        text.push('=');
        *i += 1;
        while *i < chars.len() && chars[*i].is_whitespace() {
            text.push(chars[*i]);
            *i += 1;
        }
        debug_text = Some(text);
        source = source.trim_end().to_string();
    }
    let mut conversion = None;
    if *i < chars.len() && chars[*i] == '!' {
        let conv = chars.get(*i + 1).copied();
        match conv {
            Some(c @ ('r' | 's' | 'a')) => conversion = Some(c),
            _ => return fail("f-string: invalid conversion character", err_span),
        }
        *i += 2;
    }
    let mut spec = Vec::new();
    if *i < chars.len() && chars[*i] == ':' {
        *i += 1;
        spec = split_fstring_range(chars, i, raw, start, true)?;
    }
    if *i >= chars.len() || chars[*i] != '}' {
        return fail("f-string: expecting '}'", err_span);
    }
    *i += 1;
    let span = offset_span(start, chars, expr_start);
    Ok(RawFPart::Expr { source, span, conversion, spec, debug_text })
}
