//! Tokenizer for `.knl` sources.

use super::ast::Span;
use super::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Assign,
    Plus,
    Minus,
    Star,
    PlusPlus,
    MinusMinus,
    PlusAssign,
    MinusAssign,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    /// Anything outside the subset (`/`, `%`, `&`, `!`, `.`, ...). Kept so the
    /// parser can report it with a precise message.
    Other(String),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Other(s) => format!("`{s}`"),
            Tok::Eof => "end of file".to_string(),
            t => format!("`{}`", t.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::Assign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::PlusPlus => "++",
            Tok::MinusMinus => "--",
            Tok::PlusAssign => "+=",
            Tok::MinusAssign => "-=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            _ => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut diags = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    // True until the first non-blank character of the current line.
    let mut line_start = true;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
                line_start = true;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        let span = Span::new(line, col);
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            let mut closed = false;
            while i < chars.len() {
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    closed = true;
                    break;
                }
                bump!();
            }
            if !closed {
                diags.push(Diagnostic::new(span, "unterminated block comment"));
            }
            continue;
        }
        if c == '#' && line_start {
            let start = i;
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            // Annotation output is accepted back as input; the pragma itself is dropped.
            if !text.trim_start_matches('#').trim_start().starts_with("pragma") {
                diags.push(Diagnostic::new(span, "unsupported construct: preprocessor directive"));
            }
            continue;
        }
        line_start = false;
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), span });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            match text.parse::<i64>() {
                Ok(v) => out.push(Token { tok: Tok::Int(v), span }),
                Err(_) => diags.push(Diagnostic::new(
                    span,
                    format!("invalid integer literal `{text}` (only decimal integers are supported)"),
                )),
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            ('+', Some('+')) => (Tok::PlusPlus, 2),
            ('-', Some('-')) => (Tok::MinusMinus, 2),
            ('+', Some('=')) => (Tok::PlusAssign, 2),
            ('-', Some('=')) => (Tok::MinusAssign, 2),
            ('<', Some('=')) => (Tok::Le, 2),
            ('>', Some('=')) => (Tok::Ge, 2),
            ('=', Some('=')) => (Tok::EqEq, 2),
            ('!', Some('=')) => (Tok::Ne, 2),
            ('&', Some('&')) => (Tok::Other("&&".into()), 2),
            ('|', Some('|')) => (Tok::Other("||".into()), 2),
            ('-', Some('>')) => (Tok::Other("->".into()), 2),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            (';', _) => (Tok::Semi, 1),
            (',', _) => (Tok::Comma, 1),
            ('=', _) => (Tok::Assign, 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('*', _) => (Tok::Star, 1),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            (other, _) => (Tok::Other(other.to_string()), 1),
        };
        for _ in 0..len {
            bump!();
        }
        out.push(Token { tok, span });
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(line, col) });
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(diags)
    }
}
