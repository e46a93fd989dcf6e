//! Heuristic C lexer. It never fails: every byte of the input lands in exactly
//! one token, so concatenating token texts reproduces the source.

use std::ops::Range;

pub const C11_KEYWORDS: [&str; 44] = [
    "auto",
    "break",
    "case",
    "char",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extern",
    "float",
    "for",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
    "_Alignas",
    "_Alignof",
    "_Atomic",
    "_Bool",
    "_Complex",
    "_Generic",
    "_Imaginary",
    "_Noreturn",
    "_Static_assert",
    "_Thread_local",
];

const PUNCT: [&str; 23] = [
    ">>=", "<<=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "*=",
    "/=", "%=", "+=", "-=", "&=", "^=", "|=", "##",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    String,
    Char,
    Comment,
    Punct,
    Whitespace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub span: Range<usize>,
}

impl Token<'_> {
    /// Whitespace and comments.
    pub fn is_trivia(&self) -> bool {
        matches!(self.kind, TokenKind::Whitespace | TokenKind::Comment)
    }
}

pub fn is_c_keyword(s: &str) -> bool {
    C11_KEYWORDS.contains(&s)
}

pub fn is_identifier(s: &str) -> bool {
    let mut b = s.bytes();
    matches!(b.next(), Some(c) if c.is_ascii_alphabetic() || c == b'_')
        && b.all(|c| c.is_ascii_alphanumeric() || c == b'_')
}

fn ident_byte(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

/// End of a quoted literal starting at `start` (the opening quote). Stops
/// before an unescaped newline if the literal is unterminated.
fn quoted_end(b: &[u8], start: usize) -> usize {
    let quote = b[start];
    let mut i = start + 1;
    while i < b.len() {
        match b[i] {
            b'\\' if i + 1 < b.len() => i += 2,
            b'\n' => return i,
            c if c == quote => return i + 1,
            _ => i += 1,
        }
    }
    b.len()
}

fn number_end(b: &[u8], start: usize) -> usize {
    let mut i = start;
    while i < b.len() {
        let c = b[i];
        let exponent_sign =
            (c == b'+' || c == b'-') && matches!(b[i - 1], b'e' | b'E' | b'p' | b'P');
        if ident_byte(c) || c == b'.' || exponent_sign {
            i += 1;
        } else {
            break;
        }
    }
    i
}

pub fn tokenize_c(src: &str) -> Vec<Token<'_>> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let next = b.get(i + 1).copied();
        let (kind, end) = if c.is_ascii_whitespace() {
            let mut j = i;
            while j < b.len() && b[j].is_ascii_whitespace() {
                j += 1;
            }
            (TokenKind::Whitespace, j)
        } else if c == b'/' && next == Some(b'/') {
            let j = src[i..].find('\n').map_or(b.len(), |k| i + k);
            (TokenKind::Comment, j)
        } else if c == b'/' && next == Some(b'*') {
            let j = src[i + 2..].find("*/").map_or(b.len(), |k| i + 2 + k + 2);
            (TokenKind::Comment, j)
        } else if c == b'"' {
            (TokenKind::String, quoted_end(b, i))
        } else if c == b'\'' {
            (TokenKind::Char, quoted_end(b, i))
        } else if c.is_ascii_digit() || (c == b'.' && next.is_some_and(|n| n.is_ascii_digit())) {
            (TokenKind::Number, number_end(b, i))
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let mut j = i;
            while j < b.len() && ident_byte(b[j]) {
                j += 1;
            }
            let word = &src[i..j];
            // Encoding prefixes glue onto the following literal.
            match (word, b.get(j)) {
                ("L" | "u" | "U" | "u8", Some(b'"')) => (TokenKind::String, quoted_end(b, j)),
                ("L" | "u" | "U", Some(b'\'')) => (TokenKind::Char, quoted_end(b, j)),
                _ if is_c_keyword(word) => (TokenKind::Keyword, j),
                _ => (TokenKind::Identifier, j),
            }
        } else {
            let rest = &src[i..];
            let len = PUNCT.iter().find(|p| rest.starts_with(*p)).map_or_else(
                || rest.chars().next().map_or(1, char::len_utf8),
                |p| p.len(),
            );
            (TokenKind::Punct, i + len)
        };
        out.push(Token {
            kind,
            text: &src[i..end],
            span: i..end,
        });
        i = end;
    }
    out
}
