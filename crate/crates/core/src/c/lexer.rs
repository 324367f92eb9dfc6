//! C tokenizer. Preprocessor directives come out as single tokens holding
//! the whole logical line so the preprocessor can work on tokens.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(i128),
    Float(String),
    Str(String),
    Char(i128),
    Punct(&'static str),
    /// Text after the `#` with continuations joined and comments removed.
    Directive(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
    /// Set when whitespace precedes the token; used to tell `F(x)` from
    /// `F (x)` in `#define` lines.
    pub space_before: bool,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        matches!(&self.kind, TokenKind::Punct(q) if *q == p)
    }

    pub fn ident(&self) -> Option<&str> {
        match &self.kind {
            TokenKind::Ident(s) => Some(s),
            _ => None,
        }
    }

    /// Source-like spelling, used for diagnostics and stringification.
    pub fn spelling(&self) -> String {
        match &self.kind {
            TokenKind::Ident(s) => s.clone(),
            TokenKind::Int(v) => v.to_string(),
            TokenKind::Float(s) => s.clone(),
            TokenKind::Str(s) => format!("{s:?}"),
            TokenKind::Char(v) => format!("'\\x{v:x}'"),
            TokenKind::Punct(p) => p.to_string(),
            TokenKind::Directive(d) => format!("#{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {message}")]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

const PUNCTS: [&str; 48] = [
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "##", "{", "}", "(", ")", "[", "]", ";", ",", ":",
    "?", ".", "+", "-", "*", "/", "%", "&", "|", "^", "!", "~", "<", ">", "=", "#",
];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    column: u32,
    at_line_start: bool,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<u8> {
        self.src.get(self.pos + n).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.column = 1;
            self.at_line_start = true;
        } else if b & 0xC0 != 0x80 {
            self.column += 1;
        }
        Some(b)
    }

    fn span(&self) -> Span {
        Span {
            line: self.line,
            column: self.column,
        }
    }

    /// Skips a backslash-newline pair if the cursor is on one.
    fn skip_continuation(&mut self) -> bool {
        if self.peek() == Some(b'\\') {
            let mut n = 1;
            if self.peek_at(n) == Some(b'\r') {
                n += 1;
            }
            if self.peek_at(n) == Some(b'\n') {
                for _ in 0..=n {
                    self.bump();
                }
                return true;
            }
        }
        false
    }

    /// Skips whitespace and comments. Stops at a newline when `in_directive`.
    fn skip_trivia(&mut self, in_directive: bool) -> Result<bool, LexError> {
        let mut skipped = false;
        loop {
            if self.skip_continuation() {
                skipped = true;
                continue;
            }
            match (self.peek(), self.peek_at(1)) {
                (Some(b'\n'), _) if in_directive => return Ok(skipped),
                (Some(b), _) if b.is_ascii_whitespace() => {
                    self.bump();
                }
                (Some(b'/'), Some(b'/')) => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        if !self.skip_continuation() {
                            self.bump();
                        }
                    }
                }
                (Some(b'/'), Some(b'*')) => {
                    let start = self.span();
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(), self.peek_at(1)) {
                            (Some(b'*'), Some(b'/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => {
                                return Err(LexError {
                                    span: start,
                                    message: "unterminated comment".into(),
                                })
                            }
                        }
                    }
                }
                _ => return Ok(skipped),
            }
            skipped = true;
        }
    }

    fn directive(&mut self) -> Result<Token, LexError> {
        let span = self.span();
        self.bump(); // '#'
        let mut text = String::new();
        loop {
            if self.skip_continuation() {
                if self.peek().is_none() {
                    return Err(LexError {
                        span,
                        message: "unterminated #define continuation".into(),
                    });
                }
                text.push(' ');
                continue;
            }
            match (self.peek(), self.peek_at(1)) {
                (None, _) | (Some(b'\n'), _) => break,
                (Some(b'/'), Some(b'*')) | (Some(b'/'), Some(b'/')) => {
                    if self.skip_trivia(true)? {
                        text.push(' ');
                    }
                }
                (Some(b'"'), _) | (Some(b'\''), _) => {
                    let q = self.peek().unwrap();
                    text.push(q as char);
                    self.bump();
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                        text.push(b as char);
                        if b == b'\\' {
                            if let Some(n) = self.bump() {
                                text.push(n as char);
                            }
                        } else if b == q {
                            break;
                        }
                    }
                }
                (Some(b), _) => {
                    self.bump();
                    text.push(b as char);
                }
            }
        }
        if self.src[..self.pos].ends_with(b"\\") && self.peek().is_none() {
            return Err(LexError {
                span,
                message: "unterminated #define continuation".into(),
            });
        }
        Ok(Token {
            kind: TokenKind::Directive(text.trim().to_string()),
            span,
            space_before: true,
        })
    }

    fn number(&mut self) -> Result<TokenKind, LexError> {
        let span = self.span();
        let start = self.pos;
        while let Some(b) = self.peek() {
            let prev = self.src[self.pos - usize::from(self.pos > start)];
            let exp_sign = (b == b'+' || b == b'-')
                && matches!(prev, b'e' | b'E' | b'p' | b'P')
                && !self.src[start..self.pos].starts_with(b"0x");
            if b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || exp_sign {
                self.bump();
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        parse_number(text).ok_or_else(|| LexError {
            span,
            message: format!("malformed number `{text}`"),
        })
    }

    fn escape(&mut self, start: Span) -> Result<i128, LexError> {
        let err = |m: &str| LexError {
            span: start,
            message: m.into(),
        };
        let b = self.bump().ok_or_else(|| err("unterminated escape"))?;
        Ok(match b {
            b'n' => 10,
            b't' => 9,
            b'r' => 13,
            b'0'..=b'7' => {
                let mut v = i128::from(b - b'0');
                for _ in 0..2 {
                    match self.peek() {
                        Some(d @ b'0'..=b'7') => {
                            self.bump();
                            v = v * 8 + i128::from(d - b'0');
                        }
                        _ => break,
                    }
                }
                v
            }
            b'x' => {
                let mut v = 0i128;
                while let Some(d) = self.peek().filter(u8::is_ascii_hexdigit) {
                    self.bump();
                    v = v * 16 + i128::from((d as char).to_digit(16).unwrap());
                }
                v
            }
            b'a' => 7,
            b'b' => 8,
            b'f' => 12,
            b'v' => 11,
            other => i128::from(other),
        })
    }

    fn string(&mut self) -> Result<TokenKind, LexError> {
        let span = self.span();
        self.bump();
        let mut s = Vec::new();
        loop {
            if self.skip_continuation() {
                continue;
            }
            match self.bump() {
                None | Some(b'\n') => {
                    return Err(LexError {
                        span,
                        message: "unterminated string literal".into(),
                    })
                }
                Some(b'"') => break,
                Some(b'\\') => {
                    let v = self.escape(span)?;
                    s.push(v as u8);
                }
                Some(b) => s.push(b),
            }
        }
        Ok(TokenKind::Str(String::from_utf8_lossy(&s).into_owned()))
    }

    fn char_lit(&mut self) -> Result<TokenKind, LexError> {
        let span = self.span();
        self.bump();
        let mut v = 0i128;
        loop {
            match self.bump() {
                None | Some(b'\n') => {
                    return Err(LexError {
                        span,
                        message: "unterminated character literal".into(),
                    })
                }
                Some(b'\'') => break,
                Some(b'\\') => v = self.escape(span)?,
                Some(b) => v = i128::from(b),
            }
        }
        Ok(TokenKind::Char(v))
    }
}

pub fn parse_number(text: &str) -> Option<TokenKind> {
    let lower = text.to_ascii_lowercase();
    let is_hex = lower.starts_with("0x");
    let is_float = if is_hex {
        lower.contains('.') || lower.contains('p')
    } else {
        lower.contains('.') || lower.contains('e')
    };
    if is_float {
        return Some(TokenKind::Float(text.to_string()));
    }
    let digits = lower.trim_end_matches(['u', 'l']);
    let v = if let Some(h) = digits.strip_prefix("0x") {
        i128::from_str_radix(h, 16).ok()?
    } else if let Some(b) = digits.strip_prefix("0b") {
        i128::from_str_radix(b, 2).ok()?
    } else if digits.len() > 1 && digits.starts_with('0') {
        i128::from_str_radix(&digits[1..], 8).ok()?
    } else {
        digits.parse().ok()?
    };
    Some(TokenKind::Int(v))
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer {
        src: src.as_bytes(),
        pos: 0,
        line: 1,
        column: 1,
        at_line_start: true,
    };
    let mut out = Vec::new();
    loop {
        let space_before = lx.skip_trivia(false)?;
        let Some(b) = lx.peek() else { break };
        let span = lx.span();
        if b == b'#' && lx.at_line_start {
            out.push(lx.directive()?);
            continue;
        }
        lx.at_line_start = false;
        let kind = if b.is_ascii_alphabetic() || b == b'_' || b == b'$' {
            let start = lx.pos;
            while lx
                .peek()
                .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'$')
            {
                lx.bump();
            }
            let word = std::str::from_utf8(&lx.src[start..lx.pos]).unwrap().to_string();
            // wide/unicode literal prefixes
            match (word.as_str(), lx.peek()) {
                ("L" | "u" | "U" | "u8", Some(b'"')) => lx.string()?,
                ("L" | "u" | "U", Some(b'\'')) => lx.char_lit()?,
                _ => TokenKind::Ident(word),
            }
        } else if b.is_ascii_digit() || (b == b'.' && lx.peek_at(1).is_some_and(|c| c.is_ascii_digit())) {
            lx.number()?
        } else if b == b'"' {
            lx.string()?
        } else if b == b'\'' {
            lx.char_lit()?
        } else {
            let rest = &lx.src[lx.pos..];
            let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(p.as_bytes())) else {
                return Err(LexError {
                    span,
                    message: format!("unexpected character `{}`", b as char),
                });
            };
            for _ in 0..p.len() {
                lx.bump();
            }
            TokenKind::Punct(p)
        };
        out.push(Token {
            kind,
            span,
            space_before,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn basic_tokens() {
        assert_eq!(
            kinds("x->y = 0x10u + 'a';"),
            vec![
                TokenKind::Ident("x".into()),
                TokenKind::Punct("->"),
                TokenKind::Ident("y".into()),
                TokenKind::Punct("="),
                TokenKind::Int(16),
                TokenKind::Punct("+"),
                TokenKind::Char(97),
                TokenKind::Punct(";"),
            ]
        );
    }

    #[test]
    fn directives_join_continuations() {
        let toks = tokenize("#define F(x) \\\n  ((x) + 1)\nint y;").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Directive("define F(x)    ((x) + 1)".into()));
        assert_eq!(toks[1].span, Span { line: 3, column: 1 });
    }

    #[test]
    fn comments_are_skipped_and_spans_tracked() {
        let toks = tokenize("/* a\n b */ foo // c\n  bar").unwrap();
        assert_eq!(toks[0].span, Span { line: 2, column: 7 });
        assert_eq!(toks[1].span, Span { line: 3, column: 3 });
    }

    #[test]
    fn hash_mid_line_is_punct() {
        let k = kinds("a # b");
        assert_eq!(k[1], TokenKind::Punct("#"));
    }

    #[test]
    fn unterminated_continuation_is_an_error() {
        let e = tokenize("#define X 1 \\").unwrap_err();
        assert!(e.message.contains("continuation"));
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("017"), vec![TokenKind::Int(15)]);
        assert_eq!(kinds("1e-3"), vec![TokenKind::Float("1e-3".into())]);
        assert_eq!(kinds("42UL"), vec![TokenKind::Int(42)]);
    }
}
