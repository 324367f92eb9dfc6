//! Token scanner for OCaml source, precise enough to find `external` items.
//!
//! Comments nest and may contain string literals, exactly as in the OCaml
//! lexer, so text inside either never produces tokens.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// Identifiers and keywords alike.
    Ident(String),
    Str(String),
    Char,
    TyVar(String),
    Number(String),
    Arrow,
    Colon,
    Eq,
    Star,
    Dot,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    /// `[@`, `[@@` or `[@@@`, carrying the number of `@`.
    AttrOpen(u8),
    Semi,
    DoubleSemi,
    Comma,
    /// Any other operator or punctuation sequence.
    Op(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub column: u32,
    /// Byte range in the source.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

struct Cursor<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<u8> {
        self.bytes.get(self.pos + n).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.column = 1;
        } else if b & 0xC0 != 0x80 {
            // count characters, not UTF-8 continuation bytes
            self.column += 1;
        }
        Some(b)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s)
    }

    fn err(&self, line: u32, column: u32, message: impl Into<String>) -> LexError {
        LexError {
            line,
            column,
            message: message.into(),
        }
    }
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_' || b >= 0x80
}

fn is_ident_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'\'' || b >= 0x80
}

fn is_op_char(b: u8) -> bool {
    matches!(
        b,
        b'!' | b'$' | b'%' | b'&' | b'*' | b'+' | b'-' | b'.' | b'/' | b':' | b'<' | b'='
            | b'>' | b'?' | b'@' | b'^' | b'|' | b'~' | b'#'
    )
}

/// Tokenizes the whole input. On a lexical error the tokens scanned so far
/// are returned alongside the error.
pub fn tokenize(src: &str) -> (Vec<Token>, Option<LexError>) {
    let mut cur = Cursor {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        match next_token(&mut cur) {
            Ok(Some(t)) => out.push(t),
            Ok(None) => return (out, None),
            Err(e) => return (out, Some(e)),
        }
    }
}

fn skip_comment(cur: &mut Cursor<'_>) -> Result<(), LexError> {
    let (line, column) = (cur.line, cur.column);
    // positioned on "(*"
    cur.bump();
    cur.bump();
    let mut depth = 1usize;
    while depth > 0 {
        if cur.starts_with("(*") {
            cur.bump();
            cur.bump();
            depth += 1;
        } else if cur.starts_with("*)") {
            cur.bump();
            cur.bump();
            depth -= 1;
        } else {
            match cur.peek() {
                None => return Err(cur.err(line, column, "unterminated comment")),
                Some(b'"') => {
                    lex_string(cur)?;
                }
                Some(b'{') if quoted_string_delim(cur).is_some() => {
                    lex_quoted_string(cur)?;
                }
                Some(b'\'') => {
                    // a quote inside a comment only matters when it starts a
                    // char literal holding a double quote
                    if cur.peek_at(1) == Some(b'"') && cur.peek_at(2) == Some(b'\'') {
                        cur.bump();
                        cur.bump();
                        cur.bump();
                    } else {
                        cur.bump();
                    }
                }
                Some(_) => {
                    cur.bump();
                }
            }
        }
    }
    Ok(())
}

fn lex_string(cur: &mut Cursor<'_>) -> Result<String, LexError> {
    let (line, column) = (cur.line, cur.column);
    cur.bump();
    let mut buf = Vec::new();
    loop {
        match cur.bump() {
            None => return Err(cur.err(line, column, "unterminated string literal")),
            Some(b'"') => break,
            Some(b'\\') => match cur.bump() {
                None => return Err(cur.err(line, column, "unterminated string literal")),
                Some(b'n') => buf.push(b'\n'),
                Some(b't') => buf.push(b'\t'),
                Some(b'r') => buf.push(b'\r'),
                Some(b'b') => buf.push(0x08),
                Some(b'\n') => {
                    while matches!(cur.peek(), Some(b' ') | Some(b'\t')) {
                        cur.bump();
                    }
                }
                Some(c) => buf.push(c),
            },
            Some(c) => buf.push(c),
        }
    }
    Ok(String::from_utf8_lossy(&buf).into_owned())
}

/// Returns the delimiter id when the cursor sits on `{id|`.
fn quoted_string_delim(cur: &Cursor<'_>) -> Option<String> {
    let rest = &cur.src[cur.pos + 1..];
    let id_len = rest
        .bytes()
        .take_while(|b| b.is_ascii_lowercase() || *b == b'_')
        .count();
    if rest.as_bytes().get(id_len) == Some(&b'|') {
        Some(rest[..id_len].to_string())
    } else {
        None
    }
}

fn lex_quoted_string(cur: &mut Cursor<'_>) -> Result<String, LexError> {
    let (line, column) = (cur.line, cur.column);
    let id = quoted_string_delim(cur).unwrap_or_default();
    for _ in 0..id.len() + 2 {
        cur.bump();
    }
    let close = format!("|{id}}}");
    let start = cur.pos;
    while !cur.starts_with(&close) {
        if cur.bump().is_none() {
            return Err(cur.err(line, column, "unterminated quoted string"));
        }
    }
    let body = cur.src[start..cur.pos].to_string();
    for _ in 0..close.len() {
        cur.bump();
    }
    Ok(body)
}

fn next_token(cur: &mut Cursor<'_>) -> Result<Option<Token>, LexError> {
    loop {
        match cur.peek() {
            None => return Ok(None),
            Some(b) if b.is_ascii_whitespace() => {
                cur.bump();
            }
            Some(b'(') if cur.peek_at(1) == Some(b'*') => skip_comment(cur)?,
            Some(_) => break,
        }
    }
    let (line, column, start) = (cur.line, cur.column, cur.pos);
    let b = cur.peek().unwrap();
    let tok = if is_ident_start(b) {
        while cur.peek().is_some_and(is_ident_char) {
            cur.bump();
        }
        Tok::Ident(cur.src[start..cur.pos].to_string())
    } else if b.is_ascii_digit() {
        while cur
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'.')
        {
            cur.bump();
        }
        Tok::Number(cur.src[start..cur.pos].to_string())
    } else if b == b'"' {
        Tok::Str(lex_string(cur)?)
    } else if b == b'{' && quoted_string_delim(cur).is_some() {
        Tok::Str(lex_quoted_string(cur)?)
    } else if b == b'\'' {
        lex_quote(cur)
    } else if b == b'[' && cur.peek_at(1) == Some(b'@') {
        cur.bump();
        let mut n = 0u8;
        while cur.peek() == Some(b'@') && n < 3 {
            cur.bump();
            n += 1;
        }
        Tok::AttrOpen(n)
    } else if is_op_char(b) {
        while cur.peek().is_some_and(is_op_char) {
            cur.bump();
        }
        match &cur.src[start..cur.pos] {
            "->" => Tok::Arrow,
            ":" => Tok::Colon,
            "=" => Tok::Eq,
            "*" => Tok::Star,
            "." => Tok::Dot,
            other => Tok::Op(other.to_string()),
        }
    } else {
        cur.bump();
        if b == b';' && cur.peek() == Some(b';') {
            cur.bump();
            Tok::DoubleSemi
        } else {
            match b {
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'[' => Tok::LBracket,
                b']' => Tok::RBracket,
                b'{' => Tok::LBrace,
                b'}' => Tok::RBrace,
                b';' => Tok::Semi,
                b',' => Tok::Comma,
                _ => Tok::Op((b as char).to_string()),
            }
        }
    };
    Ok(Some(Token {
        tok,
        line,
        column,
        start,
        end: cur.pos,
    }))
}

/// Distinguishes `'c'`, `'\n'` and `'\123'` char literals from type variables.
fn lex_quote(cur: &mut Cursor<'_>) -> Tok {
    let rest = &cur.bytes[cur.pos..];
    let char_len = match rest {
        [b'\'', b'\\', b'0'..=b'9', b'0'..=b'9', b'0'..=b'9', b'\'', ..] => Some(6),
        [b'\'', b'\\', b'x', _, _, b'\'', ..] => Some(6),
        [b'\'', b'\\', _, b'\'', ..] => Some(4),
        [b'\'', c, b'\'', ..] if *c != b'\\' => Some(3),
        _ => None,
    };
    if let Some(n) = char_len {
        for _ in 0..n {
            cur.bump();
        }
        return Tok::Char;
    }
    cur.bump();
    let start = cur.pos;
    while cur.peek().is_some_and(is_ident_char) {
        cur.bump();
    }
    Tok::TyVar(cur.src[start..cur.pos].to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        let (t, e) = tokenize(src);
        assert!(e.is_none(), "{e:?}");
        t.into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn nested_comments_with_strings_are_skipped() {
        let t = toks(r#"(* outer (* inner "*)" *) still *) x"#);
        assert_eq!(t, vec![Tok::Ident("x".into())]);
    }

    #[test]
    fn arrows_and_attributes() {
        let t = toks("float [@unboxed] -> int [@@noalloc]");
        assert_eq!(
            t,
            vec![
                Tok::Ident("float".into()),
                Tok::AttrOpen(1),
                Tok::Ident("unboxed".into()),
                Tok::RBracket,
                Tok::Arrow,
                Tok::Ident("int".into()),
                Tok::AttrOpen(2),
                Tok::Ident("noalloc".into()),
                Tok::RBracket,
            ]
        );
    }

    #[test]
    fn char_literals_versus_type_variables() {
        assert_eq!(toks("'a'"), vec![Tok::Char]);
        assert_eq!(toks("'\\n'"), vec![Tok::Char]);
        assert_eq!(
            toks("'a -> 'b"),
            vec![Tok::TyVar("a".into()), Tok::Arrow, Tok::TyVar("b".into())]
        );
    }

    #[test]
    fn quoted_strings() {
        assert_eq!(toks("{foo|a \"b|foo}"), vec![Tok::Str("a \"b".into())]);
    }

    #[test]
    fn unterminated_comment_reports_its_start() {
        let (_, e) = tokenize("let x = 1\n  (* never closed");
        let e = e.unwrap();
        assert_eq!((e.line, e.column), (2, 3));
    }
}
