//! Recursive-descent parser for the C subset found in OCaml stub files.
//!
//! Top-level items other than function definitions are only skimmed for
//! typedef names, prototypes and global variable types. Inside function
//! bodies a statement that cannot be parsed becomes an opaque statement
//! instead of failing the whole function; only unbalanced delimiters are
//! fatal.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::intrinsics::{self, Intrinsic};
use super::lexer::{Span, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

type PResult<T> = Result<T, ParseError>;

/// Output of parsing one translation unit.
#[derive(Debug, Clone, Default)]
pub struct ParsedItems {
    pub functions: Vec<StubFunction>,
    pub prototypes: Vec<FunctionSig>,
    pub globals: BTreeMap<String, CType>,
    pub typedefs: BTreeSet<String>,
    /// Unsupported constructs that were skipped.
    pub unsupported: Vec<(Span, String)>,
    /// Fatal errors, one per function that could not be parsed.
    pub errors: Vec<ParseError>,
}

const BUILTIN_TYPE_NAMES: &[&str] = &[
    "value", "intnat", "uintnat", "mlsize_t", "tag_t", "header_t", "color_t", "mark_t",
    "asize_t", "int8_t", "int16_t", "int32_t", "int64_t", "uint8_t", "uint16_t", "uint32_t",
    "uint64_t", "size_t", "ssize_t", "ptrdiff_t", "intptr_t", "uintptr_t", "off_t", "pid_t",
    "FILE", "bool", "socklen_t", "time_t", "mode_t", "uid_t", "gid_t", "va_list",
    "__int128", "wchar_t", "char16_t", "char32_t",
];

const TYPE_KEYWORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool",
    "__signed__", "__unsigned__",
];

const IGNORED_SPECIFIERS: &[&str] = &[
    "const", "volatile", "restrict", "__restrict", "__restrict__", "__const", "static", "extern",
    "inline", "__inline", "__inline__", "register", "auto", "_Thread_local", "__thread",
    "_Noreturn", "__extension__", "CAMLexport", "CAMLextern", "CAMLunused", "CAMLnoret",
    "CAMLweakdef", "Caml_inline", "CAMLnoreturn_start", "CAMLnoreturn_end",
];

fn builtin_width(name: &str) -> Option<u8> {
    Some(match name {
        "int8_t" | "uint8_t" | "bool" => 8,
        "int16_t" | "uint16_t" | "wchar_t" | "char16_t" => 16,
        "int32_t" | "uint32_t" | "char32_t" | "mode_t" | "uid_t" | "gid_t" | "pid_t"
        | "socklen_t" => 32,
        "__int128" => 128,
        "intnat" | "uintnat" | "mlsize_t" | "asize_t" | "header_t" | "int64_t" | "uint64_t"
        | "size_t" | "ssize_t" | "ptrdiff_t" | "intptr_t" | "uintptr_t" | "off_t" | "time_t" => 64,
        "tag_t" | "color_t" | "mark_t" => 32,
        _ => return None,
    })
}

#[derive(Debug, Default, Clone, Copy)]
struct Storage {
    is_typedef: bool,
    camlprim: bool,
}

pub struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    typedefs: BTreeSet<String>,
    locals: Vec<(String, CType)>,
    unsupported: Vec<(Span, String)>,
}

fn err<T>(span: Span, message: impl Into<String>) -> PResult<T> {
    Err(ParseError {
        span,
        message: message.into(),
    })
}

pub fn parse_tokens(toks: &[Token]) -> ParsedItems {
    let mut p = Parser {
        toks,
        pos: 0,
        typedefs: BTreeSet::new(),
        locals: Vec::new(),
        unsupported: Vec::new(),
    };
    let mut items = ParsedItems::default();
    let mut seen = BTreeSet::new();
    while p.pos < toks.len() {
        if p.at_punct(";") {
            p.pos += 1;
            continue;
        }
        let start = p.pos;
        match p.scan_item() {
            Item::Function { body_open, body_close } => {
                match p.parse_function(start, body_open, body_close) {
                    Ok(f) => {
                        if seen.insert(f.sig.name.clone()) {
                            items.functions.push(f);
                        } else {
                            items.errors.push(ParseError {
                                span: f.sig.span,
                                message: format!("redefinition of function `{}`", f.sig.name),
                            });
                        }
                    }
                    Err(e) => items.errors.push(e),
                }
                p.pos = body_close + 1;
            }
            Item::Declaration { end } => {
                p.skim_declaration(start, end, &mut items);
                p.pos = end + 1;
            }
            Item::Unbalanced(e) => {
                items.errors.push(e);
                break;
            }
        }
    }
    items.typedefs = p.typedefs.clone();
    items.unsupported = p.unsupported;
    items
}

enum Item {
    Function { body_open: usize, body_close: usize },
    /// Ends at the `;` index (or the last token).
    Declaration { end: usize },
    Unbalanced(ParseError),
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + n)
    }

    fn span(&self) -> Span {
        self.peek()
            .or_else(|| self.toks.last())
            .map(|t| t.span)
            .unwrap_or_default()
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn at_ident(&self, s: &str) -> bool {
        self.peek().and_then(Token::ident) == Some(s)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            let found = self.peek().map_or("end of input".to_string(), Token::spelling);
            err(self.span(), format!("expected `{p}`, found `{found}`"))
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        match self.peek().and_then(Token::ident) {
            Some(s) => {
                self.pos += 1;
                Ok(s.to_string())
            }
            None => err(self.span(), "expected identifier"),
        }
    }

    /// Index of the delimiter matching the opener at `open`.
    fn matching(&self, open: usize) -> Option<usize> {
        let (o, c) = match &self.toks[open].kind {
            TokenKind::Punct("(") => ("(", ")"),
            TokenKind::Punct("[") => ("[", "]"),
            TokenKind::Punct("{") => ("{", "}"),
            _ => return None,
        };
        let mut depth = 0usize;
        for (k, t) in self.toks.iter().enumerate().skip(open) {
            if t.is_punct(o) {
                depth += 1;
            } else if t.is_punct(c) {
                depth -= 1;
                if depth == 0 {
                    return Some(k);
                }
            }
        }
        None
    }

    fn is_type_name(&self, name: &str) -> bool {
        BUILTIN_TYPE_NAMES.contains(&name)
            || self.typedefs.contains(name)
            || (name.len() > 2 && name.ends_with("_t"))
    }

    fn starts_type(&self, t: &Token) -> bool {
        match t.ident() {
            Some(s) => {
                TYPE_KEYWORDS.contains(&s)
                    || matches!(s, "struct" | "union" | "enum" | "const" | "volatile")
                    || self.is_type_name(s)
            }
            None => false,
        }
    }

    // ---------------------------------------------------------------
    // top level

    fn scan_item(&self) -> Item {
        let start = self.pos;
        let mut k = start;
        let mut depth = 0i64;
        while k < self.toks.len() {
            let t = &self.toks[k];
            if t.is_punct("(") || t.is_punct("[") {
                depth += 1;
            } else if t.is_punct(")") || t.is_punct("]") {
                depth -= 1;
                if depth < 0 {
                    return Item::Unbalanced(ParseError {
                        span: t.span,
                        message: "unbalanced parentheses".into(),
                    });
                }
            } else if t.is_punct("{") && depth == 0 {
                let Some(close) = self.matching(k) else {
                    return Item::Unbalanced(ParseError {
                        span: t.span,
                        message: "unbalanced braces: `{` is never closed".into(),
                    });
                };
                if self.is_function_head(start, k) {
                    return Item::Function {
                        body_open: k,
                        body_close: close,
                    };
                }
                k = close;
            } else if t.is_punct("}") && depth == 0 {
                return Item::Unbalanced(ParseError {
                    span: t.span,
                    message: "unbalanced braces: unexpected `}`".into(),
                });
            } else if t.is_punct(";") && depth == 0 {
                return Item::Declaration { end: k };
            }
            k += 1;
        }
        if depth != 0 {
            return Item::Unbalanced(ParseError {
                span: self.toks[start].span,
                message: "unbalanced parentheses".into(),
            });
        }
        Item::Declaration {
            end: self.toks.len() - 1,
        }
    }

    /// A function definition head ends in `)` (possibly followed by
    /// attributes) and contains no `=` at depth zero.
    fn is_function_head(&self, start: usize, brace: usize) -> bool {
        let head = &self.toks[start..brace];
        let mut depth = 0;
        for t in head {
            if t.is_punct("(") {
                depth += 1;
            } else if t.is_punct(")") {
                depth -= 1;
            } else if depth == 0 && (t.is_punct("=") || t.is_punct(",")) {
                return false;
            }
        }
        let mut end = head.len();
        // trailing __attribute__((...))
        while end >= 1 && head[end - 1].is_punct(")") {
            let mut d = 0;
            let mut open = None;
            for k in (0..end).rev() {
                if head[k].is_punct(")") {
                    d += 1;
                } else if head[k].is_punct("(") {
                    d -= 1;
                    if d == 0 {
                        open = Some(k);
                        break;
                    }
                }
            }
            match open {
                Some(o) if o >= 1 && head[o - 1].ident() == Some("__attribute__") => end = o - 1,
                Some(o) => return o >= 1 && head[o - 1].ident().is_some(),
                None => return false,
            }
        }
        false
    }

    fn parse_function(&mut self, start: usize, body_open: usize, body_close: usize) -> PResult<StubFunction> {
        self.pos = start;
        let (base, storage) = self.parse_specifiers()?;
        let decl = self.parse_declarator(base)?;
        let Some((params, variadic)) = decl.params else {
            return err(decl.span, "expected a function declarator");
        };
        let name = decl.name.ok_or_else(|| ParseError {
            span: decl.span,
            message: "function without a name".into(),
        })?;
        let returns = decl.ty;
        self.skip_attributes();
        if self.pos != body_open {
            return err(self.span(), "unsupported function header (K&R style or attributes)");
        }
        check_balanced(&self.toks[body_open..=body_close])?;
        let sig = FunctionSig {
            is_camlprim: storage.camlprim || returns.is_value(),
            name,
            returns,
            params,
            variadic,
            span: decl.span,
        };
        self.locals.clear();
        self.pos = body_open + 1;
        let mut body = Vec::new();
        while self.pos < body_close {
            body.push(self.parse_statement_recovering(body_close));
        }
        Ok(StubFunction {
            sig,
            locals: std::mem::take(&mut self.locals),
            body,
        })
    }

    /// Records typedef names, prototypes and globals. Anything that fails to
    /// parse is ignored: such items cannot affect stub bodies beyond what
    /// the heuristics already cover.
    fn skim_declaration(&mut self, start: usize, end: usize, items: &mut ParsedItems) {
        self.pos = start;
        if self.at_ident("typedef") {
            // typedef names: the last identifier at depth 0, or `(*name)`
            let mut depth = 0;
            let mut name = None;
            for k in start..end {
                let t = &self.toks[k];
                if t.is_punct("(") || t.is_punct("{") || t.is_punct("[") {
                    depth += 1;
                    if t.is_punct("(")
                        && self.toks.get(k + 1).is_some_and(|n| n.is_punct("*"))
                        && depth == 1
                    {
                        if let Some(n) = self.toks.get(k + 2).and_then(Token::ident) {
                            name = Some(n.to_string());
                        }
                    }
                } else if t.is_punct(")") || t.is_punct("}") || t.is_punct("]") {
                    depth -= 1;
                } else if depth == 0 {
                    if let Some(n) = t.ident() {
                        name = Some(n.to_string());
                    } else if t.is_punct(",") {
                        if let Some(n) = name.take() {
                            self.typedefs.insert(n);
                        }
                    }
                }
            }
            if let Some(n) = name {
                self.typedefs.insert(n);
            }
            return;
        }
        let Ok((base, storage)) = self.parse_specifiers() else {
            return;
        };
        loop {
            let Ok(d) = self.parse_declarator(base.clone()) else {
                return;
            };
            if let Some(name) = d.name {
                match d.params {
                    Some((params, variadic)) => items.prototypes.push(FunctionSig {
                        is_camlprim: storage.camlprim || d.ty.is_value(),
                        name,
                        returns: d.ty,
                        params,
                        variadic,
                        span: d.span,
                    }),
                    None => {
                        items.globals.insert(name, d.ty);
                    }
                }
            }
            self.skip_attributes();
            if self.eat_punct("=") {
                // skip the initializer
                let mut depth = 0;
                while self.pos < end {
                    let t = &self.toks[self.pos];
                    if t.is_punct("(") || t.is_punct("{") || t.is_punct("[") {
                        depth += 1;
                    } else if t.is_punct(")") || t.is_punct("}") || t.is_punct("]") {
                        depth -= 1;
                    } else if depth == 0 && t.is_punct(",") {
                        break;
                    }
                    self.pos += 1;
                }
            }
            if !self.eat_punct(",") || self.pos >= end {
                return;
            }
        }
    }

    fn skip_attributes(&mut self) {
        while let Some(s) = self.peek().and_then(Token::ident) {
            if matches!(s, "__attribute__" | "__attribute" | "__declspec" | "__asm__" | "__asm" | "asm")
                && self.peek_at(1).is_some_and(|t| t.is_punct("("))
            {
                match self.matching(self.pos + 1) {
                    Some(close) => self.pos = close + 1,
                    None => return,
                }
            } else if IGNORED_SPECIFIERS.contains(&s) {
                self.pos += 1;
            } else {
                return;
            }
        }
    }

    // ---------------------------------------------------------------
    // types

    fn parse_specifiers(&mut self) -> PResult<(CType, Storage)> {
        let mut storage = Storage::default();
        let mut keywords: Vec<&str> = Vec::new();
        let mut named: Option<CType> = None;
        loop {
            self.skip_attributes();
            let Some(t) = self.peek() else { break };
            let Some(s) = t.ident() else { break };
            match s {
                "typedef" => storage.is_typedef = true,
                "CAMLprim" => storage.camlprim = true,
                "struct" | "union" | "enum" => {
                    self.pos += 1;
                    let tag = match self.peek().and_then(Token::ident) {
                        Some(n) => {
                            self.pos += 1;
                            n.to_string()
                        }
                        None => "<anonymous>".to_string(),
                    };
                    if self.at_punct("{") {
                        let close = self
                            .matching(self.pos)
                            .ok_or_else(|| ParseError {
                                span: self.span(),
                                message: "unbalanced braces".into(),
                            })?;
                        self.pos = close + 1;
                    }
                    named = Some(if s == "enum" {
                        CType::Integer(32)
                    } else {
                        CType::Record(tag)
                    });
                    continue;
                }
                k if TYPE_KEYWORDS.contains(&k) => keywords.push(k),
                _ if named.is_none() && keywords.is_empty() && self.is_type_name(s) => {
                    named = Some(if s == "value" {
                        CType::CamlValue
                    } else if let Some(w) = builtin_width(s) {
                        CType::Integer(w)
                    } else {
                        CType::Unknown(s.to_string())
                    });
                }
                // an unknown identifier names a type when a declarator
                // follows it
                _ if named.is_none()
                    && keywords.is_empty()
                    && self.peek_at(1).is_some_and(|n| {
                        n.ident().is_some_and(|i| !IGNORED_SPECIFIERS.contains(&i))
                            || n.is_punct("*")
                            || n.is_punct("(")
                    }) =>
                {
                    named = Some(CType::Unknown(s.to_string()));
                }
                _ => break,
            }
            self.pos += 1;
        }
        let ty = match named {
            Some(t) => t,
            None if keywords.is_empty() => return err(self.span(), "expected a type"),
            None => keyword_type(&keywords),
        };
        Ok((ty, storage))
    }

    fn parse_declarator(&mut self, base: CType) -> PResult<ParsedDeclarator> {
        let span = self.span();
        let mut ty = base;
        loop {
            self.skip_attributes();
            if self.eat_punct("*") {
                ty = ty.pointer_to();
            } else {
                break;
            }
        }
        self.skip_attributes();
        let mut name = None;
        let mut name_span = span;
        let mut inner_pointer = false;
        if self.at_punct("(") && self.peek_at(1).is_some_and(|t| t.is_punct("*") || t.is_punct("^")) {
            // function pointer or pointer to array: ( * name ) suffix
            self.pos += 1;
            while self.eat_punct("*") || self.eat_punct("^") {
                self.skip_attributes();
            }
            if let Some(n) = self.peek().and_then(Token::ident) {
                name_span = self.span();
                name = Some(n.to_string());
                self.pos += 1;
            }
            while self.at_punct("[") {
                let close = self.matching(self.pos).ok_or_else(|| ParseError {
                    span: self.span(),
                    message: "unbalanced brackets".into(),
                })?;
                self.pos = close + 1;
            }
            self.expect_punct(")")?;
            inner_pointer = true;
        } else if let Some(n) = self.peek().and_then(Token::ident) {
            if !IGNORED_SPECIFIERS.contains(&n) {
                name_span = self.span();
                name = Some(n.to_string());
                self.pos += 1;
            }
        }
        let mut params = None;
        loop {
            if self.at_punct("[") {
                let close = self.matching(self.pos).ok_or_else(|| ParseError {
                    span: self.span(),
                    message: "unbalanced brackets".into(),
                })?;
                self.pos = close + 1;
                ty = ty.pointer_to();
            } else if self.at_punct("(") {
                let ps = self.parse_params()?;
                if inner_pointer {
                    // pointer to function: the parameters describe the pointee
                    ty = CType::Unknown("function".into()).pointer_to();
                } else if params.is_none() {
                    params = Some(ps);
                }
            } else {
                break;
            }
        }
        Ok(ParsedDeclarator {
            name,
            ty,
            params,
            span: name_span,
        })
    }

    fn parse_params(&mut self) -> PResult<(Vec<Param>, bool)> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        let mut variadic = false;
        if self.eat_punct(")") {
            return Ok((params, false));
        }
        if self.at_ident("void") && self.peek_at(1).is_some_and(|t| t.is_punct(")")) {
            self.pos += 2;
            return Ok((params, false));
        }
        loop {
            if self.eat_punct("...") {
                variadic = true;
            } else {
                let (base, _) = self.parse_specifiers()?;
                let d = self.parse_declarator(base)?;
                let ty = if d.params.is_some() {
                    CType::Unknown("function".into()).pointer_to()
                } else {
                    d.ty
                };
                params.push(Param { name: d.name, ty });
            }
            if self.eat_punct(")") {
                return Ok((params, variadic));
            }
            self.expect_punct(",")?;
        }
    }

    /// Parses a type name inside a cast or `sizeof`.
    fn parse_type_name(&mut self) -> PResult<CType> {
        let (base, _) = self.parse_specifiers()?;
        let d = self.parse_declarator(base)?;
        if d.name.is_some() {
            return err(d.span, "unexpected name in type");
        }
        Ok(d.ty)
    }

    /// Whether the `(` at `pos` opens a cast or compound literal.
    fn is_cast_at(&self, pos: usize) -> bool {
        let Some(next) = self.toks.get(pos + 1) else {
            return false;
        };
        if self.starts_type(next) {
            return true;
        }
        let Some(name) = next.ident() else {
            return false;
        };
        if intrinsics::expression_macro(name).is_some() || intrinsics::constant(name).is_some() {
            return false;
        }
        // ( Ident * ... )
        let mut k = pos + 2;
        let mut stars = 0;
        while self.toks.get(k).is_some_and(|t| t.is_punct("*") || t.ident() == Some("const")) {
            stars += 1;
            k += 1;
        }
        if !self.toks.get(k).is_some_and(|t| t.is_punct(")")) {
            return false;
        }
        if stars > 0 {
            return true;
        }
        // ( Ident ) followed by something that can only start an operand
        match self.toks.get(k + 1) {
            Some(t) => match &t.kind {
                TokenKind::Ident(_) | TokenKind::Int(_) | TokenKind::Float(_) | TokenKind::Char(_) => true,
                TokenKind::Str(_) => true,
                TokenKind::Punct(p) => matches!(*p, "(" | "!" | "~" | "{"),
                TokenKind::Directive(_) => false,
            },
            None => false,
        }
    }

    // ---------------------------------------------------------------
    // statements

    fn parse_statement_recovering(&mut self, limit: usize) -> Stmt {
        let start = self.pos;
        let span = self.span();
        match self.parse_statement() {
            Ok(s) if self.pos <= limit => s,
            Ok(_) | Err(_) => {
                // resynchronise after the next `;` at depth 0, or before `}`
                self.pos = start;
                let mut depth = 0i64;
                while self.pos < limit {
                    let t = &self.toks[self.pos];
                    if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") {
                        depth += 1;
                    } else if t.is_punct(")") || t.is_punct("]") || t.is_punct("}") {
                        depth -= 1;
                        if depth < 0 {
                            break;
                        }
                        if depth == 0 && t.is_punct("}") {
                            self.pos += 1;
                            break;
                        }
                    } else if depth == 0 && t.is_punct(";") {
                        self.pos += 1;
                        break;
                    }
                    self.pos += 1;
                }
                if self.pos == start {
                    self.pos += 1;
                }
                let text: Vec<String> = self.toks[start..self.pos].iter().map(Token::spelling).collect();
                let reason = format!("unparsed statement `{}`", abbreviate(&text.join(" ")));
                self.unsupported.push((span, reason.clone()));
                Stmt {
                    kind: StmtKind::Opaque(reason),
                    span,
                }
            }
        }
    }

    fn parse_block_body(&mut self) -> PResult<Vec<Stmt>> {
        let open = self.pos;
        self.expect_punct("{")?;
        let close = self.matching(open).ok_or_else(|| ParseError {
            span: self.toks[open].span,
            message: "unbalanced braces".into(),
        })?;
        let mut v = Vec::new();
        while self.pos < close {
            v.push(self.parse_statement_recovering(close));
        }
        self.pos = close + 1;
        Ok(v)
    }

    fn parse_statement(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let Some(tok) = self.peek() else {
            return err(span, "unexpected end of input");
        };
        let mk = |kind| Ok(Stmt { kind, span });
        if tok.is_punct(";") {
            self.pos += 1;
            return mk(StmtKind::Empty);
        }
        if tok.is_punct("{") {
            let body = self.parse_block_body()?;
            return mk(StmtKind::Block(body));
        }
        let Some(word) = tok.ident() else {
            let e = self.parse_expr()?;
            self.expect_punct(";")?;
            return mk(StmtKind::Expr(e));
        };
        match word {
            "if" => {
                self.pos += 1;
                self.expect_punct("(")?;
                let cond = self.parse_expr()?;
                self.expect_punct(")")?;
                let then = Box::new(self.parse_statement()?);
                let otherwise = if self.at_ident("else") {
                    self.pos += 1;
                    Some(Box::new(self.parse_statement()?))
                } else {
                    None
                };
                mk(StmtKind::If { cond, then, otherwise })
            }
            "while" => {
                self.pos += 1;
                self.expect_punct("(")?;
                let cond = self.parse_expr()?;
                self.expect_punct(")")?;
                let body = Box::new(self.parse_statement()?);
                mk(StmtKind::While { cond, body })
            }
            "do" => {
                self.pos += 1;
                let body = Box::new(self.parse_statement()?);
                if !self.at_ident("while") {
                    return err(self.span(), "expected `while` after do body");
                }
                self.pos += 1;
                self.expect_punct("(")?;
                let cond = self.parse_expr()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                mk(StmtKind::DoWhile { body, cond })
            }
            "for" => {
                self.pos += 1;
                self.expect_punct("(")?;
                let init = if self.eat_punct(";") {
                    None
                } else if self.looks_like_declaration() {
                    Some(Box::new(self.parse_declaration_stmt()?))
                } else {
                    let s = self.span();
                    let e = self.parse_expr()?;
                    self.expect_punct(";")?;
                    Some(Box::new(Stmt {
                        kind: StmtKind::Expr(e),
                        span: s,
                    }))
                };
                let cond = if self.at_punct(";") { None } else { Some(self.parse_expr()?) };
                self.expect_punct(";")?;
                let step = if self.at_punct(")") { None } else { Some(self.parse_expr()?) };
                self.expect_punct(")")?;
                let body = Box::new(self.parse_statement()?);
                mk(StmtKind::For { init, cond, step, body })
            }
            "switch" => {
                self.pos += 1;
                self.expect_punct("(")?;
                let scrutinee = self.parse_expr()?;
                self.expect_punct(")")?;
                let body = Box::new(self.parse_statement()?);
                mk(StmtKind::Switch { scrutinee, body })
            }
            "case" => {
                self.pos += 1;
                let value = self.parse_conditional()?;
                if self.eat_punct("...") {
                    // GNU case ranges
                    self.parse_conditional()?;
                }
                self.expect_punct(":")?;
                let body = Box::new(self.parse_label_target()?);
                mk(StmtKind::Case { value, body })
            }
            "default" if self.peek_at(1).is_some_and(|t| t.is_punct(":")) => {
                self.pos += 2;
                let body = Box::new(self.parse_label_target()?);
                mk(StmtKind::Default(body))
            }
            "break" => {
                self.pos += 1;
                self.expect_punct(";")?;
                mk(StmtKind::Break)
            }
            "continue" => {
                self.pos += 1;
                self.expect_punct(";")?;
                mk(StmtKind::Continue)
            }
            "return" => {
                self.pos += 1;
                let e = if self.at_punct(";") { None } else { Some(self.parse_expr()?) };
                self.expect_punct(";")?;
                mk(StmtKind::Return(e))
            }
            "goto" => {
                self.pos += 1;
                if self.at_punct("*") {
                    self.skip_to_semicolon();
                    self.unsupported.push((span, "computed goto".into()));
                    return mk(StmtKind::Opaque("computed goto".into()));
                }
                let label = self.expect_ident()?;
                self.expect_punct(";")?;
                mk(StmtKind::Goto(label))
            }
            "asm" | "__asm__" | "__asm" => {
                self.skip_to_semicolon();
                self.unsupported.push((span, "inline assembly".into()));
                mk(StmtKind::Opaque("inline assembly".into()))
            }
            _ if self.peek_at(1).is_some_and(|t| t.is_punct(":"))
                && !self.peek_at(2).is_some_and(|t| t.is_punct(":")) =>
            {
                let name = word.to_string();
                self.pos += 2;
                let body = Box::new(self.parse_label_target()?);
                mk(StmtKind::Label { name, body })
            }
            _ => {
                if let Some(intr) = intrinsics::statement_macro(word) {
                    return self.parse_caml_macro(word, intr, span);
                }
                if self.looks_like_declaration() {
                    return self.parse_declaration_stmt();
                }
                let e = self.parse_expr()?;
                self.expect_punct(";")?;
                mk(StmtKind::Expr(e))
            }
        }
    }

    /// Statement after a label; a label directly before `}` labels nothing.
    fn parse_label_target(&mut self) -> PResult<Stmt> {
        if self.at_punct("}") {
            return Ok(Stmt {
                kind: StmtKind::Empty,
                span: self.span(),
            });
        }
        self.parse_statement()
    }

    fn skip_to_semicolon(&mut self) {
        let mut depth = 0;
        while let Some(t) = self.peek() {
            self.pos += 1;
            if t.is_punct("(") {
                depth += 1;
            } else if t.is_punct(")") {
                depth -= 1;
            } else if depth == 0 && t.is_punct(";") {
                break;
            }
        }
    }

    fn parse_caml_macro(&mut self, word: &str, intr: Intrinsic, span: Span) -> PResult<Stmt> {
        self.pos += 1;
        let args = if self.at_punct("(") {
            self.pos += 1;
            self.parse_call_args()?
        } else {
            Vec::new()
        };
        self.eat_punct(";");
        let names = || -> Vec<String> {
            args.iter()
                .filter_map(|a| match &a.kind {
                    ExprKind::Ident(n) => Some(n.clone()),
                    _ => None,
                })
                .collect()
        };
        let kind = match intr {
            Intrinsic::CamlParam(_) | Intrinsic::CamlXParam(_) => {
                if word == "CAMLxparamN" {
                    StmtKind::CamlParam {
                        intrinsic: intr,
                        names: names().into_iter().take(1).collect(),
                    }
                } else {
                    StmtKind::CamlParam {
                        intrinsic: intr,
                        names: names(),
                    }
                }
            }
            Intrinsic::CamlLocal(_) => {
                let ns = names();
                if word == "CAMLlocalN" {
                    if let Some(n) = ns.first() {
                        self.locals.push((n.clone(), CType::CamlValue.pointer_to()));
                    }
                    StmtKind::CamlLocal {
                        names: ns.into_iter().take(1).collect(),
                    }
                } else {
                    for n in &ns {
                        self.locals.push((n.clone(), CType::CamlValue));
                    }
                    StmtKind::CamlLocal { names: ns }
                }
            }
            _ => {
                // CAMLreturnT(type, expr) carries the expression last
                let e = if word == "CAMLreturnT" {
                    args.into_iter().last()
                } else {
                    args.into_iter().next()
                };
                StmtKind::CamlReturn(e)
            }
        };
        Ok(Stmt { kind, span })
    }

    fn looks_like_declaration(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        let Some(s) = t.ident() else { return false };
        if TYPE_KEYWORDS.contains(&s)
            || matches!(s, "struct" | "union" | "enum" | "typedef" | "CAMLprim")
            || (IGNORED_SPECIFIERS.contains(&s) && s != "__extension__")
        {
            return true;
        }
        if self.is_type_name(s) {
            return !self.peek_at(1).is_some_and(|n| n.is_punct("(") || n.is_punct("=") || n.is_punct("->") || n.is_punct("."));
        }
        if intrinsics::expression_macro(s).is_some() || intrinsics::runtime_function(s).is_some() {
            return false;
        }
        // T x ...   or   T *x ...
        let mut k = 1;
        if self.peek_at(1).and_then(Token::ident).is_some() {
            return true;
        }
        while self.peek_at(k).is_some_and(|t| t.is_punct("*")) {
            k += 1;
        }
        k > 1
            && self.peek_at(k).and_then(Token::ident).is_some()
            && self
                .peek_at(k + 1)
                .is_some_and(|t| [";", "=", ",", "[", ")"].iter().any(|p| t.is_punct(p)))
    }

    fn parse_declaration_stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let (base, storage) = self.parse_specifiers()?;
        let mut decls = Vec::new();
        if !self.at_punct(";") {
            loop {
                let d = self.parse_declarator(base.clone())?;
                self.skip_attributes();
                let init = if self.eat_punct("=") {
                    Some(self.parse_initializer()?)
                } else {
                    None
                };
                if let Some(name) = d.name {
                    if storage.is_typedef {
                        self.typedefs.insert(name);
                    } else if d.params.is_none() {
                        self.locals.push((name.clone(), d.ty.clone()));
                        decls.push(Declarator {
                            name,
                            ty: d.ty,
                            init,
                            span: d.span,
                        });
                    }
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(";")?;
        Ok(Stmt {
            kind: StmtKind::Decl(decls),
            span,
        })
    }

    fn parse_initializer(&mut self) -> PResult<Expr> {
        if self.at_punct("{") {
            let span = self.span();
            self.pos += 1;
            let items = self.parse_init_list()?;
            return Ok(Expr::new(ExprKind::InitList(items), span));
        }
        self.parse_assignment()
    }

    /// Parses initializer items after `{` through the closing `}`.
    fn parse_init_list(&mut self) -> PResult<Vec<Expr>> {
        let mut items = Vec::new();
        loop {
            if self.eat_punct("}") {
                return Ok(items);
            }
            // designators: .field = / [idx] =
            loop {
                if self.at_punct(".") && self.peek_at(1).and_then(Token::ident).is_some() {
                    self.pos += 2;
                } else if self.at_punct("[") {
                    let close = self.matching(self.pos).ok_or_else(|| ParseError {
                        span: self.span(),
                        message: "unbalanced brackets".into(),
                    })?;
                    self.pos = close + 1;
                } else {
                    break;
                }
                if !self.eat_punct("=") {
                    break;
                }
            }
            items.push(self.parse_initializer()?);
            if !self.eat_punct(",") {
                self.expect_punct("}")?;
                return Ok(items);
            }
        }
    }

    // ---------------------------------------------------------------
    // expressions

    pub fn parse_expr(&mut self) -> PResult<Expr> {
        let first = self.parse_assignment()?;
        if !self.at_punct(",") {
            return Ok(first);
        }
        let span = first.span;
        let mut v = vec![first];
        while self.eat_punct(",") {
            v.push(self.parse_assignment()?);
        }
        Ok(Expr::new(ExprKind::Comma(v), span))
    }

    fn parse_assignment(&mut self) -> PResult<Expr> {
        let lhs = self.parse_conditional()?;
        let op = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Punct(p)) => match *p {
                "=" => Some(None),
                "+=" => Some(Some(BinaryOp::Add)),
                "-=" => Some(Some(BinaryOp::Sub)),
                "*=" => Some(Some(BinaryOp::Mul)),
                "/=" => Some(Some(BinaryOp::Div)),
                "%=" => Some(Some(BinaryOp::Rem)),
                "&=" => Some(Some(BinaryOp::BitAnd)),
                "|=" => Some(Some(BinaryOp::BitOr)),
                "^=" => Some(Some(BinaryOp::BitXor)),
                "<<=" => Some(Some(BinaryOp::Shl)),
                ">>=" => Some(Some(BinaryOp::Shr)),
                _ => None,
            },
            _ => None,
        };
        let Some(op) = op else { return Ok(lhs) };
        self.pos += 1;
        let rhs = self.parse_assignment()?;
        let span = lhs.span;
        Ok(Expr::new(
            ExprKind::Assign {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            span,
        ))
    }

    fn parse_conditional(&mut self) -> PResult<Expr> {
        let cond = self.parse_binary(0)?;
        if !self.eat_punct("?") {
            return Ok(cond);
        }
        let then = self.parse_expr()?;
        self.expect_punct(":")?;
        let otherwise = self.parse_conditional()?;
        let span = cond.span;
        Ok(Expr::new(
            ExprKind::Conditional {
                cond: Box::new(cond),
                then: Box::new(then),
                otherwise: Box::new(otherwise),
            },
            span,
        ))
    }

    fn parse_binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.parse_unary()?;
        while let Some(TokenKind::Punct(p)) = self.peek().map(|t| &t.kind) {
            let Some((op, prec)) = binary_op(p) else { break };
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.parse_binary(prec + 1)?;
            let span = lhs.span;
            lhs = Expr::new(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            );
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let Some(t) = self.peek() else {
            return err(span, "unexpected end of input in expression");
        };
        let unary = |op| -> Option<UnaryOp> { Some(op) };
        let op = match &t.kind {
            TokenKind::Punct("-") => unary(UnaryOp::Neg),
            TokenKind::Punct("+") => unary(UnaryOp::Plus),
            TokenKind::Punct("!") => unary(UnaryOp::Not),
            TokenKind::Punct("~") => unary(UnaryOp::BitNot),
            TokenKind::Punct("*") => unary(UnaryOp::Deref),
            TokenKind::Punct("&") => unary(UnaryOp::AddrOf),
            TokenKind::Punct("++") => unary(UnaryOp::PreInc),
            TokenKind::Punct("--") => unary(UnaryOp::PreDec),
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let operand = Box::new(self.parse_unary()?);
            return Ok(Expr::new(ExprKind::Unary { op, operand }, span));
        }
        if matches!(t.ident(), Some("sizeof" | "_Alignof" | "__alignof__" | "alignof")) {
            self.pos += 1;
            if self.at_punct("(") && self.is_cast_at(self.pos) {
                self.pos += 1;
                let ty = self.parse_type_name()?;
                self.expect_punct(")")?;
                return Ok(Expr::new(ExprKind::SizeofType(ty), span));
            }
            let e = self.parse_unary()?;
            return Ok(Expr::new(ExprKind::SizeofExpr(Box::new(e)), span));
        }
        if t.is_punct("(") && self.is_cast_at(self.pos) {
            self.pos += 1;
            let ty = self.parse_type_name()?;
            self.expect_punct(")")?;
            if self.eat_punct("{") {
                let init = self.parse_init_list()?;
                let lit = Expr::new(ExprKind::CompoundLiteral { ty, init }, span);
                return self.parse_postfix(lit);
            }
            let operand = Box::new(self.parse_unary()?);
            return Ok(Expr::new(ExprKind::Cast { ty, operand }, span));
        }
        let primary = self.parse_primary()?;
        self.parse_postfix(primary)
    }

    fn parse_call_args(&mut self) -> PResult<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat_punct(")") {
            return Ok(args);
        }
        loop {
            // CAMLreturnT and friends take a type as an argument
            if self.peek().is_some_and(|t| self.starts_type(t)) && !self.looks_like_expression_arg() {
                let span = self.span();
                let ty = self.parse_type_name()?;
                args.push(Expr::new(ExprKind::SizeofType(ty), span));
            } else {
                args.push(self.parse_assignment()?);
            }
            if self.eat_punct(")") {
                return Ok(args);
            }
            self.expect_punct(",")?;
        }
    }

    fn looks_like_expression_arg(&self) -> bool {
        self.peek()
            .and_then(Token::ident)
            .is_some_and(|s| !TYPE_KEYWORDS.contains(&s) && !matches!(s, "struct" | "union" | "enum" | "const"))
            && self.peek_at(1).is_some_and(|t| !t.is_punct("*") && t.ident().is_none())
    }

    fn parse_postfix(&mut self, mut e: Expr) -> PResult<Expr> {
        loop {
            let span = e.span;
            if self.eat_punct("(") {
                let args = self.parse_call_args()?;
                e = match &e.kind {
                    ExprKind::Ident(name) => match intrinsics::expression_macro(name) {
                        Some(intrinsic) => Expr::new(
                            ExprKind::Intrinsic {
                                intrinsic,
                                name: name.clone(),
                                args,
                            },
                            span,
                        ),
                        None => Expr::new(
                            ExprKind::Call {
                                callee: Box::new(e),
                                args,
                            },
                            span,
                        ),
                    },
                    _ => Expr::new(
                        ExprKind::Call {
                            callee: Box::new(e),
                            args,
                        },
                        span,
                    ),
                };
            } else if self.eat_punct("[") {
                let index = self.parse_expr()?;
                self.expect_punct("]")?;
                e = Expr::new(
                    ExprKind::Index {
                        base: Box::new(e),
                        index: Box::new(index),
                    },
                    span,
                );
            } else if self.at_punct(".") || self.at_punct("->") {
                let arrow = self.at_punct("->");
                self.pos += 1;
                let field = self.expect_ident()?;
                e = Expr::new(
                    ExprKind::Member {
                        base: Box::new(e),
                        field,
                        arrow,
                    },
                    span,
                );
            } else if self.eat_punct("++") {
                e = Expr::new(
                    ExprKind::Unary {
                        op: UnaryOp::PostInc,
                        operand: Box::new(e),
                    },
                    span,
                );
            } else if self.eat_punct("--") {
                e = Expr::new(
                    ExprKind::Unary {
                        op: UnaryOp::PostDec,
                        operand: Box::new(e),
                    },
                    span,
                );
            } else {
                return Ok(e);
            }
        }
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let Some(t) = self.peek() else {
            return err(span, "unexpected end of input in expression");
        };
        self.pos += 1;
        let kind = match &t.kind {
            TokenKind::Ident(n) => ExprKind::Ident(n.clone()),
            TokenKind::Int(v) | TokenKind::Char(v) => ExprKind::Int(*v),
            TokenKind::Float(s) => ExprKind::Float(s.clone()),
            TokenKind::Str(s) => {
                let mut s = s.clone();
                while let Some(TokenKind::Str(more)) = self.peek().map(|t| &t.kind) {
                    s.push_str(more);
                    self.pos += 1;
                }
                ExprKind::Str(s)
            }
            TokenKind::Punct("(") => {
                if self.at_punct("{") {
                    return err(span, "statement expressions are not supported");
                }
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                return Ok(e);
            }
            other => {
                let shown = Token {
                    kind: other.clone(),
                    span,
                    space_before: false,
                }
                .spelling();
                return err(span, format!("unexpected `{shown}` in expression"));
            }
        };
        Ok(Expr::new(kind, span))
    }
}

struct ParsedDeclarator {
    name: Option<String>,
    ty: CType,
    params: Option<(Vec<Param>, bool)>,
    span: Span,
}

fn keyword_type(words: &[&str]) -> CType {
    if words.contains(&"float") || words.contains(&"double") {
        return CType::Floating;
    }
    if words.contains(&"void") {
        return CType::Unknown("void".into());
    }
    if words.contains(&"char") || words.contains(&"_Bool") {
        return CType::Integer(8);
    }
    if words.contains(&"short") {
        return CType::Integer(16);
    }
    if words.contains(&"long") {
        return CType::Integer(64);
    }
    CType::Integer(32)
}

fn binary_op(p: &str) -> Option<(BinaryOp, u8)> {
    Some(match p {
        "||" => (BinaryOp::LogOr, 1),
        "&&" => (BinaryOp::LogAnd, 2),
        "|" => (BinaryOp::BitOr, 3),
        "^" => (BinaryOp::BitXor, 4),
        "&" => (BinaryOp::BitAnd, 5),
        "==" => (BinaryOp::Eq, 6),
        "!=" => (BinaryOp::Ne, 6),
        "<" => (BinaryOp::Lt, 7),
        ">" => (BinaryOp::Gt, 7),
        "<=" => (BinaryOp::Le, 7),
        ">=" => (BinaryOp::Ge, 7),
        "<<" => (BinaryOp::Shl, 8),
        ">>" => (BinaryOp::Shr, 8),
        "+" => (BinaryOp::Add, 9),
        "-" => (BinaryOp::Sub, 9),
        "*" => (BinaryOp::Mul, 10),
        "/" => (BinaryOp::Div, 10),
        "%" => (BinaryOp::Rem, 10),
        _ => return None,
    })
}

fn check_balanced(toks: &[Token]) -> PResult<()> {
    let mut stack: Vec<(&str, Span)> = Vec::new();
    for t in toks {
        if let TokenKind::Punct(p) = &t.kind {
            match *p {
                "(" | "[" | "{" => stack.push((p, t.span)),
                ")" | "]" | "}" => {
                    let want = match *p {
                        ")" => "(",
                        "]" => "[",
                        _ => "{",
                    };
                    match stack.pop() {
                        Some((o, _)) if o == want => {}
                        _ => return err(t.span, format!("unbalanced `{p}`")),
                    }
                }
                _ => {}
            }
        }
    }
    match stack.pop() {
        Some((o, span)) => err(span, format!("unbalanced `{o}`")),
        None => Ok(()),
    }
}

fn abbreviate(s: &str) -> String {
    const MAX: usize = 60;
    if s.chars().count() <= MAX {
        s.to_string()
    } else {
        let cut: String = s.chars().take(MAX).collect();
        format!("{cut}...")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c::lexer::tokenize;

    fn parse(src: &str) -> ParsedItems {
        parse_tokens(&tokenize(src).unwrap())
    }

    fn expr(src: &str) -> Expr {
        let toks = tokenize(src).unwrap();
        let mut p = Parser {
            toks: &toks,
            pos: 0,
            typedefs: BTreeSet::new(),
            locals: Vec::new(),
            unsupported: Vec::new(),
        };
        let e = p.parse_expr().unwrap();
        assert_eq!(p.pos, toks.len(), "trailing tokens in {src}");
        e
    }

    #[test]
    fn expressions_round_trip_through_display() {
        for (src, shown) in [
            ("a + b * c", "a + b * c"),
            ("(xenevtchn_handle *)(xce)", "(xenevtchn_handle *)xce"),
            (
                "(*((xenevtchn_handle **)Data_custom_val(h)))",
                "*(xenevtchn_handle **)Data_custom_val(h)",
            ),
            ("intf->addr = f(x, intf->len)", "intf->addr = f(x, intf->len)"),
            ("(struct mmap_interface *) result", "(struct mmap_interface *)result"),
            ("(value) xce", "(value)xce"),
            ("x ? y : z", "x ? y : z"),
            ("sizeof(struct mmap_interface)", "sizeof(struct mmap_interface)"),
            ("(x) + y", "x + y"),
            ("(struct s){ ptr, len }", "(struct s){ptr, len}"),
            ("a[i++]", "a[i++]"),
            ("PROT_READ|PROT_WRITE", "PROT_READ | PROT_WRITE"),
        ] {
            assert_eq!(expr(src).to_string(), shown, "{src}");
        }
    }

    #[test]
    fn ffi_macros_become_intrinsics() {
        let e = expr("Int_val(port)");
        assert!(matches!(e.kind, ExprKind::Intrinsic { intrinsic: Intrinsic::IntVal, .. }));
        let e = expr("caml_failwith(\"x\")");
        assert_eq!(e.call_target(), Some("caml_failwith"));
    }

    #[test]
    fn function_definition_with_caml_macros() {
        let items = parse(
            r#"
CAMLprim value stub_eventchn_notify(value xce, value port)
{
        CAMLparam2(xce, port);
        int rc;

        caml_enter_blocking_section();
        rc = xenevtchn_notify(_H(xce), Int_val(port));
        caml_leave_blocking_section();

        if (rc == -1)
                caml_failwith("evtchn notify failed");

        CAMLreturn(Val_unit);
}
"#,
        );
        assert!(items.errors.is_empty(), "{:?}", items.errors);
        let f = &items.functions[0];
        assert_eq!(f.name(), "stub_eventchn_notify");
        assert!(f.is_camlprim());
        assert_eq!(f.params().len(), 2);
        assert!(f.params().iter().all(|p| p.ty.is_value()));
        assert_eq!(f.sig.span, Span { line: 2, column: 16 });
        assert!(matches!(
            &f.body[0].kind,
            StmtKind::CamlParam { intrinsic: Intrinsic::CamlParam(2), names } if names == &["xce", "port"]
        ));
        assert_eq!(f.var_type("rc"), Some(&CType::Integer(32)));
        assert!(matches!(f.body.last().unwrap().kind, StmtKind::CamlReturn(Some(_))));
    }

    #[test]
    fn declarations_versus_expressions() {
        let items = parse(
            "void f(value v) {\n xenevtchn_handle *xce;\n xc_interface *xch = g(v);\n a * b;\n struct mmap_interface *intf;\n size_t n = 3, m;\n foo(x);\n}",
        );
        let f = &items.functions[0];
        assert_eq!(f.var_type("xce"), Some(&CType::Unknown("xenevtchn_handle".into()).pointer_to()));
        assert_eq!(f.var_type("xch"), Some(&CType::Unknown("xc_interface".into()).pointer_to()));
        assert_eq!(f.var_type("intf"), Some(&CType::Record("mmap_interface".into()).pointer_to()));
        assert_eq!(f.var_type("m"), Some(&CType::Integer(64)));
        // `a * b;` reads as a declaration of `b`, as in C with a typedef `a`
        assert!(matches!(f.body[2].kind, StmtKind::Decl(_)), "{:?}", f.body[2]);
        assert!(matches!(f.body[5].kind, StmtKind::Expr(_)));
        assert!(!f.is_camlprim());
    }

    #[test]
    fn void_parameter_list_is_empty() {
        let items = parse("CAMLprim value stub_eventchn_init(void) { CAMLparam0(); CAMLlocal1(result); CAMLreturn(result); }");
        let f = &items.functions[0];
        assert!(f.params().is_empty());
        assert_eq!(f.var_type("result"), Some(&CType::CamlValue));
    }

    #[test]
    fn argv_form_parameters() {
        let items = parse("CAMLprim value add_nat_bytecode(value *argv, int argn) { return Val_unit; }");
        let ps = items.functions[0].params();
        assert_eq!(ps[0].ty, CType::CamlValue.pointer_to());
        assert_eq!(ps[1].ty, CType::Integer(32));
    }

    #[test]
    fn top_level_items_are_skimmed() {
        let items = parse(
            r#"
typedef struct foo foo_t;
typedef int (*cb_t)(int);
static struct custom_operations ops = { "x", custom_finalize_default, { 1, 2 } };
static value *registered = NULL;
CAMLprim value add_nat_bytecode(value *argv, int argn);
int helper(foo_t *p) { foo_t *q = p; return 0; }
"#,
        );
        assert!(items.errors.is_empty(), "{:?}", items.errors);
        assert!(items.typedefs.contains("foo_t") && items.typedefs.contains("cb_t"));
        assert_eq!(items.globals.get("registered"), Some(&CType::CamlValue.pointer_to()));
        assert!(items.globals.contains_key("ops"));
        assert_eq!(items.prototypes[0].name, "add_nat_bytecode");
        assert_eq!(items.prototypes[0].params.len(), 2);
        assert_eq!(items.functions[0].var_type("q"), Some(&CType::Unknown("foo_t".into()).pointer_to()));
    }

    #[test]
    fn unbalanced_braces_are_fatal_for_that_function_only() {
        let items = parse("int ok(void) { return 1; }\nint bad(void) { if (x) { return 2; }\n");
        assert_eq!(items.functions.len(), 1);
        assert_eq!(items.errors.len(), 1);
        let items = parse("int bad(void) { f(x; }\nint ok(void) { return 1; }");
        assert_eq!(items.functions.len(), 1);
        assert_eq!(items.functions[0].name(), "ok");
        assert_eq!(items.errors.len(), 1);
    }

    #[test]
    fn unknown_statements_become_opaque() {
        let items = parse("int f(void) { __asm__ volatile(\"nop\"); x = ({ 1; }); return 0; }");
        let f = &items.functions[0];
        assert!(matches!(f.body[0].kind, StmtKind::Opaque(_)));
        assert!(matches!(f.body[1].kind, StmtKind::Opaque(_)));
        assert!(matches!(f.body[2].kind, StmtKind::Return(_)));
        assert_eq!(items.unsupported.len(), 2);
    }

    #[test]
    fn control_flow_statements() {
        let items = parse(
            r#"int f(int n) {
  int i, acc = 0;
  for (i = 0; i < n; i++) { if (i == 3) continue; acc += i; }
  for (int j = 0; ; j++) break;
  while (n--) acc--;
  do { acc++; } while (acc < 0);
  switch (n) { case 1: case 2: acc = 1; break; default: acc = 2; }
  goto out;
out:
  return acc;
}"#,
        );
        assert!(items.errors.is_empty(), "{:?}", items.errors);
        assert!(items.unsupported.is_empty(), "{:?}", items.unsupported);
        assert_eq!(items.functions[0].body.len(), 8);
    }

    #[test]
    fn caml_return_variants() {
        let items = parse("CAMLprim value f(value x) { CAMLparam1(x); if (x) CAMLreturn0; CAMLreturnT(int, 3); }");
        let f = &items.functions[0];
        assert!(items.errors.is_empty());
        match &f.body[2].kind {
            StmtKind::CamlReturn(Some(e)) => assert_eq!(e.to_string(), "3"),
            other => panic!("{other:?}"),
        }
    }
}
