//! File-local preprocessing.
//!
//! Only macros defined in the file itself are expanded; `#include`d headers
//! are recorded and never read. Expanded tokens inherit the location of the
//! macro invocation so diagnostics point at the use site.

use std::collections::BTreeMap;

use super::lexer::{tokenize, LexError, Span, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroDef {
    pub name: String,
    /// `None` for object-like macros.
    pub params: Option<Vec<String>>,
    pub variadic: bool,
    pub body: Vec<Token>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreprocessError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{span}: macro `{name}` expands to itself")]
    RecursiveMacro { name: String, span: Span },
    #[error("{span}: {message}")]
    Directive { span: Span, message: String },
}

#[derive(Debug, Clone, Default)]
pub struct Preprocessed {
    /// Expanded token stream; directives removed.
    pub tokens: Vec<Token>,
    pub macros: BTreeMap<String, MacroDef>,
    pub includes: Vec<String>,
    /// Conditional-compilation choices worth reporting.
    pub notes: Vec<(Span, String)>,
}

impl Preprocessed {
    /// Expanded source text, one output line per input line.
    pub fn text(&self) -> String {
        let mut out = String::new();
        let mut line = 1;
        for t in &self.tokens {
            while line < t.span.line {
                out.push('\n');
                line += 1;
            }
            if !out.is_empty() && !out.ends_with('\n') {
                out.push(' ');
            }
            out.push_str(&t.spelling());
        }
        out
    }
}

struct Cond {
    /// Whether the enclosing region is live.
    parent_live: bool,
    /// Whether the current branch is live.
    live: bool,
    /// Whether some earlier branch of this chain was live.
    taken: bool,
}

const MAX_EXPANSION_DEPTH: usize = 64;

pub fn preprocess_local(source: &str) -> Result<Preprocessed, PreprocessError> {
    let raw = tokenize(source)?;
    let mut out = Preprocessed::default();
    let mut conds: Vec<Cond> = Vec::new();
    let mut pending: Vec<Token> = Vec::new();

    let live = |conds: &Vec<Cond>| conds.last().is_none_or(|c| c.live);

    for tok in raw {
        let TokenKind::Directive(text) = &tok.kind else {
            if live(&conds) {
                pending.push(tok);
            }
            continue;
        };
        // flush ordinary tokens so macro definitions take effect in order
        if !pending.is_empty() {
            let chunk = std::mem::take(&mut pending);
            out.tokens.extend(expand(&chunk, &out.macros)?);
        }
        let span = tok.span;
        let (word, rest) = split_directive(text);
        match word {
            "if" | "ifdef" | "ifndef" => {
                let parent_live = live(&conds);
                let value = if !parent_live {
                    false
                } else {
                    match word {
                        "ifdef" => out.macros.contains_key(first_word(rest)),
                        "ifndef" => !out.macros.contains_key(first_word(rest)),
                        _ => eval_condition(rest, &out.macros, span, &mut out.notes),
                    }
                };
                if parent_live && !is_literal_condition(word, rest) {
                    out.notes.push((
                        span,
                        format!(
                            "#{word} {rest}: analysing only the branch selected with externally defined macros treated as undefined"
                        ),
                    ));
                }
                conds.push(Cond {
                    parent_live,
                    live: value,
                    taken: value,
                });
            }
            "elif" | "elifdef" | "elifndef" => {
                let Some(c) = conds.last_mut() else {
                    return Err(unmatched(span, word));
                };
                if c.taken || !c.parent_live {
                    c.live = false;
                } else {
                    let v = match word {
                        "elifdef" => out.macros.contains_key(first_word(rest)),
                        "elifndef" => !out.macros.contains_key(first_word(rest)),
                        _ => eval_condition(rest, &out.macros, span, &mut out.notes),
                    };
                    c.live = v;
                    c.taken = v;
                }
            }
            "else" => {
                let Some(c) = conds.last_mut() else {
                    return Err(unmatched(span, word));
                };
                c.live = c.parent_live && !c.taken;
                c.taken = true;
            }
            "endif" => {
                if conds.pop().is_none() {
                    return Err(unmatched(span, word));
                }
            }
            _ if !live(&conds) => {}
            "define" => {
                let def = parse_define(rest, span)?;
                out.macros.insert(def.name.clone(), def);
            }
            "undef" => {
                out.macros.remove(first_word(rest));
            }
            "include" | "include_next" => {
                let name = rest
                    .trim()
                    .trim_start_matches(['<', '"'])
                    .trim_end_matches(['>', '"'])
                    .to_string();
                out.includes.push(name);
            }
            // #pragma, #error, #warning, #line, null directive
            _ => {}
        }
    }
    if let Some(_c) = conds.last() {
        return Err(PreprocessError::Directive {
            span: Span::default(),
            message: "unterminated conditional directive".into(),
        });
    }
    out.tokens.extend(expand(&pending, &out.macros)?);
    Ok(out)
}

fn unmatched(span: Span, word: &str) -> PreprocessError {
    PreprocessError::Directive {
        span,
        message: format!("#{word} without matching #if"),
    }
}

fn split_directive(text: &str) -> (&str, &str) {
    let text = text.trim_start();
    let end = text
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(text.len());
    (&text[..end], text[end..].trim())
}

fn first_word(s: &str) -> &str {
    s.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .next()
        .unwrap_or("")
}

fn is_literal_condition(word: &str, rest: &str) -> bool {
    word == "if" && matches!(rest.trim(), "0" | "1")
}

fn parse_define(rest: &str, span: Span) -> Result<MacroDef, PreprocessError> {
    let toks = tokenize(rest).map_err(|e| PreprocessError::Directive {
        span,
        message: format!("malformed #define: {}", e.message),
    })?;
    let bad = |m: &str| PreprocessError::Directive {
        span,
        message: format!("malformed #define: {m}"),
    };
    let name = toks
        .first()
        .and_then(Token::ident)
        .ok_or_else(|| bad("missing macro name"))?
        .to_string();
    let mut i = 1;
    let mut params = None;
    let mut variadic = false;
    if toks.get(1).is_some_and(|t| t.is_punct("(") && !t.space_before) {
        let mut ps = Vec::new();
        i = 2;
        loop {
            let t = toks.get(i).ok_or_else(|| bad("unterminated parameter list"))?;
            if t.is_punct(")") {
                i += 1;
                break;
            } else if t.is_punct(",") {
            } else if t.is_punct("...") {
                variadic = true;
            } else if let Some(p) = t.ident() {
                ps.push(p.to_string());
            } else {
                return Err(bad("unexpected token in parameter list"));
            }
            i += 1;
        }
        params = Some(ps);
    }
    let body = toks[i..]
        .iter()
        .cloned()
        .map(|mut t| {
            t.span = span;
            t
        })
        .collect();
    Ok(MacroDef {
        name,
        params,
        variadic,
        body,
        span,
    })
}

pub fn expand(tokens: &[Token], macros: &BTreeMap<String, MacroDef>) -> Result<Vec<Token>, PreprocessError> {
    let mut active = Vec::new();
    expand_with(tokens, macros, &mut active)
}

fn expand_with(
    tokens: &[Token],
    macros: &BTreeMap<String, MacroDef>,
    active: &mut Vec<String>,
) -> Result<Vec<Token>, PreprocessError> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        let Some(def) = tok.ident().and_then(|n| macros.get(n)) else {
            out.push(tok.clone());
            i += 1;
            continue;
        };
        if active.iter().any(|a| a == &def.name) || active.len() >= MAX_EXPANSION_DEPTH {
            let name = active.first().cloned().unwrap_or_else(|| def.name.clone());
            return Err(PreprocessError::RecursiveMacro {
                name,
                span: tok.span,
            });
        }
        let use_span = tok.span;
        let substituted = match &def.params {
            None => {
                i += 1;
                relocate(&def.body, use_span)
            }
            Some(params) => {
                let Some((args, next)) = collect_args(tokens, i + 1) else {
                    // function-like macro name without arguments is left alone
                    out.push(tok.clone());
                    i += 1;
                    continue;
                };
                i = next;
                let mut expanded_args = Vec::with_capacity(args.len());
                for a in &args {
                    expanded_args.push(expand_with(a, macros, active)?);
                }
                substitute(def, params, &args, &expanded_args, use_span)
            }
        };
        active.push(def.name.clone());
        let rescanned = expand_with(&substituted, macros, active)?;
        active.pop();
        out.extend(rescanned);
    }
    Ok(out)
}

fn relocate(body: &[Token], span: Span) -> Vec<Token> {
    body.iter()
        .cloned()
        .map(|mut t| {
            t.span = span;
            t
        })
        .collect()
}

/// Collects the parenthesised arguments starting at `tokens[open]`. Returns
/// the argument token lists and the index after the closing paren.
fn collect_args(tokens: &[Token], open: usize) -> Option<(Vec<Vec<Token>>, usize)> {
    if !tokens.get(open)?.is_punct("(") {
        return None;
    }
    let mut depth = 0usize;
    let mut args = vec![Vec::new()];
    for (k, t) in tokens.iter().enumerate().skip(open) {
        if t.is_punct("(") {
            depth += 1;
            if depth == 1 {
                continue;
            }
        } else if t.is_punct(")") {
            depth -= 1;
            if depth == 0 {
                if args.len() == 1 && args[0].is_empty() {
                    args.clear();
                }
                return Some((args, k + 1));
            }
        } else if t.is_punct(",") && depth == 1 {
            args.push(Vec::new());
            continue;
        }
        args.last_mut().unwrap().push(t.clone());
    }
    None
}

fn substitute(
    def: &MacroDef,
    params: &[String],
    raw_args: &[Vec<Token>],
    expanded_args: &[Vec<Token>],
    span: Span,
) -> Vec<Token> {
    let lookup = |name: &str| -> Option<usize> {
        if def.variadic && name == "__VA_ARGS__" {
            return Some(params.len());
        }
        params.iter().position(|p| p == name)
    };
    let arg_tokens = |idx: usize, raw: bool| -> Vec<Token> {
        let src = if raw { raw_args } else { expanded_args };
        if idx < params.len() || !def.variadic {
            return src.get(idx).cloned().unwrap_or_default();
        }
        // __VA_ARGS__ re-joins the trailing arguments with commas
        let mut v = Vec::new();
        for (n, a) in src.iter().enumerate().skip(params.len()) {
            if n > params.len() {
                v.push(Token {
                    kind: TokenKind::Punct(","),
                    span,
                    space_before: false,
                });
            }
            v.extend(a.iter().cloned());
        }
        v
    };

    let body = &def.body;
    let mut out: Vec<Token> = Vec::new();
    let mut k = 0;
    while k < body.len() {
        let t = &body[k];
        if t.is_punct("#") {
            if let Some(idx) = body.get(k + 1).and_then(Token::ident).and_then(lookup) {
                let text = arg_tokens(idx, true)
                    .iter()
                    .map(Token::spelling)
                    .collect::<Vec<_>>()
                    .join(" ");
                out.push(Token {
                    kind: TokenKind::Str(text),
                    span,
                    space_before: true,
                });
                k += 2;
                continue;
            }
        }
        if t.is_punct("##") {
            k += 1;
            let Some(rhs) = body.get(k) else { break };
            let rhs_toks = match rhs.ident().and_then(lookup) {
                Some(idx) => arg_tokens(idx, true),
                None => vec![rhs.clone()],
            };
            paste(&mut out, rhs_toks, span);
            k += 1;
            continue;
        }
        let next_is_paste = body.get(k + 1).is_some_and(|n| n.is_punct("##"));
        match t.ident().and_then(lookup) {
            Some(idx) => out.extend(arg_tokens(idx, next_is_paste)),
            None => {
                let mut t = t.clone();
                t.span = span;
                out.push(t);
            }
        }
        k += 1;
    }
    out
}

fn paste(out: &mut Vec<Token>, rhs: Vec<Token>, span: Span) {
    let mut rhs = rhs.into_iter();
    let Some(first) = rhs.next() else { return };
    match out.pop() {
        Some(lhs) => {
            let joined = format!("{}{}", lhs.spelling(), first.spelling());
            match tokenize(&joined) {
                Ok(mut toks) if toks.len() == 1 => {
                    let mut t = toks.remove(0);
                    t.span = span;
                    out.push(t);
                }
                _ => {
                    out.push(lhs);
                    out.push(first);
                }
            }
        }
        None => out.push(first),
    }
    out.extend(rhs);
}

/// Evaluates an `#if` condition. Identifiers that are not file-local macros
/// count as 0, as do conditions that fail to evaluate.
fn eval_condition(
    expr: &str,
    macros: &BTreeMap<String, MacroDef>,
    span: Span,
    notes: &mut Vec<(Span, String)>,
) -> bool {
    let Ok(toks) = tokenize(expr) else {
        notes.push((span, format!("could not evaluate `#if {expr}`; treating it as false")));
        return false;
    };
    // resolve `defined` before expansion
    let mut resolved = Vec::new();
    let mut k = 0;
    while k < toks.len() {
        if toks[k].ident() == Some("defined") {
            let (name, next) = if toks.get(k + 1).is_some_and(|t| t.is_punct("(")) {
                (toks.get(k + 2).and_then(Token::ident), k + 4)
            } else {
                (toks.get(k + 1).and_then(Token::ident), k + 2)
            };
            let v = name.is_some_and(|n| macros.contains_key(n));
            resolved.push(Token {
                kind: TokenKind::Int(i128::from(v)),
                span,
                space_before: true,
            });
            k = next;
        } else {
            resolved.push(toks[k].clone());
            k += 1;
        }
    }
    let expanded = expand(&resolved, macros).unwrap_or(resolved);
    let mut p = CondParser { toks: &expanded, pos: 0 };
    match p.ternary() {
        Some(v) if p.pos == expanded.len() => v != 0,
        _ => {
            notes.push((span, format!("could not evaluate `#if {expr}`; treating it as false")));
            false
        }
    }
}

struct CondParser<'a> {
    toks: &'a [Token],
    pos: usize,
}

impl CondParser<'_> {
    fn eat(&mut self, p: &str) -> bool {
        if self.toks.get(self.pos).is_some_and(|t| t.is_punct(p)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ternary(&mut self) -> Option<i128> {
        let c = self.binary(0)?;
        if self.eat("?") {
            let a = self.ternary()?;
            if !self.eat(":") {
                return None;
            }
            let b = self.ternary()?;
            return Some(if c != 0 { a } else { b });
        }
        Some(c)
    }

    fn binary(&mut self, min_prec: u8) -> Option<i128> {
        const OPS: [(&str, u8); 18] = [
            ("||", 1), ("&&", 2), ("|", 3), ("^", 4), ("&", 5), ("==", 6), ("!=", 6),
            ("<", 7), (">", 7), ("<=", 7), (">=", 7), ("<<", 8), (">>", 8), ("+", 9),
            ("-", 9), ("*", 10), ("/", 10), ("%", 10),
        ];
        let mut lhs = self.unary()?;
        while let Some(TokenKind::Punct(p)) = self.toks.get(self.pos).map(|t| &t.kind) {
            let Some(&(op, prec)) = OPS.iter().find(|(o, _)| o == p) else { break };
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = match op {
                "||" => i128::from(lhs != 0 || rhs != 0),
                "&&" => i128::from(lhs != 0 && rhs != 0),
                "|" => lhs | rhs,
                "^" => lhs ^ rhs,
                "&" => lhs & rhs,
                "==" => i128::from(lhs == rhs),
                "!=" => i128::from(lhs != rhs),
                "<" => i128::from(lhs < rhs),
                ">" => i128::from(lhs > rhs),
                "<=" => i128::from(lhs <= rhs),
                ">=" => i128::from(lhs >= rhs),
                "<<" => lhs.checked_shl(u32::try_from(rhs).ok()?)?,
                ">>" => lhs.checked_shr(u32::try_from(rhs).ok()?)?,
                "+" => lhs.checked_add(rhs)?,
                "-" => lhs.checked_sub(rhs)?,
                "*" => lhs.checked_mul(rhs)?,
                "/" => lhs.checked_div(rhs)?,
                _ => lhs.checked_rem(rhs)?,
            };
        }
        Some(lhs)
    }

    fn unary(&mut self) -> Option<i128> {
        if self.eat("!") {
            return Some(i128::from(self.unary()? == 0));
        }
        if self.eat("-") {
            return self.unary().map(|v| -v);
        }
        if self.eat("+") {
            return self.unary();
        }
        if self.eat("~") {
            return self.unary().map(|v| !v);
        }
        if self.eat("(") {
            let v = self.ternary()?;
            return self.eat(")").then_some(v);
        }
        let t = self.toks.get(self.pos)?;
        self.pos += 1;
        match &t.kind {
            TokenKind::Int(v) | TokenKind::Char(v) => Some(*v),
            TokenKind::Ident(_) => Some(0),
            _ => None,
        }
    }
}
