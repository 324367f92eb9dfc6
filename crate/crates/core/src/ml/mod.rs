//! Extraction of `external` primitive declarations from OCaml sources.

mod lexer;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diagnostic::Location;
use lexer::{tokenize, Tok, Token};

/// How one argument (or the result) crosses the OCaml/C boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgKind {
    BoxedValue,
    UnboxedFloat,
    UnboxedInt32,
    UnboxedInt64,
    UnboxedNativeint,
    UntaggedInt,
}

impl ArgKind {
    pub fn is_boxed(self) -> bool {
        self == ArgKind::BoxedValue
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attr {
    Unboxed,
    Untagged,
    Noalloc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalDecl {
    /// Dot-separated module path plus the value name.
    pub ocaml_name: String,
    pub byte_name: String,
    pub native_name: Option<String>,
    pub arity: usize,
    pub arg_kinds: Vec<ArgKind>,
    pub return_kind: ArgKind,
    pub attrs: BTreeSet<Attr>,
    pub source_loc: Location,
}

impl ExternalDecl {
    /// `%`-prefixed names are compiler builtins, not C symbols.
    pub fn is_compiler_builtin(&self) -> bool {
        self.byte_name.starts_with('%')
    }

    /// The C symbols this declaration requires, bytecode name first.
    pub fn c_symbols(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.byte_name.as_str()).chain(self.native_name.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlParseError {
    pub location: Location,
    pub message: String,
}

impl fmt::Display for MlParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Result of scanning one OCaml file: declarations that parsed, plus one
/// error per malformed declaration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MlParse {
    pub decls: Vec<ExternalDecl>,
    pub errors: Vec<MlParseError>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeExprError {
    #[error("unbalanced parentheses in type expression")]
    Unbalanced,
    #[error("malformed type expression: {0}")]
    Lex(String),
}

/// Counts the parameters of an external's type: the `->` separators that
/// sit outside any parentheses, brackets or object type.
pub fn compute_arity(type_expr: &str) -> Result<usize, TypeExprError> {
    let (tokens, err) = tokenize(type_expr);
    if let Some(e) = err {
        return Err(TypeExprError::Lex(e.message));
    }
    Ok(split_top_level_arrows(&tokens)?.len() - 1)
}

/// Splits a type into its arrow-separated segments. Labels stay attached to
/// their segment.
fn split_top_level_arrows(tokens: &[Token]) -> Result<Vec<&[Token]>, TypeExprError> {
    let mut depth = 0usize;
    let mut segments = Vec::new();
    let mut seg_start = 0;
    for (i, t) in tokens.iter().enumerate() {
        match &t.tok {
            Tok::LParen | Tok::LBracket | Tok::LBrace | Tok::AttrOpen(_) => depth += 1,
            Tok::Op(op) if op == "<" || op == "[<" || op == "[>" => depth += 1,
            Tok::RParen | Tok::RBracket | Tok::RBrace => {
                depth = depth.checked_sub(1).ok_or(TypeExprError::Unbalanced)?;
            }
            Tok::Op(op) if op == ">" => {
                depth = depth.checked_sub(1).ok_or(TypeExprError::Unbalanced)?;
            }
            Tok::Arrow if depth == 0 => {
                segments.push(&tokens[seg_start..i]);
                seg_start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(TypeExprError::Unbalanced);
    }
    segments.push(&tokens[seg_start..]);
    Ok(segments)
}

/// Structure-level keywords that can never appear inside an external's type.
fn ends_item(tok: &Tok) -> bool {
    match tok {
        Tok::DoubleSemi => true,
        Tok::Ident(s) => matches!(
            s.as_str(),
            "let" | "external" | "type" | "module" | "open" | "include" | "val" | "end"
                | "exception" | "class" | "struct" | "sig"
        ),
        _ => false,
    }
}

struct Frame {
    name: Option<String>,
}

/// Extracts every `external` declaration from `source`, in source order.
pub fn parse_ml_externals(source: &str, file_name: &str) -> MlParse {
    let (tokens, lex_err) = tokenize(source);
    let mut out = MlParse::default();
    let mut frames: Vec<Frame> = Vec::new();
    let mut pending_module: Option<(String, usize)> = None;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        match &t.tok {
            Tok::Ident(kw) if kw == "module" => {
                let mut j = i + 1;
                while matches!(&tokens.get(j).map(|t| &t.tok), Some(Tok::Ident(s)) if s == "rec" || s == "type")
                {
                    j += 1;
                }
                if let Some(Tok::Ident(name)) = tokens.get(j).map(|t| &t.tok) {
                    if name.starts_with(|c: char| c.is_ascii_uppercase()) {
                        pending_module = Some((name.clone(), frames.len()));
                    }
                }
                i = j;
                continue;
            }
            Tok::Ident(kw) if kw == "struct" || kw == "sig" => {
                let name = match &pending_module {
                    Some((n, level)) if *level == frames.len() => Some(n.clone()),
                    _ => None,
                };
                if kw == "struct" {
                    pending_module = None;
                }
                frames.push(Frame { name });
            }
            Tok::Ident(kw) if kw == "begin" || kw == "object" => frames.push(Frame { name: None }),
            Tok::Ident(kw) if kw == "end" => {
                frames.pop();
            }
            Tok::Ident(kw)
                if matches!(
                    kw.as_str(),
                    "let" | "type" | "open" | "include" | "exception" | "val"
                ) =>
            {
                if matches!(&pending_module, Some((_, level)) if *level == frames.len()) {
                    pending_module = None;
                }
            }
            Tok::Ident(kw) if kw == "external" => {
                let path: Vec<&str> = frames.iter().filter_map(|f| f.name.as_deref()).collect();
                let (next, result) = parse_external(source, &tokens, i, file_name, &path);
                match result {
                    Ok(d) => out.decls.push(d),
                    Err(e) => out.errors.push(e),
                }
                i = next.max(i + 1);
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    if let Some(e) = lex_err {
        out.errors.push(MlParseError {
            location: Location::new(file_name, e.line, e.column),
            message: e.message,
        });
    }
    out
}

/// Parses the external starting at `tokens[start]`. Returns the index just
/// past the declaration (or the resynchronisation point on error).
fn parse_external(
    source: &str,
    tokens: &[Token],
    start: usize,
    file: &str,
    module_path: &[&str],
) -> (usize, Result<ExternalDecl, MlParseError>) {
    let kw = &tokens[start];
    let loc = Location::new(file, kw.line, kw.column);
    let fail = |at: usize, msg: &str| {
        let t = tokens.get(at).unwrap_or(kw);
        MlParseError {
            location: Location::new(file, t.line, t.column),
            message: format!("malformed external: {msg}"),
        }
    };

    let mut i = start + 1;
    let name = match tokens.get(i).map(|t| &t.tok) {
        Some(Tok::Ident(n)) => {
            i += 1;
            n.clone()
        }
        Some(Tok::LParen) => {
            // operator name: ( op )
            let mut op = String::new();
            i += 1;
            while let Some(t) = tokens.get(i) {
                if t.tok == Tok::RParen {
                    break;
                }
                op.push_str(&source[t.start..t.end]);
                i += 1;
            }
            if tokens.get(i).map(|t| &t.tok) != Some(&Tok::RParen) {
                return (i, Err(fail(start, "unterminated operator name")));
            }
            i += 1;
            format!("( {op} )")
        }
        _ => return (i, Err(fail(i, "missing name"))),
    };

    if tokens.get(i).map(|t| &t.tok) != Some(&Tok::Colon) {
        return (i, Err(fail(i, "missing `:` after name")));
    }
    i += 1;
    let type_start = i;
    let mut depth = 0i64;
    loop {
        let Some(t) = tokens.get(i) else {
            return (i, Err(fail(start, "missing `=` before end of input")));
        };
        match &t.tok {
            Tok::Eq if depth == 0 => break,
            Tok::LParen | Tok::LBracket | Tok::LBrace | Tok::AttrOpen(_) => depth += 1,
            Tok::RParen | Tok::RBracket | Tok::RBrace => {
                depth -= 1;
                if depth < 0 {
                    return (i + 1, Err(fail(i, "unbalanced parentheses in type")));
                }
            }
            tok if ends_item(tok) => {
                let msg = if depth > 0 {
                    "unbalanced parentheses in type"
                } else {
                    "missing `=` after type"
                };
                return (i, Err(fail(start, msg)));
            }
            _ => {}
        }
        i += 1;
    }
    let type_tokens = &tokens[type_start..i];
    i += 1; // '='

    let mut names = Vec::new();
    while let Some(Tok::Str(s)) = tokens.get(i).map(|t| &t.tok) {
        names.push(s.clone());
        i += 1;
    }
    if names.is_empty() {
        return (i, Err(fail(i, "missing primitive name string after `=`")));
    }
    if names.len() > 3 {
        return (i, Err(fail(start, "too many primitive name strings")));
    }

    let mut attrs = BTreeSet::new();
    while let Some(Tok::AttrOpen(2)) = tokens.get(i).map(|t| &t.tok) {
        let Some(end) = matching_bracket(tokens, i) else {
            return (tokens.len(), Err(fail(i, "unterminated attribute")));
        };
        if let Some(a) = tokens.get(i + 1).and_then(|t| attr_of(&t.tok)) {
            attrs.insert(a);
        }
        i = end + 1;
    }
    let legacy_float = names.len() == 3 && names[2] == "float";
    if legacy_float {
        attrs.insert(Attr::Unboxed);
    }

    if type_tokens.is_empty() {
        return (i, Err(fail(start, "empty type")));
    }
    let segments = match split_top_level_arrows(type_tokens) {
        Ok(s) => s,
        Err(e) => return (i, Err(fail(start, &e.to_string()))),
    };
    let arity = segments.len() - 1;
    if arity == 0 {
        return (i, Err(fail(start, "external must have a function type")));
    }

    let native_name = names.get(1).cloned();
    let decl_unboxed = attrs.contains(&Attr::Unboxed);
    let decl_untagged = attrs.contains(&Attr::Untagged);
    let mut kinds = Vec::with_capacity(segments.len());
    for seg in &segments {
        let shape = segment_shape(seg);
        if shape.unboxed {
            attrs.insert(Attr::Unboxed);
        }
        if shape.untagged {
            attrs.insert(Attr::Untagged);
        }
        let kind = match shape.base.as_deref().and_then(base_class) {
            Some(Base::Int) if shape.untagged || decl_untagged => ArgKind::UntaggedInt,
            Some(Base::Unboxable(k)) if shape.unboxed || decl_unboxed => k,
            _ if shape.unboxed || shape.untagged => {
                return (
                    i,
                    Err(fail(
                        start,
                        "[@unboxed]/[@untagged] applied to a type that cannot be unboxed",
                    )),
                );
            }
            _ => ArgKind::BoxedValue,
        };
        kinds.push(kind);
    }
    let return_kind = kinds.pop().unwrap_or(ArgKind::BoxedValue);
    let any_unboxed = !return_kind.is_boxed() || kinds.iter().any(|k| !k.is_boxed());
    if any_unboxed && native_name.is_none() {
        return (
            i,
            Err(fail(
                start,
                "unboxed or untagged arguments require a separate native-code name",
            )),
        );
    }

    let mut ocaml_name = module_path.join(".");
    if !ocaml_name.is_empty() {
        ocaml_name.push('.');
    }
    ocaml_name.push_str(&name);

    (
        i,
        Ok(ExternalDecl {
            ocaml_name,
            byte_name: names[0].clone(),
            native_name,
            arity,
            arg_kinds: kinds,
            return_kind,
            attrs,
            source_loc: loc,
        }),
    )
}

fn matching_bracket(tokens: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (k, t) in tokens.iter().enumerate().skip(open) {
        match t.tok {
            Tok::LBracket | Tok::AttrOpen(_) => depth += 1,
            Tok::RBracket => {
                depth -= 1;
                if depth == 0 {
                    return Some(k);
                }
            }
            _ => {}
        }
    }
    None
}

fn attr_of(tok: &Tok) -> Option<Attr> {
    match tok {
        Tok::Ident(s) if s == "unboxed" || s == "ocaml.unboxed" => Some(Attr::Unboxed),
        Tok::Ident(s) if s == "untagged" || s == "ocaml.untagged" => Some(Attr::Untagged),
        Tok::Ident(s) if s == "noalloc" || s == "ocaml.noalloc" => Some(Attr::Noalloc),
        _ => None,
    }
}

#[derive(Debug, Default)]
struct SegmentShape {
    base: Option<String>,
    unboxed: bool,
    untagged: bool,
}

enum Base {
    Int,
    Unboxable(ArgKind),
}

fn base_class(name: &str) -> Option<Base> {
    let name = name.strip_prefix("Stdlib.").unwrap_or(name);
    Some(match name {
        "int" | "Int.t" => Base::Int,
        "float" | "Float.t" => Base::Unboxable(ArgKind::UnboxedFloat),
        "int32" | "Int32.t" => Base::Unboxable(ArgKind::UnboxedInt32),
        "int64" | "Int64.t" => Base::Unboxable(ArgKind::UnboxedInt64),
        "nativeint" | "Nativeint.t" => Base::Unboxable(ArgKind::UnboxedNativeint),
        _ => return None,
    })
}

/// Reduces one arrow segment to its base type name and per-argument
/// attributes. Anything that is not a plain (possibly qualified) type
/// constructor has no base name and stays boxed.
fn segment_shape(seg: &[Token]) -> SegmentShape {
    let mut shape = SegmentShape::default();
    let mut rest: Vec<&Token> = Vec::new();
    let mut k = 0;
    while k < seg.len() {
        if let Tok::AttrOpen(1) = seg[k].tok {
            if let Some(a) = seg.get(k + 1).and_then(|t| attr_of(&t.tok)) {
                match a {
                    Attr::Unboxed => shape.unboxed = true,
                    Attr::Untagged => shape.untagged = true,
                    Attr::Noalloc => {}
                }
            }
            k = matching_bracket(seg, k).map_or(seg.len(), |e| e + 1);
            continue;
        }
        rest.push(&seg[k]);
        k += 1;
    }
    // labels: `lbl:` or `?lbl:` or `~lbl:`
    if let [first, second, ..] = rest.as_slice() {
        if matches!(first.tok, Tok::Ident(_)) && second.tok == Tok::Colon {
            rest.drain(..2);
        }
    }
    if let [q, l, c, ..] = rest.as_slice() {
        if matches!(&q.tok, Tok::Op(o) if o == "?" || o == "~")
            && matches!(l.tok, Tok::Ident(_))
            && c.tok == Tok::Colon
        {
            rest.drain(..3);
        }
    }
    while rest.len() >= 2
        && rest[0].tok == Tok::LParen
        && rest[rest.len() - 1].tok == Tok::RParen
        && encloses_all(&rest)
    {
        rest.remove(0);
        rest.pop();
    }
    let mut name = String::new();
    for (n, t) in rest.iter().enumerate() {
        match (&t.tok, n % 2) {
            (Tok::Ident(s), 0) => name.push_str(s),
            (Tok::Dot, 1) => name.push('.'),
            _ => return shape,
        }
    }
    if !name.is_empty() && !name.ends_with('.') {
        shape.base = Some(name);
    }
    shape
}

fn encloses_all(toks: &[&Token]) -> bool {
    let mut depth = 0usize;
    for (n, t) in toks.iter().enumerate() {
        match t.tok {
            Tok::LParen => depth += 1,
            Tok::RParen => {
                depth -= 1;
                if depth == 0 && n != toks.len() - 1 {
                    return false;
                }
            }
            _ => {}
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(src: &str) -> ExternalDecl {
        let p = parse_ml_externals(src, "t.ml");
        assert!(p.errors.is_empty(), "{:?}", p.errors);
        assert_eq!(p.decls.len(), 1);
        p.decls.into_iter().next().unwrap()
    }

    #[test]
    fn assign_device_has_arity_three() {
        let d = one(
            "external domain_assign_device: handle -> domid -> (int * int * int * int) -> unit\n  = \"stub_xc_domain_assign_device\"",
        );
        assert_eq!(d.ocaml_name, "domain_assign_device");
        assert_eq!(d.arity, 3);
        assert_eq!(d.byte_name, "stub_xc_domain_assign_device");
        assert_eq!(d.native_name, None);
        assert_eq!(d.arg_kinds, vec![ArgKind::BoxedValue; 3]);
        assert_eq!(d.source_loc, Location::new("t.ml", 1, 1));
    }

    #[test]
    fn add_nat_has_two_names() {
        let d = one(
            "external add_nat: nat -> int -> int -> nat -> int -> int -> int -> int\n                = \"add_nat_bytecode\" \"add_nat_native\"",
        );
        assert_eq!(d.arity, 7);
        assert_eq!(d.byte_name, "add_nat_bytecode");
        assert_eq!(d.native_name.as_deref(), Some("add_nat_native"));
    }

    #[test]
    fn no_externals() {
        assert_eq!(parse_ml_externals("let x = 1", "t.ml"), MlParse::default());
    }

    #[test]
    fn arity_examples() {
        assert_eq!(compute_arity("handle -> domid -> (int * int * int * int) -> unit"), Ok(3));
        assert_eq!(compute_arity("unit -> handle"), Ok(1));
        assert_eq!(compute_arity("(int -> int) -> int"), Ok(1));
        assert_eq!(compute_arity("< m : int -> int > -> int"), Ok(1));
        assert_eq!(compute_arity("(int -> int"), Err(TypeExprError::Unbalanced));
        assert_eq!(compute_arity("int) -> int"), Err(TypeExprError::Unbalanced));
    }

    #[test]
    fn comments_and_strings_hide_externals() {
        let src = r#"
(* external hidden : int -> int = "nope" *)
let s = "external fake : int -> int = \"nope\""
let q = {|external quoted : int -> int = "nope"|}
external real : int -> int = "real_stub"
"#;
        let p = parse_ml_externals(src, "t.ml");
        assert_eq!(p.decls.len(), 1);
        assert_eq!(p.decls[0].byte_name, "real_stub");
        assert_eq!(p.decls[0].source_loc.line, 5);
    }

    #[test]
    fn unboxed_float_declaration() {
        let d = one(r#"external f: float -> float = "f_b" "f_n" [@@unboxed]"#);
        assert_eq!(d.arg_kinds, vec![ArgKind::UnboxedFloat]);
        assert_eq!(d.return_kind, ArgKind::UnboxedFloat);
        assert!(d.attrs.contains(&Attr::Unboxed));
    }

    #[test]
    fn per_argument_attributes_and_labels() {
        let d = one(
            r#"external g : (int [@untagged]) -> x:(int64 [@unboxed]) -> string -> (float [@unboxed])
               = "g_byte" "g_nat" [@@noalloc]"#,
        );
        assert_eq!(
            d.arg_kinds,
            vec![ArgKind::UntaggedInt, ArgKind::UnboxedInt64, ArgKind::BoxedValue]
        );
        assert_eq!(d.return_kind, ArgKind::UnboxedFloat);
        assert_eq!(
            d.attrs,
            [Attr::Unboxed, Attr::Untagged, Attr::Noalloc].into_iter().collect()
        );
    }

    #[test]
    fn unboxed_without_native_name_is_rejected() {
        let p = parse_ml_externals(r#"external f : float -> float = "f" [@@unboxed]"#, "t.ml");
        assert!(p.decls.is_empty());
        assert_eq!(p.errors.len(), 1);
    }

    #[test]
    fn module_paths_are_recorded() {
        let src = r#"
module Xc = struct
  type handle
  external init : unit -> handle = "stub_init"
  module Inner = struct
    external g : int -> int = "stub_g"
  end
end
module type S = sig
  external h : int -> int = "stub_h"
end
external top : int -> int = "stub_top"
"#;
        let p = parse_ml_externals(src, "t.ml");
        let names: Vec<&str> = p.decls.iter().map(|d| d.ocaml_name.as_str()).collect();
        assert_eq!(names, ["Xc.init", "Xc.Inner.g", "S.h", "top"]);
    }

    #[test]
    fn malformed_declarations_do_not_hide_later_ones() {
        let src = r#"
external broken : int -> int
let x = 2
external missing_name : int -> int =
external paren : (int -> int = "p"
external good : int -> int = "good_stub"
"#;
        let p = parse_ml_externals(src, "t.ml");
        assert_eq!(p.decls.len(), 1);
        assert_eq!(p.decls[0].byte_name, "good_stub");
        assert_eq!(p.errors.len(), 3, "{:?}", p.errors);
        assert_eq!(p.errors[0].location.line, 2);
    }

    #[test]
    fn operator_names_and_compiler_builtins() {
        let d = one(r#"external ( +! ) : int -> int -> int = "%addint""#);
        assert_eq!(d.ocaml_name, "( +! )");
        assert!(d.is_compiler_builtin());
    }

    #[test]
    fn zero_arity_is_an_error() {
        let p = parse_ml_externals(r#"external c : int = "c""#, "t.ml");
        assert!(p.decls.is_empty());
        assert_eq!(p.errors.len(), 1);
    }
}
