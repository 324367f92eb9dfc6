//! C front end: lexing, file-local preprocessing and parsing of stub files.

pub mod ast;
pub mod intrinsics;
pub mod lexer;
pub mod parser;
pub mod preprocess;

use std::collections::{BTreeMap, BTreeSet};

use crate::diagnostic::{Diagnostic, Location, RuleId};
use ast::{CType, FunctionSig, StubFunction};
use lexer::Span;
use preprocess::{preprocess_local, MacroDef, PreprocessError};

/// One parsed C file.
#[derive(Debug, Clone, Default)]
pub struct StubUnit {
    pub file: String,
    pub functions: Vec<StubFunction>,
    pub prototypes: Vec<FunctionSig>,
    pub globals: BTreeMap<String, CType>,
    pub typedefs: BTreeSet<String>,
    pub local_macros: BTreeMap<String, MacroDef>,
    pub includes: Vec<String>,
    /// Notes and unsupported-construct warnings produced while parsing.
    pub diagnostics: Vec<Diagnostic>,
    /// Functions that could not be parsed at all.
    pub errors: Vec<Diagnostic>,
}

impl StubUnit {
    pub fn location(&self, span: Span) -> Location {
        Location::new(self.file.clone(), span.line, span.column)
    }

    pub fn function(&self, name: &str) -> Option<&StubFunction> {
        self.functions.iter().find(|f| f.name() == name)
    }
}

/// Fails only when the file cannot be tokenized or preprocessed at all.
pub fn parse_unit(source: &str, file: &str) -> Result<StubUnit, PreprocessError> {
    let pre = preprocess_local(source)?;
    let items = parser::parse_tokens(&pre.tokens);
    let mut unit = StubUnit {
        file: file.to_string(),
        functions: items.functions,
        prototypes: items.prototypes,
        globals: items.globals,
        typedefs: items.typedefs,
        local_macros: pre.macros,
        includes: pre.includes,
        ..StubUnit::default()
    };
    for (span, msg) in pre.notes {
        let loc = unit.location(span);
        unit.diagnostics.push(Diagnostic::note(loc, msg));
    }
    for (span, msg) in items.unsupported {
        let loc = unit.location(span);
        unit.diagnostics
            .push(Diagnostic::warning(RuleId::UnsupportedConstruct, loc, msg));
    }
    for e in items.errors {
        let loc = unit.location(e.span);
        unit.errors.push(Diagnostic::error(
            RuleId::UnsupportedConstruct,
            loc,
            format!("cannot parse function: {}", e.message),
        ));
    }
    Ok(unit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn macros_are_expanded_before_parsing() {
        let src = "#define _H(__h) (*((xenevtchn_handle **)Data_custom_val(__h)))\n\
                   CAMLprim value f(value xce) { CAMLparam1(xce); g(_H(xce)); CAMLreturn(Val_unit); }\n";
        let unit = parse_unit(src, "x.c").unwrap();
        assert!(unit.errors.is_empty());
        assert!(unit.local_macros.contains_key("_H"));
        let f = unit.function("f").unwrap();
        let ast::StmtKind::Expr(e) = &f.body[1].kind else { panic!() };
        assert_eq!(e.to_string(), "g(*(xenevtchn_handle **)Data_custom_val(xce))");
        assert_eq!(e.span.line, 2);
    }

    #[test]
    fn unsupported_constructs_are_warnings() {
        let unit = parse_unit("int f(void) { __asm__(\"nop\"); return 0; }", "a.c").unwrap();
        assert_eq!(unit.diagnostics.len(), 1);
        assert_eq!(unit.diagnostics[0].rule, RuleId::UnsupportedConstruct);
    }
}
