//! Cross-check of OCaml `external` declarations against C definitions.

use std::collections::BTreeMap;

use crate::c::ast::{CType, StubFunction};
use crate::c::StubUnit;
use crate::diagnostic::{Diagnostic, Location, RuleId};
use crate::header::{CParamType, MAX_DIRECT_ARGS};
use crate::ml::ExternalDecl;

struct Definition<'a> {
    unit: &'a StubUnit,
    func: &'a StubFunction,
}

impl Definition<'_> {
    fn location(&self) -> Location {
        self.unit.location(self.func.sig.span)
    }
}

/// Whether a C parameter type can receive an argument of kind `want`.
/// Types the parser could not classify are given the benefit of the doubt.
fn compatible(want: CParamType, have: &CType) -> bool {
    match (want, have) {
        (_, CType::Unknown(_) | CType::Record(_)) => true,
        (CParamType::CamlValue, t) => t.is_value(),
        (CParamType::CDouble, t) => matches!(t, CType::Floating),
        (CParamType::CInt32 | CParamType::CInt64 | CParamType::CIntnat | CParamType::CInt, t) => {
            matches!(t, CType::Integer(_))
        }
        (CParamType::ArgvBlock, t) => t.pointee().is_some_and(CType::is_value),
    }
}

fn expected_params(decl: &ExternalDecl, native: bool) -> Vec<CParamType> {
    if native {
        decl.arg_kinds.iter().map(|k| CParamType::from_kind(*k)).collect()
    } else if decl.arity > MAX_DIRECT_ARGS {
        vec![CParamType::ArgvBlock, CParamType::CInt]
    } else {
        vec![CParamType::CamlValue; decl.arity]
    }
}

pub fn check_arity(decls: &[ExternalDecl], units: &[StubUnit]) -> Vec<Diagnostic> {
    let mut defs: BTreeMap<&str, Definition> = BTreeMap::new();
    for unit in units {
        for func in &unit.functions {
            defs.entry(func.name()).or_insert(Definition { unit, func });
        }
    }
    let mut out = Vec::new();
    for decl in decls.iter().filter(|d| !d.is_compiler_builtin()) {
        let mut symbols: Vec<(&str, bool)> = Vec::new();
        match &decl.native_name {
            Some(native) => {
                symbols.push((&decl.byte_name, false));
                if native != &decl.byte_name {
                    symbols.push((native, true));
                }
            }
            // a single name must serve both back ends; above the direct
            // limit the header check already rejects the declaration
            None if decl.arity > MAX_DIRECT_ARGS => continue,
            None => symbols.push((&decl.byte_name, true)),
        }
        for (sym, native) in symbols {
            let Some(def) = defs.get(sym) else {
                out.push(Diagnostic::note(
                    decl.source_loc.clone(),
                    format!("no C definition of `{sym}` in the analysed files"),
                ));
                continue;
            };
            let want = expected_params(decl, native);
            let have = def.func.params();
            if have.is_empty() && !def.func.sig.variadic && decl.arity == 1 {
                out.push(
                    Diagnostic::error(
                        RuleId::VoidStub,
                        def.location(),
                        format!(
                            "`{sym}` takes no parameters, but OCaml always passes one argument to `{}`",
                            decl.ocaml_name
                        ),
                    )
                    .with_related(decl.source_loc.clone()),
                );
                continue;
            }
            let count_ok = have.len() == want.len() || (def.func.sig.variadic && have.len() <= want.len());
            if !count_ok {
                out.push(
                    Diagnostic::error(
                        RuleId::ArityMismatch,
                        def.location(),
                        format!(
                            "`{sym}` has {} parameter(s) but `{}` is declared with {} ({})",
                            have.len(),
                            decl.ocaml_name,
                            want.len(),
                            if native { "native" } else { "bytecode" }
                        ),
                    )
                    .with_related(decl.source_loc.clone()),
                );
                continue;
            }
            let mismatch = want
                .iter()
                .zip(have)
                .position(|(w, h)| !compatible(*w, &h.ty));
            if let Some(i) = mismatch {
                out.push(
                    Diagnostic::error(
                        RuleId::ArityMismatch,
                        def.location(),
                        format!(
                            "parameter {} of `{sym}` is `{}` but `{}` passes `{}`",
                            i + 1,
                            have[i].ty,
                            decl.ocaml_name,
                            want[i].c_spelling()
                        ),
                    )
                    .with_related(decl.source_loc.clone()),
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c::parse_unit;
    use crate::ml::parse_ml_externals;

    fn check(ml: &str, c: &str) -> Vec<(RuleId, u32)> {
        let decls = parse_ml_externals(ml, "x.ml").decls;
        let unit = parse_unit(c, "x.c").unwrap();
        check_arity(&decls, &[unit])
            .iter()
            .map(|d| (d.rule, d.location.line))
            .collect()
    }

    #[test]
    fn refactored_stub_has_extra_parameter() {
        let ml = "external assign_device : handle -> domid -> int -> unit\n  = \"stub_xc_domain_assign_device\"\n";
        let bad = "CAMLprim value stub_xc_domain_assign_device(value xch, value domid,\n value sbdf, value rflag)\n{ return Val_unit; }";
        assert_eq!(check(ml, bad), [(RuleId::ArityMismatch, 1)]);
        let good = "CAMLprim value stub_xc_domain_assign_device(value xch, value domid, value sbdf)\n{ return Val_unit; }";
        assert!(check(ml, good).is_empty());
    }

    #[test]
    fn void_stub() {
        let ml = "external init : unit -> handle = \"stub_eventchn_init\"";
        assert_eq!(
            check(ml, "\nCAMLprim value stub_eventchn_init(void) { return 0; }"),
            [(RuleId::VoidStub, 2)]
        );
    }

    #[test]
    fn missing_definitions_are_notes() {
        let got = check("external f : int -> int = \"nowhere\"", "int other(void) { return 0; }");
        assert_eq!(got, [(RuleId::Note, 1)]);
    }

    #[test]
    fn bytecode_and_native_pair() {
        let ml = "external add_nat: nat -> int -> int -> nat -> int -> int -> int -> int\n = \"add_nat_bytecode\" \"add_nat_native\"";
        let c = "CAMLprim value add_nat_native(value a, value b, value c, value d, value e, value f, value g) { return a; }\n\
                 CAMLprim value add_nat_bytecode(value *argv, int argn) { return argv[0]; }";
        assert!(check(ml, c).is_empty());
        let c2 = "CAMLprim value add_nat_native(value a, value b, value c, value d, value e, value f, value g) { return a; }\n\
                  CAMLprim value add_nat_bytecode(value a, value b) { return a; }";
        assert_eq!(check(ml, c2), [(RuleId::ArityMismatch, 2)]);
    }

    #[test]
    fn unboxed_parameter_types() {
        let ml = "external f : float -> (int [@untagged]) -> float = \"f_byte\" \"f_nat\" [@@unboxed]";
        let c = "value f_byte(value a, value b) { return a; }\ndouble f_nat(double a, intnat b) { return a; }";
        assert!(check(ml, c).is_empty());
        let c = "value f_byte(value a, value b) { return a; }\ndouble f_nat(value a, intnat b) { return 0; }";
        assert_eq!(check(ml, c), [(RuleId::ArityMismatch, 2)]);
    }

    #[test]
    fn builtins_are_ignored() {
        assert!(check("external id : 'a -> 'a = \"%identity\"", "").is_empty());
    }
}
