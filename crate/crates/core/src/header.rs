//! C header generation from external declarations.
//!
//! The header lets a C compiler check each stub against the OCaml
//! declaration. The rendering table below is the single place that decides
//! how each parameter kind is spelled.

use std::fmt::Write as _;

use crate::diagnostic::{Diagnostic, RuleId};
use crate::ml::{ArgKind, ExternalDecl};

/// Bytecode stubs receive their arguments as an array above this arity.
pub const MAX_DIRECT_ARGS: usize = 5;

pub const PREAMBLE: &str = "/* AUTOGENERATED FILE, DO NOT EDIT */
#define CAML_NAME_SPACE
#define _GNU_SOURCE
#define _XOPEN_SOURCE 600
#include <caml/mlvalues.h>
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CParamType {
    CamlValue,
    CDouble,
    CInt32,
    CInt64,
    CIntnat,
    CInt,
    ArgvBlock,
}

impl CParamType {
    pub fn c_spelling(self) -> &'static str {
        match self {
            CParamType::CamlValue => "value",
            CParamType::CDouble => "double",
            CParamType::CInt32 => "int32_t",
            CParamType::CInt64 => "int64_t",
            CParamType::CIntnat => "intnat",
            CParamType::CInt => "int",
            CParamType::ArgvBlock => "value *",
        }
    }

    pub fn from_kind(kind: ArgKind) -> Self {
        match kind {
            ArgKind::BoxedValue => CParamType::CamlValue,
            ArgKind::UnboxedFloat => CParamType::CDouble,
            ArgKind::UnboxedInt32 => CParamType::CInt32,
            ArgKind::UnboxedInt64 => CParamType::CInt64,
            ArgKind::UnboxedNativeint => CParamType::CIntnat,
            ArgKind::UntaggedInt => CParamType::CIntnat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    Native,
    Bytecode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CPrototype {
    pub c_name: String,
    pub params: Vec<CParamType>,
    pub returns: CParamType,
    pub flavor: Flavor,
}

impl CPrototype {
    pub fn is_argv_form(&self) -> bool {
        self.params.first() == Some(&CParamType::ArgvBlock)
    }

    pub fn render(&self) -> String {
        let params = if self.is_argv_form() {
            "value *argv, int argn".to_string()
        } else {
            self.params
                .iter()
                .map(|p| p.c_spelling())
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!(
            "CAMLprim {} {}({});",
            self.returns.c_spelling(),
            self.c_name,
            params
        )
    }
}

/// Prototypes for one declaration, plus any problem with the declaration
/// itself.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Prototypes {
    pub protos: Vec<CPrototype>,
    pub diagnostics: Vec<Diagnostic>,
}

fn bytecode_proto(name: &str, arity: usize) -> CPrototype {
    let params = if arity > MAX_DIRECT_ARGS {
        vec![CParamType::ArgvBlock, CParamType::CInt]
    } else {
        vec![CParamType::CamlValue; arity]
    };
    CPrototype {
        c_name: name.to_string(),
        params,
        returns: CParamType::CamlValue,
        flavor: Flavor::Bytecode,
    }
}

pub fn prototypes_for(decl: &ExternalDecl) -> Prototypes {
    let mut out = Prototypes::default();
    if decl.is_compiler_builtin() {
        return out;
    }
    out.protos.push(bytecode_proto(&decl.byte_name, decl.arity));
    match &decl.native_name {
        Some(native) => out.protos.push(CPrototype {
            c_name: native.clone(),
            params: decl.arg_kinds.iter().copied().map(CParamType::from_kind).collect(),
            returns: CParamType::from_kind(decl.return_kind),
            flavor: Flavor::Native,
        }),
        None if decl.arity > MAX_DIRECT_ARGS => {
            out.diagnostics.push(Diagnostic::error(
                RuleId::ArityMismatch,
                decl.source_loc.clone(),
                format!(
                    "external `{}` takes {} arguments but names a single C symbol `{}`; \
                     above {} arguments separate bytecode and native stubs are required",
                    decl.ocaml_name, decl.arity, decl.byte_name, MAX_DIRECT_ARGS
                ),
            ));
        }
        None => {}
    }
    out
}

/// Renders the header for `decls`: the fixed preamble, then one line per
/// prototype in declaration order.
pub fn render_header(decls: &[ExternalDecl]) -> String {
    let mut out = String::from(PREAMBLE);
    for decl in decls {
        for proto in prototypes_for(decl).protos {
            writeln!(out, "{}", proto.render()).unwrap();
        }
    }
    out
}
