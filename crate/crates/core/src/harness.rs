//! Generation of a C driver that calls every primitive from its own thread
//! with nondeterministic arguments, holding a modeled runtime lock.
//!
//! External analyzers use the file as an entry point; nothing here compiles
//! or runs it.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::header::{prototypes_for, CParamType, CPrototype};
use crate::ml::ExternalDecl;

pub const RUNTIME_LOCK: &str = "__VERIFIER_ocaml_runtime_lock";

fn nondet_source(ty: CParamType) -> &'static str {
    match ty {
        CParamType::CamlValue | CParamType::ArgvBlock => "__VERIFIER_nondet_value",
        CParamType::CDouble => "__VERIFIER_nondet_double",
        CParamType::CInt32 => "__VERIFIER_nondet_int32",
        CParamType::CInt64 => "__VERIFIER_nondet_int64",
        CParamType::CIntnat => "__VERIFIER_nondet_intnat",
        CParamType::CInt => "__VERIFIER_nondet_int",
    }
}

fn thread_fn_name(proto: &CPrototype) -> String {
    format!("__stublint_call_{}", proto.c_name)
}

fn write_call(out: &mut String, proto: &CPrototype, arity: usize) {
    if proto.is_argv_form() {
        writeln!(out, "  {{").unwrap();
        writeln!(out, "    value argv[{arity}];").unwrap();
        for k in 0..arity {
            writeln!(out, "    argv[{k}] = __VERIFIER_nondet_value();").unwrap();
        }
        writeln!(out, "    {}(argv, {arity});", proto.c_name).unwrap();
        writeln!(out, "  }}").unwrap();
    } else {
        let args: Vec<String> = proto
            .params
            .iter()
            .map(|p| format!("{}()", nondet_source(*p)))
            .collect();
        writeln!(out, "  {}({});", proto.c_name, args.join(", ")).unwrap();
    }
}

pub fn generate_main(decls: &[ExternalDecl]) -> String {
    let mut seen = HashSet::new();
    let mut calls: Vec<(CPrototype, usize)> = Vec::new();
    for decl in decls {
        for proto in prototypes_for(decl).protos {
            if seen.insert(proto.c_name.clone()) {
                calls.push((proto, decl.arity));
            }
        }
    }

    let mut out = String::new();
    out.push_str("/* AUTOGENERATED FILE, DO NOT EDIT */\n");
    out.push_str("#define CAML_NAME_SPACE\n");
    out.push_str("#include <caml/mlvalues.h>\n");
    out.push_str("#include <pthread.h>\n");
    out.push_str("#include <stddef.h>\n");
    out.push_str("#include <stdint.h>\n\n");
    out.push_str("extern value __VERIFIER_nondet_value(void);\n");
    out.push_str("extern double __VERIFIER_nondet_double(void);\n");
    out.push_str("extern int32_t __VERIFIER_nondet_int32(void);\n");
    out.push_str("extern int64_t __VERIFIER_nondet_int64(void);\n");
    out.push_str("extern intnat __VERIFIER_nondet_intnat(void);\n");
    out.push_str("extern int __VERIFIER_nondet_int(void);\n\n");
    writeln!(out, "pthread_mutex_t {RUNTIME_LOCK} = PTHREAD_MUTEX_INITIALIZER;").unwrap();

    for (proto, arity) in &calls {
        out.push('\n');
        writeln!(out, "static void *{}(void *arg)", thread_fn_name(proto)).unwrap();
        out.push_str("{\n");
        out.push_str("  (void)arg;\n");
        writeln!(out, "  pthread_mutex_lock(&{RUNTIME_LOCK});").unwrap();
        write_call(&mut out, proto, *arity);
        writeln!(out, "  pthread_mutex_unlock(&{RUNTIME_LOCK});").unwrap();
        out.push_str("  return NULL;\n");
        out.push_str("}\n");
    }

    out.push_str("\nint main(void)\n{\n");
    if !calls.is_empty() {
        writeln!(out, "  pthread_t threads[{}];", calls.len()).unwrap();
        for (k, (proto, _)) in calls.iter().enumerate() {
            writeln!(
                out,
                "  pthread_create(&threads[{k}], NULL, {}, NULL);",
                thread_fn_name(proto)
            )
            .unwrap();
        }
        for k in 0..calls.len() {
            writeln!(out, "  pthread_join(threads[{k}], NULL);").unwrap();
        }
    }
    out.push_str("  return 0;\n}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::parse_ml_externals;

    fn gen(src: &str) -> String {
        let p = parse_ml_externals(src, "t.ml");
        assert!(p.errors.is_empty());
        generate_main(&p.decls)
    }

    #[test]
    fn empty_input_has_trivial_main() {
        let out = generate_main(&[]);
        assert!(out.ends_with("int main(void)\n{\n  return 0;\n}\n"));
        assert!(!out.contains("pthread_create"));
        assert!(out.contains("pthread_mutex_t __VERIFIER_ocaml_runtime_lock"));
    }

    #[test]
    fn arity_three_call() {
        let out = gen(
            "external domain_assign_device: handle -> domid -> (int * int * int * int) -> unit = \"stub_xc_domain_assign_device\"",
        );
        assert!(out.contains(
            "  stub_xc_domain_assign_device(__VERIFIER_nondet_value(), __VERIFIER_nondet_value(), __VERIFIER_nondet_value());\n"
        ));
        let lock = out.find("pthread_mutex_lock(&__VERIFIER_ocaml_runtime_lock)").unwrap();
        let call = out.find("  stub_xc_domain_assign_device(").unwrap();
        let unlock = out.find("pthread_mutex_unlock(&__VERIFIER_ocaml_runtime_lock)").unwrap();
        assert!(lock < call && call < unlock);
        assert!(out.contains("pthread_create(&threads[0], NULL, __stublint_call_stub_xc_domain_assign_device, NULL);"));
    }

    #[test]
    fn add_nat_has_argv_and_direct_calls() {
        let out = gen(
            "external add_nat: nat -> int -> int -> nat -> int -> int -> int -> int = \"add_nat_bytecode\" \"add_nat_native\"",
        );
        assert!(out.contains("    value argv[7];\n"));
        assert!(out.contains("    argv[6] = __VERIFIER_nondet_value();\n"));
        assert!(out.contains("    add_nat_bytecode(argv, 7);\n"));
        let native_args = ["__VERIFIER_nondet_value()"; 7].join(", ");
        assert!(out.contains(&format!("  add_nat_native({native_args});\n")));
        assert!(out.contains("pthread_t threads[2];"));
    }

    #[test]
    fn unboxed_arguments_use_typed_sources() {
        let out = gen(r#"external f: float -> float = "f_b" "f_n" [@@unboxed]"#);
        assert!(out.contains("  f_n(__VERIFIER_nondet_double());\n"));
        assert!(out.contains("  f_b(__VERIFIER_nondet_value());\n"));
    }

    #[test]
    fn deterministic() {
        let src = "external a : int -> int = \"a\"\nexternal b : int -> int -> int = \"b\"";
        assert_eq!(gen(src), gen(src));
        let out = gen(src);
        assert!(out.find("__stublint_call_a(").unwrap() < out.find("__stublint_call_b(").unwrap());
    }
}
