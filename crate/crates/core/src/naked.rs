//! Constant propagation and the naked-pointer check.
//!
//! A `value` whose low bit is clear is a pointer as far as the GC is
//! concerned. Storing a known even constant into a `value` variable is
//! therefore always a bug.

use std::collections::{BTreeMap, BTreeSet};

use crate::c::ast::{BinaryOp, CType, Expr, ExprKind, StubFunction, UnaryOp};
use crate::c::intrinsics::{self, Intrinsic};
use crate::cfg::{Cfg, NodeKind};
use crate::dataflow::solve_forward;
use crate::diagnostic::{Diagnostic, Location, RuleId};

/// Known constants per variable; a missing entry is unknown. `None` is the
/// unreachable state.
pub type ConstEnv = Option<BTreeMap<String, i64>>;

pub fn join_env(a: &ConstEnv, b: &ConstEnv) -> ConstEnv {
    match (a, b) {
        (None, x) | (x, None) => x.clone(),
        (Some(a), Some(b)) => Some(
            a.iter()
                .filter(|(k, v)| b.get(*k) == Some(v))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        ),
    }
}

/// The value of `e` when it is statically known.
pub fn eval_const(e: &Expr, env: &BTreeMap<String, i64>) -> Option<i64> {
    match &e.kind {
        ExprKind::Int(v) => i64::try_from(*v).ok(),
        ExprKind::Ident(n) => intrinsics::constant(n)
            .map(|(_, v)| v)
            .or_else(|| env.get(n).copied()),
        ExprKind::Intrinsic {
            intrinsic: Intrinsic::ValInt,
            name,
            args,
        } => {
            let k = eval_const(args.first()?, env)?;
            match name.as_str() {
                "Val_bool" => Some(if k != 0 { 3 } else { 1 }),
                "Val_not" => Some(k ^ 2),
                _ => k.checked_mul(2)?.checked_add(1),
            }
        }
        ExprKind::Cast { operand, .. } => eval_const(operand, env),
        ExprKind::Unary { op, operand } => {
            let v = eval_const(operand, env)?;
            match op {
                UnaryOp::Neg => v.checked_neg(),
                UnaryOp::Plus => Some(v),
                UnaryOp::BitNot => Some(!v),
                _ => None,
            }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let a = eval_const(lhs, env)?;
            let b = eval_const(rhs, env)?;
            match op {
                BinaryOp::Add => a.checked_add(b),
                BinaryOp::Sub => a.checked_sub(b),
                BinaryOp::Mul => a.checked_mul(b),
                BinaryOp::Shl => {
                    let s = u32::try_from(b).ok().filter(|s| *s < 63)?;
                    let r = a.checked_shl(s)?;
                    (r >> s == a).then_some(r)
                }
                BinaryOp::BitOr => Some(a | b),
                BinaryOp::BitAnd => Some(a & b),
                _ => None,
            }
        }
        ExprKind::Comma(v) => eval_const(v.last()?, env),
        _ => None,
    }
}

/// Variables whose address is taken anywhere in the function.
fn address_taken(cfg: &Cfg) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (_, n) in cfg.statement_nodes() {
        for e in n.kind.exprs() {
            e.walk_post(&mut |x| {
                if let ExprKind::Unary { op: UnaryOp::AddrOf, operand } = &x.kind {
                    if let ExprKind::Ident(v) = &operand.kind {
                        out.insert(v.clone());
                    }
                }
            });
        }
    }
    out
}

fn step(
    kind: &NodeKind,
    env: &ConstEnv,
    pinned: &BTreeSet<String>,
    mut on_store: impl FnMut(&str, &Expr, &BTreeMap<String, i64>),
) -> ConstEnv {
    let mut m = env.clone()?;
    for e in kind.exprs() {
        e.walk_post(&mut |x| match &x.kind {
            ExprKind::Assign { op, lhs, rhs } => {
                if let ExprKind::Ident(v) = &lhs.kind {
                    let value = match op {
                        None => {
                            on_store(v, rhs, &m);
                            eval_const(rhs, &m)
                        }
                        Some(_) => None,
                    };
                    match value {
                        Some(k) if !pinned.contains(v) => {
                            m.insert(v.clone(), k);
                        }
                        _ => {
                            m.remove(v);
                        }
                    }
                }
            }
            ExprKind::Unary {
                op: UnaryOp::PreInc | UnaryOp::PreDec | UnaryOp::PostInc | UnaryOp::PostDec,
                operand,
            } => {
                if let ExprKind::Ident(v) = &operand.kind {
                    m.remove(v);
                }
            }
            _ => {}
        });
    }
    if let NodeKind::Decl(d) = kind {
        if let Some(init) = &d.init {
            on_store(&d.name, init, &m);
            match eval_const(init, &m) {
                Some(k) if !pinned.contains(&d.name) => {
                    m.insert(d.name.clone(), k);
                }
                _ => {
                    m.remove(&d.name);
                }
            }
        }
    }
    Some(m)
}

/// Constant environments before each node.
pub fn propagate(cfg: &Cfg) -> Vec<ConstEnv> {
    let pinned = address_taken(cfg);
    solve_forward(cfg, Some(BTreeMap::new()), None, join_env, |n, env| {
        step(&cfg.nodes[n].kind, env, &pinned, |_, _, _| {})
    })
    .before
}

pub fn check_naked(
    f: &StubFunction,
    cfg: &Cfg,
    envs: &[ConstEnv],
    globals: &BTreeMap<String, CType>,
    file: &str,
) -> Vec<Diagnostic> {
    let pinned = address_taken(cfg);
    let is_value = |v: &str| {
        f.var_type(v)
            .or_else(|| globals.get(v))
            .is_some_and(CType::is_value)
    };
    let mut out = Vec::new();
    for (id, node) in cfg.statement_nodes() {
        step(&node.kind, &envs[id], &pinned, |v, rhs, env| {
            if !is_value(v) {
                return;
            }
            if let Some(k) = eval_const(rhs, env) {
                if k & 1 == 0 {
                    out.push(Diagnostic::error(
                        RuleId::NakedPointer,
                        Location::new(file, rhs.span.line, rhs.span.column),
                        format!(
                            "`{rhs}` is the constant {k}; stored in the value `{v}` it looks like a pointer to the GC"
                        ),
                    ));
                }
            }
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c::parse_unit;
    use crate::cfg::build_cfg;
    use crate::summaries::Summaries;

    fn naked_lines(src: &str) -> Vec<u32> {
        let unit = parse_unit(src, "t.c").unwrap();
        let f = &unit.functions[0];
        let cfg = build_cfg(f, &Summaries::builtin());
        let envs = propagate(&cfg);
        check_naked(f, &cfg, &envs, &unit.globals, "t.c")
            .iter()
            .map(|d| d.location.line)
            .collect()
    }

    fn eval(src: &str) -> Option<i64> {
        let unit = parse_unit(&format!("void f(void) {{ {src}; }}"), "t.c").unwrap();
        let crate::c::ast::StmtKind::Expr(e) = &unit.functions[0].body[0].kind else {
            panic!()
        };
        eval_const(e, &BTreeMap::new())
    }

    #[test]
    fn evaluation() {
        assert_eq!(eval("Tag_cons"), Some(0));
        assert_eq!(eval("Val_emptylist"), Some(1));
        assert_eq!(eval("Val_int(21)"), Some(43));
        assert_eq!(eval("Val_long(-1)"), Some(-1));
        assert_eq!(eval("Val_bool(7)"), Some(3));
        assert_eq!(eval("(1 << 4) | 2"), Some(18));
        assert_eq!(eval("(value) 8 - 3"), Some(5));
        assert_eq!(eval("xce"), None);
        assert_eq!(eval("9223372036854775807 + 1"), None);
        assert_eq!(eval("1 << 70"), None);
        assert_eq!(eval("Val_int(9223372036854775807)"), None);
    }

    #[test]
    fn tag_cons_versus_emptylist() {
        let src = "CAMLprim value f(value unit)\n{\n CAMLparam1(unit);\n CAMLlocal1(arch_obj);\n arch_obj = Tag_cons;\n arch_obj = Val_emptylist;\n CAMLreturn(arch_obj);\n}";
        assert_eq!(naked_lines(src), [5]);
    }

    #[test]
    fn propagates_through_variables_and_merges() {
        let src = "value f(int c)\n{\n int k = 4;\n value v;\n if (c) k = 6;\n v = k;\n k = 8;\n v = k;\n int *p = &c;\n c = 2;\n v = c;\n return v;\n}";
        assert_eq!(naked_lines(src), [8]);
    }

    #[test]
    fn only_value_destinations_are_checked() {
        assert!(naked_lines("int f(void) { int x = 0; long y; y = 2; return x; }").is_empty());
        assert_eq!(naked_lines("value f(void) { value x = 0; return x; }"), [1]);
    }

    #[test]
    fn unknown_stores_are_not_flagged() {
        assert!(naked_lines("value f(value a) { value x = a; x = caml_alloc(1, 0); x = g(); return x; }").is_empty());
    }
}
