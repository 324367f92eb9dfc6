//! Runtime-lock state analysis.

use std::fmt;

use crate::c::ast::{Expr, StubFunction};
use crate::c::intrinsics::{self, Intrinsic};
use crate::cfg::{visit_unconditional, Cfg, NodeId, NodeKind};
use crate::dataflow::solve_forward;
use crate::diagnostic::{Diagnostic, Location, RuleId, Severity};
use crate::summaries::{Effect, Summaries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LockState {
    Bottom,
    Held,
    Released,
    Unknown,
}

impl LockState {
    pub const ALL: [LockState; 4] = [
        LockState::Bottom,
        LockState::Held,
        LockState::Released,
        LockState::Unknown,
    ];

    pub fn join(self, other: LockState) -> LockState {
        use LockState::*;
        match (self, other) {
            (Bottom, x) | (x, Bottom) => x,
            (a, b) if a == b => a,
            _ => Unknown,
        }
    }

    pub fn leq(self, other: LockState) -> bool {
        self.join(other) == other
    }
}

impl fmt::Display for LockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LockState::Bottom => "unreachable",
            LockState::Held => "held",
            LockState::Released => "released",
            LockState::Unknown => "possibly released",
        })
    }
}

/// What a call does to the lock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LockOp {
    EnterBlocking,
    LeaveBlocking,
    Acquires,
    Releases,
    Other,
}

pub fn classify_call(name: &str, summaries: &Summaries) -> LockOp {
    match intrinsics::runtime_function(name) {
        Some(Intrinsic::EnterBlocking) => return LockOp::EnterBlocking,
        Some(Intrinsic::LeaveBlocking) => return LockOp::LeaveBlocking,
        _ => {}
    }
    if summaries.has(name, Effect::AcquiresLock) {
        LockOp::Acquires
    } else if summaries.has(name, Effect::ReleasesLock) {
        LockOp::Releases
    } else {
        LockOp::Other
    }
}

/// The out-state for one lock operation, plus the severity of an
/// unbalanced-lock report when the operation does not fit the in-state.
pub fn transfer(op: LockOp, state: LockState) -> (LockState, Option<Severity>) {
    use LockState::*;
    if state == Bottom {
        return (Bottom, None);
    }
    match op {
        LockOp::EnterBlocking => match state {
            Held => (Released, None),
            Released => (Released, Some(Severity::Error)),
            _ => (Released, Some(Severity::Warning)),
        },
        LockOp::LeaveBlocking => match state {
            Released => (Held, None),
            Held => (Held, Some(Severity::Error)),
            _ => (Held, Some(Severity::Warning)),
        },
        LockOp::Acquires => (Held, None),
        LockOp::Releases => (Released, None),
        LockOp::Other => (state, None),
    }
}

/// Walks the expressions of a node in evaluation order, passing each
/// subexpression with the lock state in effect when it is evaluated. Calls
/// update the state after their arguments have been visited.
pub fn replay<'a>(
    kind: &'a NodeKind,
    state: LockState,
    summaries: &Summaries,
    mut visit: impl FnMut(&'a Expr, LockState),
) -> LockState {
    let mut state = state;
    for e in kind.exprs() {
        e.walk_post(&mut |x| {
            visit(x, state);
            if let Some(name) = x.call_target() {
                state = transfer(classify_call(name, summaries), state).0;
            }
        });
    }
    state
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockMap {
    /// State before each node.
    pub before: Vec<LockState>,
    /// State after each node.
    pub after: Vec<LockState>,
    pub pops: usize,
}

impl LockMap {
    pub fn at(&self, node: NodeId) -> LockState {
        self.before[node]
    }
}

pub fn solve(cfg: &Cfg, summaries: &Summaries) -> LockMap {
    let sol = solve_forward(
        cfg,
        LockState::Held,
        LockState::Bottom,
        |a, b| a.join(*b),
        |node, &s| replay(&cfg.nodes[node].kind, s, summaries, |_, _| {}),
    );
    LockMap {
        before: sol.before,
        after: sol.after,
        pops: sol.pops,
    }
}

/// Unbalanced enter/leave pairs, and stubs that can return with the lock
/// released.
pub fn check_lock_balance(
    f: &StubFunction,
    cfg: &Cfg,
    map: &LockMap,
    summaries: &Summaries,
    file: &str,
) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (id, node) in cfg.statement_nodes() {
        let loc = |e: &Expr| Location::new(file, e.span.line, e.span.column);
        replay(&node.kind, map.at(id), summaries, |e, s| {
            let Some(name) = e.call_target() else { return };
            let op = classify_call(name, summaries);
            if let (_, Some(sev)) = transfer(op, s) {
                let what = match op {
                    LockOp::EnterBlocking => "releases the runtime lock",
                    _ => "reacquires the runtime lock",
                };
                out.push(Diagnostic::new(
                    RuleId::UnbalancedLock,
                    sev,
                    loc(e),
                    format!("`{name}` {what} but the lock is {s} here"),
                ));
            }
        });
    }
    if f.is_camlprim() {
        for &exit in &cfg.exits {
            let node = &cfg.nodes[exit];
            let s = if exit == Cfg::EXIT { map.at(exit) } else { map.after[exit] };
            let sev = match s {
                LockState::Released => Severity::Error,
                LockState::Unknown => Severity::Warning,
                _ => continue,
            };
            out.push(Diagnostic::new(
                RuleId::UnbalancedLock,
                sev,
                Location::new(file, node.span.line, node.span.column),
                format!("`{}` returns to OCaml while the runtime lock is {s}", f.name()),
            ));
        }
    }
    out
}

/// Whether the node unconditionally calls a function accepted by `pred`.
pub fn calls_matching(kind: &NodeKind, mut pred: impl FnMut(&str) -> bool) -> bool {
    let mut hit = false;
    for e in kind.exprs() {
        visit_unconditional(e, &mut |x| {
            if let Some(n) = x.call_target() {
                hit |= pred(n);
            }
        });
    }
    hit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c::parse_unit;
    use crate::cfg::build_cfg;
    use LockState::*;

    fn analyse(src: &str) -> (Cfg, LockMap, Vec<Diagnostic>) {
        let unit = parse_unit(src, "t.c").unwrap();
        let f = &unit.functions[0];
        let s = Summaries::builtin();
        let cfg = build_cfg(f, &s);
        let map = solve(&cfg, &s);
        let diags = check_lock_balance(f, &cfg, &map, &s, "t.c");
        (cfg, map, diags)
    }

    #[test]
    fn join_table() {
        assert_eq!(Held.join(Released), Unknown);
        assert_eq!(Bottom.join(Released), Released);
        assert_eq!(Unknown.join(Held), Unknown);
        assert!(Bottom.leq(Held) && Held.leq(Unknown) && !Held.leq(Released));
    }

    #[test]
    fn straight_line_enter_call_leave() {
        let (_, map, diags) = analyse(
            "value f(value x) { caml_enter_blocking_section(); g(); caml_leave_blocking_section(); return x; }",
        );
        assert_eq!(&map.before[2..5], &[Held, Released, Released]);
        assert_eq!(map.before[5], Held);
        assert!(diags.is_empty());
    }

    #[test]
    fn one_armed_release_merges_to_unknown() {
        let (_, map, diags) = analyse(
            "value f(value x) { if (x) caml_enter_blocking_section(); g(); return x; }",
        );
        assert_eq!(map.before[4], Unknown);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Warning);
    }

    #[test]
    fn empty_function() {
        let (_, map, _) = analyse("void f(void) { }");
        assert_eq!(map.before[Cfg::ENTRY], Held);
        assert_eq!(map.before[Cfg::EXIT], Held);
    }

    #[test]
    fn double_release_and_return_released() {
        let (_, _, diags) = analyse(
            "value f(value x) { caml_enter_blocking_section(); caml_enter_blocking_section(); return x; }",
        );
        let rules: Vec<_> = diags.iter().map(|d| (d.rule, d.severity, d.location.column)).collect();
        assert_eq!(
            rules,
            [
                (RuleId::UnbalancedLock, Severity::Error, 51),
                (RuleId::UnbalancedLock, Severity::Error, 82)
            ]
        );
    }

    #[test]
    fn loops_terminate_within_bound() {
        let (cfg, map, _) = analyse(
            "value f(value x) { int i; for (i = 0; i < 3; i++) { caml_enter_blocking_section(); if (i) caml_leave_blocking_section(); } return x; }",
        );
        assert!(map.pops <= cfg.nodes.len() * 3, "{} pops", map.pops);
    }
}
