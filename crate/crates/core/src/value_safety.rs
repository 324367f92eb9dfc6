//! Dereferences of OCaml heap memory without the runtime lock, stale
//! pointers into OCaml blocks, and missing local-root registration.

use std::collections::BTreeMap;

use crate::c::ast::{BinaryOp, CType, Expr, ExprKind, StmtKind, StubFunction, UnaryOp};
use crate::c::intrinsics::Intrinsic;
use crate::c::lexer::Span;
use crate::cfg::{Cfg, NodeId, NodeKind};
use crate::dataflow::solve_forward;
use crate::diagnostic::{Diagnostic, Location, RuleId, Severity};
use crate::lock::{classify_call, replay, LockMap, LockOp, LockState};
use crate::summaries::{Effect, Summaries};

/// What a C variable holds at a program point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueFact {
    Plain,
    OcamlValue,
    HeapDerived { possibly_stale: bool },
}

impl ValueFact {
    fn touches_heap(self) -> bool {
        !matches!(self, ValueFact::Plain)
    }
}

/// Derived-pointer variables and their staleness; every other variable is
/// described by its declared type. `None` marks an unreached point.
pub type Facts = Option<BTreeMap<String, bool>>;

fn join_facts(a: &Facts, b: &Facts) -> Facts {
    match (a, b) {
        (None, x) | (x, None) => x.clone(),
        (Some(a), Some(b)) => {
            let mut m = a.clone();
            for (k, &stale) in b {
                let e = m.entry(k.clone()).or_insert(false);
                *e |= stale;
            }
            Some(m)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DerefKind {
    /// `Field`, `Store_field`, `String_val` and similar macros.
    ValueMacroDeref,
    /// `*`, `->` or `[]` applied to an OCaml value or a derived pointer.
    ExplicitDeref,
    RuntimeCall,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerefEvent {
    pub span: Span,
    pub node: NodeId,
    pub subject: String,
    pub kind: DerefKind,
    /// What the dereferenced operand holds; `Plain` for runtime calls.
    pub operand: ValueFact,
    pub lock: LockState,
}

#[derive(Debug, Clone)]
pub struct ValueAnalysis {
    /// Facts before each node.
    pub facts: Vec<Facts>,
    pub events: Vec<DerefEvent>,
    /// Variables whose address escapes to an unknown function.
    pub address_taken: BTreeMap<String, Span>,
}

impl ValueAnalysis {
    pub fn fact(&self, f: &StubFunction, node: NodeId, var: &str) -> ValueFact {
        if self.address_taken.contains_key(var) {
            return ValueFact::Plain;
        }
        if f.var_type(var).is_some_and(CType::is_value) {
            return ValueFact::OcamlValue;
        }
        match self.facts[node].as_ref().and_then(|m| m.get(var)) {
            Some(&possibly_stale) => ValueFact::HeapDerived { possibly_stale },
            None => ValueFact::Plain,
        }
    }
}

struct Ctx<'a> {
    f: &'a StubFunction,
    globals: &'a BTreeMap<String, CType>,
    summaries: &'a Summaries,
    address_taken: &'a BTreeMap<String, Span>,
}

impl Ctx<'_> {
    fn var_type(&self, name: &str) -> Option<&CType> {
        self.f.var_type(name).or_else(|| self.globals.get(name))
    }

    fn origin(&self, e: &Expr, facts: &BTreeMap<String, bool>) -> ValueFact {
        match &e.kind {
            ExprKind::Ident(n) => {
                if self.address_taken.contains_key(n) {
                    ValueFact::Plain
                } else if self.var_type(n).is_some_and(CType::is_value) {
                    ValueFact::OcamlValue
                } else {
                    match facts.get(n) {
                        Some(&possibly_stale) => ValueFact::HeapDerived { possibly_stale },
                        None => ValueFact::Plain,
                    }
                }
            }
            ExprKind::Cast { ty, operand } => {
                let inner = self.origin(operand, facts);
                if ty.is_value() {
                    // re-tagging a pointer as a value does not make it one
                    return match inner {
                        ValueFact::OcamlValue => ValueFact::OcamlValue,
                        _ => ValueFact::Plain,
                    };
                }
                match inner {
                    ValueFact::OcamlValue if ty.is_pointer() => ValueFact::HeapDerived {
                        possibly_stale: false,
                    },
                    ValueFact::HeapDerived { .. } if ty.is_pointer() => inner,
                    ValueFact::OcamlValue => ValueFact::OcamlValue,
                    _ => ValueFact::Plain,
                }
            }
            ExprKind::Intrinsic { intrinsic, name, .. } => {
                if intrinsic.yields_heap_pointer() {
                    ValueFact::HeapDerived {
                        possibly_stale: false,
                    }
                } else if matches!(intrinsic, Intrinsic::FieldRead)
                    && matches!(name.as_str(), "Field" | "Some_val")
                {
                    ValueFact::OcamlValue
                } else {
                    ValueFact::Plain
                }
            }
            ExprKind::Unary { op: UnaryOp::AddrOf, operand } => match &operand.kind {
                ExprKind::Member { base, arrow: true, .. } | ExprKind::Index { base, .. } => {
                    match self.origin(base, facts) {
                        d @ ValueFact::HeapDerived { .. } => d,
                        _ => ValueFact::Plain,
                    }
                }
                _ => ValueFact::Plain,
            },
            ExprKind::Binary {
                op: BinaryOp::Add | BinaryOp::Sub,
                lhs,
                rhs,
            } => match (self.origin(lhs, facts), self.origin(rhs, facts)) {
                (d @ ValueFact::HeapDerived { .. }, _) | (_, d @ ValueFact::HeapDerived { .. }) => d,
                _ => ValueFact::Plain,
            },
            ExprKind::Unary {
                op: UnaryOp::PreInc | UnaryOp::PreDec | UnaryOp::PostInc | UnaryOp::PostDec,
                operand,
            } => match self.origin(operand, facts) {
                d @ ValueFact::HeapDerived { .. } => d,
                _ => ValueFact::Plain,
            },
            ExprKind::Conditional { then, otherwise, .. } => {
                merge(self.origin(then, facts), self.origin(otherwise, facts))
            }
            ExprKind::Assign { op: None, rhs, .. } => self.origin(rhs, facts),
            ExprKind::Comma(v) => v
                .last()
                .map_or(ValueFact::Plain, |e| self.origin(e, facts)),
            _ => ValueFact::Plain,
        }
    }

    fn is_gc_point(&self, name: &str) -> bool {
        classify_call(name, self.summaries) == LockOp::EnterBlocking
            || self.summaries.has(name, Effect::MayGc)
    }

    /// Transfers the facts across one node; records events when asked.
    fn step(
        &self,
        node: NodeId,
        kind: &NodeKind,
        facts: &Facts,
        lock: LockState,
        mut events: Option<&mut Vec<DerefEvent>>,
    ) -> Facts {
        let mut m = facts.clone()?;
        if matches!(kind, NodeKind::Opaque(_)) {
            m.clear();
            return Some(m);
        }
        replay(kind, lock, self.summaries, |e, s| {
            if let Some(ev) = events.as_deref_mut() {
                if let Some((kind, operand, subject)) = self.deref_site(e, &m) {
                    ev.push(DerefEvent {
                        span: e.span,
                        node,
                        subject,
                        kind,
                        operand,
                        lock: s,
                    });
                }
            }
            match &e.kind {
                ExprKind::Assign { op: None, lhs, rhs } => {
                    if let ExprKind::Ident(v) = &lhs.kind {
                        self.assign(&mut m, v, rhs, s);
                    }
                }
                ExprKind::Call { .. } => {
                    let name = e.call_target().unwrap_or_default();
                    if self.is_gc_point(name) {
                        for stale in m.values_mut() {
                            *stale = true;
                        }
                    }
                }
                _ => {}
            }
        });
        if let NodeKind::Decl(d) = kind {
            if let Some(init) = &d.init {
                // the initializer's own effects have been replayed; the
                // lock state after them is the node's out-state
                let s = replay(kind, lock, self.summaries, |_, _| {});
                self.assign(&mut m, &d.name, init, s);
            }
        }
        Some(m)
    }

    fn assign(&self, m: &mut BTreeMap<String, bool>, var: &str, rhs: &Expr, lock: LockState) {
        if self.address_taken.contains_key(var) || self.var_type(var).is_some_and(CType::is_value) {
            return;
        }
        match self.origin(rhs, m) {
            ValueFact::HeapDerived { possibly_stale } => {
                // a pointer kept from a point where the GC could run freely
                // cannot be trusted later
                let stale = possibly_stale || lock != LockState::Held;
                m.insert(var.to_string(), stale);
            }
            _ => {
                m.remove(var);
            }
        }
    }

    fn deref_site(
        &self,
        e: &Expr,
        m: &BTreeMap<String, bool>,
    ) -> Option<(DerefKind, ValueFact, String)> {
        let explicit = |operand: &Expr| {
            let o = self.origin(operand, m);
            o.touches_heap()
                .then(|| (DerefKind::ExplicitDeref, o, sketch(e)))
        };
        match &e.kind {
            ExprKind::Unary { op: UnaryOp::Deref, operand } => explicit(operand),
            ExprKind::Member { base, arrow: true, .. } => explicit(base),
            ExprKind::Index { base, .. } => explicit(base),
            ExprKind::Intrinsic { intrinsic, args, .. } if intrinsic.is_deref() => {
                let o = match args.first().map(|a| self.origin(a, m)) {
                    Some(d @ ValueFact::HeapDerived { .. }) => d,
                    _ => ValueFact::OcamlValue,
                };
                Some((DerefKind::ValueMacroDeref, o, sketch(e)))
            }
            ExprKind::Call { .. } => {
                let name = e.call_target()?;
                self.summaries
                    .requires_lock(name)
                    .then(|| (DerefKind::RuntimeCall, ValueFact::Plain, name.to_string()))
            }
            _ => None,
        }
    }
}

fn merge(a: ValueFact, b: ValueFact) -> ValueFact {
    use ValueFact::*;
    match (a, b) {
        (HeapDerived { possibly_stale: x }, HeapDerived { possibly_stale: y }) => HeapDerived {
            possibly_stale: x || y,
        },
        (d @ HeapDerived { .. }, _) | (_, d @ HeapDerived { .. }) => d,
        (OcamlValue, _) | (_, OcamlValue) => OcamlValue,
        _ => Plain,
    }
}

fn sketch(e: &Expr) -> String {
    let s = e.to_string();
    if s.chars().count() > 60 {
        let cut: String = s.chars().take(57).collect();
        format!("{cut}...")
    } else {
        s
    }
}

/// Variables whose address is passed straight to a function without a
/// summary. Without points-to information their contents are unknown.
pub fn address_taken_vars(
    f: &StubFunction,
    cfg: &Cfg,
    summaries: &Summaries,
) -> BTreeMap<String, Span> {
    let mut out = BTreeMap::new();
    for (_, node) in cfg.statement_nodes() {
        for e in node.kind.exprs() {
            e.walk_post(&mut |x| {
                let ExprKind::Call { args, .. } = &x.kind else { return };
                let Some(name) = x.call_target() else { return };
                if summaries.lookup(name).is_some() {
                    return;
                }
                for a in args {
                    if let ExprKind::Unary { op: UnaryOp::AddrOf, operand } = &a.kind {
                        if let ExprKind::Ident(v) = &operand.kind {
                            let tracked = f
                                .var_type(v)
                                .is_some_and(|t| t.is_value() || t.is_pointer());
                            if tracked {
                                out.entry(v.clone()).or_insert(a.span);
                            }
                        }
                    }
                }
            });
        }
    }
    out
}

pub fn track_values(
    f: &StubFunction,
    cfg: &Cfg,
    lockmap: &LockMap,
    summaries: &Summaries,
    globals: &BTreeMap<String, CType>,
) -> ValueAnalysis {
    let address_taken = address_taken_vars(f, cfg, summaries);
    let ctx = Ctx {
        f,
        globals,
        summaries,
        address_taken: &address_taken,
    };
    let sol = solve_forward(
        cfg,
        Some(BTreeMap::new()),
        None,
        join_facts,
        |node, facts| ctx.step(node, &cfg.nodes[node].kind, facts, lockmap.at(node), None),
    );
    let mut events = Vec::new();
    for (id, node) in cfg.statement_nodes() {
        if sol.before[id].is_some() && lockmap.at(id) != LockState::Bottom {
            ctx.step(id, &node.kind, &sol.before[id], lockmap.at(id), Some(&mut events));
        }
    }
    ValueAnalysis {
        facts: sol.before,
        events,
        address_taken,
    }
}

pub fn check_deref_safety(events: &[DerefEvent], file: &str) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for ev in events {
        let loc = Location::new(file, ev.span.line, ev.span.column);
        let sev = match ev.lock {
            LockState::Released => Some(Severity::Error),
            LockState::Unknown => Some(Severity::Warning),
            _ => None,
        };
        match ev.kind {
            DerefKind::RuntimeCall => {
                if let Some(sev) = sev {
                    out.push(Diagnostic::new(
                        RuleId::RuntimeCallUnlocked,
                        sev,
                        loc,
                        format!(
                            "`{}` requires the runtime lock, which is {} here",
                            ev.subject, ev.lock
                        ),
                    ));
                }
            }
            DerefKind::ValueMacroDeref | DerefKind::ExplicitDeref => {
                if ev.operand == (ValueFact::HeapDerived { possibly_stale: true }) {
                    out.push(Diagnostic::error(
                        RuleId::DerivedPtrStale,
                        loc,
                        format!(
                            "`{}` reads through a pointer into an OCaml block that the GC may have moved",
                            ev.subject
                        ),
                    ));
                } else if let Some(sev) = sev {
                    out.push(Diagnostic::new(
                        RuleId::ValueDerefUnlocked,
                        sev,
                        loc,
                        format!(
                            "`{}` dereferences OCaml heap memory while the runtime lock is {}",
                            ev.subject, ev.lock
                        ),
                    ));
                }
            }
        }
    }
    out
}

pub fn address_taken_notes(analysis: &ValueAnalysis, file: &str) -> Vec<Diagnostic> {
    analysis
        .address_taken
        .iter()
        .map(|(v, span)| {
            Diagnostic::note(
                Location::new(file, span.line, span.column),
                format!("address of `{v}` escapes to an unknown function; its uses are not checked"),
            )
        })
        .collect()
}

/// Local-root registration for functions callable from OCaml.
pub fn check_camlparam(f: &StubFunction, file: &str) -> Vec<Diagnostic> {
    if !f.is_camlprim() {
        return vec![];
    }
    let value_params = f.params().iter().filter(|p| p.ty.is_value()).count();
    let has_value_locals = f.locals.iter().any(|(_, t)| t.is_value());
    if value_params == 0 && !has_value_locals {
        return vec![];
    }
    let loc = Location::new(file, f.sig.span.line, f.sig.span.column);
    let mut stmts = f.body.iter().filter(|s| match &s.kind {
        StmtKind::Empty => false,
        StmtKind::Decl(ds) => ds.iter().any(|d| d.init.is_some()),
        _ => true,
    });
    let mut registered = 0;
    let mut first_span = None;
    let mut saw_param = false;
    for s in stmts.by_ref() {
        match &s.kind {
            StmtKind::CamlParam { names, .. } => {
                saw_param = true;
                first_span.get_or_insert(s.span);
                registered += names.len();
            }
            _ => break,
        }
    }
    if !saw_param {
        return vec![Diagnostic::warning(
            RuleId::MissingCamlparam,
            loc,
            format!(
                "`{}` handles OCaml values but does not begin with a CAMLparam macro",
                f.name()
            ),
        )];
    }
    if registered != value_params {
        let span = first_span.unwrap_or(f.sig.span);
        return vec![Diagnostic::warning(
            RuleId::CamlparamArity,
            Location::new(file, span.line, span.column),
            format!(
                "`{}` registers {registered} parameter(s) but has {value_params} `value` parameter(s)",
                f.name()
            ),
        )];
    }
    vec![]
}
