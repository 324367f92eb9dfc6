//! Control-flow graphs over stub function bodies.
//!
//! Node 0 is the entry and node 1 the fall-through exit. `return` and
//! `CAMLreturn` nodes have no successors and are listed in `exits`
//! alongside the exit node. A call to a `noreturn` function ends its path.

use std::collections::BTreeMap;

use crate::c::ast::{BinaryOp, Declarator, Expr, ExprKind, Stmt, StmtKind, StubFunction};
use crate::c::intrinsics::Intrinsic;
use crate::c::lexer::Span;
use crate::summaries::{Effect, Summaries};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Entry,
    Exit,
    Expr(Expr),
    /// A declarator with an initializer.
    Decl(Declarator),
    /// Condition of an `if`, loop or `switch`.
    Branch(Expr),
    CamlParam { intrinsic: Intrinsic, names: Vec<String> },
    CamlLocal { names: Vec<String> },
    Return(Option<Expr>),
    CamlReturn(Option<Expr>),
    Opaque(String),
    /// Join point for a label or a loop without a condition.
    Nop,
}

impl NodeKind {
    /// Expressions evaluated by this node, in evaluation order.
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            NodeKind::Expr(e) | NodeKind::Branch(e) => vec![e],
            NodeKind::Decl(d) => d.init.iter().collect(),
            NodeKind::Return(e) | NodeKind::CamlReturn(e) => e.iter().collect(),
            _ => vec![],
        }
    }

    pub fn is_return(&self) -> bool {
        matches!(self, NodeKind::Return(_) | NodeKind::CamlReturn(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub span: Span,
    pub reachable: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Cfg {
    pub nodes: Vec<Node>,
    pub succs: Vec<Vec<NodeId>>,
    pub preds: Vec<Vec<NodeId>>,
    /// Return nodes plus the fall-through exit.
    pub exits: Vec<NodeId>,
    /// Constructs the graph could not represent (unresolved labels, ...).
    pub unsupported: Vec<(Span, String)>,
}

impl Cfg {
    pub const ENTRY: NodeId = 0;
    pub const EXIT: NodeId = 1;

    pub fn edge_count(&self) -> usize {
        self.succs.iter().map(Vec::len).sum()
    }

    /// Nodes other than entry and exit.
    pub fn statement_nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate().skip(2)
    }
}

#[derive(Default)]
struct Breakable {
    is_loop: bool,
    breaks: Vec<NodeId>,
    continues: Vec<NodeId>,
    /// Branch node of the enclosing switch.
    switch: Option<NodeId>,
    has_default: bool,
}

struct Builder<'s> {
    cfg: Cfg,
    summaries: &'s Summaries,
    stack: Vec<Breakable>,
    labels: BTreeMap<String, NodeId>,
    gotos: Vec<(Vec<NodeId>, String, Span)>,
}

pub fn build_cfg(f: &StubFunction, summaries: &Summaries) -> Cfg {
    let mut b = Builder {
        cfg: Cfg::default(),
        summaries,
        stack: Vec::new(),
        labels: BTreeMap::new(),
        gotos: Vec::new(),
    };
    b.add(NodeKind::Entry, f.sig.span);
    b.add(NodeKind::Exit, f.sig.span);
    let mut frontier = vec![Cfg::ENTRY];
    for s in &f.body {
        frontier = b.stmt(s, frontier);
    }
    b.connect(&frontier, Cfg::EXIT);
    for (from, label, span) in std::mem::take(&mut b.gotos) {
        match b.labels.get(&label) {
            Some(&to) => b.connect(&from, to),
            None => b
                .cfg
                .unsupported
                .push((span, format!("goto to unknown label `{label}`"))),
        }
    }
    let mut cfg = b.cfg;
    cfg.exits.insert(0, Cfg::EXIT);
    mark_reachable(&mut cfg);
    cfg
}

fn mark_reachable(cfg: &mut Cfg) {
    let mut stack = vec![Cfg::ENTRY];
    cfg.nodes[Cfg::ENTRY].reachable = true;
    while let Some(n) = stack.pop() {
        for &s in &cfg.succs[n] {
            if !cfg.nodes[s].reachable {
                cfg.nodes[s].reachable = true;
                stack.push(s);
            }
        }
    }
}

impl Builder<'_> {
    fn add(&mut self, kind: NodeKind, span: Span) -> NodeId {
        self.cfg.nodes.push(Node {
            kind,
            span,
            reachable: false,
        });
        self.cfg.succs.push(Vec::new());
        self.cfg.preds.push(Vec::new());
        self.cfg.nodes.len() - 1
    }

    fn connect(&mut self, from: &[NodeId], to: NodeId) {
        for &f in from {
            if !self.cfg.succs[f].contains(&to) {
                self.cfg.succs[f].push(to);
                self.cfg.preds[to].push(f);
            }
        }
    }

    /// Adds a node reached from `preds` and returns it.
    fn node(&mut self, kind: NodeKind, span: Span, preds: &[NodeId]) -> NodeId {
        let n = self.add(kind, span);
        self.connect(preds, n);
        n
    }

    fn is_noreturn(&self, e: &Expr) -> bool {
        let mut found = false;
        visit_unconditional(e, &mut |x| {
            if let Some(name) = x.call_target() {
                found |= self.summaries.has(name, Effect::Noreturn);
            }
        });
        found
    }

    fn stmt(&mut self, s: &Stmt, preds: Vec<NodeId>) -> Vec<NodeId> {
        let span = s.span;
        match &s.kind {
            StmtKind::Empty => preds,
            StmtKind::Block(v) => v.iter().fold(preds, |p, s| self.stmt(s, p)),
            StmtKind::Decl(decls) => {
                let mut cur = preds;
                for d in decls.iter().filter(|d| d.init.is_some()) {
                    let noreturn = d.init.as_ref().is_some_and(|e| self.is_noreturn(e));
                    let n = self.node(NodeKind::Decl(d.clone()), d.span, &cur);
                    cur = if noreturn { vec![] } else { vec![n] };
                }
                cur
            }
            StmtKind::Expr(e) => {
                let n = self.node(NodeKind::Expr(e.clone()), span, &preds);
                if self.is_noreturn(e) {
                    vec![]
                } else {
                    vec![n]
                }
            }
            StmtKind::CamlParam { intrinsic, names } => {
                let kind = NodeKind::CamlParam {
                    intrinsic: *intrinsic,
                    names: names.clone(),
                };
                vec![self.node(kind, span, &preds)]
            }
            StmtKind::CamlLocal { names } => {
                vec![self.node(NodeKind::CamlLocal { names: names.clone() }, span, &preds)]
            }
            StmtKind::Opaque(why) => vec![self.node(NodeKind::Opaque(why.clone()), span, &preds)],
            StmtKind::Return(e) => {
                let n = self.node(NodeKind::Return(e.clone()), span, &preds);
                self.cfg.exits.push(n);
                vec![]
            }
            StmtKind::CamlReturn(e) => {
                let n = self.node(NodeKind::CamlReturn(e.clone()), span, &preds);
                self.cfg.exits.push(n);
                vec![]
            }
            StmtKind::If { cond, then, otherwise } => {
                let b = self.node(NodeKind::Branch(cond.clone()), span, &preds);
                let mut out = self.stmt(then, vec![b]);
                match otherwise {
                    Some(o) => out.extend(self.stmt(o, vec![b])),
                    None => out.push(b),
                }
                out
            }
            StmtKind::While { cond, body } => {
                let h = self.node(NodeKind::Branch(cond.clone()), span, &preds);
                self.loop_body(body, h, h)
            }
            StmtKind::DoWhile { body, cond } => {
                let head = self.node(NodeKind::Nop, span, &preds);
                self.stack.push(Breakable {
                    is_loop: true,
                    ..Breakable::default()
                });
                let out = self.stmt(body, vec![head]);
                let ctx = self.stack.pop().unwrap_or_default();
                let mut into_cond = out;
                into_cond.extend(ctx.continues);
                let c = self.node(NodeKind::Branch(cond.clone()), cond.span, &into_cond);
                self.connect(&[c], head);
                let mut exits = vec![c];
                exits.extend(ctx.breaks);
                exits
            }
            StmtKind::For { init, cond, step, body } => {
                let mut cur = preds;
                if let Some(i) = init {
                    cur = self.stmt(i, cur);
                }
                let h = match cond {
                    Some(c) => self.node(NodeKind::Branch(c.clone()), c.span, &cur),
                    None => self.node(NodeKind::Nop, span, &cur),
                };
                self.stack.push(Breakable {
                    is_loop: true,
                    ..Breakable::default()
                });
                let out = self.stmt(body, vec![h]);
                let ctx = self.stack.pop().unwrap_or_default();
                let mut into_step = out;
                into_step.extend(ctx.continues);
                match step {
                    Some(st) => {
                        let n = self.node(NodeKind::Expr(st.clone()), st.span, &into_step);
                        self.connect(&[n], h);
                    }
                    None => self.connect(&into_step, h),
                }
                let mut exits = ctx.breaks;
                if cond.is_some() {
                    exits.insert(0, h);
                }
                exits
            }
            StmtKind::Switch { scrutinee, body } => {
                let b = self.node(NodeKind::Branch(scrutinee.clone()), span, &preds);
                self.stack.push(Breakable {
                    switch: Some(b),
                    ..Breakable::default()
                });
                let mut out = self.stmt(body, vec![]);
                let ctx = self.stack.pop().unwrap_or_default();
                out.extend(ctx.breaks);
                if !ctx.has_default {
                    out.push(b);
                }
                out
            }
            StmtKind::Case { body, .. } | StmtKind::Default(body) => {
                let is_default = matches!(s.kind, StmtKind::Default(_));
                let mut preds = preds;
                match self.stack.iter_mut().rev().find(|c| c.switch.is_some()) {
                    Some(ctx) => {
                        ctx.has_default |= is_default;
                        preds.push(ctx.switch.unwrap_or_default());
                    }
                    None => self
                        .cfg
                        .unsupported
                        .push((span, "case label outside switch".into())),
                }
                self.stmt(body, preds)
            }
            StmtKind::Break => {
                match self.stack.last_mut() {
                    Some(ctx) => ctx.breaks.extend(preds),
                    None => self.cfg.unsupported.push((span, "break outside loop or switch".into())),
                }
                vec![]
            }
            StmtKind::Continue => {
                match self.stack.iter_mut().rev().find(|c| c.is_loop) {
                    Some(ctx) => ctx.continues.extend(preds),
                    None => self.cfg.unsupported.push((span, "continue outside loop".into())),
                }
                vec![]
            }
            StmtKind::Label { name, body } => {
                let n = self.node(NodeKind::Nop, span, &preds);
                if self.labels.insert(name.clone(), n).is_some() {
                    self.cfg.unsupported.push((span, format!("duplicate label `{name}`")));
                }
                self.stmt(body, vec![n])
            }
            StmtKind::Goto(label) => {
                self.gotos.push((preds, label.clone(), span));
                vec![]
            }
        }
    }

    fn loop_body(&mut self, body: &Stmt, head: NodeId, continue_to: NodeId) -> Vec<NodeId> {
        self.stack.push(Breakable {
            is_loop: true,
            ..Breakable::default()
        });
        let out = self.stmt(body, vec![head]);
        let ctx = self.stack.pop().unwrap_or_default();
        self.connect(&out, continue_to);
        self.connect(&ctx.continues, continue_to);
        let mut exits = vec![head];
        exits.extend(ctx.breaks);
        exits
    }
}

/// Visits subexpressions that are evaluated on every execution of `e`:
/// the arms of `?:` and the right side of `&&`/`||` are skipped.
pub fn visit_unconditional<'a>(e: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
    match &e.kind {
        ExprKind::Conditional { cond, .. } => visit_unconditional(cond, f),
        ExprKind::Binary {
            op: BinaryOp::LogAnd | BinaryOp::LogOr,
            lhs,
            ..
        } => visit_unconditional(lhs, f),
        ExprKind::SizeofExpr(_) | ExprKind::SizeofType(_) => {}
        _ => {
            for c in e.children() {
                visit_unconditional(c, f);
            }
        }
    }
    f(e);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c::parse_unit;

    fn cfg_of(src: &str) -> Cfg {
        let unit = parse_unit(src, "t.c").unwrap();
        assert!(unit.errors.is_empty(), "{:?}", unit.errors);
        build_cfg(&unit.functions[0], &Summaries::builtin())
    }

    fn kinds(cfg: &Cfg) -> Vec<String> {
        cfg.statement_nodes()
            .map(|(_, n)| match &n.kind {
                NodeKind::Expr(e) => e.call_target().unwrap_or("expr").to_string(),
                NodeKind::Branch(_) => "branch".into(),
                NodeKind::CamlParam { intrinsic, .. } => format!("{intrinsic:?}"),
                NodeKind::CamlReturn(_) => "camlreturn".into(),
                other => format!("{other:?}"),
            })
            .collect()
    }

    #[test]
    fn straight_line_body() {
        for k in 0..6 {
            let body: String = (0..k).map(|i| format!("f{i}(); ")).collect();
            let cfg = cfg_of(&format!("void g(void) {{ {body} }}"));
            assert_eq!(cfg.nodes.len() - 2, k);
            assert_eq!(cfg.edge_count(), k + 1);
        }
    }

    #[test]
    fn empty_body_connects_entry_to_exit() {
        let cfg = cfg_of("void g(void) { }");
        assert_eq!(cfg.succs[Cfg::ENTRY], vec![Cfg::EXIT]);
    }

    #[test]
    fn notify_stub_spine() {
        let cfg = cfg_of(
            r#"CAMLprim value stub_eventchn_notify(value xce, value port)
{
        CAMLparam2(xce, port);
        int rc;

        caml_enter_blocking_section();
        rc = xenevtchn_notify(_H(xce), Int_val(port));
        caml_leave_blocking_section();

        if (rc == -1)
                caml_failwith("evtchn notify failed");

        CAMLreturn(Val_unit);
}"#,
        );
        assert_eq!(
            kinds(&cfg),
            [
                "CamlParam(2)",
                "caml_enter_blocking_section",
                "expr",
                "caml_leave_blocking_section",
                "branch",
                "caml_failwith",
                "camlreturn"
            ]
        );
        let fail = 7;
        let ret = 8;
        assert!(cfg.succs[fail].is_empty());
        assert!(cfg.succs[ret].is_empty());
        assert_eq!(cfg.succs[6], vec![fail, ret]);
        assert_eq!(cfg.exits, vec![Cfg::EXIT, ret]);
        assert!(cfg.preds[Cfg::EXIT].is_empty());
        assert!(cfg.nodes.iter().skip(2).all(|n| n.reachable));
    }

    #[test]
    fn while_loop_has_back_edge() {
        let cfg = cfg_of("void g(int n) { while (n) n--; done(); }");
        assert_eq!(kinds(&cfg), ["branch", "expr", "done"]);
        assert_eq!(cfg.succs[3], vec![2]);
        assert_eq!(cfg.succs[2], vec![3, 4]);
    }

    #[test]
    fn for_and_do_loops() {
        let cfg = cfg_of("void g(int n) { int i; for (i = 0; i < n; i++) { if (i) continue; f(); } do { h(); } while (n); }");
        // init, cond, branch(if), f, step, nop(do), h, cond(do)
        assert_eq!(cfg.nodes.len() - 2, 8);
        let step = 6;
        assert!(cfg.succs[step].contains(&3));
        assert!(cfg.preds[step].contains(&4), "continue reaches the step");
        assert!(cfg.succs[9].contains(&7), "do-while back edge");
    }

    #[test]
    fn switch_cases_and_fallthrough() {
        let cfg = cfg_of("int g(int n) { int r = 0; switch (n) { case 1: r = 1; case 2: r = 2; break; default: r = 3; } return r; }");
        let sw = 3;
        let (c1, c2, d) = (4, 5, 6);
        assert_eq!(cfg.succs[sw], vec![c1, c2, d]);
        assert!(cfg.succs[c1].contains(&c2), "fallthrough");
        assert!(!cfg.succs[sw].contains(&7), "default present");
        assert_eq!(cfg.preds[7], vec![d, c2]);
    }

    #[test]
    fn goto_is_resolved_and_dead_code_flagged() {
        let cfg = cfg_of("int g(int n) { if (n) goto out; f(); return 1; dead(); out: return 0; }");
        assert!(cfg.unsupported.is_empty());
        let dead = cfg
            .statement_nodes()
            .find(|(_, n)| matches!(&n.kind, NodeKind::Expr(e) if e.call_target() == Some("dead")))
            .unwrap();
        assert!(!dead.1.reachable);
        assert!(cfg.nodes.iter().filter(|n| n.kind == NodeKind::Nop).all(|n| n.reachable));
        let cfg = cfg_of("int g(void) { goto nowhere; }");
        assert_eq!(cfg.unsupported.len(), 1);
    }

    #[test]
    fn conditional_noreturn_does_not_end_path() {
        let cfg = cfg_of("int g(int n) { n ? caml_failwith(\"x\") : 0; n && (caml_failwith(\"y\"), 1); return 1; }");
        assert!(cfg.nodes.iter().skip(2).all(|n| n.reachable));
    }
}
