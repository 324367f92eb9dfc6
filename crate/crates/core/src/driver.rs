//! The analysis pipeline over a set of OCaml and C sources.

use std::collections::BTreeSet;

use crate::arity::check_arity;
use crate::c::ast::StubFunction;
use crate::c::preprocess::PreprocessError;
use crate::c::{parse_unit, StubUnit};
use crate::cfg::{build_cfg, Cfg};
use crate::diagnostic::{normalize, Diagnostic, Location, RuleId, Severity};
use crate::lock::{calls_matching, check_lock_balance, classify_call, solve, LockOp, LockState};
use crate::ml::{parse_ml_externals, ExternalDecl};
use crate::naked::{check_naked, propagate};
use crate::summaries::{Effect, EffectSet, Summaries};
use crate::value_safety::{address_taken_notes, check_camlparam, check_deref_safety, track_values};

/// A source file handed to the driver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        SourceFile {
            path: path.into(),
            text: text.into(),
        }
    }

    fn is_ocaml(&self) -> bool {
        self.path.ends_with(".ml") || self.path.ends_with(".mli")
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub summaries: Summaries,
    pub disabled: BTreeSet<RuleId>,
    /// Warnings fail the run as well as errors.
    pub strict: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            summaries: Summaries::builtin(),
            disabled: BTreeSet::new(),
            strict: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    /// Sorted, deduplicated and filtered by the disabled rules.
    pub diagnostics: Vec<Diagnostic>,
    /// External declarations, in input order, without duplicates.
    pub decls: Vec<ExternalDecl>,
    /// Inputs that could not be parsed, fully or in part.
    pub fatal_errors: usize,
}

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_LINT: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

impl Report {
    pub fn exit_status(&self, strict: bool) -> i32 {
        if self.fatal_errors > 0 {
            return EXIT_FATAL;
        }
        let failing = |d: &Diagnostic| {
            d.severity == Severity::Error || (strict && d.severity == Severity::Warning)
        };
        if self.diagnostics.iter().any(failing) {
            EXIT_LINT
        } else {
            EXIT_CLEAN
        }
    }

    pub fn text(&self) -> String {
        render_text(&self.diagnostics)
    }
}

pub fn render_text(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("{d}\n")).collect()
}

/// Declarations from all OCaml inputs. A declaration repeated in an
/// interface and its implementation is kept once.
pub fn collect_decls(files: &[SourceFile]) -> (Vec<ExternalDecl>, Vec<Diagnostic>) {
    let mut decls: Vec<ExternalDecl> = Vec::new();
    let mut errors = Vec::new();
    for f in files.iter().filter(|f| f.is_ocaml()) {
        let parsed = parse_ml_externals(&f.text, &f.path);
        for e in parsed.errors {
            errors.push(Diagnostic::error(
                RuleId::UnsupportedConstruct,
                e.location,
                format!("malformed external declaration: {}", e.message),
            ));
        }
        for d in parsed.decls {
            let dup = decls.iter().any(|o| {
                o.ocaml_name == d.ocaml_name
                    && o.byte_name == d.byte_name
                    && o.native_name == d.native_name
                    && o.arity == d.arity
            });
            if !dup {
                decls.push(d);
            }
        }
    }
    (decls, errors)
}

/// Effects of a function as seen by its callers, from its body.
fn derive_effects(f: &StubFunction, cfg: &Cfg, summaries: &Summaries, unit: &StubUnit) -> EffectSet {
    let map = solve(cfg, summaries);
    let values = track_values(f, cfg, &map, summaries, &unit.globals);
    let mut effects = EffectSet::new();
    if !values.events.is_empty() {
        effects.insert(Effect::RequiresLock);
    }
    let gc = cfg.statement_nodes().any(|(id, n)| {
        map.at(id) != LockState::Bottom
            && calls_matching(&n.kind, |name| {
                summaries.has(name, Effect::MayGc)
                    || classify_call(name, summaries) == LockOp::EnterBlocking
            })
    });
    if gc {
        effects.insert(Effect::MayGc);
    }
    let exit_state = cfg.exits.iter().fold(LockState::Bottom, |acc, &x| {
        let s = if x == Cfg::EXIT { map.at(x) } else { map.after[x] };
        acc.join(s)
    });
    match exit_state {
        LockState::Bottom => {
            effects.insert(Effect::Noreturn);
        }
        LockState::Released => {
            effects.insert(Effect::ReleasesLock);
        }
        _ => {}
    }
    effects
}

/// Summaries extended with what the functions defined in `unit` do, so
/// that calls between them are checked like calls into the runtime.
/// Entries given explicitly (built in or by the user) take precedence.
pub fn unit_summaries(unit: &StubUnit, base: &Summaries) -> Summaries {
    let mut current = base.clone();
    let local: Vec<&StubFunction> = unit
        .functions
        .iter()
        .filter(|f| !base.has_exact(f.name()))
        .collect();
    for f in &local {
        current.insert(f.name(), EffectSet::new());
    }
    // effects only grow, so this settles within a bounded number of rounds
    for _ in 0..=local.len() * Effect::ALL.len() {
        let mut changed = false;
        for f in &local {
            let cfg = build_cfg(f, &current);
            let mut effects = derive_effects(f, &cfg, &current, unit);
            if let Some(old) = current.lookup(f.name()) {
                effects.extend(old.iter().copied());
            }
            if effects.contains(&Effect::ReleasesLock) && effects.contains(&Effect::AcquiresLock) {
                effects.remove(&Effect::AcquiresLock);
            }
            if current.lookup(f.name()) != Some(&effects) {
                current.insert(f.name(), effects);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    current
}

/// All per-function checks for one parsed unit.
pub fn analyze_unit(unit: &StubUnit, base: &Summaries) -> Vec<Diagnostic> {
    let summaries = unit_summaries(unit, base);
    let file = unit.file.as_str();
    let mut out = unit.diagnostics.clone();
    out.extend(unit.errors.iter().cloned());
    for f in &unit.functions {
        let cfg = build_cfg(f, &summaries);
        for (span, msg) in &cfg.unsupported {
            out.push(Diagnostic::warning(
                RuleId::UnsupportedConstruct,
                unit.location(*span),
                msg.clone(),
            ));
        }
        let map = solve(&cfg, &summaries);
        out.extend(check_lock_balance(f, &cfg, &map, &summaries, file));
        let values = track_values(f, &cfg, &map, &summaries, &unit.globals);
        out.extend(check_deref_safety(&values.events, file));
        out.extend(address_taken_notes(&values, file));
        out.extend(check_camlparam(f, file));
        let envs = propagate(&cfg);
        out.extend(check_naked(f, &cfg, &envs, &unit.globals, file));
    }
    out
}

pub fn analyze(files: &[SourceFile], opts: &Options) -> Report {
    let (decls, mut diags) = collect_decls(files);
    let mut fatal_errors = diags.len();
    let mut units = Vec::new();
    for f in files.iter().filter(|f| !f.is_ocaml()) {
        match parse_unit(&f.text, &f.path) {
            Ok(unit) => {
                fatal_errors += unit.errors.len();
                diags.extend(analyze_unit(&unit, &opts.summaries));
                units.push(unit);
            }
            Err(e) => {
                fatal_errors += 1;
                let span = match &e {
                    PreprocessError::Lex(l) => l.span,
                    PreprocessError::RecursiveMacro { span, .. } | PreprocessError::Directive { span, .. } => *span,
                };
                diags.push(Diagnostic::error(
                    RuleId::UnsupportedConstruct,
                    Location::new(f.path.clone(), span.line, span.column),
                    format!("cannot preprocess file: {e}"),
                ));
            }
        }
    }
    diags.extend(check_arity(&decls, &units));
    for d in &decls {
        diags.extend(crate::header::prototypes_for(d).diagnostics);
    }
    diags.retain(|d| !opts.disabled.contains(&d.rule));
    normalize(&mut diags);
    Report {
        diagnostics: diags,
        decls,
        fatal_errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stubs_calling_each_other() {
        let c = r#"
static void release(void) { caml_enter_blocking_section(); }
static void die(const char *m) { caml_failwith(m); }
static int peek(value v) { return Field(v, 0); }
CAMLprim value stub(value v)
{
    CAMLparam1(v);
    release();
    peek(v);
    caml_leave_blocking_section();
    if (Int_val(v)) die("no");
    CAMLreturn(Val_unit);
}
"#;
        let unit = parse_unit(c, "s.c").unwrap();
        let s = unit_summaries(&unit, &Summaries::builtin());
        assert!(s.has("release", Effect::ReleasesLock));
        assert!(s.has("release", Effect::MayGc));
        assert!(s.has("die", Effect::Noreturn));
        assert!(s.requires_lock("peek"));
        let diags = analyze_unit(&unit, &Summaries::builtin());
        let rules: Vec<_> = diags.iter().map(|d| (d.rule, d.location.line)).collect();
        assert_eq!(rules, [(RuleId::RuntimeCallUnlocked, 9)]);
    }

    #[test]
    fn duplicate_interface_declarations_are_merged() {
        let files = vec![
            SourceFile::new("a.ml", "external f : int -> int = \"f_stub\""),
            SourceFile::new("a.mli", "external f : int -> int = \"f_stub\""),
            SourceFile::new("a.c", "CAMLprim value f_stub(value x) { CAMLparam1(x); CAMLreturn(x); }"),
        ];
        let r = analyze(&files, &Options::default());
        assert_eq!(r.decls.len(), 1);
        assert!(r.diagnostics.is_empty(), "{:?}", r.diagnostics);
        assert_eq!(r.exit_status(false), EXIT_CLEAN);
    }

    #[test]
    fn exit_statuses_and_rule_suppression() {
        let files = vec![SourceFile::new("a.c", "CAMLprim value f(value x) { return x; }")];
        let r = analyze(&files, &Options::default());
        assert_eq!(r.exit_status(false), EXIT_CLEAN);
        assert_eq!(r.exit_status(true), EXIT_LINT);
        let mut opts = Options::default();
        opts.disabled.insert(RuleId::MissingCamlparam);
        assert!(analyze(&files, &opts).diagnostics.is_empty());
        let broken = vec![SourceFile::new("b.c", "int f(void) { if (x) { return 1; }")];
        assert_eq!(analyze(&broken, &Options::default()).exit_status(false), EXIT_FATAL);
    }
}
