#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use stublint_core::driver::{analyze, Options, Report, SourceFile};
use stublint_core::Severity;

pub const BUG_CASES: [&str; 6] = [
    "arity_refactor",
    "void_stub",
    "custom_deref",
    "domain_create_deref",
    "abstract_stale",
    "tag_cons",
];

pub const FIXED_CASES: [&str; 6] = [
    "arity_fixed",
    "void_fixed",
    "custom_deref_fixed",
    "domain_create_fixed",
    "abstract_fixed",
    "tag_cons_fixed",
];

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

/// Sources of one case, named relative to the case directory, `.ml`
/// files first.
pub fn case_sources(case: &str) -> Vec<SourceFile> {
    case_sources_with_prefix(case, "")
}

pub fn case_sources_with_prefix(case: &str, prefix: &str) -> Vec<SourceFile> {
    let dir = corpus_dir().join(case);
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".ml") || n.ends_with(".c"))
        .collect();
    names.sort_by_key(|n| (!n.ends_with(".ml"), n.clone()));
    names
        .into_iter()
        .map(|n| {
            let text = fs::read_to_string(dir.join(&n)).unwrap();
            SourceFile::new(format!("{prefix}{n}"), text)
        })
        .collect()
}

/// Every case of the corpus, with paths prefixed by the case name.
pub fn full_corpus() -> Vec<SourceFile> {
    BUG_CASES
        .iter()
        .chain(FIXED_CASES.iter())
        .flat_map(|c| case_sources_with_prefix(c, &format!("{c}/")))
        .collect()
}

pub fn expected(case: &str) -> Vec<String> {
    let text = fs::read_to_string(corpus_dir().join(case).join("expected.txt")).unwrap();
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

pub fn run_case(case: &str) -> Report {
    analyze(&case_sources(case), &Options::default())
}

/// `RULE file:line` for every diagnostic above note severity.
pub fn observed(report: &Report) -> Vec<String> {
    report
        .diagnostics
        .iter()
        .filter(|d| d.severity != Severity::Note)
        .map(|d| format!("{} {}:{}", d.rule, d.location.file, d.location.line))
        .collect()
}

/// Mismatch between a case's observed and expected diagnostics.
pub fn check_case(case: &str) -> Result<(), String> {
    let report = run_case(case);
    let got = observed(&report);
    let want = expected(case);
    if got == want {
        Ok(())
    } else {
        Err(format!("{case}: expected {want:?}, got {got:?}\n{}", report.text()))
    }
}
