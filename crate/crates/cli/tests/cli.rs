use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(case: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/corpus")
        .join(case)
}

fn stublint(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stublint"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("stublint runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn buggy_binding_fails_with_text_report() {
    let dir = tempfile::tempdir().unwrap();
    let case = corpus("custom_deref");
    let out = stublint(&[case.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1, "{text}");
    assert!(text.contains("eventchn_stubs.c:15:31: error: VALUE_DEREF_UNLOCKED: "), "{text}");
}

#[test]
fn fixed_binding_passes() {
    let dir = tempfile::tempdir().unwrap();
    let case = corpus("domain_create_fixed");
    let out = stublint(&["--strict", case.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn sarif_output_matches_text() {
    let dir = tempfile::tempdir().unwrap();
    let case = corpus("abstract_stale");
    let out = stublint(&["--sarif", "out.sarif", case.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let log: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out.sarif")).unwrap()).unwrap();
    let results = log["runs"][0]["results"].as_array().unwrap();
    assert_eq!(results.len(), stdout(&out).lines().count());
    assert!(results.iter().all(|r| r["ruleId"] == "DERIVED_PTR_STALE"));
}

#[test]
fn rules_can_be_disabled() {
    let dir = tempfile::tempdir().unwrap();
    let case = corpus("tag_cons");
    let out = stublint(&["--rule", "NAKED_POINTER=off", case.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "");
    let out = stublint(&["--rule", "NAKED_POINTER=on", case.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn warnings_gate_only_under_strict() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("w.c"), "CAMLprim value f(value x)\n{\n    return x;\n}\n").unwrap();
    let out = stublint(&["w.c"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("warning: MISSING_CAMLPARAM"));
    assert_eq!(stublint(&["--strict", "w.c"], dir.path()).status.code(), Some(1));
}

#[test]
fn generated_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let case = corpus("arity_fixed");
    let out = stublint(
        &["--header-out", "stubs.h", "--harness-out", "main.c", case.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let header = fs::read_to_string(dir.path().join("stubs.h")).unwrap();
    assert!(header.starts_with("/* AUTOGENERATED FILE, DO NOT EDIT */\n"));
    assert!(header.contains("CAMLprim value stub_xc_domain_assign_device(value, value, value);"));
    let harness = fs::read_to_string(dir.path().join("main.c")).unwrap();
    assert!(harness.contains("stub_xc_domain_assign_device("));
}

#[test]
fn summaries_file_is_picked_up_by_default() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.c"),
        "CAMLprim value f(value x)\n{\n    CAMLparam1(x);\n    my_unlock();\n    g(Field(x, 0));\n    my_lock();\n    CAMLreturn(x);\n}\n",
    )
    .unwrap();
    assert_eq!(stublint(&["s.c"], dir.path()).status.code(), Some(0));
    fs::write(
        dir.path().join("stublint-summaries.txt"),
        "# project locking helpers\nmy_unlock: releases_lock, may_gc\nmy_lock: acquires_lock\n",
    )
    .unwrap();
    let out = stublint(&["s.c"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("s.c:5:"), "{}", stdout(&out));
    fs::write(dir.path().join("bad.txt"), "my_lock: flies\n").unwrap();
    let out = stublint(&["--summaries", "bad.txt", "s.c"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn fatal_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(stublint(&["missing.c"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.ml"), "external f : = \"f\"\n").unwrap();
    assert_eq!(stublint(&["bad.ml"], dir.path()).status.code(), Some(2));
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let root = corpus("");
    let a = stublint(&[root.to_str().unwrap()], dir.path());
    let b = stublint(&[root.to_str().unwrap()], dir.path());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), Some(1));
}
