use std::fs;
use std::process::Command;

use stublint_core::header::render_header;
use stublint_core::parse_ml_externals;

const SHIM: &str = "\
typedef long value;
typedef long intnat;
#define CAMLprim
";

const ML: &str = r#"
external add_nat: nat -> int -> int -> nat -> int -> int -> int -> int
  = "add_nat_bytecode" "add_nat_native"
external sqrt_ : float -> float = "sqrt_byte" "sqrt_native" [@@unboxed] [@@noalloc]
external len : string -> (int [@untagged]) = "len_byte" "len_native"
external init : unit -> handle = "stub_init"
external id : 'a -> 'a = "%identity"
"#;

#[test]
fn generated_header_compiles() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("caml")).unwrap();
    fs::write(dir.path().join("caml/mlvalues.h"), SHIM).unwrap();
    let parsed = parse_ml_externals(ML, "stubs.ml");
    assert!(parsed.errors.is_empty(), "{:?}", parsed.errors);
    let header = render_header(&parsed.decls);
    fs::write(dir.path().join("stubs.h"), &header).unwrap();
    fs::write(dir.path().join("use.c"), "#include \"stubs.h\"\nint main(void) { return 0; }\n").unwrap();
    let out = Command::new("cc")
        .current_dir(dir.path())
        .args(["-std=c99", "-Wall", "-Werror", "-I.", "-c", "use.c", "-o", "use.o"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}\n{header}",
        String::from_utf8_lossy(&out.stderr)
    );
}
