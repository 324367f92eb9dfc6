//! Generated stub libraries for scale tests and benchmarks.
//!
//! Each stub is built from a handful of shapes seen in real bindings:
//! blocking sections around a C call, custom block unwrapping, list and
//! record construction, and error paths through `caml_failwith`.

use std::fmt::Write;

use crate::driver::SourceFile;

const PRELUDE: &str = "\
#include <caml/mlvalues.h>
#include <caml/memory.h>
#include <caml/alloc.h>
#include <caml/fail.h>
#include <caml/custom.h>

struct handle;
struct handle *ffi_open(int flags);
int ffi_query(struct handle *h, int port, long *out);
int ffi_close(struct handle *h);

static inline struct handle *handle_of_val(value v)
{
    struct handle *h = *(struct handle **)Data_custom_val(v);
    return h;
}
";

fn blocking_call(out: &mut String, name: &str, i: usize) {
    let _ = write!(
        out,
        "\
CAMLprim value {name}(value h_val, value port)
{{
    CAMLparam2(h_val, port);
    CAMLlocal1(result);
    struct handle *h = handle_of_val(h_val);
    int c_port = Int_val(port);
    long answer = 0;
    int rc;

    caml_enter_blocking_section();
    rc = ffi_query(h, c_port + {i}, &answer);
    caml_leave_blocking_section();

    if (rc < 0)
        caml_failwith(\"{name}: query failed\");

    result = caml_alloc_tuple(2);
    Store_field(result, 0, Val_int(rc));
    Store_field(result, 1, caml_copy_int64(answer));
    CAMLreturn(result);
}}
"
    );
}

fn list_builder(out: &mut String, name: &str, i: usize) {
    let _ = write!(
        out,
        "\
CAMLprim value {name}(value count)
{{
    CAMLparam1(count);
    CAMLlocal2(list, cell);
    int n = Int_val(count);
    int k;

    list = Val_emptylist;
    for (k = 0; k < n; k++) {{
        cell = caml_alloc(2, Tag_cons);
        Store_field(cell, 0, Val_int(k * {i}));
        Store_field(cell, 1, list);
        list = cell;
    }}
    CAMLreturn(list);
}}
"
    );
}

fn variant_builder(out: &mut String, name: &str, i: usize) {
    let _ = write!(
        out,
        "\
CAMLprim value {name}(value flag)
{{
    CAMLparam1(flag);
    CAMLlocal2(payload, res);
    int tag;

    switch (Int_val(flag)) {{
    case 0:
        tag = 0;
        payload = Val_int({i});
        break;
    case 1:
        tag = 1;
        payload = Val_emptylist;
        break;
    default:
        caml_invalid_argument(\"{name}\");
    }}

    res = caml_alloc_small(1, tag);
    Field(res, 0) = payload;
    CAMLreturn(res);
}}
"
    );
}

fn open_custom(out: &mut String, name: &str, i: usize) {
    let _ = write!(
        out,
        "\
CAMLprim value {name}(value unit)
{{
    CAMLparam1(unit);
    CAMLlocal1(result);
    struct handle *h;

    caml_enter_blocking_section();
    h = ffi_open({i});
    caml_leave_blocking_section();

    if (h == NULL)
        caml_failwith(\"{name}: open failed\");

    result = caml_alloc_custom(&handle_ops, sizeof(h), 0, 1);
    *(struct handle **)Data_custom_val(result) = h;
    CAMLreturn(result);
}}
"
    );
}

fn close_custom(out: &mut String, name: &str, _i: usize) {
    let _ = write!(
        out,
        "\
CAMLprim value {name}(value h_val)
{{
    CAMLparam1(h_val);
    struct handle *h = handle_of_val(h_val);
    int rc;

    if (h == NULL)
        CAMLreturn(Val_unit);

    caml_enter_blocking_section();
    rc = ffi_close(h);
    caml_leave_blocking_section();

    if (rc != 0) {{
        caml_failwith(\"close failed\");
    }}
    CAMLreturn(Val_bool(rc == 0));
}}
"
    );
}

type Shape = (fn(&mut String, &str, usize), &'static str);

const SHAPES: [Shape; 5] = [
    (blocking_call, "handle -> int -> int * int64"),
    (list_builder, "int -> int list"),
    (variant_builder, "int -> flags"),
    (open_custom, "unit -> handle"),
    (close_custom, "handle -> bool"),
];

/// A library of `n` stubs: one `.ml` file and one `.c` file. The shapes
/// cycle so that any `n` covers each of them evenly. All stubs are correct,
/// so a sound analysis reports no errors or warnings on them.
pub fn synthetic_library(n: usize) -> Vec<SourceFile> {
    let mut ml = String::from("type handle\ntype flags\n\n");
    let mut c = String::from(PRELUDE);
    for i in 0..n {
        let (emit, ty) = SHAPES[i % SHAPES.len()];
        let name = format!("stub_synthetic_{i}");
        let _ = writeln!(ml, "external synthetic_{i} : {ty} = \"{name}\"");
        c.push('\n');
        emit(&mut c, &name, i);
    }
    vec![
        SourceFile::new("synthetic.ml", ml),
        SourceFile::new("synthetic_stubs.c", c),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{analyze, Options};
    use crate::diagnostic::Severity;

    #[test]
    fn generated_stubs_are_clean() {
        let files = synthetic_library(10);
        let report = analyze(&files, &Options::default());
        let bad: Vec<_> = report
            .diagnostics
            .iter()
            .filter(|d| d.severity != Severity::Note)
            .collect();
        assert!(bad.is_empty(), "{bad:#?}");
        assert_eq!(report.decls.len(), 10);
    }

    #[test]
    fn stubs_are_about_thirty_lines() {
        let files = synthetic_library(100);
        let lines = files[1].text.lines().count() - PRELUDE.lines().count();
        let per_stub = lines / 100;
        assert!((15..=35).contains(&per_stub), "{per_stub}");
    }
}
