//! Inputs shared by the benchmarks.

use stublint_core::driver::SourceFile;
use stublint_core::synthetic::synthetic_library;

/// A library of `n` generated stubs.
pub fn library(n: usize) -> Vec<SourceFile> {
    synthetic_library(n)
}

/// One function per literal, each storing it into a `value`.
pub fn literal_stores(n: u32) -> SourceFile {
    let text: String = (0..n)
        .map(|k| format!("void store_{k}(void) {{ value v; v = {k}; }}\n"))
        .collect();
    SourceFile::new("stores.c", text)
}

/// The C side of a generated library, for front-end only measurements.
pub fn c_source(n: usize) -> SourceFile {
    library(n)
        .into_iter()
        .find(|f| f.path.ends_with(".c"))
        .expect("library has a C file")
}
