//! Static checks for OCaml C stubs.

pub mod arity;
pub mod c;
pub mod cfg;
pub mod dataflow;
pub mod diagnostic;
pub mod driver;
pub mod harness;
pub mod header;
pub mod lock;
pub mod ml;
pub mod naked;
pub mod sarif;
pub mod summaries;
pub mod synthetic;
pub mod value_safety;

pub use diagnostic::{Diagnostic, Location, RuleId, Severity};
pub use ml::{parse_ml_externals, ExternalDecl};
