//! Diagnostics shared by every checker.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleId {
    ArityMismatch,
    VoidStub,
    ValueDerefUnlocked,
    RuntimeCallUnlocked,
    DerivedPtrStale,
    MissingCamlparam,
    CamlparamArity,
    NakedPointer,
    UnbalancedLock,
    UnsupportedConstruct,
    Note,
}

impl RuleId {
    pub const ALL: [RuleId; 11] = [
        RuleId::ArityMismatch,
        RuleId::VoidStub,
        RuleId::ValueDerefUnlocked,
        RuleId::RuntimeCallUnlocked,
        RuleId::DerivedPtrStale,
        RuleId::MissingCamlparam,
        RuleId::CamlparamArity,
        RuleId::NakedPointer,
        RuleId::UnbalancedLock,
        RuleId::UnsupportedConstruct,
        RuleId::Note,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::ArityMismatch => "ARITY_MISMATCH",
            RuleId::VoidStub => "VOID_STUB",
            RuleId::ValueDerefUnlocked => "VALUE_DEREF_UNLOCKED",
            RuleId::RuntimeCallUnlocked => "RUNTIME_CALL_UNLOCKED",
            RuleId::DerivedPtrStale => "DERIVED_PTR_STALE",
            RuleId::MissingCamlparam => "MISSING_CAMLPARAM",
            RuleId::CamlparamArity => "CAMLPARAM_ARITY",
            RuleId::NakedPointer => "NAKED_POINTER",
            RuleId::UnbalancedLock => "UNBALANCED_LOCK",
            RuleId::UnsupportedConstruct => "UNSUPPORTED_CONSTRUCT",
            RuleId::Note => "NOTE",
        }
    }

    /// One-line description used for the SARIF rules table.
    pub fn short_description(self) -> &'static str {
        match self {
            RuleId::ArityMismatch => {
                "C stub parameter count does not match the OCaml external declaration"
            }
            RuleId::VoidStub => "C stub declared (void) but OCaml always passes one argument",
            RuleId::ValueDerefUnlocked => {
                "OCaml value dereferenced without holding the runtime lock"
            }
            RuleId::RuntimeCallUnlocked => "OCaml runtime function called without the runtime lock",
            RuleId::DerivedPtrStale => {
                "C pointer into an OCaml block dereferenced after the GC may have moved it"
            }
            RuleId::MissingCamlparam => "stub with value parameters or locals does not begin with CAMLparam",
            RuleId::CamlparamArity => "CAMLparam registers a different number of values than the stub takes",
            RuleId::NakedPointer => "constant naked pointer stored into an OCaml value",
            RuleId::UnbalancedLock => "runtime lock released or reacquired out of order",
            RuleId::UnsupportedConstruct => "construct outside the analysed C subset",
            RuleId::Note => "informational note",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown rule id `{0}`")]
pub struct UnknownRule(pub String);

impl FromStr for RuleId {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownRule(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Note,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Note => "note",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// 1-based line and column in an input file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub file: String,
    pub line: u32,
    pub column: u32,
}

impl Location {
    pub fn new(file: impl Into<String>, line: u32, column: u32) -> Self {
        Location {
            file: file.into(),
            line,
            column,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule: RuleId,
    pub severity: Severity,
    pub location: Location,
    pub message: String,
    pub related: Option<Location>,
}

impl Diagnostic {
    pub fn new(rule: RuleId, severity: Severity, location: Location, message: impl Into<String>) -> Self {
        Diagnostic {
            rule,
            severity,
            location,
            message: message.into(),
            related: None,
        }
    }

    pub fn error(rule: RuleId, location: Location, message: impl Into<String>) -> Self {
        Self::new(rule, Severity::Error, location, message)
    }

    pub fn warning(rule: RuleId, location: Location, message: impl Into<String>) -> Self {
        Self::new(rule, Severity::Warning, location, message)
    }

    pub fn note(location: Location, message: impl Into<String>) -> Self {
        Self::new(RuleId::Note, Severity::Note, location, message)
    }

    pub fn with_related(mut self, related: Location) -> Self {
        self.related = Some(related);
        self
    }

    fn sort_key(&self) -> (&Location, RuleId, Severity, &str, &Option<Location>) {
        (&self.location, self.rule, self.severity, &self.message, &self.related)
    }
}

impl Ord for Diagnostic {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for Diagnostic {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}: {}: {}",
            self.location, self.severity, self.rule, self.message
        )
    }
}

/// Sorts diagnostics into file/line/column order and drops exact duplicates.
pub fn normalize(diags: &mut Vec<Diagnostic>) {
    diags.sort();
    diags.dedup();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_ids_round_trip_through_strings() {
        for rule in RuleId::ALL {
            assert_eq!(rule.as_str().parse::<RuleId>().unwrap(), rule);
        }
        assert!("NOT_A_RULE".parse::<RuleId>().is_err());
        assert_eq!("naked_pointer".parse::<RuleId>().unwrap(), RuleId::NakedPointer);
    }

    #[test]
    fn text_rendering_matches_report_format() {
        let d = Diagnostic::error(
            RuleId::NakedPointer,
            Location::new("stubs.c", 12, 5),
            "constant 0 stored into OCaml value `arch_obj`",
        );
        assert_eq!(
            d.to_string(),
            "stubs.c:12:5: error: NAKED_POINTER: constant 0 stored into OCaml value `arch_obj`"
        );
    }

    #[test]
    fn normalize_orders_by_location() {
        let mut v = vec![
            Diagnostic::note(Location::new("b.c", 1, 1), "x"),
            Diagnostic::note(Location::new("a.c", 9, 1), "x"),
            Diagnostic::note(Location::new("a.c", 2, 7), "x"),
            Diagnostic::note(Location::new("a.c", 2, 7), "x"),
        ];
        normalize(&mut v);
        let locs: Vec<String> = v.iter().map(|d| d.location.to_string()).collect();
        assert_eq!(locs, ["a.c:2:7", "a.c:9:1", "b.c:1:1"]);
    }
}
