//! Function summaries: what calling a function does to the runtime lock
//! and the GC.
//!
//! File format, one entry per line:
//!
//! ```text
//! # comment
//! caml_stat_free: no_lock_needed
//! caml_*: requires_lock, may_gc
//! ```
//!
//! A trailing `*` makes the entry a prefix pattern. Later lines replace
//! earlier entries for the same pattern, and an exact name always beats a
//! prefix; among prefixes the longest one wins.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Effect {
    AcquiresLock,
    ReleasesLock,
    RequiresLock,
    NoLockNeeded,
    MayGc,
    Noreturn,
}

impl Effect {
    pub const ALL: [Effect; 6] = [
        Effect::AcquiresLock,
        Effect::ReleasesLock,
        Effect::RequiresLock,
        Effect::NoLockNeeded,
        Effect::MayGc,
        Effect::Noreturn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Effect::AcquiresLock => "acquires_lock",
            Effect::ReleasesLock => "releases_lock",
            Effect::RequiresLock => "requires_lock",
            Effect::NoLockNeeded => "no_lock_needed",
            Effect::MayGc => "may_gc",
            Effect::Noreturn => "noreturn",
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Effect {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Effect::ALL.into_iter().find(|e| e.as_str() == s).ok_or(())
    }
}

pub type EffectSet = BTreeSet<Effect>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryEntry {
    /// Function name, or a prefix when `is_prefix` is set.
    pub pattern: String,
    pub is_prefix: bool,
    pub effects: EffectSet,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct SummaryError {
    pub line: usize,
    pub message: String,
}

pub const BUILTIN_SUMMARIES: &str = "\
caml_*: requires_lock, may_gc
caml_enter_blocking_section: releases_lock
caml_leave_blocking_section: acquires_lock
caml_release_runtime_system: releases_lock
caml_acquire_runtime_system: acquires_lock
caml_stat_free: no_lock_needed
caml_failwith: requires_lock, noreturn
caml_failwith_value: requires_lock, noreturn
caml_invalid_argument: requires_lock, noreturn
caml_invalid_argument_value: requires_lock, noreturn
caml_raise*: requires_lock, noreturn
caml_array_bound_error: requires_lock, noreturn
caml_raise_out_of_memory: requires_lock, noreturn
failwith_xc: requires_lock, noreturn
";

/// Parses summary text into entries, in file order.
pub fn parse_entries(text: &str) -> Result<Vec<SummaryEntry>, SummaryError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let fail = |message: String| SummaryError { line, message };
        let (name, effects) = content
            .split_once(':')
            .ok_or_else(|| fail(format!("expected `name: effect, ...`, found `{content}`")))?;
        let name = name.trim();
        let (pattern, is_prefix) = match name.strip_suffix('*') {
            Some(p) => (p, true),
            None => (name, false),
        };
        let valid = |c: char| c.is_ascii_alphanumeric() || c == '_';
        if pattern.is_empty() && !is_prefix || !pattern.chars().all(valid) {
            return Err(fail(format!("invalid function name `{name}`")));
        }
        let mut set = EffectSet::new();
        for word in effects.split(',').map(str::trim) {
            if word.is_empty() {
                continue;
            }
            let e = word
                .parse::<Effect>()
                .map_err(|()| fail(format!("unknown effect `{word}`")))?;
            set.insert(e);
        }
        if set.contains(&Effect::AcquiresLock) && set.contains(&Effect::ReleasesLock) {
            return Err(fail(format!(
                "`{name}` cannot both acquire and release the lock"
            )));
        }
        if set.contains(&Effect::RequiresLock) && set.contains(&Effect::NoLockNeeded) {
            return Err(fail(format!(
                "`{name}` cannot both require and not need the lock"
            )));
        }
        entries.push(SummaryEntry {
            pattern: pattern.to_string(),
            is_prefix,
            effects: set,
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Summaries {
    exact: BTreeMap<String, EffectSet>,
    prefixes: BTreeMap<String, EffectSet>,
}

impl Summaries {
    /// No entries at all; every function is effect-free.
    pub fn empty() -> Self {
        Summaries::default()
    }

    pub fn builtin() -> Self {
        let mut s = Summaries::empty();
        s.extend(parse_entries(BUILTIN_SUMMARIES).expect("built-in summaries parse"));
        s
    }

    /// Built-ins overridden by the given file contents.
    pub fn load(text: &str) -> Result<Self, SummaryError> {
        let mut s = Summaries::builtin();
        s.extend(parse_entries(text)?);
        Ok(s)
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = SummaryEntry>) {
        for e in entries {
            let map = if e.is_prefix {
                &mut self.prefixes
            } else {
                &mut self.exact
            };
            map.insert(e.pattern, e.effects);
        }
    }

    pub fn insert(&mut self, name: &str, effects: EffectSet) {
        self.exact.insert(name.to_string(), effects);
    }

    pub fn has_exact(&self, name: &str) -> bool {
        self.exact.contains_key(name)
    }

    pub fn lookup(&self, name: &str) -> Option<&EffectSet> {
        if let Some(e) = self.exact.get(name) {
            return Some(e);
        }
        self.prefixes
            .iter()
            .filter(|(p, _)| name.starts_with(p.as_str()))
            .max_by_key(|(p, _)| p.len())
            .map(|(_, e)| e)
    }

    pub fn has(&self, name: &str, effect: Effect) -> bool {
        self.lookup(name).is_some_and(|s| s.contains(&effect))
    }

    pub fn requires_lock(&self, name: &str) -> bool {
        self.lookup(name)
            .is_some_and(|s| s.contains(&Effect::RequiresLock) && !s.contains(&Effect::NoLockNeeded))
    }
}
