//! Command-line front end for stublint.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use stublint_core::driver::{analyze, Options, SourceFile, EXIT_FATAL};
use stublint_core::harness::generate_main;
use stublint_core::header::render_header;
use stublint_core::sarif::emit_sarif;
use stublint_core::summaries::Summaries;
use stublint_core::RuleId;

const DEFAULT_SUMMARIES: &str = "stublint-summaries.txt";

/// Checks OCaml C stubs for arity, runtime lock and GC safety bugs.
#[derive(Debug, Parser)]
#[command(name = "stublint", version)]
struct Cli {
    /// `.ml`, `.mli` and `.c` files, or directories to search for them.
    #[arg(required = true)]
    paths: Vec<PathBuf>,

    /// Write C prototypes for the OCaml externals to this file (`-` for stdout).
    #[arg(long, value_name = "FILE")]
    header_out: Option<PathBuf>,

    /// Write a verification harness calling every stub to this file (`-` for stdout).
    #[arg(long, value_name = "FILE")]
    harness_out: Option<PathBuf>,

    /// Write a SARIF 2.1.0 log to this file.
    #[arg(long, value_name = "FILE")]
    sarif: Option<PathBuf>,

    /// Function summaries, overriding the built-in ones.
    /// Defaults to ./stublint-summaries.txt when that file exists.
    #[arg(long, value_name = "FILE")]
    summaries: Option<PathBuf>,

    /// Fail on warnings as well as errors.
    #[arg(long)]
    strict: bool,

    /// Disable a rule, as `RULE_ID=off`. May be repeated.
    #[arg(long = "rule", value_name = "ID=off", value_parser = parse_rule_toggle)]
    disabled: Vec<RuleId>,
}

fn parse_rule_toggle(s: &str) -> Result<RuleId, String> {
    let (id, setting) = s
        .split_once('=')
        .ok_or_else(|| format!("expected RULE_ID=off, got `{s}`"))?;
    if setting != "off" {
        return Err(format!("unknown setting `{setting}`; only `off` is supported"));
    }
    id.parse::<RuleId>().map_err(|e| e.to_string())
}

fn is_source(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("ml" | "mli" | "c")
    )
}

fn collect(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let meta = fs::metadata(path).with_context(|| format!("cannot access {}", path.display()))?;
    if !meta.is_dir() {
        if !is_source(path) {
            bail!("{}: not an .ml, .mli or .c file", path.display());
        }
        out.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("cannot read {}", path.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for entry in entries {
        if entry.is_dir() {
            collect(&entry, out)?;
        } else if is_source(&entry) {
            out.push(entry);
        }
    }
    Ok(())
}

fn load_sources(paths: &[PathBuf]) -> Result<Vec<SourceFile>> {
    let mut files = Vec::new();
    for p in paths {
        collect(p, &mut files)?;
    }
    let mut seen = BTreeSet::new();
    files.retain(|f| seen.insert(f.clone()));
    // declarations first, so that the generated files follow their order
    files.sort_by_key(|f| !matches!(f.extension().and_then(|e| e.to_str()), Some("ml" | "mli")));
    files
        .into_iter()
        .map(|f| {
            let text = fs::read_to_string(&f).with_context(|| format!("cannot read {}", f.display()))?;
            Ok(SourceFile::new(f.to_string_lossy(), text))
        })
        .collect()
}

fn load_summaries(explicit: Option<&Path>) -> Result<Summaries> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let p = PathBuf::from(DEFAULT_SUMMARIES);
            if !p.is_file() {
                return Ok(Summaries::builtin());
            }
            p
        }
    };
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    Summaries::load(&text).with_context(|| format!("{}", path.display()))
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    if path == Path::new("-") {
        std::io::stdout().write_all(contents.as_bytes())?;
        return Ok(());
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: Cli) -> Result<i32> {
    let files = load_sources(&cli.paths)?;
    let opts = Options {
        summaries: load_summaries(cli.summaries.as_deref())?,
        disabled: cli.disabled.iter().copied().collect(),
        strict: cli.strict,
    };
    let report = analyze(&files, &opts);
    if let Some(path) = &cli.header_out {
        write_output(path, &render_header(&report.decls))?;
    }
    if let Some(path) = &cli.harness_out {
        write_output(path, &generate_main(&report.decls))?;
    }
    if let Some(path) = &cli.sarif {
        fs::write(path, emit_sarif(&report.diagnostics))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    print!("{}", report.text());
    Ok(report.exit_status(opts.strict))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("stublint: {e:#}");
            ExitCode::from(EXIT_FATAL as u8)
        }
    }
}
