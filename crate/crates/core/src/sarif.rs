//! SARIF 2.1.0 output.

use serde::Serialize;

use crate::diagnostic::{Diagnostic, Location, RuleId, Severity};

pub const SARIF_SCHEMA: &str = "https://json.schemastore.org/sarif-2.1.0.json";
pub const TOOL_NAME: &str = "stublint";

#[derive(Serialize)]
struct Log {
    #[serde(rename = "$schema")]
    schema: &'static str,
    version: &'static str,
    runs: Vec<Run>,
}

#[derive(Serialize)]
struct Run {
    tool: Tool,
    results: Vec<SarifResult>,
}

#[derive(Serialize)]
struct Tool {
    driver: Driver,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Driver {
    name: &'static str,
    version: &'static str,
    rules: Vec<Rule>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Rule {
    id: &'static str,
    short_description: Text,
    default_configuration: Configuration,
}

#[derive(Serialize)]
struct Configuration {
    level: &'static str,
}

#[derive(Serialize)]
struct Text {
    text: String,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SarifResult {
    rule_id: &'static str,
    rule_index: usize,
    level: &'static str,
    message: Text,
    locations: Vec<SarifLocation>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    related_locations: Vec<SarifLocation>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SarifLocation {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<usize>,
    physical_location: PhysicalLocation,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PhysicalLocation {
    artifact_location: ArtifactLocation,
    region: Region,
}

#[derive(Serialize)]
struct ArtifactLocation {
    uri: String,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Region {
    start_line: u32,
    start_column: u32,
}

fn level(s: Severity) -> &'static str {
    match s {
        Severity::Error => "error",
        Severity::Warning => "warning",
        Severity::Note => "note",
    }
}

fn default_level(rule: RuleId) -> &'static str {
    match rule {
        RuleId::MissingCamlparam | RuleId::CamlparamArity | RuleId::UnsupportedConstruct => "warning",
        RuleId::Note => "note",
        _ => "error",
    }
}

/// Turns a file path into a relative URI reference.
fn uri(path: &str) -> String {
    let mut out = String::with_capacity(path.len());
    for b in path.replace('\\', "/").bytes() {
        if b.is_ascii_alphanumeric() || b"-._~/:".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn location(loc: &Location, id: Option<usize>) -> SarifLocation {
    SarifLocation {
        id,
        physical_location: PhysicalLocation {
            artifact_location: ArtifactLocation { uri: uri(&loc.file) },
            region: Region {
                start_line: loc.line.max(1),
                start_column: loc.column.max(1),
            },
        },
    }
}

/// Serialises diagnostics as a single-run SARIF log. Results follow the
/// order of `diags`, which callers normalise first.
pub fn emit_sarif(diags: &[Diagnostic]) -> String {
    let rules = RuleId::ALL
        .iter()
        .map(|r| Rule {
            id: r.as_str(),
            short_description: Text {
                text: r.short_description().to_string(),
            },
            default_configuration: Configuration {
                level: default_level(*r),
            },
        })
        .collect();
    let results = diags
        .iter()
        .map(|d| SarifResult {
            rule_id: d.rule.as_str(),
            rule_index: RuleId::ALL.iter().position(|r| *r == d.rule).unwrap_or(0),
            level: level(d.severity),
            message: Text {
                text: d.message.clone(),
            },
            locations: vec![location(&d.location, None)],
            related_locations: d.related.iter().map(|r| location(r, Some(0))).collect(),
        })
        .collect();
    let log = Log {
        schema: SARIF_SCHEMA,
        version: "2.1.0",
        runs: vec![Run {
            tool: Tool {
                driver: Driver {
                    name: TOOL_NAME,
                    version: env!("CARGO_PKG_VERSION"),
                    rules,
                },
            },
            results,
        }],
    };
    let mut s = serde_json::to_string_pretty(&log).expect("SARIF log serialises");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_log_has_empty_results() {
        let v: serde_json::Value = serde_json::from_str(&emit_sarif(&[])).unwrap();
        assert_eq!(v["version"], "2.1.0");
        assert_eq!(v["runs"][0]["results"].as_array().unwrap().len(), 0);
        assert_eq!(v["runs"][0]["tool"]["driver"]["rules"].as_array().unwrap().len(), RuleId::ALL.len());
    }

    #[test]
    fn levels_map_one_to_one() {
        let loc = Location::new("dir/a b.c", 3, 4);
        let diags = vec![
            Diagnostic::error(RuleId::NakedPointer, loc.clone(), "x"),
            Diagnostic::warning(RuleId::MissingCamlparam, loc.clone(), "y"),
            Diagnostic::note(loc.clone(), "z").with_related(Location::new("a.ml", 1, 1)),
        ];
        let v: serde_json::Value = serde_json::from_str(&emit_sarif(&diags)).unwrap();
        let results = v["runs"][0]["results"].as_array().unwrap();
        let levels: Vec<_> = results.iter().map(|r| r["level"].as_str().unwrap()).collect();
        assert_eq!(levels, ["error", "warning", "note"]);
        assert_eq!(results[0]["ruleId"], "NAKED_POINTER");
        let phys = &results[0]["locations"][0]["physicalLocation"];
        assert_eq!(phys["artifactLocation"]["uri"], "dir/a%20b.c");
        assert_eq!(phys["region"]["startLine"], 3);
        assert_eq!(results[2]["relatedLocations"][0]["physicalLocation"]["artifactLocation"]["uri"], "a.ml");
    }
}
