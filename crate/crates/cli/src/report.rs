//! Report documents and their deterministic emitters.
//!
//! Reports are serialized with a fixed key order and numbers printed with 17
//! significant digits, so identical scenarios produce byte-identical bodies.
//! Timing is deliberately kept out of the body (it goes to stderr).

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Overall outcome classes, mapped to process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    InvariantFailure,
    AccuracyFailure,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::InvariantFailure => 1,
            Outcome::AccuracyFailure => 3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub pass: bool,
    pub outcome: Outcome,
    /// Human-readable notes: verdicts, stage labels of captured errors.
    pub notes: Vec<String>,
}

/// The full document: `{scenario, results, summary, version}`.
#[derive(Clone, Debug, Serialize)]
pub struct ReportDocument {
    pub scenario: Value,
    pub results: Value,
    pub summary: Summary,
    pub version: VersionBlock,
}

#[derive(Clone, Debug, Serialize)]
pub struct VersionBlock {
    pub tool: String,
    pub config_hash: String,
}

impl ReportDocument {
    pub fn new(scenario: Value, results: Value, summary: Summary) -> ReportDocument {
        let config_hash = format!("{:016x}", fnv1a64(canonical_json(&scenario).as_bytes()));
        ReportDocument {
            scenario,
            results,
            summary,
            version: VersionBlock {
                tool: format!("{TOOL_NAME} {TOOL_VERSION}"),
                config_hash,
            },
        }
    }

    /// Deterministic JSON body.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        canonical_json(&value)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Serialize a JSON value with insertion-ordered keys and floats rendered
/// with 17 significant digits (`{:.16e}`), which round-trips `f64` exactly.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n.as_f64().expect("number is one of i64/u64/f64");
                out.push_str(&format_f64(f));
            }
        }
        Value::String(s) => write_escaped(s, out),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_escaped(key, out);
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
    }
}

pub fn format_f64(f: f64) -> String {
    format!("{f:.16e}")
}

fn write_escaped(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

/// A plain numeric table with named columns; the `csv` and `plotdata`
/// formats render it directly.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Whitespace-separated numeric columns, no header.
    pub fn to_plotdata(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

pub fn write_output(path: Option<&std::path::Path>, body: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, body),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            if !body.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip_through_the_writer() {
        for &f in &[0.001, -3.75, 1.0 / 3.0, 2.0f64.powi(-40), 6.02e23] {
            let s = format_f64(f);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), f.to_bits(), "{s}");
        }
    }

    #[test]
    fn canonical_json_is_reparse_stable() {
        let v = json!({
            "b": 1.5,
            "a": [1, 2.25, "x"],
            "nested": {"z": true, "y": null}
        });
        let s1 = canonical_json(&v);
        let reparsed: Value = serde_json::from_str(&s1).unwrap();
        let s2 = canonical_json(&reparsed);
        assert_eq!(s1, s2);
    }

    #[test]
    fn empty_results_are_valid_passing_documents() {
        let doc = ReportDocument::new(
            json!({"command": "noop"}),
            Value::Array(vec![]),
            Summary {
                pass: true,
                outcome: Outcome::Pass,
                notes: vec![],
            },
        );
        let body = doc.to_json();
        assert!(body.contains("\"results\":[]"));
        assert!(body.contains("\"pass\":true"));
        let parsed: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(canonical_json(&parsed), body);
    }

    #[test]
    fn outcome_exit_codes() {
        assert_eq!(Outcome::Pass.exit_code(), 0);
        assert_eq!(Outcome::InvariantFailure.exit_code(), 1);
        assert_eq!(Outcome::AccuracyFailure.exit_code(), 3);
    }

    #[test]
    fn table_renders_header_and_rows() {
        let mut t = Table::new(&["x", "y"]);
        t.push(vec![1.0, 2.0]);
        let csv = t.to_csv();
        assert!(csv.starts_with("x,y\n"));
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(t.to_plotdata().lines().count(), 1);
    }
}
