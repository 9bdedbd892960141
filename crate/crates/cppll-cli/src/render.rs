//! Output envelope and renderers. Every command wraps its result as
//! `{"schema": 1, "command": …, "config": …, "result": …}` so that any
//! output file is itself a valid input config (the loader extracts the
//! echoed `config` block), and re-running it reproduces the output
//! bit-identically. Failures that are analysis outcomes rather than bad
//! input keep the same envelope with an `error` block instead of `result`.

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Serialize)]
pub struct Envelope<'a> {
    pub schema: u32,
    pub command: &'a str,
    pub config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
}

impl<'a> Envelope<'a> {
    pub fn ok(command: &'a str, config: &'a RunConfig, result: Value) -> Self {
        Envelope {
            schema: 1,
            command,
            config,
            result: Some(result),
            error: None,
        }
    }

    pub fn failed(command: &'a str, config: &'a RunConfig, kind: &str, message: String) -> Self {
        Envelope {
            schema: 1,
            command,
            config,
            result: None,
            error: Some(json!({ "kind": kind, "message": message })),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("envelope serializes");
        s.push('\n');
        s
    }
}

/// Writes rendered output to the file given by `--output`, or stdout.
/// A closed stdout (e.g. piping into `head`) is not an error.
pub fn emit(output: Option<&std::path::Path>, text: &str) -> Result<(), String> {
    use std::io::Write;
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            Err(e) => Err(format!("cannot write to stdout: {e}")),
        },
    }
}

/// One `key,value` line per entry, for scalar results in CSV form.
pub fn scalar_csv(pairs: &[(&str, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in pairs {
        out.push_str(k);
        out.push(',');
        out.push_str(v);
        out.push('\n');
    }
    out
}

/// Aligned `key: value` lines for human-readable table output.
pub fn scalar_table(pairs: &[(&str, String)]) -> String {
    let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k:<width$}  {v}\n"));
    }
    out
}

/// Compact float formatting for tables (full precision stays in JSON/CSV).
pub fn short(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e-3 && x.abs() < 1e6 {
        let s = format!("{x:.6}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{x:.6e}")
    }
}
