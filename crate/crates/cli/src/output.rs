use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nct_core::arithmetic::WeylContext;
use nct_core::format::sig12;
use serde_json::Value;

use crate::CliError;

/// File-name fragment for a context, e.g. `1_3_q2_r1`.
pub fn tag(c: &WeylContext) -> String {
    format!("{}_{}_q{}_r{}", c.m, c.n, c.q, c.r)
}

/// Round every float in a JSON tree to 12 significant digits.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or_default();
            let r: f64 = sig12(x).parse().unwrap_or(x);
            serde_json::Number::from_f64(r).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

pub fn json_text(v: &impl serde::Serialize) -> String {
    let value = serde_json::to_value(v).expect("serializable report");
    let mut s = serde_json::to_string_pretty(&round_floats(value)).expect("json text");
    s.push('\n');
    s
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

/// Write through a buffered file handle; any failure maps to an I/O error.
pub fn write_file<F>(dir: &Path, name: &str, body: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let path = dir.join(name);
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let file = fs::File::create(&path).map_err(io)?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(io)?;
    w.flush().map_err(io)?;
    Ok(path)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    write_file(dir, name, |w| w.write_all(text.as_bytes()))
}
