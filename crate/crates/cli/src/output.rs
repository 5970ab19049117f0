use std::io::Write;

use anyhow::Result;
use serde::Serialize;
use serde_json::{Map, Value};

/// Prints `fields` as one JSON object tagged with `"record": kind`.
pub fn emit<T: Serialize>(kind: &str, fields: &T) -> Result<()> {
    let mut obj = Map::new();
    obj.insert("record".into(), Value::String(kind.into()));
    match serde_json::to_value(fields)? {
        Value::Object(m) => obj.extend(m),
        Value::Null => {}
        other => {
            obj.insert("value".into(), other);
        }
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", Value::Object(obj))?;
    Ok(())
}
