//! Canonical text form shared by audit records, manifests, and witness
//! decisions: compact JSON, object keys sorted bytewise at every depth.

use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum CanonError {
    #[error("value is not serializable to canonical form: {0}")]
    NotSerializable(String),
    #[error("input is not valid JSON: {0}")]
    Malformed(String),
    #[error("input is valid JSON but not in canonical form")]
    NotCanonical,
}

/// Canonical bytes of any serializable value.
pub fn canonicalize<T: Serialize + ?Sized>(value: &T) -> Result<String, CanonError> {
    let v = serde_json::to_value(value)
        .map_err(|e| CanonError::NotSerializable(alloc::format!("{e}")))?;
    Ok(canonicalize_value(&v))
}

/// Canonical form of an already-built JSON value.
///
/// Sorting is done here rather than relying on the map type inside
/// `serde_json`, which changes to insertion order when any crate in the
/// build enables `preserve_order`.
pub fn canonicalize_value(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v);
    out
}

fn write_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&alloc::format!("{n}")),
        Value::String(s) => write_str(out, s),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_unstable();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_str(out, k);
                out.push(':');
                write_value(out, &map[k]);
            }
            out.push('}');
        }
    }
}

fn write_str(out: &mut String, s: &str) {
    // serde_json's string escaping is already minimal and deterministic.
    match serde_json::to_string(s) {
        Ok(esc) => out.push_str(&esc),
        Err(_) => unreachable!("serializing a &str cannot fail"),
    }
}

/// Parse `text` and require that it is byte-identical to its own canonical
/// form. Rejects alternate spellings of the same value (escaped letters,
/// reordered keys, whitespace), which matters for tamper detection.
pub fn parse_canonical(text: &str) -> Result<Value, CanonError> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| CanonError::Malformed(alloc::format!("{e}")))?;
    if canonicalize_value(&v) != text {
        return Err(CanonError::NotCanonical);
    }
    Ok(v)
}
