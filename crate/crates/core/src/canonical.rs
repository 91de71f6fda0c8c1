//! Canonical JSON serialization.
//!
//! Output follows RFC 8785 over the value domain used by intents and decision
//! records: object members sorted by the byte order of their UTF-8 keys, no
//! insignificant whitespace, integers in plain decimal, and strings escaped
//! only where JSON requires it. The single non-integer number allowed anywhere
//! is a decision record's `riskScore`, and only when its shortest decimal form
//! has at most six fractional digits.

use std::fmt::{self, Write as _};

use serde_json::{Number, Value};

/// Pointer of the one location where a fractional number may appear.
pub const RISK_SCORE_POINTER: &str = "/decision/riskScore";

/// Maximum fractional digits accepted for a fractional number.
pub const MAX_FRACTION_DIGITS: usize = 6;

/// The canonical UTF-8 serialization of a JSON value.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CanonicalBytes(Vec<u8>);

impl CanonicalBytes {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn as_str(&self) -> &str {
        // Built exclusively from `String` pushes.
        std::str::from_utf8(&self.0).expect("canonical bytes are UTF-8")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for CanonicalBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalBytes({})", self.as_str())
    }
}

impl AsRef<[u8]> for CanonicalBytes {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CanonicalError {
    #[error("non-integer number at {path} (only {RISK_SCORE_POINTER} may be fractional)")]
    FloatNotPermitted { path: String },
    #[error("number {text} at {path} needs more than {MAX_FRACTION_DIGITS} fractional digits")]
    TooPrecise { path: String, text: String },
}

/// Serialize `value` canonically.
pub fn canonicalize(value: &Value) -> Result<CanonicalBytes, CanonicalError> {
    let mut out = String::new();
    let mut path = String::new();
    write_value(value, &mut path, &mut out)?;
    Ok(CanonicalBytes(out.into_bytes()))
}

/// Render a fractional number in its canonical decimal form, or `None` if it
/// cannot be written with at most six fractional digits.
pub fn format_fraction(v: f64) -> Option<String> {
    if !v.is_finite() {
        return None;
    }
    // `Display` for f64 yields the shortest round-tripping decimal and never
    // switches to exponent notation.
    let text = if v == 0.0 { "0".to_owned() } else { format!("{v}") };
    let frac = text.split_once('.').map(|(_, f)| f.len()).unwrap_or(0);
    (frac <= MAX_FRACTION_DIGITS).then_some(text)
}

fn write_value(v: &Value, path: &mut String, out: &mut String) -> Result<(), CanonicalError> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(true) => out.push_str("true"),
        Value::Bool(false) => out.push_str("false"),
        Value::Number(n) => write_number(n, path, out)?,
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let len = path.len();
                let _ = write!(path, "/{i}");
                write_value(item, path, out)?;
                path.truncate(len);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut members: Vec<(&String, &Value)> = map.iter().collect();
            members.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push('{');
            for (i, (k, item)) in members.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(k, out);
                out.push(':');
                let len = path.len();
                path.push('/');
                path.push_str(&crate::json::escape_token(k));
                write_value(item, path, out)?;
                path.truncate(len);
            }
            out.push('}');
        }
    }
    Ok(())
}

fn write_number(n: &Number, path: &str, out: &mut String) -> Result<(), CanonicalError> {
    if let Some(u) = n.as_u64() {
        let _ = write!(out, "{u}");
        return Ok(());
    }
    if let Some(i) = n.as_i64() {
        let _ = write!(out, "{i}");
        return Ok(());
    }
    if path != RISK_SCORE_POINTER {
        return Err(CanonicalError::FloatNotPermitted { path: path.to_owned() });
    }
    let f = n.as_f64().unwrap_or(f64::NAN);
    match format_fraction(f) {
        Some(text) => {
            out.push_str(&text);
            Ok(())
        }
        None => Err(CanonicalError::TooPrecise {
            path: path.to_owned(),
            text: n.to_string(),
        }),
    }
}

fn write_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\u{08}' => out.push_str("\\b"),
            '\u{0c}' => out.push_str("\\f"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}
