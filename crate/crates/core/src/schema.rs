//! Pointer-addressed findings and the small reader used by the document
//! parsers. Every finding carries the RFC 6901 pointer of the offending
//! location, so a mutation at `/action/slippageBps` is reported there and not
//! at an enclosing `oneOf`.

use std::fmt;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::json;
use crate::types::{SemanticAddress, UintDecimal, UintError};

/// The class of constraint a finding violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Rule {
    Type,
    Required,
    AdditionalProperties,
    Pattern,
    Enum,
    Const,
    Minimum,
    Maximum,
    Format,
    /// Unsigned decimal strings carry no leading zeros.
    UintCanonical,
    /// `validFromBlock <= validUntilBlock`.
    BlockOrder,
    /// `issuedAt < expiresAt`.
    TimeOrder,
    /// A REJECTED decision must say why.
    ReasonRequired,
    /// REMOVE carries no value; ADD and REPLACE carry one.
    ModificationValue,
    /// Numbers that must canonicalize (integers, or a short-decimal risk score).
    Canonicalizable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub path: String,
    pub rule: Rule,
    pub reason: String,
}

impl Finding {
    pub fn new(path: impl Into<String>, rule: Rule, reason: impl Into<String>) -> Self {
        Finding {
            path: path.into(),
            rule,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "(root)" } else { &self.path };
        write!(f, "{path}: {}", self.reason)
    }
}

/// Findings collected by a `validate_*` pass. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn push(&mut self, f: Finding) {
        self.findings.push(f);
    }

    pub fn first(&self) -> Option<&Finding> {
        self.findings.first()
    }
}

pub(crate) type Read<T> = Result<T, Finding>;

/// A JSON object under validation, with its pointer.
pub(crate) struct Obj<'a> {
    pub map: &'a Map<String, Value>,
    pub path: String,
}

impl<'a> Obj<'a> {
    pub fn new(v: &'a Value, path: &str, allowed: &[&str]) -> Read<Obj<'a>> {
        let Value::Object(map) = v else {
            return Err(Finding::new(path, Rule::Type, "expected an object"));
        };
        // Map iteration is key-sorted, so the reported key is deterministic.
        if let Some(extra) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Finding::new(
                json::child(path, extra),
                Rule::AdditionalProperties,
                format!("unknown property `{extra}`"),
            ));
        }
        Ok(Obj {
            map,
            path: path.to_owned(),
        })
    }

    pub fn at(&self, key: &str) -> String {
        json::child(&self.path, key)
    }

    pub fn req(&self, key: &str) -> Read<(&'a Value, String)> {
        match self.map.get(key) {
            Some(v) => Ok((v, self.at(key))),
            None => Err(Finding::new(
                self.at(key),
                Rule::Required,
                format!("required property `{key}` is missing"),
            )),
        }
    }

    pub fn opt(&self, key: &str) -> Option<(&'a Value, String)> {
        self.map.get(key).map(|v| (v, self.at(key)))
    }

    pub fn req_with<T>(&self, key: &str, f: impl FnOnce(&'a Value, &str) -> Read<T>) -> Read<T> {
        let (v, p) = self.req(key)?;
        f(v, &p)
    }

    pub fn opt_with<T>(&self, key: &str, f: impl FnOnce(&'a Value, &str) -> Read<T>) -> Read<Option<T>> {
        match self.opt(key) {
            Some((v, p)) => f(v, &p).map(Some),
            None => Ok(None),
        }
    }
}

pub(crate) fn string<'a>(v: &'a Value, path: &str) -> Read<&'a str> {
    v.as_str()
        .ok_or_else(|| Finding::new(path, Rule::Type, "expected a string"))
}

pub(crate) fn owned_string(v: &Value, path: &str) -> Read<String> {
    string(v, path).map(str::to_owned)
}

/// A JSON integer (no fraction, no exponent) that is `>= 0`.
pub(crate) fn non_negative_int(v: &Value, path: &str) -> Read<u64> {
    let Value::Number(n) = v else {
        return Err(Finding::new(path, Rule::Type, "expected an integer"));
    };
    if let Some(u) = n.as_u64() {
        return Ok(u);
    }
    if n.is_i64() {
        return Err(Finding::new(path, Rule::Minimum, "must be >= 0"));
    }
    Err(Finding::new(
        path,
        Rule::Type,
        "expected an integer (no fraction or exponent)",
    ))
}

pub(crate) fn int_at_least(v: &Value, path: &str, min: u64) -> Read<u64> {
    let n = non_negative_int(v, path)?;
    if n < min {
        return Err(Finding::new(path, Rule::Minimum, format!("must be >= {min}")));
    }
    Ok(n)
}

pub(crate) fn int_in(v: &Value, path: &str, min: u64, max: u64) -> Read<u64> {
    let n = int_at_least(v, path, min)?;
    if n > max {
        return Err(Finding::new(path, Rule::Maximum, format!("must be <= {max}")));
    }
    Ok(n)
}

pub(crate) fn address(v: &Value, path: &str) -> Read<SemanticAddress> {
    string(v, path)?
        .parse()
        .map_err(|_| Finding::new(path, Rule::Pattern, "address must match ^0x[a-fA-F0-9]{40}$"))
}

/// A `^[0-9]+$` string. The canonical-form rule is checked by the validators
/// so that hand-built values get the same treatment as parsed ones.
pub(crate) fn uint_string(v: &Value, path: &str) -> Read<UintDecimal> {
    let s = string(v, path)?;
    match UintDecimal::check(s) {
        Err(UintError::NotDigits) => Err(Finding::new(
            path,
            Rule::Pattern,
            "unsigned integer string must match ^[0-9]+$",
        )),
        _ => Ok(UintDecimal::new_unchecked(s)),
    }
}

pub(crate) fn string_array(v: &Value, path: &str) -> Read<Vec<String>> {
    let Value::Array(items) = v else {
        return Err(Finding::new(path, Rule::Type, "expected an array"));
    };
    items
        .iter()
        .enumerate()
        .map(|(i, item)| owned_string(item, &json::index(path, i)))
        .collect()
}

pub(crate) fn enum_of<T: Copy>(v: &Value, path: &str, options: &[(&str, T)]) -> Read<T> {
    let s = string(v, path)?;
    options
        .iter()
        .find(|(name, _)| *name == s)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            Finding::new(path, Rule::Enum, format!("must be one of {}", names.join(", ")))
        })
}

pub(crate) fn check_uint(report: &mut ValidationReport, path: &str, v: &UintDecimal) {
    match UintDecimal::check(v.as_str()) {
        Ok(()) => {}
        Err(UintError::NotDigits) => report.push(Finding::new(
            path,
            Rule::Pattern,
            "unsigned integer string must match ^[0-9]+$",
        )),
        Err(UintError::LeadingZero) => report.push(Finding::new(
            path,
            Rule::UintCanonical,
            "unsigned integer string must not have leading zeros",
        )),
    }
}

/// `8-4-4-4-12` hex UUID text, any version.
pub fn is_uuid_text(s: &str) -> bool {
    s.len() == 36 && uuid::Uuid::try_parse(s).is_ok()
}

pub fn is_rfc3339(s: &str) -> bool {
    chrono::DateTime::parse_from_rfc3339(s).is_ok()
}
