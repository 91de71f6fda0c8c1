//! Policy decision records: a signed statement that one intent, named by its
//! hash, was evaluated and approved or rejected.
//!
//! The signature covers [`pdr_signing_payload`], the canonical record with the
//! whole `policyEngineSignature` member removed.

mod claims;

pub use claims::{import_claims, ClaimsContext, ClaimsError};

use std::fmt;

use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::canonical::{self, CanonicalBytes, CanonicalError};
use crate::crypto::{self, keccak256, Digest32, Keypair, SIGNATURE_ALG};
use crate::json;
use crate::schema::{self, Finding, Obj, Read, Rule, ValidationReport};
use crate::types::{self, SemanticAddress, UintDecimal, UnixSeconds};

pub const PDR_VERSION: &str = "1.0.0";

/// Member excluded from the signing payload.
pub const SIGNATURE_MEMBER: &str = "policyEngineSignature";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Approved,
    Rejected,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Approved => "APPROVED",
            Outcome::Rejected => "REJECTED",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A score in `[0, 1]` held in millionths, so its decimal text is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RiskScore(u32);

impl RiskScore {
    pub const SCALE: u32 = 1_000_000;
    pub const ZERO: RiskScore = RiskScore(0);
    pub const ONE: RiskScore = RiskScore(Self::SCALE);

    pub fn from_micros(micros: u32) -> Option<Self> {
        (micros <= Self::SCALE).then_some(RiskScore(micros))
    }

    /// `num / den` rounded half-up to six places. `den == 0` reads as zero.
    pub fn from_ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            return RiskScore::ZERO;
        }
        let num = num.min(den) as u128;
        let micros = (num * Self::SCALE as u128 * 2 + den as u128) / (2 * den as u128);
        RiskScore(micros as u32)
    }

    pub fn micros(&self) -> u32 {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }

    /// Decimal text with at most six fractional digits (`"0"`, `"0.25"`, `"1"`).
    pub fn to_text(&self) -> String {
        let (int, frac) = (self.0 / Self::SCALE, self.0 % Self::SCALE);
        if frac == 0 {
            return int.to_string();
        }
        let digits = format!("{frac:06}");
        format!("{int}.{}", digits.trim_end_matches('0'))
    }

    fn to_json(self) -> Value {
        match self.0 {
            0 => Value::from(0u64),
            Self::SCALE => Value::from(1u64),
            _ => Value::from(self.as_f64()),
        }
    }

    /// Parse a decimal like `0.25` (no sign, no exponent) into micro-units.
    fn parse_text(text: &str) -> Option<u32> {
        let (int, frac) = text.split_once('.').unwrap_or((text, ""));
        if int.is_empty() || frac.len() > 6 || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return None;
        }
        let int: u64 = int.parse().ok()?;
        let frac: u64 = if frac.is_empty() { 0 } else { format!("{frac:0<6}").parse().ok()? };
        let micros = int.checked_mul(Self::SCALE as u64)?.checked_add(frac)?;
        u32::try_from(micros).ok()
    }
}

impl fmt::Display for RiskScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl Serialize for RiskScore {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModOp {
    Add,
    Replace,
    Remove,
}

/// One JSON Pointer edit the policy engine requires before execution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Modification {
    pub path: String,
    pub operation: ModOp,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundConstraints {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_gas_price_wei: Option<UintDecimal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_value_wei: Option<UintDecimal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tight_deadline: Option<UnixSeconds>,
}

impl BoundConstraints {
    pub fn is_empty(&self) -> bool {
        self.max_gas_price_wei.is_none() && self.max_value_wei.is_none() && self.tight_deadline.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Decision {
    pub outcome: Outcome,
    pub policy_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub risk_score: Option<RiskScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_constraints: Option<BoundConstraints>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modified_parameters: Option<Vec<Modification>>,
}

impl Decision {
    pub fn approved(policy_id: impl Into<String>) -> Self {
        Decision {
            outcome: Outcome::Approved,
            policy_id: policy_id.into(),
            reason: None,
            risk_score: None,
            bound_constraints: None,
            modified_parameters: None,
        }
    }

    pub fn rejected(policy_id: impl Into<String>, reason: impl Into<String>) -> Self {
        Decision {
            outcome: Outcome::Rejected,
            reason: Some(reason.into()),
            ..Decision::approved(policy_id)
        }
    }

    pub fn is_approved(&self) -> bool {
        self.outcome == Outcome::Approved
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("decision serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EngineSignature {
    pub signer: SemanticAddress,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alg: Option<String>,
    /// `0x` hex. Decoded, and range-checked, only when verified.
    pub signature: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyDecisionRecord {
    pub version: String,
    pub pdr_id: String,
    pub issuer: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub audience: String,
    #[serde(serialize_with = "ser_timestamp")]
    pub issued_at: UnixSeconds,
    #[serde(serialize_with = "ser_timestamp")]
    pub expires_at: UnixSeconds,
    pub tis_hash: Digest32,
    pub decision: Decision,
    pub policy_engine_signature: EngineSignature,
}

fn ser_timestamp<S: Serializer>(ts: &UnixSeconds, s: S) -> Result<S::Ok, S::Error> {
    match types::format_timestamp(*ts) {
        Some(text) => s.serialize_str(&text),
        None => Err(serde::ser::Error::custom(format!("timestamp {ts} is past year 9999"))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PdrError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation at {}", .0)]
    SchemaViolation(Finding),
}

impl PdrError {
    pub fn finding(&self) -> Option<&Finding> {
        match self {
            PdrError::SchemaViolation(f) => Some(f),
            PdrError::MalformedJson(_) => None,
        }
    }
}

impl PolicyDecisionRecord {
    /// The JSON document form. Fails only for timestamps past year 9999,
    /// which [`validate_pdr`] reports.
    pub fn try_to_value(&self) -> Result<Value, serde_json::Error> {
        serde_json::to_value(self)
    }

    pub fn to_value(&self) -> Value {
        self.try_to_value().expect("timestamps within the four-digit-year range")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("values always serialize")
    }
}

/// Parse and fully validate a UTF-8 JSON decision record.
pub fn parse_pdr(bytes: &[u8]) -> Result<PolicyDecisionRecord, PdrError> {
    let value = json::parse_strict(bytes).map_err(|e| PdrError::MalformedJson(e.to_string()))?;
    pdr_from_value(&value)
}

pub fn pdr_from_value(value: &Value) -> Result<PolicyDecisionRecord, PdrError> {
    let pdr = read_pdr(value).map_err(PdrError::SchemaViolation)?;
    match validate_pdr(&pdr).findings.into_iter().next() {
        Some(f) => Err(PdrError::SchemaViolation(f)),
        None => Ok(pdr),
    }
}

/// Re-check every value-level invariant of a decision record.
pub fn validate_pdr(pdr: &PolicyDecisionRecord) -> ValidationReport {
    let mut r = ValidationReport::default();
    if pdr.version != PDR_VERSION {
        r.push(Finding::new("/version", Rule::Pattern, "version must be exactly 1.0.0"));
    }
    if !schema::is_uuid_text(&pdr.pdr_id) {
        r.push(Finding::new("/pdrId", Rule::Format, "pdrId must be a UUID"));
    }
    for (path, ts) in [("/issuedAt", pdr.issued_at), ("/expiresAt", pdr.expires_at)] {
        if ts > types::MAX_TIMESTAMP {
            r.push(Finding::new(path, Rule::Format, "timestamp is past year 9999"));
        }
    }
    if pdr.issued_at >= pdr.expires_at {
        r.push(Finding::new(
            "/expiresAt",
            Rule::TimeOrder,
            "expiresAt must be strictly after issuedAt",
        ));
    }
    let d = &pdr.decision;
    if d.outcome == Outcome::Rejected && d.reason.as_deref().is_none_or(str::is_empty) {
        r.push(Finding::new(
            "/decision/reason",
            Rule::ReasonRequired,
            "a REJECTED decision must carry a reason",
        ));
    }
    if let Some(b) = &d.bound_constraints {
        if let Some(g) = &b.max_gas_price_wei {
            schema::check_uint(&mut r, "/decision/boundConstraints/maxGasPriceWei", g);
        }
        if let Some(v) = &b.max_value_wei {
            schema::check_uint(&mut r, "/decision/boundConstraints/maxValueWei", v);
        }
    }
    for (i, m) in d.modified_parameters.iter().flatten().enumerate() {
        let at = json::index("/decision/modifiedParameters", i);
        check_modification(m, &at, &mut r);
    }
    if !pdr.policy_engine_signature.signature.strip_prefix("0x").is_some_and(is_hex) {
        r.push(Finding::new(
            "/policyEngineSignature/signature",
            Rule::Pattern,
            "signature must match ^0x[a-fA-F0-9]+$",
        ));
    }
    r
}

fn is_hex(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_hexdigit())
}

fn check_modification(m: &Modification, at: &str, r: &mut ValidationReport) {
    if json::parse_pointer(&m.path).is_err() {
        r.push(Finding::new(
            json::child(at, "path"),
            Rule::Pattern,
            "path must be an RFC 6901 JSON Pointer",
        ));
    }
    match (m.operation, &m.value) {
        (ModOp::Remove, Some(_)) => r.push(Finding::new(
            json::child(at, "value"),
            Rule::ModificationValue,
            "REMOVE must not carry a value",
        )),
        (ModOp::Add | ModOp::Replace, None) => r.push(Finding::new(
            json::child(at, "value"),
            Rule::ModificationValue,
            "ADD and REPLACE must carry a value",
        )),
        _ => {}
    }
    if let Some(v) = &m.value {
        if let Some(p) = first_fraction(v, &json::child(at, "value")) {
            r.push(Finding::new(
                p,
                Rule::Canonicalizable,
                "modification values may only contain integer numbers",
            ));
        }
    }
}

fn first_fraction(v: &Value, path: &str) -> Option<String> {
    match v {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => Some(path.to_owned()),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .find_map(|(i, x)| first_fraction(x, &json::index(path, i))),
        Value::Object(map) => map.iter().find_map(|(k, x)| first_fraction(x, &json::child(path, k))),
        _ => None,
    }
}

/// The exact bytes whose keccak-256 digest the policy engine signs.
pub fn pdr_signing_payload(pdr: &PolicyDecisionRecord) -> Result<CanonicalBytes, CanonicalError> {
    let mut v = pdr.to_value();
    if let Value::Object(map) = &mut v {
        map.remove(SIGNATURE_MEMBER);
    }
    canonical::canonicalize(&v)
}

pub fn pdr_signing_digest(pdr: &PolicyDecisionRecord) -> Result<Digest32, CanonicalError> {
    pdr_signing_payload(pdr).map(|b| keccak256(b.as_bytes()))
}

/// Fill `policyEngineSignature` with a signature by `key` over the payload.
pub fn sign_pdr(pdr: &mut PolicyDecisionRecord, key: &Keypair) -> Result<(), CanonicalError> {
    let digest = pdr_signing_digest(pdr)?;
    pdr.policy_engine_signature = EngineSignature {
        signer: key.address(),
        alg: Some(SIGNATURE_ALG.to_owned()),
        signature: crypto::sign_digest(key, &digest).to_hex(),
    };
    Ok(())
}

/// Placeholder used before [`sign_pdr`] runs.
pub fn unsigned_signature(signer: SemanticAddress) -> EngineSignature {
    EngineSignature {
        signer,
        alg: Some(SIGNATURE_ALG.to_owned()),
        signature: "0x00".to_owned(),
    }
}

fn read_pdr(v: &Value) -> Read<PolicyDecisionRecord> {
    let o = Obj::new(
        v,
        "",
        &[
            "version",
            "pdrId",
            "issuer",
            "subject",
            "audience",
            "issuedAt",
            "expiresAt",
            "tisHash",
            "decision",
            SIGNATURE_MEMBER,
        ],
    )?;
    let version = o.req_with("version", schema::owned_string)?;
    let pdr_id = o.req_with("pdrId", schema::owned_string)?;
    let issuer = o.req_with("issuer", schema::owned_string)?;
    let subject = o.opt_with("subject", schema::owned_string)?;
    let audience = o.req_with("audience", schema::owned_string)?;
    let issued_at = o.req_with("issuedAt", read_timestamp)?;
    let expires_at = o.req_with("expiresAt", read_timestamp)?;
    let tis_hash = o.req_with("tisHash", |v, p| {
        schema::string(v, p)?
            .parse::<Digest32>()
            .map_err(|_| Finding::new(p, Rule::Pattern, "tisHash must match ^0x[a-fA-F0-9]{64}$"))
    })?;
    let decision = o.req_with("decision", read_decision)?;
    let policy_engine_signature = o.req_with(SIGNATURE_MEMBER, read_signature)?;
    let pdr_id = if schema::is_uuid_text(&pdr_id) {
        pdr_id.to_ascii_lowercase()
    } else {
        pdr_id
    };
    Ok(PolicyDecisionRecord {
        version,
        pdr_id,
        issuer,
        subject,
        audience,
        issued_at,
        expires_at,
        tis_hash,
        decision,
        policy_engine_signature,
    })
}

fn read_timestamp(v: &Value, path: &str) -> Read<UnixSeconds> {
    let s = schema::string(v, path)?;
    types::parse_timestamp(s).ok_or_else(|| {
        Finding::new(
            path,
            Rule::Format,
            "timestamp must be RFC 3339 in the form YYYY-MM-DDTHH:MM:SSZ, not before 1970",
        )
    })
}

fn read_decision(v: &Value, path: &str) -> Read<Decision> {
    let o = Obj::new(
        v,
        path,
        &["outcome", "policyId", "reason", "riskScore", "boundConstraints", "modifiedParameters"],
    )?;
    Ok(Decision {
        outcome: o.req_with("outcome", |v, p| {
            schema::enum_of(v, p, &[("APPROVED", Outcome::Approved), ("REJECTED", Outcome::Rejected)])
        })?,
        policy_id: o.req_with("policyId", schema::owned_string)?,
        reason: o.opt_with("reason", schema::owned_string)?,
        risk_score: o.opt_with("riskScore", read_risk_score)?,
        bound_constraints: o.opt_with("boundConstraints", read_bounds)?,
        modified_parameters: o.opt_with("modifiedParameters", |v, p| {
            let Value::Array(items) = v else {
                return Err(Finding::new(p, Rule::Type, "expected an array"));
            };
            items
                .iter()
                .enumerate()
                .map(|(i, m)| read_modification(m, &json::index(p, i)))
                .collect()
        })?,
    })
}

fn read_risk_score(v: &Value, path: &str) -> Read<RiskScore> {
    let Value::Number(n) = v else {
        return Err(Finding::new(path, Rule::Type, "expected a number"));
    };
    let f = n.as_f64().unwrap_or(f64::NAN);
    if f < 0.0 {
        return Err(Finding::new(path, Rule::Minimum, "must be >= 0"));
    }
    if f > 1.0 {
        return Err(Finding::new(path, Rule::Maximum, "must be <= 1"));
    }
    canonical::format_fraction(f)
        .and_then(|t| RiskScore::parse_text(&t))
        .and_then(RiskScore::from_micros)
        .ok_or_else(|| Finding::new(path, Rule::Canonicalizable, "riskScore allows at most 6 fractional digits"))
}

fn read_bounds(v: &Value, path: &str) -> Read<BoundConstraints> {
    let o = Obj::new(v, path, &["maxGasPriceWei", "maxValueWei", "tightDeadline"])?;
    Ok(BoundConstraints {
        max_gas_price_wei: o.opt_with("maxGasPriceWei", schema::uint_string)?,
        max_value_wei: o.opt_with("maxValueWei", schema::uint_string)?,
        tight_deadline: o.opt_with("tightDeadline", schema::non_negative_int)?,
    })
}

fn read_modification(v: &Value, path: &str) -> Read<Modification> {
    let o = Obj::new(v, path, &["path", "operation", "value"])?;
    Ok(Modification {
        path: o.req_with("path", schema::owned_string)?,
        operation: o.req_with("operation", |v, p| {
            schema::enum_of(
                v,
                p,
                &[("ADD", ModOp::Add), ("REPLACE", ModOp::Replace), ("REMOVE", ModOp::Remove)],
            )
        })?,
        value: o.opt("value").map(|(v, _)| v.clone()),
    })
}

fn read_signature(v: &Value, path: &str) -> Read<EngineSignature> {
    let o = Obj::new(v, path, &["signer", "alg", "signature"])?;
    Ok(EngineSignature {
        signer: o.req_with("signer", schema::address)?,
        alg: o.opt_with("alg", schema::owned_string)?,
        signature: o.req_with("signature", schema::owned_string)?,
    })
}
