//! Import of JWT-style decision claims (`iss`, `aud`, `exp`, `intent_hash`,
//! snake_case bounds) into the record form. The result is unsigned.

use serde_json::{json, Map, Value};

use super::{pdr_from_value, PdrError, PolicyDecisionRecord, SIGNATURE_MEMBER};
use crate::crypto::SIGNATURE_ALG;
use crate::schema::Finding;
use crate::types::{self, SemanticAddress, UnixSeconds};

/// Values the claims set does not carry.
#[derive(Debug, Clone)]
pub struct ClaimsContext {
    pub pdr_id: String,
    pub issued_at: UnixSeconds,
    pub policy_id: String,
    pub signer: SemanticAddress,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClaimsError {
    #[error("claims must be a JSON object")]
    NotAnObject,
    #[error("unknown claim `{0}`")]
    UnknownClaim(String),
    #[error("claim `{claim}`: {reason}")]
    BadClaim { claim: String, reason: String },
    #[error("imported record is invalid: {0}")]
    Invalid(Finding),
}

const BOUND_MAP: &[(&str, &str)] = &[
    ("max_gas_fee", "maxGasPriceWei"),
    ("max_value", "maxValueWei"),
    ("tight_deadline", "tightDeadline"),
];

fn bad(claim: &str, reason: &str) -> ClaimsError {
    ClaimsError::BadClaim {
        claim: claim.to_owned(),
        reason: reason.to_owned(),
    }
}

fn unix(claim: &str, v: &Value) -> Result<String, ClaimsError> {
    v.as_u64()
        .and_then(types::format_timestamp)
        .ok_or_else(|| bad(claim, "expected Unix seconds"))
}

/// Map a claims object onto a decision record with a placeholder signature.
pub fn import_claims(claims: &Value, ctx: &ClaimsContext) -> Result<PolicyDecisionRecord, ClaimsError> {
    let Value::Object(c) = claims else {
        return Err(ClaimsError::NotAnObject);
    };
    let mut doc = Map::new();
    let mut decision = Map::new();
    doc.insert("version".into(), json!("1.0.0"));
    doc.insert("pdrId".into(), json!(ctx.pdr_id));
    doc.insert("issuedAt".into(), json!(unix("iat", &json!(ctx.issued_at))?));
    decision.insert("policyId".into(), json!(ctx.policy_id));
    for (k, v) in c {
        match k.as_str() {
            "iss" => doc.insert("issuer".into(), v.clone()),
            "sub" => doc.insert("subject".into(), v.clone()),
            "aud" => doc.insert("audience".into(), v.clone()),
            "jti" => doc.insert("pdrId".into(), v.clone()),
            "iat" => doc.insert("issuedAt".into(), json!(unix(k, v)?)),
            "exp" => doc.insert("expiresAt".into(), json!(unix(k, v)?)),
            "intent_hash" => doc.insert("tisHash".into(), v.clone()),
            "policy_id" => decision.insert("policyId".into(), v.clone()),
            "reason" => decision.insert("reason".into(), v.clone()),
            "risk_score" => decision.insert("riskScore".into(), v.clone()),
            "decision" => {
                let outcome = match v.as_str() {
                    Some("APPROVE" | "APPROVED") => "APPROVED",
                    Some("REJECT" | "REJECTED") => "REJECTED",
                    _ => return Err(bad(k, "expected APPROVE or REJECT")),
                };
                decision.insert("outcome".into(), json!(outcome))
            }
            "bound_constraints" => {
                let Value::Object(b) = v else {
                    return Err(bad(k, "expected an object"));
                };
                let mut out = Map::new();
                for (bk, bv) in b {
                    let Some((_, name)) = BOUND_MAP.iter().find(|(from, _)| from == bk) else {
                        return Err(ClaimsError::UnknownClaim(format!("bound_constraints.{bk}")));
                    };
                    out.insert((*name).into(), bv.clone());
                }
                decision.insert("boundConstraints".into(), Value::Object(out))
            }
            _ => return Err(ClaimsError::UnknownClaim(k.clone())),
        };
    }
    doc.insert("decision".into(), Value::Object(decision));
    doc.insert(
        SIGNATURE_MEMBER.into(),
        json!({"signer": ctx.signer, "alg": SIGNATURE_ALG, "signature": "0x00"}),
    );
    pdr_from_value(&Value::Object(doc)).map_err(|e| match e {
        PdrError::SchemaViolation(f) => ClaimsError::Invalid(f),
        PdrError::MalformedJson(m) => bad("(document)", &m),
    })
}
