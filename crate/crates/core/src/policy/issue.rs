use rand::RngCore;

use super::EvaluationContext;
use crate::canonical::CanonicalError;
use crate::crypto::Keypair;
use crate::intent::{intent_hash, Intent};
use crate::pdr::{self, Decision, PolicyDecisionRecord, PDR_VERSION};
use crate::schema::Finding;
use crate::types::MAX_TIMESTAMP;

/// Who signs, for whom, and for how long.
#[derive(Debug, Clone, Copy)]
pub struct IssueParams<'a> {
    pub issuer_key: &'a Keypair,
    pub issuer_id: &'a str,
    pub audience: &'a str,
    pub ttl_seconds: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IssueError {
    #[error("invalid validity window: {0}")]
    ClockInvalid(String),
    #[error("issued record would be invalid: {0}")]
    Invalid(Finding),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

/// Issue a signed record with a random v4 `pdrId` drawn from `rng`.
pub fn issue_pdr(
    intent: &Intent,
    decision: Decision,
    params: IssueParams<'_>,
    ctx: &EvaluationContext,
    rng: &mut impl RngCore,
) -> Result<PolicyDecisionRecord, IssueError> {
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    let id = uuid::Builder::from_random_bytes(bytes).into_uuid();
    issue_pdr_with_id(intent, decision, params, ctx, &id.to_string())
}

pub fn issue_pdr_with_id(
    intent: &Intent,
    decision: Decision,
    params: IssueParams<'_>,
    ctx: &EvaluationContext,
    pdr_id: &str,
) -> Result<PolicyDecisionRecord, IssueError> {
    if params.ttl_seconds == 0 {
        return Err(IssueError::ClockInvalid("ttlSeconds must be >= 1".into()));
    }
    let expires_at = ctx
        .clock
        .checked_add(params.ttl_seconds)
        .filter(|&e| e <= MAX_TIMESTAMP)
        .ok_or_else(|| IssueError::ClockInvalid("expiry is past year 9999".into()))?;
    let mut record = PolicyDecisionRecord {
        version: PDR_VERSION.to_owned(),
        pdr_id: pdr_id.to_ascii_lowercase(),
        issuer: params.issuer_id.to_owned(),
        subject: intent.constraints.required_signer.map(|a| a.to_string()),
        audience: params.audience.to_owned(),
        issued_at: ctx.clock,
        expires_at,
        tis_hash: intent_hash(intent),
        decision,
        policy_engine_signature: pdr::unsigned_signature(params.issuer_key.address()),
    };
    if let Some(f) = pdr::validate_pdr(&record).findings.into_iter().next() {
        return Err(IssueError::Invalid(f));
    }
    pdr::sign_pdr(&mut record, params.issuer_key)?;
    Ok(record)
}
