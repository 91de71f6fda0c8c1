//! The executor boundary. A (intent, decision record) pair is verified in a
//! fixed seven-step order, the record's modifications are applied, effective
//! limits are tightened to the minimum of both documents, and the
//! authorization is consumed exactly once.

mod audit;
mod modify;
mod registry;
mod verify;

pub use audit::{AuditOutcome, AuditRecord, AuditSink, JsonlAudit, MemoryAudit};
pub use modify::{apply_modifications, ModifyError, NONCE_POINTER};
pub use registry::{JournalEntry, NonceRegistry, RegistryError};
pub use verify::{
    subject_key, verify_pair, verify_pair_with, AnchorsError, Check, StepResult, TrustAnchors, VerificationReport,
    VerifyOptions, VerifyOutcome, ANONYMOUS_SUBJECT, DEFAULT_CLOCK_SKEW,
};

use serde::Serialize;

use crate::crypto::Digest32;
use crate::intent::{intent_hash, Action, Intent};
use crate::pdr::PolicyDecisionRecord;
use crate::types::{UintDecimal, UnixSeconds};

/// What the executor may do, and within which limits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutionEnvelope {
    pub intent: Intent,
    pub original_tis_hash: Digest32,
    pub effective_tis_hash: Digest32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_max_gas_price_wei: Option<UintDecimal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_max_value_wei: Option<UintDecimal>,
    pub effective_deadline: UnixSeconds,
    pub pdr_id: String,
    pub issuer: String,
    pub authorized_at: UnixSeconds,
}

#[derive(Debug, thiserror::Error)]
pub enum GateError {
    #[error("gate refused at {}: {}", .0.failed_step().map_or("?", |c| c.as_str()), .0.failure_detail().unwrap_or(""))]
    Refused(VerificationReport),
    #[error(transparent)]
    Modification(#[from] ModifyError),
    #[error("registry or audit I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl GateError {
    pub fn report(&self) -> Option<&VerificationReport> {
        match self {
            GateError::Refused(r) => Some(r),
            _ => None,
        }
    }
}

fn min_opt(values: impl IntoIterator<Item = Option<UintDecimal>>) -> Option<UintDecimal> {
    values.into_iter().flatten().min_by(|a, b| a.numeric_cmp(b))
}

fn value_bound(intent: &Intent) -> Option<UintDecimal> {
    match &intent.action {
        Action::Delegate(d) => d.scope.max_value_wei.clone(),
        _ => None,
    }
}

/// Build the envelope for an already-verified pair. Pure.
pub fn build_envelope(
    intent: &Intent,
    pdr: &PolicyDecisionRecord,
    clock: UnixSeconds,
) -> Result<ExecutionEnvelope, ModifyError> {
    let mods = pdr.decision.modified_parameters.as_deref().unwrap_or_default();
    let effective = apply_modifications(intent, mods)?;
    let bounds = pdr.decision.bound_constraints.clone().unwrap_or_default();
    // Modifications may tighten but never loosen what the original allowed.
    let deadline = [
        Some(intent.constraints.deadline),
        Some(effective.constraints.deadline),
        bounds.tight_deadline,
    ]
    .into_iter()
    .flatten()
    .min()
    .unwrap_or(intent.constraints.deadline);
    Ok(ExecutionEnvelope {
        original_tis_hash: pdr.tis_hash,
        effective_tis_hash: intent_hash(&effective),
        effective_max_gas_price_wei: min_opt([
            intent.constraints.max_gas_price_wei.clone(),
            effective.constraints.max_gas_price_wei.clone(),
            bounds.max_gas_price_wei,
        ]),
        effective_max_value_wei: min_opt([value_bound(intent), value_bound(&effective), bounds.max_value_wei]),
        effective_deadline: deadline,
        pdr_id: pdr.pdr_id.clone(),
        issuer: pdr.issuer.clone(),
        authorized_at: clock,
        intent: effective,
    })
}

/// Verify, modify, and consume. Every call appends one audit record; the
/// registry changes only when an envelope is returned.
pub fn gate(
    intent: &Intent,
    pdr: &PolicyDecisionRecord,
    anchors: &TrustAnchors,
    registry: &NonceRegistry,
    clock: UnixSeconds,
    audit: &dyn AuditSink,
) -> Result<ExecutionEnvelope, GateError> {
    gate_with(intent, pdr, anchors, registry, clock, audit, VerifyOptions::default())
}

pub fn gate_with(
    intent: &Intent,
    pdr: &PolicyDecisionRecord,
    anchors: &TrustAnchors,
    registry: &NonceRegistry,
    clock: UnixSeconds,
    audit: &dyn AuditSink,
    opts: VerifyOptions,
) -> Result<ExecutionEnvelope, GateError> {
    let record = |failed: Option<&str>| AuditRecord {
        ts: clock,
        pdr_id: pdr.pdr_id.clone(),
        tis_hash: pdr.tis_hash.to_string(),
        outcome: if failed.is_some() {
            AuditOutcome::Refused
        } else {
            AuditOutcome::Authorized
        },
        failed_step: failed.map(str::to_owned),
        issuer: pdr.issuer.clone(),
    };
    let mut report = verify_pair_with(intent, pdr, anchors, registry, clock, opts);
    if !report.passed() {
        audit.append(&record(report.failed_step().map(|c| c.as_str())))?;
        return Err(GateError::Refused(report));
    }
    let envelope = match build_envelope(intent, pdr, clock) {
        Ok(e) => e,
        Err(e) => {
            audit.append(&record(Some("Modifications")))?;
            return Err(e.into());
        }
    };
    let key = subject_key(intent, pdr);
    let consumed = match registry.consume(&key, intent.constraints.nonce.as_ref(), &pdr.pdr_id, clock) {
        Ok(c) => c,
        Err(e) => {
            audit.append(&record(Some("Replay")))?;
            return Err(e.into());
        }
    };
    if !consumed {
        // Lost a race with a concurrent gate call after the read-only check.
        report.fail_replay(format!("authorization consumed concurrently for {key}"));
        audit.append(&record(Some("Replay")))?;
        return Err(GateError::Refused(report));
    }
    audit.append(&record(None))?;
    Ok(envelope)
}

#[cfg(test)]
mod tests;
