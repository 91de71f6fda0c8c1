use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NonceRegistry;
use crate::crypto::{self, SignatureBytes, SIGNATURE_ALG};
use crate::intent::{intent_hash, Intent};
use crate::pdr::{self, Outcome, PolicyDecisionRecord};
use crate::types::{SemanticAddress, UnixSeconds};

/// Forward tolerance on `issuedAt`, in seconds.
pub const DEFAULT_CLOCK_SKEW: u64 = 30;

pub const ANONYMOUS_SUBJECT: &str = "anonymous";

/// Issuers this gate trusts, and the audience string it answers to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TrustAnchors {
    pub issuers: BTreeMap<String, SemanticAddress>,
    #[serde(default)]
    pub self_identity: String,
}

#[derive(Debug, thiserror::Error)]
pub enum AnchorsError {
    #[error("anchors file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TrustAnchors {
    pub fn new(self_identity: impl Into<String>) -> Self {
        TrustAnchors {
            issuers: BTreeMap::new(),
            self_identity: self_identity.into(),
        }
    }

    pub fn trust(mut self, issuer: impl Into<String>, signer: SemanticAddress) -> Self {
        self.issuers.insert(issuer.into(), signer);
        self
    }

    pub fn load(path: &Path) -> Result<Self, AnchorsError> {
        let bytes = std::fs::read(path)?;
        let v = crate::json::parse_strict(&bytes).map_err(|e| AnchorsError::Format(e.to_string()))?;
        serde_json::from_value(v).map_err(|e| AnchorsError::Format(e.to_string()))
    }
}

/// The seven checks, in the order they run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Check {
    Signature,
    IssuerTrust,
    Audience,
    TimeValidity,
    HashBinding,
    DecisionOutcome,
    Replay,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Signature,
        Check::IssuerTrust,
        Check::Audience,
        Check::TimeValidity,
        Check::HashBinding,
        Check::DecisionOutcome,
        Check::Replay,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Check::Signature => "Signature",
            Check::IssuerTrust => "IssuerTrust",
            Check::Audience => "Audience",
            Check::TimeValidity => "TimeValidity",
            Check::HashBinding => "HashBinding",
            Check::DecisionOutcome => "DecisionOutcome",
            Check::Replay => "Replay",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepResult {
    pub check: Check,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerifyOutcome {
    Pass,
    Fail,
}

/// Steps run so far, stopping at the first failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub steps: Vec<StepResult>,
    pub outcome: VerifyOutcome,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.outcome == VerifyOutcome::Pass
    }

    pub fn failed_step(&self) -> Option<Check> {
        self.steps.iter().find(|s| !s.passed).map(|s| s.check)
    }

    pub fn failure_detail(&self) -> Option<&str> {
        self.steps.iter().find(|s| !s.passed).map(|s| s.detail.as_str())
    }

    pub(crate) fn fail_replay(&mut self, detail: String) {
        if let Some(last) = self.steps.last_mut().filter(|s| s.check == Check::Replay) {
            last.passed = false;
            last.detail = detail;
        }
        self.outcome = VerifyOutcome::Fail;
    }
}

/// Replay scope: the intent's pinned signer, else the record's subject.
pub fn subject_key(intent: &Intent, pdr: &PolicyDecisionRecord) -> String {
    match (&intent.constraints.required_signer, &pdr.subject) {
        (Some(s), _) => s.to_string(),
        (None, Some(sub)) => sub.clone(),
        (None, None) => ANONYMOUS_SUBJECT.to_owned(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub clock_skew: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            clock_skew: DEFAULT_CLOCK_SKEW,
        }
    }
}

pub fn verify_pair(
    intent: &Intent,
    pdr: &PolicyDecisionRecord,
    anchors: &TrustAnchors,
    registry: &NonceRegistry,
    clock: UnixSeconds,
) -> VerificationReport {
    verify_pair_with(intent, pdr, anchors, registry, clock, VerifyOptions::default())
}

pub fn verify_pair_with(
    intent: &Intent,
    pdr: &PolicyDecisionRecord,
    anchors: &TrustAnchors,
    registry: &NonceRegistry,
    clock: UnixSeconds,
    opts: VerifyOptions,
) -> VerificationReport {
    let mut steps = Vec::with_capacity(Check::ALL.len());
    for check in Check::ALL {
        let result = run_check(check, intent, pdr, anchors, registry, clock, opts);
        let passed = result.is_ok();
        steps.push(StepResult {
            check,
            passed,
            detail: result.unwrap_or_else(|e| e),
        });
        if !passed {
            return VerificationReport {
                steps,
                outcome: VerifyOutcome::Fail,
            };
        }
    }
    VerificationReport {
        steps,
        outcome: VerifyOutcome::Pass,
    }
}

fn run_check(
    check: Check,
    intent: &Intent,
    pdr: &PolicyDecisionRecord,
    anchors: &TrustAnchors,
    registry: &NonceRegistry,
    clock: UnixSeconds,
    opts: VerifyOptions,
) -> Result<String, String> {
    let sig = &pdr.policy_engine_signature;
    match check {
        Check::Signature => {
            if let Some(alg) = sig.alg.as_deref().filter(|a| *a != SIGNATURE_ALG) {
                return Err(format!("unsupported alg {alg:?}"));
            }
            let bytes = SignatureBytes::from_hex(&sig.signature).map_err(|e| format!("malformed signature: {e}"))?;
            let digest = pdr::pdr_signing_digest(pdr).map_err(|e| format!("cannot canonicalize record: {e}"))?;
            match crypto::recover_signer(&digest, &bytes) {
                Err(e) => Err(format!("malformed signature: {e}")),
                Ok(Some(a)) if a == sig.signer => Ok(format!("signed by {a}")),
                Ok(_) => Err(format!("signature does not recover to declared signer {}", sig.signer)),
            }
        }
        Check::IssuerTrust => match anchors.issuers.get(&pdr.issuer) {
            None => Err(format!("issuer {:?} is not anchored", pdr.issuer)),
            Some(a) if *a != sig.signer => Err(format!(
                "issuer {:?} is anchored to {a}, record signed by {}",
                pdr.issuer, sig.signer
            )),
            Some(_) => Ok(format!("issuer {:?} trusted", pdr.issuer)),
        },
        Check::Audience => {
            if !anchors.self_identity.is_empty() && pdr.audience == anchors.self_identity {
                Ok(format!("audience {:?}", pdr.audience))
            } else {
                Err(format!(
                    "audience {:?} is not this gate ({:?})",
                    pdr.audience, anchors.self_identity
                ))
            }
        }
        Check::TimeValidity => {
            if pdr.issued_at > clock.saturating_add(opts.clock_skew) {
                Err(format!("issuedAt {} is in the future (now {clock})", pdr.issued_at))
            } else if clock >= pdr.expires_at {
                Err(format!("expired at {} (now {clock})", pdr.expires_at))
            } else {
                Ok(format!("valid until {}", pdr.expires_at))
            }
        }
        Check::HashBinding => {
            let h = intent_hash(intent);
            if h == pdr.tis_hash {
                Ok(format!("tisHash {h}"))
            } else {
                Err(format!("intent hashes to {h}, record binds {}", pdr.tis_hash))
            }
        }
        Check::DecisionOutcome => match pdr.decision.outcome {
            Outcome::Approved => Ok("APPROVED".into()),
            Outcome::Rejected => Err(format!(
                "decision is REJECTED: {}",
                pdr.decision.reason.as_deref().unwrap_or("")
            )),
        },
        Check::Replay => {
            let key = subject_key(intent, pdr);
            let nonce = intent.constraints.nonce.as_ref();
            if registry.contains_pdr(&pdr.pdr_id) {
                Err(format!("pdrId {} already used", pdr.pdr_id))
            } else if nonce.is_some_and(|n| registry.contains_nonce(&key, n)) {
                Err(format!("nonce {} already used by {key}", nonce.map_or("", |n| n.as_str())))
            } else {
                Ok(format!("fresh for {key}"))
            }
        }
    }
}
