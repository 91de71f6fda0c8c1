use serde_json::json;

use super::*;
use crate::crypto::Keypair;
use crate::intent::{parse_intent, Intent};
use crate::pdr::{self, parse_pdr, BoundConstraints, Decision, ModOp, Modification, PolicyDecisionRecord};
use crate::policy::{issue_pdr_with_id, EvaluationContext, IssueParams};

const ISSUER: &str = "https://policy.turnkey.com";
const AUDIENCE: &str = "https://signer.fireblocks.com";
const NOW: u64 = 1_767_229_500;

fn key() -> Keypair {
    Keypair::from_seed(&[1u8; 32]).unwrap()
}

fn anchors() -> TrustAnchors {
    TrustAnchors::new(AUDIENCE).trust(ISSUER, key().address())
}

fn rebalance() -> (Intent, PolicyDecisionRecord) {
    (
        parse_intent(include_bytes!("../../tests/golden/rebalance.tis.json")).unwrap(),
        parse_pdr(include_bytes!("../../tests/golden/rebalance.pdr.json")).unwrap(),
    )
}

fn issue(intent: &Intent, decision: Decision, id: &str) -> PolicyDecisionRecord {
    let k = key();
    let params = IssueParams {
        issuer_key: &k,
        issuer_id: ISSUER,
        audience: AUDIENCE,
        ttl_seconds: 600,
    };
    issue_pdr_with_id(intent, decision, params, &EvaluationContext::at(1_767_229_200), id).unwrap()
}

fn failed_at(intent: &Intent, pdr: &PolicyDecisionRecord, clock: u64) -> Option<Check> {
    verify_pair(intent, pdr, &anchors(), &NonceRegistry::in_memory(), clock).failed_step()
}

#[test]
fn rebalance_pair_passes_with_gas_bound() {
    let (intent, pdr) = rebalance();
    let reg = NonceRegistry::in_memory();
    let audit = MemoryAudit::new();
    let report = verify_pair(&intent, &pdr, &anchors(), &reg, NOW);
    assert!(report.passed());
    assert_eq!(report.steps.len(), 7);
    let env = gate(&intent, &pdr, &anchors(), &reg, NOW, &audit).unwrap();
    assert_eq!(env.effective_max_gas_price_wei.unwrap().as_str(), "60000000000");
    assert_eq!(env.effective_deadline, 1_767_230_000);
    assert_eq!(env.original_tis_hash, env.effective_tis_hash);
    assert_eq!(audit.records().len(), 1);
    assert_eq!(audit.records()[0].outcome, AuditOutcome::Authorized);

    let err = gate(&intent, &pdr, &anchors(), &reg, NOW, &audit).unwrap_err();
    assert_eq!(err.report().unwrap().failed_step(), Some(Check::Replay));
    assert_eq!(audit.records().len(), 2);
    assert_eq!(audit.records()[1].failed_step.as_deref(), Some("Replay"));
}

#[test]
fn intent_gas_bound_wins_when_lower() {
    let (mut intent, golden) = rebalance();
    intent.constraints.max_gas_price_wei = Some(UintDecimal::from(50_000_000_000u64));
    let pdr = issue(&intent, golden.decision.clone(), "00000000-0000-4000-8000-0000000000aa");
    let env = gate(&intent, &pdr, &anchors(), &NonceRegistry::in_memory(), NOW, &MemoryAudit::new()).unwrap();
    assert_eq!(env.effective_max_gas_price_wei.unwrap().as_str(), "50000000000");
}

#[test]
fn each_step_fails_where_intended() {
    let (intent, pdr) = rebalance();

    let mut bad = pdr.clone();
    bad.policy_engine_signature.signer = crate::types::SemanticAddress::ZERO;
    assert_eq!(failed_at(&intent, &bad, NOW), Some(Check::Signature));
    let mut bad = pdr.clone();
    bad.policy_engine_signature.alg = Some("ES256".into());
    assert_eq!(failed_at(&intent, &bad, NOW), Some(Check::Signature));

    let other = Keypair::from_seed(&[9u8; 32]).unwrap();
    let mut bad = pdr.clone();
    pdr::sign_pdr(&mut bad, &other).unwrap();
    assert_eq!(failed_at(&intent, &bad, NOW), Some(Check::IssuerTrust));

    let r = verify_pair(
        &intent,
        &pdr,
        &TrustAnchors::new("https://elsewhere").trust(ISSUER, key().address()),
        &NonceRegistry::in_memory(),
        NOW,
    );
    assert_eq!(r.failed_step(), Some(Check::Audience));
    assert_eq!(r.steps.len(), 3);

    assert_eq!(failed_at(&intent, &pdr, pdr.expires_at), Some(Check::TimeValidity));
    assert_eq!(failed_at(&intent, &pdr, pdr.expires_at - 1), None);
    assert_eq!(failed_at(&intent, &pdr, pdr.issued_at - 30), None);
    assert_eq!(failed_at(&intent, &pdr, pdr.issued_at - 31), Some(Check::TimeValidity));

    let mut tampered = intent.clone();
    if let Action::Swap(s) = &mut tampered.action {
        s.amount_in = UintDecimal::from(5_000_000_001u64);
    }
    assert_eq!(failed_at(&tampered, &pdr, NOW), Some(Check::HashBinding));

    let rejected = issue(&intent, Decision::rejected("p", "no"), "00000000-0000-4000-8000-0000000000bb");
    assert_eq!(failed_at(&intent, &rejected, NOW), Some(Check::DecisionOutcome));

    let reg = NonceRegistry::in_memory();
    reg.consume("x", None, &pdr.pdr_id, 0).unwrap();
    let r = verify_pair(&intent, &pdr, &anchors(), &reg, NOW);
    assert_eq!(r.failed_step(), Some(Check::Replay));
}

#[test]
fn nonce_replay_across_records() {
    let (mut intent, golden) = rebalance();
    intent.constraints.nonce = Some(UintDecimal::from(5u64));
    let a = issue(&intent, golden.decision.clone(), "00000000-0000-4000-8000-000000000001");
    let b = issue(&intent, golden.decision.clone(), "00000000-0000-4000-8000-000000000002");
    let reg = NonceRegistry::in_memory();
    let audit = MemoryAudit::new();
    gate(&intent, &a, &anchors(), &reg, NOW, &audit).unwrap();
    let err = gate(&intent, &b, &anchors(), &reg, NOW, &audit).unwrap_err();
    assert_eq!(err.report().unwrap().failed_step(), Some(Check::Replay));
    assert!(reg.contains_nonce(ANONYMOUS_SUBJECT, &UintDecimal::from(5u64)));
}

#[test]
fn refused_calls_do_not_consume() {
    let (intent, pdr) = rebalance();
    let reg = NonceRegistry::in_memory();
    let audit = MemoryAudit::new();
    for clock in [pdr.expires_at, pdr.expires_at + 100, 0] {
        assert!(gate(&intent, &pdr, &anchors(), &reg, clock, &audit).is_err());
    }
    assert!(reg.is_empty());
    assert_eq!(audit.records().len(), 3);
    assert!(audit.records().iter().all(|r| r.outcome == AuditOutcome::Refused));
}

#[test]
fn modifications_apply_and_tighten() {
    let (intent, golden) = rebalance();
    let mut d = golden.decision.clone();
    d.modified_parameters = Some(vec![
        Modification {
            path: "/constraints/deadline".into(),
            operation: ModOp::Replace,
            value: Some(json!(1_767_229_900u64)),
        },
        Modification {
            path: "/preferences".into(),
            operation: ModOp::Add,
            value: Some(json!({"privacyMode": "PRIVATE"})),
        },
    ]);
    d.bound_constraints = Some(BoundConstraints {
        tight_deadline: Some(1_767_229_950),
        ..Default::default()
    });
    let pdr = issue(&intent, d, "00000000-0000-4000-8000-0000000000cc");
    let env = gate(&intent, &pdr, &anchors(), &NonceRegistry::in_memory(), NOW, &MemoryAudit::new()).unwrap();
    assert_eq!(env.effective_deadline, 1_767_229_900);
    assert_eq!(env.intent.constraints.deadline, 1_767_229_900);
    assert!(env.intent.preferences.is_some());
    assert_ne!(env.original_tis_hash, env.effective_tis_hash);
    assert!(env.effective_max_gas_price_wei.is_none());
}

#[test]
fn bad_modification_aborts_without_consuming() {
    let (intent, golden) = rebalance();
    let mut d = golden.decision.clone();
    d.modified_parameters = Some(vec![Modification {
        path: "/constraints/nonce".into(),
        operation: ModOp::Add,
        value: Some(json!("1")),
    }]);
    let pdr = issue(&intent, d, "00000000-0000-4000-8000-0000000000dd");
    let reg = NonceRegistry::in_memory();
    let audit = MemoryAudit::new();
    let err = gate(&intent, &pdr, &anchors(), &reg, NOW, &audit).unwrap_err();
    assert!(matches!(err, GateError::Modification(ModifyError::NonceForbidden { .. })));
    assert!(reg.is_empty());
    assert_eq!(audit.records()[0].failed_step.as_deref(), Some("Modifications"));
}

#[test]
fn subject_key_precedence() {
    let (mut intent, mut pdr) = rebalance();
    assert_eq!(subject_key(&intent, &pdr), ANONYMOUS_SUBJECT);
    pdr.subject = Some("acct-7".into());
    assert_eq!(subject_key(&intent, &pdr), "acct-7");
    intent.constraints.required_signer = Some(key().address());
    assert_eq!(subject_key(&intent, &pdr), key().address().to_string());
}

#[test]
fn anchors_file_format() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("anchors.json");
    std::fs::write(&p, serde_json::to_vec(&anchors()).unwrap()).unwrap();
    assert_eq!(TrustAnchors::load(&p).unwrap(), anchors());
    std::fs::write(&p, r#"{"issuers": {"a": "0x12"}}"#).unwrap();
    assert!(TrustAnchors::load(&p).is_err());
}
