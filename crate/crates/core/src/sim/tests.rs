use std::path::PathBuf;

use serde_json::json;

use super::*;
use crate::gate::build_envelope;
use crate::intent::{parse_intent, TokenRef};
use crate::pdr::parse_pdr;

const USDC: &str = "0xa0b86991c6218b36c1d19d4a2e9eb0ce3606eb48";
const STREAM: &str = "0x5ee7a0b3c1f0d4e2b9a8c7d6e5f4a3b2c1d0e9f8";
const PAYER: &str = "0x7a11ce00000000000000000000000000000000a1";
const T0: u64 = 1_767_225_600;
const DAY: u64 = 86_400;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run_fixture(name: &str) -> ScenarioRun {
    let (s, base) = Scenario::load(&fixtures().join(name)).unwrap();
    s.run(&base).unwrap()
}

fn usdc() -> Token {
    Token::new(1, USDC.parse().unwrap())
}

fn subscription_pipeline(payer_balance: u64) -> Pipeline {
    let key = Keypair::from_seed(&[3u8; 32]).unwrap();
    let cfg = PipelineConfig {
        policy: PolicySet::load(&fixtures().join("subscription.policy.json")).unwrap(),
        anchors: TrustAnchors::new("gate").trust("engine", key.address()),
        issuer_key: key,
        issuer_id: "engine".into(),
        audience: "gate".into(),
        ttl_seconds: 300,
        payer: PAYER.parse().unwrap(),
        venue: None,
        rng_seed: 1,
    };
    let ledger = MockLedger::new(
        T0,
        &[Holding {
            account: PAYER.parse().unwrap(),
            token: usdc().key(),
            amount: UintDecimal::from(payer_balance),
        }],
    );
    Pipeline::new(cfg, ledger).unwrap()
}

fn subscription(amount: u64, early: Option<u64>) -> Subscription {
    Subscription {
        token: usdc(),
        service: STREAM.parse().unwrap(),
        amount: UintDecimal::from(amount),
        start: T0,
        period_seconds: SUBSCRIPTION_PERIOD,
        early_attempt_after: early,
    }
}

#[test]
fn rebalance_scenario_executes_in_stage_order() {
    let run = run_fixture("rebalance.scenario.json");
    let t = &run.transcripts[0];
    assert_eq!(t.outcome, RunOutcome::Executed);
    assert_eq!(
        t.stages(),
        vec![
            Stage::Observe,
            Stage::ConstructTis,
            Stage::PolicyEval,
            Stage::PdrIssued,
            Stage::GateVerify,
            Stage::Execute,
            Stage::VerifyState
        ]
    );
    assert!(t.events[4].detail.contains("gas ceiling 60000000000"));
    let venue: SemanticAddress = "0x5a1e500000000000000000000000000000000005".parse().unwrap();
    let weth = TokenRef {
        chain_id: 1,
        address: "0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2".parse().unwrap(),
    };
    let payer: SemanticAddress = PAYER.parse().unwrap();
    assert_eq!(run.ledger.balance(&payer, &weth).as_str(), "1500000000000000000");
    assert_eq!(run.ledger.balance(&payer, &usdc().key()).as_str(), "15000000000");
    assert_eq!(run.ledger.balance(&venue, &usdc().key()).as_str(), "5000000000");
    assert_eq!(run.ledger.receipts().len(), 1);
}

#[test]
fn legacy_scenario_matches_typed_one() {
    let a = run_fixture("rebalance.scenario.json");
    let b = run_fixture("rebalance_legacy.scenario.json");
    assert_eq!(a.transcripts, b.transcripts);
}

#[test]
fn transcripts_are_deterministic() {
    let a = run_fixture("rebalance.scenario.json").transcripts[0].to_jsonl();
    let b = run_fixture("rebalance.scenario.json").transcripts[0].to_jsonl();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 8);
    assert!(a.ends_with("{\"events\":7,\"outcome\":\"EXECUTED\"}\n"));
}

#[test]
fn tampered_amount_refused_at_hash_binding() {
    let run = run_fixture("rebalance_tampered.scenario.json");
    let t = &run.transcripts[0];
    assert_eq!(t.outcome, RunOutcome::RefusedAt(Stage::GateVerify));
    assert!(t.last_detail().starts_with("HashBinding"), "{}", t.last_detail());
    assert!(run.ledger.receipts().is_empty());
}

#[test]
fn replayed_record_refused_second_time() {
    let run = run_fixture("rebalance_replayed.scenario.json");
    assert_eq!(run.transcripts.len(), 2);
    assert_eq!(run.transcripts[0].outcome, RunOutcome::Executed);
    assert_eq!(run.transcripts[1].outcome, RunOutcome::RefusedAt(Stage::GateVerify));
    assert!(run.transcripts[1].last_detail().starts_with("Replay"));
    assert_eq!(run.ledger.receipts().len(), 1);
}

#[test]
fn unanchored_issuer_and_unknown_token_are_config_errors() {
    let (mut s, base) = Scenario::load(&fixtures().join("rebalance.scenario.json")).unwrap();
    s.anchors = Some(TrustAnchors::new(&s.audience));
    assert!(matches!(
        s.run(&base),
        Err(ScenarioError::Config(ScenarioConfigError::IssuerNotAnchored(_)))
    ));
    let (mut s, base) = Scenario::load(&fixtures().join("rebalance.scenario.json")).unwrap();
    s.ledger.pop();
    assert!(matches!(
        s.run(&base),
        Err(ScenarioError::Config(ScenarioConfigError::UnknownToken(_)))
    ));
}

#[test]
fn subscription_three_months_with_early_attempt() {
    let mut p = subscription_pipeline(100_000_000);
    let out = run_subscription_loop(&mut p, &subscription(10_000_000, Some(29 * DAY)), 3).unwrap();
    let outcomes: Vec<RunOutcome> = out.iter().map(|t| t.outcome).collect();
    assert_eq!(
        outcomes,
        vec![
            RunOutcome::Executed,
            RunOutcome::RefusedAt(Stage::PolicyEval),
            RunOutcome::Executed,
            RunOutcome::Executed
        ]
    );
    assert!(out[1].last_detail().starts_with("REJECTED: CadenceMin"));
    let stream: SemanticAddress = STREAM.parse().unwrap();
    assert_eq!(p.ledger().balance(&stream, &usdc().key()).as_str(), "30000000");
    assert_eq!(p.ledger().receipts().len(), 3);
    assert_eq!(p.ledger().total_supply(&usdc().key()), 100_000_000u64.into());
}

#[test]
fn subscription_over_cap_rejected() {
    let mut p = subscription_pipeline(100_000_000);
    let out = run_subscription_loop(&mut p, &subscription(11_000_000, None), 1).unwrap();
    assert_eq!(out[0].outcome, RunOutcome::RefusedAt(Stage::PolicyEval));
    assert!(out[0].last_detail().starts_with("REJECTED: PerTxCap"));
    assert!(matches!(
        run_subscription_loop(&mut p, &subscription(1, None), 0),
        Err(ScenarioConfigError::NoMonths)
    ));
}

#[test]
fn insufficient_balance_refused_at_execute() {
    let mut p = subscription_pipeline(15_000_000);
    let out = run_subscription_loop(&mut p, &subscription(10_000_000, None), 2).unwrap();
    assert_eq!(out[0].outcome, RunOutcome::Executed);
    assert_eq!(out[1].outcome, RunOutcome::RefusedAt(Stage::Execute));
    assert!(out[1].last_detail().contains("needs 10000000"));
    assert_eq!(p.ledger().receipts().len(), 1);
}

fn rebalance_envelope() -> ExecutionEnvelope {
    let intent = parse_intent(include_bytes!("../../tests/golden/rebalance.tis.json")).unwrap();
    let pdr = parse_pdr(include_bytes!("../../tests/golden/rebalance.pdr.json")).unwrap();
    build_envelope(&intent, &pdr, 1_767_229_500).unwrap()
}

#[test]
fn execute_envelope_is_atomic() {
    let payer: SemanticAddress = PAYER.parse().unwrap();
    let venue = SemanticAddress::ZERO;
    let holdings = [Holding {
        account: payer,
        token: usdc().key(),
        amount: UintDecimal::from(5_000_000_000u64),
    }];
    // Venue holds no WETH: the second leg fails and the first is rolled back.
    let mut l = MockLedger::new(1_767_229_500, &holdings);
    let before = l.clone();
    let err = execute_envelope(&mut l, &rebalance_envelope(), payer, venue).unwrap_err();
    assert!(matches!(err, LedgerError::InsufficientBalance { .. }));
    assert_eq!(l, before);

    let mut l = MockLedger::new(1_767_230_001, &holdings);
    let before = l.clone();
    assert!(matches!(
        execute_envelope(&mut l, &rebalance_envelope(), payer, venue),
        Err(LedgerError::DeadlineExceeded { .. })
    ));
    assert_eq!(l, before);
    assert!(l.set_block_time(1).is_err());
}

#[test]
fn transfer_conserves_supply() {
    let payer: SemanticAddress = PAYER.parse().unwrap();
    let to: SemanticAddress = STREAM.parse().unwrap();
    let intent = crate::intent::intent_from_value(&json!({
        "version": "1.0.0",
        "intentId": "00000000-0000-4000-8000-000000000009",
        "action": {"type": "TRANSFER", "token": {"chainId": 1, "address": USDC}, "to": STREAM, "amount": "250"},
        "constraints": {"deadline": 2_000_000_000u64}
    }))
    .unwrap();
    let mut env = rebalance_envelope();
    env.effective_deadline = intent.constraints.deadline;
    env.intent = intent;
    let mut l = MockLedger::new(T0, &[Holding { account: payer, token: usdc().key(), amount: UintDecimal::from(1000u64) }]);
    let r = execute_envelope(&mut l, &env, payer, SemanticAddress::ZERO).unwrap().clone();
    assert_eq!(r.changes.len(), 2);
    assert_eq!(l.balance(&payer, &usdc().key()).as_str(), "750");
    assert_eq!(l.balance(&to, &usdc().key()).as_str(), "250");
    assert_eq!(l.total_supply(&usdc().key()), 1000u64.into());
}

#[test]
fn clock_script_repeats_last_and_rejects_regression() {
    let mut c = ClockScript::new(vec![1, 2]).unwrap();
    assert_eq!((c.tick(), c.tick(), c.tick()), (1, 2, 2));
    assert!(ClockScript::new(vec![2, 1]).is_err());
    assert!(ClockScript::new(vec![]).is_err());
}
