//! End-to-end harness: planner, policy engine, gate, and a mock ledger driven
//! by a scripted clock. Each run yields an ordered transcript.

mod ledger;
mod scenario;

pub use ledger::{execute_envelope, BalanceChange, Holding, LedgerError, MockLedger, Receipt};
pub use scenario::{IssuerSpec, PolicySource, Scenario, ScenarioError, ScenarioRun};

use std::fmt;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::canonical;
use crate::crypto::Keypair;
use crate::gate::{gate, ExecutionEnvelope, GateError, MemoryAudit, NonceRegistry, TrustAnchors};
use crate::intent::{
    intent_from_value, intent_hash, normalize_legacy_intent, Action, Constraints, Intent, LegacyOptions, PrivacyMode,
    Token, Transfer, INTENT_VERSION,
};
use crate::pdr::{pdr_from_value, PolicyDecisionRecord};
use crate::policy::{evaluate, issue_pdr, EvaluationContext, IssueParams, PolicySet};
use crate::types::{format_timestamp, SemanticAddress, UintDecimal, UnixSeconds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    Observe,
    ConstructTis,
    PolicyEval,
    PdrIssued,
    GateVerify,
    Execute,
    VerifyState,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Observe => "OBSERVE",
            Stage::ConstructTis => "CONSTRUCT_TIS",
            Stage::PolicyEval => "POLICY_EVAL",
            Stage::PdrIssued => "PDR_ISSUED",
            Stage::GateVerify => "GATE_VERIFY",
            Stage::Execute => "EXECUTE",
            Stage::VerifyState => "VERIFY_STATE",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    pub stage: Stage,
    pub detail: String,
    pub ts: UnixSeconds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Executed,
    RefusedAt(Stage),
}

impl fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunOutcome::Executed => f.write_str("EXECUTED"),
            RunOutcome::RefusedAt(s) => write!(f, "REFUSED_AT({s})"),
        }
    }
}

impl Serialize for RunOutcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineTranscript {
    pub events: Vec<Event>,
    pub outcome: RunOutcome,
}

impl PipelineTranscript {
    pub fn stages(&self) -> Vec<Stage> {
        self.events.iter().map(|e| e.stage).collect()
    }

    pub fn last_detail(&self) -> &str {
        self.events.last().map_or("", |e| e.detail.as_str())
    }

    pub fn is_executed(&self) -> bool {
        self.outcome == RunOutcome::Executed
    }

    /// One canonical JSON line per event, then a summary line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&canonical_line(&serde_json::to_value(e).expect("event serializes")));
        }
        let summary = serde_json::json!({
            "outcome": self.outcome.to_string(),
            "events": self.events.len(),
        });
        out.push_str(&canonical_line(&summary));
        out
    }
}

fn canonical_line(v: &Value) -> String {
    let mut s = canonical::canonicalize(v)
        .expect("transcript values are canonicalizable")
        .as_str()
        .to_owned();
    s.push('\n');
    s
}

/// Timestamps handed out one per stage. Once exhausted the last value repeats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockScript {
    ticks: Vec<UnixSeconds>,
    pos: usize,
}

impl ClockScript {
    pub fn new(ticks: Vec<UnixSeconds>) -> Result<Self, ScenarioConfigError> {
        if ticks.is_empty() {
            return Err(ScenarioConfigError::Clock("clock script is empty".into()));
        }
        if ticks.windows(2).any(|w| w[1] < w[0]) {
            return Err(ScenarioConfigError::Clock("clock script goes backwards".into()));
        }
        Ok(ClockScript { ticks, pos: 0 })
    }

    pub fn fixed(t: UnixSeconds) -> Self {
        ClockScript { ticks: vec![t], pos: 0 }
    }

    pub fn tick(&mut self) -> UnixSeconds {
        let t = self.ticks[self.pos.min(self.ticks.len() - 1)];
        self.pos += 1;
        t
    }
}

/// Where the planner's intent comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum IntentSource {
    Typed(Value),
    Legacy(Value),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TamperTarget {
    Tis,
    Pdr,
}

/// A value written into the intent or record after issuance and before the
/// gate sees them.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Tamper {
    pub target: TamperTarget,
    pub pointer: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioConfigError {
    #[error("issuer `{0}` is not anchored to the issuing key")]
    IssuerNotAnchored(String),
    #[error("token {0} has no balances in the ledger")]
    UnknownToken(String),
    #[error("swap needs a venue account")]
    MissingVenue,
    #[error("clock: {0}")]
    Clock(String),
    #[error("policy: {0}")]
    Policy(String),
    #[error("subscription needs at least one month")]
    NoMonths,
    #[error("tamper pointer {0} does not resolve")]
    TamperPointer(String),
    #[error("nothing to resubmit")]
    NothingToResubmit,
}

/// Static configuration of the pipeline actors.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub policy: PolicySet,
    pub issuer_key: Keypair,
    pub issuer_id: String,
    pub audience: String,
    pub ttl_seconds: u64,
    pub anchors: TrustAnchors,
    pub payer: SemanticAddress,
    pub venue: Option<SemanticAddress>,
    pub rng_seed: u64,
}

/// Running state: ledger, replay registry, spend history, audit trail.
pub struct Pipeline {
    cfg: PipelineConfig,
    ledger: MockLedger,
    registry: NonceRegistry,
    history: EvaluationContext,
    audit: MemoryAudit,
    rng: ChaCha20Rng,
    last: Option<(Intent, PolicyDecisionRecord)>,
}

struct Run {
    events: Vec<Event>,
}

impl Run {
    fn log(&mut self, stage: Stage, ts: UnixSeconds, detail: impl Into<String>) {
        self.events.push(Event {
            stage,
            detail: detail.into(),
            ts,
        });
    }

    fn refuse(mut self, stage: Stage, ts: UnixSeconds, detail: impl Into<String>) -> PipelineTranscript {
        self.log(stage, ts, detail);
        PipelineTranscript {
            events: self.events,
            outcome: RunOutcome::RefusedAt(stage),
        }
    }
}

fn token_label(t: &Token) -> String {
    t.symbol.clone().unwrap_or_else(|| t.address.to_string())
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, ledger: MockLedger) -> Result<Self, ScenarioConfigError> {
        if cfg.anchors.issuers.get(&cfg.issuer_id) != Some(&cfg.issuer_key.address()) {
            return Err(ScenarioConfigError::IssuerNotAnchored(cfg.issuer_id.clone()));
        }
        cfg.policy
            .validate()
            .map_err(|e| ScenarioConfigError::Policy(e.to_string()))?;
        Ok(Pipeline {
            history: EvaluationContext::at(ledger.block_time()),
            rng: ChaCha20Rng::seed_from_u64(cfg.rng_seed),
            cfg,
            ledger,
            registry: NonceRegistry::in_memory(),
            audit: MemoryAudit::new(),
            last: None,
        })
    }

    pub fn ledger(&self) -> &MockLedger {
        &self.ledger
    }

    pub fn history(&self) -> &EvaluationContext {
        &self.history
    }

    pub fn audit(&self) -> &MemoryAudit {
        &self.audit
    }

    pub fn into_ledger(self) -> MockLedger {
        self.ledger
    }

    fn observe(&mut self, run: &mut Run, t: UnixSeconds, what: &str) -> Result<(), ScenarioConfigError> {
        self.ledger
            .set_block_time(t)
            .map_err(|e| ScenarioConfigError::Clock(e.to_string()))?;
        let ts = format_timestamp(t).unwrap_or_else(|| t.to_string());
        run.log(
            Stage::Observe,
            t,
            format!("{what} at block time {ts}; {} receipts so far", self.ledger.receipts().len()),
        );
        Ok(())
    }

    fn check_tokens(&self, intent: &Intent) -> Result<(), ScenarioConfigError> {
        for t in intent.action.tokens() {
            if !self.ledger.knows_token(&t.key()) {
                return Err(ScenarioConfigError::UnknownToken(format!("{}:{}", t.chain_id, t.address)));
            }
        }
        if matches!(intent.action, Action::Swap(_)) && self.cfg.venue.is_none() {
            return Err(ScenarioConfigError::MissingVenue);
        }
        Ok(())
    }

    /// Full flow for one intent.
    pub fn run(
        &mut self,
        source: &IntentSource,
        clock: &mut ClockScript,
        tamper: &[Tamper],
    ) -> Result<PipelineTranscript, ScenarioConfigError> {
        let mut run = Run { events: Vec::new() };
        let t = clock.tick();
        self.observe(&mut run, t, "planner triggered")?;

        let t = clock.tick();
        let built = match source {
            IntentSource::Typed(v) => intent_from_value(v).map_err(|e| e.to_string()),
            IntentSource::Legacy(v) => {
                normalize_legacy_intent(v, &LegacyOptions::default()).map_err(|e| e.to_string())
            }
        };
        let intent = match built {
            Ok(i) => i,
            Err(e) => return Ok(run.refuse(Stage::ConstructTis, t, e)),
        };
        self.check_tokens(&intent)?;
        run.log(
            Stage::ConstructTis,
            t,
            format!(
                "intent {} ({}) hash {}",
                intent.intent_id,
                intent.action.action_type().as_str(),
                intent_hash(&intent)
            ),
        );

        let t = clock.tick();
        self.history.clock = t;
        let decision = evaluate(&intent, &self.cfg.policy, &self.history);
        if !decision.is_approved() {
            let reason = decision.reason.unwrap_or_default();
            return Ok(run.refuse(Stage::PolicyEval, t, format!("REJECTED: {reason}")));
        }
        let risk = decision.risk_score.map(|r| r.to_text()).unwrap_or_else(|| "0".into());
        run.log(
            Stage::PolicyEval,
            t,
            format!("APPROVED by {} with riskScore {risk}", decision.policy_id),
        );

        let t = clock.tick();
        self.history.clock = t;
        let params = IssueParams {
            issuer_key: &self.cfg.issuer_key,
            issuer_id: &self.cfg.issuer_id,
            audience: &self.cfg.audience,
            ttl_seconds: self.cfg.ttl_seconds,
        };
        let pdr = match issue_pdr(&intent, decision, params, &self.history, &mut self.rng) {
            Ok(p) => p,
            Err(e) => return Ok(run.refuse(Stage::PdrIssued, t, e.to_string())),
        };
        run.log(
            Stage::PdrIssued,
            t,
            format!(
                "record {} signed by {} expires {}",
                pdr.pdr_id,
                pdr.policy_engine_signature.signer,
                format_timestamp(pdr.expires_at).unwrap_or_default()
            ),
        );

        let t = clock.tick();
        let (intent, pdr) = match apply_tamper(intent, pdr, tamper)? {
            Ok(pair) => pair,
            Err(detail) => return Ok(run.refuse(Stage::GateVerify, t, detail)),
        };
        self.last = Some((intent.clone(), pdr.clone()));
        self.submit(run, &intent, &pdr, t, clock)
    }

    /// Present the most recent (intent, record) pair to the gate again.
    pub fn resubmit(&mut self, clock: &mut ClockScript) -> Result<PipelineTranscript, ScenarioConfigError> {
        let (intent, pdr) = self.last.clone().ok_or(ScenarioConfigError::NothingToResubmit)?;
        let mut run = Run { events: Vec::new() };
        let t = clock.tick();
        self.observe(&mut run, t, "planner resubmitted a stored authorization")?;
        let t = clock.tick();
        self.submit(run, &intent, &pdr, t, clock)
    }

    fn submit(
        &mut self,
        mut run: Run,
        intent: &Intent,
        pdr: &PolicyDecisionRecord,
        t: UnixSeconds,
        clock: &mut ClockScript,
    ) -> Result<PipelineTranscript, ScenarioConfigError> {
        let env = match gate(intent, pdr, &self.cfg.anchors, &self.registry, t, &self.audit) {
            Ok(env) => env,
            Err(GateError::Refused(report)) => {
                let step = report.failed_step().map_or("?", |c| c.as_str());
                let detail = report.failure_detail().unwrap_or_default();
                return Ok(run.refuse(Stage::GateVerify, t, format!("{step}: {detail}")));
            }
            Err(e) => return Ok(run.refuse(Stage::GateVerify, t, e.to_string())),
        };
        let gas = env
            .effective_max_gas_price_wei
            .as_ref()
            .map_or_else(|| "none".to_owned(), |g| g.to_string());
        run.log(
            Stage::GateVerify,
            t,
            format!(
                "authorized {}; gas ceiling {gas}; deadline {}; approval signed by the single-key gate",
                env.pdr_id, env.effective_deadline
            ),
        );

        let t = clock.tick();
        if let Err(e) = self.ledger.set_block_time(t) {
            return Err(ScenarioConfigError::Clock(e.to_string()));
        }
        let payer = self.cfg.payer;
        let venue = self.cfg.venue.unwrap_or(SemanticAddress::ZERO);
        let receipt = match self.ledger.execute(&env, payer, venue) {
            Ok(r) => r.clone(),
            Err(e) => return Ok(run.refuse(Stage::Execute, t, e.to_string())),
        };
        self.history.clock = t;
        self.history
            .record_spend(&env.intent, t)
            .map_err(|e| ScenarioConfigError::Clock(e.to_string()))?;
        // Routing is logged only; no relay is modeled.
        let private = env.intent.preferences.as_ref().and_then(|p| p.privacy_mode) == Some(PrivacyMode::Private);
        let route = if private { "private relay" } else { "public mempool" };
        run.log(
            Stage::Execute,
            t,
            format!("receipt {} with {} balance changes via {route}", receipt.index, receipt.changes.len()),
        );

        let t = clock.tick();
        match verify_state(&env, &receipt, payer) {
            Ok(detail) => {
                run.log(Stage::VerifyState, t, detail);
                Ok(PipelineTranscript {
                    events: run.events,
                    outcome: RunOutcome::Executed,
                })
            }
            Err(detail) => Ok(run.refuse(Stage::VerifyState, t, detail)),
        }
    }
}

fn apply_tamper(
    intent: Intent,
    pdr: PolicyDecisionRecord,
    steps: &[Tamper],
) -> Result<Result<(Intent, PolicyDecisionRecord), String>, ScenarioConfigError> {
    if steps.is_empty() {
        return Ok(Ok((intent, pdr)));
    }
    let mut tis = intent.to_value();
    let mut rec = pdr.to_value();
    for s in steps {
        let doc = match s.target {
            TamperTarget::Tis => &mut tis,
            TamperTarget::Pdr => &mut rec,
        };
        let slot = doc
            .pointer_mut(&s.pointer)
            .ok_or_else(|| ScenarioConfigError::TamperPointer(s.pointer.clone()))?;
        *slot = s.value.clone();
    }
    let intent = match intent_from_value(&tis) {
        Ok(i) => i,
        Err(e) => return Ok(Err(format!("intent rejected before verification: {e}"))),
    };
    let pdr = match pdr_from_value(&rec) {
        Ok(p) => p,
        Err(e) => return Ok(Err(format!("record rejected before verification: {e}"))),
    };
    Ok(Ok((intent, pdr)))
}

/// Check that the receipt shows the beneficiary credited with what the
/// intent promised.
fn verify_state(env: &ExecutionEnvelope, receipt: &Receipt, payer: SemanticAddress) -> Result<String, String> {
    let (who, token, amount) = match &env.intent.action {
        Action::Transfer(t) => (t.to, t.token.key(), &t.amount),
        Action::Swap(s) => (s.recipient.unwrap_or(payer), s.token_out.key(), &s.min_amount_out),
        Action::Delegate(d) => return Ok(format!("delegation to {} recorded, no balance effect", d.delegatee)),
    };
    let change = receipt
        .changes
        .iter()
        .find(|c| c.account == who && c.token == token)
        .ok_or_else(|| format!("no balance change for {who}"))?;
    let delta = change.post.value() - change.pre.value();
    if delta != amount.value() {
        return Err(format!("{who} credited {delta}, expected {amount}"));
    }
    Ok(format!("{who} credited {amount}; balance now {}", change.post))
}

/// A recurring payment plan.
#[derive(Debug, Clone)]
pub struct Subscription {
    pub token: Token,
    pub service: SemanticAddress,
    pub amount: UintDecimal,
    pub start: UnixSeconds,
    pub period_seconds: u64,
    /// When set, one extra attempt is made this many seconds after the first
    /// payment.
    pub early_attempt_after: Option<u64>,
}

pub const SUBSCRIPTION_PERIOD: u64 = 30 * 86_400;

impl Pipeline {
    fn billing_intent(&mut self, sub: &Subscription, at: UnixSeconds, nonce: u64) -> Intent {
        let mut bytes = [0u8; 16];
        rand_chacha::rand_core::RngCore::fill_bytes(&mut self.rng, &mut bytes);
        let mut constraints = Constraints::with_deadline(at + 3600);
        constraints.nonce = Some(UintDecimal::from(nonce));
        Intent {
            version: INTENT_VERSION.to_owned(),
            intent_id: uuid::Builder::from_random_bytes(bytes).into_uuid().to_string(),
            metadata: None,
            action: Action::Transfer(Transfer {
                token: sub.token.clone(),
                to: sub.service,
                amount: sub.amount.clone(),
                memo: None,
            }),
            constraints,
            preferences: None,
        }
    }
}

/// Run one billing cycle per month, plus the optional early attempt.
/// Transcripts come back in clock order.
pub fn run_subscription_loop(
    pipeline: &mut Pipeline,
    sub: &Subscription,
    months: u32,
) -> Result<Vec<PipelineTranscript>, ScenarioConfigError> {
    if months == 0 {
        return Err(ScenarioConfigError::NoMonths);
    }
    let mut attempts: Vec<UnixSeconds> = (0..u64::from(months)).map(|m| sub.start + m * sub.period_seconds).collect();
    if let Some(early) = sub.early_attempt_after {
        attempts.push(sub.start + early);
        attempts.sort_unstable();
    }
    let mut out = Vec::with_capacity(attempts.len());
    for (n, at) in attempts.into_iter().enumerate() {
        let intent = pipeline.billing_intent(sub, at, n as u64 + 1);
        let mut clock = ClockScript::fixed(at);
        let label = format!("billing cycle for {} ({})", sub.service, token_label(&sub.token));
        let source = IntentSource::Typed(intent.to_value());
        let mut t = pipeline.run(&source, &mut clock, &[])?;
        if let Some(first) = t.events.first_mut() {
            first.detail = format!("{label}; {}", first.detail);
        }
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
