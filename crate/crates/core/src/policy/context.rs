use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::intent::{Intent, TokenRef};
use crate::types::{UintDecimal, UnixSeconds};

/// Scope keys an intent counts against: `*`, its action type, and
/// `TYPE:counterparty` when the action names one.
pub fn scope_keys(intent: &Intent) -> BTreeSet<String> {
    let t = intent.action.action_type().as_str();
    let mut keys = BTreeSet::from(["*".to_owned(), t.to_owned()]);
    if let Some(c) = intent.action.counterparty() {
        keys.insert(format!("{t}:{c}"));
    }
    keys
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpendEntry {
    pub at: UnixSeconds,
    pub amount: UintDecimal,
}

/// Clock and history a policy is evaluated under.
///
/// Mutation goes through [`EvaluationContext::record_spend`] and must be
/// serialized by the caller: one writer per subject at a time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvaluationContext {
    pub clock: UnixSeconds,
    pub spend: BTreeMap<TokenRef, Vec<SpendEntry>>,
    pub last_action_at: BTreeMap<String, UnixSeconds>,
}

/// One executed intent, as persisted in the spend ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SpendRecord {
    pub at: UnixSeconds,
    pub intent_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<TokenRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<UintDecimal>,
    pub scope_keys: Vec<String>,
}

impl SpendRecord {
    pub fn for_intent(intent: &Intent, at: UnixSeconds) -> Self {
        let outflow = intent.action.outflow();
        SpendRecord {
            at,
            intent_id: intent.intent_id.clone(),
            token: outflow.map(|(t, _)| t.key()),
            amount: outflow.map(|(_, a)| a.clone()),
            scope_keys: scope_keys(intent).into_iter().collect(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SpendLedgerError {
    #[error("timestamp {at} for {key} is earlier than the latest recorded {latest}")]
    TimestampRegression {
        key: String,
        at: UnixSeconds,
        latest: UnixSeconds,
    },
    #[error("spend ledger line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl EvaluationContext {
    pub fn at(clock: UnixSeconds) -> Self {
        EvaluationContext {
            clock,
            ..Default::default()
        }
    }

    /// Sum of recorded outflows of `token` with `at + window > clock`.
    pub fn spent_in_window(&self, token: &TokenRef, window: u64) -> BigUint {
        self.spend
            .get(token)
            .into_iter()
            .flatten()
            .filter(|e| e.at.saturating_add(window) > self.clock)
            .map(|e| e.amount.value())
            .sum()
    }

    /// Account for an executed intent. Nothing changes on error.
    pub fn record_spend(&mut self, intent: &Intent, at: UnixSeconds) -> Result<SpendRecord, SpendLedgerError> {
        let rec = SpendRecord::for_intent(intent, at);
        self.apply(&rec)?;
        Ok(rec)
    }

    pub fn apply(&mut self, rec: &SpendRecord) -> Result<(), SpendLedgerError> {
        let regression = |key: String, latest: UnixSeconds| SpendLedgerError::TimestampRegression {
            key,
            at: rec.at,
            latest,
        };
        if let Some(t) = &rec.token {
            if let Some(last) = self.spend.get(t).and_then(|v| v.last()) {
                if rec.at < last.at {
                    return Err(regression(format!("token {} on chain {}", t.address, t.chain_id), last.at));
                }
            }
        }
        for k in &rec.scope_keys {
            if let Some(&latest) = self.last_action_at.get(k) {
                if rec.at < latest {
                    return Err(regression(format!("scope {k}"), latest));
                }
            }
        }
        if let (Some(t), Some(a)) = (&rec.token, &rec.amount) {
            self.spend.entry(*t).or_default().push(SpendEntry {
                at: rec.at,
                amount: a.clone(),
            });
        }
        for k in &rec.scope_keys {
            self.last_action_at.insert(k.clone(), rec.at);
        }
        Ok(())
    }

    /// Drop spend entries that no window of `longest_window` seconds can see.
    pub fn prune(&mut self, longest_window: u64) {
        let clock = self.clock;
        for entries in self.spend.values_mut() {
            entries.retain(|e| e.at.saturating_add(longest_window) > clock);
        }
        self.spend.retain(|_, v| !v.is_empty());
    }
}

/// Replay a JSON-lines spend ledger. A missing file is an empty history.
pub fn load_spend_ledger(path: &Path, clock: UnixSeconds) -> Result<EvaluationContext, SpendLedgerError> {
    let mut ctx = EvaluationContext::at(clock);
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(ctx),
        Err(e) => return Err(e.into()),
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SpendRecord = serde_json::from_str(&line).map_err(|e| SpendLedgerError::BadLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        ctx.apply(&rec)?;
    }
    Ok(ctx)
}

impl SpendRecord {
    pub fn append_to(&self, path: &Path) -> io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        let line = serde_json::to_string(self).map_err(io::Error::other)?;
        writeln!(f, "{line}")?;
        f.sync_data()
    }
}
