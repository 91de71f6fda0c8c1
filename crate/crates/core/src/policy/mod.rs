//! Rule evaluation and decision-record issuance.
//!
//! A [`PolicySet`] is an ordered list of rules combined deny-overrides: every
//! rule must pass for an approval, the first failing rule names the rejection,
//! and an empty list denies everything. Advisory signals never decide; they
//! only feed the risk score.

mod context;
mod issue;
mod signals;

pub use context::{load_spend_ledger, scope_keys, EvaluationContext, SpendEntry, SpendLedgerError, SpendRecord};
pub use issue::{issue_pdr, issue_pdr_with_id, IssueError, IssueParams};
pub use signals::AdvisorySignal;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::intent::{Action, ActionType, Intent, TokenRef};
use crate::json;
use crate::pdr::{BoundConstraints, Decision, RiskScore};
use crate::types::{SemanticAddress, UintDecimal, UnixSeconds};

pub const POLICY_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum PolicyRule {
    ActionAllowlist {
        types: BTreeSet<ActionType>,
    },
    /// Checked against `to`, `recipient`, or `delegatee`. A swap without a
    /// recipient pays the acting account and passes.
    RecipientAllowlist {
        addresses: BTreeSet<SemanticAddress>,
    },
    TokenAllowlist {
        tokens: BTreeSet<TokenRef>,
    },
    PerTxCap {
        token: TokenRef,
        max_amount: UintDecimal,
    },
    WindowCap {
        token: TokenRef,
        max_amount: UintDecimal,
        window_seconds: u64,
    },
    CadenceMin {
        min_seconds_between: u64,
        scope_key: String,
    },
    DeadlineMax {
        max_seconds_ahead: u64,
    },
    GasCeiling {
        max_gas_price_wei: UintDecimal,
    },
    DelegateScopeGuard {
        max_contracts: u64,
        max_value_wei: UintDecimal,
        max_validity_seconds: u64,
    },
    RequireSigner {
        address: SemanticAddress,
    },
}

impl PolicyRule {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyRule::ActionAllowlist { .. } => "ActionAllowlist",
            PolicyRule::RecipientAllowlist { .. } => "RecipientAllowlist",
            PolicyRule::TokenAllowlist { .. } => "TokenAllowlist",
            PolicyRule::PerTxCap { .. } => "PerTxCap",
            PolicyRule::WindowCap { .. } => "WindowCap",
            PolicyRule::CadenceMin { .. } => "CadenceMin",
            PolicyRule::DeadlineMax { .. } => "DeadlineMax",
            PolicyRule::GasCeiling { .. } => "GasCeiling",
            PolicyRule::DelegateScopeGuard { .. } => "DelegateScopeGuard",
            PolicyRule::RequireSigner { .. } => "RequireSigner",
        }
    }

    fn check_bounds(&self) -> Result<(), String> {
        match self {
            PolicyRule::WindowCap { window_seconds: 0, .. } => Err("windowSeconds must be >= 1".into()),
            PolicyRule::CadenceMin { min_seconds_between: 0, .. } => {
                Err("minSecondsBetween must be >= 1".into())
            }
            PolicyRule::CadenceMin { scope_key, .. } if scope_key.is_empty() => {
                Err("scopeKey must be non-empty".into())
            }
            PolicyRule::DeadlineMax { max_seconds_ahead: 0 } => Err("maxSecondsAhead must be >= 1".into()),
            _ => Ok(()),
        }
    }

    /// `Err` carries the rejection detail.
    fn check(&self, intent: &Intent, ctx: &EvaluationContext) -> Result<(), String> {
        let action = &intent.action;
        match self {
            PolicyRule::ActionAllowlist { types } => {
                let t = action.action_type();
                if types.contains(&t) {
                    Ok(())
                } else {
                    Err(format!("action {} is not allowed", t.as_str()))
                }
            }
            PolicyRule::RecipientAllowlist { addresses } => match action.counterparty() {
                Some(a) if !addresses.contains(&a) => Err(format!("counterparty {a} is not allowlisted")),
                _ => Ok(()),
            },
            PolicyRule::TokenAllowlist { tokens } => {
                match action.tokens().into_iter().find(|t| !tokens.contains(&t.key())) {
                    Some(t) => Err(format!("token {} on chain {} is not allowlisted", t.address, t.chain_id)),
                    None => Ok(()),
                }
            }
            PolicyRule::PerTxCap { token, max_amount } => match action.outflow() {
                Some((t, amount)) if t.key() == *token && amount.value() > max_amount.value() => {
                    Err(format!("amount {amount} exceeds per-transaction cap {max_amount}"))
                }
                _ => Ok(()),
            },
            PolicyRule::WindowCap {
                token,
                max_amount,
                window_seconds,
            } => match action.outflow() {
                Some((t, amount)) if t.key() == *token => {
                    let spent = ctx.spent_in_window(token, *window_seconds);
                    let total = &spent + amount.value();
                    if total > max_amount.value() {
                        Err(format!(
                            "amount {amount} plus {spent} already spent in the last {window_seconds}s exceeds cap {max_amount}"
                        ))
                    } else {
                        Ok(())
                    }
                }
                _ => Ok(()),
            },
            PolicyRule::CadenceMin {
                min_seconds_between,
                scope_key,
            } => {
                if !scope_keys(intent).contains(scope_key) {
                    return Ok(());
                }
                match ctx.last_action_at.get(scope_key) {
                    Some(&last) if ctx.clock < last.saturating_add(*min_seconds_between) => Err(format!(
                        "last action on scope {scope_key} at {last}; next allowed at {} (now {})",
                        last.saturating_add(*min_seconds_between),
                        ctx.clock
                    )),
                    _ => Ok(()),
                }
            }
            PolicyRule::DeadlineMax { .. } => {
                if intent.constraints.deadline < ctx.clock {
                    Err(format!(
                        "intent deadline {} has already passed (now {})",
                        intent.constraints.deadline, ctx.clock
                    ))
                } else {
                    Ok(())
                }
            }
            PolicyRule::GasCeiling { .. } => Ok(()),
            PolicyRule::DelegateScopeGuard {
                max_contracts,
                max_value_wei,
                max_validity_seconds,
            } => {
                let Action::Delegate(d) = action else {
                    return Ok(());
                };
                let n = d.scope.contracts.as_ref().map_or(0, Vec::len) as u64;
                if n > *max_contracts {
                    return Err(format!("scope names {n} contracts, limit {max_contracts}"));
                }
                match &d.scope.max_value_wei {
                    None => return Err("scope has no maxValueWei".into()),
                    Some(v) if v.value() > max_value_wei.value() => {
                        return Err(format!("scope maxValueWei {v} exceeds {max_value_wei}"))
                    }
                    Some(_) => {}
                }
                let horizon = ctx.clock.saturating_add(*max_validity_seconds);
                match d.scope.valid_until {
                    None => Err("scope has no validUntil".into()),
                    Some(u) if u > horizon => Err(format!("scope validUntil {u} is beyond {horizon}")),
                    Some(_) => Ok(()),
                }
            }
            PolicyRule::RequireSigner { address } => match intent.constraints.required_signer {
                Some(s) if s == *address => Ok(()),
                Some(s) => Err(format!("requiredSigner {s} is not {address}")),
                None => Err(format!("intent does not pin requiredSigner {address}")),
            },
        }
    }
}

/// A versioned rule bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PolicySet {
    #[serde(default = "default_version")]
    pub version: String,
    pub policy_id: String,
    pub rules: Vec<PolicyRule>,
    #[serde(default)]
    pub advisory_signals: Vec<AdvisorySignal>,
}

fn default_version() -> String {
    POLICY_VERSION.to_owned()
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("policy file is not valid JSON: {0}")]
    MalformedJson(String),
    #[error("policy does not match the policy format: {0}")]
    Format(String),
    #[error("unsupported policy version {0:?}")]
    Version(String),
    #[error("policyId must be non-empty")]
    EmptyPolicyId,
    #[error("rule {index} ({name}): {reason}")]
    InvalidRule {
        index: usize,
        name: &'static str,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PolicySet {
    pub fn new(policy_id: impl Into<String>, rules: Vec<PolicyRule>) -> Self {
        PolicySet {
            version: default_version(),
            policy_id: policy_id.into(),
            rules,
            advisory_signals: Vec::new(),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, PolicyError> {
        let v = json::parse_strict(bytes).map_err(|e| PolicyError::MalformedJson(e.to_string()))?;
        let p: PolicySet = serde_json::from_value(v).map_err(|e| PolicyError::Format(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        Self::from_json(&std::fs::read(path)?)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.version != POLICY_VERSION {
            return Err(PolicyError::Version(self.version.clone()));
        }
        if self.policy_id.is_empty() {
            return Err(PolicyError::EmptyPolicyId);
        }
        for (index, rule) in self.rules.iter().enumerate() {
            rule.check_bounds().map_err(|reason| PolicyError::InvalidRule {
                index,
                name: rule.name(),
                reason,
            })?;
        }
        Ok(())
    }

    /// Longest window any `WindowCap` looks back over. Spend entries older
    /// than this no longer affect evaluation.
    pub fn longest_window(&self) -> u64 {
        self.rules
            .iter()
            .filter_map(|r| match r {
                PolicyRule::WindowCap { window_seconds, .. } => Some(*window_seconds),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }
}

pub const DEFAULT_DENY_REASON: &str = "default-deny: the policy has no rules";

/// Evaluate `intent` against `policy`. Pure: `ctx` is only read.
pub fn evaluate(intent: &Intent, policy: &PolicySet, ctx: &EvaluationContext) -> Decision {
    let risk = risk_score(intent, policy, ctx);
    let mut decision = if policy.rules.is_empty() {
        Decision::rejected(&policy.policy_id, DEFAULT_DENY_REASON)
    } else {
        match policy.rules.iter().find_map(|r| r.check(intent, ctx).err().map(|e| (r, e))) {
            Some((rule, detail)) => Decision::rejected(&policy.policy_id, format!("{}: {detail}", rule.name())),
            None => {
                let mut d = Decision::approved(&policy.policy_id);
                let bounds = bound_constraints(intent, policy, ctx);
                d.bound_constraints = (!bounds.is_empty()).then_some(bounds);
                d
            }
        }
    };
    decision.risk_score = Some(risk);
    decision
}

fn risk_score(intent: &Intent, policy: &PolicySet, ctx: &EvaluationContext) -> RiskScore {
    let total = policy.advisory_signals.len() as u64;
    let hit = policy
        .advisory_signals
        .iter()
        .filter(|s| s.triggered(intent, ctx))
        .count() as u64;
    RiskScore::from_ratio(hit, total)
}

fn bound_constraints(intent: &Intent, policy: &PolicySet, ctx: &EvaluationContext) -> BoundConstraints {
    let mut b = BoundConstraints::default();
    for rule in &policy.rules {
        match rule {
            PolicyRule::GasCeiling { max_gas_price_wei } => {
                b.max_gas_price_wei = Some(match b.max_gas_price_wei.take() {
                    Some(cur) => cur.min_of(max_gas_price_wei).clone(),
                    None => max_gas_price_wei.clone(),
                });
            }
            PolicyRule::DeadlineMax { max_seconds_ahead } => {
                let cap = ctx.clock.saturating_add(*max_seconds_ahead);
                let tight = intent.constraints.deadline.min(cap);
                b.tight_deadline = Some(b.tight_deadline.map_or(tight, |t: UnixSeconds| t.min(tight)));
            }
            PolicyRule::DelegateScopeGuard { max_value_wei, .. } if matches!(intent.action, Action::Delegate(_)) => {
                b.max_value_wei = Some(match b.max_value_wei.take() {
                    Some(cur) => cur.min_of(max_value_wei).clone(),
                    None => max_value_wei.clone(),
                });
            }
            _ => {}
        }
    }
    b
}
