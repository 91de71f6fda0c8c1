use std::collections::BTreeMap;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::gate::ExecutionEnvelope;
use crate::intent::{Action, TokenRef};
use crate::types::{SemanticAddress, UintDecimal, UnixSeconds};

/// Initial holding written into a fresh ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Holding {
    pub account: SemanticAddress,
    pub token: TokenRef,
    pub amount: UintDecimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BalanceChange {
    pub account: SemanticAddress,
    pub token: TokenRef,
    pub pre: UintDecimal,
    pub post: UintDecimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Receipt {
    pub index: usize,
    pub pdr_id: String,
    pub intent_id: String,
    pub block_time: UnixSeconds,
    pub changes: Vec<BalanceChange>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("deadline {deadline} is before block time {block_time}")]
    DeadlineExceeded { deadline: UnixSeconds, block_time: UnixSeconds },
    #[error("{account} holds {have} of {token:?}, needs {need}")]
    InsufficientBalance {
        account: SemanticAddress,
        token: TokenRef,
        have: UintDecimal,
        need: UintDecimal,
    },
    #[error("block time cannot move back from {current} to {requested}")]
    TimeRegression { current: UnixSeconds, requested: UnixSeconds },
}

/// Token balances per account. Tokens exist only if minted at setup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockLedger {
    balances: BTreeMap<(SemanticAddress, TokenRef), BigUint>,
    block_time: UnixSeconds,
    receipts: Vec<Receipt>,
}

impl MockLedger {
    pub fn new(block_time: UnixSeconds, holdings: &[Holding]) -> Self {
        let mut l = MockLedger {
            block_time,
            ..Default::default()
        };
        for h in holdings {
            *l.balances.entry((h.account, h.token)).or_default() += h.amount.value();
        }
        l
    }

    pub fn block_time(&self) -> UnixSeconds {
        self.block_time
    }

    pub fn set_block_time(&mut self, t: UnixSeconds) -> Result<(), LedgerError> {
        if t < self.block_time {
            return Err(LedgerError::TimeRegression {
                current: self.block_time,
                requested: t,
            });
        }
        self.block_time = t;
        Ok(())
    }

    pub fn balance(&self, account: &SemanticAddress, token: &TokenRef) -> UintDecimal {
        self.balances
            .get(&(*account, *token))
            .map(UintDecimal::from)
            .unwrap_or_else(UintDecimal::zero)
    }

    pub fn knows_token(&self, token: &TokenRef) -> bool {
        self.balances.keys().any(|(_, t)| t == token)
    }

    pub fn total_supply(&self, token: &TokenRef) -> BigUint {
        self.balances
            .iter()
            .filter(|((_, t), _)| t == token)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn tokens(&self) -> Vec<TokenRef> {
        let set: std::collections::BTreeSet<TokenRef> = self.balances.keys().map(|(_, t)| *t).collect();
        set.into_iter().collect()
    }

    pub fn receipts(&self) -> &[Receipt] {
        &self.receipts
    }

    /// Apply an authorized envelope on behalf of `payer`. All or nothing.
    /// Swaps fill at exactly `minAmountOut` against `venue`.
    pub fn execute(
        &mut self,
        env: &ExecutionEnvelope,
        payer: SemanticAddress,
        venue: SemanticAddress,
    ) -> Result<&Receipt, LedgerError> {
        if env.effective_deadline < self.block_time {
            return Err(LedgerError::DeadlineExceeded {
                deadline: env.effective_deadline,
                block_time: self.block_time,
            });
        }
        let legs: Vec<(SemanticAddress, SemanticAddress, TokenRef, BigUint)> = match &env.intent.action {
            Action::Transfer(t) => vec![(payer, t.to, t.token.key(), t.amount.value())],
            Action::Swap(s) => vec![
                (payer, venue, s.token_in.key(), s.amount_in.value()),
                (venue, s.recipient.unwrap_or(payer), s.token_out.key(), s.min_amount_out.value()),
            ],
            Action::Delegate(_) => Vec::new(),
        };
        let mut next = self.balances.clone();
        let mut touched: Vec<(SemanticAddress, TokenRef)> = Vec::new();
        for (from, to, token, amount) in &legs {
            let from_key = (*from, *token);
            let have = next.get(&from_key).cloned().unwrap_or_default();
            if &have < amount {
                return Err(LedgerError::InsufficientBalance {
                    account: *from,
                    token: *token,
                    have: UintDecimal::from(&have),
                    need: UintDecimal::from(amount),
                });
            }
            next.insert(from_key, have - amount);
            *next.entry((*to, *token)).or_default() += amount;
            for k in [from_key, (*to, *token)] {
                if !touched.contains(&k) {
                    touched.push(k);
                }
            }
        }
        let changes = touched
            .into_iter()
            .map(|(account, token)| {
                let get = |m: &BTreeMap<_, BigUint>| {
                    m.get(&(account, token))
                        .map(UintDecimal::from)
                        .unwrap_or_else(UintDecimal::zero)
                };
                BalanceChange {
                    pre: get(&self.balances),
                    post: get(&next),
                    account,
                    token,
                }
            })
            .collect();
        self.balances = next;
        self.receipts.push(Receipt {
            index: self.receipts.len(),
            pdr_id: env.pdr_id.clone(),
            intent_id: env.intent.intent_id.clone(),
            block_time: self.block_time,
            changes,
        });
        Ok(self.receipts.last().expect("just pushed"))
    }
}

/// Free-function form of [`MockLedger::execute`].
pub fn execute_envelope<'a>(
    ledger: &'a mut MockLedger,
    env: &ExecutionEnvelope,
    payer: SemanticAddress,
    venue: SemanticAddress,
) -> Result<&'a Receipt, LedgerError> {
    ledger.execute(env, payer, venue)
}
