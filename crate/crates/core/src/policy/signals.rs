use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::EvaluationContext;
use crate::intent::{ActionType, Intent, PrivacyMode, TokenRef};
use crate::types::{SemanticAddress, UintDecimal};

/// A named predicate that raises the risk score when it holds. Signals never
/// change the outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "signal", rename_all = "SCREAMING_SNAKE_CASE", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum AdvisorySignal {
    /// Outflow of `token` strictly above `amount`.
    AmountAbove { token: TokenRef, amount: UintDecimal },
    ActionIs {
        #[serde(rename = "type")]
        action: ActionType,
    },
    /// Privacy mode is not explicitly PRIVATE.
    PublicMempool,
    MissingNonce,
    /// Deadline more than `seconds` after the evaluation clock.
    DeadlineBeyond { seconds: u64 },
    /// Counterparty named and outside `addresses`.
    RecipientNotIn { addresses: BTreeSet<SemanticAddress> },
}

impl AdvisorySignal {
    pub fn triggered(&self, intent: &Intent, ctx: &EvaluationContext) -> bool {
        match self {
            AdvisorySignal::AmountAbove { token, amount } => intent
                .action
                .outflow()
                .is_some_and(|(t, a)| t.key() == *token && a.value() > amount.value()),
            AdvisorySignal::ActionIs { action } => intent.action.action_type() == *action,
            AdvisorySignal::PublicMempool => {
                intent.preferences.as_ref().and_then(|p| p.privacy_mode) != Some(PrivacyMode::Private)
            }
            AdvisorySignal::MissingNonce => intent.constraints.nonce.is_none(),
            AdvisorySignal::DeadlineBeyond { seconds } => {
                intent.constraints.deadline > ctx.clock.saturating_add(*seconds)
            }
            AdvisorySignal::RecipientNotIn { addresses } => intent
                .action
                .counterparty()
                .is_some_and(|a| !addresses.contains(&a)),
        }
    }
}
