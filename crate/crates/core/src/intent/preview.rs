use std::fmt::Write as _;

use super::{Action, Exclusivity, Intent, Token};
use crate::types::UnixSeconds;

/// One-paragraph description of what the intent does, built only from its
/// structured fields. Equal intents give byte-identical text.
pub fn render_preview(intent: &Intent) -> String {
    let mut out = String::new();
    match &intent.action {
        Action::Swap(s) => {
            let _ = write!(
                out,
                "SWAP exactly {} of {} for at least {} of {}",
                s.amount_in,
                token_label(&s.token_in),
                s.min_amount_out,
                token_label(&s.token_out)
            );
            if let Some(bps) = s.slippage_bps {
                let _ = write!(out, ", slippage tolerance {bps} bps");
            }
            match s.recipient {
                Some(r) => {
                    let _ = write!(out, ", proceeds to {r}");
                }
                None => out.push_str(", proceeds to the executing account"),
            }
        }
        Action::Transfer(t) => {
            let _ = write!(out, "TRANSFER amount {} of {} to {}", t.amount, token_label(&t.token), t.to);
            if let Some(memo) = &t.memo {
                let _ = write!(out, " (memo {memo:?})");
            }
        }
        Action::Delegate(d) => {
            let _ = write!(out, "DELEGATE to {}", d.delegatee);
            let scope = &d.scope;
            let contracts = scope.contracts.as_deref().unwrap_or_default();
            let _ = write!(out, " over {} contract(s)", contracts.len());
            for c in contracts {
                let _ = write!(out, " {c}");
            }
            if let Some(fns) = &scope.functions {
                let _ = write!(out, ", functions [{}]", fns.join(", "));
            }
            if let Some(v) = &scope.max_value_wei {
                let _ = write!(out, ", value cap {v} wei");
            }
            if let Some(u) = scope.valid_until {
                let _ = write!(out, ", authority until {}", utc(u));
            }
        }
    }
    let c = &intent.constraints;
    let _ = write!(out, ". Valid until {}", utc(c.deadline));
    if let Some(n) = &c.nonce {
        let _ = write!(out, ", nonce {n}");
    }
    if let Some(g) = &c.max_gas_price_wei {
        let _ = write!(out, ", gas price at most {g} wei");
    }
    if let Some(s) = c.required_signer {
        let _ = write!(out, ", signer {s}");
    }
    match c.exclusivity {
        Some(Exclusivity::Exclusive(a)) => {
            let _ = write!(out, ", exclusive to {a}");
        }
        Some(Exclusivity::Open) | None => {}
    }
    let _ = write!(out, ". Intent {}.", intent.intent_id);
    out
}

fn token_label(t: &Token) -> String {
    match &t.symbol {
        Some(sym) => format!("{sym} ({} on chain {})", t.address, t.chain_id),
        None => format!("token {} on chain {}", t.address, t.chain_id),
    }
}

fn utc(ts: UnixSeconds) -> String {
    i64::try_from(ts)
        .ok()
        .and_then(|s| chrono::DateTime::from_timestamp(s, 0))
        .map(|d| d.format("%Y-%m-%d %H:%M:%S UTC").to_string())
        .unwrap_or_else(|| format!("unix time {ts}"))
}
