//! Import of the loose `inputs`/`outputs` intent shape into a typed [`Intent`].
//!
//! The loose shape names an action verb and lists assets given and expected,
//! each with an `EXACT`, `MAXIMUM`, or `MINIMUM` qualifier. Only shapes that
//! map one-to-one onto a typed action are translated:
//!
//! * `SWAP` with one `EXACT` input and one `MINIMUM` output
//! * `TRANSFER` with one `EXACT` input, no outputs, and a top-level `recipient`
//!
//! Everything else, multi-step verbs included, is reported as unsupported.
//! The free-text `preview` is dropped; previews are regenerated from fields.

use serde_json::Value;

use super::{
    validate_intent, Action, Constraints, Exclusivity, Intent, Metadata, Swap, Token, Transfer,
    INTENT_VERSION,
};
use crate::schema::{self, Finding};
use crate::types::{SemanticAddress, UintDecimal};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegacyOptions {
    /// Chain assumed when the payload carries no `constraints.chainId`.
    pub default_chain_id: u64,
}

impl Default for LegacyOptions {
    fn default() -> Self {
        LegacyOptions { default_chain_id: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LegacyError {
    #[error("unsupported legacy intent shape: {0}")]
    UnsupportedLegacyShape(String),
    #[error("legacy intent translates to an invalid intent: {0}")]
    Invalid(Finding),
}

fn unsupported(msg: impl Into<String>) -> LegacyError {
    LegacyError::UnsupportedLegacyShape(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Qualifier {
    Exact,
    Maximum,
    Minimum,
}

struct Leg {
    token: SemanticAddress,
    amount: UintDecimal,
    qualifier: Qualifier,
    symbol: Option<String>,
    decimals: Option<u8>,
}

pub fn normalize_legacy_intent(raw: &Value, opts: &LegacyOptions) -> Result<Intent, LegacyError> {
    let Value::Object(map) = raw else {
        return Err(unsupported("payload is not an object"));
    };
    const KNOWN: &[&str] = &[
        "version",
        "intentId",
        "action",
        "inputs",
        "outputs",
        "constraints",
        "metadata",
        "preview",
        "recipient",
    ];
    if let Some(k) = map.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(unsupported(format!("unknown member `{k}`")));
    }
    let verb = map
        .get("action")
        .and_then(Value::as_str)
        .ok_or_else(|| unsupported("`action` must be a verb string"))?;
    if verb != "SWAP" && verb != "TRANSFER" {
        return Err(unsupported(format!("action `{verb}` has no typed equivalent")));
    }

    let invalid = LegacyError::Invalid;
    let version = match map.get("version") {
        None => INTENT_VERSION.to_owned(),
        Some(v) => schema::owned_string(v, "/version").map_err(invalid)?,
    };
    let intent_id = schema::owned_string(
        map.get("intentId").ok_or_else(|| unsupported("`intentId` is missing"))?,
        "/intentId",
    )
    .map_err(invalid)?;
    let intent_id = if schema::is_uuid_text(&intent_id) {
        intent_id.to_ascii_lowercase()
    } else {
        intent_id
    };

    let (constraints, chain_id) = read_constraints(map.get("constraints"), opts)?;
    let inputs = read_legs(map.get("inputs"), "/inputs")?;
    let outputs = read_legs(map.get("outputs"), "/outputs")?;
    let recipient = map
        .get("recipient")
        .map(|v| schema::address(v, "/recipient"))
        .transpose()
        .map_err(invalid)?;
    let metadata = read_metadata(map.get("metadata"))?;

    let token = |leg: &Leg| Token {
        chain_id,
        address: leg.token,
        symbol: leg.symbol.clone(),
        decimals: leg.decimals,
    };

    let action = match verb {
        "SWAP" => {
            let [input] = inputs.as_slice() else {
                return Err(unsupported("SWAP needs exactly one input"));
            };
            let [output] = outputs.as_slice() else {
                return Err(unsupported("SWAP needs exactly one output"));
            };
            if input.qualifier != Qualifier::Exact || output.qualifier != Qualifier::Minimum {
                return Err(unsupported("SWAP must be EXACT input for MINIMUM output"));
            }
            Action::Swap(Swap {
                token_in: token(input),
                token_out: token(output),
                amount_in: input.amount.clone(),
                min_amount_out: output.amount.clone(),
                slippage_bps: None,
                recipient,
            })
        }
        _ => {
            let [input] = inputs.as_slice() else {
                return Err(unsupported("TRANSFER needs exactly one input"));
            };
            if !outputs.is_empty() || input.qualifier != Qualifier::Exact {
                return Err(unsupported("TRANSFER must be one EXACT input and no outputs"));
            }
            let to = recipient.ok_or_else(|| unsupported("TRANSFER needs a `recipient`"))?;
            Action::Transfer(Transfer {
                token: token(input),
                to,
                amount: input.amount.clone(),
                memo: None,
            })
        }
    };

    let intent = Intent {
        version,
        intent_id,
        metadata,
        action,
        constraints,
        preferences: None,
    };
    match validate_intent(&intent).findings.into_iter().next() {
        Some(f) => Err(LegacyError::Invalid(f)),
        None => Ok(intent),
    }
}

fn read_constraints(v: Option<&Value>, opts: &LegacyOptions) -> Result<(Constraints, u64), LegacyError> {
    let Some(Value::Object(c)) = v else {
        return Err(unsupported("`constraints` object is missing"));
    };
    const KNOWN: &[&str] = &["deadline", "nonce", "chainId", "exclusivity", "maxGasPriceWei"];
    if let Some(k) = c.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(unsupported(format!("unknown constraint `{k}`")));
    }
    let invalid = LegacyError::Invalid;
    let deadline = c
        .get("deadline")
        .ok_or_else(|| unsupported("`constraints.deadline` is missing"))
        .and_then(|d| schema::non_negative_int(d, "/constraints/deadline").map_err(invalid))?;
    let chain_id = match c.get("chainId") {
        Some(v) => schema::int_at_least(v, "/constraints/chainId", 1).map_err(invalid)?,
        None => opts.default_chain_id,
    };
    let mut out = Constraints::with_deadline(deadline);
    out.nonce = c
        .get("nonce")
        .map(|v| schema::uint_string(v, "/constraints/nonce"))
        .transpose()
        .map_err(invalid)?;
    out.max_gas_price_wei = c
        .get("maxGasPriceWei")
        .map(|v| schema::uint_string(v, "/constraints/maxGasPriceWei"))
        .transpose()
        .map_err(invalid)?;
    out.exclusivity = match c.get("exclusivity") {
        None => None,
        Some(Value::Null) => Some(Exclusivity::Open),
        Some(v) => Some(Exclusivity::Exclusive(
            schema::address(v, "/constraints/exclusivity").map_err(invalid)?,
        )),
    };
    Ok((out, chain_id))
}

fn read_legs(v: Option<&Value>, path: &str) -> Result<Vec<Leg>, LegacyError> {
    let items = match v {
        None => return Ok(Vec::new()),
        Some(Value::Array(items)) => items,
        Some(_) => return Err(unsupported(format!("`{path}` must be an array"))),
    };
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let p = format!("{path}/{i}");
            let Value::Object(m) = item else {
                return Err(unsupported(format!("{p} must be an object")));
            };
            const KNOWN: &[&str] = &["token", "amount", "constraint", "symbol", "decimals"];
            if let Some(k) = m.keys().find(|k| !KNOWN.contains(&k.as_str())) {
                return Err(unsupported(format!("unknown member `{k}` at {p}")));
            }
            let field = |k: &str| m.get(k).ok_or_else(|| unsupported(format!("{p}/{k} is missing")));
            let qualifier = match field("constraint")?.as_str() {
                Some("EXACT") => Qualifier::Exact,
                Some("MAXIMUM") => Qualifier::Maximum,
                Some("MINIMUM") => Qualifier::Minimum,
                _ => return Err(unsupported(format!("{p}/constraint must be EXACT, MAXIMUM or MINIMUM"))),
            };
            let invalid = LegacyError::Invalid;
            Ok(Leg {
                token: schema::address(field("token")?, &format!("{p}/token")).map_err(invalid)?,
                amount: schema::uint_string(field("amount")?, &format!("{p}/amount")).map_err(invalid)?,
                qualifier,
                symbol: m
                    .get("symbol")
                    .map(|s| schema::owned_string(s, &format!("{p}/symbol")))
                    .transpose()
                    .map_err(invalid)?,
                decimals: m
                    .get("decimals")
                    .map(|d| schema::int_in(d, &format!("{p}/decimals"), 0, 255).map(|d| d as u8))
                    .transpose()
                    .map_err(invalid)?,
            })
        })
        .collect()
}

fn read_metadata(v: Option<&Value>) -> Result<Option<Metadata>, LegacyError> {
    let Some(v) = v else {
        return Ok(None);
    };
    let Value::Object(m) = v else {
        return Err(unsupported("`metadata` must be an object"));
    };
    const KNOWN: &[&str] = &["originator", "createdAt", "originChainId", "tags"];
    if let Some(k) = m.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(unsupported(format!("metadata member `{k}` has no typed equivalent")));
    }
    let invalid = LegacyError::Invalid;
    Ok(Some(Metadata {
        originator: m
            .get("originator")
            .map(|v| schema::owned_string(v, "/metadata/originator"))
            .transpose()
            .map_err(invalid)?,
        created_at: m
            .get("createdAt")
            .map(|v| schema::owned_string(v, "/metadata/createdAt"))
            .transpose()
            .map_err(invalid)?,
        origin_chain_id: m
            .get("originChainId")
            .map(|v| schema::non_negative_int(v, "/metadata/originChainId"))
            .transpose()
            .map_err(invalid)?,
        tags: m
            .get("tags")
            .map(|v| schema::string_array(v, "/metadata/tags"))
            .transpose()
            .map_err(invalid)?,
    }))
}
