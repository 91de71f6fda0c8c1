//! Transaction intents: one declarative action plus the constraints and
//! preferences that bound its execution.
//!
//! [`parse_intent`] accepts exactly the documents the intent JSON schema
//! accepts (with integers required to be JSON integers and unsigned decimal
//! strings required to be canonical), normalizing addresses and ids to
//! lowercase. [`validate_intent`] re-checks the value-level invariants on an
//! `Intent` built in code.

mod legacy;
mod preview;

pub use legacy::{normalize_legacy_intent, LegacyError, LegacyOptions};
pub use preview::render_preview;

use serde::Serialize;
use serde_json::Value;

use crate::canonical::{self, CanonicalBytes};
use crate::crypto::{keccak256, Digest32};
use crate::json;
use crate::schema::{self, Finding, Obj, Read, Rule, ValidationReport};
use crate::types::{SemanticAddress, UintDecimal, UnixSeconds};

pub const INTENT_VERSION: &str = "1.0.0";
pub const MAX_SLIPPAGE_BPS: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Intent {
    pub version: String,
    pub intent_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
    pub action: Action,
    pub constraints: Constraints,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preferences: Option<Preferences>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Token {
    pub chain_id: u64,
    pub address: SemanticAddress,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decimals: Option<u8>,
}

impl Token {
    pub fn new(chain_id: u64, address: SemanticAddress) -> Self {
        Token {
            chain_id,
            address,
            symbol: None,
            decimals: None,
        }
    }

    pub fn key(&self) -> TokenRef {
        TokenRef {
            chain_id: self.chain_id,
            address: self.address,
        }
    }
}

/// A token's identity without its display attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TokenRef {
    pub chain_id: u64,
    pub address: SemanticAddress,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Metadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub originator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin_chain_id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
}

/// `exclusivity` may be an address or an explicit `null`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusivity {
    Open,
    Exclusive(SemanticAddress),
}

impl Serialize for Exclusivity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Exclusivity::Open => s.serialize_none(),
            Exclusivity::Exclusive(a) => a.serialize(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Constraints {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonce: Option<UintDecimal>,
    pub deadline: UnixSeconds,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_from_block: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_until_block: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_gas_price_wei: Option<UintDecimal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required_signer: Option<SemanticAddress>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclusivity: Option<Exclusivity>,
}

impl Constraints {
    pub fn with_deadline(deadline: UnixSeconds) -> Self {
        Constraints {
            nonce: None,
            deadline,
            valid_from_block: None,
            valid_until_block: None,
            max_gas_price_wei: None,
            required_signer: None,
            exclusivity: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PrivacyMode {
    Public,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExecutionSpeed {
    Fast,
    Normal,
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Routing {
    BestPrice,
    MinGas,
    MinRisk,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Preferences {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub privacy_mode: Option<PrivacyMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub execution_speed: Option<ExecutionSpeed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub routing: Option<Routing>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionType {
    Swap,
    Transfer,
    Delegate,
}

impl ActionType {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionType::Swap => "SWAP",
            ActionType::Transfer => "TRANSFER",
            ActionType::Delegate => "DELEGATE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Swap(Swap),
    Transfer(Transfer),
    Delegate(Delegate),
}

impl Action {
    pub fn action_type(&self) -> ActionType {
        match self {
            Action::Swap(_) => ActionType::Swap,
            Action::Transfer(_) => ActionType::Transfer,
            Action::Delegate(_) => ActionType::Delegate,
        }
    }

    /// The account that ends up receiving value or authority, when named.
    pub fn counterparty(&self) -> Option<SemanticAddress> {
        match self {
            Action::Swap(s) => s.recipient,
            Action::Transfer(t) => Some(t.to),
            Action::Delegate(d) => Some(d.delegatee),
        }
    }

    /// The token and amount the acting account gives up.
    pub fn outflow(&self) -> Option<(&Token, &UintDecimal)> {
        match self {
            Action::Swap(s) => Some((&s.token_in, &s.amount_in)),
            Action::Transfer(t) => Some((&t.token, &t.amount)),
            Action::Delegate(_) => None,
        }
    }

    pub fn tokens(&self) -> Vec<&Token> {
        match self {
            Action::Swap(s) => vec![&s.token_in, &s.token_out],
            Action::Transfer(t) => vec![&t.token],
            Action::Delegate(_) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Swap {
    pub token_in: Token,
    pub token_out: Token,
    pub amount_in: UintDecimal,
    pub min_amount_out: UintDecimal,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slippage_bps: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recipient: Option<SemanticAddress>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Transfer {
    pub token: Token,
    pub to: SemanticAddress,
    pub amount: UintDecimal,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memo: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Delegate {
    pub delegatee: SemanticAddress,
    pub scope: DelegateScope,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DelegateScope {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contracts: Option<Vec<SemanticAddress>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_value_wei: Option<UintDecimal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_until: Option<UnixSeconds>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IntentError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation at {}", .0)]
    SchemaViolation(Finding),
}

impl IntentError {
    pub fn finding(&self) -> Option<&Finding> {
        match self {
            IntentError::SchemaViolation(f) => Some(f),
            IntentError::MalformedJson(_) => None,
        }
    }
}

impl Intent {
    /// The JSON document form, as hashed and signed.
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("intent serialization is infallible")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("intent serialization is infallible")
    }

    pub fn canonical_bytes(&self) -> CanonicalBytes {
        // Intents carry no fractional numbers, so this cannot fail.
        canonical::canonicalize(&self.to_value()).expect("intents hold only integers and strings")
    }
}

/// keccak-256 over the canonical serialization of `intent`.
pub fn intent_hash(intent: &Intent) -> Digest32 {
    keccak256(intent.canonical_bytes().as_bytes())
}

/// Parse and fully validate a UTF-8 JSON intent document.
pub fn parse_intent(bytes: &[u8]) -> Result<Intent, IntentError> {
    let value = json::parse_strict(bytes).map_err(|e| IntentError::MalformedJson(e.to_string()))?;
    intent_from_value(&value)
}

/// Validate an already-parsed JSON value as an intent document.
pub fn intent_from_value(value: &Value) -> Result<Intent, IntentError> {
    let intent = read_intent(value).map_err(IntentError::SchemaViolation)?;
    let report = validate_intent(&intent);
    match report.findings.into_iter().next() {
        Some(f) => Err(IntentError::SchemaViolation(f)),
        None => Ok(intent),
    }
}

/// Re-check every value-level invariant of an intent.
pub fn validate_intent(intent: &Intent) -> ValidationReport {
    let mut r = ValidationReport::default();
    if intent.version != INTENT_VERSION {
        r.push(Finding::new("/version", Rule::Pattern, "version must be exactly 1.0.0"));
    }
    if !schema::is_uuid_text(&intent.intent_id) {
        r.push(Finding::new("/intentId", Rule::Format, "intentId must be a UUID"));
    }
    if let Some(m) = &intent.metadata {
        if let Some(c) = &m.created_at {
            if !schema::is_rfc3339(c) {
                r.push(Finding::new("/metadata/createdAt", Rule::Format, "createdAt must be an RFC 3339 date-time"));
            }
        }
        if m.origin_chain_id == Some(0) {
            r.push(Finding::new("/metadata/originChainId", Rule::Minimum, "must be >= 1"));
        }
    }
    validate_action(&intent.action, &mut r);
    let c = &intent.constraints;
    if let Some(n) = &c.nonce {
        schema::check_uint(&mut r, "/constraints/nonce", n);
    }
    if let Some(g) = &c.max_gas_price_wei {
        schema::check_uint(&mut r, "/constraints/maxGasPriceWei", g);
    }
    if let (Some(from), Some(until)) = (c.valid_from_block, c.valid_until_block) {
        if from > until {
            r.push(Finding::new(
                "/constraints",
                Rule::BlockOrder,
                format!("validFromBlock {from} is after validUntilBlock {until}"),
            ));
        }
    }
    r
}

fn validate_token(t: &Token, path: &str, r: &mut ValidationReport) {
    if t.chain_id == 0 {
        r.push(Finding::new(json::child(path, "chainId"), Rule::Minimum, "must be >= 1"));
    }
}

fn validate_action(a: &Action, r: &mut ValidationReport) {
    match a {
        Action::Swap(s) => {
            validate_token(&s.token_in, "/action/tokenIn", r);
            validate_token(&s.token_out, "/action/tokenOut", r);
            schema::check_uint(r, "/action/amountIn", &s.amount_in);
            schema::check_uint(r, "/action/minAmountOut", &s.min_amount_out);
            if s.slippage_bps.is_some_and(|b| b > MAX_SLIPPAGE_BPS) {
                r.push(Finding::new("/action/slippageBps", Rule::Maximum, "must be <= 10000"));
            }
        }
        Action::Transfer(t) => {
            validate_token(&t.token, "/action/token", r);
            schema::check_uint(r, "/action/amount", &t.amount);
        }
        Action::Delegate(d) => {
            if let Some(v) = &d.scope.max_value_wei {
                schema::check_uint(r, "/action/scope/maxValueWei", v);
            }
        }
    }
}

fn read_intent(v: &Value) -> Read<Intent> {
    let o = Obj::new(
        v,
        "",
        &["version", "intentId", "metadata", "action", "constraints", "preferences"],
    )?;
    let version = o.req_with("version", schema::owned_string)?;
    let intent_id = o.req_with("intentId", schema::owned_string)?;
    let metadata = o.opt_with("metadata", read_metadata)?;
    let action = o.req_with("action", read_action)?;
    let constraints = o.req_with("constraints", read_constraints)?;
    let preferences = o.opt_with("preferences", read_preferences)?;
    // Ids are case-insensitive hex; keep one canonical spelling for hashing.
    let intent_id = if schema::is_uuid_text(&intent_id) {
        intent_id.to_ascii_lowercase()
    } else {
        intent_id
    };
    Ok(Intent {
        version,
        intent_id,
        metadata,
        action,
        constraints,
        preferences,
    })
}

fn read_metadata(v: &Value, path: &str) -> Read<Metadata> {
    let o = Obj::new(v, path, &["originator", "createdAt", "originChainId", "tags"])?;
    Ok(Metadata {
        originator: o.opt_with("originator", schema::owned_string)?,
        created_at: o.opt_with("createdAt", schema::owned_string)?,
        origin_chain_id: o.opt_with("originChainId", schema::non_negative_int)?,
        tags: o.opt_with("tags", schema::string_array)?,
    })
}

pub(crate) fn read_token(v: &Value, path: &str) -> Read<Token> {
    let o = Obj::new(v, path, &["chainId", "address", "symbol", "decimals"])?;
    Ok(Token {
        chain_id: o.req_with("chainId", schema::non_negative_int)?,
        address: o.req_with("address", schema::address)?,
        symbol: o.opt_with("symbol", schema::owned_string)?,
        decimals: o
            .opt_with("decimals", |v, p| schema::int_in(v, p, 0, 255))?
            .map(|d| d as u8),
    })
}

fn read_constraints(v: &Value, path: &str) -> Read<Constraints> {
    let o = Obj::new(
        v,
        path,
        &[
            "nonce",
            "deadline",
            "validFromBlock",
            "validUntilBlock",
            "maxGasPriceWei",
            "requiredSigner",
            "exclusivity",
        ],
    )?;
    Ok(Constraints {
        nonce: o.opt_with("nonce", schema::uint_string)?,
        deadline: o.req_with("deadline", schema::non_negative_int)?,
        valid_from_block: o.opt_with("validFromBlock", schema::non_negative_int)?,
        valid_until_block: o.opt_with("validUntilBlock", schema::non_negative_int)?,
        max_gas_price_wei: o.opt_with("maxGasPriceWei", schema::uint_string)?,
        required_signer: o.opt_with("requiredSigner", schema::address)?,
        exclusivity: o.opt_with("exclusivity", |v, p| match v {
            Value::Null => Ok(Exclusivity::Open),
            Value::String(_) => schema::address(v, p).map(Exclusivity::Exclusive),
            _ => Err(Finding::new(p, Rule::Type, "expected an address string or null")),
        })?,
    })
}

fn read_preferences(v: &Value, path: &str) -> Read<Preferences> {
    let o = Obj::new(v, path, &["privacyMode", "executionSpeed", "routing"])?;
    Ok(Preferences {
        privacy_mode: o.opt_with("privacyMode", |v, p| {
            schema::enum_of(v, p, &[("PUBLIC", PrivacyMode::Public), ("PRIVATE", PrivacyMode::Private)])
        })?,
        execution_speed: o.opt_with("executionSpeed", |v, p| {
            schema::enum_of(
                v,
                p,
                &[
                    ("FAST", ExecutionSpeed::Fast),
                    ("NORMAL", ExecutionSpeed::Normal),
                    ("SLOW", ExecutionSpeed::Slow),
                ],
            )
        })?,
        routing: o.opt_with("routing", |v, p| {
            schema::enum_of(
                v,
                p,
                &[
                    ("BEST_PRICE", Routing::BestPrice),
                    ("MIN_GAS", Routing::MinGas),
                    ("MIN_RISK", Routing::MinRisk),
                ],
            )
        })?,
    })
}

fn read_action(v: &Value, path: &str) -> Read<Action> {
    let Value::Object(map) = v else {
        return Err(Finding::new(path, Rule::Type, "expected an object"));
    };
    let type_path = json::child(path, "type");
    let Some(tag) = map.get("type") else {
        return Err(Finding::new(type_path, Rule::Required, "required property `type` is missing"));
    };
    let kind = schema::enum_of(
        tag,
        &type_path,
        &[
            ("SWAP", ActionType::Swap),
            ("TRANSFER", ActionType::Transfer),
            ("DELEGATE", ActionType::Delegate),
        ],
    )
    .map_err(|f| Finding { rule: Rule::Const, ..f })?;
    match kind {
        ActionType::Swap => {
            let o = Obj::new(
                v,
                path,
                &["type", "tokenIn", "tokenOut", "amountIn", "minAmountOut", "slippageBps", "recipient"],
            )?;
            Ok(Action::Swap(Swap {
                token_in: o.req_with("tokenIn", read_token)?,
                token_out: o.req_with("tokenOut", read_token)?,
                amount_in: o.req_with("amountIn", schema::uint_string)?,
                min_amount_out: o.req_with("minAmountOut", schema::uint_string)?,
                slippage_bps: o
                    .opt_with("slippageBps", |v, p| schema::int_in(v, p, 0, MAX_SLIPPAGE_BPS as u64))?
                    .map(|b| b as u32),
                recipient: o.opt_with("recipient", schema::address)?,
            }))
        }
        ActionType::Transfer => {
            let o = Obj::new(v, path, &["type", "token", "to", "amount", "memo"])?;
            Ok(Action::Transfer(Transfer {
                token: o.req_with("token", read_token)?,
                to: o.req_with("to", schema::address)?,
                amount: o.req_with("amount", schema::uint_string)?,
                memo: o.opt_with("memo", schema::owned_string)?,
            }))
        }
        ActionType::Delegate => {
            let o = Obj::new(v, path, &["type", "delegatee", "scope"])?;
            Ok(Action::Delegate(Delegate {
                delegatee: o.req_with("delegatee", schema::address)?,
                scope: o.req_with("scope", read_scope)?,
            }))
        }
    }
}

fn read_scope(v: &Value, path: &str) -> Read<DelegateScope> {
    let o = Obj::new(v, path, &["contracts", "functions", "maxValueWei", "validUntil"])?;
    Ok(DelegateScope {
        contracts: o.opt_with("contracts", |v, p| {
            let Value::Array(items) = v else {
                return Err(Finding::new(p, Rule::Type, "expected an array"));
            };
            items
                .iter()
                .enumerate()
                .map(|(i, a)| schema::address(a, &json::index(p, i)))
                .collect()
        })?,
        functions: o.opt_with("functions", schema::string_array)?,
        max_value_wei: o.opt_with("maxValueWei", schema::uint_string)?,
        valid_until: o.opt_with("validUntil", schema::non_negative_int)?,
    })
}
