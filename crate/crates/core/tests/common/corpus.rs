//! Valid documents and one mutant per schema constraint.

use serde_json::{json, Value};

use intent_gate::intent::intent_from_value;
use intent_gate::pdr::pdr_from_value;
use intent_gate::schema::{Finding, Rule};

const A1: &str = "0x1111111111111111111111111111111111111111";
const A2: &str = "0x2222222222222222222222222222222222222222";
const USDC: &str = "0xa0b86991c6218b36c1d19d4a2e9eb0ce3606eb48";
const WETH: &str = "0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Doc {
    Tis,
    Pdr,
}

pub fn doc_of(base: &str) -> Doc {
    if base.starts_with("pdr") {
        Doc::Pdr
    } else {
        Doc::Tis
    }
}

#[derive(Debug, Clone)]
pub enum Edit {
    Set(&'static str, Value),
    Remove(&'static str),
}

#[derive(Debug, Clone)]
pub struct Mutant {
    pub base: &'static str,
    pub edits: Vec<Edit>,
    pub path: &'static str,
    pub rule: Rule,
    /// Rejected here but accepted by a plain Draft-07 validator.
    pub local_only: bool,
}

impl Mutant {
    pub fn doc(&self) -> Doc {
        doc_of(self.base)
    }

    pub fn apply(&self) -> Value {
        let mut v = base(self.base);
        for e in &self.edits {
            match e {
                Edit::Set(p, val) => set(&mut v, p, val.clone()),
                Edit::Remove(p) => remove(&mut v, p),
            }
        }
        v
    }
}

fn split(p: &str) -> (&str, &str) {
    let i = p.rfind('/').unwrap();
    (&p[..i], &p[i + 1..])
}

fn set(v: &mut Value, p: &str, val: Value) {
    let (parent, key) = split(p);
    let target = v.pointer_mut(parent).unwrap_or_else(|| panic!("no parent for {p}"));
    match target {
        Value::Object(m) => {
            m.insert(key.to_owned(), val);
        }
        Value::Array(a) => a[key.parse::<usize>().unwrap()] = val,
        _ => panic!("{p}: parent is a scalar"),
    }
}

fn remove(v: &mut Value, p: &str) {
    let (parent, key) = split(p);
    let removed = v.pointer_mut(parent).and_then(Value::as_object_mut).and_then(|m| m.remove(key));
    assert!(removed.is_some(), "nothing to remove at {p}");
}

pub fn validate(doc: Doc, v: &Value) -> Result<(), Finding> {
    match doc {
        Doc::Tis => intent_from_value(v).map(|_| ()).map_err(|e| e.finding().cloned().expect("schema finding")),
        Doc::Pdr => pdr_from_value(v).map(|_| ()).map_err(|e| e.finding().cloned().expect("schema finding")),
    }
}

fn token(addr: &str) -> Value {
    json!({"chainId": 1, "address": addr, "symbol": "TKN", "decimals": 18})
}

pub const BASES: [&str; 5] = ["tis_swap", "tis_transfer", "tis_delegate", "pdr_full", "pdr_minimal"];

pub fn base(name: &str) -> Value {
    match name {
        "tis_swap" => json!({
            "version": "1.0.0",
            "intentId": "a1b2c3d4-e5f6-4a7b-8c9d-0e1f2a3b4c5d",
            "metadata": {
                "originator": "agent-7",
                "createdAt": "2026-01-01T00:00:00Z",
                "originChainId": 1,
                "tags": ["rebalance"]
            },
            "action": {
                "type": "SWAP",
                "tokenIn": token(USDC),
                "tokenOut": token(WETH),
                "amountIn": "5000000000",
                "minAmountOut": "1500000000000000000",
                "slippageBps": 50,
                "recipient": A1
            },
            "constraints": {
                "nonce": "7",
                "deadline": 1767230000u64,
                "validFromBlock": 10,
                "validUntilBlock": 20,
                "maxGasPriceWei": "60000000000",
                "requiredSigner": A1,
                "exclusivity": A2
            },
            "preferences": {"privacyMode": "PRIVATE", "executionSpeed": "FAST", "routing": "MIN_RISK"}
        }),
        "tis_transfer" => json!({
            "version": "1.0.0",
            "intentId": "3b7e2a10-9c4d-4f1e-8a6b-5d2c1e0f9a8b",
            "action": {"type": "TRANSFER", "token": token(USDC), "to": A2, "amount": "10000000", "memo": "rent"},
            "constraints": {"deadline": 1784102400u64, "exclusivity": null}
        }),
        "tis_delegate" => json!({
            "version": "1.0.0",
            "intentId": "5d9c1e2f-3a4b-4c5d-8e6f-7a8b9c0d1e2f",
            "action": {
                "type": "DELEGATE",
                "delegatee": A2,
                "scope": {
                    "contracts": [A1],
                    "functions": ["transfer(address,uint256)"],
                    "maxValueWei": "1000",
                    "validUntil": 1767300000u64
                }
            },
            "constraints": {"deadline": 1767230000u64}
        }),
        "pdr_full" => json!({
            "version": "1.0.0",
            "pdrId": "7c9e6679-7425-40de-944b-e07fc1f90ae7",
            "issuer": "https://policy.turnkey.com",
            "subject": "0xUserAddress",
            "audience": "https://signer.fireblocks.com",
            "issuedAt": "2026-01-01T01:00:00Z",
            "expiresAt": "2026-01-01T01:10:00Z",
            "tisHash": "0x49bc0127e63aad1a724b6c4fa5353da76f6ccbcbc40555a29c3453f11c0e6ca7",
            "decision": {
                "outcome": "APPROVED",
                "policyId": "rebalance-v1",
                "reason": "within limits",
                "riskScore": 0.25,
                "boundConstraints": {"maxGasPriceWei": "60000000000", "maxValueWei": "5", "tightDeadline": 1767230000u64},
                "modifiedParameters": [
                    {"path": "/constraints/maxGasPriceWei", "operation": "REPLACE", "value": "50000000000"},
                    {"path": "/metadata", "operation": "REMOVE"}
                ]
            },
            "policyEngineSignature": {"signer": A1, "alg": "ES256K", "signature": "0xabcdef"}
        }),
        "pdr_minimal" => json!({
            "version": "1.0.0",
            "pdrId": "7c9e6679-7425-40de-944b-e07fc1f90ae7",
            "issuer": "engine",
            "audience": "gate",
            "issuedAt": "2026-01-01T01:00:00Z",
            "expiresAt": "2026-01-01T01:10:00Z",
            "tisHash": "0x49bc0127e63aad1a724b6c4fa5353da76f6ccbcbc40555a29c3453f11c0e6ca7",
            "decision": {"outcome": "REJECTED", "policyId": "p", "reason": "no"},
            "policyEngineSignature": {"signer": A1, "signature": "0x00"}
        }),
        other => panic!("unknown base {other}"),
    }
}

fn m(base: &'static str, edits: Vec<Edit>, path: &'static str, rule: Rule) -> Mutant {
    Mutant {
        base,
        edits,
        path,
        rule,
        local_only: false,
    }
}

fn local(base: &'static str, edits: Vec<Edit>, path: &'static str, rule: Rule) -> Mutant {
    Mutant {
        local_only: true,
        ..m(base, edits, path, rule)
    }
}

/// Set `p` to `v`; the finding is expected at `p`.
fn s(base: &'static str, p: &'static str, v: Value, rule: Rule) -> Mutant {
    m(base, vec![Edit::Set(p, v)], p, rule)
}

/// Remove the required member `p`.
fn r(base: &'static str, p: &'static str) -> Mutant {
    m(base, vec![Edit::Remove(p)], p, Rule::Required)
}

pub fn mutants() -> Vec<Mutant> {
    use Rule::*;
    let t = "tis_swap";
    let x = "tis_transfer";
    let d = "tis_delegate";
    let p = "pdr_full";
    vec![
        // intent root
        s(t, "/extra", json!(1), AdditionalProperties),
        r(t, "/version"),
        r(t, "/intentId"),
        r(t, "/action"),
        r(t, "/constraints"),
        s(t, "/version", json!(1), Type),
        s(t, "/version", json!("2.0.0"), Pattern),
        s(t, "/intentId", json!(5), Type),
        s(t, "/intentId", json!("not-a-uuid"), Format),
        // metadata
        s(t, "/metadata", json!("m"), Type),
        s(t, "/metadata/extra", json!(1), AdditionalProperties),
        s(t, "/metadata/originator", json!(1), Type),
        s(t, "/metadata/createdAt", json!(1), Type),
        s(t, "/metadata/createdAt", json!("yesterday"), Format),
        s(t, "/metadata/originChainId", json!("1"), Type),
        s(t, "/metadata/originChainId", json!(0), Minimum),
        s(t, "/metadata/tags", json!("a"), Type),
        s(t, "/metadata/tags/0", json!(1), Type),
        // token
        s(t, "/action/tokenIn", json!("USDC"), Type),
        s(t, "/action/tokenIn/extra", json!(1), AdditionalProperties),
        r(t, "/action/tokenIn/chainId"),
        r(t, "/action/tokenIn/address"),
        s(t, "/action/tokenIn/chainId", json!("1"), Type),
        s(t, "/action/tokenIn/chainId", json!(0), Minimum),
        s(t, "/action/tokenIn/address", json!("0x12"), Pattern),
        s(t, "/action/tokenIn/symbol", json!(1), Type),
        s(t, "/action/tokenIn/decimals", json!("18"), Type),
        s(t, "/action/tokenIn/decimals", json!(-1), Minimum),
        s(t, "/action/tokenIn/decimals", json!(256), Maximum),
        // constraints
        s(t, "/constraints", json!([]), Type),
        s(t, "/constraints/extra", json!(1), AdditionalProperties),
        r(t, "/constraints/deadline"),
        s(t, "/constraints/nonce", json!(7), Type),
        s(t, "/constraints/nonce", json!("seven"), Pattern),
        s(t, "/constraints/deadline", json!("1767230000"), Type),
        s(t, "/constraints/deadline", json!(-1), Minimum),
        s(t, "/constraints/validFromBlock", json!("10"), Type),
        s(t, "/constraints/validFromBlock", json!(-1), Minimum),
        s(t, "/constraints/validUntilBlock", json!("20"), Type),
        s(t, "/constraints/validUntilBlock", json!(-1), Minimum),
        s(t, "/constraints/maxGasPriceWei", json!(60), Type),
        s(t, "/constraints/maxGasPriceWei", json!("6e10"), Pattern),
        s(t, "/constraints/requiredSigner", json!("0xabc"), Pattern),
        s(t, "/constraints/exclusivity", json!(5), Type),
        s(t, "/constraints/exclusivity", json!("0x12"), Pattern),
        // preferences
        s(t, "/preferences", json!(true), Type),
        s(t, "/preferences/extra", json!(1), AdditionalProperties),
        s(t, "/preferences/privacyMode", json!("SECRET"), Enum),
        s(t, "/preferences/executionSpeed", json!("WARP"), Enum),
        s(t, "/preferences/routing", json!("RANDOM"), Enum),
        // action
        s(t, "/action", json!("SWAP"), Type),
        r(t, "/action/type"),
        s(t, "/action/type", json!("BURN"), Const),
        s(t, "/action/extra", json!(1), AdditionalProperties),
        r(t, "/action/tokenOut"),
        r(t, "/action/amountIn"),
        r(t, "/action/minAmountOut"),
        s(t, "/action/amountIn", json!("-5"), Pattern),
        s(t, "/action/minAmountOut", json!(1.5), Type),
        s(t, "/action/slippageBps", json!("50"), Type),
        s(t, "/action/slippageBps", json!(-1), Minimum),
        s(t, "/action/slippageBps", json!(10001), Maximum),
        s(t, "/action/recipient", json!("alice"), Pattern),
        s(x, "/action/extra", json!(1), AdditionalProperties),
        r(x, "/action/token"),
        r(x, "/action/to"),
        r(x, "/action/amount"),
        s(x, "/action/to", json!("0x"), Pattern),
        s(x, "/action/amount", json!("1.0"), Pattern),
        s(x, "/action/memo", json!(7), Type),
        s(d, "/action/extra", json!(1), AdditionalProperties),
        r(d, "/action/delegatee"),
        r(d, "/action/scope"),
        s(d, "/action/delegatee", json!("bob"), Pattern),
        s(d, "/action/scope", json!([]), Type),
        s(d, "/action/scope/extra", json!(1), AdditionalProperties),
        s(d, "/action/scope/contracts", json!(A1), Type),
        s(d, "/action/scope/contracts/0", json!("0x1"), Pattern),
        s(d, "/action/scope/functions/0", json!(1), Type),
        s(d, "/action/scope/maxValueWei", json!("1e3"), Pattern),
        s(d, "/action/scope/validUntil", json!("soon"), Type),
        s(d, "/action/scope/validUntil", json!(-5), Minimum),
        // record root
        s(p, "/extra", json!(1), AdditionalProperties),
        r(p, "/version"),
        r(p, "/pdrId"),
        r(p, "/issuer"),
        r(p, "/audience"),
        r(p, "/issuedAt"),
        r(p, "/expiresAt"),
        r(p, "/tisHash"),
        r(p, "/decision"),
        r(p, "/policyEngineSignature"),
        s(p, "/version", json!("1.0"), Pattern),
        s(p, "/pdrId", json!("7c9e6679"), Format),
        s(p, "/issuer", json!(1), Type),
        s(p, "/subject", json!(1), Type),
        s(p, "/audience", json!(["gate"]), Type),
        s(p, "/issuedAt", json!("noon"), Format),
        s(p, "/expiresAt", json!("2026-13-01T00:00:00Z"), Format),
        s(p, "/tisHash", json!("0x49bc"), Pattern),
        // decision
        s(p, "/decision", json!("APPROVED"), Type),
        s(p, "/decision/extra", json!(1), AdditionalProperties),
        r(p, "/decision/outcome"),
        r(p, "/decision/policyId"),
        s(p, "/decision/outcome", json!("MAYBE"), Enum),
        s(p, "/decision/policyId", json!(3), Type),
        s(p, "/decision/reason", json!(false), Type),
        s(p, "/decision/riskScore", json!("0.25"), Type),
        s(p, "/decision/riskScore", json!(-0.5), Minimum),
        s(p, "/decision/riskScore", json!(1.5), Maximum),
        s(p, "/decision/boundConstraints", json!(1), Type),
        s(p, "/decision/boundConstraints/extra", json!(1), AdditionalProperties),
        s(p, "/decision/boundConstraints/maxGasPriceWei", json!("60 gwei"), Pattern),
        s(p, "/decision/boundConstraints/maxValueWei", json!(5), Type),
        s(p, "/decision/boundConstraints/tightDeadline", json!("1767230000"), Type),
        s(p, "/decision/boundConstraints/tightDeadline", json!(-1), Minimum),
        s(p, "/decision/modifiedParameters", json!({}), Type),
        s(p, "/decision/modifiedParameters/0", json!("REPLACE"), Type),
        s(p, "/decision/modifiedParameters/0/extra", json!(1), AdditionalProperties),
        r(p, "/decision/modifiedParameters/0/path"),
        r(p, "/decision/modifiedParameters/0/operation"),
        s(p, "/decision/modifiedParameters/0/path", json!(1), Type),
        s(p, "/decision/modifiedParameters/0/operation", json!("MERGE"), Enum),
        // signature
        s(p, "/policyEngineSignature", json!("0xab"), Type),
        s(p, "/policyEngineSignature/extra", json!(1), AdditionalProperties),
        r(p, "/policyEngineSignature/signer"),
        r(p, "/policyEngineSignature/signature"),
        s(p, "/policyEngineSignature/signer", json!("signer"), Pattern),
        s(p, "/policyEngineSignature/alg", json!(256), Type),
        s(p, "/policyEngineSignature/signature", json!("abcdef"), Pattern),
        // local strengthenings
        local(t, vec![Edit::Set("/action/amountIn", json!("05"))], "/action/amountIn", UintCanonical),
        local(t, vec![Edit::Set("/constraints/nonce", json!("007"))], "/constraints/nonce", UintCanonical),
        local(t, vec![Edit::Set("/constraints/deadline", json!(1767230000.0))], "/constraints/deadline", Type),
        // Cross-field rules report at the enclosing object.
        local(t, vec![Edit::Set("/constraints/validFromBlock", json!(30))], "/constraints", BlockOrder),
        local(p, vec![Edit::Set("/expiresAt", json!("2026-01-01T01:00:00Z"))], "/expiresAt", TimeOrder),
        local(p, vec![Edit::Set("/issuedAt", json!("2026-01-01T01:00:00+00:00"))], "/issuedAt", Format),
        local(
            "pdr_minimal",
            vec![Edit::Remove("/decision/reason")],
            "/decision/reason",
            ReasonRequired,
        ),
        local(p, vec![Edit::Set("/decision/riskScore", json!(0.1234567))], "/decision/riskScore", Canonicalizable),
        local(
            p,
            vec![Edit::Set("/decision/modifiedParameters/0/path", json!("constraints"))],
            "/decision/modifiedParameters/0/path",
            Pattern,
        ),
        local(
            p,
            vec![Edit::Remove("/decision/modifiedParameters/0/value")],
            "/decision/modifiedParameters/0/value",
            ModificationValue,
        ),
        local(
            p,
            vec![Edit::Set("/decision/modifiedParameters/1/value", json!(1))],
            "/decision/modifiedParameters/1/value",
            ModificationValue,
        ),
        local(
            p,
            vec![Edit::Set("/decision/boundConstraints/maxValueWei", json!("05"))],
            "/decision/boundConstraints/maxValueWei",
            UintCanonical,
        ),
    ]
}

/// Draft-07 defines no `uuid` format, so the oracle gets a plain textual check.
fn uuid_text(s: &str) -> bool {
    let groups: Vec<&str> = s.split('-').collect();
    groups.iter().map(|g| g.len()).eq([8, 4, 4, 4, 12])
        && groups.iter().all(|g| g.chars().all(|c| c.is_ascii_hexdigit()))
}

pub fn oracle(doc: Doc) -> jsonschema::Validator {
    let name = match doc {
        Doc::Tis => "schemas/tis.schema.json",
        Doc::Pdr => "schemas/pdr.schema.json",
    };
    jsonschema::options()
        .with_draft(jsonschema::Draft::Draft7)
        .should_validate_formats(true)
        .with_format("uuid", uuid_text)
        .build(&super::json(name))
        .unwrap()
}
