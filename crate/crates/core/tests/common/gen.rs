//! Random intents, random serializations of a document, and single-leaf
//! mutations.

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Map, Value};

use intent_gate::types::{format_timestamp, parse_timestamp};

pub fn address(rng: &mut impl Rng) -> String {
    format!("0x{}", hex::encode(rng.gen::<[u8; 20]>()))
}

fn uint(rng: &mut impl Rng) -> String {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(0u64..10).to_string(),
        1 => rng.gen::<u64>().to_string(),
        2 => format!("{}{:018}", rng.gen_range(1u64..1_000_000), rng.gen_range(0u64..1_000_000_000_000_000_000)),
        _ => rng.gen_range(1u64..1_000_000_000).to_string(),
    }
}

fn text(rng: &mut impl Rng) -> String {
    const PIECES: [&str; 10] = ["a", "Z", " ", "\"", "\\", "\n", "\u{1}", "é", "€", "𝄞"];
    (0..rng.gen_range(0..8)).map(|_| *PIECES.choose(rng).unwrap()).collect()
}

fn token(rng: &mut impl Rng) -> Value {
    let mut t = json!({"chainId": rng.gen_range(1u64..100_000), "address": address(rng)});
    if rng.gen_bool(0.5) {
        t["symbol"] = text(rng).into();
    }
    if rng.gen_bool(0.5) {
        t["decimals"] = rng.gen_range(0u64..=255).into();
    }
    t
}

fn timestamp(rng: &mut impl Rng) -> u64 {
    rng.gen_range(0u64..4_000_000_000)
}

pub fn random_intent(rng: &mut impl Rng) -> Value {
    let action = match rng.gen_range(0..3) {
        0 => {
            let mut a = json!({
                "type": "SWAP",
                "tokenIn": token(rng),
                "tokenOut": token(rng),
                "amountIn": uint(rng),
                "minAmountOut": uint(rng)
            });
            if rng.gen_bool(0.5) {
                a["slippageBps"] = rng.gen_range(0u64..=10_000).into();
            }
            if rng.gen_bool(0.5) {
                a["recipient"] = address(rng).into();
            }
            a
        }
        1 => {
            let mut a = json!({"type": "TRANSFER", "token": token(rng), "to": address(rng), "amount": uint(rng)});
            if rng.gen_bool(0.5) {
                a["memo"] = text(rng).into();
            }
            a
        }
        _ => {
            let mut scope = Map::new();
            if rng.gen_bool(0.5) {
                let n = rng.gen_range(0..3);
                scope.insert("contracts".into(), (0..n).map(|_| Value::from(address(rng))).collect());
            }
            if rng.gen_bool(0.5) {
                scope.insert("functions".into(), json!([text(rng), "approve(address,uint256)"]));
            }
            if rng.gen_bool(0.5) {
                scope.insert("maxValueWei".into(), uint(rng).into());
            }
            if rng.gen_bool(0.5) {
                scope.insert("validUntil".into(), timestamp(rng).into());
            }
            json!({"type": "DELEGATE", "delegatee": address(rng), "scope": scope})
        }
    };
    let mut constraints = json!({"deadline": timestamp(rng)});
    if rng.gen_bool(0.5) {
        constraints["nonce"] = uint(rng).into();
    }
    if rng.gen_bool(0.3) {
        let a = rng.gen_range(0u64..1_000_000);
        constraints["validFromBlock"] = a.into();
        constraints["validUntilBlock"] = (a + rng.gen_range(0..1000)).into();
    }
    if rng.gen_bool(0.5) {
        constraints["maxGasPriceWei"] = uint(rng).into();
    }
    if rng.gen_bool(0.3) {
        constraints["requiredSigner"] = address(rng).into();
    }
    if rng.gen_bool(0.3) {
        constraints["exclusivity"] = if rng.gen_bool(0.5) { Value::Null } else { address(rng).into() };
    }
    let mut intent = json!({
        "version": "1.0.0",
        "intentId": uuid::Builder::from_random_bytes(rng.gen()).into_uuid().to_string(),
        "action": action,
        "constraints": constraints
    });
    if rng.gen_bool(0.4) {
        intent["metadata"] = json!({
            "originator": text(rng),
            "createdAt": format_timestamp(timestamp(rng)).unwrap(),
            "originChainId": rng.gen_range(1u64..100),
            "tags": [text(rng), text(rng)]
        });
    }
    if rng.gen_bool(0.4) {
        intent["preferences"] = json!({
            "privacyMode": *["PUBLIC", "PRIVATE"].choose(rng).unwrap(),
            "routing": *["BEST_PRICE", "MIN_GAS", "MIN_RISK"].choose(rng).unwrap()
        });
    }
    intent
}

fn ws(rng: &mut impl Rng, out: &mut String) {
    for _ in 0..rng.gen_range(0..3) {
        out.push(*[' ', '\n', '\t', '\r'].choose(rng).unwrap());
    }
}

fn write_string(s: &str, rng: &mut impl Rng, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        if rng.gen_bool(0.15) {
            let mut units = [0u16; 2];
            for u in c.encode_utf16(&mut units) {
                out.push_str(&format!("\\u{:04x}", u));
            }
            continue;
        }
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04X}", c as u32)),
            '/' if rng.gen_bool(0.5) => out.push_str("\\/"),
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Serialize with shuffled member order, random whitespace, and random
/// string escapes. Parses back to the same value.
pub fn permuted_json(v: &Value, rng: &mut impl Rng) -> String {
    let mut out = String::new();
    write_permuted(v, rng, &mut out);
    out
}

fn write_permuted(v: &Value, rng: &mut impl Rng, out: &mut String) {
    ws(rng, out);
    match v {
        Value::Object(m) => {
            let mut members: Vec<(&String, &Value)> = m.iter().collect();
            members.shuffle(rng);
            out.push('{');
            for (i, (k, item)) in members.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                ws(rng, out);
                write_string(k, rng, out);
                ws(rng, out);
                out.push(':');
                write_permuted(item, rng, out);
            }
            ws(rng, out);
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_permuted(item, rng, out);
            }
            ws(rng, out);
            out.push(']');
        }
        Value::String(s) => write_string(s, rng, out),
        other => out.push_str(&other.to_string()),
    }
    ws(rng, out);
}

/// RFC 6901 pointers of every scalar in `v`.
pub fn leaves(v: &Value, prefix: &str, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, item) in m {
                leaves(item, &format!("{prefix}/{}", k.replace('~', "~0").replace('/', "~1")), out);
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                leaves(item, &format!("{prefix}/{i}"), out);
            }
        }
        _ => out.push(prefix.to_owned()),
    }
}

fn flip_nibble(s: &str, start: usize, rng: &mut impl Rng) -> Option<String> {
    let positions: Vec<usize> = s
        .char_indices()
        .filter(|&(i, c)| i >= start && c.is_ascii_hexdigit())
        .map(|(i, _)| i)
        .collect();
    let &i = positions.choose(rng)?;
    let old = s[i..=i].to_ascii_lowercase();
    let new = loop {
        let c = *b"0123456789abcdef".choose(rng).unwrap() as char;
        if c.to_string() != old {
            break c;
        }
    };
    let mut out = s.to_owned();
    out.replace_range(i..=i, &new.to_string());
    Some(out)
}

/// Replace the scalar at `pointer` with a different value of the same kind.
/// Returns false for leaves that cannot be changed this way.
pub fn mutate_leaf(v: &mut Value, pointer: &str, rng: &mut impl Rng) -> bool {
    let Some(slot) = v.pointer_mut(pointer) else {
        return false;
    };
    let next = match slot {
        Value::String(s) => {
            let s = s.as_str();
            if let Some(t) = parse_timestamp(s) {
                format_timestamp(t.saturating_sub(3600) + rng.gen_range(0..7200)).map(Value::from)
            } else if s.len() > 2 && s.starts_with("0x") && s[2..].chars().all(|c| c.is_ascii_hexdigit()) {
                flip_nibble(s, 2, rng).map(Value::from)
            } else if !s.is_empty() && s.chars().all(|c| c.is_ascii_digit()) {
                let n: BigUint = s.parse().unwrap();
                Some((n + rng.gen_range(1u32..1000)).to_string().into())
            } else if s.len() == 36 && uuid::Uuid::try_parse(s).is_ok() {
                flip_nibble(s, 0, rng).map(Value::from)
            } else {
                let c = rng.gen_range(b'a'..=b'z') as char;
                Some(format!("{s}{c}").into())
            }
        }
        Value::Number(n) => match n.as_u64() {
            Some(u) if rng.gen_bool(0.5) && u > 0 => Some((u - rng.gen_range(1..=u.min(100))).into()),
            Some(u) => Some((u + rng.gen_range(1..100)).into()),
            None => Some(json!(f64::from(rng.gen_range(0u32..=1_000_000)) / 1e6)),
        },
        Value::Bool(b) => Some((!*b).into()),
        _ => None,
    };
    match next {
        Some(n) if n != *slot => {
            *slot = n;
            true
        }
        _ => false,
    }
}
