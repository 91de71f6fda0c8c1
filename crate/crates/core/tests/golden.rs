//! Frozen values computed by an independent implementation
//! (tests/oracles/golden_oracle.py).

mod common;

use intent_gate::crypto::{keccak256, recover_signer, sign_digest, SignatureBytes};
use intent_gate::intent::{intent_hash, normalize_legacy_intent, parse_intent, LegacyOptions};
use intent_gate::pdr::{pdr_signing_digest, pdr_signing_payload, sign_pdr};

fn frozen(key: &str) -> String {
    common::json("golden/golden_values.json")[key].as_str().unwrap().to_owned()
}

#[test]
fn keccak_of_empty_input() {
    assert_eq!(keccak256(b"").to_string(), frozen("keccak_empty"));
}

#[test]
fn seed_one_address() {
    assert_eq!(common::issuer_key().address().to_string(), frozen("seed01_address"));
}

#[test]
fn swap_intent_canonical_form_and_digest() {
    let intent = common::rebalance_intent();
    assert_eq!(intent.canonical_bytes().as_str(), frozen("rebalance_canonical"));
    assert_eq!(intent_hash(&intent).to_string(), frozen("rebalance_digest"));
}

#[test]
fn legacy_swap_normalizes_to_same_digest() {
    let raw = common::json("golden/rebalance_legacy.tis.json");
    let intent = normalize_legacy_intent(&raw, &LegacyOptions::default()).unwrap();
    assert_eq!(intent_hash(&intent).to_string(), frozen("rebalance_digest"));
}

#[test]
fn intent_digest_signature() {
    let digest = intent_hash(&common::rebalance_intent());
    let sig = sign_digest(&common::issuer_key(), &digest);
    assert_eq!(sig.to_hex(), frozen("rebalance_signature"));
}

#[test]
fn transfer_digest() {
    let intent = parse_intent(&common::read("golden/transfer.tis.json")).unwrap();
    assert_eq!(intent_hash(&intent).to_string(), frozen("transfer_digest"));
}

#[test]
fn record_payload_digest_and_signature() {
    let pdr = common::rebalance_pdr();
    assert_eq!(pdr_signing_payload(&pdr).unwrap().as_str(), frozen("rebalance_pdr_payload"));
    let digest = pdr_signing_digest(&pdr).unwrap();
    assert_eq!(digest.to_string(), frozen("rebalance_pdr_digest"));
    assert_eq!(pdr.tis_hash.to_string(), frozen("rebalance_digest"));

    let sig = SignatureBytes::from_hex(&pdr.policy_engine_signature.signature).unwrap();
    assert_eq!(recover_signer(&digest, &sig).unwrap(), Some(common::issuer_key().address()));

    let mut resigned = pdr.clone();
    sign_pdr(&mut resigned, &common::issuer_key()).unwrap();
    assert_eq!(resigned, pdr, "signing is deterministic");
}
