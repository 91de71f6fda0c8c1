#![allow(dead_code)]

pub mod corpus;
pub mod gen;

use std::path::PathBuf;

use intent_gate::crypto::Keypair;
use intent_gate::gate::TrustAnchors;
use intent_gate::intent::{parse_intent, Intent};
use intent_gate::pdr::{parse_pdr, PolicyDecisionRecord};
use intent_gate::policy::PolicySet;

pub const ISSUER: &str = "https://policy.turnkey.com";
pub const AUDIENCE: &str = "https://signer.fireblocks.com";
pub const ISSUED_AT: u64 = 1_767_229_200;
pub const GATE_AT: u64 = 1_767_229_500;

pub fn tests_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests")
}

pub fn read(rel: &str) -> Vec<u8> {
    std::fs::read(tests_dir().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn json(rel: &str) -> serde_json::Value {
    serde_json::from_slice(&read(rel)).unwrap()
}

pub fn issuer_key() -> Keypair {
    Keypair::from_seed(&[1u8; 32]).unwrap()
}

pub fn anchors() -> TrustAnchors {
    TrustAnchors::new(AUDIENCE).trust(ISSUER, issuer_key().address())
}

pub fn rebalance_intent() -> Intent {
    parse_intent(&read("golden/rebalance.tis.json")).unwrap()
}

pub fn rebalance_pdr() -> PolicyDecisionRecord {
    parse_pdr(&read("golden/rebalance.pdr.json")).unwrap()
}

pub fn policy(name: &str) -> PolicySet {
    PolicySet::load(&tests_dir().join("fixtures").join(name)).unwrap()
}
