//! Conformance levels L0 to L3 and the safety checklist audit.
//!
//! Levels are cumulative. The criteria for each level, and which checklist
//! items a descriptor can answer, are fixed tables below.

use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum KeyCustody {
    RawLocal,
    SessionScoped,
    Mpc,
    TeeHsm,
}

impl KeyCustody {
    pub const ALL: [KeyCustody; 4] = [
        KeyCustody::RawLocal,
        KeyCustody::SessionScoped,
        KeyCustody::Mpc,
        KeyCustody::TeeHsm,
    ];

    pub fn is_hardened(&self) -> bool {
        matches!(self, KeyCustody::Mpc | KeyCustody::TeeHsm)
    }
}

/// Declared features of a deployment. Every field is required.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DeploymentDescriptor {
    pub key_custody: KeyCustody,
    pub on_chain_policy_modules: bool,
    pub function_allowlist: bool,
    pub contract_allowlist: bool,
    pub static_spend_limits: bool,
    pub off_chain_policy_engine: bool,
    pub mandatory_simulation: bool,
    pub dynamic_risk_scoring: bool,
    pub quorum_for_high_value: bool,
    pub recovery_revocation: bool,
    pub audit_logging: bool,
    pub private_orderflow: bool,
}

/// Number of boolean flags in a descriptor.
pub const FLAG_COUNT: usize = 11;

impl DeploymentDescriptor {
    /// Everything off, raw local key.
    pub fn bare() -> Self {
        Self::from_bits(KeyCustody::RawLocal, 0)
    }

    /// Build from a custody mode and a bitmask over the flags in declaration
    /// order (bit 0 is `onChainPolicyModules`).
    pub fn from_bits(key_custody: KeyCustody, bits: u32) -> Self {
        let b = |i: u32| bits & (1 << i) != 0;
        DeploymentDescriptor {
            key_custody,
            on_chain_policy_modules: b(0),
            function_allowlist: b(1),
            contract_allowlist: b(2),
            static_spend_limits: b(3),
            off_chain_policy_engine: b(4),
            mandatory_simulation: b(5),
            dynamic_risk_scoring: b(6),
            quorum_for_high_value: b(7),
            recovery_revocation: b(8),
            audit_logging: b(9),
            private_orderflow: b(10),
        }
    }

    pub fn flags_mut(&mut self) -> [&mut bool; FLAG_COUNT] {
        [
            &mut self.on_chain_policy_modules,
            &mut self.function_allowlist,
            &mut self.contract_allowlist,
            &mut self.static_spend_limits,
            &mut self.off_chain_policy_engine,
            &mut self.mandatory_simulation,
            &mut self.dynamic_risk_scoring,
            &mut self.quorum_for_high_value,
            &mut self.recovery_revocation,
            &mut self.audit_logging,
            &mut self.private_orderflow,
        ]
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, DescriptorError> {
        let v = crate::json::parse_strict(bytes).map_err(|e| DescriptorError::Format(e.to_string()))?;
        serde_json::from_value(v).map_err(|e| DescriptorError::Format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DescriptorError> {
        Self::from_json(&std::fs::read(path)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DescriptorError {
    #[error("descriptor: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    L0,
    L1,
    L2,
    L3,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::L0 => "L0",
            Level::L1 => "L1",
            Level::L2 => "L2",
            Level::L3 => "L3",
        })
    }
}

/// One level criterion: id, the level that introduces it, and its test.
pub struct Criterion {
    pub id: &'static str,
    pub level: Level,
    pub holds: fn(&DeploymentDescriptor) -> bool,
}

pub const CRITERIA: &[Criterion] = &[
    Criterion { id: "L1.functionAllowlist", level: Level::L1, holds: |d| d.function_allowlist },
    Criterion { id: "L1.contractAllowlist", level: Level::L1, holds: |d| d.contract_allowlist },
    Criterion { id: "L1.staticSpendLimits", level: Level::L1, holds: |d| d.static_spend_limits },
    Criterion { id: "L1.onChainPolicyModules", level: Level::L1, holds: |d| d.on_chain_policy_modules },
    Criterion { id: "L2.offChainPolicyEngine", level: Level::L2, holds: |d| d.off_chain_policy_engine },
    Criterion { id: "L2.mandatorySimulation", level: Level::L2, holds: |d| d.mandatory_simulation },
    Criterion { id: "L2.dynamicRiskScoring", level: Level::L2, holds: |d| d.dynamic_risk_scoring },
    Criterion { id: "L3.hardenedCustody", level: Level::L3, holds: |d| d.key_custody.is_hardened() },
    Criterion { id: "L3.quorumForHighValue", level: Level::L3, holds: |d| d.quorum_for_high_value },
    Criterion { id: "L3.recoveryRevocation", level: Level::L3, holds: |d| d.recovery_revocation },
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConformanceReport {
    pub level: Level,
    pub satisfied: Vec<&'static str>,
    pub missing_for_next: Vec<&'static str>,
}

pub fn classify(d: &DeploymentDescriptor) -> ConformanceReport {
    let satisfied: Vec<&'static str> = CRITERIA.iter().filter(|c| (c.holds)(d)).map(|c| c.id).collect();
    let level_complete = |l: Level| CRITERIA.iter().filter(|c| c.level == l).all(|c| (c.holds)(d));
    let mut level = Level::L0;
    for l in [Level::L1, Level::L2, Level::L3] {
        if !level_complete(l) {
            break;
        }
        level = l;
    }
    let next = match level {
        Level::L0 => Some(Level::L1),
        Level::L1 => Some(Level::L2),
        Level::L2 => Some(Level::L3),
        Level::L3 => None,
    };
    let missing_for_next = CRITERIA
        .iter()
        .filter(|c| Some(c.level) == next && !(c.holds)(d))
        .map(|c| c.id)
        .collect();
    ConformanceReport {
        level,
        satisfied,
        missing_for_next,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ItemStatus {
    Pass,
    Fail,
    NotMachineCheckable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stage {
    Observe,
    Reason,
    Construct,
    Authorize,
    Execute,
    VerifyRecover,
    General,
}

struct Item {
    stage: Stage,
    number: u8,
    topic: &'static str,
    check: Option<fn(&DeploymentDescriptor) -> bool>,
}

const fn manual(stage: Stage, number: u8, topic: &'static str) -> Item {
    Item { stage, number, topic, check: None }
}

const fn auto(stage: Stage, number: u8, topic: &'static str, f: fn(&DeploymentDescriptor) -> bool) -> Item {
    Item { stage, number, topic, check: Some(f) }
}

use Stage::*;

const CHECKLIST: &[Item] = &[
    manual(Observe, 1, "RPC provider redundancy"),
    manual(Observe, 2, "off-chain data integrity and freshness"),
    auto(Observe, 3, "on-chain anomaly monitoring", |d| d.dynamic_risk_scoring),
    manual(Observe, 4, "oracle manipulation and stale prices"),
    manual(Observe, 5, "protocol security alert feeds"),
    manual(Reason, 1, "prompt and retrieval injection hardening"),
    manual(Reason, 2, "MEV and ordering awareness"),
    manual(Reason, 3, "self-model of permissions"),
    auto(Reason, 4, "audit logging of traces and tool calls", |d| d.audit_logging),
    manual(Reason, 5, "gas, fee and deadline risk"),
    manual(Construct, 1, "structured intents instead of raw calldata"),
    auto(Construct, 2, "pre-signing simulation", |d| d.mandatory_simulation),
    manual(Construct, 3, "human-readable effect preview"),
    manual(Construct, 4, "flagging irreversible operations"),
    manual(Construct, 5, "deadlines and replay protection"),
    auto(Authorize, 1, "smart accounts", |d| d.on_chain_policy_modules),
    auto(Authorize, 2, "on-chain permission modules", |d| {
        d.on_chain_policy_modules && d.function_allowlist && d.contract_allowlist
    }),
    auto(Authorize, 3, "off-chain policy engine", |d| d.off_chain_policy_engine),
    auto(Authorize, 4, "hash-bound decision records", |d| d.off_chain_policy_engine && d.audit_logging),
    auto(Authorize, 5, "hardened custody", |d| d.key_custody.is_hardened()),
    auto(Authorize, 6, "key segmentation", |d| d.key_custody != KeyCustody::RawLocal),
    auto(Authorize, 7, "key and module revocation", |d| d.recovery_revocation),
    auto(Authorize, 8, "quorum for high value", |d| d.quorum_for_high_value),
    auto(Authorize, 9, "per-transaction and window spend limits", |d| d.static_spend_limits),
    auto(Authorize, 10, "protected policy changes", |d| d.on_chain_policy_modules && d.quorum_for_high_value),
    auto(Execute, 1, "private orderflow", |d| d.private_orderflow),
    manual(Execute, 2, "intent-based venues"),
    manual(Execute, 3, "fee estimation under congestion"),
    manual(Execute, 4, "stuck transaction handling"),
    manual(Execute, 5, "real-time execution monitoring"),
    manual(VerifyRecover, 1, "post-execution state reads"),
    manual(VerifyRecover, 2, "event parsing"),
    manual(VerifyRecover, 3, "partial failure recovery"),
    auto(VerifyRecover, 4, "kill switch", |d| d.recovery_revocation),
    manual(VerifyRecover, 5, "incident runbook"),
    manual(General, 1, "documented trust model"),
    manual(General, 2, "code audits"),
    manual(General, 3, "disclosure program"),
    manual(General, 4, "authenticated, encrypted channels"),
    manual(General, 5, "secret vaulting and rotation"),
    manual(General, 6, "host hardening"),
    manual(General, 7, "staged updates with rollback"),
    manual(General, 8, "reproducible safety evaluation"),
    manual(General, 9, "governance for policy changes"),
    manual(General, 10, "user risk disclosure"),
];

/// Number of checklist items a descriptor cannot answer.
pub const NOT_MACHINE_CHECKABLE: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChecklistItem {
    pub id: String,
    pub stage: Stage,
    pub topic: &'static str,
    pub status: ItemStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChecklistReport {
    pub items: Vec<ChecklistItem>,
    pub passed: usize,
    pub failed: usize,
    pub not_machine_checkable: usize,
}

impl ChecklistReport {
    pub fn failures(&self) -> impl Iterator<Item = &ChecklistItem> {
        self.items.iter().filter(|i| i.status == ItemStatus::Fail)
    }
}

fn stage_name(s: Stage) -> &'static str {
    match s {
        Observe => "Observe",
        Reason => "Reason",
        Construct => "Construct",
        Authorize => "Authorize",
        Execute => "Execute",
        VerifyRecover => "VerifyRecover",
        General => "General",
    }
}

pub fn audit_checklist(d: &DeploymentDescriptor) -> ChecklistReport {
    let items: Vec<ChecklistItem> = CHECKLIST
        .iter()
        .map(|it| ChecklistItem {
            id: format!("{}.{}", stage_name(it.stage), it.number),
            stage: it.stage,
            topic: it.topic,
            status: match it.check {
                None => ItemStatus::NotMachineCheckable,
                Some(f) if f(d) => ItemStatus::Pass,
                Some(_) => ItemStatus::Fail,
            },
        })
        .collect();
    let count = |s: ItemStatus| items.iter().filter(|i| i.status == s).count();
    ChecklistReport {
        passed: count(ItemStatus::Pass),
        failed: count(ItemStatus::Fail),
        not_machine_checkable: count(ItemStatus::NotMachineCheckable),
        items,
    }
}

/// Plain-text rendering of both reports.
pub fn render_text(report: &ConformanceReport, checklist: &ChecklistReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Level: {}", report.level);
    let _ = writeln!(out, "Satisfied: {}", join_or_none(&report.satisfied));
    let _ = writeln!(out, "Missing for next level: {}", join_or_none(&report.missing_for_next));
    let _ = writeln!(out);
    let width = checklist.items.iter().map(|i| i.id.len()).max().unwrap_or(0);
    for item in &checklist.items {
        let status = match item.status {
            ItemStatus::Pass => "PASS",
            ItemStatus::Fail => "FAIL",
            ItemStatus::NotMachineCheckable => "----",
        };
        let _ = writeln!(out, "{:<width$}  {status}  {}", item.id, item.topic);
    }
    let _ = writeln!(
        out,
        "\n{} passed, {} failed, {} not machine-checkable",
        checklist.passed, checklist.failed, checklist.not_machine_checkable
    );
    out
}

fn join_or_none(ids: &[&str]) -> String {
    if ids.is_empty() {
        "(none)".to_owned()
    } else {
        ids.join(", ")
    }
}
