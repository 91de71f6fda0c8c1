use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use super::{
    ClockScript, Holding, IntentSource, MockLedger, Pipeline, PipelineConfig, PipelineTranscript, ScenarioConfigError,
    Tamper,
};
use crate::crypto::Keypair;
use crate::gate::TrustAnchors;
use crate::json;
use crate::policy::PolicySet;
use crate::types::SemanticAddress;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PolicySource {
    /// Path relative to the scenario file.
    File(PathBuf),
    Inline(PolicySet),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct IssuerSpec {
    pub id: String,
    /// 32-byte hex seed for the issuing key.
    pub seed: String,
}

fn default_ttl() -> u64 {
    600
}

fn one() -> u32 {
    1
}

/// A scenario file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub intent: Option<Value>,
    #[serde(default)]
    pub legacy_intent: Option<Value>,
    pub policy: PolicySource,
    pub issuer: IssuerSpec,
    pub audience: String,
    #[serde(default = "default_ttl")]
    pub ttl_seconds: u64,
    /// Defaults to trusting `issuer` with `audience` as the gate identity.
    #[serde(default)]
    pub anchors: Option<TrustAnchors>,
    pub payer: SemanticAddress,
    #[serde(default)]
    pub venue: Option<SemanticAddress>,
    pub ledger: Vec<Holding>,
    pub clock: Vec<u64>,
    #[serde(default)]
    pub tamper: Vec<Tamper>,
    /// Times the same authorization is presented to the gate.
    #[serde(default = "one")]
    pub submissions: u32,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario file: {0}")]
    Format(String),
    #[error(transparent)]
    Config(#[from] ScenarioConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub struct ScenarioRun {
    pub transcripts: Vec<PipelineTranscript>,
    pub ledger: MockLedger,
}

impl Scenario {
    pub fn from_json(bytes: &[u8]) -> Result<Self, ScenarioError> {
        let v = json::parse_strict(bytes).map_err(|e| ScenarioError::Format(e.to_string()))?;
        serde_json::from_value(v).map_err(|e| ScenarioError::Format(e.to_string()))
    }

    /// Load a scenario and return it with the directory policy paths resolve against.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ScenarioError> {
        let s = Self::from_json(&std::fs::read(path)?)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((s, base))
    }

    fn source(&self) -> Result<IntentSource, ScenarioError> {
        match (&self.intent, &self.legacy_intent) {
            (Some(v), None) => Ok(IntentSource::Typed(v.clone())),
            (None, Some(v)) => Ok(IntentSource::Legacy(v.clone())),
            _ => Err(ScenarioError::Format(
                "exactly one of `intent` and `legacyIntent` is required".into(),
            )),
        }
    }

    fn issuer_key(&self) -> Result<Keypair, ScenarioError> {
        let bad = || ScenarioError::Format("issuer.seed must be 32 bytes of hex".into());
        let text = self.issuer.seed.strip_prefix("0x").unwrap_or(&self.issuer.seed);
        let bytes: [u8; 32] = hex::decode(text).map_err(|_| bad())?.try_into().map_err(|_| bad())?;
        Keypair::from_seed(&bytes).map_err(|e| ScenarioError::Format(e.to_string()))
    }

    pub fn run(&self, base_dir: &Path) -> Result<ScenarioRun, ScenarioError> {
        let source = self.source()?;
        let policy = match &self.policy {
            PolicySource::Inline(p) => {
                p.validate().map_err(|e| ScenarioConfigError::Policy(e.to_string()))?;
                p.clone()
            }
            PolicySource::File(rel) => {
                PolicySet::load(&base_dir.join(rel)).map_err(|e| ScenarioConfigError::Policy(e.to_string()))?
            }
        };
        let issuer_key = self.issuer_key()?;
        let anchors = self
            .anchors
            .clone()
            .unwrap_or_else(|| TrustAnchors::new(&self.audience).trust(&self.issuer.id, issuer_key.address()));
        let mut clock = ClockScript::new(self.clock.clone())?;
        let ledger = MockLedger::new(self.clock[0], &self.ledger);
        let cfg = PipelineConfig {
            policy,
            issuer_key,
            issuer_id: self.issuer.id.clone(),
            audience: self.audience.clone(),
            ttl_seconds: self.ttl_seconds,
            anchors,
            payer: self.payer,
            venue: self.venue,
            rng_seed: self.seed,
        };
        let mut pipeline = Pipeline::new(cfg, ledger)?;
        let mut transcripts = vec![pipeline.run(&source, &mut clock, &self.tamper)?];
        for _ in 1..self.submissions {
            transcripts.push(pipeline.resubmit(&mut clock)?);
        }
        Ok(ScenarioRun {
            transcripts,
            ledger: pipeline.into_ledger(),
        })
    }
}
