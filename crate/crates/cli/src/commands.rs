use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use serde_json::{json, Value};

use intent_gate::canonical::canonicalize;
use intent_gate::conformance::{audit_checklist, classify, render_text, DeploymentDescriptor};
use intent_gate::crypto::{keccak256, Keypair};
use intent_gate::gate::{gate, verify_pair, AuditSink, GateError, JsonlAudit, MemoryAudit, NonceRegistry, TrustAnchors};
use intent_gate::intent::{intent_hash, parse_intent, render_preview, Intent, IntentError};
use intent_gate::json::parse_strict;
use intent_gate::pdr::{parse_pdr, PdrError, PolicyDecisionRecord};
use intent_gate::policy::{
    evaluate, issue_pdr, issue_pdr_with_id, load_spend_ledger, EvaluationContext, IssueParams, PolicySet, SpendRecord,
};
use intent_gate::sim::Scenario;

use crate::exit::{self, invalid, io, usage, Failure};

pub const HOME_VAR: &str = "INTENT_GATE_HOME";

/// Intents, policy decision records, and the signer gate.
#[derive(Debug, Parser)]
#[command(name = "intent-gate", version)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate an intent or a decision record (detected from its keys).
    Validate { file: PathBuf },
    /// Print the canonical bytes of a JSON document.
    Canonicalize { file: PathBuf },
    /// Print the keccak-256 hash of an intent.
    Hash { file: PathBuf },
    /// Derive a signing key from a seed and write it to a key file.
    Keygen {
        #[arg(long)]
        seed: String,
        #[arg(long)]
        out: PathBuf,
        /// Replace an existing key file.
        #[arg(long)]
        force: bool,
    },
    /// Render the human-readable preview of an intent.
    Preview {
        file: PathBuf,
        /// Print plain text instead of JSON.
        #[arg(long)]
        plain: bool,
    },
    /// Evaluate intents against a policy file.
    #[command(subcommand)]
    Policy(PolicyCommand),
    /// Issue or verify decision records.
    #[command(subcommand)]
    Pdr(PdrCommand),
    /// Verify a pair, consume it, and print the execution envelope.
    Gate(GateArgs),
    /// Run a scenario file and print its transcripts as JSON lines.
    Simulate { scenario: PathBuf },
    /// Classify a deployment descriptor.
    Audit {
        #[arg(long)]
        descriptor: PathBuf,
        /// Print only the level report.
        #[arg(long)]
        level_only: bool,
        /// Print a text table instead of JSON.
        #[arg(long)]
        text: bool,
    },
}

#[derive(Debug, Subcommand)]
enum PolicyCommand {
    /// Evaluate an intent and print the decision.
    Eval {
        #[arg(long)]
        tis: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// Spend history (JSON lines). Missing file means no history.
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long)]
        now: u64,
    },
}

#[derive(Debug, Subcommand)]
enum PdrCommand {
    /// Evaluate an intent and issue a signed decision record.
    Issue {
        #[arg(long)]
        tis: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        issuer: String,
        #[arg(long)]
        audience: String,
        #[arg(long)]
        ttl: u64,
        #[arg(long)]
        now: u64,
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Fixed record id. Without it the id is derived from the inputs.
        #[arg(long)]
        pdr_id: Option<String>,
    },
    /// Run the gate checks without consuming anything.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    tis: PathBuf,
    #[arg(long)]
    pdr: PathBuf,
    #[arg(long)]
    anchors: Option<PathBuf>,
    /// Audience this gate answers to; overrides the anchors file.
    #[arg(long)]
    identity: Option<String>,
    #[arg(long)]
    now: u64,
    #[arg(long)]
    registry: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GateArgs {
    #[command(flatten)]
    verify: VerifyArgs,
    #[arg(long)]
    audit: Option<PathBuf>,
    /// Spend history to append to once authorized.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

fn home_file(flag: Option<PathBuf>, name: &str) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(HOME_VAR).map(|h| Path::new(&h).join(name)))
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| io(format!("{}: {e}", path.display())))
}

fn emit_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let v = serde_json::to_value(value).map_err(io)?;
    let bytes = canonicalize(&v).map_err(io)?;
    let mut out = std::io::stdout().lock();
    out.write_all(bytes.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .map_err(io)
}

fn load_intent(path: &Path) -> Result<Intent, Failure> {
    parse_intent(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_pdr(path: &Path) -> Result<PolicyDecisionRecord, Failure> {
    parse_pdr(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_policy(path: &Path) -> Result<PolicySet, Failure> {
    PolicySet::from_json(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_history(flag: Option<PathBuf>, now: u64) -> Result<(EvaluationContext, Option<PathBuf>), Failure> {
    let path = home_file(flag, "spend.jsonl");
    let ctx = match &path {
        Some(p) => load_spend_ledger(p, now).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        None => EvaluationContext::at(now),
    };
    Ok((ctx, path))
}

fn load_anchors(args: &VerifyArgs) -> Result<TrustAnchors, Failure> {
    let path = home_file(args.anchors.clone(), "anchors.json")
        .ok_or_else(|| usage(format!("--anchors is required when {HOME_VAR} is unset")))?;
    let bytes = read(&path)?;
    let v = parse_strict(&bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let mut anchors: TrustAnchors =
        serde_json::from_value(v).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    if let Some(id) = &args.identity {
        anchors.self_identity = id.clone();
    }
    Ok(anchors)
}

fn open_registry(path: Option<PathBuf>) -> Result<NonceRegistry, Failure> {
    match path {
        Some(p) => NonceRegistry::open(&p).map_err(|e| io(format!("{}: {e}", p.display()))),
        None => Ok(NonceRegistry::in_memory()),
    }
}

pub fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Canonicalize { file } => {
            let v = parse_strict(&read(&file)?).map_err(|e| invalid(format!("MalformedJson: {e}")))?;
            let bytes = canonicalize(&v).map_err(invalid)?;
            std::io::stdout().write_all(bytes.as_bytes()).map_err(io)?;
            Ok(exit::OK)
        }
        Command::Hash { file } => {
            println!("{}", intent_hash(&load_intent(&file)?));
            Ok(exit::OK)
        }
        Command::Keygen { seed, out, force } => {
            let text = seed.strip_prefix("0x").unwrap_or(&seed);
            let bytes: [u8; 32] = hex::decode(text)
                .ok()
                .and_then(|b| b.try_into().ok())
                .ok_or_else(|| usage("--seed must be 32 bytes of hex"))?;
            let key = Keypair::from_seed(&bytes).map_err(usage)?;
            if out.exists() && !force {
                return Err(usage(format!("{} exists; pass --force to replace it", out.display())));
            }
            key.write_key_file(&out).map_err(io)?;
            emit_json(&json!({"address": key.address()}))?;
            Ok(exit::OK)
        }
        Command::Preview { file, plain } => {
            let intent = load_intent(&file)?;
            let text = render_preview(&intent);
            if plain {
                println!("{text}");
            } else {
                emit_json(&json!({"intentId": intent.intent_id, "preview": text}))?;
            }
            Ok(exit::OK)
        }
        Command::Policy(PolicyCommand::Eval {
            tis,
            policy,
            ledger,
            now,
        }) => {
            let intent = load_intent(&tis)?;
            let policy = load_policy(&policy)?;
            let (ctx, _) = load_history(ledger, now)?;
            let decision = evaluate(&intent, &policy, &ctx);
            emit_json(&json!({"tisHash": intent_hash(&intent), "decision": decision.to_value()}))?;
            Ok(if decision.is_approved() { exit::OK } else { exit::REJECTED })
        }
        Command::Pdr(PdrCommand::Issue {
            tis,
            policy,
            key,
            issuer,
            audience,
            ttl,
            now,
            ledger,
            pdr_id,
        }) => {
            let intent = load_intent(&tis)?;
            let policy = load_policy(&policy)?;
            let key = Keypair::read_key_file(&key).map_err(|e| io(format!("{}: {e}", key.display())))?;
            let (ctx, _) = load_history(ledger, now)?;
            let decision = evaluate(&intent, &policy, &ctx);
            let approved = decision.is_approved();
            let params = IssueParams {
                issuer_key: &key,
                issuer_id: &issuer,
                audience: &audience,
                ttl_seconds: ttl,
            };
            let record = match pdr_id {
                Some(id) => issue_pdr_with_id(&intent, decision, params, &ctx, &id),
                None => {
                    let mut seed_input = intent_hash(&intent).0.to_vec();
                    seed_input.extend_from_slice(&now.to_be_bytes());
                    seed_input.extend_from_slice(issuer.as_bytes());
                    seed_input.push(0);
                    seed_input.extend_from_slice(audience.as_bytes());
                    let mut rng = ChaCha20Rng::from_seed(keccak256(&seed_input).0);
                    issue_pdr(&intent, decision, params, &ctx, &mut rng)
                }
            }
            .map_err(invalid)?;
            emit_json(&record.to_value())?;
            Ok(if approved { exit::OK } else { exit::REJECTED })
        }
        Command::Pdr(PdrCommand::Verify(args)) => {
            let intent = load_intent(&args.tis)?;
            let pdr = load_pdr(&args.pdr)?;
            let anchors = load_anchors(&args)?;
            let registry = open_registry(args.registry.clone())?;
            let report = verify_pair(&intent, &pdr, &anchors, &registry, args.now);
            emit_json(&report)?;
            Ok(if report.passed() { exit::OK } else { exit::REFUSED })
        }
        Command::Gate(args) => run_gate(args),
        Command::Simulate { scenario } => {
            let bytes = read(&scenario)?;
            let s = Scenario::from_json(&bytes).map_err(invalid)?;
            let base = scenario.parent().map(Path::to_path_buf).unwrap_or_default();
            let result = s.run(&base).map_err(|e| match e {
                intent_gate::sim::ScenarioError::Io(e) => io(e),
                other => invalid(other),
            })?;
            let mut out = std::io::stdout().lock();
            for t in &result.transcripts {
                out.write_all(t.to_jsonl().as_bytes()).map_err(io)?;
            }
            Ok(exit::OK)
        }
        Command::Audit {
            descriptor,
            level_only,
            text,
        } => {
            let d = DeploymentDescriptor::from_json(&read(&descriptor)?).map_err(invalid)?;
            let report = classify(&d);
            let checklist = audit_checklist(&d);
            if text {
                print!("{}", render_text(&report, &checklist));
            } else if level_only {
                emit_json(&report)?;
            } else {
                emit_json(&json!({"conformance": report, "checklist": checklist}))?;
            }
            Ok(exit::OK)
        }
    }
}

fn validate(file: &Path) -> Result<u8, Failure> {
    let bytes = read(file)?;
    let v = match parse_strict(&bytes) {
        Ok(v) => v,
        Err(e) => {
            emit_json(&json!({"valid": false, "error": "MalformedJson", "detail": e.to_string()}))?;
            eprintln!("{}: malformed JSON: {e}", file.display());
            return Ok(exit::VALIDATION);
        }
    };
    let has = |k: &str| v.get(k).is_some();
    let kind = match (has("action"), has("decision")) {
        (true, false) => "TIS",
        (false, true) => "PDR",
        _ => {
            return Err(usage(format!(
                "{}: cannot tell an intent from a decision record",
                file.display()
            )))
        }
    };
    let finding = if kind == "TIS" {
        match intent_gate::intent::intent_from_value(&v) {
            Ok(_) => None,
            Err(IntentError::SchemaViolation(f)) => Some(f),
            Err(IntentError::MalformedJson(m)) => return Err(invalid(m)),
        }
    } else {
        match intent_gate::pdr::pdr_from_value(&v) {
            Ok(_) => None,
            Err(PdrError::SchemaViolation(f)) => Some(f),
            Err(PdrError::MalformedJson(m)) => return Err(invalid(m)),
        }
    };
    let findings: Vec<Value> = finding
        .iter()
        .map(|f| serde_json::to_value(f).expect("finding serializes"))
        .collect();
    emit_json(&json!({"document": kind, "valid": finding.is_none(), "findings": findings}))?;
    match finding {
        None => Ok(exit::OK),
        Some(f) => {
            eprintln!("{}: {f}", file.display());
            Ok(exit::VALIDATION)
        }
    }
}

fn run_gate(args: GateArgs) -> Result<u8, Failure> {
    let v = &args.verify;
    let intent = load_intent(&v.tis)?;
    let pdr = load_pdr(&v.pdr)?;
    let anchors = load_anchors(v)?;
    let registry_path = home_file(v.registry.clone(), "registry.jsonl")
        .ok_or_else(|| usage(format!("--registry is required when {HOME_VAR} is unset")))?;
    let registry = open_registry(Some(registry_path))?;
    let memory = MemoryAudit::new();
    let audit: Box<dyn AuditSink> = match home_file(args.audit.clone(), "audit.jsonl") {
        Some(p) => Box::new(JsonlAudit::open(&p).map_err(|e| io(format!("{}: {e}", p.display())))?),
        None => Box::new(memory),
    };
    match gate(&intent, &pdr, &anchors, &registry, v.now, audit.as_ref()) {
        Ok(env) => {
            if let Some(path) = home_file(args.ledger.clone(), "spend.jsonl") {
                SpendRecord::for_intent(&env.intent, v.now)
                    .append_to(&path)
                    .map_err(|e| io(format!("{}: {e}", path.display())))?;
            }
            emit_json(&env)?;
            Ok(exit::OK)
        }
        Err(GateError::Refused(report)) => {
            emit_json(&report)?;
            if let (Some(step), Some(detail)) = (report.failed_step(), report.failure_detail()) {
                eprintln!("refused at {step}: {detail}");
            }
            Ok(exit::REFUSED)
        }
        Err(GateError::Modification(e)) => {
            emit_json(&json!({"outcome": "FAIL", "failedStep": "Modifications", "detail": e.to_string()}))?;
            eprintln!("refused: {e}");
            Ok(exit::REFUSED)
        }
        Err(GateError::Io(e)) => Err(io(e)),
    }
}
