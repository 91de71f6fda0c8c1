use serde_json::Value;

use crate::intent::{intent_from_value, Intent};
use crate::json;
use crate::pdr::{ModOp, Modification};
use crate::schema::Finding;

/// Pointer prefix no modification may touch; replay keys depend on it.
pub const NONCE_POINTER: &str = "/constraints/nonce";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModifyError {
    #[error("modification {index}: pointer {path:?} does not resolve")]
    PointerUnresolvable { index: usize, path: String },
    #[error("modification {index}: {path:?} would change constraints.nonce")]
    NonceForbidden { index: usize, path: String },
    #[error("modified intent is invalid: {0}")]
    ResultInvalid(Finding),
}

/// Apply RFC 6901 edits in order and re-validate the result.
pub fn apply_modifications(intent: &Intent, mods: &[Modification]) -> Result<Intent, ModifyError> {
    let mut doc = intent.to_value();
    for (index, m) in mods.iter().enumerate() {
        let unresolvable = || ModifyError::PointerUnresolvable {
            index,
            path: m.path.clone(),
        };
        let forbidden = || ModifyError::NonceForbidden {
            index,
            path: m.path.clone(),
        };
        if m.path == NONCE_POINTER || m.path.starts_with("/constraints/nonce/") {
            return Err(forbidden());
        }
        let nonce_before = doc.pointer(NONCE_POINTER).cloned();
        let tokens = json::parse_pointer(&m.path).map_err(|_| unresolvable())?;
        apply_one(&mut doc, &tokens, m.operation, m.value.as_ref()).ok_or_else(unresolvable)?;
        // Whole-object replacements can carry a nonce change in through the side door.
        if doc.pointer(NONCE_POINTER) != nonce_before.as_ref() {
            return Err(forbidden());
        }
    }
    intent_from_value(&doc).map_err(|e| match e {
        crate::intent::IntentError::SchemaViolation(f) => ModifyError::ResultInvalid(f),
        crate::intent::IntentError::MalformedJson(m) => ModifyError::ResultInvalid(Finding::new(
            "",
            crate::schema::Rule::Type,
            m,
        )),
    })
}

fn apply_one(doc: &mut Value, tokens: &[String], op: ModOp, value: Option<&Value>) -> Option<()> {
    let Some((last, parents)) = tokens.split_last() else {
        // The root: REPLACE and ADD swap the whole document, REMOVE cannot.
        return match op {
            ModOp::Remove => None,
            ModOp::Add | ModOp::Replace => {
                *doc = value?.clone();
                Some(())
            }
        };
    };
    let mut parent = &mut *doc;
    for t in parents {
        parent = match parent {
            Value::Object(map) => map.get_mut(t)?,
            Value::Array(items) => items.get_mut(json::array_index(t)?)?,
            _ => return None,
        };
    }
    match (parent, op) {
        (Value::Object(map), ModOp::Add) => {
            map.insert(last.clone(), value?.clone());
        }
        (Value::Object(map), ModOp::Replace) => {
            *map.get_mut(last)? = value?.clone();
        }
        (Value::Object(map), ModOp::Remove) => {
            map.remove(last)?;
        }
        (Value::Array(items), ModOp::Add) => {
            let i = if last == "-" { items.len() } else { json::array_index(last)? };
            if i > items.len() {
                return None;
            }
            items.insert(i, value?.clone());
        }
        (Value::Array(items), ModOp::Replace) => {
            *items.get_mut(json::array_index(last)?)? = value?.clone();
        }
        (Value::Array(items), ModOp::Remove) => {
            let i = json::array_index(last)?;
            if i >= items.len() {
                return None;
            }
            items.remove(i);
        }
        _ => return None,
    }
    Some(())
}
