//! Primitive value types shared by intents, decision records, and policies.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A 20-byte account identifier. Always rendered as lowercase `0x` hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SemanticAddress(pub [u8; 20]);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("address must match ^0x[a-fA-F0-9]{{40}}$")]
pub struct AddressError;

impl SemanticAddress {
    pub const ZERO: SemanticAddress = SemanticAddress([0u8; 20]);

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }
}

impl FromStr for SemanticAddress {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex_part = s.strip_prefix("0x").ok_or(AddressError)?;
        if hex_part.len() != 40 || !hex_part.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(AddressError);
        }
        let mut out = [0u8; 20];
        hex::decode_to_slice(hex_part, &mut out).map_err(|_| AddressError)?;
        Ok(SemanticAddress(out))
    }
}

impl fmt::Display for SemanticAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for SemanticAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for SemanticAddress {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SemanticAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Arbitrary-precision non-negative integer carried as its base-10 text.
///
/// The canonical form has no leading zeros except the single digit `"0"`.
/// [`UintDecimal::new`] enforces it; [`UintDecimal::new_unchecked`] exists for
/// values assembled by hand, which `validate_*` functions then re-check.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct UintDecimal(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UintError {
    #[error("unsigned integer string must match ^[0-9]+$")]
    NotDigits,
    #[error("unsigned integer string must not have leading zeros")]
    LeadingZero,
}

impl UintDecimal {
    pub fn new(s: impl Into<String>) -> Result<Self, UintError> {
        let s = s.into();
        Self::check(&s)?;
        Ok(UintDecimal(s))
    }

    pub fn new_unchecked(s: impl Into<String>) -> Self {
        UintDecimal(s.into())
    }

    pub fn zero() -> Self {
        UintDecimal("0".into())
    }

    pub fn check(s: &str) -> Result<(), UintError> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(UintError::NotDigits);
        }
        if s.len() > 1 && s.starts_with('0') {
            return Err(UintError::LeadingZero);
        }
        Ok(())
    }

    pub fn is_canonical(&self) -> bool {
        Self::check(&self.0).is_ok()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Numeric value. Non-digit content (only reachable through
    /// `new_unchecked`) reads as zero.
    pub fn value(&self) -> BigUint {
        BigUint::parse_bytes(self.0.as_bytes(), 10).unwrap_or_default()
    }

    pub fn numeric_cmp(&self, other: &UintDecimal) -> Ordering {
        self.value().cmp(&other.value())
    }

    /// The numerically smaller of two values; ties keep `self`.
    pub fn min_of<'a>(&'a self, other: &'a UintDecimal) -> &'a UintDecimal {
        if other.numeric_cmp(self) == Ordering::Less {
            other
        } else {
            self
        }
    }
}

impl From<u64> for UintDecimal {
    fn from(v: u64) -> Self {
        UintDecimal(v.to_string())
    }
}

impl From<&BigUint> for UintDecimal {
    fn from(v: &BigUint) -> Self {
        UintDecimal(v.to_str_radix(10))
    }
}

impl FromStr for UintDecimal {
    type Err = UintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UintDecimal::new(s)
    }
}

impl fmt::Display for UintDecimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for UintDecimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl Serialize for UintDecimal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for UintDecimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        UintDecimal::new(s).map_err(serde::de::Error::custom)
    }
}

/// Unix time in whole seconds.
pub type UnixSeconds = u64;

/// Last second representable with a four-digit year (9999-12-31T23:59:59Z).
pub const MAX_TIMESTAMP: UnixSeconds = 253_402_300_799;

/// Render as `YYYY-MM-DDTHH:MM:SSZ`. `None` past [`MAX_TIMESTAMP`].
pub fn format_timestamp(ts: UnixSeconds) -> Option<String> {
    if ts > MAX_TIMESTAMP {
        return None;
    }
    let dt = chrono::DateTime::from_timestamp(ts as i64, 0)?;
    Some(dt.format("%Y-%m-%dT%H:%M:%SZ").to_string())
}

/// Parse a timestamp that is already in the form [`format_timestamp`] emits.
/// Other RFC 3339 spellings of the same instant are refused so that the text
/// survives a parse/render cycle byte for byte.
pub fn parse_timestamp(text: &str) -> Option<UnixSeconds> {
    let dt = chrono::DateTime::parse_from_rfc3339(text).ok()?;
    let ts = u64::try_from(dt.timestamp()).ok()?;
    (format_timestamp(ts).as_deref() == Some(text)).then_some(ts)
}
