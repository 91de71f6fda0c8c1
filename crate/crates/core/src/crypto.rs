//! keccak-256 digests and secp256k1 ECDSA with Ethereum-style addresses.
//!
//! Signatures are deterministic (RFC 6979), low-s normalized, and carry a
//! recovery id so verification can work from an address alone.

use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use k256::ecdsa::{RecoveryId, Signature, SigningKey, VerifyingKey};
use k256::elliptic_curve::ops::Reduce;
use k256::elliptic_curve::scalar::IsHigh;
use k256::elliptic_curve::PrimeField;
use k256::{FieldBytes, Scalar, U256};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::{Digest, Keccak256};

use crate::types::SemanticAddress;

/// Algorithm identifier written into decision records.
pub const SIGNATURE_ALG: &str = "ES256K";

/// A 32-byte digest, rendered as `0x` + 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest32(pub [u8; 32]);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("digest must match ^0x[a-fA-F0-9]{{64}}$")]
pub struct DigestParseError;

impl FromStr for Digest32 {
    type Err = DigestParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let h = s.strip_prefix("0x").ok_or(DigestParseError)?;
        if h.len() != 64 {
            return Err(DigestParseError);
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(h, &mut out).map_err(|_| DigestParseError)?;
        Ok(Digest32(out))
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Digest32 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Digest32 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

pub fn keccak256(data: &[u8]) -> Digest32 {
    Digest32(Keccak256::digest(data).into())
}

#[derive(Debug, thiserror::Error)]
pub enum KeyError {
    #[error("seed reduces to zero modulo the curve order")]
    InvalidSeed,
    #[error("secret key must be a scalar in [1, n-1]")]
    InvalidSecret,
    #[error("key file must hold 0x followed by 64 hex characters")]
    MalformedKeyFile,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A secp256k1 signing key together with its derived address.
#[derive(Clone)]
pub struct Keypair {
    signing: SigningKey,
    address: SemanticAddress,
}

impl fmt::Debug for Keypair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Keypair").field("address", &self.address).finish_non_exhaustive()
    }
}

impl Keypair {
    /// Deterministic key from a 32-byte seed reduced modulo the curve order.
    pub fn from_seed(seed: &[u8; 32]) -> Result<Self, KeyError> {
        let scalar = <Scalar as Reduce<U256>>::reduce_bytes(&FieldBytes::from(*seed));
        if bool::from(scalar.is_zero()) {
            return Err(KeyError::InvalidSeed);
        }
        Self::from_secret(&scalar.to_bytes().into())
    }

    /// Key from a secret that must already lie in `[1, n-1]`.
    pub fn from_secret(secret: &[u8; 32]) -> Result<Self, KeyError> {
        let signing =
            SigningKey::from_bytes(&FieldBytes::from(*secret)).map_err(|_| KeyError::InvalidSecret)?;
        let address = address_of(signing.verifying_key());
        Ok(Keypair { signing, address })
    }

    pub fn address(&self) -> SemanticAddress {
        self.address
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.signing.to_bytes().into()
    }

    /// Uncompressed public key without the `0x04` prefix (x ‖ y).
    pub fn public_key(&self) -> [u8; 64] {
        let point = self.signing.verifying_key().to_encoded_point(false);
        let mut out = [0u8; 64];
        out.copy_from_slice(&point.as_bytes()[1..]);
        out
    }

    pub fn read_key_file(path: &Path) -> Result<Self, KeyError> {
        let text = std::fs::read_to_string(path)?;
        let h = text.trim().strip_prefix("0x").ok_or(KeyError::MalformedKeyFile)?;
        let mut secret = [0u8; 32];
        if h.len() != 64 {
            return Err(KeyError::MalformedKeyFile);
        }
        hex::decode_to_slice(h, &mut secret).map_err(|_| KeyError::MalformedKeyFile)?;
        Self::from_secret(&secret)
    }

    /// Write the secret as a single `0x`-hex line, readable by the owner only.
    pub fn write_key_file(&self, path: &Path) -> Result<(), KeyError> {
        use std::io::Write;
        let mut opts = std::fs::OpenOptions::new();
        opts.write(true).create(true).truncate(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        let mut f = opts.open(path)?;
        writeln!(f, "0x{}", hex::encode(self.secret_bytes()))?;
        Ok(())
    }
}

/// Convenience wrapper matching the `keygen` operation.
pub fn keygen(seed: &[u8; 32]) -> Result<Keypair, KeyError> {
    Keypair::from_seed(seed)
}

fn address_of(key: &VerifyingKey) -> SemanticAddress {
    let point = key.to_encoded_point(false);
    let hash = keccak256(&point.as_bytes()[1..]);
    let mut out = [0u8; 20];
    out.copy_from_slice(&hash.0[12..]);
    SemanticAddress(out)
}

/// `r ‖ s ‖ v` with `v` the recovery id (0 or 1).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignatureBytes {
    pub r: [u8; 32],
    pub s: [u8; 32],
    pub recovery_id: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignatureError {
    #[error("signature must be 65 bytes (130 hex characters), got {0} hex characters")]
    WrongLength(usize),
    #[error("signature is not valid hex")]
    NotHex,
    #[error("r must be in [1, n-1]")]
    ROutOfRange,
    #[error("s must be in [1, n-1]")]
    SOutOfRange,
    #[error("s is in the upper half of the curve order")]
    HighS,
    #[error("recovery id must be 0 or 1, got {0}")]
    BadRecoveryId(u8),
}

impl SignatureBytes {
    pub fn to_bytes(&self) -> [u8; 65] {
        let mut out = [0u8; 65];
        out[..32].copy_from_slice(&self.r);
        out[32..64].copy_from_slice(&self.s);
        out[64] = self.recovery_id;
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, SignatureError> {
        if b.len() != 65 {
            return Err(SignatureError::WrongLength(b.len() * 2));
        }
        let mut r = [0u8; 32];
        let mut s = [0u8; 32];
        r.copy_from_slice(&b[..32]);
        s.copy_from_slice(&b[32..64]);
        Ok(SignatureBytes { r, s, recovery_id: b[64] })
    }

    /// Parse `0x`-prefixed hex. Range checks happen in [`verify_signature`].
    pub fn from_hex(text: &str) -> Result<Self, SignatureError> {
        let h = text.strip_prefix("0x").ok_or(SignatureError::NotHex)?;
        if h.len() != 130 {
            return Err(SignatureError::WrongLength(h.len()));
        }
        let bytes = hex::decode(h).map_err(|_| SignatureError::NotHex)?;
        Self::from_bytes(&bytes)
    }

    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.to_bytes()))
    }

    fn checked(&self) -> Result<(Signature, RecoveryId), SignatureError> {
        let r = nonzero_scalar(&self.r).ok_or(SignatureError::ROutOfRange)?;
        let s = nonzero_scalar(&self.s).ok_or(SignatureError::SOutOfRange)?;
        if bool::from(s.is_high()) {
            return Err(SignatureError::HighS);
        }
        if self.recovery_id > 1 {
            return Err(SignatureError::BadRecoveryId(self.recovery_id));
        }
        let sig = Signature::from_scalars(r.to_bytes(), s.to_bytes()).map_err(|_| SignatureError::ROutOfRange)?;
        let recid = RecoveryId::from_byte(self.recovery_id).ok_or(SignatureError::BadRecoveryId(self.recovery_id))?;
        Ok((sig, recid))
    }
}

fn nonzero_scalar(bytes: &[u8; 32]) -> Option<Scalar> {
    let s: Option<Scalar> = Scalar::from_repr(FieldBytes::from(*bytes)).into();
    s.filter(|s| !bool::from(s.is_zero()))
}

impl fmt::Display for SignatureBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for SignatureBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Sign a 32-byte digest. The nonce follows RFC 6979, so equal inputs give
/// equal signatures.
pub fn sign_digest(key: &Keypair, digest: &Digest32) -> SignatureBytes {
    let (sig, recid) = key
        .signing
        .sign_prehash_recoverable(&digest.0)
        .expect("32-byte prehash is always signable");
    // k256 already emits low-s, but keep the invariant explicit.
    let (sig, recid) = match sig.normalize_s() {
        Some(low) => (low, RecoveryId::new(!recid.is_y_odd(), recid.is_x_reduced())),
        None => (sig, recid),
    };
    let (r, s) = sig.split_bytes();
    SignatureBytes {
        r: r.into(),
        s: s.into(),
        recovery_id: recid.to_byte(),
    }
}

/// Recover the signer of `digest` and compare it with `expected`.
///
/// Structurally invalid signatures are an error; a well-formed signature by a
/// different key, or one whose point cannot be recovered, is a clean `false`.
pub fn verify_signature(
    digest: &Digest32,
    sig: &SignatureBytes,
    expected: &SemanticAddress,
) -> Result<bool, SignatureError> {
    Ok(recover_signer(digest, sig)?.is_some_and(|a| &a == expected))
}

/// The address that produced `sig` over `digest`, if recovery succeeds.
pub fn recover_signer(digest: &Digest32, sig: &SignatureBytes) -> Result<Option<SemanticAddress>, SignatureError> {
    let (sig, recid) = sig.checked()?;
    Ok(VerifyingKey::recover_from_prehash(&digest.0, &sig, recid)
        .ok()
        .map(|vk| address_of(&vk)))
}
