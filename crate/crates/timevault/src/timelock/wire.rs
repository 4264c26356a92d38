use super::{KeyPair, Mask, TimelockError, TimelockRequest};
use crate::group::{BackendId, PairingBackend};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Serializes with sorted keys, two-space indentation, and a trailing
/// newline, so equal values always produce identical bytes.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let tree = serde_json::to_value(value).expect("value serializes to JSON");
    let mut out = serde_json::to_string_pretty(&tree).expect("JSON tree renders");
    out.push('\n');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskWire {
    pub alpha_hex: String,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestWire {
    pub backend: BackendId,
    pub ciphertext_hex: String,
    pub commitment_a_hex: String,
    pub commitment_b_hex: String,
    pub decrypt_time: u64,
    pub holder_count: u32,
    pub masks: Vec<MaskWire>,
    pub request_id: String,
    pub threshold: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPairWire {
    pub backend: BackendId,
    pub index: u32,
    pub pk_hex: String,
    pub sk_hex: String,
}

/// Public output of key generation: the group description plus every
/// holder's public key, indexed from one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestWire {
    pub backend: BackendId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_id: Option<String>,
    pub holder_pks_hex: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub toy_generator: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub toy_modulus: Option<u64>,
}

fn decode_hex(field: &str) -> Result<Vec<u8>, TimelockError> {
    hex::decode(field).map_err(|_| TimelockError::MalformedHex)
}

/// Request id: first 16 hex digits of the SHA-256 of the canonical wire
/// encoding with the id field blanked.
pub fn derive_request_id(wire: &RequestWire) -> String {
    let mut blank = wire.clone();
    blank.request_id = String::new();
    let digest = Sha256::digest(to_canonical_json(&blank).as_bytes());
    hex::encode(&digest[..8])
}

impl<B: PairingBackend> TimelockRequest<B> {
    pub fn to_wire(&self, backend: &B) -> RequestWire {
        RequestWire {
            backend: backend.id(),
            ciphertext_hex: hex::encode(&self.ciphertext),
            commitment_a_hex: hex::encode(backend.g1_to_bytes(&self.commitment_a)),
            commitment_b_hex: hex::encode(backend.g2_to_bytes(&self.commitment_b)),
            decrypt_time: self.decrypt_time,
            holder_count: self.holder_count,
            masks: self
                .masks
                .iter()
                .map(|m| MaskWire { alpha_hex: hex::encode(&m.bytes), index: m.index })
                .collect(),
            request_id: self.request_id.clone(),
            threshold: self.threshold,
        }
    }

    pub fn from_wire(backend: &B, wire: &RequestWire) -> Result<Self, TimelockError> {
        if wire.backend != backend.id() {
            return Err(TimelockError::WrongBackend { expected: backend.id(), got: wire.backend });
        }
        let masks = wire
            .masks
            .iter()
            .map(|m| Ok(Mask { index: m.index, bytes: decode_hex(&m.alpha_hex)? }))
            .collect::<Result<Vec<_>, TimelockError>>()?;
        Ok(TimelockRequest {
            request_id: wire.request_id.clone(),
            decrypt_time: wire.decrypt_time,
            threshold: wire.threshold,
            holder_count: wire.holder_count,
            ciphertext: decode_hex(&wire.ciphertext_hex)?,
            commitment_a: backend.g1_from_bytes(&decode_hex(&wire.commitment_a_hex)?)?,
            commitment_b: backend.g2_from_bytes(&decode_hex(&wire.commitment_b_hex)?)?,
            masks,
        })
    }
}

impl<B: PairingBackend> KeyPair<B> {
    pub fn to_wire(&self, backend: &B) -> KeyPairWire {
        KeyPairWire {
            backend: backend.id(),
            index: self.index,
            pk_hex: hex::encode(backend.g1_to_bytes(&self.pk)),
            sk_hex: hex::encode(backend.scalar_to_bytes(&self.sk)),
        }
    }

    pub fn from_wire(backend: &B, wire: &KeyPairWire) -> Result<Self, TimelockError> {
        if wire.backend != backend.id() {
            return Err(TimelockError::WrongBackend { expected: backend.id(), got: wire.backend });
        }
        let sk = backend.scalar_from_bytes(&decode_hex(&wire.sk_hex)?)?;
        let pk = backend.g1_from_bytes(&decode_hex(&wire.pk_hex)?)?;
        Ok(KeyPair { index: wire.index, sk, pk })
    }
}

/// Decodes a manifest's public keys in holder order.
pub fn manifest_pks<B: PairingBackend>(
    backend: &B,
    manifest: &ManifestWire,
) -> Result<Vec<B::G1>, TimelockError> {
    if manifest.backend != backend.id() {
        return Err(TimelockError::WrongBackend { expected: backend.id(), got: manifest.backend });
    }
    manifest
        .holder_pks_hex
        .iter()
        .map(|h| Ok(backend.g1_from_bytes(&decode_hex(h)?)?))
        .collect()
}
