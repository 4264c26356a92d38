use super::TimelockError;
use crate::group::PairingBackend;
use sha2::{Digest, Sha256};

const STREAM_DOMAIN: &[u8] = b"timevault/stream/v1";
const MAC_DOMAIN: &[u8] = b"timevault/mac/v1";

/// Authentication tag length appended to every ciphertext.
pub const TAG_LEN: usize = 32;

fn keystream_block(key: &[u8], counter: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(STREAM_DOMAIN);
    hasher.update(key);
    hasher.update(counter.to_be_bytes());
    hasher.finalize().into()
}

fn mac(key: &[u8], body: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(MAC_DOMAIN);
    hasher.update(key);
    hasher.update(body);
    hasher.finalize().into()
}

fn apply_keystream(key: &[u8], data: &mut [u8]) {
    for (counter, chunk) in data.chunks_mut(32).enumerate() {
        let block = keystream_block(key, counter as u64);
        for (b, k) in chunk.iter_mut().zip(block.iter()) {
            *b ^= k;
        }
    }
}

/// Symmetric encryption under the shared key: hash-derived keystream plus
/// an appended integrity tag, `TAG_LEN` bytes of fixed overhead.
pub fn encrypt_message<B: PairingBackend>(backend: &B, key: &B::Coord, plaintext: &[u8]) -> Vec<u8> {
    let key_bytes = backend.coord_to_bytes(key);
    let mut body = plaintext.to_vec();
    apply_keystream(&key_bytes, &mut body);
    let tag = mac(&key_bytes, &body);
    body.extend_from_slice(&tag);
    body
}

/// Fails closed: any bit flip in body or tag is rejected before a single
/// plaintext byte is produced.
pub fn decrypt_message<B: PairingBackend>(
    backend: &B,
    key: &B::Coord,
    sealed: &[u8],
) -> Result<Vec<u8>, TimelockError> {
    if sealed.len() < TAG_LEN {
        return Err(TimelockError::AuthenticationFailed);
    }
    let key_bytes = backend.coord_to_bytes(key);
    let (body, tag) = sealed.split_at(sealed.len() - TAG_LEN);
    if mac(&key_bytes, body) != tag {
        return Err(TimelockError::AuthenticationFailed);
    }
    let mut plain = body.to_vec();
    apply_keystream(&key_bytes, &mut plain);
    Ok(plain)
}
