//! Threshold time-lock release of an encrypted message.
//!
//! The client picks a symmetric key `k` and a blinding exponent `r`,
//! encrypts the message under `k`, and raises every holder's public key to
//! `r`, producing one share per holder. A polynomial through `(0, k)` and
//! the first `threshold - 1` share coordinates carries the key; holders at
//! or above the threshold index get a public mask binding their share to
//! the polynomial. Each holder can later recompute its share from the
//! broadcast commitment `g1^r` alone, and anyone can pair-check a published
//! share against the matching public key before using it. Any `threshold`
//! verified shares reconstruct `k`.

mod cipher;
mod poly;
pub mod wire;

pub use cipher::{decrypt_message, encrypt_message, TAG_LEN};
pub use poly::{lagrange_interpolate, poly_eval, Polynomial};

use crate::group::{BackendId, GroupError, PairingBackend};
use rand::RngCore;
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimelockError {
    #[error("threshold {threshold} invalid for {holders} holders")]
    InvalidThreshold { threshold: u32, holders: u32 },
    #[error("two holders share a public key")]
    DuplicateHolderKey,
    #[error("k and r must be nonzero")]
    ZeroExponent,
    #[error("holder index {index} outside 1..={holders}")]
    IndexOutOfRange { index: u32, holders: u32 },
    #[error("need {required} shares, got {provided}")]
    NotEnoughShares { required: u32, provided: u32 },
    #[error("share index {0} supplied twice")]
    DuplicateShareIndex(u32),
    #[error("share {0} failed verification")]
    InvalidShareIncluded(u32),
    #[error("request carries no mask for index {0}")]
    MissingMask(u32),
    #[error("expected {expected} public keys, got {got}")]
    WrongHolderCount { expected: u32, got: u32 },
    #[error("ciphertext failed authentication")]
    AuthenticationFailed,
    #[error("interpolation needs at least one point")]
    NoPoints,
    #[error("two interpolation points share an x coordinate")]
    DuplicateXCoordinate,
    #[error("field is not valid hex")]
    MalformedHex,
    #[error("expected {expected} backend, got {got}")]
    WrongBackend { expected: BackendId, got: BackendId },
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyPair<B: PairingBackend> {
    pub index: u32,
    pub sk: B::Scalar,
    pub pk: B::G1,
}

impl<B: PairingBackend> KeyPair<B> {
    pub fn from_sk(backend: &B, sk: B::Scalar, index: u32) -> Self {
        let pk = backend.pow_g1(&backend.g1(), &sk);
        KeyPair { index, sk, pk }
    }
}

/// Fresh keypair with a uniform secret exponent in `[1, order)`.
pub fn keygen<B: PairingBackend>(backend: &B, rng: &mut dyn RngCore, index: u32) -> KeyPair<B> {
    KeyPair::from_sk(backend, backend.random_scalar(rng), index)
}

/// Public mask for holder `index`: the polynomial value at `index` XORed
/// with the fixed-width encoding of that holder's share coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub index: u32,
    pub bytes: Vec<u8>,
}

/// Everything the client broadcasts. Holder indices run from 1; indices
/// `threshold..=holder_count` each carry a mask, so `masks` always holds
/// `holder_count - threshold + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelockRequest<B: PairingBackend> {
    pub request_id: String,
    pub decrypt_time: u64,
    pub threshold: u32,
    pub holder_count: u32,
    pub ciphertext: Vec<u8>,
    pub commitment_a: B::G1,
    pub commitment_b: B::G2,
    pub masks: Vec<Mask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecretShare<B: PairingBackend> {
    pub holder_index: u32,
    pub value: B::G1,
}

/// Outcome of checking one published share against the request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareVerdict {
    /// Share matches the holder's public key under the commitments.
    Valid,
    /// Share does not match, and the commitments are mutually consistent:
    /// the submitting holder is at fault.
    InvalidShare,
    /// The two commitments were built from different exponents, so every
    /// honest share fails the check: the client is at fault and no holder
    /// can be blamed.
    DishonestClient,
}

fn xor_bytes(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b.iter()).map(|(x, y)| x ^ y).collect()
}

/// Builds the broadcast bundle for one message.
pub fn build_request<B: PairingBackend>(
    backend: &B,
    k: &B::Coord,
    r: &B::Scalar,
    message: &[u8],
    decrypt_time: u64,
    holder_pks: &[B::G1],
    threshold: u32,
) -> Result<TimelockRequest<B>, TimelockError> {
    let holder_count = holder_pks.len() as u32;
    if holder_count == 0 || threshold == 0 || threshold > holder_count {
        return Err(TimelockError::InvalidThreshold { threshold, holders: holder_count });
    }
    if backend.coord_is_zero(k) || backend.scalar_is_zero(r) {
        return Err(TimelockError::ZeroExponent);
    }
    let mut seen = HashSet::new();
    for pk in holder_pks {
        if !seen.insert(backend.g1_to_bytes(pk)) {
            return Err(TimelockError::DuplicateHolderKey);
        }
    }

    let ciphertext = encrypt_message(backend, k, message);
    let coords: Vec<B::Coord> = holder_pks
        .iter()
        .map(|pk| backend.share_to_coord(&backend.pow_g1(pk, r)))
        .collect();

    let mut points = vec![(backend.coord_from_u64(0), k.clone())];
    for i in 1..threshold {
        points.push((backend.coord_from_u64(u64::from(i)), coords[i as usize - 1].clone()));
    }
    let poly = lagrange_interpolate(backend, &points)?;

    let masks = (threshold..=holder_count)
        .map(|i| {
            let at_i = poly_eval(backend, &poly, &backend.coord_from_u64(u64::from(i)));
            let pad = backend.coord_to_bytes(&at_i);
            let share_bytes = backend.coord_to_bytes(&coords[i as usize - 1]);
            Mask { index: i, bytes: xor_bytes(&pad, &share_bytes) }
        })
        .collect();

    let mut request = TimelockRequest {
        request_id: String::new(),
        decrypt_time,
        threshold,
        holder_count,
        ciphertext,
        commitment_a: backend.pow_g1(&backend.g1(), r),
        commitment_b: backend.pow_g2(&backend.g2(), r),
        masks,
    };
    request.request_id = wire::derive_request_id(&request.to_wire(backend));
    Ok(request)
}

/// A holder recomputes its share from the broadcast commitment alone.
pub fn derive_share<B: PairingBackend>(
    backend: &B,
    request: &TimelockRequest<B>,
    keypair: &KeyPair<B>,
) -> Result<SecretShare<B>, TimelockError> {
    if keypair.index == 0 || keypair.index > request.holder_count {
        return Err(TimelockError::IndexOutOfRange {
            index: keypair.index,
            holders: request.holder_count,
        });
    }
    Ok(SecretShare {
        holder_index: keypair.index,
        value: backend.pow_g1(&request.commitment_a, &keypair.sk),
    })
}

/// Pair-checks one published share against the holder's public key.
///
/// A failed check is attributed to the client whenever the two broadcast
/// commitments disagree with each other, because in that case no share a
/// holder could honestly derive would ever pass.
pub fn verify_share<B: PairingBackend>(
    backend: &B,
    share: &SecretShare<B>,
    holder_pk: &B::G1,
    request: &TimelockRequest<B>,
) -> ShareVerdict {
    let lhs = backend.pairing(&share.value, &backend.g2());
    let rhs = backend.pairing(holder_pk, &request.commitment_b);
    if lhs == rhs {
        return ShareVerdict::Valid;
    }
    let a_side = backend.pairing(&request.commitment_a, &backend.g2());
    let b_side = backend.pairing(&backend.g1(), &request.commitment_b);
    if a_side != b_side {
        ShareVerdict::DishonestClient
    } else {
        ShareVerdict::InvalidShare
    }
}

/// Rebuilds `k` from any `threshold` verified shares.
///
/// Every supplied share is re-verified; indices below the threshold
/// contribute their coordinate directly while the rest are unmasked first.
pub fn reconstruct_key<B: PairingBackend>(
    backend: &B,
    request: &TimelockRequest<B>,
    shares: &[SecretShare<B>],
    holder_pks: &[B::G1],
) -> Result<B::Coord, TimelockError> {
    if holder_pks.len() as u32 != request.holder_count {
        return Err(TimelockError::WrongHolderCount {
            expected: request.holder_count,
            got: holder_pks.len() as u32,
        });
    }
    if (shares.len() as u32) < request.threshold {
        return Err(TimelockError::NotEnoughShares {
            required: request.threshold,
            provided: shares.len() as u32,
        });
    }
    let mut seen = HashSet::new();
    for share in shares {
        if share.holder_index == 0 || share.holder_index > request.holder_count {
            return Err(TimelockError::IndexOutOfRange {
                index: share.holder_index,
                holders: request.holder_count,
            });
        }
        if !seen.insert(share.holder_index) {
            return Err(TimelockError::DuplicateShareIndex(share.holder_index));
        }
        let pk = &holder_pks[share.holder_index as usize - 1];
        if verify_share(backend, share, pk, request) != ShareVerdict::Valid {
            return Err(TimelockError::InvalidShareIncluded(share.holder_index));
        }
    }

    let mut ordered: Vec<&SecretShare<B>> = shares.iter().collect();
    ordered.sort_by_key(|s| s.holder_index);
    ordered.truncate(request.threshold as usize);

    let mut points = Vec::with_capacity(ordered.len());
    for share in ordered {
        let i = share.holder_index;
        let coord = backend.share_to_coord(&share.value);
        let y = if i < request.threshold {
            coord
        } else {
            let mask = request
                .masks
                .iter()
                .find(|m| m.index == i)
                .ok_or(TimelockError::MissingMask(i))?;
            backend.coord_reduce_bytes(&xor_bytes(&backend.coord_to_bytes(&coord), &mask.bytes))?
        };
        points.push((backend.coord_from_u64(u64::from(i)), y));
    }
    let poly = lagrange_interpolate(backend, &points)?;
    Ok(poly_eval(backend, &poly, &backend.coord_from_u64(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{Bls12381Group, ToyGroup};
    use itertools::Itertools;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn appendix_group() -> ToyGroup {
        ToyGroup::new(23, 11, None).unwrap()
    }

    fn appendix_keys(g: &ToyGroup) -> Vec<KeyPair<ToyGroup>> {
        [3u64, 4, 5, 6]
            .iter()
            .enumerate()
            .map(|(i, sk)| KeyPair::from_sk(g, *sk, i as u32 + 1))
            .collect()
    }

    fn appendix_request(g: &ToyGroup) -> (TimelockRequest<ToyGroup>, Vec<u64>) {
        let keys = appendix_keys(g);
        let pks: Vec<u64> = keys.iter().map(|kp| kp.pk).collect();
        let request = build_request(g, &22, &7, b"meet at dawn", 1_700_000_000, &pks, 3).unwrap();
        (request, pks)
    }

    #[test]
    fn keygen_matches_worked_example() {
        let g = appendix_group();
        let keys = appendix_keys(&g);
        assert_eq!(keys.iter().map(|kp| kp.pk).collect::<Vec<_>>(), vec![20, 13, 5, 9]);
        assert_eq!(KeyPair::from_sk(&g, 1, 1).pk, 11);
    }

    #[test]
    fn random_keygen_stays_in_range() {
        let g = appendix_group();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for i in 0..200 {
            let kp = keygen(&g, &mut rng, i + 1);
            assert!(kp.sk >= 1 && kp.sk < 22);
            assert_eq!(kp.pk, g.pow_g1(&11, &kp.sk));
        }
    }

    #[test]
    fn request_matches_worked_example() {
        let g = appendix_group();
        let (request, _) = appendix_request(&g);
        assert_eq!(request.commitment_a, 7);
        assert_eq!(request.commitment_b, 7);
        assert_eq!(request.threshold, 3);
        assert_eq!(request.holder_count, 4);
        assert_eq!(
            request.masks,
            vec![Mask { index: 3, bytes: vec![24] }, Mask { index: 4, bytes: vec![17] }]
        );
    }

    #[test]
    fn share_derivation_matches_worked_example() {
        let g = appendix_group();
        let (request, _) = appendix_request(&g);
        let derived: Vec<u64> = appendix_keys(&g)
            .iter()
            .map(|kp| derive_share(&g, &request, kp).unwrap().value)
            .collect();
        assert_eq!(derived, vec![21, 9, 17, 4]);
    }

    #[test]
    fn out_of_range_holder_indices_are_rejected() {
        let g = appendix_group();
        let (request, _) = appendix_request(&g);
        for bad in [0u32, 5] {
            let kp = KeyPair { index: bad, ..KeyPair::from_sk(&g, 3, 1) };
            assert_eq!(
                derive_share(&g, &request, &kp).unwrap_err(),
                TimelockError::IndexOutOfRange { index: bad, holders: 4 }
            );
        }
    }

    #[test]
    fn every_honest_share_verifies() {
        let g = appendix_group();
        let (request, pks) = appendix_request(&g);
        for kp in appendix_keys(&g) {
            let share = derive_share(&g, &request, &kp).unwrap();
            assert_eq!(
                verify_share(&g, &share, &pks[kp.index as usize - 1], &request),
                ShareVerdict::Valid
            );
        }
    }

    #[test]
    fn tampered_share_blames_the_holder() {
        let g = appendix_group();
        let (request, pks) = appendix_request(&g);
        let share = SecretShare { holder_index: 1, value: 20 };
        assert_eq!(verify_share(&g, &share, &pks[0], &request), ShareVerdict::InvalidShare);
    }

    #[test]
    fn mismatched_commitments_blame_the_client() {
        let g = appendix_group();
        let (mut request, pks) = appendix_request(&g);
        request.commitment_b = g.pow_g2(&g.g2(), &5);
        assert_eq!(g.pairing(&request.commitment_a, &g.g2()), 7);
        assert_eq!(g.pairing(&g.g1(), &request.commitment_b), 5);
        for kp in appendix_keys(&g) {
            let share = derive_share(&g, &request, &kp).unwrap();
            assert_eq!(
                verify_share(&g, &share, &pks[kp.index as usize - 1], &request),
                ShareVerdict::DishonestClient
            );
        }
    }

    #[test]
    fn reconstruction_matches_worked_example() {
        let g = appendix_group();
        let (request, pks) = appendix_request(&g);
        let shares: Vec<SecretShare<ToyGroup>> = appendix_keys(&g)
            .iter()
            .map(|kp| derive_share(&g, &request, kp).unwrap())
            .collect();
        for subset in shares.iter().cloned().combinations(3) {
            assert_eq!(reconstruct_key(&g, &request, &subset, &pks).unwrap(), 22);
        }
        assert_eq!(reconstruct_key(&g, &request, &shares, &pks).unwrap(), 22);
    }

    #[test]
    fn reconstruction_rejects_bad_inputs() {
        let g = appendix_group();
        let (request, pks) = appendix_request(&g);
        let shares: Vec<SecretShare<ToyGroup>> = appendix_keys(&g)
            .iter()
            .map(|kp| derive_share(&g, &request, kp).unwrap())
            .collect();

        assert_eq!(
            reconstruct_key(&g, &request, &shares[..2], &pks).unwrap_err(),
            TimelockError::NotEnoughShares { required: 3, provided: 2 }
        );

        let dup = vec![shares[0].clone(), shares[0].clone(), shares[1].clone()];
        assert_eq!(
            reconstruct_key(&g, &request, &dup, &pks).unwrap_err(),
            TimelockError::DuplicateShareIndex(1)
        );

        let mut tampered = shares.clone();
        tampered[1].value = g.mul_g1(&tampered[1].value, &g.g1());
        assert_eq!(
            reconstruct_key(&g, &request, &tampered, &pks).unwrap_err(),
            TimelockError::InvalidShareIncluded(2)
        );

        let mut zero_index = shares.clone();
        zero_index[0].holder_index = 0;
        assert_eq!(
            reconstruct_key(&g, &request, &zero_index, &pks).unwrap_err(),
            TimelockError::IndexOutOfRange { index: 0, holders: 4 }
        );
    }

    #[test]
    fn full_round_trip_decrypts_the_message() {
        let g = appendix_group();
        let (request, pks) = appendix_request(&g);
        let shares: Vec<SecretShare<ToyGroup>> = appendix_keys(&g)
            .iter()
            .skip(1)
            .map(|kp| derive_share(&g, &request, kp).unwrap())
            .collect();
        let k = reconstruct_key(&g, &request, &shares, &pks).unwrap();
        assert_eq!(decrypt_message(&g, &k, &request.ciphertext).unwrap(), b"meet at dawn");
    }

    #[test]
    fn threshold_equal_to_holder_count_still_masks_the_last_share() {
        let g = appendix_group();
        let keys = appendix_keys(&g);
        let pks: Vec<u64> = keys.iter().map(|kp| kp.pk).collect();
        let request = build_request(&g, &10, &7, b"x", 50, &pks, 4).unwrap();
        assert_eq!(request.masks.len(), 1);
        assert_eq!(request.masks[0].index, 4);
        let shares: Vec<SecretShare<ToyGroup>> =
            keys.iter().map(|kp| derive_share(&g, &request, kp).unwrap()).collect();
        assert_eq!(reconstruct_key(&g, &request, &shares, &pks).unwrap(), 10);
    }

    #[test]
    fn build_request_validates_inputs() {
        let g = appendix_group();
        let pks: Vec<u64> = appendix_keys(&g).iter().map(|kp| kp.pk).collect();
        assert_eq!(
            build_request(&g, &22, &7, b"", 0, &pks, 5).unwrap_err(),
            TimelockError::InvalidThreshold { threshold: 5, holders: 4 }
        );
        assert_eq!(
            build_request(&g, &22, &7, b"", 0, &pks, 0).unwrap_err(),
            TimelockError::InvalidThreshold { threshold: 0, holders: 4 }
        );
        assert_eq!(
            build_request(&g, &0, &7, b"", 0, &pks, 3).unwrap_err(),
            TimelockError::ZeroExponent
        );
        assert_eq!(
            build_request(&g, &22, &0, b"", 0, &pks, 3).unwrap_err(),
            TimelockError::ZeroExponent
        );
        let dup = vec![pks[0], pks[0], pks[1]];
        assert_eq!(
            build_request(&g, &22, &7, b"", 0, &dup, 2).unwrap_err(),
            TimelockError::DuplicateHolderKey
        );
    }

    #[test]
    fn wire_round_trip_preserves_the_request() {
        let g = appendix_group();
        let (request, _) = appendix_request(&g);
        let wire = request.to_wire(&g);
        assert_eq!(wire.request_id, request.request_id);
        let json = wire::to_canonical_json(&wire);
        let parsed: wire::RequestWire = serde_json::from_str(&json).unwrap();
        assert_eq!(TimelockRequest::from_wire(&g, &parsed).unwrap(), request);
    }

    #[test]
    fn curve_backend_round_trip() {
        let b = Bls12381Group::default();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let keys: Vec<KeyPair<Bls12381Group>> = (1..=4).map(|i| keygen(&b, &mut rng, i)).collect();
        let pks: Vec<_> = keys.iter().map(|kp| kp.pk).collect();
        let k = b.random_coord(&mut rng);
        let r = b.random_scalar(&mut rng);
        let request = build_request(&b, &k, &r, b"curve message", 1_000, &pks, 3).unwrap();
        let shares: Vec<SecretShare<Bls12381Group>> =
            keys.iter().map(|kp| derive_share(&b, &request, kp).unwrap()).collect();
        for (share, kp) in shares.iter().zip(&keys) {
            assert_eq!(
                verify_share(&b, share, &pks[kp.index as usize - 1], &request),
                ShareVerdict::Valid
            );
        }
        let rebuilt = reconstruct_key(&b, &request, &shares[1..], &pks).unwrap();
        assert_eq!(rebuilt, k);
        assert_eq!(decrypt_message(&b, &rebuilt, &request.ciphertext).unwrap(), b"curve message");

        let mut framed = request.clone();
        framed.commitment_b = b.pow_g2(&b.g2(), &b.random_scalar(&mut rng));
        assert_eq!(
            verify_share(&b, &shares[0], &pks[0], &framed),
            ShareVerdict::DishonestClient
        );
    }
}
