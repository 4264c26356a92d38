use super::{BackendId, GroupError, PairingBackend};
use bls12_381::{G1Affine, G1Projective, G2Affine, G2Projective, Gt, Scalar};
use ff::Field;
use rand::RngCore;
use sha2::{Digest, Sha512};

pub const CURVE_ID: &str = "bls12-381";

const SHARE_COORD_DOMAIN: &[u8] = b"timevault/share-coordinate/v1";

/// BLS12-381 backend.
///
/// Public keys and shares live in G1 (48-byte compressed), the second
/// commitment lives in G2 (96-byte compressed). The sharing polynomial is
/// interpolated over the scalar field, so exponents and coordinates share a
/// representation; share ordinates are derived by hashing the compressed
/// share into the scalar field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Bls12381Group;

impl Bls12381Group {
    pub fn new(curve_id: &str) -> Result<Self, GroupError> {
        if curve_id == CURVE_ID {
            Ok(Bls12381Group)
        } else {
            Err(GroupError::UnsupportedCurve(curve_id.to_string()))
        }
    }
}

fn scalar_to_be(a: &Scalar) -> Vec<u8> {
    let mut bytes = a.to_bytes();
    bytes.reverse();
    bytes.to_vec()
}

fn scalar_from_be_strict(bytes: &[u8]) -> Result<Scalar, GroupError> {
    if bytes.len() != 32 {
        return Err(GroupError::WrongEncodingLength { expected: 32, got: bytes.len() });
    }
    let mut le = [0u8; 32];
    for (dst, src) in le.iter_mut().zip(bytes.iter().rev()) {
        *dst = *src;
    }
    Option::<Scalar>::from(Scalar::from_bytes(&le)).ok_or(GroupError::MalformedScalar)
}

impl PairingBackend for Bls12381Group {
    type Scalar = Scalar;
    type G1 = G1Affine;
    type G2 = G2Affine;
    type Gt = Gt;
    type Coord = Scalar;

    fn id(&self) -> BackendId {
        BackendId::Curve
    }

    fn g1(&self) -> G1Affine {
        G1Affine::generator()
    }

    fn g2(&self) -> G2Affine {
        G2Affine::generator()
    }

    fn random_scalar(&self, rng: &mut dyn RngCore) -> Scalar {
        loop {
            let s = Scalar::random(&mut *rng);
            if !bool::from(s.is_zero()) {
                return s;
            }
        }
    }

    fn scalar_from_u64(&self, v: u64) -> Scalar {
        Scalar::from(v)
    }

    fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a + b
    }

    fn scalar_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a * b
    }

    fn scalar_is_zero(&self, a: &Scalar) -> bool {
        bool::from(a.is_zero())
    }

    fn scalar_to_bytes(&self, a: &Scalar) -> Vec<u8> {
        scalar_to_be(a)
    }

    fn scalar_from_bytes(&self, bytes: &[u8]) -> Result<Scalar, GroupError> {
        scalar_from_be_strict(bytes)
    }

    fn pow_g1(&self, base: &G1Affine, e: &Scalar) -> G1Affine {
        G1Affine::from(G1Projective::from(base) * e)
    }

    fn pow_g2(&self, base: &G2Affine, e: &Scalar) -> G2Affine {
        G2Affine::from(G2Projective::from(base) * e)
    }

    fn mul_g1(&self, a: &G1Affine, b: &G1Affine) -> G1Affine {
        G1Affine::from(G1Projective::from(a) + G1Projective::from(b))
    }

    fn pairing(&self, p: &G1Affine, q: &G2Affine) -> Gt {
        bls12_381::pairing(p, q)
    }

    fn g1_to_bytes(&self, el: &G1Affine) -> Vec<u8> {
        el.to_compressed().to_vec()
    }

    fn g1_from_bytes(&self, bytes: &[u8]) -> Result<G1Affine, GroupError> {
        let arr: [u8; 48] = bytes
            .try_into()
            .map_err(|_| GroupError::WrongEncodingLength { expected: 48, got: bytes.len() })?;
        Option::<G1Affine>::from(G1Affine::from_compressed(&arr)).ok_or(GroupError::MalformedElement)
    }

    fn g2_to_bytes(&self, el: &G2Affine) -> Vec<u8> {
        el.to_compressed().to_vec()
    }

    fn g2_from_bytes(&self, bytes: &[u8]) -> Result<G2Affine, GroupError> {
        let arr: [u8; 96] = bytes
            .try_into()
            .map_err(|_| GroupError::WrongEncodingLength { expected: 96, got: bytes.len() })?;
        Option::<G2Affine>::from(G2Affine::from_compressed(&arr)).ok_or(GroupError::MalformedElement)
    }

    fn coord_width(&self) -> usize {
        32
    }

    fn coord_from_u64(&self, v: u64) -> Scalar {
        Scalar::from(v)
    }

    fn random_coord(&self, rng: &mut dyn RngCore) -> Scalar {
        self.random_scalar(rng)
    }

    fn coord_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a + b
    }

    fn coord_sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a - b
    }

    fn coord_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a * b
    }

    fn coord_inv(&self, a: &Scalar) -> Option<Scalar> {
        Option::<Scalar>::from(a.invert())
    }

    fn coord_to_bytes(&self, a: &Scalar) -> Vec<u8> {
        scalar_to_be(a)
    }

    fn coord_from_bytes(&self, bytes: &[u8]) -> Result<Scalar, GroupError> {
        scalar_from_be_strict(bytes)
    }

    fn coord_reduce_bytes(&self, bytes: &[u8]) -> Result<Scalar, GroupError> {
        if bytes.len() != 32 {
            return Err(GroupError::WrongEncodingLength { expected: 32, got: bytes.len() });
        }
        let mut wide = [0u8; 64];
        for (dst, src) in wide.iter_mut().zip(bytes.iter().rev()) {
            *dst = *src;
        }
        Ok(Scalar::from_bytes_wide(&wide))
    }

    fn share_to_coord(&self, share: &G1Affine) -> Scalar {
        let mut hasher = Sha512::new();
        hasher.update(SHARE_COORD_DOMAIN);
        hasher.update(share.to_compressed());
        let digest = hasher.finalize();
        let mut wide = [0u8; 64];
        wide.copy_from_slice(&digest);
        Scalar::from_bytes_wide(&wide)
    }
}
