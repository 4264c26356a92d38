//! Pluggable pairing-friendly group arithmetic.
//!
//! Two interchangeable backends implement [`PairingBackend`]: a tiny
//! multiplicative group modulo a small prime whose pairing is evaluated by
//! exhaustive discrete logarithm, and BLS12-381 for realistic key and share
//! sizes. The toy backend offers zero security; it exists so that every
//! identity the protocol relies on can be re-checked by hand.

mod bls;
mod toy;

pub use bls::{Bls12381Group, CURVE_ID};
pub use toy::{ToyGroup, TOY_PAIRING_BOUND};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use thiserror::Error;

/// Which arithmetic backend a key, request, or ledger was built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendId {
    Toy,
    Curve,
}

impl std::fmt::Display for BackendId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendId::Toy => f.write_str("toy"),
            BackendId::Curve => f.write_str("curve"),
        }
    }
}

impl std::str::FromStr for BackendId {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, GroupError> {
        match s {
            "toy" => Ok(BackendId::Toy),
            "curve" => Ok(BackendId::Curve),
            other => Err(GroupError::UnsupportedCurve(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("modulus {0} is not an odd prime")]
    InvalidModulus(u64),
    #[error("toy modulus {0} exceeds the exhaustive-pairing bound 2^20")]
    ToyGroupTooLarge(u64),
    #[error("generator order does not match the group order")]
    NonGenerator,
    #[error("unsupported curve id {0:?}")]
    UnsupportedCurve(String),
    #[error("bytes do not encode a canonical group element")]
    MalformedElement,
    #[error("bytes do not encode a canonical field value")]
    MalformedScalar,
    #[error("expected {expected} bytes, got {got}")]
    WrongEncodingLength { expected: usize, got: usize },
}

/// Group arithmetic required by the time-lock protocol.
///
/// `Scalar` is an exponent modulo the group order; `Coord` is an element of
/// the field the sharing polynomial is interpolated over. The two domains
/// coincide on the curve backend. On the toy backend exponents live mod the
/// generator's order while interpolation runs mod the group modulus, so a
/// share's raw value can serve directly as a polynomial ordinate.
pub trait PairingBackend: Clone + Send + Sync {
    type Scalar: Clone + PartialEq + Debug + Send + Sync;
    type G1: Clone + PartialEq + Debug + Send + Sync;
    type G2: Clone + PartialEq + Debug + Send + Sync;
    type Gt: Clone + PartialEq + Debug + Send + Sync;
    type Coord: Clone + PartialEq + Debug + Send + Sync;

    fn id(&self) -> BackendId;
    fn g1(&self) -> Self::G1;
    fn g2(&self) -> Self::G2;

    /// Uniform exponent in `[1, order)`.
    fn random_scalar(&self, rng: &mut dyn RngCore) -> Self::Scalar;
    fn scalar_from_u64(&self, v: u64) -> Self::Scalar;
    fn scalar_add(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_mul(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_is_zero(&self, a: &Self::Scalar) -> bool;
    fn scalar_to_bytes(&self, a: &Self::Scalar) -> Vec<u8>;
    fn scalar_from_bytes(&self, bytes: &[u8]) -> Result<Self::Scalar, GroupError>;

    fn pow_g1(&self, base: &Self::G1, e: &Self::Scalar) -> Self::G1;
    fn pow_g2(&self, base: &Self::G2, e: &Self::Scalar) -> Self::G2;
    fn mul_g1(&self, a: &Self::G1, b: &Self::G1) -> Self::G1;
    fn pairing(&self, p: &Self::G1, q: &Self::G2) -> Self::Gt;

    fn g1_to_bytes(&self, el: &Self::G1) -> Vec<u8>;
    fn g1_from_bytes(&self, bytes: &[u8]) -> Result<Self::G1, GroupError>;
    fn g2_to_bytes(&self, el: &Self::G2) -> Vec<u8>;
    fn g2_from_bytes(&self, bytes: &[u8]) -> Result<Self::G2, GroupError>;

    /// Width in bytes of the fixed big-endian encoding of a `Coord`.
    fn coord_width(&self) -> usize;
    fn coord_from_u64(&self, v: u64) -> Self::Coord;
    /// Uniform nonzero field element.
    fn random_coord(&self, rng: &mut dyn RngCore) -> Self::Coord;
    fn coord_add(&self, a: &Self::Coord, b: &Self::Coord) -> Self::Coord;
    fn coord_sub(&self, a: &Self::Coord, b: &Self::Coord) -> Self::Coord;
    fn coord_mul(&self, a: &Self::Coord, b: &Self::Coord) -> Self::Coord;
    /// `None` when `a` is zero.
    fn coord_inv(&self, a: &Self::Coord) -> Option<Self::Coord>;
    fn coord_to_bytes(&self, a: &Self::Coord) -> Vec<u8>;
    /// Strict decode: rejects wrong lengths and values outside the field.
    fn coord_from_bytes(&self, bytes: &[u8]) -> Result<Self::Coord, GroupError>;
    /// Total decode used when unwrapping masks: any `coord_width` byte
    /// string maps into the field by reduction.
    fn coord_reduce_bytes(&self, bytes: &[u8]) -> Result<Self::Coord, GroupError>;
    /// Field image of a share used as an interpolation ordinate.
    fn share_to_coord(&self, share: &Self::G1) -> Self::Coord;

    fn coord_is_zero(&self, a: &Self::Coord) -> bool {
        *a == self.coord_from_u64(0)
    }
}
