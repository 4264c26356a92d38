use super::{BackendId, GroupError, PairingBackend};
use rand::{Rng, RngCore};

/// Largest toy modulus for which exhaustive discrete logs stay cheap.
pub const TOY_PAIRING_BOUND: u64 = 1 << 20;

/// Multiplicative group modulo a small odd prime.
///
/// Both source groups are the same group and the pairing of two elements is
/// the product of their discrete logarithms modulo the generator's order,
/// which is bilinear by construction. Interpolation coordinates are elements
/// of the prime field itself, so a share's value doubles as its ordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyGroup {
    modulus: u64,
    generator: u64,
    order: u64,
    width: usize,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

fn be_bytes(value: u64, width: usize) -> Vec<u8> {
    let full = value.to_be_bytes();
    full[8 - width..].to_vec()
}

fn be_value(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0u64, |acc, b| (acc << 8) | u64::from(*b))
}

impl ToyGroup {
    pub fn new(modulus: u64, generator: u64, declared_order: Option<u64>) -> Result<Self, GroupError> {
        if modulus < 3 || !is_prime(modulus) {
            return Err(GroupError::InvalidModulus(modulus));
        }
        if modulus > TOY_PAIRING_BOUND {
            return Err(GroupError::ToyGroupTooLarge(modulus));
        }
        if generator < 2 || generator >= modulus {
            return Err(GroupError::NonGenerator);
        }
        let mut acc = generator;
        let mut order = 1u64;
        while acc != 1 {
            acc = (u128::from(acc) * u128::from(generator) % u128::from(modulus)) as u64;
            order += 1;
        }
        if order < 2 {
            return Err(GroupError::NonGenerator);
        }
        if let Some(declared) = declared_order {
            if declared != order {
                return Err(GroupError::NonGenerator);
            }
        }
        let bits = 64 - (modulus - 1).leading_zeros() as usize;
        let width = bits.div_ceil(8);
        Ok(ToyGroup { modulus, generator, order, width })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn generator(&self) -> u64 {
        self.generator
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    fn modpow(&self, base: u64, exp: u64) -> u64 {
        let m = u128::from(self.modulus);
        let mut acc = 1u128;
        let mut b = u128::from(base) % m;
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * b % m;
            }
            b = b * b % m;
            e >>= 1;
        }
        acc as u64
    }

    fn dlog(&self, x: u64) -> u64 {
        let mut acc = 1u64;
        for k in 0..self.order {
            if acc == x {
                return k;
            }
            acc = (u128::from(acc) * u128::from(self.generator) % u128::from(self.modulus)) as u64;
        }
        unreachable!("element {x} lies outside the subgroup generated by {}", self.generator)
    }

    fn element_from_bytes(&self, bytes: &[u8]) -> Result<u64, GroupError> {
        if bytes.len() != self.width {
            return Err(GroupError::WrongEncodingLength { expected: self.width, got: bytes.len() });
        }
        let v = be_value(bytes);
        if v == 0 || v >= self.modulus || self.modpow(v, self.order) != 1 {
            return Err(GroupError::MalformedElement);
        }
        Ok(v)
    }
}

impl PairingBackend for ToyGroup {
    type Scalar = u64;
    type G1 = u64;
    type G2 = u64;
    type Gt = u64;
    type Coord = u64;

    fn id(&self) -> BackendId {
        BackendId::Toy
    }

    fn g1(&self) -> u64 {
        self.generator
    }

    fn g2(&self) -> u64 {
        self.generator
    }

    fn random_scalar(&self, rng: &mut dyn RngCore) -> u64 {
        rng.gen_range(1..self.order)
    }

    fn scalar_from_u64(&self, v: u64) -> u64 {
        v % self.order
    }

    fn scalar_add(&self, a: &u64, b: &u64) -> u64 {
        (a + b) % self.order
    }

    fn scalar_mul(&self, a: &u64, b: &u64) -> u64 {
        (u128::from(*a) * u128::from(*b) % u128::from(self.order)) as u64
    }

    fn scalar_is_zero(&self, a: &u64) -> bool {
        *a == 0
    }

    fn scalar_to_bytes(&self, a: &u64) -> Vec<u8> {
        be_bytes(*a, self.width)
    }

    fn scalar_from_bytes(&self, bytes: &[u8]) -> Result<u64, GroupError> {
        if bytes.len() != self.width {
            return Err(GroupError::WrongEncodingLength { expected: self.width, got: bytes.len() });
        }
        let v = be_value(bytes);
        if v >= self.order {
            return Err(GroupError::MalformedScalar);
        }
        Ok(v)
    }

    fn pow_g1(&self, base: &u64, e: &u64) -> u64 {
        self.modpow(*base, *e)
    }

    fn pow_g2(&self, base: &u64, e: &u64) -> u64 {
        self.modpow(*base, *e)
    }

    fn mul_g1(&self, a: &u64, b: &u64) -> u64 {
        (u128::from(*a) * u128::from(*b) % u128::from(self.modulus)) as u64
    }

    fn pairing(&self, p: &u64, q: &u64) -> u64 {
        (u128::from(self.dlog(*p)) * u128::from(self.dlog(*q)) % u128::from(self.order)) as u64
    }

    fn g1_to_bytes(&self, el: &u64) -> Vec<u8> {
        be_bytes(*el, self.width)
    }

    fn g1_from_bytes(&self, bytes: &[u8]) -> Result<u64, GroupError> {
        self.element_from_bytes(bytes)
    }

    fn g2_to_bytes(&self, el: &u64) -> Vec<u8> {
        be_bytes(*el, self.width)
    }

    fn g2_from_bytes(&self, bytes: &[u8]) -> Result<u64, GroupError> {
        self.element_from_bytes(bytes)
    }

    fn coord_width(&self) -> usize {
        self.width
    }

    fn coord_from_u64(&self, v: u64) -> u64 {
        v % self.modulus
    }

    fn random_coord(&self, rng: &mut dyn RngCore) -> u64 {
        rng.gen_range(1..self.modulus)
    }

    fn coord_add(&self, a: &u64, b: &u64) -> u64 {
        (a + b) % self.modulus
    }

    fn coord_sub(&self, a: &u64, b: &u64) -> u64 {
        (a + self.modulus - b) % self.modulus
    }

    fn coord_mul(&self, a: &u64, b: &u64) -> u64 {
        (u128::from(*a) * u128::from(*b) % u128::from(self.modulus)) as u64
    }

    fn coord_inv(&self, a: &u64) -> Option<u64> {
        if *a == 0 {
            None
        } else {
            Some(self.modpow(*a, self.modulus - 2))
        }
    }

    fn coord_to_bytes(&self, a: &u64) -> Vec<u8> {
        be_bytes(*a, self.width)
    }

    fn coord_from_bytes(&self, bytes: &[u8]) -> Result<u64, GroupError> {
        if bytes.len() != self.width {
            return Err(GroupError::WrongEncodingLength { expected: self.width, got: bytes.len() });
        }
        let v = be_value(bytes);
        if v >= self.modulus {
            return Err(GroupError::MalformedScalar);
        }
        Ok(v)
    }

    fn coord_reduce_bytes(&self, bytes: &[u8]) -> Result<u64, GroupError> {
        if bytes.len() != self.width {
            return Err(GroupError::WrongEncodingLength { expected: self.width, got: bytes.len() });
        }
        Ok(be_value(bytes) % self.modulus)
    }

    fn share_to_coord(&self, share: &u64) -> u64 {
        share % self.modulus
    }
}
