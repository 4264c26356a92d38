use super::TimelockError;
use crate::group::PairingBackend;

/// Coefficients in ascending order of degree; `coeffs[0]` is the constant
/// term. Interpolating m points always yields m coefficients, so a leading
/// coefficient may be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<C> {
    pub coeffs: Vec<C>,
}

/// Unique polynomial of degree below `points.len()` passing through every
/// point, computed over the backend's interpolation field.
pub fn lagrange_interpolate<B: PairingBackend>(
    backend: &B,
    points: &[(B::Coord, B::Coord)],
) -> Result<Polynomial<B::Coord>, TimelockError> {
    if points.is_empty() {
        return Err(TimelockError::NoPoints);
    }
    for (i, (xi, _)) in points.iter().enumerate() {
        for (xj, _) in points.iter().skip(i + 1) {
            if xi == xj {
                return Err(TimelockError::DuplicateXCoordinate);
            }
        }
    }
    let zero = backend.coord_from_u64(0);
    let mut acc = vec![zero.clone(); points.len()];
    for (j, (xj, yj)) in points.iter().enumerate() {
        let mut numerator = vec![backend.coord_from_u64(1)];
        let mut denominator = backend.coord_from_u64(1);
        for (l, (xl, _)) in points.iter().enumerate() {
            if l == j {
                continue;
            }
            let mut next = vec![zero.clone(); numerator.len() + 1];
            for (i, c) in numerator.iter().enumerate() {
                next[i + 1] = backend.coord_add(&next[i + 1], c);
                let shifted = backend.coord_mul(xl, c);
                next[i] = backend.coord_sub(&next[i], &shifted);
            }
            numerator = next;
            denominator = backend.coord_mul(&denominator, &backend.coord_sub(xj, xl));
        }
        let inv = backend
            .coord_inv(&denominator)
            .ok_or(TimelockError::DuplicateXCoordinate)?;
        let scale = backend.coord_mul(yj, &inv);
        for (i, c) in numerator.iter().enumerate() {
            acc[i] = backend.coord_add(&acc[i], &backend.coord_mul(c, &scale));
        }
    }
    Ok(Polynomial { coeffs: acc })
}

/// Horner evaluation.
pub fn poly_eval<B: PairingBackend>(
    backend: &B,
    poly: &Polynomial<B::Coord>,
    x: &B::Coord,
) -> B::Coord {
    let mut acc = backend.coord_from_u64(0);
    for c in poly.coeffs.iter().rev() {
        acc = backend.coord_add(&backend.coord_mul(&acc, x), c);
    }
    acc
}
