//! Fixed-size vector helpers shared by the modulation routines.

use nalgebra::{SMatrix, SVector, Vector2};
#[allow(unused_imports)]
use num_traits::Float;

pub type VecN<const D: usize> = SVector<f64, D>;
pub type MatN<const D: usize> = SMatrix<f64, D, D>;
pub type Vec2 = Vector2<f64>;

#[inline]
pub fn vec2(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

/// Counter-clockwise quarter turn.
#[inline]
pub fn perp(v: &Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

#[inline]
pub fn rotate(v: &Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Unit vector along `v`, or `None` for a zero (or non-finite) vector.
#[inline]
pub fn normalized<const D: usize>(v: &VecN<D>) -> Option<VecN<D>> {
    let n = v.norm();
    if n > 0.0 && n.is_finite() {
        Some(v / n)
    } else {
        None
    }
}

/// Orthonormal basis whose first column is the unit vector `n`; the
/// remaining columns span the hyperplane orthogonal to `n`.
///
/// For two dimensions the tangent is the quarter turn of `n`. Above that a
/// Householder reflection mapping the first axis onto `n` is used, with the
/// sign picked so the construction never divides by a small number.
pub fn complete_basis<const D: usize>(n: &VecN<D>) -> MatN<D> {
    let mut basis = MatN::<D>::identity();
    if D == 1 {
        basis[(0, 0)] = n[0];
        return basis;
    }
    if D == 2 {
        basis[(0, 0)] = n[0];
        basis[(1, 0)] = n[1];
        basis[(0, 1)] = -n[1];
        basis[(1, 1)] = n[0];
        return basis;
    }
    let sign = if n[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut u = *n;
    u[0] += sign;
    let uu = u.dot(&u);
    // H = I - 2 u u^T / (u^T u), and H e_0 = -sign * n.
    let h = MatN::<D>::identity() - (u * u.transpose()) * (2.0 / uu);
    basis = h;
    let first = h.column(0) * -sign;
    basis.set_column(0, &first);
    basis
}
