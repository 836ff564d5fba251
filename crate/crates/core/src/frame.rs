//! Decomposition `M = E·diag(λ^r, λ^e, …)·E⁻¹` shared by all avoidance paths.

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{complete_basis, MatN, VecN};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationFrame<const D: usize> {
    /// Aggregated (unnormalized) reference vector the frame was built from.
    pub averaged_reference: VecN<D>,
    /// Unit reference direction, first column of `E`.
    pub reference: VecN<D>,
    /// Unit normal; the tangent columns of `E` are orthogonal to it.
    pub normal: VecN<D>,
    pub normal_offset: VecN<D>,
    pub normal_scaling: f64,
    pub lambda_r: f64,
    pub lambda_e: f64,
}

impl ModulationFrame<0> {}

impl<const D: usize> ModulationFrame<D> {
    /// Frame whose normal coincides with the reference (orthonormal `E`).
    pub fn orthonormal(averaged_reference: VecN<D>, reference: VecN<D>, lambda_r: f64, lambda_e: f64) -> Self {
        Self {
            averaged_reference,
            reference,
            normal: reference,
            normal_offset: VecN::<D>::zeros(),
            normal_scaling: 1.0,
            lambda_r,
            lambda_e,
        }
    }

    /// Applies the modulation to `v`.
    ///
    /// Writing `v = a·r + t` with `t` orthogonal to the normal gives
    /// `a = ⟨n, v⟩ / ⟨n, r⟩`, which is exactly the first coordinate of
    /// `E⁻¹ v`; the tangent coordinates all share `λ^e`.
    pub fn apply(&self, v: &VecN<D>) -> VecN<D> {
        let along = self.normal.dot(v) / self.normal.dot(&self.reference);
        let radial = self.reference * along;
        radial * self.lambda_r + (v - radial) * self.lambda_e
    }

    /// The basis matrix `E = [r, e_1 … e_{d−1}]`.
    pub fn basis(&self) -> MatN<D> {
        let mut basis = complete_basis(&self.normal);
        basis.set_column(0, &self.reference);
        basis
    }

    /// The full modulation matrix, built through an explicit inverse of `E`.
    pub fn matrix(&self) -> Option<MatN<D>> {
        let basis = self.basis();
        let inverse = if D == 2 {
            let det = basis[(0, 0)] * basis[(1, 1)] - basis[(0, 1)] * basis[(1, 0)];
            if det == 0.0 {
                return None;
            }
            let mut inv = MatN::<D>::zeros();
            inv[(0, 0)] = basis[(1, 1)] / det;
            inv[(0, 1)] = -basis[(0, 1)] / det;
            inv[(1, 0)] = -basis[(1, 0)] / det;
            inv[(1, 1)] = basis[(0, 0)] / det;
            inv
        } else {
            basis.try_inverse()?
        };
        let mut diag = MatN::<D>::identity() * self.lambda_e;
        diag[(0, 0)] = self.lambda_r;
        Some(basis * diag * inverse)
    }
}
