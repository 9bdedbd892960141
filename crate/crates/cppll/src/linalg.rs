//! Minimal 2-D linear algebra used by the analysis modules.
//!
//! The toolkit only ever needs 2-vectors and 2×2 matrices (the state space is
//! the plane), so closed-form routines are used throughout: determinants,
//! Cholesky factors, and eigenvalues of a 2×2 matrix all have stable explicit
//! formulas and need no external solver.

use serde::{Deserialize, Serialize};

use crate::scalar::{lit, Scalar};

/// A vector in the `(p, u)` state plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec2<F> {
    pub x: F,
    pub y: F,
}

impl<F: Scalar> Vec2<F> {
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self {
            x: F::zero(),
            y: F::zero(),
        }
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: F) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Self) -> F {
        self.x * o.x + self.y * o.y
    }

    /// Euclidean norm.
    pub fn norm(self) -> F {
        self.x.hypot(self.y)
    }

    /// Maximum absolute component.
    pub fn inf_norm(self) -> F {
        self.x.abs().max(self.y.abs())
    }
}

/// A real 2×2 matrix in row-major order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2<F> {
    pub m11: F,
    pub m12: F,
    pub m21: F,
    pub m22: F,
}

impl<F: Scalar> Mat2<F> {
    pub fn new(m11: F, m12: F, m21: F, m22: F) -> Self {
        Self { m11, m12, m21, m22 }
    }

    pub fn identity() -> Self {
        Self::new(F::one(), F::zero(), F::zero(), F::one())
    }

    pub fn mul_vec(&self, v: Vec2<F>) -> Vec2<F> {
        Vec2::new(
            self.m11 * v.x + self.m12 * v.y,
            self.m21 * v.x + self.m22 * v.y,
        )
    }

    /// Matrix product `self · rhs`.
    pub fn mul_mat(&self, rhs: &Self) -> Self {
        Self::new(
            self.m11 * rhs.m11 + self.m12 * rhs.m21,
            self.m11 * rhs.m12 + self.m12 * rhs.m22,
            self.m21 * rhs.m11 + self.m22 * rhs.m21,
            self.m21 * rhs.m12 + self.m22 * rhs.m22,
        )
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m11, self.m21, self.m12, self.m22)
    }

    pub fn scale(&self, s: F) -> Self {
        Self::new(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(
            self.m11 - o.m11,
            self.m12 - o.m12,
            self.m21 - o.m21,
            self.m22 - o.m22,
        )
    }

    pub fn det(&self) -> F {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn trace(&self) -> F {
        self.m11 + self.m22
    }

    /// Largest absolute entry.
    pub fn inf_norm(&self) -> F {
        self.m11
            .abs()
            .max(self.m12.abs())
            .max(self.m21.abs())
            .max(self.m22.abs())
    }

    /// Quadratic form `vᵀ · self · v`.
    pub fn quadratic_form(&self, v: Vec2<F>) -> F {
        v.dot(self.mul_vec(v))
    }

    /// Eigenvalues as `(re, im)` pairs, ordered by descending real part
    /// (descending imaginary part for a conjugate pair).
    ///
    /// Uses the characteristic polynomial `λ² − tr·λ + det = 0` with the
    /// cancellation-safe root pairing `λ₁λ₂ = det`.
    pub fn eigenvalues(&self) -> [(F, F); 2] {
        let tr = self.trace();
        let det = self.det();
        let half = lit::<F>(0.5);
        let disc = tr * tr - lit::<F>(4.0) * det;
        if disc >= F::zero() {
            let sq = disc.sqrt();
            // Larger-magnitude root first via the stable form, partner via the product.
            let big = (tr + tr.signum() * sq) * half;
            let (l1, l2) = if big == F::zero() {
                (F::zero(), F::zero())
            } else {
                (big, det / big)
            };
            if l1 >= l2 {
                [(l1, F::zero()), (l2, F::zero())]
            } else {
                [(l2, F::zero()), (l1, F::zero())]
            }
        } else {
            let im = (-disc).sqrt() * half;
            [(tr * half, im), (tr * half, -im)]
        }
    }

    /// A (non-normalized) real eigenvector for a real eigenvalue.
    ///
    /// Returns `None` when the eigenvalue does not admit a nonzero solution
    /// from either row (numerically degenerate input).
    pub fn real_eigenvector(&self, lambda: F) -> Option<Vec2<F>> {
        // Rows of (A − λI): pick the candidate with the larger norm.
        let c1 = Vec2::new(self.m12, lambda - self.m11);
        let c2 = Vec2::new(lambda - self.m22, self.m21);
        let v = if c1.norm() >= c2.norm() { c1 } else { c2 };
        if v.norm() > F::zero() {
            Some(v)
        } else {
            None
        }
    }

    /// Lower Cholesky factor `L` with `self = L·Lᵀ`.
    ///
    /// Returns `None` unless the matrix is symmetric positive definite.
    pub fn cholesky(&self) -> Option<Self> {
        if self.m12 != self.m21 || self.m11 <= F::zero() {
            return None;
        }
        let l11 = self.m11.sqrt();
        let l21 = self.m21 / l11;
        let d = self.m22 - l21 * l21;
        if d <= F::zero() {
            return None;
        }
        Some(Self::new(l11, F::zero(), l21, d.sqrt()))
    }

    /// Solves `self · x = b`; `None` if the matrix is singular.
    pub fn solve(&self, b: Vec2<F>) -> Option<Vec2<F>> {
        let det = self.det();
        if det == F::zero() || !det.is_finite() {
            return None;
        }
        Some(Vec2::new(
            (b.x * self.m22 - self.m12 * b.y) / det,
            (self.m11 * b.y - b.x * self.m21) / det,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_real_and_complex() {
        let m = Mat2::new(3.0, 1.0, 0.0, 2.0);
        let [l1, l2] = m.eigenvalues();
        assert_eq!(l1, (3.0, 0.0));
        assert_eq!(l2, (2.0, 0.0));

        // Rotation-like matrix: complex pair on the unit circle.
        let r = Mat2::new(0.0, -1.0, 1.0, 0.0);
        let [c1, c2] = r.eigenvalues();
        assert_eq!(c1, (0.0, 1.0));
        assert_eq!(c2, (0.0, -1.0));
    }

    #[test]
    fn eigenvector_satisfies_definition() {
        let m = Mat2::new(2.0, 1.0, 1.0, 2.0);
        for (l, _) in m.eigenvalues() {
            let v = m.real_eigenvector(l).unwrap();
            let r = m.mul_vec(v).sub(v.scale(l));
            assert!(r.norm() < 1e-12 * v.norm());
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let h = Mat2::new(2.0, -1.0, -1.0, 1.0);
        let l = h.cholesky().unwrap();
        let back = l.mul_mat(&l.transpose());
        assert!(back.sub(&h).inf_norm() < 1e-15);
        // Indefinite matrix is rejected.
        assert!(Mat2::new(1.0, 2.0, 2.0, 1.0).cholesky().is_none());
    }

    #[test]
    fn solve_inverts() {
        let m = Mat2::new(4.0, 1.0, -2.0, 3.0);
        let b = Vec2::new(1.0, -5.0);
        let x = m.solve(b).unwrap();
        assert!(m.mul_vec(x).sub(b).norm() < 1e-14);
        assert!(Mat2::new(1.0, 2.0, 2.0, 4.0).solve(b).is_none());
    }
}
