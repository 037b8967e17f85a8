//! Closed-form 2×2 real linear algebra.
//!
//! Everything in the iteration kernels goes through [`Matrix2`]: products,
//! inverses, singular values from the eigenvalues of `MᵀM`, principal
//! singular directions and the matrix exponential. No iterative solvers.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Smallest |det| accepted for a cocycle value.
pub const SINGULAR_DET: f64 = 1e-12;

/// Row-major 2×2 real matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Matrix2 {
    pub const IDENTITY: Matrix2 = Matrix2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };
    pub const ZERO: Matrix2 = Matrix2 { a: 0.0, b: 0.0, c: 0.0, d: 0.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Matrix2 { a, b, c, d }
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Self {
        Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub const fn diag(x: f64, y: f64) -> Self {
        Matrix2::new(x, 0.0, 0.0, y)
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn transpose(&self) -> Self {
        Matrix2::new(self.a, self.c, self.b, self.d)
    }

    pub fn scale(&self, s: f64) -> Self {
        Matrix2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Errors with `SingularValue` when |det| < [`SINGULAR_DET`].
    pub fn check_invertible(&self) -> Result<()> {
        let det = self.det();
        if !(det.abs() >= SINGULAR_DET) || !self.is_finite() {
            return Err(LabError::SingularValue { det });
        }
        Ok(())
    }

    pub fn inverse(&self) -> Result<Self> {
        self.check_invertible()?;
        let det = self.det();
        Ok(Matrix2::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    /// Singular values `(s_max, s_min)`.
    ///
    /// `s_max = (√(‖M‖²_F + 2|det|) + √(‖M‖²_F − 2|det|)) / 2`, with both
    /// radicands written as sums of squares so nothing cancels;
    /// `s_min = |det| / s_max` stays accurate when the matrix is nearly rank one.
    pub fn singular_values(&self) -> (f64, f64) {
        let Matrix2 { a, b, c, d } = *self;
        let det = self.det();
        let same = (a + d).hypot(b - c);
        let opposite = (a - d).hypot(b + c);
        let (plus, minus) = if det >= 0.0 { (same, opposite) } else { (opposite, same) };
        let s_max = 0.5 * (plus + minus);
        if s_max == 0.0 {
            return (0.0, 0.0);
        }
        (s_max, det.abs() / s_max)
    }

    /// Operator (spectral) norm.
    pub fn norm(&self) -> f64 {
        self.singular_values().0
    }

    /// `‖M⁻¹‖ = 1 / s_min`.
    pub fn inverse_norm(&self) -> f64 {
        1.0 / self.singular_values().1
    }

    /// Angle in `[0, π)` of the right-singular direction with the largest
    /// singular value (principal axis of `MᵀM`).
    pub fn top_right_singular_angle(&self) -> f64 {
        let p = self.a * self.a + self.c * self.c;
        let s = self.b * self.b + self.d * self.d;
        let q = self.a * self.b + self.c * self.d;
        canonical_angle(0.5 * (2.0 * q).atan2(p - s))
    }

    /// Angle in `[0, π)` of the left-singular direction with the largest
    /// singular value (principal axis of `MMᵀ`).
    pub fn top_left_singular_angle(&self) -> f64 {
        let p = self.a * self.a + self.b * self.b;
        let s = self.c * self.c + self.d * self.d;
        let q = self.a * self.c + self.b * self.d;
        canonical_angle(0.5 * (2.0 * q).atan2(p - s))
    }

    /// Matrix exponential in closed form.
    ///
    /// With `N = M − (tr/2)·I` we have `N² = Δ·I`, `Δ = ((a−d)/2)² + bc`, so
    /// `exp(M) = e^{tr/2}·(ch(Δ)·I + sh(Δ)·N)` where `ch`/`sh` are cosh and
    /// sinh(√Δ)/√Δ for Δ > 0 and their trigonometric analogues for Δ < 0.
    pub fn exp(&self) -> Self {
        let half_tr = 0.5 * self.trace();
        let n = Matrix2::new(self.a - half_tr, self.b, self.c, self.d - half_tr);
        let delta = 0.25 * (self.a - self.d) * (self.a - self.d) + self.b * self.c;
        let (ch, sh) = if delta.abs() < 1e-8 {
            // Taylor terms through Δ²; truncation error below 1e-24.
            (
                1.0 + delta / 2.0 + delta * delta / 24.0,
                1.0 + delta / 6.0 + delta * delta / 120.0,
            )
        } else if delta > 0.0 {
            let r = delta.sqrt();
            (r.cosh(), r.sinh() / r)
        } else {
            let r = (-delta).sqrt();
            (r.cos(), r.sin() / r)
        };
        let scale = half_tr.exp();
        Matrix2::new(
            scale * (ch + sh * n.a),
            scale * sh * n.b,
            scale * sh * n.c,
            scale * (ch + sh * n.d),
        )
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix2) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;

    fn mul(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;

    fn add(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl Sub for Matrix2 {
    type Output = Matrix2;

    fn sub(self, o: Matrix2) -> Matrix2 {
        Matrix2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

/// Reduce an angle to the canonical projective representative in `[0, π)`.
pub fn canonical_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    if r >= PI || r.is_nan() {
        0.0
    } else {
        r
    }
}
