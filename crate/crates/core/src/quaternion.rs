//! Quaternion arithmetic and the real 4x4 matrix representation.
//!
//! A quaternion `r + x i + y j + z k` is stored as four `f64` components.
//! Left multiplication by a quaternion is a linear map on `R^4`; its matrix
//! ([`QuaternionMatrix4`]) is what the layers use to turn Hamilton products
//! into real matrix products.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared norms below this are treated as zero by [`Quaternion::normalize`].
pub const ZERO_NORM_SQ: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quaternion {
    pub r: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(r: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { r, x, y, z }
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Quaternion::new(c[0], c[1], c[2], c[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.r, self.x, self.y, self.z]
    }

    /// Hamilton product `self ⊗ rhs`. Not commutative.
    pub fn hamilton(self, rhs: Quaternion) -> Quaternion {
        let (r1, x1, y1, z1) = (self.r, self.x, self.y, self.z);
        let (r2, x2, y2, z2) = (rhs.r, rhs.x, rhs.y, rhs.z);
        Quaternion {
            r: r1 * r2 - x1 * x2 - y1 * y2 - z1 * z2,
            x: r1 * x2 + x1 * r2 + y1 * z2 - z1 * y2,
            y: r1 * y2 - x1 * z2 + y1 * r2 + z1 * x2,
            z: r1 * z2 + x1 * y2 - y1 * x2 + z1 * r2,
        }
    }

    pub fn conjugate(self) -> Quaternion {
        Quaternion::new(self.r, -self.x, -self.y, -self.z)
    }

    pub fn norm_squared(self) -> f64 {
        self.r * self.r + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit quaternion in the direction of `self`.
    pub fn normalize(self) -> Result<Quaternion> {
        let n2 = self.norm_squared();
        if n2 < ZERO_NORM_SQ {
            return Err(Error::ZeroNorm(n2));
        }
        Ok(self.scale(1.0 / n2.sqrt()))
    }

    pub fn scale(self, s: f64) -> Quaternion {
        Quaternion::new(self.r * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    /// Matrix of the linear map `q ↦ self ⊗ q` acting on column vectors
    /// `[r, x, y, z]ᵀ`.
    pub fn to_matrix(self) -> QuaternionMatrix4 {
        let Quaternion { r, x, y, z } = self;
        QuaternionMatrix4 {
            m: [
                [r, -x, -y, -z],
                [x, r, -z, y],
                [y, z, r, -x],
                [z, -y, x, r],
            ],
        }
    }
}

impl Add for Quaternion {
    type Output = Quaternion;

    fn add(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(self.r + rhs.r, self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;

    fn sub(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(self.r - rhs.r, self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, rhs: Quaternion) -> Quaternion {
        self.hamilton(rhs)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;

    fn mul(self, s: f64) -> Quaternion {
        self.scale(s)
    }
}

pub fn hamilton(q1: Quaternion, q2: Quaternion) -> Quaternion {
    q1.hamilton(q2)
}

pub fn conjugate(q: Quaternion) -> Quaternion {
    q.conjugate()
}

pub fn normalize(q: Quaternion) -> Result<Quaternion> {
    q.normalize()
}

pub fn norm(q: Quaternion) -> f64 {
    q.norm()
}

pub fn to_matrix(q: Quaternion) -> QuaternionMatrix4 {
    q.to_matrix()
}

pub fn add(q1: Quaternion, q2: Quaternion) -> Quaternion {
    q1 + q2
}

pub fn scale(q: Quaternion, s: f64) -> Quaternion {
    q.scale(s)
}

/// Row-major 4x4 real matrix representing left multiplication by a quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuaternionMatrix4 {
    pub m: [[f64; 4]; 4],
}

impl QuaternionMatrix4 {
    pub fn identity() -> Self {
        Quaternion::ONE.to_matrix()
    }

    pub fn mul_vec(&self, v: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (o, row) in out.iter_mut().zip(&self.m) {
            *o = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn mul_mat(&self, other: &QuaternionMatrix4) -> QuaternionMatrix4 {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..4).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        QuaternionMatrix4 { m }
    }

    pub fn transpose(&self) -> QuaternionMatrix4 {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[j][i];
            }
        }
        QuaternionMatrix4 { m }
    }

    /// The quaternion encoded in the first column.
    pub fn first_column(&self) -> Quaternion {
        Quaternion::new(self.m[0][0], self.m[1][0], self.m[2][0], self.m[3][0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_basis_rules() {
        use Quaternion as Q;
        assert_eq!(Q::I * Q::J, Q::K);
        assert_eq!(Q::J * Q::I, -Q::K);
        assert_eq!(Q::J * Q::K, Q::I);
        assert_eq!(Q::K * Q::I, Q::J);
        let minus_one = Q::new(-1.0, 0.0, 0.0, 0.0);
        assert_eq!(Q::I * Q::I, minus_one);
        assert_eq!(Q::J * Q::J, minus_one);
        assert_eq!(Q::K * Q::K, minus_one);
        assert_eq!(Q::I * Q::J * Q::K, minus_one);
    }

    #[test]
    fn identity_is_neutral() {
        let q = Quaternion::new(0.3, -1.2, 4.0, 2.5);
        assert_eq!(hamilton(Quaternion::ONE, q), q);
        assert_eq!(hamilton(q, Quaternion::ONE), q);
    }

    #[test]
    fn worked_product_matches_matrix_route() {
        let q1 = Quaternion::new(1.0, 2.0, 3.0, 4.0);
        let q2 = Quaternion::new(5.0, 6.0, 7.0, 8.0);
        // matrix route computed first, then the product itself
        let via_matrix = to_matrix(q1).mul_vec(q2.to_array());
        assert_eq!(via_matrix, [-60.0, 12.0, 30.0, 24.0]);
        assert_eq!(hamilton(q1, q2), Quaternion::new(-60.0, 12.0, 30.0, 24.0));
    }

    #[test]
    fn conjugate_examples() {
        let q = Quaternion::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(conjugate(q), Quaternion::new(1.0, -2.0, -3.0, -4.0));
        assert_eq!(conjugate(conjugate(q)), q);
        assert_eq!(hamilton(q, conjugate(q)), Quaternion::new(30.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize(Quaternion::new(2.0, 0.0, 0.0, 0.0)).unwrap(),
            Quaternion::ONE
        );
        assert_eq!(
            normalize(Quaternion::new(1.0, 1.0, 1.0, 1.0)).unwrap(),
            Quaternion::new(0.5, 0.5, 0.5, 0.5)
        );
        assert!(matches!(normalize(Quaternion::ZERO), Err(Error::ZeroNorm(_))));
        assert!(matches!(
            normalize(Quaternion::new(1e-160, 0.0, 0.0, 0.0)),
            Err(Error::ZeroNorm(_))
        ));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(Quaternion::new(0.0, 3.0, 4.0, 0.0)), 5.0);
        assert_eq!(norm(Quaternion::ONE), 1.0);
    }

    #[test]
    fn matrix_examples() {
        assert_eq!(to_matrix(Quaternion::ONE), QuaternionMatrix4::identity());
        let m = to_matrix(Quaternion::I);
        assert_eq!(m.m[0], [0.0, -1.0, 0.0, 0.0]);
        assert_eq!(m.first_column(), Quaternion::I);
    }

    #[test]
    fn add_and_scale() {
        let q = Quaternion::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(add(q, Quaternion::new(4.0, 3.0, 2.0, 1.0)), Quaternion::new(5.0, 5.0, 5.0, 5.0));
        assert_eq!(scale(q, 0.0), Quaternion::ZERO);
        assert_eq!(scale(add(q, q), 0.5), q);
    }
}
