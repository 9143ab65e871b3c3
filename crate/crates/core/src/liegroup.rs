//! SE(3) and se(3) primitives.
//!
//! Twists are stored as `(angular; linear)`. The 4×4 matrix form of a twist
//! `(w; v)` is `[[ŵ, v], [0, 0]]`; the Lie bracket is computed directly on the
//! vector form, which keeps every result inside se(3) by construction.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this rotation angle `exp_se3` uses Taylor coefficients.
const SMALL_ANGLE: f64 = 1e-8;
const SERIES_ANGLE: f64 = 1e-2;

/// Largest number of terms accepted by [`dexp_inv_series`].
pub const MAX_DEXP_TERMS: usize = 20;

/// Bernoulli numbers B_0..B_19 (convention B_1 = -1/2).
const BERNOULLI: [f64; MAX_DEXP_TERMS] = [
    1.0,
    -1.0 / 2.0,
    1.0 / 6.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    1.0 / 42.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    5.0 / 66.0,
    0.0,
    -691.0 / 2730.0,
    0.0,
    7.0 / 6.0,
    0.0,
    -3617.0 / 510.0,
    0.0,
    43867.0 / 798.0,
    0.0,
];

pub fn hat3(u: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0)
}

/// Inverse of [`hat3`]. Only the lower triangle is read.
pub fn vee3(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// An element of se(3) in vector form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub angular: Vector3<f64>,
    pub linear: Vector3<f64>,
}

impl Twist {
    pub fn new(angular: Vector3<f64>, linear: Vector3<f64>) -> Self {
        Self { angular, linear }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Body twist of an inextensible, unsheared rod with curvature `u`.
    pub fn rod(u: Vector3<f64>) -> Self {
        Self { angular: u, linear: Vector3::z() }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            angular: v.fixed_rows::<3>(0).into_owned(),
            linear: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.angular);
        v.fixed_rows_mut::<3>(3).copy_from(&self.linear);
        v
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.angular.iter().chain(self.linear.iter()).all(|x| x.is_finite())
    }
}

impl Add for Twist {
    type Output = Twist;
    fn add(self, rhs: Twist) -> Twist {
        Twist::new(self.angular + rhs.angular, self.linear + rhs.linear)
    }
}

impl AddAssign for Twist {
    fn add_assign(&mut self, rhs: Twist) {
        self.angular += rhs.angular;
        self.linear += rhs.linear;
    }
}

impl Sub for Twist {
    type Output = Twist;
    fn sub(self, rhs: Twist) -> Twist {
        Twist::new(self.angular - rhs.angular, self.linear - rhs.linear)
    }
}

impl Neg for Twist {
    type Output = Twist;
    fn neg(self) -> Twist {
        Twist::new(-self.angular, -self.linear)
    }
}

impl Mul<f64> for Twist {
    type Output = Twist;
    fn mul(self, k: f64) -> Twist {
        Twist::new(self.angular * k, self.linear * k)
    }
}

impl Mul<Twist> for f64 {
    type Output = Twist;
    fn mul(self, t: Twist) -> Twist {
        t * self
    }
}

/// Matrix form `[[ŵ, v], [0, 0]]`.
pub fn hat6(xi: &Twist) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&xi.angular));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&xi.linear);
    m
}

/// Inverse of [`hat6`]. Fails if `m` is not an se(3) matrix.
pub fn vee6(m: &Matrix4<f64>) -> Result<Twist> {
    let w = m.fixed_view::<3, 3>(0, 0);
    let skew_defect = (w + w.transpose()).amax();
    let bottom = m.fixed_view::<1, 4>(3, 0).amax();
    if skew_defect > 1e-12 * (1.0 + w.amax()) || bottom != 0.0 {
        return Err(Error::invalid("matrix is not an element of se(3)"));
    }
    Ok(Twist::new(
        vee3(&w.into_owned()),
        m.fixed_view::<3, 1>(0, 3).into_owned(),
    ))
}

/// Lie bracket `[a, b] = hat(a)hat(b) - hat(b)hat(a)`, in vector form.
pub fn commutator(a: &Twist, b: &Twist) -> Twist {
    Twist::new(
        a.angular.cross(&b.angular),
        a.angular.cross(&b.linear) - b.angular.cross(&a.linear),
    )
}

/// 6×6 adjoint `[[ŵ, 0], [v̂, ŵ]]` acting on `(angular; linear)` vectors.
pub fn adjoint(psi: &Twist) -> Matrix6<f64> {
    let w = hat3(&psi.angular);
    let mut ad = Matrix6::zeros();
    ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&hat3(&psi.linear));
    ad
}

/// Truncated series `Σ_{i<terms} B_i/i! ad_psi^i (x)`.
///
/// Used as a reference for the Magnus quadrature rules, not on hot paths.
pub fn dexp_inv_series(psi: &Twist, x: &Twist, terms: usize) -> Result<Twist> {
    if terms == 0 || terms > MAX_DEXP_TERMS {
        return Err(Error::invalid(format!(
            "dexp series needs 1..={MAX_DEXP_TERMS} terms, got {terms}"
        )));
    }
    let mut acc = *x;
    let mut power = *x;
    let mut factorial = 1.0;
    for (i, b) in BERNOULLI.iter().enumerate().take(terms).skip(1) {
        power = commutator(psi, &power);
        factorial *= i as f64;
        if *b != 0.0 {
            acc += power * (b / factorial);
        }
    }
    Ok(acc)
}

/// A rigid transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn compose(&self, rhs: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Pose {
        Pose {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    /// Largest deviation of the rotation block from SO(3): `max(|RᵀR - I|, |det R - 1|)`.
    pub fn orthonormality_defect(&self) -> f64 {
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Matrix3::identity()).amax();
        ortho.max((r.determinant() - 1.0).abs())
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

/// Closed-form exponential of a twist.
pub fn exp_se3(psi: &Twist) -> Pose {
    let w = psi.angular;
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    // R = I + a ŵ + b ŵ², V = I + b ŵ + c ŵ²
    let (a, b, c) = if theta < SMALL_ANGLE {
        let t4 = theta2 * theta2;
        (
            1.0 - theta2 / 6.0 + t4 / 120.0,
            0.5 - theta2 / 24.0 + t4 / 720.0,
            1.0 / 6.0 - theta2 / 120.0 + t4 / 5040.0,
        )
    } else {
        let half = (0.5 * theta).sin() / theta;
        let c = if theta < SERIES_ANGLE {
            // θ - sin θ cancels catastrophically here
            let t4 = theta2 * theta2;
            1.0 / 6.0 - theta2 / 120.0 + t4 / 5040.0 - t4 * theta2 / 362_880.0
        } else {
            (theta - theta.sin()) / (theta2 * theta)
        };
        (theta.sin() / theta, 2.0 * half * half, c)
    };
    let wh = hat3(&w);
    let wh2 = wh * wh;
    let id = Matrix3::identity();
    let rotation = id + wh * a + wh2 * b;
    let v = id + wh * b + wh2 * c;
    Pose { rotation, translation: v * psi.linear }
}

/// Geodesic angle between two rotations, accurate near zero.
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let d = a.transpose() * b;
    let sin_part = Vector3::new(d[(2, 1)] - d[(1, 2)], d[(0, 2)] - d[(2, 0)], d[(1, 0)] - d[(0, 1)])
        .norm()
        * 0.5;
    let cos_part = (d.trace() - 1.0) * 0.5;
    sin_part.atan2(cos_part)
}
