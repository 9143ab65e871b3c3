//! Inextensible, unsheared rod with a uniform circular cross-section and no
//! distributed load.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::{hat3, Pose};

/// Young's modulus assumed for superelastic Nitinol, Pa.
pub const NITINOL_YOUNGS: f64 = 70e9;
pub const NITINOL_POISSON: f64 = 0.3;
/// Surface strain limit used for the Magnus convergence advisory.
pub const STRAIN_LIMIT: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodProperties {
    length: f64,
    radius: f64,
    /// Diagonal of `diag(EI, EI, JG)`, N·m².
    stiffness: Vector3<f64>,
    base_pose: Pose,
}

impl RodProperties {
    /// Builds a rod from its bending and torsional stiffness.
    pub fn new(length: f64, radius: f64, bending: f64, torsion: f64, base_pose: Pose) -> Result<Self> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(length) {
            return Err(Error::invalid(format!("length must be positive, got {length}")));
        }
        if !positive(radius) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        if !positive(bending) || !positive(torsion) {
            return Err(Error::invalid("stiffness entries must be positive"));
        }
        if base_pose.orthonormality_defect() > 1e-10 {
            return Err(Error::invalid("base pose rotation is not orthonormal"));
        }
        Ok(Self { length, radius, stiffness: Vector3::new(bending, bending, torsion), base_pose })
    }

    /// Solid circular rod: `I = πr⁴/4`, `J = 2I`, `G = E / (2(1 + ν))`.
    pub fn from_material(length: f64, radius: f64, youngs: f64, poisson: f64) -> Result<Self> {
        if !(poisson > -1.0 && poisson < 0.5) {
            return Err(Error::invalid(format!("Poisson ratio must lie in (-1, 0.5), got {poisson}")));
        }
        let i = PI * radius.powi(4) / 4.0;
        let shear = youngs / (2.0 * (1.0 + poisson));
        Self::new(length, radius, youngs * i, shear * 2.0 * i, Pose::identity())
    }

    /// 200 mm long, 2 mm diameter Nitinol rod.
    pub fn nitinol_default() -> Self {
        Self::from_material(0.2, 1e-3, NITINOL_YOUNGS, NITINOL_POISSON)
            .expect("default rod properties are valid")
    }

    pub fn with_base_pose(mut self, base_pose: Pose) -> Self {
        self.base_pose = base_pose;
        self
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn stiffness_diagonal(&self) -> Vector3<f64> {
        self.stiffness
    }

    pub fn stiffness(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.stiffness)
    }

    pub fn base_pose(&self) -> &Pose {
        &self.base_pose
    }

    /// Curvature bound implied by a surface strain limit, `β = ε / r`.
    pub fn curvature_bound(&self, strain: f64) -> f64 {
        strain / self.radius
    }

    fn apply_k(&self, u: &Vector3<f64>) -> Vector3<f64> {
        self.stiffness.component_mul(u)
    }

    fn apply_k_inv(&self, v: &Vector3<f64>) -> Vector3<f64> {
        v.component_div(&self.stiffness)
    }
}

/// Force and moment applied at the tip, both in the world frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TipWrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl TipWrench {
    pub fn new(force: Vector3<f64>, moment: Vector3<f64>) -> Self {
        Self { force, moment }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_array(w: [f64; 6]) -> Self {
        Self::new(Vector3::new(w[0], w[1], w[2]), Vector3::new(w[3], w[4], w[5]))
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.force.x, self.force.y, self.force.z, self.moment.x, self.moment.y, self.moment.z]
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.force * k, self.moment * k)
    }

    pub fn is_zero(&self) -> bool {
        self.force == Vector3::zeros() && self.moment == Vector3::zeros()
    }
}

/// `u' = -K⁻¹(û K u + ê₃ Rᵀ f_e)`.
pub fn curvature_rhs(
    u: &Vector3<f64>,
    rotation: &Matrix3<f64>,
    props: &RodProperties,
    wrench: &TipWrench,
) -> Vector3<f64> {
    let gyro = u.cross(&props.apply_k(u));
    let body_force = rotation.transpose() * wrench.force;
    let shear = Vector3::z().cross(&body_force);
    -props.apply_k_inv(&(gyro + shear))
}

/// Tip curvature required by the applied moment, `K⁻¹ R(L)ᵀ m_e`.
pub fn boundary_target(tip_rotation: &Matrix3<f64>, props: &RodProperties, wrench: &TipWrench) -> Vector3<f64> {
    props.apply_k_inv(&(tip_rotation.transpose() * wrench.moment))
}

/// Internal moment `R K u`, world frame.
pub fn internal_moment(u: &Vector3<f64>, rotation: &Matrix3<f64>, props: &RodProperties) -> Vector3<f64> {
    rotation * props.apply_k(u)
}

/// `ê₃` as a matrix, for callers assembling the equations by hand.
pub fn e3_hat() -> Matrix3<f64> {
    hat3(&Vector3::z())
}
