//! Shooting on the unknown base curvature `u(0)`.

use web_time::Instant;

use nalgebra::{DVector, Matrix3, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::lm::levenberg_marquardt;
use super::ode::{integrate, Tolerances};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::liegroup::{hat3, Pose};
use crate::rod::{boundary_target, curvature_rhs, RodProperties, TipWrench};

/// Position (3), rotation column-major (9), curvature (3).
type State = SVector<f64, 15>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSample {
    pub s: f64,
    pub pose: Pose,
    pub curvature: Vector3<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShootingSolution {
    pub base_curvature: Vector3<f64>,
    /// Accepted integrator steps from `s = 0` to `s = L`.
    pub samples: Vec<ShapeSample>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub wall_time: f64,
}

impl ShootingSolution {
    pub fn tip(&self) -> &ShapeSample {
        self.samples.last().expect("shooting solution has samples")
    }

    pub fn tip_pose(&self) -> &Pose {
        &self.tip().pose
    }
}

fn pack(pose: &Pose, u: &Vector3<f64>) -> State {
    let mut y = State::zeros();
    y.fixed_rows_mut::<3>(0).copy_from(&pose.translation);
    y.fixed_rows_mut::<9>(3).copy_from_slice(pose.rotation.as_slice());
    y.fixed_rows_mut::<3>(12).copy_from(u);
    y
}

fn unpack(y: &State) -> (Pose, Vector3<f64>) {
    let p = y.fixed_rows::<3>(0).into_owned();
    let r = Matrix3::from_column_slice(y.fixed_rows::<9>(3).as_slice());
    let u = y.fixed_rows::<3>(12).into_owned();
    (Pose::new(r, p), u)
}

fn integrate_rod(
    props: &RodProperties,
    wrench: &TipWrench,
    u0: &Vector3<f64>,
    tol: Tolerances,
) -> Result<Vec<(f64, State)>> {
    let rhs = |_s: f64, y: &State| {
        let (pose, u) = unpack(y);
        let r = pose.rotation;
        let dp = r.column(2).into_owned();
        let dr = r * hat3(&u);
        let du = curvature_rhs(&u, &r, props, wrench);
        let mut dy = State::zeros();
        dy.fixed_rows_mut::<3>(0).copy_from(&dp);
        dy.fixed_rows_mut::<9>(3).copy_from_slice(dr.as_slice());
        dy.fixed_rows_mut::<3>(12).copy_from(&du);
        dy
    };
    integrate(rhs, 0.0, props.length(), pack(props.base_pose(), u0), tol)
}

/// Solves the rod boundary-value problem by shooting on `u(0)`.
///
/// Fails with [`Error::NonConvergence`] when the tip condition cannot be met
/// within the iteration budget.
pub fn solve_shooting(
    props: &RodProperties,
    wrench: &TipWrench,
    config: &SolverConfig,
    initial_guess: Option<Vector3<f64>>,
) -> Result<ShootingSolution> {
    config.validate()?;
    let start = Instant::now();
    let tol = Tolerances { abs: config.integrator_abs_tol, rel: config.integrator_rel_tol };
    let residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let u0 = Vector3::new(x[0], x[1], x[2]);
        let path = integrate_rod(props, wrench, &u0, tol)?;
        let (tip, u_tip) = unpack(&path.last().expect("integration output").1);
        let target = boundary_target(&tip.rotation, props, wrench);
        Ok(DVector::from_column_slice((u_tip - target).as_slice()))
    };
    let x0 = initial_guess.unwrap_or_else(Vector3::zeros);
    let out = levenberg_marquardt(DVector::from_column_slice(x0.as_slice()), residual, config)?;
    if !out.converged {
        return Err(Error::NonConvergence { iterations: out.iterations, residual: out.residual_norm });
    }
    let u0 = Vector3::new(out.x[0], out.x[1], out.x[2]);
    let samples = integrate_rod(props, wrench, &u0, tol)?
        .iter()
        .map(|(s, y)| {
            let (pose, curvature) = unpack(y);
            ShapeSample { s: *s, pose, curvature }
        })
        .collect();
    Ok(ShootingSolution {
        base_curvature: u0,
        samples,
        iterations: out.iterations,
        residual_norm: out.residual_norm,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rod::internal_moment;

    #[test]
    fn zero_wrench_is_straight() {
        let rod = RodProperties::nitinol_default();
        let sol = solve_shooting(&rod, &TipWrench::zero(), &SolverConfig::default(), None).unwrap();
        assert_eq!(sol.base_curvature, Vector3::zeros());
        assert_eq!(sol.iterations, 0);
        let tip = sol.tip();
        assert_eq!(tip.s, 0.2);
        assert!((tip.pose.translation - Vector3::new(0.0, 0.0, 0.2)).amax() < 1e-14);
    }

    #[test]
    fn pure_moment_gives_constant_curvature() {
        let rod = RodProperties::nitinol_default();
        let m = 0.2;
        let w = TipWrench::new(Vector3::zeros(), Vector3::new(0.0, m, 0.0));
        let sol = solve_shooting(&rod, &w, &SolverConfig::default(), None).unwrap();
        let kappa = m / rod.stiffness_diagonal().y;
        assert!((sol.base_curvature - Vector3::new(0.0, kappa, 0.0)).amax() < 1e-8);
        for sample in &sol.samples {
            assert!((sample.curvature - Vector3::new(0.0, kappa, 0.0)).amax() < 1e-8);
        }
    }

    #[test]
    fn tip_moment_consistency() {
        let rod = RodProperties::nitinol_default();
        let w = TipWrench::new(Vector3::new(0.6, -0.8, 0.3), Vector3::new(-0.2, 0.1, 0.25));
        let sol = solve_shooting(&rod, &w, &SolverConfig::default(), None).unwrap();
        assert!(sol.residual_norm < 1e-9);
        let tip = sol.tip();
        let m = internal_moment(&tip.curvature, &tip.pose.rotation, &rod);
        assert!((m - w.moment).norm() <= 1e-8 * w.moment.norm());
        assert!(tip.pose.orthonormality_defect() < 1e-8);
    }
}
