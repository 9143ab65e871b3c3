//! Boundary-value solvers for the rod: collocation with Magnus stepping, and
//! a shooting method used as the reference.

mod collocation;
pub mod lm;
pub mod ode;
mod shooting;

use serde::{Deserialize, Serialize};

pub use collocation::{
    assemble_residual, evaluate_solution, reconstruct_poses, solve_collocation, PoseReconstruction,
    ResidualMatrix, RodSolution,
};
pub use shooting::{solve_shooting, ShapeSample, ShootingSolution};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence threshold on the infinity norm of the residual vector.
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    /// Forward-difference step, relative to `max(|x|, 1)`.
    pub finite_difference_step: f64,
    /// Starting damping, relative to the diagonal of JᵀJ.
    pub damping_initial: f64,
    pub damping_increase: f64,
    pub damping_decrease: f64,
    pub damping_max: f64,
    /// Shooting integrator tolerances.
    pub integrator_abs_tol: f64,
    pub integrator_rel_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            residual_tolerance: 1e-9,
            max_iterations: 200,
            finite_difference_step: 1e-7,
            damping_initial: 1e-4,
            damping_increase: 10.0,
            damping_decrease: 0.1,
            damping_max: 1e16,
            integrator_abs_tol: 1e-10,
            integrator_rel_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("residual_tolerance", self.residual_tolerance),
            ("finite_difference_step", self.finite_difference_step),
            ("damping_initial", self.damping_initial),
            ("damping_increase", self.damping_increase),
            ("damping_decrease", self.damping_decrease),
            ("damping_max", self.damping_max),
            ("integrator_abs_tol", self.integrator_abs_tol),
            ("integrator_rel_tol", self.integrator_rel_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        if self.damping_increase <= 1.0 || self.damping_decrease >= 1.0 {
            return Err(Error::invalid("damping factors must satisfy increase > 1 > decrease"));
        }
        Ok(())
    }
}
