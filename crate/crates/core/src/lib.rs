//! Static Cosserat rod solutions from Chebyshev collocation on curvature and
//! Magnus integration on SE(3).
//!
//! The frames along a converged rod are a product of exponentials
//! `T(c_k) = T_0 Π exp(Ψ_i)`, one Magnus twist per segment between collocation
//! points. A shooting solver over the same equations serves as the reference.
//!
//! ```
//! use std::sync::Arc;
//! use cosserat::{magnus::MagnusOrder, rod::{RodProperties, TipWrench}, solvers, spectral};
//! use nalgebra::Vector3;
//!
//! let rod = RodProperties::nitinol_default();
//! let grid = Arc::new(spectral::make_grid(8, rod.length(), 3).unwrap());
//! let wrench = TipWrench::new(Vector3::new(0.0, 0.5, 0.0), Vector3::zeros());
//! let sol = solvers::solve_collocation(
//!     &rod, &wrench, &grid, MagnusOrder::Sixth, &Default::default(), None,
//! ).unwrap();
//! assert!(sol.converged);
//! assert!(sol.tip_pose().translation.y > 0.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod liegroup;
pub mod magnus;
pub mod rod;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
pub use nalgebra;
