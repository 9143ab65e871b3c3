//! Orthogonal collocation on curvature with Magnus stepping between nodes.
//!
//! The unknowns are the curvature values `U_c` at the collocation points. For
//! a guess of `U_c`, the interpolant gives the body twist everywhere; one
//! Magnus step per segment of `{0, c_0, .., c_n, L}` gives the frames as a
//! product of exponentials `T(c_k) = T_0 Π exp(Ψ_i)`. The residual compares
//! the spectral derivative of `U_c` with the curvature ODE at `c_0..c_{n-1}`
//! and the interpolated tip curvature with the moment boundary condition.

use std::sync::Arc;
use web_time::Instant;

use nalgebra::{DMatrix, DVector, Vector3};

use super::lm::levenberg_marquardt;
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::liegroup::{exp_se3, Pose, Twist};
use crate::magnus::{check_convergence_bound, BoundReport, MagnusOrder};
use crate::rod::{boundary_target, curvature_rhs, RodProperties, TipWrench, STRAIN_LIMIT};
use crate::spectral::CollocationGrid;

/// Step twists and the frames they produce.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseReconstruction {
    /// `n + 2` Magnus twists, each expressed in the frame at the start of its step.
    pub twists: Vec<Twist>,
    /// Frames at `c_0, .., c_n` followed by the tip frame.
    pub poses: Vec<Pose>,
}

fn check_shape(grid: &CollocationGrid, uc: &DMatrix<f64>) -> Result<()> {
    if uc.shape() != (grid.size(), 3) {
        return Err(Error::dims(format!("{}x3 curvature matrix", grid.size()), format!("{}x{}", uc.nrows(), uc.ncols())));
    }
    if uc.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("collocation values must be finite"));
    }
    Ok(())
}

/// Steps from the base to the tip through every collocation point.
pub fn reconstruct_poses(
    grid: &CollocationGrid,
    uc: &DMatrix<f64>,
    props: &RodProperties,
    order: MagnusOrder,
) -> Result<PoseReconstruction> {
    check_shape(grid, uc)?;
    let rule = grid.rule();
    let nu = rule.nu();
    let uq = grid.values_at_quadrature(uc)?;
    let mut pose = *props.base_pose();
    let mut twists = Vec::with_capacity(grid.size() + 1);
    let mut poses = Vec::with_capacity(grid.size() + 1);
    let mut samples = [Twist::zero(); 3];
    for (seg, (start, end)) in grid.segments().enumerate() {
        let h = end - start;
        for (k, sample) in samples.iter_mut().enumerate().take(nu) {
            let row = seg * nu + k;
            *sample = Twist::rod(Vector3::new(uq[(row, 0)], uq[(row, 1)], uq[(row, 2)])) * h;
        }
        let psi = rule.step(&samples[..nu], order)?;
        pose = pose * exp_se3(&psi);
        twists.push(psi);
        poses.push(pose);
    }
    Ok(PoseReconstruction { twists, poses })
}

/// Collocation residual `E`, `(n+1)×3`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualMatrix {
    pub matrix: DMatrix<f64>,
}

impl ResidualMatrix {
    /// Columns stacked top to bottom.
    pub fn vec(&self) -> DVector<f64> {
        DVector::from_column_slice(self.matrix.as_slice())
    }

    pub fn inf_norm(&self) -> f64 {
        self.matrix.amax()
    }
}

fn residual_from(
    grid: &CollocationGrid,
    uc: &DMatrix<f64>,
    props: &RodProperties,
    wrench: &TipWrench,
    recon: &PoseReconstruction,
) -> Result<ResidualMatrix> {
    let n = grid.order();
    let mut e = DMatrix::zeros(n + 1, 3);
    let du = grid.diff_reduced() * uc;
    for i in 0..n {
        let u = Vector3::new(uc[(i, 0)], uc[(i, 1)], uc[(i, 2)]);
        let g = curvature_rhs(&u, &recon.poses[i].rotation, props, wrench);
        for j in 0..3 {
            e[(i, j)] = du[(i, j)] - g[j];
        }
    }
    let tip_pose = recon.poses.last().expect("reconstruction has a tip frame");
    let tip = grid.value_at_tip(uc)? - boundary_target(&tip_pose.rotation, props, wrench);
    for j in 0..3 {
        e[(n, j)] = tip[j];
    }
    Ok(ResidualMatrix { matrix: e })
}

pub fn assemble_residual(
    grid: &CollocationGrid,
    uc: &DMatrix<f64>,
    props: &RodProperties,
    wrench: &TipWrench,
    order: MagnusOrder,
) -> Result<ResidualMatrix> {
    let recon = reconstruct_poses(grid, uc, props, order)?;
    residual_from(grid, uc, props, wrench, &recon)
}

/// Converged (or best) collocation solution with its reconstructed frames.
#[derive(Clone, Debug)]
pub struct RodSolution {
    pub grid: Arc<CollocationGrid>,
    pub props: RodProperties,
    pub wrench: TipWrench,
    pub order: MagnusOrder,
    /// Curvature at the collocation points, one row per point.
    pub uc: DMatrix<f64>,
    pub segment_twists: Vec<Twist>,
    /// Frames at `c_0, .., c_n`, then the tip.
    pub poses: Vec<Pose>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
    /// Set when the solved curvature exceeds the strain-limit bound; the
    /// solve is still attempted.
    pub advisory: Option<BoundReport>,
}

impl RodSolution {
    pub fn tip_pose(&self) -> &Pose {
        self.poses.last().expect("solution has a tip frame")
    }

    pub fn evaluate(&self, s: f64) -> Result<(Pose, Vector3<f64>)> {
        evaluate_solution(self, s)
    }
}

/// Solves for the collocation curvatures; the default guess is the straight rod.
///
/// Non-convergence is reported through `RodSolution::converged` with the last
/// iterate; only a breakdown of the linear solves is an error.
pub fn solve_collocation(
    props: &RodProperties,
    wrench: &TipWrench,
    grid: &Arc<CollocationGrid>,
    order: MagnusOrder,
    config: &SolverConfig,
    initial_guess: Option<&DMatrix<f64>>,
) -> Result<RodSolution> {
    config.validate()?;
    if (grid.length() - props.length()).abs() > 1e-12 * props.length() {
        return Err(Error::invalid(format!(
            "grid length {} does not match rod length {}",
            grid.length(),
            props.length()
        )));
    }
    if !grid.rule().supports(order) {
        return Err(Error::invalid(format!(
            "order {order} Magnus steps need {} quadrature points, grid has {}",
            order.min_points(),
            grid.nu()
        )));
    }
    let size = grid.size();
    let x0 = match initial_guess {
        Some(g) => {
            check_shape(grid, g)?;
            DVector::from_column_slice(g.as_slice())
        }
        None => DVector::zeros(3 * size),
    };
    let start = Instant::now();
    let residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let uc = DMatrix::from_column_slice(size, 3, x.as_slice());
        if uc.iter().any(|v| !v.is_finite()) {
            return Ok(DVector::from_element(3 * size, f64::NAN));
        }
        Ok(assemble_residual(grid, &uc, props, wrench, order)?.vec())
    };
    let out = levenberg_marquardt(x0, residual, config)?;
    let uc = DMatrix::from_column_slice(size, 3, out.x.as_slice());
    let recon = reconstruct_poses(grid, &uc, props, order)?;
    let wall_time = start.elapsed().as_secs_f64();
    let peak = uc.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    let advisory = if peak > props.curvature_bound(STRAIN_LIMIT) {
        Some(check_convergence_bound(grid, peak)?)
    } else {
        None
    };
    Ok(RodSolution {
        grid: Arc::clone(grid),
        props: props.clone(),
        wrench: *wrench,
        order,
        uc,
        segment_twists: recon.twists,
        poses: recon.poses,
        iterations: out.iterations,
        residual_norm: out.residual_norm,
        converged: out.converged,
        wall_time,
        advisory,
    })
}

/// Frame and curvature at arc length `s`.
///
/// Between nodes the frame comes from a partial Magnus step starting at the
/// nearest node below `s`; at the nodes the stored frames are returned as is.
pub fn evaluate_solution(sol: &RodSolution, s: f64) -> Result<(Pose, Vector3<f64>)> {
    let grid = &sol.grid;
    let length = grid.length();
    if !(0.0..=length).contains(&s) {
        return Err(Error::OutOfRange { s, length });
    }
    let curvature = grid.interpolate(&sol.uc, s)?;
    if s == 0.0 {
        return Ok((*sol.props.base_pose(), curvature));
    }
    let nodes = grid.nodes();
    // index of the last node <= s
    let k = nodes.partition_point(|node| *node <= s) - 1;
    if nodes[k] == s {
        return Ok((sol.poses[k - 1], curvature));
    }
    let start_pose = if k == 0 { *sol.props.base_pose() } else { sol.poses[k - 1] };
    let h = s - nodes[k];
    let rule = grid.rule();
    let samples = rule
        .points()
        .iter()
        .map(|t| Ok(Twist::rod(grid.interpolate(&sol.uc, nodes[k] + t * h)?) * h))
        .collect::<Result<Vec<_>>>()?;
    let psi = rule.step(&samples, sol.order)?;
    Ok((start_pose * exp_se3(&psi), curvature))
}
