//! Browser bindings. Every export returns a JSON string for the page script;
//! the typed functions underneath also run natively for tests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::sync::Arc;

use cosserat::bench::{pose_error, shape_samples};
use cosserat::magnus::{check_convergence_bound, MagnusOrder};
use cosserat::nalgebra::{DMatrix, DVector};
use cosserat::rod::{RodProperties, TipWrench};
use cosserat::solvers::{solve_collocation, solve_shooting, SolverConfig};
use cosserat::spectral::make_grid;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct ShapeView {
    pub converged: bool,
    pub iterations: usize,
    pub solve_ms: f64,
    /// Evenly spaced points of the collocation shape, m.
    pub collocation: Vec<[f64; 3]>,
    /// Frames at the collocation points and the tip.
    pub nodes: Vec<[f64; 3]>,
    /// Steps of the shooting reference, m.
    pub shooting: Vec<[f64; 3]>,
    pub e_p_percent: Option<f64>,
    pub e_r_deg: Option<f64>,
    /// Peak curvature when it exceeds the strain-limit bound, 1/m.
    pub advisory_curvature: Option<f64>,
}

/// Default Nitinol rod under `wrench = [fx, fy, fz, mx, my, mz]`.
pub fn shape(wrench: &[f64], n: usize, order: u32, samples: usize) -> Result<ShapeView, String> {
    let w: [f64; 6] = wrench.try_into().map_err(|_| format!("wrench needs 6 values, got {}", wrench.len()))?;
    let order = MagnusOrder::from_int(order).map_err(|e| e.to_string())?;
    let rod = RodProperties::nitinol_default();
    let config = SolverConfig::default();
    let grid = Arc::new(make_grid(n, rod.length(), order.min_points()).map_err(|e| e.to_string())?);
    let w = TipWrench::from_array(w);
    let sol = solve_collocation(&rod, &w, &grid, order, &config, None).map_err(|e| e.to_string())?;
    let rows = shape_samples(&sol, samples).map_err(|e| e.to_string())?;
    let reference = solve_shooting(&rod, &w, &config, None).ok();
    let err = reference.as_ref().filter(|_| sol.converged).map(|r| pose_error(sol.tip_pose(), r.tip_pose(), rod.length()));
    Ok(ShapeView {
        converged: sol.converged,
        iterations: sol.iterations,
        solve_ms: sol.wall_time * 1e3,
        collocation: rows.iter().map(|r| r.position.into()).collect(),
        nodes: sol.poses.iter().map(|p| p.translation.into()).collect(),
        shooting: reference.map_or_else(Vec::new, |r| r.samples.iter().map(|s| s.pose.translation.into()).collect()),
        e_p_percent: err.map(|e| e.e_p),
        e_r_deg: err.map(|e| e.e_r),
        advisory_curvature: sol.advisory.map(|a| a.beta),
    })
}

#[derive(Debug, Serialize)]
pub struct InterpolationView {
    /// `(c_i, sin 8 c_i)`.
    pub nodes: Vec<[f64; 2]>,
    /// `(s, interpolant, exact)`.
    pub curve: Vec<[f64; 3]>,
    pub max_error: f64,
    pub max_derivative_error: f64,
}

/// Chebyshev interpolation of `sin(8s)` on `[0, 1]`.
pub fn interpolation(n: usize, samples: usize) -> Result<InterpolationView, String> {
    if samples < 2 {
        return Err("need at least two samples".into());
    }
    let f = |s: f64| (8.0 * s).sin();
    let grid = make_grid(n, 1.0, 2).map_err(|e| e.to_string())?;
    let values = DVector::from_iterator(n + 1, grid.points().iter().map(|&c| f(c)));
    let mut uc = DMatrix::zeros(n + 1, 3);
    uc.set_column(0, &values);
    let curve = (0..samples)
        .map(|i| {
            let s = i as f64 / (samples - 1) as f64;
            let p = grid.interpolate(&uc, s).map_err(|e| e.to_string())?;
            Ok([s, p.x, f(s)])
        })
        .collect::<Result<Vec<_>, String>>()?;
    let d = grid.differentiate(&values).map_err(|e| e.to_string())?;
    let max_derivative_error =
        d.iter().zip(grid.points()).map(|(di, &c)| (di - 8.0 * (8.0 * c).cos()).abs()).fold(0.0, f64::max);
    Ok(InterpolationView {
        nodes: grid.points().iter().map(|&c| [c, f(c)]).collect(),
        max_error: curve.iter().map(|r| (r[1] - r[2]).abs()).fold(0.0, f64::max),
        curve,
        max_derivative_error,
    })
}

#[derive(Debug, Serialize)]
pub struct SegmentView {
    pub start_mm: f64,
    pub end_mm: f64,
    pub exceeds: bool,
}

#[derive(Debug, Serialize)]
pub struct BoundView {
    pub beta: f64,
    pub h_max_mm: f64,
    pub segments: Vec<SegmentView>,
}

/// Magnus steps of an order-`n` grid on a 200 mm rod against the step bound.
pub fn bounds(n: usize, radius_mm: f64, strain_percent: f64) -> Result<BoundView, String> {
    if !(radius_mm > 0.0) {
        return Err("radius must be positive".into());
    }
    let beta = strain_percent / 100.0 / (radius_mm * 1e-3);
    let grid = make_grid(n, 0.2, 2).map_err(|e| e.to_string())?;
    let report = check_convergence_bound(&grid, beta).map_err(|e| e.to_string())?;
    Ok(BoundView {
        beta,
        h_max_mm: report.h_max * 1e3,
        segments: report
            .segments
            .iter()
            .map(|s| SegmentView { start_mm: s.start * 1e3, end_mm: s.end * 1e3, exceeds: s.exceeds_bound })
            .collect(),
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, String> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
}

#[wasm_bindgen(js_name = solveShape)]
pub fn solve_shape(wrench: &[f64], n: usize, order: u32, samples: usize) -> Result<String, String> {
    to_json(shape(wrench, n, order, samples))
}

#[wasm_bindgen(js_name = chebyshevDemo)]
pub fn chebyshev_demo(n: usize, samples: usize) -> Result<String, String> {
    to_json(interpolation(n, samples))
}

#[wasm_bindgen(js_name = boundExplorer)]
pub fn bound_explorer(n: usize, radius_mm: f64, strain_percent: f64) -> Result<String, String> {
    to_json(bounds(n, radius_mm, strain_percent))
}
