//! Magnus integration of the body-frame equation `T' = T X` over one step.
//!
//! On a step of width `h` the twist is sampled at shifted Gauss–Legendre
//! points, `X_k = h X(s0 + t_k h)`. The samples are rewritten in the centred
//! monomial basis `X_k = Σ_i (t_k - 1/2)^(i-1) Y_i` and the step twist `Ψ` is
//! a short combination of the `Y_i` and their brackets, so that
//! `T(s0 + h) = T(s0) exp(Ψ)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::{commutator, Twist};
use crate::spectral::CollocationGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MagnusOrder {
    Fourth,
    Sixth,
}

impl MagnusOrder {
    pub const ALL: [MagnusOrder; 2] = [MagnusOrder::Fourth, MagnusOrder::Sixth];

    /// Fewest quadrature points per step that reach this order.
    pub fn min_points(self) -> usize {
        match self {
            MagnusOrder::Fourth => 2,
            MagnusOrder::Sixth => 3,
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            MagnusOrder::Fourth => 4,
            MagnusOrder::Sixth => 6,
        }
    }

    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            4 => Ok(MagnusOrder::Fourth),
            6 => Ok(MagnusOrder::Sixth),
            _ => Err(Error::invalid(format!("Magnus order must be 4 or 6, got {order}"))),
        }
    }
}

impl std::fmt::Display for MagnusOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_int())
    }
}

/// Zeros of the Legendre polynomial of degree `nu`, shifted to [0, 1], ascending.
pub fn legendre_points(nu: usize) -> Result<Vec<f64>> {
    match nu {
        2 => {
            let d = 0.5 / 3f64.sqrt();
            Ok(vec![0.5 - d, 0.5 + d])
        }
        3 => {
            let d = 0.5 * 0.6f64.sqrt();
            Ok(vec![0.5 - d, 0.5, 0.5 + d])
        }
        _ => Err(Error::invalid(format!("quadrature point count must be 2 or 3, got {nu}"))),
    }
}

/// Quadrature points on [0, 1] with the inverse of `V_ij = (t_i - 1/2)^(j-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nu: usize,
    points: Vec<f64>,
    vandermonde_inv: DMatrix<f64>,
}

impl QuadratureRule {
    pub fn new(nu: usize) -> Result<Self> {
        let points = legendre_points(nu)?;
        let v = Self::vandermonde_of(&points);
        let vandermonde_inv = v
            .try_inverse()
            .ok_or_else(|| Error::invalid("singular Vandermonde matrix"))?;
        Ok(Self { nu, points, vandermonde_inv })
    }

    fn vandermonde_of(points: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(points.len(), points.len(), |i, j| (points[i] - 0.5).powi(j as i32))
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn vandermonde(&self) -> DMatrix<f64> {
        Self::vandermonde_of(&self.points)
    }

    pub fn vandermonde_inv(&self) -> &DMatrix<f64> {
        &self.vandermonde_inv
    }

    pub fn supports(&self, order: MagnusOrder) -> bool {
        self.nu >= order.min_points()
    }

    /// Centred-basis coefficients `Y_i = Σ_j (V⁻¹)_ij X_j`. Entries past `nu` are zero.
    fn basis(&self, samples: &[Twist]) -> Result<[Twist; 3]> {
        if samples.len() != self.nu {
            return Err(Error::dims(format!("{} samples", self.nu), samples.len()));
        }
        let mut y = [Twist::zero(); 3];
        for (i, yi) in y.iter_mut().enumerate().take(self.nu) {
            for (j, x) in samples.iter().enumerate() {
                *yi += *x * self.vandermonde_inv[(i, j)];
            }
        }
        Ok(y)
    }

    /// Magnus step twist from samples already scaled by the step width.
    pub fn step(&self, samples: &[Twist], order: MagnusOrder) -> Result<Twist> {
        if !self.supports(order) {
            return Err(Error::invalid(format!(
                "order {order} Magnus step needs at least {} points, rule has {}",
                order.min_points(),
                self.nu
            )));
        }
        let [y1, y2, y3] = self.basis(samples)?;
        // ∫_0^1 (t - 1/2)^2 dt = 1/12; y3 is zero when nu = 2.
        let integral = y1 + y3 * (1.0 / 12.0);
        let c12 = commutator(&y1, &y2);
        let psi = match order {
            MagnusOrder::Fourth => integral + c12 * (1.0 / 12.0),
            MagnusOrder::Sixth => {
                let c23 = commutator(&y2, &y3);
                let c113 = commutator(&y1, &commutator(&y1, &y3));
                let c212 = commutator(&y2, &c12);
                let c1112 = commutator(&y1, &commutator(&y1, &c12));
                integral + c12 * (1.0 / 12.0) - c23 * (1.0 / 240.0) + c113 * (1.0 / 360.0)
                    - c212 * (1.0 / 240.0)
                    - c1112 * (1.0 / 720.0)
            }
        };
        Ok(psi)
    }
}

/// Change of basis from point samples to centred monomial coefficients.
pub fn basis_change(samples: &[Twist], rule: &QuadratureRule) -> Result<Vec<Twist>> {
    let y = rule.basis(samples)?;
    Ok(y[..rule.nu].to_vec())
}

/// One Magnus step; the rule is chosen from the number of samples.
pub fn magnus_step(samples: &[Twist], order: MagnusOrder) -> Result<Twist> {
    QuadratureRule::new(samples.len())?.step(samples, order)
}

/// Largest step for which the Magnus series is guaranteed to converge when
/// every curvature component is bounded by `beta`.
pub fn max_step(beta: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("curvature bound must be finite and >= 0, got {beta}")));
    }
    Ok(PI / (6.0 * beta * beta + 1.0).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentCheck {
    pub start: f64,
    pub end: f64,
    pub width: f64,
    pub exceeds_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub beta: f64,
    pub h_max: f64,
    pub segments: Vec<SegmentCheck>,
}

impl BoundReport {
    pub fn any_exceeded(&self) -> bool {
        self.segments.iter().any(|s| s.exceeds_bound)
    }

    pub fn max_width(&self) -> f64 {
        self.segments.iter().map(|s| s.width).fold(0.0, f64::max)
    }
}

/// Flags every Magnus step of `grid` at least as wide as `max_step(beta)`.
///
/// Advisory only: the bound is sufficient, not necessary.
pub fn check_convergence_bound(grid: &CollocationGrid, beta: f64) -> Result<BoundReport> {
    let h_max = max_step(beta)?;
    let segments = grid
        .segments()
        .map(|(start, end)| {
            let width = end - start;
            SegmentCheck { start, end, width, exceeds_bound: width >= h_max }
        })
        .collect();
    Ok(BoundReport { beta, h_max, segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::{dexp_inv_series, exp_se3};
    use crate::spectral::make_grid;
    use nalgebra::Vector3;

    #[test]
    fn legendre_points_closed_forms() {
        let t2 = legendre_points(2).unwrap();
        assert_eq!(t2, vec![0.5 - 1.0 / (2.0 * 3f64.sqrt()), 0.5 + 1.0 / (2.0 * 3f64.sqrt())]);
        let t3 = legendre_points(3).unwrap();
        let d = (3.0f64 / 5.0).sqrt() / 2.0;
        assert!((t3[0] - (0.5 - d)).abs() < 1e-16);
        assert_eq!(t3[1], 0.5);
        assert!((t3[2] - (0.5 + d)).abs() < 1e-16);
        for t in [&t2, &t3] {
            assert!((t[0] + t[t.len() - 1] - 1.0).abs() < 1e-14);
            assert!(t.windows(2).all(|w| w[0] < w[1]));
        }
        // roots of the unshifted Legendre polynomials
        let p2 = |x: f64| 0.5 * (3.0 * x * x - 1.0);
        let p3 = |x: f64| 0.5 * (5.0 * x * x * x - 3.0 * x);
        assert!(t2.iter().all(|t| p2(2.0 * t - 1.0).abs() < 1e-15));
        assert!(t3.iter().all(|t| p3(2.0 * t - 1.0).abs() < 1e-15));
        assert!(legendre_points(4).is_err());
        assert!(legendre_points(1).is_err());
    }

    #[test]
    fn vandermonde_inverse() {
        for nu in [2, 3] {
            let rule = QuadratureRule::new(nu).unwrap();
            let prod = rule.vandermonde() * rule.vandermonde_inv();
            assert!((prod - DMatrix::identity(nu, nu)).amax() < 1e-12);
        }
    }

    fn sample_twist(seed: f64) -> Twist {
        Twist::new(
            Vector3::new(seed.sin(), (2.0 * seed).cos(), 0.3 * seed),
            Vector3::new(0.1 * seed, -seed.cos(), 1.0),
        )
    }

    #[test]
    fn basis_change_constant_and_linear() {
        let xbar = sample_twist(0.7);
        let rule = QuadratureRule::new(3).unwrap();
        let y = basis_change(&[xbar; 3], &rule).unwrap();
        assert!((y[0] - xbar).norm() < 1e-15);
        assert!(y[1].norm() < 1e-14 && y[2].norm() < 1e-14);

        let slope = sample_twist(-1.3);
        let samples: Vec<Twist> =
            rule.points().iter().map(|t| xbar + slope * (t - 0.5)).collect();
        let y = basis_change(&samples, &rule).unwrap();
        assert!((y[0] - xbar).norm() < 1e-14);
        assert!((y[1] - slope).norm() < 1e-14);
        assert!(y[2].norm() < 1e-14);
    }

    #[test]
    fn basis_change_reconstructs_samples() {
        for nu in [2, 3] {
            let rule = QuadratureRule::new(nu).unwrap();
            let samples: Vec<Twist> = (0..nu).map(|k| sample_twist(1.0 + k as f64 * 0.9)).collect();
            let y = basis_change(&samples, &rule).unwrap();
            for (k, t) in rule.points().iter().enumerate() {
                let mut rebuilt = Twist::zero();
                for (i, yi) in y.iter().enumerate() {
                    rebuilt += *yi * (t - 0.5).powi(i as i32);
                }
                assert!((rebuilt - samples[k]).norm() < 1e-12);
            }
            assert!(basis_change(&samples[..1], &rule).is_err());
        }
    }

    #[test]
    fn constant_twist_is_exact() {
        let h = 0.13;
        let x = sample_twist(2.1) * h;
        for (nu, order) in [(2, MagnusOrder::Fourth), (3, MagnusOrder::Fourth), (3, MagnusOrder::Sixth)] {
            let psi = magnus_step(&vec![x; nu], order).unwrap();
            assert!((psi - x).norm() < 1e-15, "nu={nu} order={order}");
        }
    }

    #[test]
    fn sixth_order_needs_three_points() {
        let x = sample_twist(0.1);
        assert!(magnus_step(&[x, x], MagnusOrder::Sixth).is_err());
    }

    /// Reference step: RK4 on Psi' = dexp^{-1}_{-Psi}(X(s)), Psi(0) = 0.
    fn reference_psi(x: &dyn Fn(f64) -> Twist, h: f64, steps: usize) -> Twist {
        let f = |s: f64, psi: &Twist| dexp_inv_series(&(-*psi), &x(s), 18).unwrap();
        let ds = h / steps as f64;
        let mut psi = Twist::zero();
        for i in 0..steps {
            let s = i as f64 * ds;
            let k1 = f(s, &psi);
            let k2 = f(s + ds / 2.0, &(psi + k1 * (ds / 2.0)));
            let k3 = f(s + ds / 2.0, &(psi + k2 * (ds / 2.0)));
            let k4 = f(s + ds, &(psi + k3 * ds));
            psi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (ds / 6.0);
        }
        psi
    }

    fn step_over(x: &dyn Fn(f64) -> Twist, h: f64, order: MagnusOrder) -> Twist {
        let rule = QuadratureRule::new(order.min_points()).unwrap();
        let samples: Vec<Twist> = rule.points().iter().map(|t| x(t * h) * h).collect();
        rule.step(&samples, order).unwrap()
    }

    #[test]
    fn linear_family_local_error_ratios() {
        let a = Vector3::new(2.0, -1.0, 0.5);
        let b = Vector3::new(-3.0, 4.0, 6.0);
        let x = move |s: f64| Twist::rod(a + b * s);
        for (order, expected) in [(MagnusOrder::Fourth, 32.0), (MagnusOrder::Sixth, 128.0)] {
            let err = |h: f64| (step_over(&x, h, order) - reference_psi(&x, h, 400)).norm();
            let ratio = err(0.2) / err(0.1);
            assert!(
                (ratio / expected).log2().abs() < 0.3,
                "order {order}: ratio {ratio}, expected about {expected}"
            );
        }
    }

    #[test]
    fn body_frame_convention_matches_right_multiplication() {
        let x = |s: f64| Twist::rod(Vector3::new(3.0 * s, 2.0 - s, 1.0 + 4.0 * s * s));
        let hx = |s: f64| crate::liegroup::hat6(&x(s));
        // RK4 on the 4x4 matrix, T' = T X (right) or T' = X T (left)
        let rk4 = |h: f64, right: bool| {
            let steps = 4000;
            let ds = h / steps as f64;
            let mul = |t: nalgebra::Matrix4<f64>, s: f64| if right { t * hx(s) } else { hx(s) * t };
            let mut t = nalgebra::Matrix4::<f64>::identity();
            for i in 0..steps {
                let s = i as f64 * ds;
                let k1 = mul(t, s);
                let k2 = mul(t + k1 * (ds / 2.0), s + ds / 2.0);
                let k3 = mul(t + k2 * (ds / 2.0), s + ds / 2.0);
                let k4 = mul(t + k3 * ds, s + ds);
                t += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (ds / 6.0);
            }
            t
        };
        let err = |h: f64| (exp_se3(&step_over(&x, h, MagnusOrder::Sixth)).to_matrix() - rk4(h, true)).amax();
        let (coarse, fine) = (err(0.3), err(0.15));
        assert!(coarse < 1e-5, "{coarse}");
        assert!(((coarse / fine).log2() - 7.0).abs() < 0.5, "{coarse} {fine}");
        // the left-multiplied solution differs at the bracket term
        let got = exp_se3(&step_over(&x, 0.3, MagnusOrder::Sixth)).to_matrix();
        assert!((got - rk4(0.3, false)).amax() > 1e-4);
    }

    #[test]
    fn max_step_table_values() {
        assert!((max_step(50.0).unwrap() * 1e3 - 25.65).abs() < 0.01);
        assert!((max_step(12.5).unwrap() * 1e3 - 102.54).abs() < 0.01);
        assert_eq!(max_step(0.0).unwrap(), PI);
        assert!(max_step(-1.0).is_err());
        assert!(max_step(f64::NAN).is_err());
    }

    #[test]
    fn bound_check_flags_wide_segments() {
        let grid = make_grid(10, 0.2, 3).unwrap();
        let report = check_convergence_bound(&grid, 50.0).unwrap();
        assert_eq!(report.segments.len(), 12);
        assert!(report.any_exceeded());
        assert!((report.max_width() * 1e3 - 28.17).abs() < 0.01);
        for s in &report.segments {
            assert_eq!(s.exceeds_bound, s.width >= report.h_max);
        }

        let report = check_convergence_bound(&grid, 0.0).unwrap();
        assert!(!report.any_exceeded());

        let grid = make_grid(2, 0.2, 3).unwrap();
        let report = check_convergence_bound(&grid, 25.0).unwrap();
        let flagged: Vec<f64> =
            report.segments.iter().filter(|s| s.exceeds_bound).map(|s| s.width * 1e3).collect();
        assert_eq!(flagged.len(), 2);
        assert!(flagged.iter().all(|w| (w - 86.60).abs() < 0.01));
    }
}
