//! Chebyshev collocation on [0, L].
//!
//! Collocation points are the zeros of `T_{n+1}` mapped to arc length by
//! `x(s) = (2s - L)/L`, stored in ascending order. Between consecutive nodes of
//! `{0, c_0, .., c_n, L}` the grid also carries `nu` shifted Gauss–Legendre
//! points per segment, where the Magnus steps sample the curvature.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, RowDVector, Vector3};

use crate::error::{Error, Result};
use crate::magnus::QuadratureRule;

/// `T_0(x) ..= T_degree(x)` by the three-term recurrence.
fn chebyshev_values(degree: usize, x: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(degree + 1);
    t.push(1.0);
    if degree >= 1 {
        t.push(x);
    }
    for k in 2..=degree {
        let next = 2.0 * x * t[k - 1] - t[k - 2];
        t.push(next);
    }
    t
}

fn to_unit(s: f64, length: f64) -> f64 {
    (2.0 * s - length) / length
}

/// `T_k(x(s))` for `s` in `[0, length]`.
pub fn chebyshev_eval(k: usize, s: f64, length: f64) -> Result<f64> {
    if !(length > 0.0) {
        return Err(Error::invalid(format!("length must be positive, got {length}")));
    }
    if !(0.0..=length).contains(&s) {
        return Err(Error::OutOfRange { s, length });
    }
    Ok(chebyshev_values(k, to_unit(s, length))[k])
}

/// Collocation grid with every linear operator the solver needs, built once.
#[derive(Clone, Debug)]
pub struct CollocationGrid {
    order: usize,
    length: f64,
    rule: QuadratureRule,
    points: Vec<f64>,
    diff_full: DMatrix<f64>,
    diff_reduced: DMatrix<f64>,
    /// A: modal coefficients -> values at quadrature points (first column halved).
    modal_eval: DMatrix<f64>,
    /// B: collocation values -> modal coefficients.
    modal_coeff: DMatrix<f64>,
    /// A·B.
    quad_interp: DMatrix<f64>,
    quad_points: Vec<f64>,
    boundary_row: RowDVector<f64>,
}

/// Builds the grid for a degree-`n` interpolant on `[0, length]` with `nu`
/// quadrature points per Magnus step.
pub fn make_grid(n: usize, length: f64, nu: usize) -> Result<CollocationGrid> {
    if n < 1 {
        return Err(Error::invalid("polynomial order must be at least 1"));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::invalid(format!("length must be positive, got {length}")));
    }
    let rule = QuadratureRule::new(nu)?;
    let t = rule.points().to_vec();
    let size = n + 1;

    // Zeros of T_{n+1}: x_k = cos(theta_k), theta_k = (2k+1)pi/(2n+2). Reversing k
    // gives ascending x.
    let thetas: Vec<f64> =
        (0..size).rev().map(|k| (2 * k + 1) as f64 * PI / (2 * size) as f64).collect();
    let xs: Vec<f64> = thetas.iter().map(|th| th.cos()).collect();
    let points: Vec<f64> = xs.iter().map(|x| 0.5 * length * (1.0 + x)).collect();

    // T'_{n+1}(cos th) = (n+1) sin((n+1) th) / sin th; at a zero of T_{n+1},
    // T''/T' = x / (1 - x^2).
    let dt: Vec<f64> = thetas
        .iter()
        .map(|th| size as f64 * (size as f64 * th).sin() / th.sin())
        .collect();
    let scale = 2.0 / length;
    let diff_full = DMatrix::from_fn(size, size, |i, j| {
        if i == j {
            scale * 0.5 * xs[i] / (1.0 - xs[i] * xs[i])
        } else {
            scale * dt[i] / ((xs[i] - xs[j]) * dt[j])
        }
    });
    let diff_reduced = diff_full.rows(0, n).into_owned();

    let modal_coeff = DMatrix::from_fn(size, size, |i, k| {
        2.0 / size as f64 * chebyshev_values(n, xs[k])[i]
    });

    let mut nodes = Vec::with_capacity(size + 2);
    nodes.push(0.0);
    nodes.extend_from_slice(&points);
    nodes.push(length);
    let quad_points: Vec<f64> = nodes
        .windows(2)
        .flat_map(|w| t.iter().map(move |tk| w[0] + tk * (w[1] - w[0])))
        .collect();

    let modal_row = |s: f64| {
        let mut row = RowDVector::from_vec(chebyshev_values(n, to_unit(s, length)));
        row[0] *= 0.5;
        row
    };
    let mut modal_eval = DMatrix::zeros(quad_points.len(), size);
    for (r, q) in quad_points.iter().enumerate() {
        modal_eval.set_row(r, &modal_row(*q));
    }
    let quad_interp = &modal_eval * &modal_coeff;
    let boundary_row = modal_row(length) * &modal_coeff;

    Ok(CollocationGrid {
        order: n,
        length,
        rule,
        points,
        diff_full,
        diff_reduced,
        modal_eval,
        modal_coeff,
        quad_interp,
        quad_points,
        boundary_row,
    })
}

impl CollocationGrid {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Quadrature points per Magnus step.
    pub fn nu(&self) -> usize {
        self.rule.nu()
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn size(&self) -> usize {
        self.order + 1
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn diff_full(&self) -> &DMatrix<f64> {
        &self.diff_full
    }

    /// `diff_full` without its last row.
    pub fn diff_reduced(&self) -> &DMatrix<f64> {
        &self.diff_reduced
    }

    pub fn modal_eval(&self) -> &DMatrix<f64> {
        &self.modal_eval
    }

    pub fn modal_coeff(&self) -> &DMatrix<f64> {
        &self.modal_coeff
    }

    pub fn quad_interp(&self) -> &DMatrix<f64> {
        &self.quad_interp
    }

    pub fn quad_points(&self) -> &[f64] {
        &self.quad_points
    }

    pub fn boundary_row(&self) -> &RowDVector<f64> {
        &self.boundary_row
    }

    /// Step boundaries `{0, c_0, .., c_n, L}`.
    pub fn nodes(&self) -> Vec<f64> {
        let mut nodes = Vec::with_capacity(self.order + 3);
        nodes.push(0.0);
        nodes.extend_from_slice(&self.points);
        nodes.push(self.length);
        nodes
    }

    /// `(start, end)` of each of the `n + 2` Magnus steps.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.points.len();
        (0..=n).map(move |i| {
            let start = if i == 0 { 0.0 } else { self.points[i - 1] };
            let end = if i == n { self.length } else { self.points[i] };
            (start, end)
        })
    }

    pub fn max_segment_width(&self) -> f64 {
        self.segments().map(|(a, b)| b - a).fold(0.0, f64::max)
    }

    fn check_values(&self, rows: usize) -> Result<()> {
        if rows != self.size() {
            return Err(Error::dims(format!("{} collocation values", self.size()), rows));
        }
        Ok(())
    }

    pub fn differentiate(&self, values: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_values(values.len())?;
        Ok(&self.diff_full * values)
    }

    /// Interpolated values at every quadrature point; one column per component.
    pub fn values_at_quadrature(&self, uc: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_values(uc.nrows())?;
        Ok(&self.quad_interp * uc)
    }

    /// Interpolant of a `(n+1)×3` value matrix at `s = L`.
    pub fn value_at_tip(&self, uc: &DMatrix<f64>) -> Result<Vector3<f64>> {
        self.check_values(uc.nrows())?;
        if uc.ncols() != 3 {
            return Err(Error::dims("3 columns", uc.ncols()));
        }
        let row = &self.boundary_row * uc;
        Ok(Vector3::new(row[0], row[1], row[2]))
    }

    /// Row mapping collocation values to the interpolant at arc length `s`.
    pub fn interpolation_row(&self, s: f64) -> Result<RowDVector<f64>> {
        if !(0.0..=self.length).contains(&s) {
            return Err(Error::OutOfRange { s, length: self.length });
        }
        let mut row =
            RowDVector::from_vec(chebyshev_values(self.order, to_unit(s, self.length)));
        row[0] *= 0.5;
        Ok(row * &self.modal_coeff)
    }

    /// Interpolant of the `(n+1)×3` value matrix at arc length `s`.
    pub fn interpolate(&self, uc: &DMatrix<f64>, s: f64) -> Result<Vector3<f64>> {
        self.check_values(uc.nrows())?;
        let row = self.interpolation_row(s)? * uc;
        Ok(Vector3::new(row[0], row[1], row[2]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Power-basis polynomial `Σ a_k s^k`.
    fn poly(coeffs: &[f64], s: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    fn poly_deriv(coeffs: &[f64], s: f64) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * s + k as f64 * c)
    }

    #[test]
    fn chebyshev_eval_cases() {
        let l = 0.7;
        assert_eq!(chebyshev_eval(0, 0.3, l).unwrap(), 1.0);
        assert_eq!(chebyshev_eval(1, l, l).unwrap(), 1.0);
        assert_eq!(chebyshev_eval(1, 0.0, l).unwrap(), -1.0);
        let s = 0.3 * l;
        let x = (2.0 * s - l) / l;
        let want = (5.0 * x.acos()).cos();
        assert!((chebyshev_eval(5, s, l).unwrap() - want).abs() < 1e-14);
        assert!(chebyshev_eval(3, -1e-9, l).is_err());
        assert!(chebyshev_eval(3, l + 1e-9, l).is_err());
    }

    #[test]
    fn grid_points_n2() {
        let g = make_grid(2, 0.2, 3).unwrap();
        let want: Vec<f64> = (0..3)
            .map(|k| 0.1 * (1.0 + ((2 * k + 1) as f64 * PI / 6.0).cos()))
            .rev()
            .collect();
        for (c, w) in g.points().iter().zip(&want) {
            assert!((c - w).abs() < 1e-15);
        }
        assert!((g.points()[0] * 1e3 - 13.397).abs() < 1e-3);
        assert!((g.points()[1] * 1e3 - 100.0).abs() < 1e-12);
        assert!((g.points()[2] * 1e3 - 186.603).abs() < 1e-3);
        assert!((g.max_segment_width() * 1e3 - 86.60).abs() < 0.005);
        assert!((make_grid(4, 0.2, 3).unwrap().max_segment_width() * 1e3 - 58.78).abs() < 0.005);
    }

    #[test]
    fn grid_shapes() {
        for nu in [2, 3] {
            let g = make_grid(4, 1.5, nu).unwrap();
            let m = nu * (4 + 2);
            assert_eq!(g.quad_points().len(), m);
            assert_eq!(g.modal_eval().shape(), (m, 5));
            assert_eq!(g.modal_coeff().shape(), (5, 5));
            assert_eq!(g.diff_reduced().shape(), (4, 5));
            assert!(g.quad_points().windows(2).all(|w| w[0] < w[1]));
            assert!(g.quad_points().iter().all(|q| *q > 0.0 && *q < 1.5));
        }
        assert!(make_grid(0, 1.0, 2).is_err());
        assert!(make_grid(3, 0.0, 2).is_err());
        assert!(make_grid(3, 1.0, 4).is_err());
    }

    #[test]
    fn points_are_chebyshev_zeros() {
        for n in 1..=12 {
            let g = make_grid(n, 2.5, 2).unwrap();
            assert!(g.points().windows(2).all(|w| w[0] < w[1]));
            for c in g.points() {
                assert!(*c > 0.0 && *c < 2.5);
                assert!(chebyshev_eval(n + 1, *c, 2.5).unwrap().abs() < 1e-13);
            }
        }
    }

    #[test]
    fn differentiation_cases() {
        let g = make_grid(6, 0.9, 2).unwrap();
        let ones = DVector::from_element(7, 3.25);
        assert!(g.differentiate(&ones).unwrap().amax() < 1e-10);
        let sq = DVector::from_iterator(7, g.points().iter().map(|c| c * c));
        let d = g.differentiate(&sq).unwrap();
        for (di, c) in d.iter().zip(g.points()) {
            assert!((di - 2.0 * c).abs() < 1e-10);
        }
        assert!(g.differentiate(&DVector::zeros(6)).is_err());

        // reference errors from an independent least-squares Chebyshev fit
        for (n, want) in [(10, 9.86233047783891e-3), (14, 9.203050388428835e-6), (20, 3.011990656887065e-11)] {
            let g = make_grid(n, 1.0, 2).unwrap();
            let sin = DVector::from_iterator(n + 1, g.points().iter().map(|c| (8.0 * c).sin()));
            let d = g.differentiate(&sin).unwrap();
            let err = d
                .iter()
                .zip(g.points())
                .map(|(di, c)| (di - 8.0 * (8.0 * c).cos()).abs())
                .fold(0.0, f64::max);
            assert!((err - want).abs() < 1e-3 * want + 1e-12, "n={n}: max derivative error {err}");
        }
    }

    #[test]
    fn quadrature_interpolation_cases() {
        let g = make_grid(4, 0.6, 3).unwrap();
        assert!(g.values_at_quadrature(&DMatrix::zeros(5, 3)).unwrap().amax() == 0.0);
        let kappa = DMatrix::from_fn(5, 3, |_, j| [1.5, -2.0, 0.25][j]);
        let uq = g.values_at_quadrature(&kappa).unwrap();
        for r in 0..uq.nrows() {
            for (j, k) in [1.5, -2.0, 0.25].iter().enumerate() {
                assert!((uq[(r, j)] - k).abs() < 1e-12);
            }
        }
        let cubic = DMatrix::from_fn(5, 3, |i, j| g.points()[i].powi(j as i32 + 1));
        let uq = g.values_at_quadrature(&cubic).unwrap();
        for (r, q) in g.quad_points().iter().enumerate() {
            for j in 0..3 {
                assert!((uq[(r, j)] - q.powi(j as i32 + 1)).abs() < 1e-10);
            }
        }
        assert!(g.values_at_quadrature(&DMatrix::zeros(4, 3)).is_err());
    }

    #[test]
    fn tip_value_cases() {
        let l = 0.35;
        let g = make_grid(5, l, 2).unwrap();
        assert_eq!(g.value_at_tip(&DMatrix::zeros(6, 3)).unwrap(), Vector3::zeros());
        let kappa = DMatrix::from_fn(6, 3, |_, j| [0.5, 1.0, -4.0][j]);
        let tip = g.value_at_tip(&kappa).unwrap();
        assert!((tip - Vector3::new(0.5, 1.0, -4.0)).amax() < 1e-12);
        let alpha = 2.75;
        let line = DMatrix::from_fn(6, 3, |i, _| alpha * g.points()[i]);
        let tip = g.value_at_tip(&line).unwrap();
        assert!((tip - Vector3::repeat(alpha * l)).amax() < 1e-12);
        assert!(g.value_at_tip(&DMatrix::zeros(6, 2)).is_err());
    }

    #[test]
    fn max_spacing_decreases_with_order() {
        let widths: Vec<f64> =
            (1..=16).map(|n| make_grid(n, 0.2, 2).unwrap().max_segment_width()).collect();
        assert!(widths.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn interpolation_is_a_projection() {
        // Resampling the interpolant at the collocation points reproduces the
        // original values, so applying the interpolation twice equals once.
        let g = make_grid(7, 1.3, 3).unwrap();
        let vals = DMatrix::from_fn(8, 3, |i, j| ((i * 3 + j) as f64 * 0.77).sin());
        let resampled = DMatrix::from_fn(8, 3, |i, j| {
            (g.interpolation_row(g.points()[i]).unwrap() * vals.column(j))[0]
        });
        assert!((&resampled - &vals).amax() < 1e-10);
        let once = g.values_at_quadrature(&vals).unwrap();
        let twice = g.values_at_quadrature(&resampled).unwrap();
        assert!((once - twice).amax() < 1e-10);
    }

    proptest! {
        #[test]
        fn differentiation_exact_on_polynomials(
            n in 1usize..=10,
            coeffs in proptest::collection::vec(-3.0..3.0f64, 11),
            length in 0.1..3.0f64,
        ) {
            let g = make_grid(n, length, 2).unwrap();
            let c = &coeffs[..=n];
            let vals = DVector::from_iterator(n + 1, g.points().iter().map(|s| poly(c, *s / length)));
            let d = g.differentiate(&vals).unwrap();
            for (di, s) in d.iter().zip(g.points()) {
                let want = poly_deriv(c, s / length) / length;
                prop_assert!((di - want).abs() < 1e-10 * (1.0 + want.abs()) / length.min(1.0),
                    "n={} err={}", n, (di - want).abs());
            }
            let ones = DVector::from_element(n + 1, 1.0);
            prop_assert!(g.differentiate(&ones).unwrap().amax() < 1e-10 / length.min(1.0));
        }

        #[test]
        fn modal_coefficients_recovered(
            n in 1usize..=10,
            modal in proptest::collection::vec(-2.0..2.0f64, 11),
        ) {
            let length = 0.8;
            let g = make_grid(n, length, 3).unwrap();
            let a = DVector::from_column_slice(&modal[..=n]);
            let vals = DVector::from_iterator(n + 1, g.points().iter().map(|s| {
                let t = chebyshev_values(n, to_unit(*s, length));
                0.5 * a[0] * t[0] + (1..=n).map(|k| a[k] * t[k]).sum::<f64>()
            }));
            let back = g.modal_coeff() * vals;
            prop_assert!((back - a).amax() < 1e-10);
        }
    }
}
