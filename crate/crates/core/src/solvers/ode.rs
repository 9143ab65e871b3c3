//! Adaptive Dormand–Prince 5(4) integrator for fixed-size states.

use nalgebra::SVector;

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights (same as the last row of `A`).
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
/// Fifth minus fourth order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 1_000_000;

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

/// Integrates `y' = f(s, y)` from `s0` to `s1 > s0`, returning every accepted
/// step including both endpoints.
pub fn integrate<const N: usize, F>(
    mut f: F,
    s0: f64,
    s1: f64,
    y0: SVector<f64, N>,
    tol: Tolerances,
) -> Result<Vec<(f64, SVector<f64, N>)>>
where
    F: FnMut(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let span = s1 - s0;
    if !(span > 0.0) {
        return Err(Error::invalid("integration interval must have positive length"));
    }
    let mut s = s0;
    let mut y = y0;
    let mut k = [SVector::<f64, N>::zeros(); 7];
    k[0] = f(s, &y);
    let mut h = initial_step(&k[0], &y, span, tol);
    let mut out = vec![(s, y)];
    let mut err_prev: f64 = 1e-4;

    for _ in 0..MAX_STEPS {
        let last = s + 1.01 * h >= s1;
        if last {
            h = s1 - s;
        }
        for stage in 1..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(stage) {
                if A[stage][j] != 0.0 {
                    yi += kj * (h * A[stage][j]);
                }
            }
            k[stage] = f(s + C[stage] * h, &yi);
        }
        let mut y_new = y;
        let mut err_vec = SVector::<f64, N>::zeros();
        for i in 0..7 {
            if B5[i] != 0.0 {
                y_new += k[i] * (h * B5[i]);
            }
            if E[i] != 0.0 {
                err_vec += k[i] * (h * E[i]);
            }
        }
        let err = ((0..N)
            .map(|i| {
                let sc = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
                (err_vec[i] / sc).powi(2)
            })
            .sum::<f64>()
            / N as f64)
            .sqrt();
        if !err.is_finite() {
            return Err(Error::Integration { s, reason: "non-finite state".into() });
        }
        if err <= 1.0 {
            s = if last { s1 } else { s + h };
            y = y_new;
            // first-same-as-last
            k[0] = k[6];
            out.push((s, y));
            if last {
                return Ok(out);
            }
            // PI step-size control
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0)).clamp(0.2, 5.0)
            };
            err_prev = err.max(1e-4);
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
        if h < 1e-14 * span {
            return Err(Error::Integration { s, reason: "step size underflow".into() });
        }
    }
    Err(Error::Integration { s, reason: "too many steps".into() })
}

fn initial_step<const N: usize>(f0: &SVector<f64, N>, y0: &SVector<f64, N>, span: f64, tol: Tolerances) -> f64 {
    let sc = y0.map(|y| tol.abs + tol.rel * y.abs());
    let d0 = (y0.component_div(&sc).norm_squared() / N as f64).sqrt();
    let d1 = (f0.component_div(&sc).norm_squared() / N as f64).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span.max(1.0) } else { 0.01 * d0 / d1 };
    h.min(span).max(1e-10 * span)
}
