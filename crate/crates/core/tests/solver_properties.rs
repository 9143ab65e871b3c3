use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use proptest::prelude::*;

use cosserat::bench::pose_error;
use cosserat::liegroup::rotation_angle_between;
use cosserat::magnus::MagnusOrder;
use cosserat::rod::{RodProperties, TipWrench};
use cosserat::solvers::lm::forward_jacobian;
use cosserat::solvers::{assemble_residual, solve_collocation, solve_shooting, SolverConfig};
use cosserat::spectral::{make_grid, CollocationGrid};

fn grid(n: usize, order: MagnusOrder) -> Arc<CollocationGrid> {
    Arc::new(make_grid(n, 0.2, order.min_points()).unwrap())
}

/// Collocation along a 3-step ramp from the straight rod, as in the sweep.
fn ramp_solve(
    rod: &RodProperties,
    w: &TipWrench,
    g: &Arc<CollocationGrid>,
    order: MagnusOrder,
) -> cosserat::solvers::RodSolution {
    let cfg = SolverConfig::default();
    let mut guess: Option<DMatrix<f64>> = None;
    let mut last = None;
    for k in 1..=3 {
        let sol = solve_collocation(rod, &w.scaled(k as f64 / 3.0), g, order, &cfg, guess.as_ref()).unwrap();
        guess = Some(sol.uc.clone());
        last = Some(sol);
    }
    last.unwrap()
}

fn wrench_strategy() -> impl Strategy<Value = TipWrench> {
    (proptest::array::uniform3(-1.0..1.0f64), proptest::array::uniform3(-0.5..0.5f64))
        .prop_map(|(f, m)| TipWrench::new(Vector3::from(f), Vector3::from(m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn collocation_agrees_with_shooting(w in wrench_strategy()) {
        let rod = RodProperties::nitinol_default();
        let g = grid(10, MagnusOrder::Sixth);
        let col = ramp_solve(&rod, &w, &g, MagnusOrder::Sixth);
        prop_assert!(col.converged);
        let shoot = solve_shooting(&rod, &w, &SolverConfig::default(), None).unwrap();
        let e = pose_error(col.tip_pose(), shoot.tip_pose(), rod.length());
        prop_assert!(e.e_p < 0.01, "position {} %", e.e_p);
        let angle = rotation_angle_between(&col.tip_pose().rotation, &shoot.tip_pose().rotation).to_degrees();
        prop_assert!(angle < 0.06, "rotation {angle} deg");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn forward_jacobian_matches_central_differences(
        n in 2usize..=8,
        seed in proptest::collection::vec(-8.0..8.0f64, 27),
        w in wrench_strategy(),
    ) {
        let rod = RodProperties::nitinol_default();
        let g = grid(n, MagnusOrder::Fourth);
        let size = g.size();
        let x = DVector::from_iterator(3 * size, seed.iter().cycle().copied().take(3 * size));
        let mut f = |x: &DVector<f64>| {
            let uc = DMatrix::from_column_slice(size, 3, x.as_slice());
            Ok(assemble_residual(&g, &uc, &rod, &w, MagnusOrder::Fourth)?.vec())
        };
        let fx = f(&x).unwrap();
        let jac = forward_jacobian(&mut f, &x, &fx, 1e-7).unwrap();
        let h = 1e-5;
        for j in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (f(&xp).unwrap() - f(&xm).unwrap()) / (2.0 * h);
            let scale = col.amax().max(jac.column(j).amax()).max(1e-3);
            let diff = (jac.column(j) - &col).amax();
            prop_assert!(diff <= 1e-5 * scale, "column {j}: {diff} vs scale {scale}");
        }
    }
}

#[test]
fn pure_moment_is_exact_for_every_order() {
    let rod = RodProperties::nitinol_default();
    let ei = rod.stiffness()[(0, 0)];
    for order in MagnusOrder::ALL {
        for n in 1..=10 {
            let g = grid(n, order);
            let w = TipWrench::new(Vector3::zeros(), Vector3::new(0.0, 0.3, 0.0));
            let sol = solve_collocation(&rod, &w, &g, order, &SolverConfig::default(), None).unwrap();
            assert!(sol.converged, "n={n} order {order}");
            assert!(sol.residual_norm < 1e-9);
            for row in sol.uc.row_iter() {
                assert!((row[1] - 0.3 / ei).abs() < 1e-8, "n={n}: {row}");
            }
        }
    }
}

#[test]
fn warm_start_saves_iterations() {
    // informational: the ramp protocol should rarely cost more than a cold solve
    let rod = RodProperties::nitinol_default();
    let g = grid(6, MagnusOrder::Sixth);
    let cfg = SolverConfig::default();
    let levels = [-1.0, 1.0];
    let moments = [-0.5, 0.5];
    let (mut better, mut total) = (0, 0);
    for &fx in &levels {
        for &fy in &levels {
            for &mx in &moments {
                for &mz in &moments {
                    let w = TipWrench::from_array([fx, fy, 0.5, mx, 0.25, mz]);
                    let cold = solve_collocation(&rod, &w, &g, MagnusOrder::Sixth, &cfg, None).unwrap();
                    let mut guess: Option<DMatrix<f64>> = None;
                    let mut iterations = 0;
                    for k in 1..=3 {
                        let sol = solve_collocation(&rod, &w.scaled(k as f64 / 3.0), &g, MagnusOrder::Sixth, &cfg, guess.as_ref())
                            .unwrap();
                        guess = Some(sol.uc.clone());
                        if k == 3 {
                            iterations = sol.iterations;
                        }
                    }
                    total += 1;
                    if iterations <= cold.iterations {
                        better += 1;
                    }
                }
            }
        }
    }
    println!("warm start needed no more final-step iterations than a cold start in {better}/{total} cases");
}
