//! Quick self-checks against closed-form solutions.

use std::sync::Arc;

use serde::Serialize;

use crate::analysis::{classical_solution, solve_radial_with};
use crate::continuation::{extrapolate_in_n, fit_fold_pairs, newton_solve, ExtrapolationOptions, NewtonOptions};
use crate::discretization::SolutionField;
use crate::geometry::{BoundarySpec, PolarGrid};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Lower-branch `B` with `8B/(1+B)² = lambda_sq`.
fn classical_b(lambda_sq: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 8.0 * mid / (1.0 + mid).powi(2) < lambda_sq {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn profile_error(n: usize) -> crate::Result<f64> {
    let exact = classical_solution(classical_b(1.0));
    let grid = Arc::new(PolarGrid::new(n, &BoundarySpec::full_dirichlet())?);
    let u = newton_solve(&SolutionField::zeros(grid.clone(), 1.0), 1.0, &NewtonOptions::default())?;
    Ok((0..grid.n_r())
        .map(|i| (u.ring(i)[0] - exact.profile(grid.rho()[i])).abs())
        .fold(0.0, f64::max))
}

fn check(name: &'static str, run: impl FnOnce() -> crate::Result<(bool, String)>) -> Check {
    match run() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

pub fn run_validation() -> Vec<Check> {
    vec![
        check("classical profile", || {
            let e: Vec<f64> = [32, 64, 128].iter().map(|&n| profile_error(n)).collect::<crate::Result<_>>()?;
            let order = (e[1] / e[2]).log2();
            Ok((
                e[2] < 1e-3 && (1.7..=2.3).contains(&order),
                format!("max error {:.3e} at n = 128, order {order:.2}", e[2]),
            ))
        }),
        check("fold fit", || {
            let pairs: Vec<(f64, f64)> = (0..10)
                .map(|k| 1.0 + 0.35 * k as f64 / 9.0)
                .map(|s| (s, 2.0 - 0.5 * (s - 1.4) * (s - 1.4)))
                .collect();
            let f = fit_fold_pairs(&pairs, 10, 1e-4)?;
            let err = ((f.lambda_cr_sq - 2.0) / 2.0).abs().max(((f.c - 0.5) / 0.5).abs()).max(((f.u0 - 1.4) / 1.4).abs());
            Ok((err < 1e-10, format!("relative error {err:.1e}")))
        }),
        check("radial solver", || {
            let exact = classical_solution(0.5);
            let p = solve_radial_with(exact.lambda_sq, 0.0, 10_000, 1e-12)?;
            let err = p.r.iter().zip(&p.v).map(|(r, v)| (v - exact.profile(*r)).abs()).fold(0.0, f64::max);
            Ok((err < 1e-8, format!("max error {err:.3e}")))
        }),
        check("classical critical value", || {
            let est = extrapolate_in_n(&BoundarySpec::full_dirichlet(), &ExtrapolationOptions::default())?;
            let a = est.extrapolated_lambda_cr_sq;
            Ok(((a - 2.0).abs() <= 0.01, format!("lambda_cr^2 = {a:.6}, fit quality {:.2e}", est.fit_quality)))
        }),
    ]
}
