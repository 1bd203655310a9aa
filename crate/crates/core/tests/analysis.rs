use std::sync::Arc;

use fkcrit::analysis::{analyze_core_with, core_radial_mismatch, solve_radial_with};
use fkcrit::{
    analyze_core, boundary_layer_thickness, classical_solution, fit_scaling_law, newton_solve, solve_radial,
    trace_branch, BoundarySpec, Error, Fraction, NewtonOptions, PolarGrid, SolutionField, StepPolicy,
};

fn near_critical(spec: &BoundarySpec, n: usize) -> SolutionField {
    let grid = Arc::new(PolarGrid::new(n, spec).unwrap());
    trace_branch(grid, &StepPolicy::default()).unwrap().final_field.unwrap()
}

fn periodic(segments: u32, p: u64, q: u64) -> BoundarySpec {
    BoundarySpec::periodic(segments, Fraction::new(p, q).unwrap()).unwrap()
}

// u(rho) = 2 ln((1 + B) / (1 + B rho^2)) and its first two derivatives
fn classical(b: f64, rho: f64) -> (f64, f64, f64) {
    let q = 1.0 + b * rho * rho;
    let u = 2.0 * ((1.0 + b) / q).ln();
    let du = -4.0 * b * rho / q;
    let d2u = (-4.0 * b * q + 8.0 * b * b * rho * rho) / (q * q);
    (u, du, d2u)
}

#[test]
fn rescaled_core_solves_the_radial_problem() {
    for b in [0.2, 0.5, 1.0] {
        let lambda_sq = 8.0 * b / ((1.0 + b) * (1.0 + b));
        for rho_star in [0.3, 0.6, 0.9] {
            let (u_star, _, _) = classical(b, rho_star);
            let big = lambda_sq * rho_star * rho_star * u_star.exp();
            let mut worst: f64 = 0.0;
            for k in 1..=1000 {
                let r = k as f64 / 1000.0;
                let (u, du, d2u) = classical(b, rho_star * r);
                let v = u - u_star;
                let dv = rho_star * du;
                let d2v = rho_star * rho_star * d2u;
                worst = worst.max((d2v + dv / r + big * v.exp()).abs());
            }
            assert!(worst < 1e-8, "B {b}, rho* {rho_star}: {worst}");
        }
    }
}

#[test]
fn radial_solver_matches_rescaled_classical_core() {
    let b: f64 = 0.5;
    let lambda_sq = 8.0 * b / ((1.0 + b) * (1.0 + b));
    let rho_star = 0.7;
    let (u_star, _, _) = classical(b, rho_star);
    let big = lambda_sq * rho_star * rho_star * u_star.exp();
    let profile = solve_radial(big, 0.0).unwrap();
    for k in 0..=50 {
        let r = k as f64 / 50.0;
        let expected = classical(b, rho_star * r).0 - u_star;
        assert!((profile.eval(r) - expected).abs() < 1e-6);
    }
}

#[test]
fn radial_solver_on_a_fine_mesh() {
    let b: f64 = 0.5;
    let exact = classical_solution(b);
    let profile = solve_radial_with(exact.lambda_sq, 0.0, 10_000, 1e-13).unwrap();
    let worst = profile
        .r
        .iter()
        .zip(&profile.v)
        .map(|(&r, &v)| (v - exact.profile(r)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
    let flat = solve_radial(0.0, 0.0).unwrap();
    assert!(flat.v.iter().all(|&v| v == 0.0));
    assert!(matches!(solve_radial(2.0, 0.0), Err(Error::Supercritical { .. })));
}

#[test]
fn full_dirichlet_core_is_the_whole_disk() {
    let grid = Arc::new(PolarGrid::new(64, &BoundarySpec::full_dirichlet()).unwrap());
    let field = newton_solve(&SolutionField::zeros(grid.clone(), 1.0), 1.0, &NewtonOptions::default()).unwrap();
    let core = analyze_core(&field).unwrap();
    let last = grid.n_r() - 1;
    assert_eq!(core.ring, last);
    assert_eq!(core.rho_star, grid.rho()[last]);
    assert_eq!(core.u_max, core.u_min);
    assert_eq!(core.u_star, field.ring(last)[0]);
    let thickness = boundary_layer_thickness(&field).unwrap();
    assert!((thickness - (1.0 - grid.rho()[last])).abs() < 1e-15);
    assert!((thickness - 0.5 / 64.0).abs() < 1e-12);
}

#[test]
fn core_edge_value_falls_as_segments_multiply() {
    let u_star: Vec<f64> = [(32, 32), (64, 64), (128, 128)]
        .iter()
        .map(|&(n, q)| analyze_core(&near_critical(&periodic(n, 1, q), 64)).unwrap().u_star)
        .collect();
    assert!(u_star.windows(2).all(|w| w[1] < w[0]), "{u_star:?}");
}

#[test]
fn boundary_layer_scales_with_the_segment_length() {
    let thickness: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let field = near_critical(&periodic(n, 1, 4), 128);
            boundary_layer_thickness(&field).unwrap()
        })
        .collect();
    for (&n, &t) in [16u32, 32, 64].iter().zip(&thickness) {
        let ratio = t / (2.0 * std::f64::consts::PI / n as f64);
        assert!((0.1..=10.0).contains(&ratio), "N = {n}: {ratio}");
    }
    for w in thickness.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.3..=0.8).contains(&ratio), "{thickness:?}");
    }
}

#[test]
fn near_critical_core_matches_radial_profile() {
    let field = near_critical(&periodic(16, 1, 4), 96);
    let core = analyze_core(&field).unwrap();
    assert!(core.big_lambda_sq < 2.0);
    assert!(core.angular_variation_at_rho_star < 1e-4);
    assert!(core_radial_mismatch(&field, &core).unwrap() < 1e-3);
    let loose = analyze_core_with(&field, field.lambda_sq(), 1e-2).unwrap();
    assert!(loose.rho_star >= core.rho_star);
}

#[test]
fn scaling_fit_recovers_a_power_law() {
    let data: Vec<(f64, f64)> = (5..=9)
        .map(|k| {
            let alpha = 1.0 / f64::powi(2.0, k);
            (alpha, 2.03 * alpha.powf(0.10))
        })
        .collect();
    let fit = fit_scaling_law(&data, 32).unwrap();
    assert!((fit.s - 2.03).abs() < 1e-12);
    assert!((fit.t - 0.10).abs() < 1e-12);
    assert!(fit.relative_fit_residual < 1e-12);
    assert!(fit_scaling_law(&data[..3], 32).is_err());
    let narrow: Vec<(f64, f64)> = (0..5).map(|k| (0.1 + 0.01 * k as f64, 1.5)).collect();
    assert!(matches!(fit_scaling_law(&narrow, 32), Err(Error::InsufficientRange { .. })));
}
