//! Critical thresholds for the Frank-Kamenetsky problem `Δu + λ² eᵘ = 0` on
//! the unit disk with partially insulated walls.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod continuation;
pub mod discretization;
pub mod error;
pub mod geometry;
mod linsolve;
pub mod sweep;
pub mod validate;

pub use analysis::{
    analyze_core, boundary_layer_thickness, classical_solution, fit_scaling_law, lambda_from_physical,
    solve_radial, ClassicalSolution, CoreAnalysis, PhysicalScaling, RadialProfile, ScalingFit,
};
pub use continuation::{
    extrapolate_in_n, fit_fold, fit_inverse_n, newton_solve, trace_branch, ContinuationTrace, CriticalEstimate,
    ExtrapolationOptions, FoldFit, NewtonOptions, NormKind, StepPolicy, Termination,
};
pub use discretization::{jacobian, residual, Laplacian, SolutionField};
pub use error::{Error, Result};
pub use geometry::{build_grid, classify_boundary, BoundaryKind, BoundarySpec, Fraction, GridOptions, PolarGrid, WallType};
