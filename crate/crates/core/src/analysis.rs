//! Post-processing: the axisymmetric core, scaling laws, the classical and
//! radial reference solutions, and physical units.

use serde::{Deserialize, Serialize};

use crate::discretization::{ring_spread, SolutionField};
use crate::error::{Error, Result};

pub const CORE_THRESHOLD: f64 = 1e-4;

/// Inner region of a solution where it is axisymmetric to within a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreAnalysis {
    pub rho_star: f64,
    pub ring: usize,
    pub u_star: f64,
    pub u_max: f64,
    pub u_min: f64,
    pub lambda_sq: f64,
    #[serde(rename = "Lambda_sq")]
    pub big_lambda_sq: f64,
    pub angular_variation_at_rho_star: f64,
    pub threshold: f64,
}

/// Core of `field` at its own `lambda` with the default threshold.
pub fn analyze_core(field: &SolutionField) -> Result<CoreAnalysis> {
    analyze_core_with(field, field.lambda_sq(), CORE_THRESHOLD)
}

/// Scans rings from the wall inward; the first ring whose angular spread is
/// below `threshold` fixes `rho*`. `Λ² = lambda_sq ρ*² e^{u*}`.
pub fn analyze_core_with(field: &SolutionField, lambda_sq: f64, threshold: f64) -> Result<CoreAnalysis> {
    let grid = field.grid();
    let ring = (0..grid.n_r())
        .rev()
        .find(|&i| ring_spread(field.ring(i)) < threshold)
        .ok_or_else(|| Error::NoCore {
            variation: ring_spread(field.ring(0)),
        })?;
    let values = field.ring(ring);
    let u_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let u_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let rho_star = grid.rho()[ring];
    let u_star = 0.5 * (u_max + u_min);
    Ok(CoreAnalysis {
        rho_star,
        ring,
        u_star,
        u_max,
        u_min,
        lambda_sq,
        big_lambda_sq: lambda_sq * rho_star * rho_star * u_star.exp(),
        angular_variation_at_rho_star: u_max - u_min,
        threshold,
    })
}

/// `1 - rho*`.
pub fn boundary_layer_thickness(field: &SolutionField) -> Result<f64> {
    Ok(1.0 - analyze_core(field)?.rho_star)
}

/// Largest difference between the core of `field` and the radial solution
/// with the same `Λ²`, after the shift `u = u* + v` and `R = ρ/ρ*`.
pub fn core_radial_mismatch(field: &SolutionField, core: &CoreAnalysis) -> Result<f64> {
    let big_lambda_sq = field.lambda_sq() * core.rho_star * core.rho_star * core.u_star.exp();
    let profile = solve_radial(big_lambda_sq, 0.0)?;
    let rho = field.grid().rho();
    let mut worst: f64 = 0.0;
    for (i, &r) in rho.iter().enumerate().take(core.ring + 1) {
        let v = profile.eval(r / core.rho_star);
        for &u in field.ring(i) {
            worst = worst.max((u - core.u_star - v).abs());
        }
    }
    Ok(worst)
}

/// `λ_cr² = S α^t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    #[serde(rename = "N")]
    pub segments: u32,
    #[serde(rename = "S")]
    pub s: f64,
    pub t: f64,
    pub alpha_range: (f64, f64),
    pub points: usize,
    /// Root mean square of `(S α^t - y) / y`.
    pub relative_fit_residual: f64,
}

/// Straight line through `(ln α, ln λ_cr²)`.
pub fn fit_scaling_law(estimates: &[(f64, f64)], segments: u32) -> Result<ScalingFit> {
    if estimates.len() < 4 {
        return Err(Error::TooFewPoints {
            got: estimates.len(),
            need: 4,
        });
    }
    if estimates.iter().any(|&(a, y)| !(a > 0.0 && y > 0.0)) {
        return Err(Error::InvalidInput("scaling fit needs positive alpha and lambda_cr^2".into()));
    }
    let lo = estimates.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    let hi = estimates.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    if hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(Error::InsufficientRange { span: hi / lo });
    }
    let n = estimates.len() as f64;
    let xs: Vec<f64> = estimates.iter().map(|e| e.0.ln()).collect();
    let ys: Vec<f64> = estimates.iter().map(|e| e.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let t = sxy / sxx;
    let s = (my - t * mx).exp();
    let ss: f64 = estimates.iter().map(|&(a, y)| ((s * a.powf(t) - y) / y).powi(2)).sum();
    Ok(ScalingFit {
        segments,
        s,
        t,
        alpha_range: (lo, hi),
        points: estimates.len(),
        relative_fit_residual: (ss / n).sqrt(),
    })
}

/// The closed-form solution `u = ln((1+B)² / (1+Bρ²)²)` on the fully
/// conducting disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSolution {
    pub b: f64,
    pub lambda_sq: f64,
}

impl ClassicalSolution {
    pub fn profile(&self, rho: f64) -> f64 {
        2.0 * ((1.0 + self.b) / (1.0 + self.b * rho * rho)).ln()
    }

    pub fn centre(&self) -> f64 {
        2.0 * (1.0 + self.b).ln()
    }
}

pub fn classical_solution(b: f64) -> ClassicalSolution {
    ClassicalSolution {
        b,
        lambda_sq: 8.0 * b / (1.0 + b).powi(2),
    }
}

/// Solution of `(1/R)(R v')' + Λ² eᵛ = 0` on `[0, 1]`, regular at the
/// centre, with `v(1)` prescribed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub lambda_sq: f64,
    pub boundary_value: f64,
    /// Cell centres.
    pub r: Vec<f64>,
    pub v: Vec<f64>,
}

impl RadialProfile {
    /// Linear interpolation; the wall value is used beyond the last centre.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.r.len();
        let h = 1.0 / n as f64;
        let x = r / h - 0.5;
        if x <= 0.0 {
            return self.v[0];
        }
        let k = x.floor() as usize;
        if k + 1 >= n {
            let w = ((r - self.r[n - 1]) / (1.0 - self.r[n - 1])).clamp(0.0, 1.0);
            return self.v[n - 1] + w * (self.boundary_value - self.v[n - 1]);
        }
        let w = x - k as f64;
        self.v[k] + w * (self.v[k + 1] - self.v[k])
    }
}

pub const RADIAL_CELLS: usize = 4096;

pub fn solve_radial(lambda_sq: f64, boundary_value: f64) -> Result<RadialProfile> {
    solve_radial_with(lambda_sq, boundary_value, RADIAL_CELLS, 1e-12)
}

/// Cell-centred finite volumes and Newton from `v ≡ v(1)`, which stays on
/// the lower branch.
pub fn solve_radial_with(lambda_sq: f64, boundary_value: f64, n: usize, tol: f64) -> Result<RadialProfile> {
    if !(lambda_sq >= 0.0) || !boundary_value.is_finite() || n < 2 {
        return Err(Error::InvalidInput(format!(
            "radial problem needs Lambda^2 >= 0 and n >= 2, got {lambda_sq}, {n}"
        )));
    }
    let effective = lambda_sq * boundary_value.exp();
    if effective >= 2.0 {
        return Err(Error::Supercritical { lambda_sq: effective });
    }
    let h = 1.0 / n as f64;
    let r: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    // flux coefficients per unit cell area
    let inner: Vec<f64> = (0..n).map(|i| i as f64 * h / (h * h * r[i])).collect();
    let outer: Vec<f64> = (0..n)
        .map(|i| {
            let dist = if i + 1 == n { 0.5 * h } else { h };
            (i + 1) as f64 * h / (h * dist * r[i])
        })
        .collect();
    let mut v = vec![boundary_value; n];
    let residual = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let right = if i + 1 == n { boundary_value } else { v[i + 1] };
                let left = if i == 0 { 0.0 } else { inner[i] * (v[i - 1] - v[i]) };
                left + outer[i] * (right - v[i]) + lambda_sq * v[i].exp()
            })
            .collect()
    };
    for it in 0..50 {
        let f = residual(&v);
        // tridiagonal J δ = -f by the Thomas algorithm
        let diag: Vec<f64> = (0..n).map(|i| -inner[i] - outer[i] + lambda_sq * v[i].exp()).collect();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let lower = if i == 0 { 0.0 } else { inner[i] };
            let upper = if i + 1 == n { 0.0 } else { outer[i] };
            let denom = diag[i] - lower * if i == 0 { 0.0 } else { c[i - 1] };
            c[i] = upper / denom;
            d[i] = (-f[i] - lower * if i == 0 { 0.0 } else { d[i - 1] }) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        let step = d.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        v.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        if !step.is_finite() {
            break;
        }
        if step <= tol * (1.0 + v.iter().fold(0.0f64, |a, x| a.max(x.abs()))) {
            return Ok(RadialProfile {
                lambda_sq,
                boundary_value,
                r,
                v,
            });
        }
        if it == 49 {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: 50,
        last_update: f64::NAN,
    })
}

/// Material data entering the length scale `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalScaling {
    /// Ambient temperature, K.
    pub t0: f64,
    /// Activation energy, J/mol.
    pub e: f64,
    /// Gas constant, J/(mol K).
    pub r_gas: f64,
    /// Thermal diffusivity, m²/s.
    pub kappa: f64,
    /// Volumetric heat capacity, J/(m³ K).
    pub c: f64,
    /// Heat of reaction, J/kg.
    pub q: f64,
    /// Rate at the ambient temperature.
    pub sigma_t0: f64,
}

impl PhysicalScaling {
    fn validate(&self) -> Result<()> {
        let fields = [self.t0, self.e, self.r_gas, self.kappa, self.c, self.q, self.sigma_t0];
        if fields.iter().all(|x| *x > 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("physical parameters must be positive: {self:?}")))
        }
    }

    /// `l = (e^{E/RT0} κ R T0² c / (Q E σ))^{1/2}`, evaluated in logs.
    pub fn length_scale(&self) -> Result<f64> {
        self.validate()?;
        let log_l_sq = self.e / (self.r_gas * self.t0) + (self.kappa * self.r_gas * self.t0 * self.t0 * self.c).ln()
            - (self.q * self.e * self.sigma_t0).ln();
        Ok((0.5 * log_l_sq).exp())
    }

    /// Vessel radius at which `lambda` equals `lambda_cr`.
    pub fn critical_radius(&self, lambda_cr: f64) -> Result<f64> {
        if !(lambda_cr > 0.0) {
            return Err(Error::InvalidInput(format!("lambda_cr must be positive, got {lambda_cr}")));
        }
        Ok(lambda_cr * self.length_scale()?)
    }
}

/// `λ = r0 / l`.
pub fn lambda_from_physical(scaling: &PhysicalScaling, r0: f64) -> Result<f64> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidInput(format!("r0 must be positive, got {r0}")));
    }
    Ok(r0 / scaling.length_scale()?)
}
