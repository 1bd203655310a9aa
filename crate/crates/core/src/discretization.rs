//! Discrete form of `laplacian(u) + lambda^2 exp(u) = 0` on a [`PolarGrid`].
//!
//! The Laplacian is the conservative five-point polar stencil
//!
//! ```text
//! (L u)_ij = [ sum over faces  T_face * (u_neighbour - u_ij) ] / V_i
//! ```
//!
//! with cell volume `V_i = (f_{i+1}^2 - f_i^2) / 2 * dtheta`, radial
//! transmissibility `f_{i+1} dtheta / (rho_{i+1} - rho_i)` and angular
//! transmissibility `(f_{i+1} - f_i) / (rho_i dtheta)`. On a uniform grid this
//! is exactly `u_rr + u_r / rho + u_tt / rho^2` by central differences. The
//! face at `rho = 0` has zero area, so no origin equation is needed.
//!
//! Wall ghosts are eliminated: a conducting wall cell sees `u_ghost = -u`
//! (zero at the wall by linear interpolation), an insulated one
//! `u_ghost = u` (no flux).

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AngularClosure, PolarGrid, WallType};

/// Precomputed stencil coefficients for one grid.
#[derive(Debug, Clone)]
pub struct Laplacian {
    n_r: usize,
    n_a: usize,
    closure: AngularClosure,
    volume: Vec<f64>,
    /// between ring `i` and `i + 1`
    radial: Vec<f64>,
    angular: Vec<f64>,
    /// per sector column; zero for insulated cells
    wall: Vec<f64>,
}

/// Neighbours of cell `(i, j)` as `(index, transmissibility)`, `None` where a
/// face carries no flux.
type Stencil = [Option<(usize, f64)>; 4];

impl Laplacian {
    pub fn new(grid: &PolarGrid) -> Self {
        let n_r = grid.n_r();
        let faces = grid.radial_faces();
        let rho = grid.rho();
        let dtheta = grid.dtheta();
        let volume = (0..n_r).map(|i| grid.cell_volume(i)).collect();
        let radial = (0..n_r.saturating_sub(1))
            .map(|i| faces[i + 1] * dtheta / (rho[i + 1] - rho[i]))
            .collect();
        let angular = (0..n_r)
            .map(|i| (faces[i + 1] - faces[i]) / (rho[i] * dtheta))
            .collect();
        let t_wall = dtheta / (1.0 - rho[n_r - 1]);
        let wall = grid
            .wall()
            .iter()
            .map(|w| match w {
                WallType::Conducting => t_wall,
                WallType::Insulated => 0.0,
            })
            .collect();
        Laplacian {
            n_r,
            n_a: grid.n_sector(),
            closure: grid.sector().closure,
            volume,
            radial,
            angular,
            wall,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_r * self.n_a
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    /// Cell volumes, one per unknown.
    pub fn volumes(&self) -> Vec<f64> {
        (0..self.dim()).map(|p| self.volume[p / self.n_a]).collect()
    }

    pub fn ring_volume(&self, i: usize) -> f64 {
        self.volume[i]
    }

    fn stencil(&self, i: usize, j: usize) -> Stencil {
        let n_a = self.n_a;
        let p = i * n_a + j;
        let inward = (i > 0).then(|| (p - n_a, self.radial[i - 1]));
        let outward = (i + 1 < self.n_r).then(|| (p + n_a, self.radial[i]));
        let ta = self.angular[i];
        let (left, right) = match self.closure {
            AngularClosure::Periodic if n_a > 1 => {
                let l = if j == 0 { p + n_a - 1 } else { p - 1 };
                let r = if j + 1 == n_a { p + 1 - n_a } else { p + 1 };
                (Some((l, ta)), Some((r, ta)))
            }
            AngularClosure::Periodic => (None, None),
            AngularClosure::Reflective => (
                (j > 0).then(|| (p - 1, ta)),
                (j + 1 < n_a).then(|| (p + 1, ta)),
            ),
        };
        [inward, outward, left, right]
    }

    /// Sum of the flux transmissibilities of cell `p`, including the
    /// conducting-wall ghost.
    fn diagonal_weight(&self, i: usize, j: usize) -> f64 {
        let mut d: f64 = self.stencil(i, j).iter().flatten().map(|&(_, t)| t).sum();
        if i + 1 == self.n_r {
            d += self.wall[j];
        }
        d
    }

    /// `out = L u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.dim());
        assert_eq!(out.len(), self.dim());
        for i in 0..self.n_r {
            let inv_vol = 1.0 / self.volume[i];
            for j in 0..self.n_a {
                let p = i * self.n_a + j;
                let up = u[p];
                let mut flux = 0.0;
                for &(q, t) in self.stencil(i, j).iter().flatten() {
                    flux += t * (u[q] - up);
                }
                if i + 1 == self.n_r {
                    flux -= self.wall[j] * up;
                }
                out[p] = flux * inv_vol;
            }
        }
    }

    /// Entries of `L` row by row, columns ascending, duplicates merged.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(5 * self.dim());
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(5);
        for i in 0..self.n_r {
            let inv_vol = 1.0 / self.volume[i];
            for j in 0..self.n_a {
                let p = i * self.n_a + j;
                row.clear();
                row.push((p, -self.diagonal_weight(i, j) * inv_vol));
                for &(q, t) in self.stencil(i, j).iter().flatten() {
                    row.push((q, t * inv_vol));
                }
                push_merged(&mut out, p, &mut row);
            }
        }
        out
    }

    /// Lower triangle (column-major, rows ascending) of the symmetric
    /// volume-weighted operator `-V L`, as `(col_ptr, row_idx, values)`.
    pub(crate) fn weighted_lower_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let dim = self.dim();
        let mut col_ptr = Vec::with_capacity(dim + 1);
        let mut row_idx = Vec::with_capacity(3 * dim);
        let mut values = Vec::with_capacity(3 * dim);
        let mut col: Vec<(usize, f64)> = Vec::with_capacity(5);
        col_ptr.push(0);
        for i in 0..self.n_r {
            for j in 0..self.n_a {
                let p = i * self.n_a + j;
                col.clear();
                col.push((p, self.diagonal_weight(i, j)));
                for &(q, t) in self.stencil(i, j).iter().flatten() {
                    if q > p {
                        col.push((q, -t));
                    }
                }
                col.sort_by_key(|&(q, _)| q);
                let mut k = 0;
                while k < col.len() {
                    let (q, mut v) = col[k];
                    k += 1;
                    while k < col.len() && col[k].0 == q {
                        v += col[k].1;
                        k += 1;
                    }
                    row_idx.push(q);
                    values.push(v);
                }
                col_ptr.push(row_idx.len());
            }
        }
        (col_ptr, row_idx, values)
    }
}

fn push_merged(out: &mut Vec<(usize, usize, f64)>, row: usize, entries: &mut [(usize, f64)]) {
    entries.sort_by_key(|&(c, _)| c);
    let mut k = 0;
    while k < entries.len() {
        let (c, mut v) = entries[k];
        k += 1;
        while k < entries.len() && entries[k].0 == c {
            v += entries[k].1;
            k += 1;
        }
        out.push((row, c, v));
    }
}

/// Reduced temperature on the unknowns of a grid at parameter `lambda`.
#[derive(Debug, Clone)]
pub struct SolutionField {
    grid: Arc<PolarGrid>,
    values: Vec<f64>,
    lambda: f64,
}

impl SolutionField {
    pub fn new(grid: Arc<PolarGrid>, values: Vec<f64>, lambda: f64) -> Result<Self> {
        if values.len() != grid.n_unknowns() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid has {} unknowns",
                values.len(),
                grid.n_unknowns()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("field has non-finite values".into()));
        }
        Ok(SolutionField { grid, values, lambda })
    }

    pub fn zeros(grid: Arc<PolarGrid>, lambda: f64) -> Self {
        let n = grid.n_unknowns();
        SolutionField {
            grid,
            values: vec![0.0; n],
            lambda,
        }
    }

    /// Samples `f(rho, theta)` at the cell centres.
    pub fn from_fn(grid: Arc<PolarGrid>, lambda: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let n_a = grid.n_sector();
        let values = (0..grid.n_unknowns())
            .map(|p| f(grid.rho()[p / n_a], grid.sector_theta(p % n_a)))
            .collect();
        SolutionField { grid, values, lambda }
    }

    pub fn grid(&self) -> &Arc<PolarGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda_sq(&self) -> f64 {
        self.lambda * self.lambda
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// Values of ring `i` over the sector.
    pub fn ring(&self, i: usize) -> &[f64] {
        let n_a = self.grid.n_sector();
        &self.values[i * n_a..(i + 1) * n_a]
    }

    /// Value at ring `i` and full-disk angular cell `j`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_sector() + self.grid.sector_column(j)]
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Area-weighted root mean square over the disk.
    pub fn l2_norm(&self) -> f64 {
        let n_a = self.grid.n_sector();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.grid.n_r() {
            let v = self.grid.cell_volume(i);
            num += v * self.ring(i).iter().map(|u| u * u).sum::<f64>();
            den += v * n_a as f64;
        }
        (num / den).sqrt()
    }

    /// Largest `max_theta u - min_theta u` over all rings.
    pub fn max_angular_variation(&self) -> f64 {
        (0..self.grid.n_r())
            .map(|i| ring_spread(self.ring(i)))
            .fold(0.0, f64::max)
    }

    /// Writes `(rho, theta, u)` over the full disk.
    ///
    /// First line `n_r,n_theta,lambda`, second line their values, then the
    /// column header and one row per node, theta-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let g = &self.grid;
        writeln!(out, "n_r,n_theta,lambda")?;
        writeln!(out, "{},{},{}", g.n_r(), g.n_theta(), fmt12(self.lambda))?;
        writeln!(out, "rho,theta,u")?;
        let theta = g.theta_coords();
        for (j, th) in theta.iter().enumerate() {
            let th = fmt12(*th);
            for i in 0..g.n_r() {
                writeln!(out, "{},{},{}", fmt12(g.rho()[i]), th, fmt12(self.at(i, j)))?;
            }
        }
        Ok(())
    }
}

pub(crate) fn ring_spread(ring: &[f64]) -> f64 {
    let (lo, hi) = ring
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Twelve significant digits, scientific notation.
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

/// `F(u) = L u + lambda^2 exp(u)`.
pub fn residual(field: &SolutionField) -> Vec<f64> {
    residual_with(&Laplacian::new(field.grid()), field.values(), field.lambda_sq())
}

pub(crate) fn residual_with(lap: &Laplacian, u: &[f64], lambda_sq: f64) -> Vec<f64> {
    let mut f = vec![0.0; u.len()];
    lap.apply(u, &mut f);
    for (fi, ui) in f.iter_mut().zip(u) {
        *fi += lambda_sq * ui.exp();
    }
    f
}

/// Square sparse matrix as `(row, col, value)` triples in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseOperator {
    pub dimension: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseOperator {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for &(r, c, a) in &self.entries {
            out[r] += a * v[c];
        }
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dimension];
        for &(r, c, a) in &self.entries {
            if r == c {
                d[r] += a;
            }
        }
        d
    }
}

/// Exact Jacobian of [`residual`]: `L + diag(lambda^2 exp(u))`.
pub fn jacobian(field: &SolutionField) -> SparseOperator {
    let lap = Laplacian::new(field.grid());
    let shift = field.lambda_sq();
    let u = field.values();
    let mut entries = lap.entries();
    for (r, c, a) in entries.iter_mut() {
        if *r == *c {
            *a += shift * u[*r].exp();
        }
    }
    SparseOperator {
        dimension: lap.dim(),
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundarySpec, GridOptions};

    fn plain_disk(n: usize) -> Arc<PolarGrid> {
        Arc::new(PolarGrid::with_options(n, &BoundarySpec::full_dirichlet(), GridOptions::plain()).unwrap())
    }

    #[test]
    fn zero_field_zero_lambda_has_zero_residual() {
        let f = SolutionField::zeros(plain_disk(16), 0.0);
        assert!(residual(&f).iter().all(|&r| r == 0.0));
    }

    #[test]
    fn constant_on_insulated_disk() {
        let grid = Arc::new(PolarGrid::insulated_disk(16).unwrap());
        let c = 0.7;
        let lambda = 1.3;
        let f = SolutionField::from_fn(grid, lambda, |_, _| c);
        let expected = lambda * lambda * f64::exp(c);
        for r in residual(&f) {
            assert!((r - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn paraboloid_interior_rows_exact() {
        // laplacian(1 - rho^2) = -4 holds exactly away from the wall row
        let grid = plain_disk(32);
        let f = SolutionField::from_fn(grid.clone(), 0.0, |r, _| 1.0 - r * r);
        let j = jacobian(&f);
        let lu = j.apply(f.values());
        let n_a = grid.n_sector();
        for i in 0..grid.n_r() - 1 {
            for jj in 0..n_a {
                let v = lu[i * n_a + jj];
                assert!((v + 4.0).abs() < 1e-9, "ring {i}: {v}");
            }
        }
    }

    #[test]
    fn jacobian_shift_is_diagonal() {
        let spec = BoundarySpec::periodic(4, "1/2".parse().unwrap()).unwrap();
        let grid = Arc::new(PolarGrid::new(16, &spec).unwrap());
        let f = SolutionField::from_fn(grid, 1.1, |r, t| 0.3 * (1.0 - r * r) * (1.0 + 0.1 * t.sin()));
        let a = jacobian(&f);
        let b = jacobian(&f.clone().with_lambda(0.0));
        assert_eq!(a.entries.len(), b.entries.len());
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!((x.0, x.1), (y.0, y.1));
            if x.0 == x.1 {
                let want = 1.21 * f.values()[x.0].exp();
                assert!((x.2 - y.2 - want).abs() < 1e-9 * want.max(1.0));
            } else {
                assert_eq!(x.2, y.2);
            }
        }
    }

    #[test]
    fn weighted_operator_matches_entries() {
        for grid in [
            plain_disk(12),
            Arc::new(PolarGrid::new(16, &BoundarySpec::periodic(4, "1/2".parse().unwrap()).unwrap()).unwrap()),
            Arc::new(PolarGrid::with_options(12, &BoundarySpec::single_arc("1/3".parse().unwrap()).unwrap(), GridOptions::plain()).unwrap()),
        ] {
            let lap = Laplacian::new(&grid);
            let vol = lap.volumes();
            let (col_ptr, row_idx, values) = lap.weighted_lower_csc();
            let mut dense = vec![0.0; lap.dim() * lap.dim()];
            for c in 0..lap.dim() {
                for k in col_ptr[c]..col_ptr[c + 1] {
                    dense[row_idx[k] * lap.dim() + c] = values[k];
                    dense[c * lap.dim() + row_idx[k]] = values[k];
                }
            }
            for (r, c, a) in lap.entries() {
                let w = -vol[r] * a;
                assert!((dense[r * lap.dim() + c] - w).abs() < 1e-9 * w.abs().max(1.0));
            }
        }
    }

    #[test]
    fn csv_layout() {
        let f = SolutionField::from_fn(plain_disk(8), 0.5, |r, _| 1.0 - r);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "n_r,n_theta,lambda");
        assert_eq!(lines[1], "8,8,5.00000000000e-1");
        assert_eq!(lines[2], "rho,theta,u");
        assert_eq!(lines.len(), 3 + 64);
        // theta-major: the first n_r rows share a theta
        let theta0: Vec<_> = lines[3..11].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
        assert!(theta0.iter().all(|t| *t == theta0[0]));
    }
}
