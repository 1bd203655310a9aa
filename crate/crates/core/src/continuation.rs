//! Natural continuation of the minimal branch toward the fold, the parabolic
//! fold fit, and extrapolation of the critical parameter in the grid size.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::discretization::{fmt12, residual_with, Laplacian, SolutionField};
use crate::error::{Error, Result};
use crate::geometry::{BoundarySpec, GridOptions, PolarGrid};
use crate::linsolve::NewtonMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    /// Converged once `‖F‖∞` or the relative update `‖δu‖∞ / (1 + ‖u‖∞)`
    /// drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 25,
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

struct Newton {
    lap: Laplacian,
    matrix: NewtonMatrix,
    opts: NewtonOptions,
}

impl Newton {
    fn new(grid: &PolarGrid, opts: NewtonOptions) -> Result<Self> {
        if !(opts.tol > 0.0) || opts.max_iter == 0 {
            return Err(Error::InvalidInput(format!("bad Newton options {opts:?}")));
        }
        let lap = Laplacian::new(grid);
        let matrix = NewtonMatrix::new(&lap)?;
        Ok(Newton { lap, matrix, opts })
    }

    /// Returns the converged field and the number of linear solves.
    fn solve(&self, mut u: Vec<f64>, lambda_sq: f64) -> Result<(Vec<f64>, usize)> {
        let mut previous = f64::INFINITY;
        for it in 0..self.opts.max_iter {
            let mut f = residual_with(&self.lap, &u, lambda_sq);
            if max_abs(&f) <= self.opts.tol {
                return Ok((u, it));
            }
            let factor = self.matrix.factor(&u, lambda_sq)?;
            f.iter_mut().for_each(|v| *v = -*v);
            factor.solve_jacobian(&mut f);
            let step = max_abs(&f);
            if !step.is_finite() {
                return Err(Error::NonConvergence {
                    iterations: it + 1,
                    last_update: step,
                });
            }
            u.iter_mut().zip(&f).for_each(|(a, d)| *a += d);
            if step <= self.opts.tol * (1.0 + max_abs(&u)) {
                return Ok((u, it + 1));
            }
            if it >= 3 && step > previous {
                return Err(Error::NonConvergence {
                    iterations: it + 1,
                    last_update: step,
                });
            }
            previous = step;
        }
        Err(Error::NonConvergence {
            iterations: self.opts.max_iter,
            last_update: previous,
        })
    }
}

/// Solves `F(u) = 0` at `lambda` by Newton's method from `initial`.
pub fn newton_solve(initial: &SolutionField, lambda: f64, opts: &NewtonOptions) -> Result<SolutionField> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
    }
    if initial.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("initial field has non-finite values".into()));
    }
    let newton = Newton::new(initial.grid(), *opts)?;
    let (u, _) = newton.solve(initial.values().to_vec(), lambda * lambda)?;
    SolutionField::new(initial.grid().clone(), u, lambda)
}

/// One full Newton update of `field` at `lambda`.
pub fn newton_step(field: &SolutionField, lambda: f64) -> Result<SolutionField> {
    let lap = Laplacian::new(field.grid());
    let matrix = NewtonMatrix::new(&lap)?;
    let lambda_sq = lambda * lambda;
    let mut f = residual_with(&lap, field.values(), lambda_sq);
    f.iter_mut().for_each(|v| *v = -*v);
    matrix.factor(field.values(), lambda_sq)?.solve_jacobian(&mut f);
    let u = field.values().iter().zip(&f).map(|(a, d)| a + d).collect();
    SolutionField::new(field.grid().clone(), u, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    /// Largest nodal value.
    Max,
    /// Area-weighted root mean square.
    L2,
}

fn branch_norm(grid: &PolarGrid, kind: NormKind, u: &[f64]) -> f64 {
    match kind {
        NormKind::Max => u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        NormKind::L2 => {
            let n_a = grid.n_sector();
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..grid.n_r() {
                let v = grid.cell_volume(i);
                num += v * u[i * n_a..(i + 1) * n_a].iter().map(|x| x * x).sum::<f64>();
                den += v * n_a as f64;
            }
            (num / den).sqrt()
        }
    }
}

/// Step schedule for [`trace_branch`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepPolicy {
    /// First step in `lambda`.
    pub initial_step: f64,
    /// Smallest `lambda` step tried before giving up.
    pub step_floor: f64,
    /// Accepted points before stopping with [`Termination::MaxSteps`].
    pub max_steps: usize,
    /// Norm spacing near the fold, relative to the estimated fold norm.
    pub fold_spacing: f64,
    /// Points in the fold window.
    pub fit_points: usize,
    pub norm: NormKind,
    /// Keep every converged field on the trace.
    pub keep_fields: bool,
    pub newton: NewtonOptions,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            initial_step: 0.05,
            step_floor: 1e-6,
            max_steps: 500,
            fold_spacing: 0.0075,
            fit_points: 10,
            norm: NormKind::Max,
            keep_fields: false,
            newton: NewtonOptions::default(),
        }
    }
}

impl StepPolicy {
    fn validate(&self) -> Result<()> {
        let ok = self.initial_step > 0.0
            && self.step_floor > 0.0
            && self.step_floor <= self.initial_step
            && self.fold_spacing > 0.0
            && self.fold_spacing < 0.1
            && self.fit_points >= 3
            && self.max_steps > self.fit_points;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("bad step policy {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    FoldProximity,
    StepFloor,
    MaxSteps,
    Diverged,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracePoint {
    pub lambda: f64,
    pub lambda_sq: f64,
    pub norm: f64,
    pub newton_iters: usize,
    #[serde(skip)]
    pub field: Option<SolutionField>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuationTrace {
    pub norm: NormKind,
    pub points: Vec<TracePoint>,
    pub termination: Termination,
    /// The last converged field.
    #[serde(skip)]
    pub final_field: Option<SolutionField>,
}

impl ContinuationTrace {
    pub fn last(&self) -> &TracePoint {
        self.points.last().expect("a trace always holds lambda = 0")
    }

    /// `(norm, lambda_sq)` pairs.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.norm, p.lambda_sq)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lambda,lambda_sq,norm,newton_iters")?;
        for p in &self.points {
            writeln!(out, "{},{},{},{}", fmt12(p.lambda), fmt12(p.lambda_sq), fmt12(p.norm), p.newton_iters)?;
        }
        Ok(())
    }
}

/// `mu(s)` through three points, in Newton form.
#[derive(Debug, Clone, Copy)]
struct Parabola {
    s1: f64,
    s2: f64,
    mu1: f64,
    slope: f64,
    curv: f64,
}

impl Parabola {
    fn through(p: &[TracePoint]) -> Option<Self> {
        let [a, b, c] = p else { return None };
        if !(a.norm < b.norm && b.norm < c.norm) {
            return None;
        }
        let f12 = (b.lambda_sq - a.lambda_sq) / (b.norm - a.norm);
        let f23 = (c.lambda_sq - b.lambda_sq) / (c.norm - b.norm);
        Some(Parabola {
            s1: a.norm,
            s2: b.norm,
            mu1: a.lambda_sq,
            slope: f12,
            curv: (f23 - f12) / (c.norm - a.norm),
        })
    }

    fn eval(&self, s: f64) -> f64 {
        self.mu1 + self.slope * (s - self.s1) + self.curv * (s - self.s1) * (s - self.s2)
    }

    /// Norm at the turning point, if the parabola is concave.
    fn vertex(&self) -> Option<f64> {
        (self.curv < 0.0).then(|| 0.5 * (self.s1 + self.s2) - self.slope / (2.0 * self.curv))
    }
}

/// Norm-targeted stepping state near the fold.
struct Window {
    nominal: f64,
    ds: f64,
    entered: usize,
}

/// Traces the minimal branch from `lambda = 0` toward the fold.
///
/// Steps in `lambda` until a parabola through the last three points puts the
/// fold within reach, then steps evenly in the norm so the last
/// `fit_points` points straddle a fixed fraction of the fold norm. Failed
/// solves halve the step and restart from the last accepted point.
pub fn trace_branch(grid: Arc<PolarGrid>, policy: &StepPolicy) -> Result<ContinuationTrace> {
    policy.validate()?;
    let newton = Newton::new(&grid, policy.newton)?;
    let n = grid.n_unknowns();
    let norm_of = |u: &[f64]| branch_norm(&grid, policy.norm, u);
    let field_of = |u: &[f64], lambda: f64| SolutionField::new(grid.clone(), u.to_vec(), lambda);

    let mut points = vec![TracePoint {
        lambda: 0.0,
        lambda_sq: 0.0,
        norm: 0.0,
        newton_iters: 0,
        field: if policy.keep_fields {
            Some(SolutionField::zeros(grid.clone(), 0.0))
        } else {
            None
        },
    }];
    let mut u = vec![0.0; n];
    let mut u_prev: Option<Vec<f64>> = None;
    let mut dl = policy.initial_step;
    let mut window: Option<Window> = None;
    let span = policy.fit_points as f64 + 1.0;

    let termination = loop {
        if points.len() > policy.max_steps {
            break Termination::MaxSteps;
        }
        let last = points.last().unwrap();
        let (mu, s) = (last.lambda_sq, last.norm);
        let before = (points.len() >= 2).then(|| &points[points.len() - 2]);
        let model = if points.len() >= 4 {
            Parabola::through(&points[points.len() - 3..])
        } else {
            None
        };
        let fold = model.and_then(|m| m.vertex().filter(|&v| v > s).map(|v| (m, v)));

        let (mu_next, predictor) = match &mut window {
            None => {
                if dl < policy.step_floor {
                    break if fold.is_some() {
                        Termination::FoldProximity
                    } else if points.len() > 1 {
                        Termination::StepFloor
                    } else {
                        return Err(Error::Diverged { lambda: 0.0 });
                    };
                }
                let lambda_next = last.lambda + dl;
                let mu_next = lambda_next * lambda_next;
                if let Some((m, v)) = fold {
                    let nominal = policy.fold_spacing * v;
                    let start = v - span * nominal;
                    if start <= s || mu_next >= m.eval(start) {
                        window = Some(Window {
                            nominal,
                            ds: nominal,
                            entered: points.len(),
                        });
                        continue;
                    }
                }
                let predictor = match (&u_prev, before) {
                    (Some(up), Some(b)) if mu > b.lambda_sq => {
                        let w = (mu_next - mu) / (mu - b.lambda_sq);
                        u.iter().zip(up).map(|(a, p)| a + w * (a - p)).collect()
                    }
                    _ => u.clone(),
                };
                (mu_next, predictor)
            }
            Some(win) => {
                let in_window = points.len() - win.entered;
                let (m, v) = match fold {
                    Some(f) => f,
                    None => break Termination::FoldProximity,
                };
                let start = v - span * win.nominal;
                let target = if s < start - win.ds { start } else { s + win.ds };
                if target > v - 0.5 * win.ds {
                    if in_window >= policy.fit_points || win.ds < win.nominal / 64.0 {
                        break Termination::FoldProximity;
                    }
                    win.ds *= 0.5;
                    continue;
                }
                let mu_next = m.eval(target);
                if !(mu_next > mu) || (mu_next.sqrt() - last.lambda) < policy.step_floor {
                    break Termination::FoldProximity;
                }
                let b = before.expect("window mode needs history");
                let w = (target - s) / (s - b.norm);
                let up = u_prev.as_ref().expect("window mode needs history");
                let predictor = u.iter().zip(up).map(|(a, p)| a + w * (a - p)).collect();
                (mu_next, predictor)
            }
        };

        let accepted = match newton.solve(predictor, mu_next) {
            Ok((next, iters)) => {
                let s_next = norm_of(&next);
                (s_next > s).then_some((next, iters, s_next))
            }
            Err(Error::NonConvergence { .. } | Error::SingularJacobian { .. }) => None,
            Err(e) => return Err(e),
        };
        match accepted {
            Some((next, iters, s_next)) => {
                let lambda = mu_next.sqrt();
                points.push(TracePoint {
                    lambda,
                    lambda_sq: mu_next,
                    norm: s_next,
                    newton_iters: iters,
                    field: if policy.keep_fields {
                        Some(field_of(&next, lambda)?)
                    } else {
                        None
                    },
                });
                u_prev = Some(std::mem::replace(&mut u, next));
            }
            None => match &mut window {
                None => dl *= 0.5,
                Some(win) => {
                    win.ds *= 0.5;
                    if win.ds < win.nominal / 64.0 {
                        break Termination::FoldProximity;
                    }
                }
            },
        }
    };

    if points.len() == 1 {
        return Err(Error::Diverged { lambda: 0.0 });
    }
    let lambda = points.last().unwrap().lambda;
    Ok(ContinuationTrace {
        norm: policy.norm,
        points,
        termination,
        final_field: Some(field_of(&u, lambda)?),
    })
}

/// `lambda_cr^2 - lambda^2 = C (‖u‖ - u0)^2` fitted to the end of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldFit {
    pub lambda_cr_sq: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub u0: f64,
    pub rms_relative_residual: f64,
    pub points: usize,
}

pub const FOLD_FIT_POINTS: usize = 10;
pub const FOLD_FIT_THRESHOLD: f64 = 1e-4;

/// Fits the last ten points of `trace`.
pub fn fit_fold(trace: &ContinuationTrace) -> Result<FoldFit> {
    fit_fold_pairs(&trace.pairs(), FOLD_FIT_POINTS, FOLD_FIT_THRESHOLD)
}

/// Least-squares `lambda^2 = p0 + p1 s + p2 s^2` over the last `count` of the
/// `(s, lambda^2)` pairs.
pub fn fit_fold_pairs(pairs: &[(f64, f64)], count: usize, threshold: f64) -> Result<FoldFit> {
    if count < 3 || pairs.len() < count {
        return Err(Error::TooFewPoints {
            got: pairs.len(),
            need: count.max(3),
        });
    }
    let pts = &pairs[pairs.len() - count..];
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    if !(half > 0.0) {
        return Err(Error::InvalidInput("fold fit needs distinct norms".into()));
    }
    let x: Vec<f64> = pts.iter().map(|p| (p.0 - mid) / half).collect();
    let q = lstsq(count, 3, |i, j| x[i].powi(j as i32), |i| pts[i].1);
    let (q0, q1, q2) = (q[0], q[1], q[2]);
    let u0 = mid - half * q1 / (2.0 * q2);
    if !(q2 < 0.0) || u0 < hi {
        return Err(Error::NotAFold {
            p2: q2 / (half * half),
            u0,
            last_norm: hi,
        });
    }
    let lambda_cr_sq = q0 - q1 * q1 / (4.0 * q2);
    let ss: f64 = x
        .iter()
        .zip(pts)
        .map(|(&x, p)| ((q0 + q1 * x + q2 * x * x - p.1) / lambda_cr_sq).powi(2))
        .sum();
    let residual = (ss / count as f64).sqrt();
    if residual > threshold {
        return Err(Error::PoorFit { residual, threshold });
    }
    Ok(FoldFit {
        lambda_cr_sq,
        c: -q2 / (half * half),
        u0,
        rms_relative_residual: residual,
        points: count,
    })
}

fn lstsq(rows: usize, cols: usize, a: impl Fn(usize, usize) -> f64, b: impl Fn(usize) -> f64) -> Vec<f64> {
    let a = Mat::from_fn(rows, cols, a);
    let b = Mat::from_fn(rows, 1, |i, _| b(i));
    let x = a.qr().solve_lstsq(&b);
    (0..cols).map(|j| x[(j, 0)]).collect()
}

/// `y = a + b / n` by least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseNFit {
    pub a: f64,
    pub b: f64,
    /// Root mean square residual over `|a|`.
    pub quality: f64,
}

pub fn fit_inverse_n(data: &[(usize, f64)]) -> Result<InverseNFit> {
    if data.len() < 3 {
        return Err(Error::TooFewPoints {
            got: data.len(),
            need: 3,
        });
    }
    let n_min = data.iter().map(|d| d.0).min().unwrap() as f64;
    let coef = lstsq(data.len(), 2, |i, j| if j == 0 { 1.0 } else { n_min / data[i].0 as f64 }, |i| data[i].1);
    let (a, b) = (coef[0], coef[1] * n_min);
    let ss: f64 = data.iter().map(|&(n, y)| (a + b / n as f64 - y).powi(2)).sum();
    Ok(InverseNFit {
        a,
        b,
        quality: (ss / data.len() as f64).sqrt() / a.abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtrapolationOptions {
    pub n_list: Vec<usize>,
    /// Doublings of every `n` tried after a poor `a + b/n` fit.
    pub retry_cap: usize,
    pub fit_threshold: f64,
    pub fold_threshold: f64,
    pub policy: StepPolicy,
    pub grid: GridOptions,
}

impl Default for ExtrapolationOptions {
    fn default() -> Self {
        ExtrapolationOptions {
            n_list: vec![64, 128, 256],
            retry_cap: 2,
            fit_threshold: 1e-3,
            fold_threshold: FOLD_FIT_THRESHOLD,
            policy: StepPolicy::default(),
            grid: GridOptions::default(),
        }
    }
}

/// Fold estimate on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEstimate {
    pub n: usize,
    pub n_r: usize,
    pub n_theta: usize,
    pub unknowns: usize,
    pub cells_per_segment: usize,
    pub conducting_cells: usize,
    pub effective_alpha: f64,
    pub lambda_cr_sq: f64,
    pub fold: FoldFit,
    pub trace_points: usize,
    pub termination: Termination,
    pub final_lambda_sq: f64,
    pub final_norm: f64,
}

/// Traces the branch on `grid` and fits its fold.
pub fn estimate_on_grid(
    grid: Arc<PolarGrid>,
    policy: &StepPolicy,
    fold_threshold: f64,
) -> Result<(GridEstimate, ContinuationTrace)> {
    let trace = trace_branch(grid.clone(), policy)?;
    let fold = fit_fold_pairs(&trace.pairs(), policy.fit_points, fold_threshold)?;
    let last = trace.last();
    let est = GridEstimate {
        n: grid.n(),
        n_r: grid.n_r(),
        n_theta: grid.n_theta(),
        unknowns: grid.n_unknowns(),
        cells_per_segment: grid.cells_per_segment(),
        conducting_cells: grid.conducting_cells_per_segment(),
        effective_alpha: grid.effective_alpha(),
        lambda_cr_sq: fold.lambda_cr_sq,
        fold,
        trace_points: trace.points.len(),
        termination: trace.termination,
        final_lambda_sq: last.lambda_sq,
        final_norm: last.norm,
    };
    Ok((est, trace))
}

/// Critical parameter of one boundary specification, extrapolated in `n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub spec: BoundarySpec,
    pub per_n: Vec<GridEstimate>,
    pub extrapolated_lambda_cr_sq: f64,
    pub slope_b: f64,
    pub fit_quality: f64,
    pub fit_threshold: f64,
    /// Grid lists tried, the last one accepted.
    pub attempts: Vec<Vec<usize>>,
    /// Traces matching `per_n`.
    #[serde(skip)]
    pub traces: Vec<ContinuationTrace>,
}

impl CriticalEstimate {
    pub fn finest(&self) -> &GridEstimate {
        self.per_n.last().expect("at least three grids")
    }

    /// Near-critical field on the finest grid.
    pub fn finest_field(&self) -> Option<&SolutionField> {
        self.traces.last().and_then(|t| t.final_field.as_ref())
    }
}

/// Fold estimates at each `n`, fitted to `a + b/n`.
///
/// A fit worse than `fit_threshold` doubles every `n` and tries again, at most
/// `retry_cap` times; grids already solved are reused.
pub fn extrapolate_in_n(spec: &BoundarySpec, opts: &ExtrapolationOptions) -> Result<CriticalEstimate> {
    let n_list = &opts.n_list;
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!(
            "n_list must be strictly increasing with at least 3 entries, got {n_list:?}"
        )));
    }
    let mut done: BTreeMap<usize, (GridEstimate, ContinuationTrace)> = BTreeMap::new();
    let mut attempts = Vec::new();
    let mut current = n_list.clone();
    loop {
        for &n in &current {
            if let Entry::Vacant(slot) = done.entry(n) {
                let grid = Arc::new(PolarGrid::with_options(n, spec, opts.grid)?);
                slot.insert(estimate_on_grid(grid, &opts.policy, opts.fold_threshold)?);
            }
        }
        attempts.push(current.clone());
        let data: Vec<(usize, f64)> = current.iter().map(|n| (*n, done[n].0.lambda_cr_sq)).collect();
        let fit = fit_inverse_n(&data)?;
        let (per_n, traces) = current.iter().map(|n| done[n].clone()).unzip();
        let estimate = CriticalEstimate {
            spec: *spec,
            per_n,
            extrapolated_lambda_cr_sq: fit.a,
            slope_b: fit.b,
            fit_quality: fit.quality,
            fit_threshold: opts.fit_threshold,
            attempts: attempts.clone(),
            traces,
        };
        if fit.quality <= opts.fit_threshold {
            return Ok(estimate);
        }
        if attempts.len() > opts.retry_cap {
            return Err(Error::RetryCapExceeded {
                threshold: opts.fit_threshold,
                quality: fit.quality,
                n_list: current,
                best: Box::new(estimate),
            });
        }
        current = current.iter().map(|n| 2 * n).collect();
    }
}
