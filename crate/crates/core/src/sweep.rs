//! Batch runs over boundary specifications, their on-disk records, and the
//! plot-data files derived from them.
//!
//! Output layout under the sweep directory:
//!
//! ```text
//! report.json          case list, statuses and scaling fits
//! table.csv            one row per case
//! per_n.csv            one row per case and grid
//! scaling.json         power-law fits per segment count
//! run.log              timings; the only file that differs between runs
//! cases/<id>.json      full record of one case
//! cases/<id>/trace_n<n>.csv
//! cases/<id>/field.csv near-critical field on the finest grid
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_core_with, core_radial_mismatch, fit_scaling_law, CoreAnalysis, ScalingFit, CORE_THRESHOLD};
use crate::continuation::{extrapolate_in_n, CriticalEstimate, ExtrapolationOptions, StepPolicy, FOLD_FIT_THRESHOLD};
use crate::discretization::{fmt12, SolutionField};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryKind, BoundarySpec, Fraction, GridOptions, PolarGrid};

pub const SCHEMA_VERSION: u32 = 1;

/// Solver knobs shared by every case of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub n_list: Vec<usize>,
    pub retry_cap: usize,
    pub fit_threshold: f64,
    pub fold_threshold: f64,
    pub core_threshold: f64,
    /// Largest alpha entering the power-law fits.
    pub scaling_alpha_max: Fraction,
    pub policy: StepPolicy,
    pub grid: GridOptions,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            n_list: vec![64, 128, 256],
            retry_cap: 2,
            fit_threshold: 1e-3,
            fold_threshold: FOLD_FIT_THRESHOLD,
            core_threshold: CORE_THRESHOLD,
            scaling_alpha_max: Fraction::new(1, 32).unwrap(),
            policy: StepPolicy::default(),
            grid: GridOptions::default(),
        }
    }
}

impl SolverSettings {
    fn extrapolation(&self, n_list: &[usize]) -> ExtrapolationOptions {
        ExtrapolationOptions {
            n_list: n_list.to_vec(),
            retry_cap: self.retry_cap,
            fit_threshold: self.fit_threshold,
            fold_threshold: self.fold_threshold,
            policy: self.policy,
            grid: self.grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub spec: BoundarySpec,
    pub n_list: Vec<usize>,
}

impl Case {
    pub fn new(spec: BoundarySpec, n_list: Vec<usize>) -> Self {
        Case {
            id: spec.label(),
            spec,
            n_list,
        }
    }
}

fn case_order(a: (&BoundarySpec, &str), b: (&BoundarySpec, &str)) -> std::cmp::Ordering {
    let n = |s: &BoundarySpec| if s.kind() == BoundaryKind::Periodic { s.segments() } else { 0 };
    n(a.0)
        .cmp(&n(b.0))
        .then(a.0.alpha().value().total_cmp(&b.0.alpha().value()))
        .then(a.1.cmp(b.1))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Alphas {
    One(Fraction),
    Many(Vec<Fraction>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseEntry {
    kind: BoundaryKind,
    #[serde(default)]
    segments: Option<u32>,
    #[serde(default)]
    alpha: Option<Alphas>,
    #[serde(default)]
    n_list: Option<Vec<usize>>,
    #[serde(default)]
    id: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    jobs: Option<usize>,
    #[serde(default)]
    figure_case: Option<String>,
    #[serde(default)]
    solver: SolverSettings,
    #[serde(default)]
    cases: Vec<CaseEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub cases: Vec<Case>,
    pub solver: SolverSettings,
    pub output_dir: Option<PathBuf>,
    pub jobs: usize,
    /// Case whose field becomes the surface dump.
    pub figure_case: Option<String>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Parses the TOML form. Each `[[cases]]` entry may list several alphas,
    /// which expand into one case each.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cases = Vec::new();
        for entry in file.cases {
            let alphas = match entry.alpha {
                None => vec![Fraction::ONE],
                Some(Alphas::One(a)) => vec![a],
                Some(Alphas::Many(v)) => v,
            };
            if entry.id.is_some() && alphas.len() != 1 {
                return Err(Error::Config("`id` needs a single alpha".into()));
            }
            for alpha in alphas {
                let spec = match entry.kind {
                    BoundaryKind::FullDirichlet => {
                        if alpha != Fraction::ONE || entry.segments.is_some() {
                            return Err(Error::Config("full-dirichlet takes no alpha or segments".into()));
                        }
                        BoundarySpec::full_dirichlet()
                    }
                    BoundaryKind::SingleArc => BoundarySpec::single_arc(alpha)?,
                    BoundaryKind::Periodic => {
                        let n = entry
                            .segments
                            .ok_or_else(|| Error::Config("periodic case needs `segments`".into()))?;
                        BoundarySpec::periodic(n, alpha)?
                    }
                };
                let n_list = entry.n_list.clone().unwrap_or_else(|| file.solver.n_list.clone());
                let mut case = Case::new(spec, n_list);
                if let Some(id) = &entry.id {
                    case.id = id.clone();
                }
                cases.push(case);
            }
        }
        let config = SweepConfig {
            cases,
            solver: file.solver,
            output_dir: file.output_dir,
            jobs: file.jobs.unwrap_or(1),
            figure_case: file.figure_case,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cases.is_empty() {
            return Err(Error::Config("no cases".into()));
        }
        let mut ids = BTreeSet::new();
        for case in &self.cases {
            if case.id.is_empty() || case.id.contains(['/', '\\']) || case.id.starts_with('.') {
                return Err(Error::Config(format!("bad case id {:?}", case.id)));
            }
            if !ids.insert(case.id.as_str()) {
                return Err(Error::Config(format!("duplicate case id {}", case.id)));
            }
            let n = &case.n_list;
            if n.len() < 3 || n.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!("{}: n_list must be strictly increasing, length >= 3", case.id)));
            }
            PolarGrid::with_options(n[0], &case.spec, self.solver.grid)?;
        }
        if let Some(f) = &self.figure_case {
            if !ids.contains(f.as_str()) {
                return Err(Error::Config(format!("figure_case {f} is not a case")));
            }
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be positive".into()));
        }
        Ok(())
    }

    /// The configured figure case, else periodic `N = 32, α = 1/32` if present.
    pub fn figure_case(&self) -> Option<String> {
        self.figure_case.clone().or_else(|| {
            let want = BoundarySpec::periodic(32, Fraction::new(1, 32).unwrap()).unwrap();
            self.cases.iter().find(|c| c.spec == want).map(|c| c.id.clone())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseStatus {
    Ok,
    RetryCapExceeded,
    NoCore,
    Failed,
}

/// Everything known about one case; written to `cases/<id>.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRecord {
    pub schema_version: u32,
    pub id: String,
    pub spec: BoundarySpec,
    pub n_list: Vec<usize>,
    pub solver: SolverSettings,
    pub status: CaseStatus,
    pub error: Option<String>,
    pub effective_alpha: Option<f64>,
    pub estimate: Option<CriticalEstimate>,
    /// Core of the finest-grid field, with `Λ²` from the extrapolated
    /// `λ_cr²`.
    pub core: Option<CoreAnalysis>,
    pub core_note: Option<String>,
    pub boundary_layer_thickness: Option<f64>,
    /// Core of the finest-grid field against the radial solution.
    pub core_radial_mismatch: Option<f64>,
}

impl CaseRecord {
    pub fn lambda_cr_sq(&self) -> Option<f64> {
        self.estimate.as_ref().map(|e| e.extrapolated_lambda_cr_sq)
    }
}

/// Runs the whole pipeline for one case.
pub fn run_case(case: &Case, solver: &SolverSettings) -> CaseRecord {
    let mut record = CaseRecord {
        schema_version: SCHEMA_VERSION,
        id: case.id.clone(),
        spec: case.spec,
        n_list: case.n_list.clone(),
        solver: solver.clone(),
        status: CaseStatus::Ok,
        error: None,
        effective_alpha: None,
        estimate: None,
        core: None,
        core_note: None,
        boundary_layer_thickness: None,
        core_radial_mismatch: None,
    };
    let estimate = match extrapolate_in_n(&case.spec, &solver.extrapolation(&case.n_list)) {
        Ok(e) => e,
        Err(Error::RetryCapExceeded { best, .. }) => {
            record.status = CaseStatus::RetryCapExceeded;
            record.error = Some(format!(
                "a + b/n fit quality {:.3e} above {:.1e} after {} attempts",
                best.fit_quality,
                best.fit_threshold,
                best.attempts.len()
            ));
            *best
        }
        Err(e) => {
            record.status = CaseStatus::Failed;
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.effective_alpha = Some(estimate.finest().effective_alpha);
    if let Some(field) = estimate.finest_field() {
        match analyze_core_with(field, estimate.extrapolated_lambda_cr_sq, solver.core_threshold) {
            Ok(core) => {
                record.boundary_layer_thickness = Some(1.0 - core.rho_star);
                record.core_radial_mismatch = core_radial_mismatch(field, &core).ok();
                record.core = Some(core);
                record.core_note = Some(format!(
                    "field from n = {} at lambda^2 = {}; Lambda^2 uses the extrapolated lambda_cr^2",
                    estimate.finest().n,
                    fmt12(field.lambda_sq())
                ));
            }
            Err(e) => {
                if record.status == CaseStatus::Ok {
                    record.status = CaseStatus::NoCore;
                }
                record.core_note = Some(e.to_string());
            }
        }
    }
    record.estimate = Some(estimate);
    record
}

fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let result = (|| {
        let mut out = BufWriter::new(fs::File::create(&tmp)?);
        write(&mut out)?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomic(path, |w| writeln!(w, "{text}"))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes the sector unknowns of `field`: a header with `n`, then
/// `rho,theta,u` ring by ring.
fn write_sector_field(path: &Path, field: &SolutionField) -> Result<()> {
    let g = field.grid();
    write_atomic(path, |w| {
        writeln!(w, "n,n_r,n_sector,lambda")?;
        writeln!(w, "{},{},{},{}", g.n(), g.n_r(), g.n_sector(), fmt12(field.lambda()))?;
        writeln!(w, "rho,theta,u")?;
        for i in 0..g.n_r() {
            let rho = fmt12(g.rho()[i]);
            for (j, u) in field.ring(i).iter().enumerate() {
                writeln!(w, "{rho},{},{}", fmt12(g.sector_theta(j)), fmt12(*u))?;
            }
        }
        Ok(())
    })
}

fn read_sector_field(path: &Path, spec: &BoundarySpec, options: GridOptions) -> Result<SolutionField> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |what: &str| Error::MissingData(format!("{}: {what}", path.display()));
    let mut lines = BufReader::new(file).lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| bad("truncated"))?
            .map_err(|e| Error::io(path, e))
    };
    next()?;
    let header = next()?;
    let head: Vec<&str> = header.split(',').collect();
    if head.len() != 4 {
        return Err(bad("bad header"));
    }
    let n: usize = head[0].parse().map_err(|_| bad("bad n"))?;
    let lambda: f64 = head[3].parse().map_err(|_| bad("bad lambda"))?;
    next()?;
    let grid = Arc::new(PolarGrid::with_options(n, spec, options)?);
    let mut values = Vec::with_capacity(grid.n_unknowns());
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let u = line.rsplit(',').next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad row"))?;
        values.push(u);
    }
    SolutionField::new(grid, values, lambda)
}

fn case_paths(out: &Path, id: &str) -> (PathBuf, PathBuf) {
    (out.join("cases").join(format!("{id}.json")), out.join("cases").join(id))
}

fn write_case(out: &Path, record: &CaseRecord) -> Result<()> {
    let (json, dir) = case_paths(out, &record.id);
    create_dir(&dir)?;
    if let Some(est) = &record.estimate {
        for (g, trace) in est.per_n.iter().zip(&est.traces) {
            write_atomic(&dir.join(format!("trace_n{}.csv", g.n)), |w| trace.write_csv(w))?;
        }
        if let Some(field) = est.finest_field() {
            write_sector_field(&dir.join("field.csv"), field)?;
        }
    }
    // the record goes last so its presence marks a completed case
    write_json(&json, record)
}

fn read_record(path: &Path) -> Result<CaseRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub force: bool,
    pub dry_run: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseSummary {
    pub id: String,
    pub spec: BoundarySpec,
    pub status: CaseStatus,
    pub lambda_cr_sq: Option<f64>,
    #[serde(rename = "Lambda_sq")]
    pub big_lambda_sq: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingEntry {
    #[serde(rename = "N")]
    pub segments: u32,
    pub fit: Option<ScalingFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub figure_case: Option<String>,
    pub cases: Vec<CaseSummary>,
    pub scaling: Vec<ScalingEntry>,
    pub failures: usize,
    /// Cases computed in this run, the rest were loaded from disk.
    #[serde(skip)]
    pub computed: Vec<String>,
    #[serde(skip)]
    pub records: Vec<CaseRecord>,
}

/// Runs every case not already on disk, then rewrites the combined outputs.
///
/// Cases run concurrently on `jobs` workers; each writes only its own files.
/// A dry run validates and reports the planned grids without touching disk.
pub fn run_sweep(config: &SweepConfig, opts: &RunOptions) -> Result<SweepReport> {
    config.validate()?;
    let out = opts
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory".into()))?;
    let jobs = opts.jobs.unwrap_or(config.jobs).max(1);
    if opts.dry_run {
        return Ok(SweepReport {
            schema_version: SCHEMA_VERSION,
            figure_case: config.figure_case(),
            cases: Vec::new(),
            scaling: Vec::new(),
            failures: 0,
            computed: Vec::new(),
            records: Vec::new(),
        });
    }
    create_dir(&out.join("cases"))?;
    let mut log = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out.join("run.log"))
        .map_err(|e| Error::io(out.join("run.log"), e))?;
    let stamp = || SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let _ = writeln!(log, "{} start {} cases, {} jobs", stamp(), config.cases.len(), jobs);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<(CaseRecord, Option<f64>, Option<String>)> = pool.install(|| {
        config
            .cases
            .par_iter()
            .map(|case| {
                let (json, _) = case_paths(&out, &case.id);
                if !opts.force {
                    if let Ok(rec) = read_record(&json) {
                        if rec.n_list == case.n_list && rec.solver == config.solver && rec.spec == case.spec {
                            return Ok((rec, None, None));
                        }
                    }
                }
                let t0 = Instant::now();
                let rec = run_case(case, &config.solver);
                let secs = t0.elapsed().as_secs_f64();
                let err = write_case(&out, &rec).err().map(|e| e.to_string());
                Ok((rec, Some(secs), err))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut records = Vec::new();
    let mut computed = Vec::new();
    for (rec, secs, err) in results {
        match secs {
            Some(s) => {
                let _ = writeln!(log, "{} case {} {:?} in {s:.1} s", stamp(), rec.id, rec.status);
                computed.push(rec.id.clone());
            }
            None => {
                let _ = writeln!(log, "{} case {} loaded", stamp(), rec.id);
            }
        }
        if let Some(e) = err {
            return Err(Error::Config(format!("writing case {}: {e}", rec.id)));
        }
        records.push(rec);
    }
    records.sort_by(|a, b| case_order((&a.spec, &a.id), (&b.spec, &b.id)));

    let report = summarize(&records, config.figure_case(), config.solver.scaling_alpha_max);
    write_json(&out.join("report.json"), &report)?;
    write_json(&out.join("scaling.json"), &report.scaling)?;
    write_atomic(&out.join("table.csv"), |w| write_table(w, &records))?;
    write_atomic(&out.join("per_n.csv"), |w| write_per_n(w, &records))?;
    let _ = writeln!(log, "{} done, {} failures", stamp(), report.failures);
    Ok(SweepReport {
        computed,
        records,
        ..report
    })
}

/// Groups periodic cases by `N` and fits the power law to those with
/// `α ≤ alpha_max`.
pub fn scaling_fits(records: &[CaseRecord], alpha_max: Fraction) -> Vec<ScalingEntry> {
    let mut groups: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        if r.spec.kind() != BoundaryKind::Periodic || r.status != CaseStatus::Ok {
            continue;
        }
        let a = r.spec.alpha();
        if (a.num() as u128) * (alpha_max.den() as u128) > (alpha_max.num() as u128) * (a.den() as u128) {
            continue;
        }
        if let (Some(y), Some(alpha)) = (r.lambda_cr_sq(), r.effective_alpha) {
            groups.entry(r.spec.segments()).or_default().push((alpha, y));
        }
    }
    groups
        .into_iter()
        .map(|(n, pts)| match fit_scaling_law(&pts, n) {
            Ok(fit) => ScalingEntry {
                segments: n,
                fit: Some(fit),
                error: None,
            },
            Err(e) => ScalingEntry {
                segments: n,
                fit: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

fn summarize(records: &[CaseRecord], figure_case: Option<String>, alpha_max: Fraction) -> SweepReport {
    let cases: Vec<CaseSummary> = records
        .iter()
        .map(|r| CaseSummary {
            id: r.id.clone(),
            spec: r.spec,
            status: r.status,
            lambda_cr_sq: r.lambda_cr_sq(),
            big_lambda_sq: r.core.map(|c| c.big_lambda_sq),
            error: r.error.clone().or_else(|| {
                (r.status == CaseStatus::NoCore)
                    .then(|| r.core_note.clone())
                    .flatten()
            }),
        })
        .collect();
    let failures = cases.iter().filter(|c| c.status != CaseStatus::Ok).count();
    SweepReport {
        schema_version: SCHEMA_VERSION,
        figure_case,
        cases,
        scaling: scaling_fits(records, alpha_max),
        failures,
        computed: Vec::new(),
        records: Vec::new(),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt12).unwrap_or_default()
}

fn write_table(w: &mut dyn Write, records: &[CaseRecord]) -> std::io::Result<()> {
    writeln!(
        w,
        "id,kind,N,alpha,effective_alpha,status,lambda_cr_sq,slope_b,fit_quality,n_list,rho_star,u_star,Lambda_sq,boundary_layer"
    )?;
    for r in records {
        let est = r.estimate.as_ref();
        let n_list = est
            .map(|e| e.per_n.iter().map(|g| g.n.to_string()).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.id,
            serde_json::to_value(r.spec.kind()).unwrap().as_str().unwrap_or(""),
            r.spec.segments(),
            r.spec.alpha(),
            opt(r.effective_alpha),
            serde_json::to_value(r.status).unwrap().as_str().unwrap_or(""),
            opt(r.lambda_cr_sq()),
            opt(est.map(|e| e.slope_b)),
            opt(est.map(|e| e.fit_quality)),
            n_list,
            opt(r.core.map(|c| c.rho_star)),
            opt(r.core.map(|c| c.u_star)),
            opt(r.core.map(|c| c.big_lambda_sq)),
            opt(r.boundary_layer_thickness),
        )?;
    }
    Ok(())
}

fn write_per_n(w: &mut dyn Write, records: &[CaseRecord]) -> std::io::Result<()> {
    writeln!(
        w,
        "id,N,alpha,n,n_r,n_theta,unknowns,effective_alpha,lambda_cr_sq,C,u0,rms_relative_residual,final_lambda_sq,trace_points"
    )?;
    for r in records {
        let Some(est) = &r.estimate else { continue };
        for g in &est.per_n {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.id,
                r.spec.segments(),
                r.spec.alpha(),
                g.n,
                g.n_r,
                g.n_theta,
                g.unknowns,
                fmt12(g.effective_alpha),
                fmt12(g.lambda_cr_sq),
                fmt12(g.fold.c),
                fmt12(g.fold.u0),
                fmt12(g.fold.rms_relative_residual),
                fmt12(g.final_lambda_sq),
                g.trace_points,
            )?;
        }
    }
    Ok(())
}

/// Angular samples per full turn in the surface dump, at most.
pub const SURFACE_COLUMNS: usize = 1024;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FigureFile {
    pub name: String,
    pub columns: Vec<String>,
    pub description: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FigureManifest {
    pub schema_version: u32,
    pub figure_case: Option<String>,
    pub files: Vec<FigureFile>,
}

fn figure_series(records: &[CaseRecord], value: impl Fn(&CaseRecord) -> Option<f64>) -> Vec<(u32, f64, f64)> {
    let mut rows: Vec<(u32, f64, f64)> = records
        .iter()
        .filter(|r| r.spec.kind() != BoundaryKind::FullDirichlet && r.status != CaseStatus::Failed)
        .filter_map(|r| Some((r.spec.segments(), 1.0 / r.effective_alpha?, value(r)?)))
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    rows
}

/// Writes `fig2.csv`, `fig3.csv`, `fig4.csv` and `figures.json` into
/// `report_dir` from the records of a finished sweep.
pub fn emit_figures(report_dir: &Path) -> Result<FigureManifest> {
    let report_path = report_dir.join("report.json");
    let text = fs::read_to_string(&report_path).map_err(|e| Error::io(&report_path, e))?;
    let report: SweepReport = serde_json::from_str(&text)?;
    let mut records = Vec::new();
    for c in &report.cases {
        let (json, _) = case_paths(report_dir, &c.id);
        if !json.exists() {
            return Err(Error::MissingData(format!("case {} has no record", c.id)));
        }
        records.push(read_record(&json)?);
    }

    let fig2 = figure_series(&records, |r| r.lambda_cr_sq());
    write_atomic(&report_dir.join("fig2.csv"), |w| {
        writeln!(w, "inv_alpha,lambda_cr_sq,N")?;
        for (n, x, y) in &fig2 {
            writeln!(w, "{},{},{n}", fmt12(*x), fmt12(*y))?;
        }
        Ok(())
    })?;
    let fig4 = figure_series(&records, |r| r.core.map(|c| c.big_lambda_sq));
    write_atomic(&report_dir.join("fig4.csv"), |w| {
        writeln!(w, "inv_alpha,Lambda_sq,N")?;
        for (n, x, y) in &fig4 {
            writeln!(w, "{},{},{n}", fmt12(*x), fmt12(*y))?;
        }
        Ok(())
    })?;

    let mut files = vec![
        FigureFile {
            name: "fig2.csv".into(),
            columns: vec!["inv_alpha".into(), "lambda_cr_sq".into(), "N".into()],
            description: "extrapolated critical parameter against 1/alpha, one series per N".into(),
        },
        FigureFile {
            name: "fig4.csv".into(),
            columns: vec!["inv_alpha".into(), "Lambda_sq".into(), "N".into()],
            description: "core parameter Lambda^2 against 1/alpha, one series per N".into(),
        },
    ];
    if let Some(id) = &report.figure_case {
        let rec = records
            .iter()
            .find(|r| &r.id == id)
            .ok_or_else(|| Error::MissingData(format!("figure case {id} is not in the report")))?;
        let (_, dir) = case_paths(report_dir, id);
        let field_path = dir.join("field.csv");
        if !field_path.exists() {
            return Err(Error::MissingData(format!("figure case {id} has no field")));
        }
        let field = read_sector_field(&field_path, &rec.spec, rec.solver.grid)?;
        write_atomic(&report_dir.join("fig3.csv"), |w| write_surface(w, &field))?;
        files.insert(
            1,
            FigureFile {
                name: "fig3.csv".into(),
                columns: vec!["rho".into(), "theta".into(), "u".into()],
                description: format!("near-critical surface of {id} over the full disk"),
            },
        );
    }
    let manifest = FigureManifest {
        schema_version: SCHEMA_VERSION,
        figure_case: report.figure_case.clone(),
        files,
    };
    write_json(&report_dir.join("figures.json"), &manifest)?;
    Ok(manifest)
}

/// Full-disk `rho,theta,u`, theta-major, keeping every `k`-th angular cell so
/// at most [`SURFACE_COLUMNS`] remain.
pub fn write_surface(w: &mut dyn Write, field: &SolutionField) -> std::io::Result<()> {
    let g = field.grid();
    let stride = g.n_theta().div_ceil(SURFACE_COLUMNS).max(1);
    let theta = g.theta_coords();
    writeln!(w, "rho,theta,u")?;
    for j in (0..g.n_theta()).step_by(stride) {
        let th = fmt12(theta[j]);
        for i in 0..g.n_r() {
            writeln!(w, "{},{th},{}", fmt12(g.rho()[i]), fmt12(field.at(i, j)))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_expands_alpha_families() {
        let cfg = SweepConfig::from_toml(
            r#"
            output_dir = "out"
            [solver]
            n_list = [16, 32, 64]
            [[cases]]
            kind = "full-dirichlet"
            [[cases]]
            kind = "periodic"
            segments = 8
            alpha = ["1/2", "1/4", 0.125]
            "#,
        )
        .unwrap();
        let ids: Vec<&str> = cfg.cases.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(
            ids,
            ["full-dirichlet", "periodic-N8-a1_2", "periodic-N8-a1_4", "periodic-N8-a1_8"]
        );
        assert!(cfg.cases.iter().all(|c| c.n_list == [16, 32, 64]));
        assert_eq!(cfg.solver.policy, StepPolicy::default());
    }

    #[test]
    fn config_rejections() {
        for text in [
            "",
            "[[cases]]\nkind = \"periodic\"\nalpha = \"1/2\"",
            "[[cases]]\nkind = \"full-dirichlet\"\n[[cases]]\nkind = \"full-dirichlet\"",
            "[[cases]]\nkind = \"full-dirichlet\"\nn_list = [64, 32, 128]",
            "[[cases]]\nkind = \"full-dirichlet\"\ncolour = 3",
            "figure_case = \"x\"\n[[cases]]\nkind = \"full-dirichlet\"",
        ] {
            assert!(SweepConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn scaling_groups_skip_large_alpha() {
        let mk = |alpha: &str, y: f64| {
            let spec = BoundarySpec::periodic(16, alpha.parse().unwrap()).unwrap();
            let mut r = run_case_stub(spec);
            r.effective_alpha = Some(spec.alpha().value());
            r.estimate.as_mut().unwrap().extrapolated_lambda_cr_sq = y;
            r
        };
        let recs: Vec<CaseRecord> = ["1/2", "1/32", "1/64", "1/128", "1/256", "1/512"]
            .iter()
            .map(|a| {
                let x: Fraction = a.parse().unwrap();
                mk(a, 2.0 * x.value().powf(0.1))
            })
            .collect();
        let fits = scaling_fits(&recs, Fraction::new(1, 32).unwrap());
        assert_eq!(fits.len(), 1);
        let fit = fits[0].fit.unwrap();
        assert_eq!(fit.points, 5);
        assert!((fit.s - 2.0).abs() < 1e-12 && (fit.t - 0.1).abs() < 1e-12);
    }

    fn run_case_stub(spec: BoundarySpec) -> CaseRecord {
        CaseRecord {
            schema_version: SCHEMA_VERSION,
            id: spec.label(),
            spec,
            n_list: vec![8, 16, 32],
            solver: SolverSettings::default(),
            status: CaseStatus::Ok,
            error: None,
            effective_alpha: None,
            estimate: Some(CriticalEstimate {
                spec,
                per_n: Vec::new(),
                extrapolated_lambda_cr_sq: 0.0,
                slope_b: 0.0,
                fit_quality: 0.0,
                fit_threshold: 1e-3,
                attempts: Vec::new(),
                traces: Vec::new(),
            }),
            core: None,
            core_note: None,
            boundary_layer_thickness: None,
            core_radial_mismatch: None,
        }
    }
}
