use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fkcrit::geometry::{BoundaryKind, BoundarySpec, Fraction};
use fkcrit::sweep::{emit_figures, run_case, run_sweep, Case, CaseStatus, RunOptions, SolverSettings, SweepConfig};
use fkcrit::validate::run_validation;

#[derive(Parser)]
#[command(name = "fkcrit", version, about = "Critical thresholds for the Frank-Kamenetsky problem on a disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extrapolated critical parameter of a single wall pattern.
    Solve {
        #[arg(long, value_enum, default_value = "periodic")]
        kind: Kind,
        /// Number of wall segments.
        #[arg(long, default_value_t = 1)]
        segments: u32,
        /// Conducting fraction, e.g. 1/32.
        #[arg(long, default_value = "1")]
        alpha: Fraction,
        /// Grid sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        n: Vec<usize>,
        /// Take solver settings from this sweep config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the case files under this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs every case of a config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Recompute cases already on disk.
        #[arg(long)]
        force: bool,
        /// Check the config and list the cases without writing anything.
        #[arg(long)]
        dry_run: bool,
    },
    /// Writes the plot-data files of a finished sweep.
    EmitFigures {
        #[arg(long)]
        out: PathBuf,
    },
    /// Checks the solver against closed-form solutions.
    Validate,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Kind {
    FullDirichlet,
    SingleArc,
    Periodic,
}

fn spec_of(kind: Kind, segments: u32, alpha: Fraction) -> fkcrit::Result<BoundarySpec> {
    match kind {
        Kind::FullDirichlet => Ok(BoundarySpec::full_dirichlet()),
        Kind::SingleArc => BoundarySpec::single_arc(alpha),
        Kind::Periodic => BoundarySpec::periodic(segments, alpha),
    }
}

fn run(cli: Cli) -> fkcrit::Result<ExitCode> {
    match cli.command {
        Command::Solve {
            kind,
            segments,
            alpha,
            n,
            config,
            out,
        } => {
            let spec = spec_of(kind, segments, alpha)?;
            let solver = match config {
                Some(path) => SweepConfig::load(&path)?.solver,
                None => SolverSettings::default(),
            };
            let case = Case::new(spec, n);
            let record = run_case(&case, &solver);
            if let Some(dir) = out {
                let cfg = SweepConfig {
                    cases: vec![case],
                    solver,
                    output_dir: Some(dir),
                    jobs: 1,
                    figure_case: None,
                };
                run_sweep(&cfg, &RunOptions { force: true, ..Default::default() })?;
            }
            println!("{}", serde_json::to_string_pretty(&record)?);
            Ok(if record.status == CaseStatus::Ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Sweep {
            config,
            out,
            jobs,
            force,
            dry_run,
        } => {
            let cfg = SweepConfig::load(&config)?;
            let opts = RunOptions { out, jobs, force, dry_run };
            let report = run_sweep(&cfg, &opts)?;
            if dry_run {
                for c in &cfg.cases {
                    let kind = match c.spec.kind() {
                        BoundaryKind::FullDirichlet => "full-dirichlet",
                        BoundaryKind::SingleArc => "single-arc",
                        BoundaryKind::Periodic => "periodic",
                    };
                    println!("{} {kind} n = {:?}", c.id, c.n_list);
                }
                println!("{} cases, config ok", cfg.cases.len());
                return Ok(ExitCode::SUCCESS);
            }
            for c in &report.cases {
                let v = c.lambda_cr_sq.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
                println!("{:<28} {:<20} lambda_cr^2 = {v}", c.id, format!("{:?}", c.status));
            }
            for s in &report.scaling {
                match &s.fit {
                    Some(f) => println!("N = {:<4} S = {:.4} t = {:.4}", s.segments, f.s, f.t),
                    None => println!("N = {:<4} {}", s.segments, s.error.as_deref().unwrap_or("")),
                }
            }
            Ok(if report.failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::EmitFigures { out } => {
            let manifest = emit_figures(&out)?;
            for f in &manifest.files {
                println!("{}", out.join(&f.name).display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate => {
            let checks = run_validation();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
