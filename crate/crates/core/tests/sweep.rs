use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use fkcrit::sweep::{emit_figures, run_sweep, CaseStatus, RunOptions, SweepConfig};
use fkcrit::Error;

const CONFIG: &str = r#"
figure_case = "periodic-N32-a1_32"

[solver]
n_list = [32, 64, 128]

[[cases]]
kind = "full-dirichlet"

[[cases]]
kind = "periodic"
segments = 32
alpha = ["1/32", "1/8"]
"#;

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn run(config: &SweepConfig, out: &Path, force: bool) -> fkcrit::sweep::SweepReport {
    run_sweep(
        config,
        &RunOptions {
            out: Some(out.to_path_buf()),
            jobs: Some(1),
            force,
            dry_run: false,
        },
    )
    .unwrap()
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = SweepConfig::from_toml(CONFIG).unwrap();
    run_sweep(
        &config,
        &RunOptions {
            out: Some(out.clone()),
            dry_run: true,
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert!(!out.exists());
}

#[test]
fn sweep_outputs_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let config = SweepConfig::from_toml(CONFIG).unwrap();
    let report = run(&config, out, false);
    assert_eq!(report.failures, 0);
    assert_eq!(report.computed.len(), 3);
    assert!(report.cases.iter().all(|c| c.status == CaseStatus::Ok));
    let dirichlet = report.cases.iter().find(|c| c.id == "full-dirichlet").unwrap();
    assert!((dirichlet.lambda_cr_sq.unwrap() - 2.0).abs() <= 0.01);
    for name in ["report.json", "scaling.json", "table.csv", "per_n.csv", "run.log"] {
        assert!(out.join(name).exists(), "{name}");
    }
    for rec in &report.records {
        assert!(out.join("cases").join(format!("{}.json", rec.id)).exists());
        let est = rec.estimate.as_ref().unwrap();
        assert_eq!(est.attempts[0], vec![32, 64, 128]);
        for g in &est.per_n {
            assert!(out.join("cases").join(&rec.id).join(format!("trace_n{}.csv", g.n)).exists());
        }
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);

    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    let again = run(&config, out, false);
    assert!(again.computed.is_empty());
    assert_eq!(table, fs::read_to_string(out.join("table.csv")).unwrap());

    let manifest = emit_figures(out).unwrap();
    let names: Vec<_> = manifest.files.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["fig2.csv", "fig3.csv", "fig4.csv"]);

    let (header, fig2) = read_csv(&out.join("fig2.csv"));
    assert_eq!(header, ["inv_alpha", "lambda_cr_sq", "N"]);
    assert_eq!(fig2.len(), 2);
    assert!(fig2.iter().all(|r| r[2] == 32.0));
    assert!(fig2[0][0] < fig2[1][0] && fig2[0][1] > fig2[1][1]);

    let (header, fig4) = read_csv(&out.join("fig4.csv"));
    assert_eq!(header, ["inv_alpha", "Lambda_sq", "N"]);
    assert!(fig4.iter().all(|r| r[1] < 2.0));

    let (header, fig3) = read_csv(&out.join("fig3.csv"));
    assert_eq!(header, ["rho", "theta", "u"]);
    let mut rings: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for row in &fig3 {
        let e = rings.entry(row[0].to_bits()).or_insert((f64::INFINITY, f64::NEG_INFINITY));
        e.0 = e.0.min(row[2]);
        e.1 = e.1.max(row[2]);
    }
    let spread: Vec<(f64, f64)> = rings.iter().map(|(&r, &(lo, hi))| (f64::from_bits(r), hi - lo)).collect();
    let (_, inner) = spread.iter().copied().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
    let (_, outer) = spread.iter().copied().max_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
    assert!(outer > 1e-2, "wall variation {outer}");
    assert!(inner < 1e-4, "core variation {inner}");

    fs::remove_file(out.join("cases").join("periodic-N32-a1_8.json")).unwrap();
    assert!(matches!(emit_figures(out), Err(Error::MissingData(_))));
}

#[test]
fn rejects_bad_configs() {
    assert!(SweepConfig::from_toml("[[cases]]\nkind = \"periodic\"\nsegments = 4\nalpha = \"3/2\"\n").is_err());
    assert!(SweepConfig::from_toml("[solver]\nbogus = 1\n").is_err());
    assert!(SweepConfig::from_toml("[[cases]]\nkind = \"periodic\"\nsegments = 0\nalpha = \"1/2\"\n").is_err());
}

#[test]
fn cli_runs_a_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, "[solver]\nn_list = [16, 32, 64]\n\n[[cases]]\nkind = \"full-dirichlet\"\n").unwrap();
    let out = dir.path().join("out");
    let bin = env!("CARGO_BIN_EXE_fkcrit");

    let dry = Command::new(bin)
        .args(["sweep", "--dry-run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(dry.status.success());
    assert!(!out.exists());

    let status = Command::new(bin)
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("report.json").exists());
    let status = Command::new(bin).args(["emit-figures", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    assert!(out.join("figures.json").exists());

    let solve = Command::new(bin)
        .args(["solve", "--kind", "periodic", "--segments", "4", "--alpha", "1/2", "--n", "16,32,64"])
        .output()
        .unwrap();
    assert!(solve.status.success());
    let record: serde_json::Value = serde_json::from_slice(&solve.stdout).unwrap();
    assert_eq!(record["status"], "ok");

    let bad = Command::new(bin).args(["solve", "--kind", "periodic", "--alpha", "0"]).output().unwrap();
    assert!(!bad.status.success());
}
