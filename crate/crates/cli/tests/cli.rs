use std::path::Path;
use std::process::{Command, Output};

use loopforge_cli::{run_bench, BenchPlan};
use loopforge_core::{GenerationConfig, Instance, ModelKind, SolveOptions};
use serde_json::Value;

fn loopforge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopforge"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        let out = loopforge(
            &[
                "generate",
                "--seed",
                "7",
                "--n",
                "10",
                "--density",
                "0.5",
                "--output",
                name,
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());
    assert_eq!(Instance::from_json(std::str::from_utf8(&a).unwrap()).unwrap().n(), 10);
}

#[test]
fn generate_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopforge(&["generate", "--n", "4"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"generation": {"n_actors": 6, "days": 1, "legal": {"max_distance_km": 5.0}}}"#,
    )
    .unwrap();
    let out = loopforge(
        &["generate", "--seed", "1", "--config", "cfg.json", "--n", "4"],
        dir.path(),
    );
    let inst = Instance::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(inst.n(), 4);
    assert_eq!(inst.horizon(), 24);
    assert_eq!(inst.legal().max_distance_km, 5.0);
    assert_eq!(inst.legal().max_installed_power_kwc, 3000.0);
}

#[test]
fn single_loop_models_agree_and_reports_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let gen = loopforge(
        &[
            "generate",
            "--seed",
            "3",
            "--n",
            "8",
            "--days",
            "2",
            "--output",
            "inst.json",
        ],
        dir.path(),
    );
    assert!(gen.status.success());
    let cpct = stdout_json(&loopforge(
        &[
            "solve",
            "--instance",
            "inst.json",
            "--model",
            "slcpct",
            "--output",
            "sol.json",
        ],
        dir.path(),
    ));
    let ext = stdout_json(&loopforge(
        &[
            "solve",
            "--instance",
            "inst.json",
            "--model",
            "slext",
            "--trace-output",
            "trace.csv",
        ],
        dir.path(),
    ));
    let (a, b) = (cpct["objective"].as_f64().unwrap(), ext["objective"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-4 * a.abs().max(1.0), "{a} vs {b}");
    assert_eq!(cpct["status"], "optimal");
    assert!(ext["iterations"].as_u64().unwrap() >= 1);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,lower_bound"));

    let report = stdout_json(&loopforge(
        &["report", "--instance", "inst.json", "--solution", "sol.json"],
        dir.path(),
    ));
    assert_eq!(report, cpct["kpis"]);
}

#[test]
fn failures_exit_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopforge(
        &["solve", "--instance", "missing.json", "--model", "slcpct"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
    assert!(err["error"]["message"].as_str().unwrap().contains("missing.json"));

    let out = loopforge(
        &["solve", "--instance", "missing.json", "--model", "nonsense"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn time_limit_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    loopforge(
        &[
            "generate",
            "--seed",
            "0",
            "--n",
            "12",
            "--days",
            "7",
            "--output",
            "inst.json",
        ],
        dir.path(),
    );
    let out = loopforge(
        &[
            "solve",
            "--instance",
            "inst.json",
            "--model",
            "mlcpct",
            "--time-limit",
            "0.05",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["status"], "time_limit");
}

#[test]
fn export_lp_writes_the_model() {
    let dir = tempfile::tempdir().unwrap();
    loopforge(
        &[
            "generate",
            "--seed",
            "2",
            "--n",
            "5",
            "--days",
            "1",
            "--output",
            "inst.json",
        ],
        dir.path(),
    );
    let out = loopforge(
        &[
            "export-lp",
            "--instance",
            "inst.json",
            "--model",
            "slcpct",
            "--output",
            "m.lp",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lp = std::fs::read_to_string(dir.path().join("m.lp")).unwrap();
    assert!(lp.contains("Minimize") && lp.contains("Binaries") && lp.trim_end().ends_with("End"));
}

#[test]
fn bench_writes_one_row_per_configuration_replicate_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = loopforge(
        &[
            "bench",
            "--replicates",
            "5",
            "--models",
            "slcpct,slext",
            "--horizon-days",
            "1,7,30",
            "--n",
            "4",
            "--no-presolve",
            "--output",
            "bench.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("bench.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 30);
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    assert!(rows.iter().all(|r| &r[col("status")] == "optimal"));
    for pair in rows.chunks(2) {
        let (a, b): (f64, f64) = (
            pair[0][col("objective")].parse().unwrap(),
            pair[1][col("objective")].parse().unwrap(),
        );
        assert!((a - b).abs() <= 1e-4 * a.abs().max(1.0));
        assert_eq!(&pair[0][col("model")], "slcpct");
    }
}

#[test]
fn bench_rows_do_not_depend_on_worker_count() {
    let plan = |workers| BenchPlan {
        presets: vec!["reference".into(), "dens_2".into()],
        sizes: vec![3, 5],
        horizons: vec![1],
        replicates: 2,
        base_seed: 11,
        models: vec![ModelKind::SlCpct, ModelKind::MlCol],
        workers,
    };
    let key = |workers| -> Vec<(String, usize, usize, String, Option<String>)> {
        run_bench(
            &plan(workers),
            &SolveOptions::default(),
            |preset, n, days, seed| Ok(GenerationConfig::preset(preset, seed, n, days)?),
            None,
        )
        .unwrap()
        .into_iter()
        .map(|r| {
            (
                r.preset,
                r.n,
                r.replicate,
                r.model.name().to_string(),
                r.objective.map(|o| format!("{o:.9}")),
            )
        })
        .collect()
    };
    let one = key(1);
    assert_eq!(one.len(), plan(1).row_count());
    assert_eq!(one, key(3));
}
