use std::path::Path;
use std::process::{Command, Output};

use svdro_bench::tables::{SummaryRow, TraceRow};
use svdro_core::record::decode_trial;

const QUICK: [&str; 4] = [
    "--override",
    "episode.total_steps=20",
    "--override",
    "sampler.samples=16",
];

fn svdro(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svdro"))
        .args(args)
        .env("SVDRO_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn quick(cmd: &str, extra: &[&str]) -> Vec<String> {
    let mut v = vec![cmd.to_string()];
    v.extend(QUICK.iter().map(|s| s.to_string()));
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run(args: &[String], out: &Path) -> Output {
    let a: Vec<&str> = args.iter().map(String::as_str).collect();
    svdro(&a, out)
}

fn read_csv<R: serde::de::DeserializeOwned>(p: &Path) -> Vec<R> {
    csv::Reader::from_path(p)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn trial_writes_a_record_and_a_summary_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&quick("trial", &["--env", "tray", "--controller", "svdro", "--seed", "7"]), dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let line: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(line["steps"], 20);
    let text = std::fs::read_to_string(dir.path().join("trial-tray-svdro-7.jsonl")).unwrap();
    let rec = decode_trial(&text).unwrap();
    assert_eq!(rec.seed, 7);
    assert_eq!(rec.cycles.len(), 2);
}

#[test]
fn repeated_trials_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = quick("trial", &["--controller", "emppi", "--seed", "3"]);
    assert_eq!(code(&run(&args, a.path())), 0);
    let mut par = args.clone();
    par.extend(["--workers".to_string(), "3".to_string()]);
    assert_eq!(code(&run(&par, b.path())), 0);
    let f = "trial-tray-emppi-3.jsonl";
    assert_eq!(
        std::fs::read(a.path().join(f)).unwrap(),
        std::fs::read(b.path().join(f)).unwrap()
    );
}

#[test]
fn validation_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        quick("trial", &["--controller", "svdro", "--override", "true_params=[100.0, 0.5, 0.0, 0.0, 0.005]"]),
        quick("trial", &["--controller", "bogus"]),
        quick("trial", &[]),
        quick("bench", &["--trials", "0"]),
        quick("bench", &["--override", "no_such_key=1"]),
        quick("bench", &["--override", "trials"]),
        quick("bench", &["--env", "mars"]),
        quick("scale", &["--values", "0,1"]),
        quick("trace", &["--mode", "sideways"]),
        vec!["trial".into(), "--no-such-flag".into()],
        vec!["validate-config".into(), "--config".into(), "/nonexistent/x.toml".into()],
    ];
    for args in cases {
        let o = run(&args, dir.path());
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let o = run(
        &quick("trial", &["--controller", "nominal", "--out", blocker.join("sub").to_str().unwrap()]),
        dir.path(),
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_config_merges_file_flags_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "env = \"pusht\"\ntrials = 4\n[svdro]\nkernel = \"imq\"\n").unwrap();
    let o = svdro(
        &["validate-config", "--config", cfg.to_str().unwrap(), "--trials", "6", "--override", "softdro.beta=2.5"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let printed = String::from_utf8(o.stdout).unwrap();
    let back = svdro_bench::RunConfig::from_toml(&printed).unwrap();
    assert_eq!(back.env, "pusht");
    assert_eq!(back.trials, 6);
    assert_eq!(back.svdro.kernel, "imq");
    assert_eq!(back.softdro.beta, 2.5);
}

#[test]
fn one_trial_bench_has_only_extreme_cells_and_matches_a_recount() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&quick("bench", &["--trials", "1", "--controller", "nominal,svdro"]), dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<SummaryRow> = read_csv(&dir.path().join("bench-tray.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r.success_pct == 0.0 || r.success_pct == 100.0, "{r:?}");
        let text = std::fs::read_to_string(dir.path().join(format!("bench-tray/records/{}/trial-000.jsonl", r.label))).unwrap();
        let rec = decode_trial(&text).unwrap();
        let won = rec.outcome(r.threshold).unwrap().success;
        assert_eq!(r.successes, won as usize);
        assert_eq!(r.star == "*", !won);
    }
    let check = svdro(&["schema-check", dir.path().join("bench-tray.csv").to_str().unwrap()], dir.path());
    assert_eq!(code(&check), 0);
}

#[test]
fn single_kernel_ablation_is_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &quick("ablate-kernel", &["--trials", "2", "--kernels", "imq", "--threshold", "0.01"]),
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<SummaryRow> = read_csv(&dir.path().join("ablation-tray.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].label, "imq");
    assert_eq!(rows[0].trials, 2);
}

#[test]
fn particle_trace_has_one_series_per_particle_and_axis() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &quick("trace", &["--mode", "particles", "--controller", "svdro", "--override", "trace.trials=1"]),
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<TraceRow> = read_csv(&dir.path().join("trace-particles-tray.csv"));
    let env = svdro_core::make_tray_env();
    let dims = env.prior.dim();
    for cycle in 0..2 {
        let n = rows
            .iter()
            .filter(|r| r.iteration == cycle && r.series.starts_with('p'))
            .count();
        assert_eq!(n, env.particle_count * dims);
    }
}

#[test]
fn schema_check_flags_corrupted_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&quick("trial", &["--controller", "nominal", "--seed", "1"]), dir.path());
    assert_eq!(code(&o), 0);
    let good = dir.path().join("trial-tray-nominal-1.jsonl");
    let text = std::fs::read_to_string(&good).unwrap();
    let bad = dir.path().join("bad.jsonl");
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(1);
    std::fs::write(&bad, lines.join("\n")).unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "schema,axis\nsvdro-scaling/1,particles\n").unwrap();
    assert_eq!(code(&svdro(&["schema-check", good.to_str().unwrap()], dir.path())), 0);
    for f in [&bad, &csv] {
        assert_eq!(code(&svdro(&["schema-check", f.to_str().unwrap()], dir.path())), 1, "{f:?}");
    }
}
