use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use tempfile::TempDir;

fn pota(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pota")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn two_samples_one_cluster_solve() {
    let dir = TempDir::new().unwrap();
    let probs = dir.path().join("p.csv");
    fs::write(&probs, "1\n1\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = pota(&["solve", "--probs", p(&probs), "--out", p(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&out_dir.join("labels.txt")), "0\n0\n");
    let q: Vec<f64> = read(&out_dir.join("coupling.csv")).lines().map(|l| l.parse().unwrap()).collect();
    assert!(q.iter().all(|&v| (v - 0.5).abs() < 1e-12));
}

#[test]
fn swapped_partner_instance_becomes_consistent() {
    let dir = TempDir::new().unwrap();
    let probs = dir.path().join("p.csv");
    fs::write(&probs, "0.9,0.1\n0.45,0.55\n0.1,0.9\n0.55,0.45\n").unwrap();
    let sim = dir.path().join("s.csv");
    fs::write(&sim, "0,5,0,0\n5,0,0,0\n0,0,0,5\n0,0,5,0\n").unwrap();
    let labels = |eps3: &str| {
        let out_dir = dir.path().join(format!("out{eps3}"));
        let out = pota(&["solve", "--probs", p(&probs), "--similarity", p(&sim), "--eps3", eps3, "--out", p(&out_dir)]);
        assert!(out.status.success());
        read(&out_dir.join("labels.txt"))
    };
    assert_eq!(labels("0"), "0\n1\n1\n0\n");
    assert_eq!(labels("25"), "0\n0\n1\n1\n");
}

#[test]
fn solve_rejects_non_distributions() {
    let dir = TempDir::new().unwrap();
    let probs = dir.path().join("p.csv");
    fs::write(&probs, "0.5,0.2\n0.5,0.5\n").unwrap();
    let out = pota(&["solve", "--probs", p(&probs), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_csv_reports_the_line() {
    let dir = TempDir::new().unwrap();
    let probs = dir.path().join("p.csv");
    fs::write(&probs, "0.5,0.5\n0.5,abc\n").unwrap();
    let out = pota(&["solve", "--probs", p(&probs), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("p.csv:2:"), "{err}");
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "e_total = 4\nlearning_rate = 0.1\n").unwrap();
    let out = pota(&["pipeline", "--synth", "sizes=10x2,dim=4", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("run.cfg:2:") && err.contains("e_warm"), "{err}");
}

#[test]
fn missing_embeddings_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let out = pota(&["pipeline", "--embeddings", p(&dir.path().join("absent.csv")), "--k", "2", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = pota(&["pipeline", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn warmup_only_pipeline() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("o");
    let out = pota(&[
        "pipeline", "--synth", "sizes=15x3,dim=5,seed=2", "--set", "e_total=3", "--set", "e_warm=3", "--set", "d2=3",
        "--out", p(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("epochs: 3 (3 warm-up)"));
    let report: serde_json::Value = serde_json::from_str(&read(&out_dir.join("report.json"))).unwrap();
    let epochs = report["report"]["epochs"].as_array().unwrap();
    assert!(epochs.iter().all(|e| e["stage"] == "warmup" && e["label_source"] == "kmeans"));
    assert!(read(&out_dir.join("config.resolved")).contains("e_warm = 3\n"));
}

#[test]
fn resolved_config_is_reusable() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("a");
    let args = ["--synth", "sizes=12x2,dim=4,seed=5", "--set", "e_total=4", "--set", "e_warm=2", "--set", "d2=3"];
    let out = pota(&[&["pipeline"], &args[..], &["--out", p(&first)]].concat());
    assert!(out.status.success());
    let second = dir.path().join("b");
    let cfg = first.join("config.resolved");
    let out = pota(&["pipeline", "--synth", "sizes=12x2,dim=4,seed=5", "--config", p(&cfg), "--out", p(&second)]);
    assert!(out.status.success());
    assert_eq!(read(&first.join("report.json")), read(&second.join("report.json")));
}

#[test]
fn synthetic_files_feed_the_pipeline() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    for format in ["csv", "bin"] {
        let out = pota(&["synth", "--spec", "sizes=10/8/6,dim=4,seed=3", "--format", format, "--out", p(&data)]);
        assert!(out.status.success());
        let run = dir.path().join(format!("run_{format}"));
        let v = |name: &str| data.join(format!("{name}.{format}"));
        let out = pota(&[
            "pipeline", "--embeddings", p(&v("v0")), "--view1", p(&v("v1")), "--view2", p(&v("v2")), "--labels",
            p(&data.join("labels.txt")), "--set", "e_total=4", "--set", "e_warm=2", "--set", "d2=3", "--out", p(&run),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(read(&run.join("labels.txt")).lines().count(), 24);
    }
}

#[test]
fn synth_pipeline_finishes_quickly() {
    let dir = TempDir::new().unwrap();
    let start = Instant::now();
    let out = pota(&["pipeline", "--synth", "k=5,sizes=100x5,dim=16,sep=8,noise=0.5,seed=1", "--out", p(dir.path())]);
    assert!(out.status.success());
    assert!(start.elapsed().as_secs() < 120);
    assert!(stdout(&out).contains("final ACC"));
}

#[test]
fn bench_writes_k_by_5k_couplings() {
    let dir = TempDir::new().unwrap();
    let out = pota(&[
        "bench", "--synth", "sizes=12/9/7,dim=5,seed=1", "--set", "e_total=4", "--set", "e_warm=2", "--set", "d2=3",
        "--seeds", "2", "--out", p(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for m in ["prediction", "aot", "caot"] {
        let csv = read(&dir.path().join(format!("coupling_{m}.csv")));
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.split(',').count() == 15));
    }
    let bench: serde_json::Value = serde_json::from_str(&read(&dir.path().join("bench.json"))).unwrap();
    assert_eq!(bench["seeds"].as_array().unwrap().len(), 2);
    assert!(stdout(&out).contains("caot"));
}

#[test]
fn bench_without_labels_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let emb = dir.path().join("v.csv");
    fs::write(&emb, "0,1\n1,0\n0.5,0.5\n").unwrap();
    let out = pota(&["bench", "--embeddings", p(&emb), "--k", "2", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

fn eval(dir: &Path, truth: &str, pred: &str) -> Output {
    let (t, q) = (dir.join("t.txt"), dir.join("p.txt"));
    fs::write(&t, truth).unwrap();
    fs::write(&q, pred).unwrap();
    pota(&["eval", "--truth", p(&t), "--pred", p(&q), "--out", p(&dir.join("m.json"))])
}

#[test]
fn eval_cases() {
    let dir = TempDir::new().unwrap();
    let out = eval(dir.path(), "0\n1\n2\n1\n", "0\n1\n2\n1\n");
    assert_eq!(stdout(&out), "ACC 1.0000\nNMI 1.0000\n");
    let out = eval(dir.path(), "0\n1\n2\n1\n", "2\n0\n1\n0\n");
    assert!(stdout(&out).starts_with("ACC 1.0000\n"));
    let out = eval(dir.path(), "0\n0\n1\n1\n", "0\n1\n0\n1\n");
    assert_eq!(stdout(&out), "ACC 0.5000\nNMI 0.0000\n");
    let m: serde_json::Value = serde_json::from_str(&read(&dir.path().join("m.json"))).unwrap();
    assert_eq!(m["acc"], 0.5);
    let out = eval(dir.path(), "0\n0\n1\n", "0\n1\n");
    assert_eq!(out.status.code(), Some(2));
}
