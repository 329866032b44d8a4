use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ztmesh_core::dfl::{encode_checkpoint, ModelParameters, SyntheticSetup};

fn ztmesh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ztmesh")).args(args).env("ZTMESH_LOG", "info").output().unwrap()
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).display().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"{
  "seed": 4,
  "topology": { "kind": "complete", "domains": 2 },
  "workload": { "device_count": 4, "total_requests": 12, "cross_domain_fraction": 0.5, "parallelism": 2 },
  "dfl": { "data": { "samples_per_domain": 60, "validation_per_domain": 20, "test_samples": 60 } },
  "sim": { "pretrain_rounds": 2 }
}"#;

#[test]
fn malformed_config_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\n  \"seed\": 1,\n  \"topolgy\": {}\n}");
    let out = dir.path().join("out");
    let o = ztmesh(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!out.exists());

    let cfg = write(dir.path(), "invalid.json", "{\n  \"sim\": {\n    \"workers_per_domain\": 0\n  }\n}");
    let o = ztmesh(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2: `sim`"), "{}", stderr(&o));
    assert!(!out.exists());

    let o = ztmesh(&["train", "--config", "/nonexistent.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_is_byte_identical_across_runs_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let run = |name: &str, seed: Option<&str>| {
        let out = dir.path().join(name);
        let mut args = vec!["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--trace"];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        let o = ztmesh(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let (a, b, c) = (run("a", None), run("b", None), run("c", Some("99")));
    for f in ["latency.csv", "throughput.csv", "counters.csv", "dfl_metrics.csv", "trace.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("trace.jsonl")).unwrap(), fs::read(c.join("trace.jsonl")).unwrap());
    assert!(fs::read_dir(&a).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().starts_with('.')));
}

#[test]
fn zero_rounds_leave_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ckpt");
    let o = ztmesh(&["train", "--config", &scenario("dfl_noniid.json"), "--rounds", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let setup = SyntheticSetup { seed: 7, ..SyntheticSetup::default() };
    let init = ModelParameters::init(&setup.architecture().unwrap(), &mut ChaCha8Rng::seed_from_u64(7 ^ 0x5eed));
    let expected = encode_checkpoint(&init);
    for d in ["d1", "d2", "d3"] {
        assert_eq!(fs::read(out.join("checkpoints").join(format!("{d}.ckpt"))).unwrap(), expected, "{d}");
    }
    assert_eq!(fs::read_to_string(out.join("dfl_metrics.csv")).unwrap(), "round,domain,f1,eta,waf\n");
}

#[test]
fn isolated_domain_trains_at_the_base_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "solo.json",
        r#"{"topology": {"kind": "complete", "domains": 1}, "dfl": {"data": {"samples_per_domain": 100, "validation_per_domain": 20, "test_samples": 100}}}"#,
    );
    let out = dir.path().join("solo");
    let o = ztmesh(&["train", "--config", &cfg, "--rounds", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("dfl_metrics.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10);
    for r in rows {
        assert!(r[2].parse::<f64>().is_ok());
        assert_eq!(r[3], "0.010000");
        assert_eq!(r[4], "");
    }
}

#[test]
fn three_domain_reference_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ref");
    let o = ztmesh(&["train", "--config", &scenario("dfl_noniid.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("dfl_metrics.csv")).unwrap();
    let last: Vec<&str> = text.lines().filter(|l| l.starts_with("100,")).collect();
    // Frozen from the reference run of the bundled scenario.
    assert_eq!(
        last.iter().map(|l| l.split(',').take(3).collect::<Vec<_>>().join(",")).collect::<Vec<_>>(),
        ["100,d1,0.957884", "100,d2,0.974866", "100,d3,0.954303"]
    );
}

#[test]
fn report_needs_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = ztmesh(&["report", "--in", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no result CSVs"));
}

#[test]
fn report_summarises_and_plots_a_throughput_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "grid.json",
        r#"{
  "dfl": { "data": { "samples_per_domain": 60, "validation_per_domain": 20, "test_samples": 60 } },
  "sim": { "pretrain_rounds": 1 },
  "experiment": { "kind": "throughput_grid", "domains": [2, 3], "devices": [2, 6], "total_requests": 24 }
}"#,
    );
    let out = dir.path().join("grid");
    let o = ztmesh(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = ztmesh(&["report", "--in", out.to_str().unwrap(), "--plots"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    let pass = s.lines().filter(|l| l.starts_with("PASS ")).count();
    assert_eq!(pass, 8, "{s}");
    assert!(!s.contains("FAIL"));
    assert!(s.lines().any(|l| l.starts_with("2 domains: 2:")), "{s}");
    assert!(s.lines().any(|l| l.starts_with("3 domains: 2:")), "{s}");
    let svg = fs::read_to_string(out.join("throughput_vs_devices.svg")).unwrap();
    assert!(svg.contains("domains=2") && svg.contains("domains=3"));
    assert!(out.join("latency_vs_n.svg").exists() && out.join("latency_vs_q.svg").exists());
    // Same inputs, same summary.
    assert_eq!(stdout(&ztmesh(&["report", "--in", out.to_str().unwrap()])), s.lines().filter(|l| !l.starts_with("plot ")).map(|l| format!("{l}\n")).collect::<String>());
}
