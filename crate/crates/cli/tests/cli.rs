use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FAST: &str = r#"
[acquisition]
mc_samples = 128
restarts = 1
raw_candidates = 32
max_iter = 5

[surrogate]
restarts = 1
max_iter = 20
"#;

fn sizing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sizing"))
        .args(args)
        .env_remove("SIZING_TEST_MISSING_KEY")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("{body}\n{FAST}")).unwrap();
    path
}

fn mock(dir: &Path) -> PathBuf {
    let path = dir.join("mock.txt");
    fs::write(&path, "@generate\n").unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ado.toml",
        "[run]\nmethod = \"ado_llm\"\nn_iter = 2\nseed = 4\n\n[evaluator]\npreset = \"amp2\"\n",
    );
    let log = dir.path().join("ado.jsonl");
    let out = sizing(&["run", "--config", s(&cfg), "--mock-llm", s(&mock(dir.path())), "--out", s(&log)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("15 evaluations"));

    let text = fs::read_to_string(&log).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["type"], "header");
    assert_eq!(first["expected_records"], 15);
    assert_eq!(text.lines().filter(|l| l.contains("\"type\":\"record\"")).count(), 15);
    assert!(text.lines().last().unwrap().contains("\"type\":\"summary\""));

    let curves = dir.path().join("curves.csv");
    let out = sizing(&["report", s(&log), "--curves", s(&curves)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("| ado_llm | 5+5×2 |"), "{table}");
    assert!(table.contains("# Missed Spec."));
    assert_eq!(fs::read_to_string(&curves).unwrap().lines().count(), 16);
}

#[test]
fn seed_flag_overrides_and_reruns_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "gp.toml",
        "[run]\nmethod = \"gp_bo\"\nn_iter = 2\n\n[evaluator]\npreset = \"branin\"\n",
    );
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let c = dir.path().join("c.jsonl");
    for (path, seed) in [(&a, "9"), (&b, "9"), (&c, "10")] {
        let out = sizing(&["run", "--config", s(&cfg), "--seed", seed, "--out", s(path)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (a, b, c) = (fs::read(a).unwrap(), fs::read(b).unwrap(), fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "[run]\nmethod = \"gp_bo\"\nbatch = 3\n\n[evaluator]\npreset = \"amp2\"\n",
    );
    let out = sizing(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("x.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("batch"));

    let missing = sizing(&["run", "--config", s(&dir.path().join("nope.toml"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn missing_api_key_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "llm.toml",
        "[run]\nmethod = \"llm_only\"\nn_iter = 1\n\n[evaluator]\npreset = \"branin\"\n\n[llm]\nendpoint = \"https://llm.invalid/v1/chat/completions\"\napi_key_env = \"SIZING_TEST_MISSING_KEY\"\n",
    );
    let out = sizing(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("x.jsonl"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SIZING_TEST_MISSING_KEY"));
}

#[test]
fn tampered_log_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "gp.toml",
        "[run]\nmethod = \"gp_bo\"\nn_iter = 1\n\n[evaluator]\npreset = \"comparator\"\n",
    );
    let log = dir.path().join("gp.jsonl");
    assert!(sizing(&["run", "--config", s(&cfg), "--out", s(&log)]).status.success());
    let text = fs::read_to_string(&log).unwrap().replacen("\"type\":\"record\"", "\"type\":\"recrod\"", 1);
    fs::write(&log, text).unwrap();
    let out = sizing(&["report", s(&log)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn ablations_write_one_log_per_arm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "base.toml",
        "[run]\nmethod = \"ado_llm\"\nn_iter = 1\nseed = 2\n\n[evaluator]\npreset = \"hartmann6\"\n",
    );
    let script = mock(dir.path());

    let init_dir = dir.path().join("init");
    let out = sizing(&["ablate-init", "--config", s(&cfg), "--mock-llm", s(&script), "--out", s(&init_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["gp_bo-uniform_random.jsonl", "gp_bo-llm_zero_shot.jsonl", "report.md"] {
        assert!(init_dir.join(f).exists(), "{f}");
    }
    let report = fs::read_to_string(init_dir.join("report.md")).unwrap();
    assert!(report.contains("| gp_bo (init: llm_zero_shot) |"), "{report}");

    let icl_dir = dir.path().join("icl");
    let out = sizing(&["ablate-icl", "--config", s(&cfg), "--mock-llm", s(&script), "--out", s(&icl_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for kind in ["none", "uniform", "top_k"] {
        assert!(icl_dir.join(format!("llm_only-{kind}.jsonl")).exists(), "{kind}");
    }
    let report = fs::read_to_string(icl_dir.join("report.md")).unwrap();
    assert_eq!(report.matches("| llm_only").count(), 3, "{report}");
}
