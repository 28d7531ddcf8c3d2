use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bubbleloja"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bubbleloja-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn exponents_prints_the_l2_table() {
    let o = run(&["exponents", "--preset", "h-energy-l2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("alpha = (1, 1, 2)  beta = (1/2, 0, 1)"));
}

#[test]
fn greencheck_prints_the_principal_term() {
    let o = run(&["greencheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("script_J = -6.28318530717"), "{out}");
    assert!(out.contains("PASS green.bergman_mixed"));
}

#[test]
fn probe_output_is_reproducible() {
    let args = |csv: &PathBuf| {
        vec![
            "probe".to_string(),
            "--lambda".into(),
            "32".into(),
            "--eps".into(),
            "1e-2".into(),
            "--seed".into(),
            "7".into(),
            "--n".into(),
            "512".into(),
            "--set".into(),
            "probes=6".into(),
            "--csv".into(),
            csv.display().to_string(),
        ]
    };
    let (a, b) = (scratch("probe_a.csv"), scratch("probe_b.csv"));
    let oa = bin().args(args(&a)).output().unwrap();
    let ob = bin().args(args(&b)).output().unwrap();
    assert_eq!(oa.status.code(), ob.status.code());
    let (ca, cb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!ca.is_empty());
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("lambda,N,r,seed,"), "{header}");
    assert!(text.contains("\r\n"));
}

#[test]
fn json_summary_has_the_documented_fields() {
    let json = scratch("green.json");
    let o = run(&["greencheck", "--json", json.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    for key in [
        "config_echo",
        "results",
        "seed",
        "version",
        "git_describe",
        "wall_time_s",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let first = &v["results"][0];
    for key in ["check", "value", "bound", "pass"] {
        assert!(first.get(key).is_some(), "missing results.{key}");
    }
}

#[test]
fn unknown_subcommand_exits_two() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_two_with_the_line() {
    let cfg = scratch("bad.cfg");
    std::fs::write(&cfg, "# scales\nseed = 3\nn = many\n").unwrap();
    let o = run(&["greencheck", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn guard_violations_exit_two() {
    let o = run(&["expansion", "--n", "256", "--lambda", "64"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_checks_exit_one() {
    let o = run(&["greencheck", "--set", "tol.green=0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL green.script_j"));
}
