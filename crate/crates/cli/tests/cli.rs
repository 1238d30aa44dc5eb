use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn caseflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caseflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn validate_shipped_config() {
    let cfg = default_config();
    let o = caseflow(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("feedback_latency = 15 s"), "{text}");
    assert!(text.contains("validation_latency = 1440 s"), "{text}");
    // the shipped file spells out the built-in defaults
    let builtin = stdout(&caseflow(&["validate"]));
    let digest = |t: &str| {
        t.lines()
            .find(|l| l.starts_with("digest = "))
            .unwrap()
            .to_owned()
    };
    assert_eq!(digest(&text), digest(&builtin));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "horizon = \"-5 d\"\n");
    let o = caseflow(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("horizon"), "{}", stderr(&o));
    assert_eq!(stderr(&o).trim().lines().count(), 1);

    let cfg = write_config(dir.path(), "validation_latency = 1440\n");
    let o = caseflow(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("validation_latency"));

    let o = caseflow(&["validate", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(caseflow(&["run", "--seed", "abc"]).status.code(), Some(2));
    assert_eq!(caseflow(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(caseflow(&[]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = caseflow(&[
        "sweep",
        "--param",
        "moon_phase",
        "--values",
        "1,2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join("sweep.csv").exists());
}

#[test]
fn run_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "horizon = \"30 d\"\n");
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = caseflow(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "17",
            "--trace",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push(out);
    }
    for file in ["samples.csv", "trace.tsv", "report.txt", "audit.jsonl"] {
        let a = fs::read(outputs[0].join(file)).unwrap();
        let b = fs::read(outputs[1].join(file)).unwrap();
        assert!(!a.is_empty(), "{file} empty");
        assert_eq!(a, b, "{file} differs");
    }
    let samples = fs::read_to_string(outputs[0].join("samples.csv")).unwrap();
    assert!(samples.starts_with("case_id,kind,duration_s\n"));
    let report = fs::read_to_string(outputs[0].join("report.txt")).unwrap();
    assert!(report.contains("config_digest = "));
    assert!(report.contains("seed = 17"));
    let trace = fs::read_to_string(outputs[0].join("trace.tsv")).unwrap();
    assert_eq!(trace.lines().next().unwrap().split('\t').count(), 5);
    // nothing but the outputs is left in the directory
    let mut names: Vec<String> = fs::read_dir(&outputs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["audit.jsonl", "report.txt", "samples.csv", "trace.tsv"]
    );
}

#[test]
fn zero_arrival_rate_runs_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[arrival]\nprocess = \"poisson\"\nrate = \"0 /d\"\n",
    );
    let out = dir.path().join("out");
    let o = caseflow(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let samples = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(samples, "case_id,kind,duration_s\n");
    assert!(!out.join("trace.tsv").exists());
}

#[test]
fn compare_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "horizon = \"20 d\"\n");
    for (runs, columns) in [("1", 7), ("3", 9)] {
        let out = dir.path().join(format!("cmp{runs}"));
        let o = caseflow(&[
            "compare",
            "--config",
            cfg.to_str().unwrap(),
            "--runs",
            runs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(
            lines.iter().all(|l| l.split(',').count() == columns),
            "{table}"
        );
        let info: Vec<&str> = lines
            .iter()
            .find(|l| l.starts_with("InfoAvailabilityDelay"))
            .unwrap()
            .split(',')
            .collect();
        assert_eq!(info[1], "15.0");
    }
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "horizon = \"20 d\"\n");
    let out = dir.path().join("sweep");
    let o = caseflow(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--param",
        "capacity:oncologist",
        "--values",
        "1,2,4",
        "--runs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("capacity:oncologist,ClinicalEvaluationDelay_mean_s"));
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1.0,"));

    let bad = caseflow(&[
        "sweep",
        "--param",
        "capacity:oncologist",
        "--values",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}
