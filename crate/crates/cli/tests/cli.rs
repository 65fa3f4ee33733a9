use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vasp-attest"))
}

fn core(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn no_panic(o: &Output) {
    let err = stderr(o);
    assert!(!err.contains("panicked"), "{err}");
    assert!(!err.contains("RUST_BACKTRACE"), "{err}");
}

#[test]
fn run_twice_gives_identical_trace_bytes() {
    let scenario = core("scenarios/onboarding.scn");
    let mut traces = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&[
            "run",
            "--scenario",
            scenario.to_str().unwrap(),
            "--seed",
            "7",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let mut names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, ["audit.json", "reconciliation.json", "trace.hex"]);
        traces.push(fs::read(dir.path().join("trace.hex")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
    assert!(!traces[0].is_empty());
}

#[test]
fn human_format_writes_readable_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--scenario",
        core("scenarios/recovery.scn").to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "human",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = fs::read_to_string(dir.path().join("trace.txt")).unwrap();
    assert!(text.lines().any(|l| l.contains("RecoveryReport")));
}

#[test]
fn failed_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(core("scenarios/onboarding.scn")).unwrap() + "expect denied 99\n";
    let path = dir.path().join("wrong.scn");
    fs::write(&path, src).unwrap();
    let o = run(&["run", "--scenario", path.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("expected denied = 99, got 0"));
}

#[test]
fn malformed_scenario_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scn");
    fs::write(&path, "scenario bad\nverifier v\nvasp p verifier=nobody\n").unwrap();
    let o = run(&["run", "--scenario", path.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3, column"), "{}", stderr(&o));
    no_panic(&o);

    fs::write(&path, [0xff, 0xfe, 0x00]).unwrap();
    let o = run(&["run", "--scenario", path.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    no_panic(&o);
}

#[test]
fn seed_is_required() {
    let o = run(&["run", "--scenario", core("scenarios/onboarding.scn").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));
}

#[test]
fn matrix_runs_every_scenario_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--scenario",
        core("scenarios/onboarding.scn").to_str().unwrap(),
        "--scenario",
        core("scenarios/direct-preauth.scn").to_str().unwrap(),
        "--seed",
        "1",
        "--seed",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 4);
    let solo = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--scenario",
        core("scenarios/direct-preauth.scn").to_str().unwrap(),
        "--seed",
        "2",
        "--out",
        solo.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        fs::read(dir.path().join("direct-preauth-2.trace.hex")).unwrap(),
        fs::read(solo.path().join("trace.hex")).unwrap()
    );
}

#[test]
fn policy_dir_overrides_builtin_overlays() {
    let dir = tempfile::tempdir().unwrap();
    let strict = "policy strict\nrule never mandatory: key_type.migratable == true\n";
    fs::write(dir.path().join("overlay-strict.apl"), strict).unwrap();
    let o = run(&[
        "run",
        "--scenario",
        core("scenarios/lossy-links.scn").to_str().unwrap(),
        "--seed",
        "1",
        "--policy-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("lossy-links seed 1: FAIL"));
    assert!(stdout(&o).contains("expected travel_verified = 3, got 0"));
}

#[test]
fn baseline_policy_has_no_diagnostics() {
    let o = run(&["check-policy", core("policies/baseline.apl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains(": ok"));
}

#[test]
fn broken_policy_names_line_of_second_definition() {
    let path = core("policies/corpus/broken.apl");
    let text = fs::read_to_string(&path).unwrap();
    let second = text
        .lines()
        .enumerate()
        .filter(|(_, l)| l.split_whitespace().take(2).eq(["rule", "r1"]))
        .nth(1)
        .map(|(i, _)| i + 1)
        .unwrap();
    let o = run(&["check-policy", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains(&format!("broken.apl:{second}:")), "{out}");
    assert!(out.contains("r1"));
}

#[test]
fn every_corpus_failure_has_a_position() {
    for name in ["bad-field.apl", "bad-literal.apl", "bad-syntax.apl"] {
        let o = run(&["check-policy", core(&format!("policies/corpus/{name}")).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        let out = stdout(&o);
        let pos: Vec<&str> = out.split(':').skip(1).take(2).collect();
        assert!(pos.iter().all(|p| p.trim().parse::<usize>().is_ok()), "{out}");
        no_panic(&o);
    }
    let o = run(&["check-policy", "/definitely/not/here.apl"]);
    assert_eq!(o.status.code(), Some(2));
    no_panic(&o);
}

#[test]
fn vectors_match_checked_in_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["vectors", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let shipped = core("vectors");
    let mut count = 0;
    for entry in fs::read_dir(dir.path()).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name();
        let want = fs::read(shipped.join(&name)).unwrap();
        assert_eq!(fs::read(entry.path()).unwrap(), want, "{name:?}");
        count += 1;
    }
    assert_eq!(count, fs::read_dir(&shipped).unwrap().count());
}

#[test]
fn report_summarizes_reconciliation_and_audit() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--scenario",
        core("scenarios/offboarding.scn").to_str().unwrap(),
        "--seed",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["report", dir.path().join("trace.hex").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("scenario offboarding seed 4: PASS"), "{out}");
    assert!(out.contains("vasp-1: unrecorded 0, lost 0, divergences 0"), "{out}");
    assert!(out.contains("level 4:"), "{out}");
    assert_eq!(out.matches("signature ok").count(), 2, "{out}");
    let audit = fs::read_to_string(dir.path().join("audit.json")).unwrap();
    assert_eq!(audit.matches("\"receipts_valid\": true").count(), 2);
}

#[test]
fn report_rejects_garbage_without_panicking() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("hex", "zz\n".as_bytes()),
        ("short", b"51\n"),
        ("binary", &[0x35, 0x31, 0x0a, 0x9f, 0x92]),
    ] {
        let path = dir.path().join(name);
        fs::write(&path, body).unwrap();
        let o = run(&["report", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(stderr(&o).starts_with("error: "), "{name}: {}", stderr(&o));
        no_panic(&o);
    }
}
