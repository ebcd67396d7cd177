//! Drives the binary over every shipped scenario and checks its exact
//! output against the frozen `.expected` files, plus the other subcommands
//! and their failure modes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aspectke"))
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn walk(dir: &Path, ext: &str, out: &mut Vec<PathBuf>) {
    for entry in fs::read_dir(dir).expect("fixture directory").flatten() {
        let path = entry.path();
        if path.is_dir() {
            walk(&path, ext, out);
        } else if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            out.push(path);
        }
    }
}

fn collect(ext: &str) -> Vec<PathBuf> {
    let mut out = Vec::new();
    walk(&fixtures_dir(), ext, &mut out);
    out.sort();
    assert!(!out.is_empty(), "no .{ext} fixtures found");
    out
}

/// Aspect file convention: a sibling `<stem>.apl` overrides the section's
/// shared `policy.apl`; with neither, the system runs unadvised.
fn aspect_file_for(system: &Path) -> Option<PathBuf> {
    let sibling = system.with_extension("apl");
    if sibling.is_file() {
        return Some(sibling);
    }
    let shared = system.parent().expect("fixture has a parent").join("policy.apl");
    shared.is_file().then_some(shared)
}

fn stdout_of(output: &Output) -> &str {
    std::str::from_utf8(&output.stdout).expect("stdout is utf-8")
}

fn stderr_of(output: &Output) -> &str {
    std::str::from_utf8(&output.stderr).expect("stderr is utf-8")
}

#[test]
fn every_scenario_replays_its_frozen_output() {
    for system in collect("akl") {
        let expected_path = system.with_extension("expected");
        let expected = fs::read(&expected_path).unwrap_or_else(|e| {
            panic!("{}: missing frozen output: {e}", expected_path.display())
        });
        let mut cmd = bin();
        cmd.arg("run").arg(&system);
        if let Some(apl) = aspect_file_for(&system) {
            cmd.arg("--aspects").arg(apl);
        }
        let output = cmd.arg("--dump-final").output().expect("binary runs");
        assert!(
            output.status.success(),
            "{}: exited {:?}\n{}",
            system.display(),
            output.status.code(),
            stderr_of(&output)
        );
        assert!(
            output.stdout == expected,
            "{}: output drifted from the frozen run\n--- got ---\n{}",
            system.display(),
            stdout_of(&output)
        );
    }
}

#[test]
fn every_aspect_file_checks_clean() {
    for apl in collect("apl") {
        let output = bin().arg("check").arg(&apl).output().expect("binary runs");
        assert!(
            output.status.success(),
            "{}: check failed\n{}",
            apl.display(),
            stderr_of(&output)
        );
        let text = stdout_of(&output);
        assert!(
            text.starts_with("ok: "),
            "{}: unexpected check output: {text}",
            apl.display()
        );
    }
}

#[test]
fn analyses_print_their_frozen_sets() {
    let cases: [(&str, &str, Option<&str>, &str); 5] = [
        ("analysis/a2_continuation.akp", "Act", None, "{out}\n"),
        ("analysis/program2_continuation.akp", "FV", None, "{subject}\n"),
        ("analysis/two_site_query.akp", "LCc", Some("read"), "{EHDB, EHDB2, MedicalRecord}\n"),
        ("analysis/two_site_query.akp", "LCc", Some("out"), "{Publication}\n"),
        ("analysis/nil.akp", "Act", None, "{}\n"),
    ];
    for (file, function, capability, expected) in cases {
        let mut cmd = bin();
        cmd.arg("analyze").arg(fixtures_dir().join(file)).arg(function);
        if let Some(cap) = capability {
            cmd.arg(cap);
        }
        let output = cmd.output().expect("binary runs");
        assert!(output.status.success(), "{file} {function}: {}", stderr_of(&output));
        assert_eq!(stdout_of(&output), expected, "{file} {function} {capability:?}");
    }
}

#[test]
fn one_seed_always_replays_one_run() {
    let system = fixtures_dir().join("races/record_grab.akl");
    for seed in ["0", "1", "7", "20"] {
        let run_once = || {
            bin()
                .arg("run")
                .arg(&system)
                .arg("--seed")
                .arg(seed)
                .arg("--dump-final")
                .output()
                .expect("binary runs")
        };
        let first = run_once();
        let second = run_once();
        assert!(first.status.success());
        assert_eq!(
            first.stdout, second.stdout,
            "seed {seed} produced two different runs"
        );
    }
}

#[test]
fn seeds_pick_different_race_winners() {
    let system = fixtures_dir().join("races/record_grab.akl");
    let winner = |seed: &str| {
        let output =
            bin().arg("run").arg(&system).arg("--seed").arg(seed).output().expect("binary runs");
        assert!(output.status.success());
        stdout_of(&output).split_whitespace().nth(1).expect("trace line").to_string()
    };
    assert_eq!(winner("0"), "NsOlsen");
    assert_eq!(winner("1"), "DrSmith");
}

#[test]
fn exhausted_budget_exits_two() {
    let output = bin()
        .arg("run")
        .arg(fixtures_dir().join("running_example.akl"))
        .arg("--max-steps")
        .arg("1")
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    let text = stdout_of(&output);
    assert!(text.contains("step budget exhausted after 1 step"), "got: {text}");
}

#[test]
fn trace_flag_redirects_the_trace() {
    let dir = std::env::temp_dir().join(format!("aspectke-trace-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("temp dir");
    let trace_path = dir.join("run.trace");
    let output = bin()
        .arg("run")
        .arg(fixtures_dir().join("running_example.akl"))
        .arg("--trace")
        .arg(&trace_path)
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    assert_eq!(stdout_of(&output), "quiescent after 3 steps\n");
    let trace = fs::read_to_string(&trace_path).expect("trace file written");
    assert_eq!(trace.lines().count(), 3);
    assert!(trace.starts_with("#1 DrSmith :: read("));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_input_exits_one() {
    let output = bin()
        .arg("run")
        .arg(fixtures_dir().join("no_such_system.akl"))
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).starts_with("error: "));
}

#[test]
fn unknown_analysis_is_rejected() {
    let output = bin()
        .arg("analyze")
        .arg(fixtures_dir().join("analysis/nil.akp"))
        .arg("Bogus")
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).contains("unknown analysis"));
}

#[test]
fn filtered_analyses_require_a_capability() {
    let output = bin()
        .arg("analyze")
        .arg(fixtures_dir().join("analysis/two_site_query.akp"))
        .arg("LCc")
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).contains("needs a capability argument"));
}
