mod common;

use std::os::unix::fs::PermissionsExt;
use std::path::Path;
use std::process::{Command, Output};

use common::corpus_dir;
use serde_json::Value as Json;

fn scver(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scver"))
        .args(args)
        .current_dir(corpus_dir())
        .env_remove("SCVER_SPIN")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Json {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn flawed_mutex_exits_one_with_a_trace() {
    let o = scver(&["check", "mutex_flawed.scl", "--prop", "mutex"]);
    assert_eq!(code(&o), 1);
    let j = stdout_json(&o);
    assert_eq!(j["status"], "InvariantViolation");
    assert_eq!(j["config"]["max_time"], 100);
    assert!(!j["trace"]["steps"].as_array().unwrap().is_empty());
}

#[test]
fn fixed_mutex_exits_zero() {
    let o = scver(&["check", "mutex_fixed.scl", "--prop", "mutex"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["status"], "Pass");
}

#[test]
fn output_is_deterministic() {
    let a = scver(&["check", "ecu_system.scl", "--prop", "exclusive"]);
    let b = scver(&["check", "ecu_system.scl", "--prop", "exclusive"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn state_cap_exits_two() {
    let o = scver(&["check", "mutex_fixed.scl", "--prop", "mutex", "--state-cap", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("state cap"));
}

#[test]
fn unknown_property_and_syntax_errors_exit_three() {
    assert_eq!(code(&scver(&["check", "mutex_fixed.scl", "--prop", "nope"])), 3);
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.scl");
    std::fs::write(&bad, "module M { process P { x := ; } }").unwrap();
    let o = scver(&["check", p(&bad)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("bad.scl:"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_prints_usage_and_exits_three() {
    let o = scver(&["check", "mutex_fixed.scl", "--frobnicate"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn unreadable_model_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let f = tmp.path().join("locked.scl");
    std::fs::write(&f, "").unwrap();
    std::fs::set_permissions(&f, std::fs::Permissions::from_mode(0o000)).unwrap();
    // root ignores permission bits, so fall back to a directory in that case
    let target = if std::fs::read_to_string(&f).is_ok() { tmp.path().to_path_buf() } else { f };
    assert_eq!(code(&scver(&["check", p(&target)])), 4);
}

#[test]
fn missing_spin_exits_four() {
    let o = scver(&["crosscheck", "mutex_flawed.scl", "--prop", "mutex"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("SCVER_SPIN"));
    let o = scver(&["crosscheck", "mutex_flawed.scl", "--prop", "mutex", "--spin", "/no/such/spin"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn crosscheck_with_agreeing_spin_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let spin = tmp.path().join("spin");
    std::fs::write(&spin, "#!/bin/sh\necho 'State-vector 40 byte, depth reached 3, errors: 1'\n").unwrap();
    std::fs::set_permissions(&spin, std::fs::Permissions::from_mode(0o755)).unwrap();
    let scratch = tmp.path().join("run");
    let o = scver(&["crosscheck", "mutex_flawed.scl", "--prop", "mutex", "--spin", p(&spin), "--scratch", p(&scratch)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["agree"], true);
    let o = scver(&["crosscheck", "mutex_fixed.scl", "--prop", "mutex", "--spin", p(&spin), "--scratch", p(&scratch)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn emit_promela_matches_the_golden_file() {
    let o = scver(&["emit-promela", "writer_reader.scl"]);
    assert_eq!(code(&o), 0);
    let golden = std::fs::read(corpus_dir().join("golden/writer_reader.pml")).unwrap();
    assert_eq!(o.stdout, golden);
}

#[test]
fn stub_consistency_and_compose_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let stub = tmp.path().join("sw.stub.json");
    let o = scver(&["stub", "ecu_system.scl", "--instance", "sw", "-o", p(&stub)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = scver(&["consistency", "ecu_system.scl", "--instance", "sw", "--stub", p(&stub)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["status"], "pass");

    let o = scver(&["compose", "ecu_system.scl", "--stub", p(&stub), "--prop", "sw_granted"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let j = stdout_json(&o);
    assert_eq!(j["verdict"]["status"], "LtlViolation");
    assert_eq!(j["replay"]["outcome"], "confirmed");
}

#[test]
fn corrupted_stub_fails_consistency() {
    let stub = corpus_dir().join("fixtures/counter_v1.c.deleted.stub.json");
    let o = scver(&["consistency", "counter_v1.scl", "--instance", "c", "--stub", p(&stub)]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["status"], "fail");
}

#[test]
fn relaxed_stub_gives_a_spurious_replay() {
    let stub = corpus_dir().join("fixtures/relaxed_system.src.relaxed.stub.json");
    let o = scver(&["compose", "relaxed_system.scl", "--stub", p(&stub), "--prop", "no_alarm", "--no-deadlock"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout_json(&o)["replay"]["outcome"], "spurious");
}

#[test]
fn testgen_then_concretize_reproduces_the_golden_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let tests = tmp.path().join("tests.json");
    let o = scver(&["testgen", "mutex_flawed.scl", "-o", p(&tests)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (stim, exp) = (tmp.path().join("s.csv"), tmp.path().join("e.csv"));
    let o = scver(&[
        "concretize",
        p(&tests),
        "--map",
        "maps/mutex_flawed.map.json",
        "--stimulus",
        p(&stim),
        "--expect",
        p(&exp),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let g = corpus_dir().join("golden");
    assert_eq!(std::fs::read(&stim).unwrap(), std::fs::read(g.join("mutex_flawed.stimulus.csv")).unwrap());
    assert_eq!(std::fs::read(&exp).unwrap(), std::fs::read(g.join("mutex_flawed.expect.csv")).unwrap());
}

#[test]
fn incomplete_map_exits_three_and_names_the_gaps() {
    let tmp = tempfile::tempdir().unwrap();
    let tests = tmp.path().join("tests.json");
    assert_eq!(code(&scver(&["testgen", "mutex_flawed.scl", "-o", p(&tests)])), 0);
    let mut map: Json = serde_json::from_str(&common::corpus_text("maps/mutex_flawed.map.json")).unwrap();
    map["channels"].as_object_mut().unwrap().remove("b.flag");
    let mp = tmp.path().join("map.json");
    std::fs::write(&mp, map.to_string()).unwrap();
    let o = scver(&["concretize", p(&tests), "--map", p(&mp)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("b.flag"), "{}", stderr(&o));
}

#[test]
fn simulate_prints_observations() {
    let o = scver(&["simulate", "counter_v1.scl", "--max-time", "3"]);
    let j = stdout_json(&o);
    assert_eq!(j["config"]["env"], "closed_default");
    let obs = j["observations"].as_array().unwrap();
    assert!(obs.iter().any(|o| o["values"]["c.value"] == 2), "{obs:?}");
    assert!([0, 2].contains(&code(&o)));
}
