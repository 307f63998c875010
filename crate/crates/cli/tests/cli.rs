use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn mpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpp")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    mpp(args).status.code().unwrap()
}

fn scratch(name: &str, text: &str) -> String {
    let dir = std::env::temp_dir().join(format!("mpp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn check_accepts_every_fixture() {
    for f in ["square.mpp", "square_pay3.mpp", "separation.mpp", "separation_open.mpp", "window2.mpp", "window3.mpp"] {
        assert_eq!(code(&["check", &fixture(f)]), 0, "{f}");
    }
}

#[test]
fn parse_errors_exit_3_with_a_position() {
    let f = scratch("bad.mpp", "process P {\n  states s;\n  start s;\n  t: s -> s : (a!);\n}\n");
    let out = mpp(&["check", &f]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.mpp:4:"), "{err}");
}

#[test]
fn unknown_names_are_reported() {
    let f = scratch("dangling.mpp", "process P {\n  states s;\n  start s;\n  t: s -> u : ();\n}\n");
    let out = mpp(&["check", &f]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dangling.mpp:4:"));
    assert_eq!(code(&["lts", &fixture("square.mpp"), "--process", "Nope"]), 4);
    assert_eq!(code(&["cert", &fixture("square.mpp"), "--certificate", "nope"]), 4);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["bisim", &fixture("square.mpp"), "--left", "Square"]), 2);
    assert_eq!(code(&["check", "/nonexistent/model.mpp"]), 2);
    assert_eq!(code(&["--format", "xml", "check", &fixture("square.mpp")]), 2);
}

#[test]
fn bisim_exit_codes_follow_the_verdict() {
    let f = fixture("square.mpp");
    let out = mpp(&["bisim", &f, "--left", "Square", "--right", "Square_Spec"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("In?") && text.contains("has no matching move"), "{text}");
    assert_eq!(code(&["bisim", &f, "--left", "Square", "--right", "Square_Spec'"]), 0);
}

#[test]
fn cert_passes_and_maxlen_zero_fails() {
    let f = fixture("square.mpp");
    assert_eq!(code(&["cert", &f, "--certificate", "sq"]), 0);
    let out = mpp(&["cert", &f, "--certificate", "sq", "--maxlen", "0", "--format", "machine"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("passed=false"));
}

#[test]
fn simplify_prints_a_three_state_model_that_reparses() {
    let out = mpp(&["simplify", &fixture("square.mpp"), "--process", "Square"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("states aA bA bC;"), "{text}");
    let f = scratch("simplified.mpp", &text);
    assert_eq!(code(&["check", &f]), 0);
}

#[test]
fn compose_writes_a_file_that_is_bisimilar_to_the_system() {
    let dir = std::env::temp_dir().join(format!("mpp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("composed.mpp").to_string_lossy().into_owned();
    assert_eq!(code(&["compose", &fixture("square.mpp"), "--system", "Square", "--out", &out, "--quiet"]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.matches("process ").count(), 1);
    assert_eq!(code(&["lts", &out, "--process", "Square"]), 0);
}

#[test]
fn lts_writes_dot_and_counts_vertices() {
    let dir = std::env::temp_dir().join(format!("mpp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let dot = dir.join("buf.dot").to_string_lossy().into_owned();
    let out = mpp(&["lts", &fixture("square.mpp"), "--process", "Buf", "--dot", &dot, "--format", "machine"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("vertices=5"), "{text}");
    assert!(std::fs::read_to_string(&dot).unwrap().starts_with("digraph"));
    let full = mpp(&["lts", &fixture("square.mpp"), "--process", "Buf", "--full-enumeration", "--format", "machine"]);
    assert!(String::from_utf8_lossy(&full.stdout).contains("vertices=5"));
}

#[test]
fn deadlocks_lists_only_mixed_states() {
    let out = mpp(&["deadlocks", &fixture("separation_open.mpp"), "--process", "Separation", "--format", "machine"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let vertices: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix("vertex=")).collect();
    assert!(!vertices.is_empty());
    assert!(vertices.iter().all(|v| v.starts_with("at=Ac ") || v.starts_with("at=Ca ")), "{text}");
}

#[test]
fn wp_prints_the_transform_or_undefined() {
    let f = fixture("square.mpp");
    let out = mpp(&["wp", &f, "--process", "Square3", "--transition", "t2", "--formula", "x == y"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "x == y");
    let out = mpp(&["wp", &f, "--process", "Mul", "--transition", "t1", "--formula", "x == 1", "--format", "machine"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "wp=UNDEFINED");
    assert_eq!(code(&["wp", &f, "--process", "Mul", "--transition", "t1", "--formula", "x =="]), 3);
    assert_eq!(code(&["wp", &f, "--process", "Mul", "--transition", "t9", "--formula", "true"]), 4);
}

#[test]
fn machine_output_is_stable() {
    let args = ["bisim", &fixture("square.mpp"), "--left", "Square", "--right", "Square_Spec", "--format", "machine"];
    let a = mpp(&args).stdout;
    let b = mpp(&args).stdout;
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().all(|l| l.contains('=')), "{text}");
}

#[test]
fn harness_uses_the_seed() {
    let a = mpp(&["--seed", "3", "harness", "--cases", "20", "--format", "machine"]);
    assert_eq!(a.status.code(), Some(0));
    let text = String::from_utf8_lossy(&a.stdout);
    assert!(text.contains("cases=20") && text.contains("seed=3") && text.contains("failures=0"), "{text}");
}
