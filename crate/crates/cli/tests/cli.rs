use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn specfix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specfix"))
        .args(args)
        .env_remove("SPECFIX_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus_manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus/manifest.txt")
}

#[test]
fn detect_reports_overflow() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "add.mi", "input i8 a, b; i8 c; c = a + b;");
    let out = specfix(&["detect", s(&p), "--ranges", "a=0..100,b=0..100"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("IO"), "{}", stdout(&out));
}

#[test]
fn detect_clean_program() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "add.mi", "input i8 a, b; i8 c; c = a + b;");
    let out = specfix(&["detect", s(&p), "--ranges", "a=0..50,b=0..50"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("no findings"));
}

#[test]
fn detect_json_lists_findings() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "add.mi", "input i8 a, b; i8 c; c = a + b;");
    let out = specfix(&["--json", "detect", s(&p), "--ranges", "a=0..100,b=0..100"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["findings"].as_array().unwrap().len(), 1);
}

#[test]
fn missing_file_is_usage_error() {
    let out = specfix(&["detect", "/nonexistent/prog.mi"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn parse_error_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.mi", "input i8 a; a = ;");
    assert_eq!(code(&specfix(&["detect", s(&p)])), 2);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(code(&specfix(&["frobnicate"])), 2);
}

#[test]
fn bad_flag_value_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "add.mi", "input i8 a, b; i8 c; c = a + b;");
    assert_eq!(code(&specfix(&["--semantics", "fuzzy", "detect", s(&p)])), 2);
}

#[test]
fn repair_overflow_writes_fixed_program() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "sum.mi", "input i8 a, b, c; i8 e; e = a + b - c;");
    let out = specfix(&["repair", s(&p), "--ranges", "a=100..110,b=100..110,c=100..110"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let fixed = std::fs::read_to_string(dir.path().join("sum.fixed.mi")).unwrap();
    assert!(fixed.contains("e = a - c + b;"), "{fixed}");
    assert!(stdout(&out).contains("+++"));
}

#[test]
fn repair_overflow_without_findings() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "add.mi", "input i8 a, b; i8 c; c = a + b;");
    let out = specfix(&["repair", s(&p), "--kind", "overflow", "--ranges", "a=0..10,b=0..10"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn repair_overflow_at_widest_width_fails() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "wide.mi", "input i64 a, b; i64 c; c = a + b;");
    let r = "a=4611686018427387904..9223372036854775807,b=4611686018427387904..9223372036854775807";
    let out = specfix(&["repair", s(&p), "--ranges", r]);
    assert_eq!(code(&out), 4);
    assert!(!dir.path().join("wide.fixed.mi").exists());
}

#[test]
fn repair_nonterminating_loop() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "loop.mi", "input i8 x; while (x < 10) { x = x - 1; }");
    let t = write(&dir, "loop.tests", "in: x=0 ; out: x=10\nin: x=3 ; out: x=10\n");
    let out = specfix(&["repair", s(&p), "--tests", s(&t)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let fixed = std::fs::read_to_string(dir.path().join("loop.fixed.mi")).unwrap();
    assert!(fixed.contains("x = x + 1;"), "{fixed}");
    assert!(stdout(&out).starts_with("valid patch"));
}

#[test]
fn repair_non_monotonic_loop_gives_up() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "flip.mi", "input i8 x; while (x < 10) { x = 3 - x; }");
    let t = write(&dir, "flip.tests", "in: x=20 ; out: x=20\n");
    let out = specfix(&["repair", s(&p), "--tests", s(&t)]);
    assert_eq!(code(&out), 4);
    assert!(stdout(&out).contains("fallback-unsupported"));
}

#[test]
fn prove_terminating_loop() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "down.mi", "input i8 x; while (x > 0) { x = x - 1; }");
    let out = specfix(&["prove", s(&p)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("verdict=TR loop=1"));
}

#[test]
fn prove_nonterminating_loop() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "up.mi", "input i8 x; while (x < 10) { x = x - 1; }");
    let out = specfix(&["prove", s(&p)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("verdict=NT"));
}

#[test]
fn prove_unknown_loop() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "hard.mi", "input i32 x, y; while (x * x < y) { x = x + y / 3; }");
    let out = specfix(&["prove", s(&p)]);
    assert_eq!(code(&out), 5, "{}", stdout(&out));
}

#[test]
fn prove_without_loops() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "flat.mi", "input i8 x; x = 1;");
    assert_eq!(code(&specfix(&["prove", s(&p)])), 2);
}

#[test]
fn prove_rejects_non_loop_id() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "down.mi", "input i8 x; while (x > 0) { x = x - 1; }");
    assert_eq!(code(&specfix(&["prove", s(&p), "--loop", "2"])), 2);
}

#[test]
fn check_equiv_exit_codes() {
    let same = specfix(&["check-equiv", "a + b - c", "a - c + b"]);
    assert_eq!(code(&same), 0);
    assert_eq!(stdout(&same), "equivalent\n");
    let diff = specfix(&["check-equiv", "a * b", "a + b", "--grid", "3"]);
    assert_eq!(code(&diff), 1);
    assert!(stdout(&diff).contains("inequivalent witness="));
    assert!(stdout(&diff).contains("disagree"));
}

#[test]
fn corpus_passes() {
    let out = specfix(&["corpus", s(&corpus_manifest())]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("mismatch=0"));
}

#[test]
fn corpus_reports_mismatch() {
    let dir = TempDir::new().unwrap();
    write(&dir, "add.mi", "input i8 a, b; i8 c; c = a + b;");
    let m = write(&dir, "manifest.txt", "add.mi ; clean ; ranges=a=0..100,b=0..100\n");
    let out = specfix(&["corpus", s(&m)]);
    assert_eq!(code(&out), 1);
    let line = stdout(&out).lines().nth(1).unwrap().to_string();
    assert!(line.starts_with("MISMATCH") && line.contains("add.mi"), "{line}");
}

#[test]
fn corpus_empty_manifest() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "manifest.txt", "# nothing yet\n");
    let out = specfix(&["corpus", s(&m)]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest has no entries"));
}

#[test]
fn corpus_bad_manifest() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "manifest.txt", "add.mi ; weird-kind\n");
    assert_eq!(code(&specfix(&["corpus", s(&m)])), 2);
}

#[test]
fn corpus_report_is_deterministic_apart_from_header() {
    let dir = TempDir::new().unwrap();
    let r1 = dir.path().join("r1.json");
    let r2 = dir.path().join("r2.json");
    let m = corpus_manifest();
    for (r, jobs) in [(&r1, "1"), (&r2, "4")] {
        let out = specfix(&["--jobs", jobs, "--report", s(r), "corpus", s(&m)]);
        assert_eq!(code(&out), 0);
    }
    let body = |p: &Path| {
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v["body"]["config"]["jobs"] = serde_json::Value::Null;
        v["body"].take()
    };
    assert_eq!(body(&r1), body(&r2));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "add.mi", "input i8 a, b; i8 c; c = a + b;");
    let cfg = write(&dir, "specfix.conf", "# settings\nmode=interval\n");
    let out = specfix(&["--config", s(&cfg), "detect", s(&p), "--ranges", "a=0..10,b=0..10"]);
    assert!(stdout(&out).contains("mode=interval"), "{}", stdout(&out));
    let out = specfix(&["--config", s(&cfg), "--mode", "exhaustive", "detect", s(&p), "--ranges", "a=0..10,b=0..10"]);
    assert!(stdout(&out).contains("mode=exhaustive"), "{}", stdout(&out));
}
