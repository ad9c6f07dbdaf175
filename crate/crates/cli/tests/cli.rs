//! End-to-end runs of the `dfi` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden").join(name)
}

fn dfi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Scratch directory unique to one test.
fn scratch(test: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dfi-cli-{}-{test}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn preprocess_prints_golden_text() {
    let o = dfi(&["preprocess", path(&golden("store_renaming.dfir"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let expected = std::fs::read_to_string(golden("store_renaming.expected.dfir")).unwrap();
    assert_eq!(stdout(&o), expected);
}

#[test]
fn preprocess_writes_output_file() {
    let dir = scratch("out");
    let out = dir.join("calls.dfir");
    let o = dfi(&["preprocess", path(&golden("call_outputs.dfir")), "-o", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let expected = std::fs::read_to_string(golden("call_outputs.expected.dfir")).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), expected);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn preprocess_rejects_already_renamed_input() {
    let o = dfi(&["preprocess", path(&golden("store_renaming.expected.dfir"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dfi forms present"), "{}", stderr(&o));
}

#[test]
fn missing_input_is_an_io_error() {
    let o = dfi(&["analyze", "/nonexistent/module.dfir", "--client", "roarg"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn syntax_errors_report_position() {
    let dir = scratch("syntax");
    let bad = dir.join("bad.dfir");
    std::fs::write(&bad, "func @f(%a: int) {\n  %b = add %a %a\n  return\n}\n").unwrap();
    let o = dfi(&["analyze", path(&bad), "--client", "roarg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2, column 15"), "{}", stderr(&o));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn taint_requires_sources() {
    let o = dfi(&["analyze", path(&golden("taint_walkthrough.dfir"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn taint_walkthrough() {
    let o = dfi(&[
        "analyze",
        path(&golden("taint_walkthrough.dfir")),
        "--config",
        path(&golden("taint_walkthrough.cfg")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "tainted values: 2\n  @demo:%1\n  @demo:%3\n");
}

#[test]
fn sink_hits_name_their_sources() {
    let dir = scratch("sink");
    let cfg = dir.join("sink.cfg");
    // Operation 4 is `%3 = add %1, %2`, after the literal's `const`.
    std::fs::write(&cfg, "source @demo %p\nsink @demo op#4\nsink @demo op#0\n").unwrap();
    let o = dfi(&["analyze", path(&golden("taint_walkthrough.dfir")), "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("sink @demo op#4 %1 <- @demo:%p"), "{out}");
    assert!(!out.contains("op#0"), "{out}");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn unknown_config_value_is_an_input_error() {
    let dir = scratch("cfg");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "source @demo %nope\n").unwrap();
    let o = dfi(&["analyze", path(&golden("taint_walkthrough.dfir")), "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn roarg_reports_modified_arguments() {
    let dir = scratch("roarg");
    let module = dir.join("h.dfir");
    let src = std::fs::read_to_string(golden("output_arg_summary.dfir")).unwrap()
        + "\nfunc @h(%x: ptr, %y: ptr) {\n  call @g(%x, %y)\n  return\n}\n";
    std::fs::write(&module, src).unwrap();
    let o = dfi(&["analyze", path(&module), "--client", "roarg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "@h call#0 arg#0: modified\n@h call#0 arg#1: modified\n");
    std::fs::remove_dir_all(dir).unwrap();
}

fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/analyze.schema.json");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&doc).expect("schema compiles")
}

#[test]
fn json_reports_match_schema() {
    let v = schema();
    let taint = dfi(&[
        "analyze",
        path(&golden("taint_walkthrough.dfir")),
        "--config",
        path(&golden("taint_walkthrough.cfg")),
        "--json",
        "--stats",
    ]);
    let roarg = dfi(&["analyze", path(&golden("summary_propagation.dfir")), "--client", "roarg", "--json"]);
    for o in [taint, roarg] {
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        let errors: Vec<String> = v.iter_errors(&doc).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{errors:?}\n{doc:#}");
    }
}

#[test]
fn schema_rejects_mismatched_client() {
    let doc = serde_json::json!({"client": "taint", "summaries": [], "roarg": {"verdicts": []}});
    assert!(!schema().is_valid(&doc));
}

#[test]
fn stats_print_counters_and_histogram() {
    let o = dfi(&[
        "analyze",
        path(&golden("taint_walkthrough.dfir")),
        "--config",
        path(&golden("taint_walkthrough.cfg")),
        "--stats",
    ]);
    let out = stdout(&o);
    for key in ["#V-Edge: ", "#V-Vertex: ", "interval-set sizes: n=", "peak memory: "] {
        assert!(out.contains(key), "{key} missing from\n{out}");
    }
    assert!(!out.contains("peak memory: unavailable"), "{out}");
}

#[test]
fn dump_shows_summaries_and_intervals() {
    let o = dfi(&["analyze", path(&golden("return_summary.dfir")), "--client", "roarg", "--dump"]);
    let out = stdout(&o);
    assert!(out.contains("summaries:"), "{out}");
    assert!(out.contains("intervals @f:"), "{out}");
}

#[test]
fn query_answers() {
    let m = golden("reachable_endpoints.dfir");
    let q = |from: &str, to: &str| stdout(&dfi(&["query", path(&m), "--from", from, "--to", to]));
    assert_eq!(q("@f:%x", "@k:%c"), "reachable\n");
    assert_eq!(q("@f:%x", "@k:%a"), "unreachable\n");
    assert_eq!(q("@f:%x", "@f:%x"), "reachable\n");
}

#[test]
fn query_rejects_malformed_endpoint() {
    let m = golden("reachable_endpoints.dfir");
    let o = dfi(&["query", path(&m), "--from", "f:x", "--to", "@k:%c"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_is_deterministic_apart_from_timing() {
    let run = || {
        let o = dfi(&["bench", "--sizes", "2000,4000", "--repeat", "1", "--json"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let mut rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        for r in rows.as_array_mut().unwrap() {
            r["analysis_ms"] = serde_json::Value::Null;
            r["peak_memory_bytes"] = serde_json::Value::Null;
        }
        rows
    };
    let first = run();
    assert_eq!(first.as_array().unwrap().len(), 2);
    assert_eq!(first, run());
}

#[test]
fn thread_count_does_not_change_results() {
    let m = path(&golden("summary_propagation.dfir")).to_string();
    let one = dfi(&["--threads", "1", "analyze", &m, "--client", "roarg"]);
    let four = dfi(&["--threads", "4", "analyze", &m, "--client", "roarg"]);
    assert_eq!(stdout(&one), stdout(&four));
}
