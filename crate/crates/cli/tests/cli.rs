//! End-to-end tests of the `codata` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn example(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "examples", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn codata(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codata")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_prints_normal_form() {
    let o = codata(&["run", &example("bool.pol"), "notnot_t"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "T");
}

#[test]
fn run_stream_projection() {
    let o = codata(&["run", &example("streams.pol"), "two"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "S(S(Z))");
}

#[test]
fn run_unknown_name_fails() {
    let o = codata(&["run", &example("bool.pol"), "no_such_let"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("name.unknown"));
}

#[test]
fn check_corpus_succeeds_quietly() {
    for f in ["bool.pol", "set_codata.pol", "vec.pol", "fun_pi.pol"] {
        let o = codata(&["check", &example(f)]);
        assert!(o.status.success(), "{f}: {}", stderr(&o));
        assert!(stdout(&o).is_empty());
    }
    let o = codata(&["--no-prelude", "check", &example("nat_fu_stump.pol")]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn check_negative_reports_code_and_position() {
    let path = example("neg/distinct_ctors.pol");
    let o = codata(&["check", &path]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with(&format!("{path}:")), "{err}");
    assert!(err.contains("error[conv.distinct-ctors]"), "{err}");
}

#[test]
fn json_diagnostics_are_one_object_per_line() {
    let o = codata(&["--json", "check", &example("neg/occurs.pol")]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    let lines: Vec<&str> = err.lines().collect();
    assert!(!lines.is_empty());
    for l in lines {
        let v: serde_json::Value = serde_json::from_str(l).expect("valid json");
        assert_eq!(v["severity"], "error");
        assert_eq!(v["code"], "unify.occurs");
        assert!(v["line"].as_u64().unwrap() >= 1);
        assert!(v["column"].as_u64().unwrap() >= 1);
    }
}

#[test]
fn syntax_errors_list_expected_tokens() {
    let dir = std::env::temp_dir().join(format!("codata-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("bad.pol");
    std::fs::write(&p, "data Bool { T, F\nlet x: Bool { T }\n").unwrap();
    let o = codata(&["--json", "check", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(stderr(&o).lines().next().unwrap()).unwrap();
    assert_eq!(v["code"], "parse.syntax");
    assert_eq!(v["line"], 2);
    assert!(v["expected"].as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn output_is_deterministic() {
    let runs: Vec<(String, String)> = (0..3)
        .map(|_| {
            let o = codata(&["--json", "check", &example("neg/label_confusion.pol"), &example("neg/unsolved.pol")]);
            (stdout(&o), stderr(&o))
        })
        .collect();
    assert!(runs.windows(2).all(|w| w[0] == w[1]));
    let a = stdout(&codata(&["elaborate", &example("set_indexed.pol")]));
    let b = stdout(&codata(&["elaborate", &example("set_indexed.pol")]));
    assert_eq!(a, b);
}

#[test]
fn elaborated_output_checks_again() {
    let dir = std::env::temp_dir().join(format!("codata-elab-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for f in ["set_indexed.pol", "fun_pi.pol", "vec.pol", "streams.pol"] {
        let o = codata(&["elaborate", &example(f)]);
        assert!(o.status.success(), "{f}: {}", stderr(&o));
        let text = stdout(&o);
        assert!(!text.contains('?'), "{f}: elaboration left holes:\n{text}");
        let p = dir.join(f);
        std::fs::write(&p, text).unwrap();
        let o = codata(&["check", p.to_str().unwrap()]);
        assert!(o.status.success(), "{f}: elaborated program fails: {}", stderr(&o));
    }
}

#[test]
fn missing_file_exits_with_two() {
    let o = codata(&["check", "/definitely/not/here.pol"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot read"));
}

#[test]
fn small_fuel_is_reported() {
    let o = codata(&["--fuel", "3", "run", &example("streams.pol"), "two"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("eval.fuel"), "{}", stderr(&o));
}

#[test]
fn explain_unify_traces_cases() {
    let o = codata(&["--explain-unify", "check", &example("vec.pol")]);
    assert!(o.status.success());
    assert!(!stderr(&o).is_empty());
}

#[test]
fn trace_json_lines_parse() {
    let o = codata(&["--trace-json", "check", &example("bool_proofs.pol")]);
    assert!(o.status.success());
    let err = stderr(&o);
    assert!(!err.is_empty());
    for l in err.lines() {
        let v: serde_json::Value = serde_json::from_str(l).expect("valid json");
        assert!(v["rule"].is_string());
    }
}

#[test]
fn elaborated_output_checks_with_explicit_prelude() {
    let prelude: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "surface", "std", "prelude.pol"].iter().collect();
    let prelude = prelude.to_string_lossy().into_owned();
    let dir = std::env::temp_dir().join(format!("codata-elab-np-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for f in ["bool.pol", "set_codata.pol", "set_indexed.pol", "fun_pi.pol"] {
        let o = codata(&["elaborate", &example(f)]);
        assert!(o.status.success(), "{f}: {}", stderr(&o));
        let p = dir.join(f);
        std::fs::write(&p, stdout(&o)).unwrap();
        let o = codata(&["--no-prelude", "check", &prelude, p.to_str().unwrap()]);
        assert!(o.status.success(), "{f}: {}", stderr(&o));
    }
    for f in ["nat_fu_stump.pol", "nat_fu_stump_data.pol"] {
        let o = codata(&["--no-prelude", "elaborate", &example(f)]);
        assert!(o.status.success(), "{f}: {}", stderr(&o));
        let p = dir.join(f);
        std::fs::write(&p, stdout(&o)).unwrap();
        let o = codata(&["--no-prelude", "check", p.to_str().unwrap()]);
        assert!(o.status.success(), "{f}: {}", stderr(&o));
    }
}
