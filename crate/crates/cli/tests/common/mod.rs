//! Helpers for driving the `bridge` binary from integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const FIXTURES: [&str; 3] = ["symmetric", "two_route", "time_varying"];

/// (subcommand, extra flags, golden tag) for each golden-file case.
pub const GOLDEN_CASES: [(&str, &[&str], &str); 3] = [
    ("solve", &[], "solve"),
    ("diagnose", &["--probe"], "diagnose"),
    ("sample", &["--count", "2000", "--seed", "42"], "sample"),
];

pub fn dir(sub: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join(sub)
}

pub fn fixture(name: &str) -> PathBuf {
    dir("fixtures").join(format!("{name}.json"))
}

pub fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("bridge-tests-{}", std::process::id()));
    fs::create_dir_all(&d).unwrap();
    d.join(name)
}

pub fn write_problem(name: &str, text: &str) -> PathBuf {
    let path = scratch(name);
    fs::write(&path, text).unwrap();
    path
}

pub fn bridge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bridge"))
        .args(args)
        .env_remove("BRIDGE_LOG")
        .output()
        .expect("binary runs")
}

pub fn code(args: &[&str]) -> Option<i32> {
    bridge(args).status.code()
}

/// Runs a command with `--output` and returns (stdout, document), or the stderr on failure.
pub fn run_with_output(
    fixture_name: &str,
    cmd: &str,
    extra: &[&str],
    tag: &str,
) -> Result<(String, String), String> {
    let out_path = scratch(&format!("{fixture_name}.{tag}.json"));
    let problem = fixture(fixture_name);
    let mut args = vec![
        cmd,
        problem.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let out = bridge(&args);
    if out.status.code() != Some(0) {
        return Err(format!(
            "{cmd} {fixture_name} exited with {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    let doc = fs::read_to_string(&out_path).map_err(|e| e.to_string())?;
    Ok((String::from_utf8(out.stdout).unwrap(), doc))
}

pub fn golden(file: &str) -> Option<String> {
    fs::read_to_string(dir("golden").join(file)).ok()
}

/// Checks one golden case: two runs agree byte for byte and match the stored copies.
pub fn check_case(name: &str, cmd: &str, extra: &[&str], tag: &str) -> Result<(), String> {
    let (text, doc) = run_with_output(name, cmd, extra, tag)?;
    let (text2, doc2) = run_with_output(name, cmd, extra, &format!("{tag}-again"))?;
    if text != text2 || doc != doc2 {
        return Err(format!("{tag} {name}: output not reproducible"));
    }
    for (file, actual) in [
        (format!("{name}.{tag}.txt"), &text),
        (format!("{name}.{tag}.json"), &doc),
    ] {
        if std::env::var_os("BRIDGE_BLESS").is_some() {
            fs::write(dir("golden").join(&file), actual).unwrap();
            continue;
        }
        match golden(&file) {
            Some(expected) if &expected == actual => {}
            Some(_) => return Err(format!("{file} differs from the golden copy")),
            None => return Err(format!("missing golden file {file}")),
        }
    }
    Ok(())
}

/// (description, args, expected exit code) for the exit-code contract.
pub fn exit_code_cases() -> Vec<(&'static str, Vec<String>, i32)> {
    let s = |p: PathBuf| p.to_str().unwrap().to_string();
    let ok = s(fixture("symmetric"));
    let bad = s(write_problem("bad.json", r#"{"format_version":1,"n":2}"#));
    let pre = s(write_problem(
        "precondition.json",
        r#"{"format_version":1,"n":2,"edges":[[1,1],[1,2],[2,2]],"prior":"ruelle_bowen","nu0":[0.5,0.5],"nuN":[0.5,0.5],"N":2}"#,
    ));
    let parity = s(write_problem(
        "parity.json",
        r#"{"format_version":1,"n":2,"edges":[[1,2],[2,1]],"nu0":[1,0],"nuN":[0,1],"N":2}"#,
    ));
    let unreachable = s(write_problem(
        "unreachable.json",
        r#"{"format_version":1,"n":2,"edges":[[1,1],[2,2],[2,1]],"nu0":[1,0],"nuN":[0,1],"N":2,"eta":"inf"}"#,
    ));
    let tv = s(fixture("time_varying"));
    let v = |a: &[&str]| a.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    vec![
        ("converged solve", v(&["solve", &ok]), 0),
        (
            "missing file",
            v(&["solve", "/definitely/not/here.json"]),
            2,
        ),
        ("incomplete document", v(&["solve", &bad]), 2),
        ("negative eta", v(&["solve", &ok, "--eta", "-1"]), 2),
        (
            "failure probability above 1",
            v(&["robustness", &ok, "--fail-prob", "1.5"]),
            2,
        ),
        ("missing argument", v(&["solve"]), 2),
        ("prior precondition", v(&["solve", &pre]), 2),
        ("parity infeasibility", v(&["solve", &parity]), 3),
        ("unreachable target", v(&["solve", &unreachable]), 3),
        (
            "iteration budget",
            v(&["solve", &tv, "--max-iter", "1", "--tol", "1e-30"]),
            4,
        ),
    ]
}
