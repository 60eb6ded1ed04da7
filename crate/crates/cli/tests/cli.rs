use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quotamatch"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("quotamatch-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

const UNREACHABLE_LOWER: &str = r#"types = ["T1"]

[[applicants]]
name = "a1"
type = "T1"
prefs = ["c1"]

[[applicants]]
name = "a2"
type = "T1"
prefs = ["c1", "c2"]

[[companies]]
name = "c1"
lower = 0
upper = 1

[[companies]]
name = "c2"
lower = 1
upper = 1

[[scores]]
applicant = "a1"
company = "c1"
score = 5.0

[[scores]]
applicant = "a2"
company = "c1"
score = 6.0

[[scores]]
applicant = "a2"
company = "c2"
score = 5.0
"#;

#[test]
fn validate_accepts_example() {
    let out = run(bin().arg("validate").arg(data("ex_b.toml")));
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("ok: 5 applicants, 3 companies"));
}

#[test]
fn validate_reports_line_of_parse_error() {
    let path = scratch("broken.toml", "[[companies]]\nname = \"c1\"\nupper = 1\n[[applicants\n");
    let out = run(bin().arg("validate").arg(&path));
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
}

#[test]
fn solve_ex_a_prefers_full_matching() {
    let out = run(bin().args(["solve", "--deterministic"]).arg(data("ex_a.toml")));
    assert_eq!(out.status.code(), Some(0));
    let record: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let pairs: Vec<(String, String)> = record["pairs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            (
                p["applicant"].as_str().unwrap().into(),
                p["company"].as_str().unwrap().into(),
            )
        })
        .collect();
    assert_eq!(pairs, [("a1".into(), "c1".into()), ("a2".into(), "c2".into())]);
    assert_eq!(record["diagnostics"]["unmatched"], 0);
}

#[test]
fn check_round_trips_and_rejects_fabricated_pairs() {
    let solved = stdout(&run(bin().arg("solve").arg(data("ex_a.toml"))));
    let good = scratch("good.json", &solved);
    let out = run(bin().arg("check").arg(data("ex_a.toml")).arg(&good));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let mut record: Value = serde_json::from_str(&solved).unwrap();
    record["pairs"][0]["company"] = "c2".into();
    let bad = scratch("bad.json", &record.to_string());
    let out = run(bin().arg("check").arg(data("ex_a.toml")).arg(&bad));
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("not an application"));
}

#[test]
fn check_flags_edited_diagnostics() {
    let solved = stdout(&run(bin().arg("solve").arg(data("ex_b.toml"))));
    let mut record: Value = serde_json::from_str(&solved).unwrap();
    record["diagnostics"]["total_rank"] = 1.into();
    let edited = scratch("edited.json", &record.to_string());
    let out = run(bin().arg("check").arg(data("ex_b.toml")).arg(&edited));
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("total_rank"), "{}", stdout(&out));
}

#[test]
fn compare_prints_one_row_per_concept() {
    let generated = run(bin().args(["generate", "--shape", "2017", "--seed", "0"]));
    let path = scratch("s2017.toml", &stdout(&generated));
    let out = run(bin()
        .args(["compare", "--deterministic", "--concept", "MinRank-EF,Min#E-CWTEFM"])
        .arg(&path));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("MinRank-EF ")));
    assert!(text.lines().any(|l| l.starts_with("Min#E-CWTEFM ")));
}

#[test]
fn exit_codes() {
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(1));
    assert_eq!(
        run(bin().arg("validate").arg(data("missing.toml"))).status.code(),
        Some(1)
    );

    let path = scratch("unreachable.toml", UNREACHABLE_LOWER);
    let out = run(bin().arg("solve").arg(&path));
    assert_eq!(out.status.code(), Some(2));
    let out = run(bin().args(["solve", "--override-lower", "0"]).arg(&path));
    assert_eq!(out.status.code(), Some(0));

    let generated = run(bin().args(["generate", "--shape", "2017", "--seed", "1"]));
    let path = scratch("limit.toml", &stdout(&generated));
    let out = run(bin()
        .args(["solve", "--concept", "Min#E-CWTEFM", "--node-limit", "1"])
        .arg(&path));
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn generated_instances_validate() {
    for shape in ["small", "2016", "2017", "workshop", "type-lower", "two-type"] {
        let generated = run(bin().args([
            "generate", "--shape", shape, "--seed", "7", "--n", "4", "--types", "2,2",
        ]));
        assert_eq!(generated.status.code(), Some(0), "{shape}: {}", stderr(&generated));
        let path = scratch(&format!("gen-{shape}.toml"), &stdout(&generated));
        let out = run(bin().arg("validate").arg(&path));
        assert_eq!(out.status.code(), Some(0), "{shape}: {}", stderr(&out));
    }
}

#[test]
fn enumerate_lists_optimal_matchings() {
    let out = run(bin()
        .args(["enumerate", "--concept", "MinRank-Stable"])
        .arg(data("ex_b.toml")));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let record: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(record["matchings"].as_array().unwrap().len(), 1);
}
