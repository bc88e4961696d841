//! Command-line contract: exit codes, report files, determinism.

use std::path::Path;
use std::process::{Command, Output};

fn sl_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sl-lab")).args(args).output().unwrap()
}

fn docs(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs")
        .join(file)
        .display()
        .to_string()
}

#[test]
fn unknown_problem_is_an_execution_error() {
    let out = sl_lab(&["classify", "--problem", "no_such_problem"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown builtin"));
    let out = sl_lab(&["run", "--problem", "free", "--stages", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let out = sl_lab(&["classify", "--problem", "free", "--z", "1,0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reproducible_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for i in 0..2 {
        let sub = dir.path().join(format!("run{i}"));
        let out = sub.join("r.json");
        let o = sl_lab(&[
            "run",
            "--problem",
            "free",
            "--stages",
            "semibound,oscillate,classify,replay",
            "--reproducible",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        texts.push(std::fs::read(&out).unwrap());
        for kind in ["semibound", "oscillation", "replay"] {
            let side = sub.join(format!("r.right.{kind}.csv"));
            assert!(side.exists(), "missing {}", side.display());
        }
    }
    assert_eq!(texts[0], texts[1]);
    let v: serde_json::Value = serde_json::from_slice(&texts[0]).unwrap();
    assert!(v.get("generated_at_unix").is_none());
    assert_eq!(v["halves"][0]["verdicts"]["label"], "limit_point");
    let csv = std::fs::read_to_string(dir.path().join("run0/r.right.semibound.csv")).unwrap();
    assert!(csv.starts_with("d,n,lambda_min,residual"));
}

#[test]
fn config_file_problem_runs() {
    let o = sl_lab(&["run", "--config", &docs("example_problem.toml"), "--stages", "criteria", "--reproducible"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let hr = &v["halves"][0]["stages"]["criteria"]["result"]["hartman_rellich"];
    assert_eq!(hr["verdict"], "diverges");
}

#[test]
fn whole_line_is_split_into_halves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("line.toml");
    std::fs::write(
        &cfg,
        r#"
[problem]
name = "line"
m = 1
c = 0
a = "-inf"
b = "inf"
[[coeff.P]]
from = "-inf"
to = "inf"
expr = "1"
[[coeff.Q]]
from = "-inf"
to = "inf"
expr = "0"
[[coeff.R]]
from = "-inf"
to = "inf"
expr = "1"
"#,
    )
    .unwrap();
    let o = sl_lab(&["classify", "--config", cfg.to_str().unwrap(), "--reproducible"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let halves = v["halves"].as_array().unwrap();
    assert_eq!(halves.len(), 2);
    assert_eq!(halves[0]["side"], "left_reflected");
    for h in halves {
        assert_eq!(h["verdicts"]["label"], "limit_point");
    }
    let notes = v["notes"].as_array().unwrap();
    assert!(notes.iter().any(|n| n.as_str().unwrap().contains("both ends")));
    // reflection alone keeps only the left half
    let o = sl_lab(&["classify", "--config", cfg.to_str().unwrap(), "--reflect", "--reproducible"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["halves"].as_array().unwrap().len(), 1);
}

#[test]
fn saved_report_can_be_rechecked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.json");
    let o = sl_lab(&[
        "run",
        "--problem",
        "quartic_lc",
        "--stages",
        "semibound,classify",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = sl_lab(&["suite", "--report", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(!text.contains("FAIL"), "{text}");
}

#[test]
fn report_matches_documented_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(docs("report.schema.json")).unwrap()).unwrap();
    let o = sl_lab(&["run", "--problem", "example_2_8", "--stages", "criteria,semibound,classify"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema_version"], schema["properties"]["schema_version"]["const"]);
    let required = |node: &serde_json::Value| -> Vec<String> {
        node["required"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect()
    };
    for key in required(&schema) {
        assert!(v.get(&key).is_some(), "report lacks {key}");
    }
    let defs = &schema["$defs"];
    for half in v["halves"].as_array().unwrap() {
        for key in required(&defs["half"]) {
            assert!(half.get(&key).is_some(), "half lacks {key}");
        }
        let props = &defs["half"]["properties"]["verdicts"]["properties"];
        for field in ["semibound", "hartman_rellich", "pw_growth", "label"] {
            let allowed = props[field]["enum"].as_array().unwrap();
            assert!(allowed.contains(&half["verdicts"][field]), "{field}: {}", half["verdicts"][field]);
        }
    }
    for f in v["consistency"].as_array().unwrap() {
        let allowed = defs["finding"]["properties"]["status"]["enum"].as_array().unwrap();
        assert!(allowed.contains(&f["status"]));
    }
}
