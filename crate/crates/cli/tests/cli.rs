use std::process::{Command, Output};

fn mton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mton"))
        .args(args)
        .env_remove("MTON_MAX_N")
        .output()
        .unwrap()
}

fn stdout(args: &[&str]) -> String {
    let o = mton(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn last_line(s: &str) -> &str {
    s.lines().last().unwrap()
}

#[test]
fn counts() {
    assert_eq!(stdout(&["enumerate", "--n", "3", "--kind", "full", "--format", "count"]).trim(), "12");
    assert_eq!(stdout(&["enumerate", "--n", "2", "--kind", "pair", "--format", "count"]).trim(), "3");
    assert_eq!(stdout(&["enumerate", "--n", "9", "--kind", "full", "--format", "count"]).trim(), "1814400");
}

#[test]
fn enumerate_streams_distinct_lines() {
    let out = stdout(&["enumerate", "--n", "4", "--kind", "full"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 60);
    let set: std::collections::HashSet<_> = lines.iter().collect();
    assert_eq!(set.len(), 60);
    let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(v["n"], 4);
    let limited = stdout(&["enumerate", "--n", "4", "--limit", "5"]);
    assert_eq!(limited.lines().collect::<Vec<_>>(), lines[..5]);
}

#[test]
fn stats_means() {
    let out = stdout(&["stats", "--n", "3", "--kind", "full", "--stats", "Y", "--format", "csv"]);
    assert_eq!(out.lines().count(), 14);
    assert_eq!(last_line(&out), "mean,29/12");
    let area = stdout(&["stats", "--n", "2", "--kind", "pair", "--stats", "Area"]);
    let mut vals: Vec<&str> = area.lines().skip(1).take(3).map(|l| l.split(',').nth(1).unwrap()).collect();
    vals.sort();
    assert_eq!(vals, ["2", "2", "4"]);
    assert_eq!(last_line(&area), "mean,8/3");
    let out = stdout(&["stats", "--n", "2", "--kind", "pair", "--stats", "Int,Out"]);
    assert_eq!(last_line(&out), "mean,5/3,5/3");
}

#[test]
fn laplace_outputs() {
    assert_eq!(
        stdout(&["laplace", "--stat", "Y", "--n", "3", "--method", "brute"]).trim(),
        r#"{"coeffs":{"1":"1","2":"5","3":"6"}}"#
    );
    assert_eq!(stdout(&["laplace", "--stat", "Y2", "--n", "3"]).trim(), r#"{"coeffs":{"0":"7","1":"5"}}"#);
    let both = stdout(&["laplace", "--stat", "Out", "--n", "5", "--method", "both", "--kind", "full"]);
    assert_eq!(last_line(&both), "EQUAL");
    let both = stdout(&["laplace", "--stat", "Y1", "--n", "6", "--method", "both"]);
    assert_eq!(last_line(&both), "EQUAL");
    let both = stdout(&["laplace", "--stat", "Int", "--n", "4", "--method", "both", "--kind", "pair"]);
    assert_eq!(last_line(&both), "EQUAL");
}

#[test]
fn usage_errors_exit_2() {
    let o = mton(&["stats", "--n", "2", "--kind", "full", "--stats", "Area"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pair"));
    assert_eq!(mton(&["enumerate", "--n", "11"]).status.code(), Some(2));
    assert_eq!(mton(&["enumerate", "--n", "9", "--kind", "pair"]).status.code(), Some(2));
    assert_eq!(mton(&["laplace", "--stat", "Z", "--n", "3"]).status.code(), Some(2));
    assert_eq!(mton(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(mton(&["bogus"]).status.code(), Some(2));
}

#[test]
fn size_guard_overrides() {
    let o = Command::new(env!("CARGO_BIN_EXE_mton"))
        .args(["enumerate", "--n", "4"])
        .env("MTON_MAX_N", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&["enumerate", "--n", "11", "--force", "--limit", "2"]);
    assert_eq!(out.lines().count(), 2);
}

#[test]
fn closed_forms_and_cumulants() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&["closed-form", "--formula", "var-y", "--n", "3"])).unwrap();
    assert_eq!(v["value"], "59/144");
    let v: serde_json::Value = serde_json::from_str(&stdout(&["closed-form", "--formula", "asym-mean-y", "--n", "10000"])).unwrap();
    assert_eq!(v["float"], true);
    assert!(v["diagnostic"].as_f64().unwrap().abs() < 1e-3);
    assert_eq!(mton(&["closed-form", "--formula", "mean-y2", "--n", "3"]).status.code(), Some(2));

    let c = stdout(&["cumulants", "--moments", "1,2,5"]);
    let back = stdout(&["cumulants", "--cumulants", "1,1,3/2"]);
    assert_eq!(c.trim(), r#"{"cumulants":["1","1","3/2"]}"#);
    assert_eq!(back.trim(), r#"{"moments":["1","2","5"]}"#);
    let p: serde_json::Value = serde_json::from_str(&stdout(&["poisson", "--alpha", "-1", "--upto", "3"])).unwrap();
    let direct = stdout(&["cumulants", "--cumulants", "-1,-1,-1"]);
    let d: serde_json::Value = serde_json::from_str(&direct).unwrap();
    assert_eq!(p["moments"], d["moments"]);
}

#[test]
fn stirling_rows() {
    let out = stdout(&["stirling", "--n", "6", "--check"]);
    let row6: serde_json::Value = serde_json::from_str(out.lines().nth(5).unwrap()).unwrap();
    assert_eq!(row6["row"], serde_json::json!(["1", "20", "155", "580", "1044", "720"]));
    assert!(last_line(&out).contains(r#""agree":true"#));
}

#[test]
fn verify_suite_is_deterministic() {
    let run = || {
        let o = mton(&["--threads", "2", "verify", "--suite", "thm16"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let lines: Vec<serde_json::Value> = String::from_utf8(o.stdout)
            .unwrap()
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v.as_object_mut().unwrap().remove("elapsed_ms");
                v
            })
            .collect();
        lines
    };
    let a = run();
    assert!(a.iter().all(|v| v["status"] == "pass"));
    assert!(a.iter().any(|v| v["values"].to_string().contains("29/12")));
    assert_eq!(a, run());
}
