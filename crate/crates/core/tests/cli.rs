use std::path::{Path, PathBuf};

use tempfile::TempDir;
use trace_sampler::cli::run;
use trace_sampler::oracle::{TOY_AAG, TOY_JSON};
use trace_sampler::sampler::Trace;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("trace-sampler").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn fixture() -> (TempDir, String, String) {
    let dir = tempfile::tempdir().unwrap();
    let aag = write(dir.path(), "toy.aag", TOY_AAG);
    let json = write(dir.path(), "toy.json", TOY_JSON);
    (dir, aag.display().to_string(), json.display().to_string())
}

#[test]
fn count_both_formats() {
    let (_d, aag, json) = fixture();
    for input in [&aag, &json] {
        for mode in ["plain", "restricted"] {
            let (code, out, _) = invoke(&["count", input, "-n", "4", "--mode", mode]);
            assert_eq!((code, out.trim()), (0, "7"));
        }
    }
    let (code, out, _) = invoke(&["count", &aag, "-n", "3"]);
    assert_eq!((code, out.trim()), (0, "5"));
}

#[test]
fn sample_reproducible_and_valid() {
    let (d, aag, _) = fixture();
    let out_path = d.path().join("traces.txt");
    let args = ["sample", &aag, "-n", "4", "-s", "50", "--seed", "9", "-o", out_path.to_str().unwrap()];
    assert_eq!(invoke(&args).0, 0);
    let first = std::fs::read_to_string(&out_path).unwrap();
    let (code, again, _) = invoke(&["sample", &aag, "-n", "4", "-s", "50", "--seed", "9", "-j", "3"]);
    assert_eq!(code, 0);
    assert_eq!(first, again);
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines.len(), 50);
    for line in lines {
        let t = Trace::parse_line(line, 2).unwrap();
        assert_eq!(t.length(), 4);
        assert_eq!(t.states[0], 0);
    }
}

#[test]
fn check_report_shape() {
    let (_d, aag, _) = fixture();
    let (code, out, _) = invoke(&["check", &aag, "-n", "4", "-s", "2000", "--seed", "1"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["count"], "7");
    assert_eq!(v["analytic_sum"], "1");
    assert_eq!(v["analytic_matches_expected"], true);
    assert_eq!(v["traces"].as_array().unwrap().len(), 7);
    assert!(v["chi_square"]["p_value"].as_f64().unwrap() > 1e-4);
    assert!(v["histogram_js_distance"].is_number());
}

#[test]
fn check_beyond_enumeration_cap_warns() {
    let (_d, aag, _) = fixture();
    let (code, out, err) = invoke(&["check", &aag, "-n", "4", "-s", "20", "--enum-cap", "3"]);
    assert_eq!(code, 0);
    assert!(err.contains("warning"));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["chi_square"].is_null());
    for row in v["traces"].as_array().unwrap() {
        assert_eq!(row["analytic"], "1/7");
    }
}

#[test]
fn weights_and_final_states() {
    let (d, aag, json) = fixture();
    let w = write(d.path(), "w.json", r#"{"default": 1, "entries": [["00", "01", 2]]}"#);
    let (code, out, _) = invoke(&["count", &json, "-n", "4", "--weights", w.to_str().unwrap()]);
    assert_eq!((code, out.trim()), (0, "11"));
    let f = write(d.path(), "final.txt", "10\n");
    for input in [&aag, &json] {
        let (code, out, _) = invoke(&["count", input, "-n", "4", "--final", f.to_str().unwrap()]);
        assert_eq!((code, out.trim()), (0, "5"));
    }
}

#[test]
fn stats_reports_both_modes() {
    let (_d, aag, _) = fixture();
    let (code, out, _) = invoke(&["stats", &aag, "-n", "6"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["plain"]["mode"], "plain");
    assert_eq!(v["restricted"]["mode"], "restricted");
    assert_eq!(v["padded_length"], 8);
}

#[test]
fn exit_codes() {
    let (d, aag, json) = fixture();
    let bad = write(d.path(), "bad.aag", "aag 1 0 0 0\n");
    assert_eq!(invoke(&["count", bad.to_str().unwrap(), "-n", "2"]).0, 2);
    assert_eq!(invoke(&["count", &json, "-n", "2", "--final", "output:0"]).0, 2);
    assert_eq!(invoke(&["count", &aag, "-n", "0"]).0, 2);
    assert_eq!(invoke(&["count", &aag, "-n", "64", "--node-cap", "8"]).0, 3);
    let none = write(d.path(), "none.txt", "10\n");
    assert_eq!(invoke(&["sample", &aag, "-n", "1", "--final", none.to_str().unwrap()]).0, 4);
    assert_eq!(invoke(&["frobnicate"]).0, 2);
}
