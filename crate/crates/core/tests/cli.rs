use std::fs;
use std::path::Path;

use hardylab::cli::{run, CSV_HEADER};
use hardylab::lab::ExperimentReport;

fn argv(args: &[&str]) -> Vec<String> {
    std::iter::once("hardylab").chain(args.iter().copied()).map(String::from).collect()
}

fn report_at(path: &Path) -> ExperimentReport {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let out = out.to_str().unwrap();
    assert_eq!(run(argv(&["sharpness", "--p", "2", "--factors", "1,1", "--output", out])), 0);
    assert_eq!(run(argv(&["sharpness", "--p", "1", "--output", out])), 1);
    assert_eq!(run(argv(&["sharpness", "--no-such-flag"])), 1);
    assert_eq!(run(argv(&["fuzz", "--samples", "999", "--output", out])), 1);
    assert_eq!(run(argv(&["weighted", "--weight", "monomial:1,2", "--output", out])), 1);
    assert_eq!(run(argv(&["--help"])), 0);
}

#[test]
fn json_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let code = run(argv(&[
        "sharpness", "--method", "all", "--samples", "5000", "--seed", "11", "--format", "json",
        "--output", path.to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
    let text = fs::read_to_string(&path).unwrap();
    let report: ExperimentReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.seed, 11);
    assert!(report.wall_time_ms.is_none());
    let again = serde_json::to_string_pretty(&report).unwrap() + "\n";
    assert_eq!(again, text);
}

#[test]
fn csv_has_the_fixed_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    assert_eq!(run(argv(&["volume", "--samples", "2000", "--output", path.to_str().unwrap()])), 0);
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn plot_writes_svg_next_to_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.json");
    let code = run(argv(&["sharpness", "--plot", "--format", "json", "--output", path.to_str().unwrap()]));
    assert_eq!(code, 0);
    let svg = fs::read_to_string(dir.path().join("sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert_eq!(svg.matches(r#"class="reference""#).count(), 1);
}

#[test]
fn flags_override_config_and_config_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"p": 3.0, "seed": 5, "factors": [1, 2], "format": "json"}"#).unwrap();
    let path = dir.path().join("r.json");
    let (cfg, out) = (cfg.to_str().unwrap(), path.to_str().unwrap());

    assert_eq!(run(argv(&["sharpness", "--config", cfg, "--output", out])), 0);
    let r = report_at(&path);
    assert_eq!(r.seed, 5);
    assert_eq!(r.params["p"], 3.0);

    assert_eq!(run(argv(&["sharpness", "--config", cfg, "--p", "2.5", "--seed", "9", "--output", out])), 0);
    let r = report_at(&path);
    assert_eq!(r.seed, 9);
    assert_eq!(r.params["p"], 2.5);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"pp": 3.0}"#).unwrap();
    assert_eq!(run(argv(&["sharpness", "--config", bad.to_str().unwrap(), "--output", out])), 1);
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = path.to_str().unwrap();
    std::env::set_var("HARDYLAB_SEED", "77");
    let code = run(argv(&["volume", "--samples", "2000", "--format", "json", "--output", out]));
    let env_seed = report_at(&path).seed;
    let code_flag = run(argv(&["volume", "--samples", "2000", "--seed", "3", "--format", "json", "--output", out]));
    std::env::remove_var("HARDYLAB_SEED");
    assert_eq!((code, code_flag), (0, 0));
    assert_eq!(env_seed, 77);
    assert_eq!(report_at(&path).seed, 3);
}

#[test]
fn timing_is_recorded_only_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = path.to_str().unwrap();
    assert_eq!(run(argv(&["sharpness", "--timing", "--format", "json", "--output", out])), 0);
    assert!(report_at(&path).wall_time_ms.is_some());
}
