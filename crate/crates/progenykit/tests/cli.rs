//! End-to-end tests of the `progenykit` binary: output shapes, exit codes,
//! and byte-level determinism.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_progenykit"))
        .args(args)
        .env_remove("PROGENYKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn run_with_threads(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_progenykit"))
        .args(args)
        .env("PROGENYKIT_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn stdout_str(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 output")
}

fn parse_csv_row(line: &str) -> Vec<f64> {
    line.split(',')
        .map(|f| f.parse::<f64>().expect("numeric field"))
        .collect()
}

const SIMPLE_HALF: &str = r#"{"kind":"simple","p":0.5}"#;
const STAY: &str = r#"{"kind":"stay","p":0.4,"q":0.3,"r":0.3}"#;
const STAY_SUPERCRITICAL: &str = r#"{"kind":"stay","p":0.2,"q":0.6,"r":0.2}"#;
const STAY_MODEL: &str = r#"{"L":2,"specs":[
    {"kind":"geometric","p":0.4,"q":[0.3,0.3],"shift":0},
    {"kind":"table","entries":[[[0,0],1.0]]}]}"#;
const SUPERCRITICAL_MODEL: &str = r#"{"L":2,"specs":[
    {"kind":"geometric","p":0.2,"q":[0.6,0.2],"shift":0},
    {"kind":"table","entries":[[[0,0],1.0]]}]}"#;

#[test]
fn hitting_simple_known_rows() {
    let output = run(&["hitting", "--spec", SIMPLE_HALF, "--n-max", "3"]);
    assert!(output.status.success());
    let text = stdout_str(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,pmf,cdf");
    assert_eq!(parse_csv_row(lines[1]), vec![1.0, 0.5, 0.5]);
    assert_eq!(parse_csv_row(lines[2]), vec![2.0, 0.0, 0.5]);
    assert_eq!(parse_csv_row(lines[3]), vec![3.0, 0.125, 0.625]);
    let footer: Vec<&str> = lines[4].split(',').collect();
    assert_eq!(footer[0], "defect");
    assert!((footer[1].parse::<f64>().unwrap() - 0.375).abs() < 1e-15);
    assert!((footer[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn hitting_stay_first_row_is_p() {
    let output = run(&["hitting", "--spec", STAY, "--n-max", "8"]);
    assert!(output.status.success());
    let text = stdout_str(&output);
    let row = parse_csv_row(text.lines().nth(1).unwrap());
    assert_eq!(row[0], 1.0);
    assert!((row[1] - 0.4).abs() < 1e-13);
}

#[test]
fn hitting_json_format() {
    let output = run(&[
        "hitting", "--spec", STAY, "--n-max", "16", "--format", "json",
    ]);
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["command"], "hitting");
    assert!((report["pmf"][0].as_f64().unwrap() - 0.4).abs() < 1e-13);
    assert!(report["defect"].as_f64().unwrap() < 0.2);
}

#[test]
fn malformed_and_unknown_specs_exit_2() {
    for spec in [
        "{not json",
        r#"{"kind":"stay","p":0.4,"q":0.3}"#,
        r#"{"kind":"stay","p":0.4,"q":0.3,"r":0.3,"extra":1}"#,
        r#"{"kind":"stay","p":0.5,"q":0.3,"r":0.3}"#,
        r#"{"kind":"warp","p":0.5}"#,
    ] {
        let output = run(&["hitting", "--spec", spec]);
        assert_eq!(output.status.code(), Some(2), "spec: {spec}");
    }
    // missing file path
    let output = run(&["hitting", "--spec", "/nonexistent/spec.json"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn hitting_general_walk_unsupported() {
    let spec = r#"{"kind":"general","down":[0.2,0.2],"up":[0.6]}"#;
    let output = run(&["hitting", "--spec", spec]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn progeny_stay_rows_converge_and_match_closed_form() {
    let output = run(&["progeny", "--spec", STAY_MODEL, "--n-max", "19"]);
    assert!(output.status.success());
    let text = stdout_str(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "t,rho_1,rho_2,residual,iterations,converged,closed_form,cf_dev"
    );
    assert_eq!(lines.len(), 1 + 19 + 1);
    for line in &lines[1..20] {
        let fields: Vec<&str> = line.split(',').collect();
        let residual: f64 = fields[3].parse().unwrap();
        assert!(residual < 1e-10);
        assert_eq!(fields[5], "1"); // converged
        assert_eq!(fields[6], "1"); // closed form available
        let cf_dev: f64 = fields[7].parse().unwrap();
        assert!(cf_dev < 1e-8);
        // rho_2 = s_2 for the stay family
        let t: f64 = fields[0].parse().unwrap();
        let rho2: f64 = fields[2].parse().unwrap();
        assert!((rho2 - t).abs() < 1e-12);
    }
    let footer: Vec<&str> = lines[20].split(',').collect();
    assert_eq!(footer[0], "max_cf_dev");
    assert!(footer[1].parse::<f64>().unwrap() < 1e-8);
}

#[test]
fn progeny_supercritical_is_defective_near_one() {
    let output = run(&[
        "progeny",
        "--spec",
        SUPERCRITICAL_MODEL,
        "--n-max",
        "99",
        "--format",
        "json",
    ]);
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let rows = report["rows"].as_array().unwrap();
    let last = &rows[rows.len() - 1];
    assert_eq!(last["converged"], true);
    // t = 0.99, but rho_1 stays near the extinction probability p/q = 1/3
    let rho1 = last["rho"][0].as_f64().unwrap();
    assert!(rho1 < 0.4, "rho_1 = {rho1}");
}

#[test]
fn tail_theta_converges_and_reports_limit() {
    let output = run(&[
        "tail",
        "--quantity",
        "theta",
        "--r",
        "0.5",
        "--n-max",
        "1000000",
    ]);
    assert!(output.status.success());
    let text = stdout_str(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,value,sqrt_n_value,limit_constant,rel_gap");
    // theta_0 row
    let first = parse_csv_row(lines[1]);
    assert_eq!(first[0], 0.0);
    assert_eq!(first[1], 1.0);
    // limit column is constant across rows
    let limit = first[3];
    for line in &lines[1..] {
        assert_eq!(parse_csv_row(line)[3], limit);
    }
    // final row at n = 1e6 sits within 1% of the limit
    let last = parse_csv_row(lines[lines.len() - 1]);
    assert_eq!(last[0], 1_000_000.0);
    assert!(last[4].abs() < 0.01, "rel gap {}", last[4]);
}

#[test]
fn tail_alpha_and_convolution_work() {
    let output = run(&[
        "tail",
        "--quantity",
        "alpha",
        "--r",
        "0.2",
        "--n-max",
        "10000",
    ]);
    assert!(output.status.success());
    let output = run(&[
        "tail",
        "--quantity",
        "convolution",
        "--x",
        "0.25",
        "--n-max",
        "100000",
        "--format",
        "json",
    ]);
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let rows = report["rows"].as_array().unwrap();
    let last = &rows[rows.len() - 1];
    assert!(last["rel_gap"].as_f64().unwrap().abs() < 0.01);
}

#[test]
fn tail_domain_errors_exit_3() {
    let output = run(&["tail", "--quantity", "theta", "--r", "1.2"]);
    assert_eq!(output.status.code(), Some(3));
    let output = run(&["tail", "--quantity", "convolution", "--x", "1.0"]);
    assert_eq!(output.status.code(), Some(3));
    // missing parameter is a usage error, not a domain error
    let output = run(&["tail", "--quantity", "convolution"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn verify_subcritical_stay_passes() {
    let output = run(&[
        "verify",
        "--spec",
        STAY,
        "--samples",
        "50000",
        "--n-max",
        "2048",
        "--seed",
        "42",
    ]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["identity"]["violations"], 0);
    assert_eq!(report["offspring_fit"]["pass"], true);
    assert_eq!(report["total_variation"]["pass"], true);
    assert_eq!(report["honesty"]["pass"], true);
}

#[test]
fn verify_supercritical_fails_with_defect_report() {
    // the walk drifts down, so most paths never hit: bound the horizon
    let output = run(&[
        "verify",
        "--spec",
        STAY_SUPERCRITICAL,
        "--samples",
        "20000",
        "--n-max",
        "1024",
        "--horizon",
        "4096",
    ]);
    assert_eq!(output.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["pass"], false);
    assert_eq!(report["honesty"]["pass"], false);
    let defect = report["honesty"]["defect"].as_f64().unwrap();
    assert!((defect - 2.0 / 3.0).abs() < 0.01, "defect {defect}");
    // the identity still holds pathwise on finite passages
    assert_eq!(report["identity"]["violations"], 0);
}

#[test]
fn verify_zero_samples_is_usage_error() {
    let output = run(&["verify", "--spec", STAY, "--samples", "0"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn simulate_csv_shape_and_determinism() {
    let args = [
        "simulate",
        "--spec",
        STAY,
        "--samples",
        "20000",
        "--horizon",
        "256",
        "--seed",
        "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(
        a.stdout, b.stdout,
        "byte-identical for identical config+seed"
    );
    let c = run(&[
        "simulate",
        "--spec",
        STAY,
        "--samples",
        "20000",
        "--horizon",
        "256",
        "--seed",
        "8",
    ]);
    assert_ne!(a.stdout, c.stdout, "different seed, different sample");

    let text = stdout_str(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,count,freq");
    assert_eq!(lines.len(), 1 + 257 + 1);
    assert!(lines.last().unwrap().starts_with("overflow,"));
    let counts: u64 = lines[1..258]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    let overflow: u64 = lines[258].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(counts + overflow, 20000);
}

#[test]
fn simulate_is_thread_count_invariant() {
    let args = [
        "simulate",
        "--spec",
        STAY,
        "--samples",
        "30000",
        "--horizon",
        "128",
        "--seed",
        "3",
    ];
    let one = run_with_threads(&args, "1");
    let four = run_with_threads(&args, "4");
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn simulate_binary_histogram() {
    let output = run(&[
        "simulate",
        "--spec",
        SIMPLE_HALF,
        "--samples",
        "10000",
        "--horizon",
        "64",
        "--seed",
        "11",
        "--format",
        "bin",
    ]);
    assert!(output.status.success());
    let counts = progenykit::mc::read_histogram_binary(output.stdout.as_slice()).unwrap();
    // counts for n = 0..=horizon plus the trailing overflow cell
    assert_eq!(counts.len(), 66);
    assert_eq!(counts.iter().sum::<u64>(), 10000);
    assert_eq!(counts[0], 0);
}

#[test]
fn spec_can_come_from_a_file() {
    let dir = std::env::temp_dir().join(format!("progenykit-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("walk.json");
    std::fs::write(&path, STAY).unwrap();
    let out_path = dir.join("hitting.csv");
    let output = run(&[
        "hitting",
        "--spec",
        path.to_str().unwrap(),
        "--n-max",
        "4",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert!(output.stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("n,pmf,cdf\n"));
    std::fs::remove_dir_all(&dir).ok();
}
