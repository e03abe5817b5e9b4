//! End-to-end tests of the binary: exit codes, output formats, config
//! round-trips and seed determinism.

use std::io::Write;
use std::process::{Command, Output};

fn msstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msstab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn classify_experiment_points() {
    let out = msstab(&[
        "classify", "--scheme", "bdf2", "--lambda", "-5", "--mu", "2", "--h", "1",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("verdict=stable"));

    let out = msstab(&[
        "classify", "--scheme", "ab2", "--lambda", "-5", "--mu", "2", "--h", "1",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("verdict=unstable"));

    let out = msstab(&[
        "classify", "--scheme", "ab2", "--lambda", "0", "--mu", "0", "--h", "1",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("verdict=marginal"));
}

#[test]
fn classify_json_and_check_mode() {
    let out = msstab(&[
        "classify", "--scheme", "am2", "--lambda", "-5", "--mu", "2", "--h", "1", "--json",
        "--check",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).expect("valid JSON");
    assert_eq!(v["verdict"], "unstable");
    assert!((v["rho"].as_f64().unwrap() - 1.1601653448).abs() < 1e-6);
}

#[test]
fn classify_accepts_complex_pairs() {
    let out = msstab(&[
        "classify", "--scheme", "ab2", "--lambda", "-4,1.5", "--mu", "1,0.5", "--h", "0.05",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("verdict=stable"));
}

#[test]
fn exit_codes() {
    // usage error: unknown scheme
    let out = msstab(&[
        "classify", "--scheme", "rk4", "--lambda", "-5", "--mu", "2", "--h", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    // usage error: missing subcommand args
    let out = msstab(&["classify"]);
    assert_eq!(out.status.code(), Some(2));
    // numerical error: BDF2 resolvent singular at lambda h = 1.5
    let out = msstab(&[
        "classify", "--scheme", "bdf2", "--lambda", "1.5", "--mu", "0", "--h", "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    // stdout stays data-only on failures
    assert!(stdout(&out).is_empty());
}

#[test]
fn region_csv_shape_and_row_count() {
    let out = msstab(&[
        "region",
        "--scheme",
        "ab2",
        "--scheme",
        "bdf2",
        "--grid",
        "-8,0,0,16,20,20",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,Y,scheme,verdict"));
    // 20*20 cells x (2 schemes + sde pseudo-scheme)
    assert_eq!(lines.count(), 20 * 20 * 3);
    assert!(text.contains(",sde,"));
    for verdict in ["stable", "unstable"] {
        assert!(text.contains(verdict));
    }
}

#[test]
fn region_sde_triangle_inclusions() {
    let out = msstab(&[
        "region",
        "--scheme",
        "bdf2",
        "--scheme",
        "ab2",
        "--grid",
        "-8,0,0,16,40,40",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut cells: std::collections::HashMap<(String, String), [bool; 3]> = Default::default();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let key = (f[0].to_string(), f[1].to_string());
        let entry = cells.entry(key).or_insert([false; 3]);
        let stable = f[3] == "stable";
        match f[2] {
            "bdf2" => entry[0] = stable,
            "ab2" => entry[1] = stable,
            _ => entry[2] = stable,
        }
    }
    for (key, [bdf2, ab2, sde]) in &cells {
        // every sde-stable cell is bdf2-stable
        if *sde {
            assert!(*bdf2, "sde-stable cell {key:?} not covered by bdf2");
        }
        // every ab2-stable cell lies inside the sde triangle Y < -2x
        if *ab2 {
            assert!(*sde, "ab2-stable cell {key:?} outside the sde triangle");
        }
    }
}

#[test]
fn h0_values() {
    let out = msstab(&[
        "h0", "--scheme", "ab2", "--lambda", "-5", "--mu", "2", "--json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!((v["h0"].as_f64().unwrap() - 0.16715633383201095).abs() < 1e-12);

    // outside the SDE domain: numerical error
    let out = msstab(&["h0", "--scheme", "am2", "--lambda", "1", "--mu", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn spectral_from_json_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("system.json");
    let mut f = std::fs::File::create(&path).unwrap();
    // d = 1 system equivalent to (lambda, mu) = (-5, 2)
    write!(f, "{{\"F\": [[-5.0]], \"G\": [[[2.0]]]}}").unwrap();
    let out = msstab(&[
        "spectral",
        "--scheme",
        "bdf2",
        "--h",
        "1",
        "--system",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("verdict=stable"));
    let rho: f64 = text
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("rho="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((rho - 0.24765781).abs() < 1e-6);
}

#[test]
fn spectral_builtin_systems() {
    let out = msstab(&[
        "spectral",
        "--scheme",
        "am2",
        "--h",
        "0.5",
        "--single-noise",
        "-5,1.56,1.56",
        "--json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["verdict"], "unstable");
    assert!((v["rho"].as_f64().unwrap() - 1.300428).abs() < 1e-4);
}

#[test]
fn simulate_deterministic_and_divergence_flags() {
    let args = [
        "simulate",
        "--scheme",
        "ab2",
        "--scheme",
        "bdf2",
        "--lambda",
        "-5",
        "--mu",
        "2",
        "--h",
        "1",
        "--t-end",
        "20",
        "--batches",
        "10",
        "--paths",
        "50",
        "--seed",
        "7",
    ];
    let a = msstab(&args);
    let b = msstab(&args);
    assert!(a.status.success());
    assert_eq!(
        a.stdout, b.stdout,
        "same seed must give byte-identical output"
    );
    let text = stdout(&a);
    assert!(text.starts_with("t,scheme,ms_norm,diverged\n"));
    assert!(!text
        .lines()
        .any(|l| l.contains(",bdf2,") && l.ends_with(",1")));

    // over a long horizon the unstable run clamps and flags its rows
    let long = msstab(&[
        "simulate",
        "--scheme",
        "ab2",
        "--lambda",
        "-5",
        "--mu",
        "2",
        "--h",
        "1",
        "--t-end",
        "200",
        "--batches",
        "2",
        "--paths",
        "20",
        "--seed",
        "7",
    ]);
    assert!(long.status.success());
    assert!(stdout(&long)
        .lines()
        .any(|l| l.contains(",ab2,") && l.ends_with(",1")));

    let c = msstab(&[
        "simulate",
        "--scheme",
        "ab2",
        "--scheme",
        "bdf2",
        "--lambda",
        "-5",
        "--mu",
        "2",
        "--h",
        "1",
        "--t-end",
        "20",
        "--batches",
        "10",
        "--paths",
        "50",
        "--seed",
        "8",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn simulate_config_roundtrip() {
    let dump = msstab(&[
        "simulate",
        "--scheme",
        "am2",
        "--scheme",
        "euler",
        "--lambda",
        "-5",
        "--mu",
        "2",
        "--h",
        "0.25",
        "--t-end",
        "1",
        "--batches",
        "4",
        "--paths",
        "25",
        "--seed",
        "3",
        "--dump-config",
    ]);
    assert!(dump.status.success());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("job.json");
    std::fs::write(&path, &dump.stdout).unwrap();

    let from_config = msstab(&["simulate", "--config", path.to_str().unwrap()]);
    let from_flags = msstab(&[
        "simulate",
        "--scheme",
        "am2",
        "--scheme",
        "euler",
        "--lambda",
        "-5",
        "--mu",
        "2",
        "--h",
        "0.25",
        "--t-end",
        "1",
        "--batches",
        "4",
        "--paths",
        "25",
        "--seed",
        "3",
    ]);
    assert!(from_config.status.success());
    assert_eq!(from_config.stdout, from_flags.stdout);

    // dumped config re-dumps identically (fixed point of the parser)
    let redump = msstab(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--dump-config",
    ]);
    assert_eq!(dump.stdout, redump.stdout);
}

#[test]
fn simulate_system_runs() {
    let out = msstab(&[
        "simulate",
        "--scheme",
        "bdf2i",
        "--two-noise",
        "-1.8,1.33,1.33",
        "--h",
        "0.5",
        "--t-end",
        "3",
        "--batches",
        "5",
        "--paths",
        "40",
        "--first-component",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1 + 7); // header + 7 grid points
    assert!(text.contains(",bdf2i,"));

    // euler token is scalar-only
    let out = msstab(&[
        "simulate",
        "--scheme",
        "euler",
        "--two-noise",
        "-1.8,1.33,1.33",
        "--h",
        "0.5",
        "--t-end",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn check_sweep_reports_consistency() {
    let out = msstab(&["check", "--samples", "500", "--seed", "5"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "samples=500 disagreements=0");
}
