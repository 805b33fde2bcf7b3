//! End-to-end checks of the `aoc` binary: exit codes, output contracts and
//! flag precedence.

use std::path::Path;
use std::process::{Command, Output};

fn aoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoc"))
        .args(args)
        .env_remove("AOC_WORKERS")
        .output()
        .expect("spawn aoc")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const CONFIG: &str = r#"
[potential]
family = "square_well"
v0 = -0.5
a = 1.0

[sweep]
rho = 1.0
n_list = [5, 10, 20, 40]
fit_min_n = 10
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("sweep.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&aoc(&["--help"])), 0);
    assert_eq!(code(&aoc(&[])), 2);
    assert_eq!(code(&aoc(&["bogus"])), 2);
    assert_eq!(
        code(&aoc(&[
            "gamma",
            "--potential",
            "square_well",
            "--v0",
            "1",
            "--a",
            "1",
            "--nu",
            "1",
            "--nope"
        ])),
        2
    );
    assert_eq!(code(&aoc(&["gamma", "--potential", "circle", "--nu", "1"])), 2);
    // missing potential, missing parameter, bad values
    assert_eq!(code(&aoc(&["gamma", "--nu", "1"])), 2);
    assert_eq!(
        code(&aoc(&["gamma", "--potential", "square_well", "--v0", "1", "--nu", "1"])),
        2
    );
    assert_eq!(
        code(&aoc(&[
            "gamma",
            "--potential",
            "square_well",
            "--v0",
            "1",
            "--a",
            "-1",
            "--nu",
            "1"
        ])),
        2
    );
    assert_eq!(
        code(&aoc(&[
            "gamma",
            "--potential",
            "square_well",
            "--v0",
            "1",
            "--a",
            "1",
            "--nu",
            "-1"
        ])),
        2
    );
    assert_eq!(
        code(&aoc(&[
            "spectrum",
            "--potential",
            "square_well",
            "--v0",
            "1",
            "--a",
            "3",
            "--N",
            "2",
            "--rho",
            "1"
        ])),
        2
    );
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        "[potential]\nfamily = \"square_well\"\nv0 = 1.0\n",
        &CONFIG.replace("[5, 10, 20, 40]", "[10, 5]"),
        &CONFIG.replace("rho = 1.0", "rho = 0.0"),
        &format!("{CONFIG}\n[grid]\nbogus = 3\n"),
        "not toml at all [[[",
    ] {
        let p = write_config(dir.path(), text);
        let o = aoc(&["sweep", "--config", &p]);
        assert_eq!(code(&o), 2, "{text}\n{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&aoc(&["sweep", "--config", "/nonexistent/x.toml"])), 2);
}

#[test]
fn gamma_prints_three_routes() {
    let o = aoc(&[
        "gamma",
        "--potential",
        "square_well",
        "--v0",
        "-0.5",
        "--a",
        "1",
        "--nu",
        "9.8696",
    ]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    for key in [
        "gamma_scattering",
        "gamma_gkm",
        "gamma_matrix",
        "|gkm - scattering|",
        "|matrix - scattering|",
    ] {
        assert!(s.contains(key), "{s}");
    }
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), CONFIG);
    let o = aoc(&["gamma", "--config", &p, "--v0", "0.5", "--json"]);
    assert_eq!(code(&o), 0);
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let v = aoc_core::Potential::square_well(0.5, 1.0).unwrap();
    let want = aoc_core::gamma_scattering(&v, std::f64::consts::PI.powi(2)).unwrap();
    assert_eq!(j["gamma_scattering"].as_f64().unwrap(), want);
}

#[test]
fn sweep_csv_contract_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), CONFIG);
    let run = |workers: &str, name: &str| {
        let csv = dir.path().join(name);
        let json = dir.path().join(format!("{name}.json"));
        let o = aoc(&[
            "sweep",
            "--config",
            &p,
            "--workers",
            workers,
            "--csv",
            csv.to_str().unwrap(),
            "--json-out",
            json.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(csv).unwrap(), std::fs::read_to_string(json).unwrap())
    };
    let (a, ja) = run("1", "a.csv");
    let (b, _) = run("1", "b.csv");
    let (c, _) = run("3", "c.csv");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,L,I,lnD,defect_norm,M,status"));
    assert_eq!(lines.count(), 4);
    let j: serde_json::Value = serde_json::from_str(&ja).unwrap();
    assert!(j["fit"]["gamma_fit"].as_f64().unwrap().is_finite());
    assert!(j["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn sweep_without_fit_window_fails_with_one() {
    let o = aoc(&[
        "sweep",
        "--potential",
        "square_well",
        "--v0",
        "0.2",
        "--a",
        "1",
        "--rho",
        "1",
        "--n-list",
        "5,10",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).starts_with("N,L,I,lnD,defect_norm,M,status\n"));
}

#[test]
fn invalid_worker_env_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), CONFIG);
    let o = Command::new(env!("CARGO_BIN_EXE_aoc"))
        .args(["sweep", "--config", &p])
        .env("AOC_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert_eq!(code(&aoc(&["sweep", "--config", &p, "--workers", "0"])), 2);
}

#[test]
fn audit_and_anderson_report() {
    let o = aoc(&[
        "audit",
        "--potential",
        "square_well",
        "--v0",
        "0.5",
        "--a",
        "1",
        "--N",
        "20",
        "--rho",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.lines().all(|l| l.starts_with("PASS ")), "{s}");
    assert!(s.contains("anderson_inequality"));

    let o = aoc(&[
        "anderson",
        "--potential",
        "square_well",
        "--v0",
        "0.1",
        "--a",
        "1",
        "--N",
        "10",
        "--rho",
        "1",
        "--json",
    ]);
    assert_eq!(code(&o), 0);
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(j["result"]["anderson_integral"].as_f64().unwrap() > 0.0);
    assert_eq!(j["result"]["m"].as_u64(), Some(10));
    assert!(j["contour"].is_null());
}

#[test]
fn spectrum_table() {
    let o = aoc(&[
        "spectrum",
        "--potential",
        "gaussian_truncated",
        "--v0",
        "-1",
        "--sigma",
        "0.5",
        "--a",
        "1.5",
        "--N",
        "4",
        "--L",
        "3",
    ]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("count below nu"));
    assert_eq!(s.lines().count(), 7);
    let o = aoc(&[
        "spectrum",
        "--potential",
        "table",
        "--abscissae",
        "-1,0,1",
        "--values",
        "0,-1,0",
        "--N",
        "3",
        "--rho",
        "1",
        "--json",
    ]);
    assert_eq!(code(&o), 0);
    let j: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(j["eigenvalues"].as_array().unwrap().len(), 3);
}
