//! End-to-end checks of the command-line driver: exit codes, config
//! validation, and byte-identical artifacts for identical (config, seed).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rwre")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rwre-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn env_check_reports_and_gates() {
    let out = run(&["env-check", "--sigma2", "0.5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("kappa   = 2.772588722240"), "{text}");
    assert!(text.contains("diffusive = true"));

    // Non-diffusive family rejected when the gate is requested.
    let out = run(&["env-check", "--sigma2", "1.0", "--require-diffusive"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["env-check", "--sigma2", "1.0"]);
    assert!(out.status.success());
}

#[test]
fn config_file_errors_are_usage_errors() {
    let dir = tmp_dir("cfg");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "sigma=0.5\n").unwrap();
    let out = run(&["env-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("unknown key"));

    std::fs::write(&cfg, "n=10\nn=20\n").unwrap();
    let out = run(&["env-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Commands that simulate require a seed.
    let out = run(&["simulate", "--n", "5", "--replicas", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("seed"));
}

#[test]
fn simulate_is_byte_deterministic_and_flag_aware() {
    let dir_a = tmp_dir("sim-a");
    let dir_b = tmp_dir("sim-b");
    let common = [
        "simulate",
        "--seed",
        "9",
        "--n",
        "20",
        "--replicas",
        "40",
        "--backend",
        "gw",
    ];
    let out = run(&[&common[..], &["--out-dir", dir_a.to_str().unwrap()]].concat());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = run(&[&common[..], &["--out-dir", dir_b.to_str().unwrap()]].concat());
    assert!(out.status.success());
    let a = read(&dir_a.join("simulate.csv"));
    assert_eq!(
        a,
        read(&dir_b.join("simulate.csv")),
        "same (config, seed) must be byte-identical"
    );
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("replica,backend,n,k,r_k,z_k,l_k,flagged\n"));
    // An n = 20 run reports Z_0 = 20 on every unflagged replica row with k = 0.
    for line in text
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(3) == Some("0"))
    {
        assert!(
            line.ends_with(",1,20,40,0") || line.contains(",gw,20,0,1,20,"),
            "row {line}"
        );
    }

    // A different seed changes the artifact.
    let dir_c = tmp_dir("sim-c");
    let out = run(&[
        "simulate",
        "--seed",
        "10",
        "--n",
        "20",
        "--replicas",
        "40",
        "--backend",
        "gw",
        "--out-dir",
        dir_c.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_ne!(
        read(&dir_c.join("simulate.csv")),
        read(&dir_b.join("simulate.csv"))
    );

    // Walk backend with a tight cap reports flagged replicas instead of
    // truncating them.
    let dir_d = tmp_dir("sim-d");
    let out = run(&[
        "simulate",
        "--seed",
        "9",
        "--n",
        "20",
        "--replicas",
        "40",
        "--backend",
        "walk",
        "--gen-cap",
        "3",
        "--out-dir",
        dir_d.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(read(&dir_d.join("simulate.csv"))).unwrap();
    assert!(
        text.lines().any(|l| l.ends_with(",1")),
        "tight cap should flag some replica"
    );
}

#[test]
fn genealogy_emits_csv_and_svg_with_theory() {
    let dir = tmp_dir("gen");
    let out = run(&[
        "genealogy",
        "--seed",
        "4",
        "--n",
        "40",
        "--replicas",
        "4000",
        "--single-excursion",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = String::from_utf8(read(&dir.join("genealogy.csv"))).unwrap();
    assert!(csv.starts_with(
        "n,p,k,threshold,kind,estimate,ci_lo,ci_hi,theory,theory_se,accepted,rejected\n"
    ));
    // Single-excursion theory column comes from the closed form: at the
    // configured threshold floor(a n) it must print 0.772589.
    let row = csv
        .lines()
        .find(|l| {
            let mut parts = l.split(',');
            parts.nth(3) == Some("10") && l.contains(",tail,")
        })
        .expect("tail row at floor(a n)");
    assert!(row.contains("0.772589"), "row {row}");
    let svg = String::from_utf8(read(&dir.join("genealogy.svg"))).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline") && svg.contains("circle"));
}
