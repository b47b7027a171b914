use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pnpqkd_cli::{Opts, RunConfig};

fn pnpqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnpqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scan_writes_one_row_per_delay() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let res = pnpqkd(&[
        "scan",
        "--seed",
        "7",
        "--bits",
        "5000",
        "--mean-photon",
        "0.1",
        "--scan-range-ns",
        "200",
        "--scan-step-ns",
        "10",
        "--output",
        path_arg(&out),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 42);
    assert_eq!(lines[0], "delay_ns,qber,std_error,n_sifted,n_errors");
    assert!(lines[1].starts_with("-200,"));
    assert!(lines[41].starts_with("200,"));
}

#[test]
fn same_command_line_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let res = pnpqkd(&[
            "scan",
            "--seed",
            "3",
            "--bits",
            "4000",
            "--scan-range-ns",
            "100",
            "--threads",
            threads,
            "--output",
            path_arg(&out),
        ]);
        assert_eq!(res.status.code(), Some(0));
        fs::read(out).unwrap()
    };
    let first = run("a.csv", "1");
    assert_eq!(first, run("b.csv", "1"));
    assert_eq!(first, run("c.csv", "3"));

    let session = |name: &str| {
        let out = dir.path().join(name);
        let res = pnpqkd(&[
            "session",
            "--seed",
            "5",
            "--bits",
            "3000",
            "--output",
            path_arg(&out),
        ]);
        assert_eq!(res.status.code(), Some(0));
        (res.stdout, fs::read(out).unwrap())
    };
    assert_eq!(session("s1.csv"), session("s2.csv"));
}

#[test]
fn session_prints_estimate_and_exports_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("records.csv");
    let res = pnpqkd(&["session", "--bits", "2000", "--output", path_arg(&out)]);
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.starts_with("qber="), "{stdout}");
    assert!(stdout.contains("n_sifted="));
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("bit_index,alice_basis,alice_bit,bob_basis,click_d0,click_d1")
    );
    assert_eq!(text.lines().count(), 2001);
}

#[test]
fn validation_errors_exit_one() {
    let res = pnpqkd(&["session", "--bits", "0"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bits"));
    for args in [
        &["session", "--no-such-flag"][..],
        &["teleport"][..],
        &["scan", "--randomizer", "sometimes"][..],
        &["session", "--dark-prob", "1.5"][..],
        &[][..],
    ] {
        let res = pnpqkd(args);
        assert_eq!(res.status.code(), Some(1), "{args:?}");
        assert!(!res.stderr.is_empty());
    }
}

#[test]
fn unknown_flag_prints_usage() {
    let res = pnpqkd(&["scan", "--bogus"]);
    assert!(String::from_utf8_lossy(&res.stderr).contains("Usage"));
}

#[test]
fn help_exits_zero() {
    let res = pnpqkd(&["--help"]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8(res.stdout).unwrap();
    for sub in ["session", "scan", "verify-uniformity", "density"] {
        assert!(text.contains(sub));
    }
}

#[test]
fn unwritable_output_exits_two() {
    let res = pnpqkd(&["density", "--output", "/nonexistent-dir/rho.csv"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("/nonexistent-dir/rho.csv"));
    let res = pnpqkd(&["session", "--config", "/nonexistent-dir/run.conf"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn density_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rho.csv");
    let res = pnpqkd(&[
        "density",
        "--mean-photon",
        "0.1",
        "--phase-dist",
        "fixed:0",
        "--n-max",
        "3",
        "--output",
        path_arg(&out),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 17);
    assert_eq!(lines[0], "n,m,re,im");
    let rho01: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
    assert!((rho01 - 0.286_134_715_313_955_2).abs() < 1e-12);
}

#[test]
fn config_file_and_flags_resolve_identically() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        "# 41-point delay scan\nseed = 7\nbits = 843000\nmean_photon = 0.1\n\
         scan_range_ns = 200\nscan_step_ns = 10\nrandomizer = on\ndelay_ns = -20\n\
         polarization = 0.3\nroundtrip_ns = 10\nefficiency = 0.2\n",
    )
    .unwrap();
    let from_file = RunConfig::resolve(Opts {
        config: Some(conf.clone()),
        ..Default::default()
    })
    .unwrap();

    let parse = |args: &[&str]| {
        use clap::Parser;
        let cli = pnpqkd_cli::Cli::try_parse_from(args).unwrap();
        match cli.command {
            pnpqkd_cli::Command::Scan(o) => RunConfig::resolve(o).unwrap(),
            _ => unreachable!(),
        }
    };
    let from_flags = parse(&[
        "pnpqkd",
        "scan",
        "--seed",
        "7",
        "--bits",
        "843000",
        "--mean-photon",
        "0.1",
        "--scan-range-ns",
        "200",
        "--scan-step-ns",
        "10",
        "--randomizer",
        "on",
        "--delay-ns",
        "-20",
        "--polarization",
        "0.3",
        "--roundtrip-ns",
        "10",
        "--efficiency",
        "0.2",
    ]);
    assert_eq!(from_file, from_flags);

    let overridden = parse(&["pnpqkd", "scan", "--config", path_arg(&conf), "--seed", "8"]);
    assert_eq!(overridden.session.seed, 8);
    assert_eq!(overridden.session.timing.delay_ns, -20.0);
}

#[test]
fn bad_config_file_exits_one_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    fs::write(&conf, "seed = 1\nfiber_km = far\n").unwrap();
    let res = pnpqkd(&["session", "--config", path_arg(&conf)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bad.conf:2"));
}

#[test]
fn uniformity_audit_of_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let codes = dir.path().join("codes.txt");
    let uniform: String = (0..4096 * 2).map(|c| format!("{}\n", c % 4096)).collect();
    fs::write(&codes, uniform).unwrap();
    let res = pnpqkd(&["verify-uniformity", "--pattern-file", path_arg(&codes)]);
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stdout).contains("statistic=0.000"));

    fs::write(&codes, "1\n2\n").unwrap();
    let res = pnpqkd(&["verify-uniformity", "--pattern-file", path_arg(&codes)]);
    assert_eq!(
        res.status.code(),
        Some(1),
        "undersampled input is a validation error"
    );

    fs::write(&codes, "9999\n").unwrap();
    let res = pnpqkd(&["verify-uniformity", "--pattern-file", path_arg(&codes)]);
    assert_eq!(res.status.code(), Some(1));
}
