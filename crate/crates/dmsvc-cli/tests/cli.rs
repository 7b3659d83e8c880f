//! Black-box tests against the built `dmsvc` binary.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn dmsvc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dmsvc"))
}

fn repo_config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run_with_stdin(mut cmd: Command, input: &str) -> Output {
    let mut child = cmd
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn help_exits_cleanly_and_bad_flags_do_not() {
    let ok = dmsvc().arg("--help").output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = dmsvc().arg("--definitely-not-a-flag").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn se_table_contains_the_two_fold_row() {
    let out = dmsvc()
        .args(["se-table", "--n", "138", "--c", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let flagship = text
        .lines()
        .find(|l| l.starts_with("1,5,1,16,"))
        .expect("(1,5,1) 16-QAM row");
    assert!(flagship.ends_with(",2.00000e0"), "{flagship}");
}

#[test]
fn validation_failures_name_the_invariant_and_exit_2() {
    let out = dmsvc()
        .args([
            "simulate",
            "--config",
            &repo_config("decoder_comparison.toml"),
            "--set",
            "l=3",
            "--snr",
            "0",
            "--trials",
            "5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("n mod l"), "{stderr}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let out = dmsvc()
        .args([
            "simulate",
            "--config",
            &repo_config("decoder_comparison.toml"),
            "--set",
            "bogus=1",
            "--snr",
            "0",
            "--trials",
            "5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn encode_decode_round_trips_through_the_pipe() {
    // decoder_comparison config: 22-bit packets, 6 hex digits, two zero pad bits
    let hex = "2e08c0";
    let mut cmd = dmsvc();
    cmd.args([
        "encode",
        "--config",
        &repo_config("decoder_comparison.toml"),
    ]);
    let encoded = run_with_stdin(cmd, hex);
    assert_eq!(encoded.status.code(), Some(0), "{encoded:?}");
    let csv = String::from_utf8(encoded.stdout).unwrap();
    assert!(csv.starts_with("re,im\n"));
    assert_eq!(csv.lines().count(), 81); // header + one row per subcarrier

    let mut cmd = dmsvc();
    cmd.args([
        "decode",
        "--config",
        &repo_config("decoder_comparison.toml"),
    ]);
    let decoded = run_with_stdin(cmd, &csv);
    assert_eq!(decoded.status.code(), Some(0), "{decoded:?}");
    assert_eq!(String::from_utf8(decoded.stdout).unwrap().trim(), hex);
}

#[test]
fn malformed_stdin_is_a_runtime_failure() {
    let mut cmd = dmsvc();
    cmd.args([
        "encode",
        "--config",
        &repo_config("decoder_comparison.toml"),
    ]);
    let out = run_with_stdin(cmd, "zz not hex");
    assert_eq!(out.status.code(), Some(3));

    let mut cmd = dmsvc();
    cmd.args([
        "decode",
        "--config",
        &repo_config("decoder_comparison.toml"),
    ]);
    let out = run_with_stdin(cmd, "re,im\n1.0\n");
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_is_byte_deterministic_across_runs_and_threads() {
    let args = [
        "simulate",
        "--config",
        &repo_config("decoder_comparison.toml"),
        "--snr",
        "-2,0",
        "--trials",
        "200",
        "--seed",
        "11",
    ];
    let a = dmsvc().args(args).output().unwrap();
    let b = dmsvc().args(args).output().unwrap();
    let c = dmsvc()
        .args(args)
        .args(["--threads", "1"])
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("axis,value,snr_db,trials,errors,bler,ci_low,ci_high"));
}

#[test]
fn codebook_export_and_info_round_trip() {
    let dir = std::env::temp_dir().join(format!("dmsvc-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("codebook.bin");
    let out = dmsvc()
        .args([
            "codebook",
            "export",
            "--config",
            &repo_config("decoder_comparison.toml"),
            "--out",
            path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let info = dmsvc()
        .args(["codebook", "info", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(info.status.code(), Some(0));
    let text = String::from_utf8(info.stdout).unwrap();
    assert_eq!(text.trim(), "m=80 n=262 k_total=3 seed=7");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn check_ofdm_reports_a_tiny_error() {
    let out = dmsvc()
        .args(["check-ofdm", "--m", "64", "--taps", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let value: f64 = text
        .split_whitespace()
        .find(|tok| tok.contains("e-"))
        .and_then(|tok| tok.trim_end_matches(',').parse().ok())
        .expect("an error magnitude in the output");
    assert!(value < 1e-10, "{text}");
}

#[test]
fn every_shipped_config_validates_and_runs() {
    for name in [
        "alpha_sweep.toml",
        "bler_vs_snr.toml",
        "block_shapes.toml",
        "decoder_comparison.toml",
    ] {
        let out = dmsvc()
            .args([
                "simulate",
                "--config",
                &repo_config(name),
                "--snr",
                "200",
                "--trials",
                "10",
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{name}: {out:?}");
    }
}

#[test]
fn alpha_and_param_sweeps_emit_their_axes() {
    let out = dmsvc()
        .args([
            "alpha-sweep",
            "--config",
            &repo_config("alpha_sweep.toml"),
            "--alphas",
            "0.3,0.64",
            "--snr",
            "2",
            "--trials",
            "50",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("alpha,3.00000e-1,")));

    let out = dmsvc()
        .args([
            "param-sweep",
            "--config",
            &repo_config("block_shapes.toml"),
            "--shapes",
            "2:1,3:2",
            "--snr",
            "0",
            "--trials",
            "50",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("l_ks,L2Ks1,")));
    assert!(text.lines().any(|l| l.starts_with("l_ks,L3Ks2,")));
}
