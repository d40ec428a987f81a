//! CLI behavior: exit codes, config policing, output writing.

use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_twodos")
}

#[test]
fn validate_exits_zero_and_prints_pass_lines() {
    let out = Command::new(bin())
        .args(["validate", "--seed", "3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS:")).count(), 3);
}

#[test]
fn bad_config_reports_field_and_exits_nonzero() {
    let dir = std::env::temp_dir().join("twodos-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "mode = ber\nmystery_knob = 1\n").unwrap();
    let out = Command::new(bin())
        .args(["ber", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("mystery_knob"), "stderr: {err}");
}

#[test]
fn mode_subcommand_mismatch_is_rejected() {
    let dir = std::env::temp_dir().join("twodos-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("mode.cfg");
    std::fs::write(
        &cfg,
        "mode = ber\nn = 120\ndv = 3\ndc = 6\nrows = 10\ncols = 12\nsigma2 = 0.01\n",
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["threshold", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn ber_writes_csv_with_header_to_out_path() {
    let dir = std::env::temp_dir().join("twodos-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("ok.cfg");
    std::fs::write(
        &cfg,
        "mode = ber\nn = 120\ndv = 3\ndc = 6\nrows = 10\ncols = 12\nsigma2 = 0.000001\n\
         max_iters = 2\nmax_codewords = 2\nseed = 4\n",
    )
    .unwrap();
    let out_path = dir.join("result.csv");
    let out = Command::new(bin())
        .args([
            "ber",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("snr_db,sigma2,max_iters,codewords_run,bit_errors,ber,frame_errors,wall_time\n"));
    assert_eq!(csv.lines().count(), 2);
}
