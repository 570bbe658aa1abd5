use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_otfs-isac");

const CONFIG: &str = r#"
[system]
carrier_freq_hz = 5.89e9
subcarrier_spacing_hz = 156250.0
num_subcarriers = 8
num_slots = 4

[target]
range_m = 20.0
speed_kmh = 80.0

[sweep]
snr_db = [0.0, 10.0]
n_lobe = [0, 2]
iterations = 4
seed = 5
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

#[test]
fn rmse_writes_identical_csv_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = run(&[
        "rmse",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = run(&[
        "rmse",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--threads",
        "3",
    ]);
    assert!(out.status.success());
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("snr_db,n_lobe,rmse_range_m,"));
}

#[test]
fn seed_override_and_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let base = run(&["rmse", "--config", cfg.to_str().unwrap()]);
    let same = run(&["rmse", "--config", cfg.to_str().unwrap(), "--seed", "5"]);
    let other = run(&["rmse", "--config", cfg.to_str().unwrap(), "--seed", "1005"]);
    assert!(base.status.success());
    assert_eq!(base.stdout, same.stdout);
    assert_ne!(base.stdout, other.stdout);
}

#[test]
fn noiseless_and_crlb_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = run(&["rmse", "--config", cfg.to_str().unwrap(), "--noiseless"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.starts_with("inf,")));

    let out = run(&["crlb", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("snr_db,crlb_range_m,crlb_velocity_mps")
    );
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn inspect_dumps_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out_dir = dir.path().join("inspect");
    let out = run(&[
        "inspect",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--n-lobe",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("direct entries      1024"));
    assert!(stdout.contains("masked entries      56"));
    for f in [
        "psi_abs.csv",
        "mask_y.csv",
        "mask_x1.csv",
        "mask_x2.csv",
        "summary.csv",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let psi = std::fs::read_to_string(out_dir.join("psi_abs.csv")).unwrap();
    assert_eq!(psi.lines().count(), 33);
    let mask = std::fs::read_to_string(out_dir.join("mask_y.csv")).unwrap();
    let ones: usize = mask
        .lines()
        .skip(1)
        .map(|l| l.split(',').filter(|v| *v == "1").count())
        .sum();
    assert_eq!(ones, 4 * 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        &CONFIG.replace("num_slots = 4", "num_slots = 1"),
    );
    let out = run(&["rmse", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("system.num_slots"));

    let missing = dir.path().join("missing.toml");
    assert_eq!(
        run(&["crlb", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(4)
    );

    let cfg = write_config(dir.path(), CONFIG);
    let out = run(&[
        "crlb",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        "/nonexistent-dir/c.csv",
    ]);
    assert_eq!(out.status.code(), Some(4));

    // target exactly on a delay tap: the Fisher matrix is undefined there
    let on_tap = CONFIG.replace("range_m = 20.0", "range_m = 0.0");
    let cfg = write_config(dir.path(), &on_tap);
    assert_eq!(
        run(&["crlb", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );

    let big = CONFIG
        .replace("num_subcarriers = 8", "num_subcarriers = 128")
        .replace("num_slots = 4", "num_slots = 64");
    let cfg = write_config(dir.path(), &big);
    let out = run(&["inspect", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "inspect",
        "--config",
        cfg.to_str().unwrap(),
        "--summary-only",
    ]);
    assert!(out.status.success());
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}
