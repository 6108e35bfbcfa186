use std::path::Path;
use std::process::{Command, Output};

fn cli() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hbf-experiments"));
    cmd.env_remove("HBF_OUTPUT_DIR");
    cmd
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn lists_every_scenario() {
    let o = cli().arg("list-scenarios").output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    for name in [
        "beampattern",
        "waveform",
        "convergence",
        "pareto",
        "mse_vs_snr",
        "mse_vs_ues",
        "mse_vs_antennas",
        "mse_vs_rf",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from\n{text}");
    }
}

#[test]
fn run_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, "sweep = [0.0, 10.0]\n\n[system]\nnum_ues = 1\n").unwrap();
    let out = dir.path().join("snr.csv");
    let o = cli()
        .args(["run", "mse_vs_snr", "--trials", "2", "--seed", "7", "--jobs", "1"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    for suffix in ["summary.csv", "designs.jsonl"] {
        assert!(dir.path().join(format!("snr.{suffix}")).exists(), "{suffix}");
    }
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# {"));
    assert_eq!(text.lines().count(), 2 + 2 * 2 * 2);
    assert!(text.lines().skip(2).all(|l| l.split(',').nth(1).is_some_and(|s| s == "7" || s == "8")));

    let o = cli().arg("audit").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).starts_with("PASS"));
}

#[test]
fn tampered_file_fails_audit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = cli().args(["run", "convergence", "--trials", "1"]).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut cells: Vec<String> = lines[2].split(',').map(str::to_string).collect();
    let nmse: f64 = cells[5].parse().unwrap();
    cells[5] = (nmse * 1.01).to_string();
    lines[2] = cells.join(",");
    std::fs::write(&out, lines.join("\n") + "\n").unwrap();
    let o = cli().arg("audit").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli()
        .env("HBF_OUTPUT_DIR", dir.path())
        .args(["run", "beampattern", "--trials", "1"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(Path::new(&dir.path().join("beampattern.csv")).exists());
    assert!(Path::new(&dir.path().join("beampattern.beampattern.csv")).exists());
}

#[test]
fn bad_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "trials = 3\nbogus = 1\n").unwrap();
    let out = dir.path().join("x.csv");
    let o = cli().args(["run", "waveform"]).arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));
    assert!(!out.exists());

    let o = cli().args(["run", "waveform", "--jobs", "0"]).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = cli().arg("audit").arg(dir.path().join("missing.csv")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = cli().args(["run", "nonsense"]).output().unwrap();
    assert!(!o.status.success());
}
