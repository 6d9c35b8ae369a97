use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rcd-lmc"))
}

#[test]
fn bounds_prints_every_sampler() {
    let out = bin()
        .args(["bounds", "--mu", "1", "--L", "2", "--d", "10", "--H", "1", "--tau", "10"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["OLMC", "ULMC", "RCD_O", "RCD_U", "SVRG_O", "SVRG_U", "RCAD_O", "RCAD_U"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
    assert!(text.contains("d^2/eps^2"));
}

#[test]
fn run_writes_csv_and_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let csv = dir.path().join("exp.csv");
    std::fs::write(
        &cfg,
        "algorithm = [\"OLMC\", \"RCAD_O\"]\nh = 0.05\nM = 100\nN = 32\n[target]\nkind = \"gaussian\"\nd = 3\n",
    )
    .unwrap();
    let out = bin()
        .args(["--workers", "2", "run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(body.lines().count(), 3);
    assert!(body.starts_with("schema,"));
    assert!(csv.with_extension("tsv").exists());

    let again = bin()
        .args(["run", "--append", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(again.status.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 5);
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "algorithm = \"OLMC\"\nbogus = 1\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bogus"), "{err}");
    assert!(err.contains("missing required keys"), "{err}");
}

#[test]
fn unknown_suite_and_preset_are_errors() {
    let out = bin().args(["check", "--suite", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["sweep", "--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unit_suite_passes() {
    let out = bin().args(["check", "--suite", "unit"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}
