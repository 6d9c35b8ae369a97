use rcd_lmc::harness::{
    emit_csv, parse_config, read_csv, run_experiment, to_toml, write_saturation_tsv, RunStatus,
};

const CONFIG: &str = r#"
algorithm = ["OLMC", "RCD_O", "SVRG_U"]
h_list = [0.05, 0.025]
M = 200
N = 64
seed = 9
[target]
kind = "gaussian"
d = 4
"#;

#[test]
fn config_to_csv_round_trip() {
    let spec = parse_config(CONFIG).unwrap();
    assert_eq!(parse_config(&to_toml(&spec)).unwrap(), spec);
    let records = run_experiment(&spec).unwrap();
    assert_eq!(records.len(), 6);
    let rows: Vec<_> = records.iter().map(|r| r.row.clone()).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    emit_csv(&rows, &path).unwrap();
    assert_eq!(read_csv(&path).unwrap(), rows);
    write_saturation_tsv(&records, &path.with_extension("tsv")).unwrap();
    let tsv = std::fs::read_to_string(path.with_extension("tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 7);
    for r in &rows {
        assert_eq!(r.status, RunStatus::Ok);
        assert_eq!((r.m, r.n, r.d), (200, 64, 4));
        assert!(r.weak_error.unwrap() >= 0.0 && r.mc_stderr.unwrap() > 0.0);
        assert!(r.cost_partials > 0);
    }
}

#[test]
fn reruns_are_identical_up_to_wall_time() {
    let spec = parse_config(CONFIG).unwrap();
    let strip = |mut rows: Vec<rcd_lmc::harness::Row>| {
        rows.iter_mut().for_each(|r| r.wall_ms = 0);
        rows
    };
    let a = strip(run_experiment(&spec).unwrap().into_iter().map(|r| r.row).collect());
    let b = strip(run_experiment(&spec).unwrap().into_iter().map(|r| r.row).collect());
    assert_eq!(a, b);
}
