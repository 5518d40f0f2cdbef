use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use owc_cellsim::ScalarGrid;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_owc-cellsim"))
        .args(args)
        .current_dir(dir)
        .env("OWC_THREADS", "1")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_map(path: &Path) -> ScalarGrid {
    ScalarGrid::from_csv(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in ["illumination", "snr", "sinr", "gain", "report"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}

#[test]
fn illumination_calibrates_to_requested_minimum() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["--out", "maps", "illumination", "--calibrate", "400"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let map = read_map(&tmp.path().join("maps/illumination_lux.csv"));
    assert_eq!((map.nx, map.ny), (16, 32));
    let min = map.values.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((min - 400.0).abs() < 1e-5, "{min}");
}

#[test]
fn snr_respects_grid_step_and_combining() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &["--out", "maps", "--grid-step", "0.5", "snr", "--serving", "pico", "--combining", "sc"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let map = read_map(&tmp.path().join("maps/snr_pico_sc.csv"));
    assert_eq!((map.nx, map.ny, map.step), (8, 16, 0.5));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("quantity: snr_db") && stdout.contains("coverage >="));
}

#[test]
fn sinr_and_gain_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &["--out", "maps", "--grid-step", "1", "sinr", "--serving", "atto", "--interfering", "pico,micro"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("maps/sinr_atto_vs_micro-pico_mrc.csv").exists());
    let o = run(tmp.path(), &["--out", "maps", "--grid-step", "1", "gain", "--serving", "micro"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gain = read_map(&tmp.path().join("maps/gain_micro.csv"));
    assert!(gain.values.iter().all(|&g| (0.0..=8.46).contains(&g)));
}

#[test]
fn config_file_overrides_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("s.toml"),
        "[run]\ngrid_step = 1.0\noutput_dir = \"custom\"\nserving = \"micro\"\n",
    )
    .unwrap();
    let o = run(tmp.path(), &["--config", "s.toml", "snr"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let map = read_map(&tmp.path().join("custom/snr_micro_mrc.csv"));
    assert_eq!((map.nx, map.ny), (4, 8));
}

#[test]
fn report_writes_every_map() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["--out", "r", "--grid-step", "1", "report"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(tmp.path().join("r"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 20);
    for n in [
        "illumination_lux.csv",
        "snr_micro_sc.csv",
        "snr_atto_mrc.csv",
        "gain_pico.csv",
        "sinr_micro_vs_pico-atto_mrc.csv",
        "sinr_pico_vs_micro_mrc.csv",
        "summary.txt",
    ] {
        assert!(names.contains(&n.to_string()), "{n}");
    }
}

fn assert_error(o: &Output, code: &str, exit: i32) {
    let err = stderr(o);
    assert_eq!(o.status.code(), Some(exit), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("{code}: ")), "{err}");
}

#[test]
fn errors_are_single_line_with_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_error(&run(tmp.path(), &["--bogus"]), "E_USAGE", 2);
    assert_error(&run(tmp.path(), &["snr", "--serving", "femto"]), "E_USAGE", 2);
    assert_error(&run(tmp.path(), &["sinr", "--serving", "pico", "--interfering", "pico"]), "E_USAGE", 2);
    assert_error(&run(tmp.path(), &["sinr"]), "E_USAGE", 2);
    assert_error(&run(tmp.path(), &["--config", "missing.toml", "snr"]), "E_IO", 4);

    fs::write(tmp.path().join("bad.toml"), "[noise.pico]\nbandwidth = -1.0\n").unwrap();
    let o = run(tmp.path(), &["--config", "bad.toml", "snr"]);
    assert_error(&o, "E_CONFIG", 3);
    assert!(stderr(&o).contains("noise.pico.bandwidth"));

    fs::write(tmp.path().join("typo.toml"), "[room]\nwidht_x = 4.0\n").unwrap();
    assert_error(&run(tmp.path(), &["--config", "typo.toml", "snr"]), "E_CONFIG", 3);
    assert_error(&run(tmp.path(), &["--grid-step", "-1", "snr"]), "E_CONFIG", 3);

    let o = Command::new(env!("CARGO_BIN_EXE_owc-cellsim"))
        .args(["illumination"])
        .current_dir(tmp.path())
        .env("OWC_THREADS", "many")
        .output()
        .unwrap();
    assert_error(&o, "E_USAGE", 2);
}
