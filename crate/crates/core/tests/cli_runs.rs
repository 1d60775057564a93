use std::fs;
use std::path::Path;
use std::process::Command;

use amipdg::cli::{parse_config, run, RunSummary};

fn amipdg(args: &[&str], out: &Path) -> String {
    let output = Command::new(env!("CARGO_BIN_EXE_amipdg"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    String::from_utf8(output.stdout).unwrap()
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn single_iteration_gives_single_history_row() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = amipdg(&["--mode", "adaptive", "--M", "1", "--max-iter", "1"], dir.path());
    assert!(stdout.contains("iter=0"));
    let rows = data_rows(&dir.path().join("history.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "144");
    assert_eq!(data_rows(&dir.path().join("indicators.csv")).len(), 6);
}

#[test]
fn table1_smoke() {
    let dir = tempfile::tempdir().unwrap();
    amipdg(&["--mode", "table1", "--M", "1"], dir.path());
    let rows = data_rows(&dir.path().join("table1.csv"));
    let alphas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(alphas, [1.0, 10.0, 100.0, 500.0, 1000.0]);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() >= 1.0));
}

#[test]
fn uniform_mode_reports_rate() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = amipdg(&["--mode", "uniform", "--M", "1", "--max-iter", "2", "--dump-system"], dir.path());
    assert!(stdout.contains("slope"));
    let rows = data_rows(&dir.path().join("uniform.csv"));
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["1", "2"]);
    let mtx = fs::read_to_string(dir.path().join("system.mtx")).unwrap();
    assert!(mtx.starts_with("%%MatrixMarket matrix coordinate real general"));
    assert!(rate_slope(&dir.path().join("rate.csv")).is_some());
}

fn rate_slope(path: &Path) -> Option<f64> {
    data_rows(path).first().map(|r| r[1].parse().unwrap())
}

#[test]
fn invalid_arguments_fail() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["--theta=1.5", "--alpha=-1", "--problem=example3", "--M=0"] {
        let out = Command::new(env!("CARGO_BIN_EXE_amipdg")).arg(bad).arg("--out").arg(dir.path()).output().unwrap();
        assert!(!out.status.success(), "{bad}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn adaptive_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--problem", "example2", "--M", "1", "--max-iter", "5", "--theta", "0.5"];
    amipdg(&args, a.path());
    amipdg(&args, b.path());
    for file in ["history.csv", "indicators.csv", "rate.csv"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

const GOLDEN_GEOMETRY: &str = "# vtk DataFile Version 3.0
iteration 0
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 8 double
0 0 0
1 0 0
0 1 0
1 1 0
0 0 1
1 0 1
0 1 1
1 1 1
CELLS 6 30
4 0 1 3 7
4 0 1 7 5
4 0 2 7 3
4 0 2 6 7
4 0 4 5 7
4 0 4 7 6
CELL_TYPES 6
10
10
10
10
10
10
CELL_DATA 6
SCALARS eta2 double 1
LOOKUP_TABLE default
";

#[test]
fn vtk_output_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_config(["amipdg", "--M", "1", "--max-iter", "1", "--vtk-every", "1", "--out", dir.path().to_str().unwrap()]).unwrap();
    let RunSummary::Adaptive { history, .. } = run(&config).unwrap() else { panic!("expected adaptive run") };
    let text = fs::read_to_string(dir.path().join("mesh_000.vtk")).unwrap();
    let tail = text.strip_prefix(GOLDEN_GEOMETRY).expect("geometry section differs");
    let eta2: Vec<f64> = tail.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(eta2.len(), 6);
    let eta = eta2.iter().sum::<f64>().sqrt();
    assert!((eta - history.records[0].eta).abs() <= 1e-12 * eta);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "problem = \"example2\"\ntheta = 0.3\nM = 3\nboundary_jumps = false\n").unwrap();
    let config = parse_config(["amipdg", "--config", path.to_str().unwrap(), "--theta", "0.6"]).unwrap();
    assert_eq!(config.problem.to_string(), "example2");
    assert_eq!(config.m, 3);
    assert_eq!(config.theta, 0.6);
    assert!(!config.boundary_jumps);
}
