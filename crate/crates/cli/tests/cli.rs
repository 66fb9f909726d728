//! End-to-end tests of the `bimodal` binary: exit codes, stdout shape, and
//! that every file the tool writes can be read back by the library.

use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

use bimodal_core::paths::enumerate_paths;
use bimodal_core::scenario::{
    example_scenario, load_scenario, read_plane, read_results, TWO_LANE_REF_PLANE,
};

fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

static FILE_SEQ: AtomicUsize = AtomicUsize::new(0);

fn temp_path(tag: &str, ext: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("bimodal-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let seq = FILE_SEQ.fetch_add(1, Ordering::Relaxed);
    dir.join(format!("{tag}-{}-{seq}.{ext}", std::process::id()))
}

fn bimodal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bimodal"))
        .args(args)
        .output()
        .expect("binary must launch")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn validate_accepts_the_bundled_example() {
    let sc = repo_path("scenarios/example.json");
    let out = bimodal(&["validate", "--scenario", sc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("ok:"), "stdout: {text}");
    assert!(text.contains("4 nodes"), "stdout: {text}");
}

#[test]
fn validate_lists_violations_and_exits_1() {
    let bad = temp_path("bad-demand", "json");
    let text = std::fs::read_to_string(repo_path("scenarios/example.json")).unwrap();
    std::fs::write(&bad, text.replace("\"demand\": 2000.0", "\"demand\": -7.0")).unwrap();
    let out = bimodal(&["validate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("demand-negative"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn solve_writes_a_row_the_library_reads_back() {
    let sc = repo_path("scenarios/example.json");
    let csv = temp_path("solve", "csv");
    let out = bimodal(&[
        "solve",
        "--scenario",
        sc.to_str().unwrap(),
        "--gamma",
        "0.5",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(
        stdout(&out).contains("gamma 0.500 [bimodal]"),
        "stdout: {}",
        stdout(&out)
    );

    let rows = read_results(&csv).unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row.mode, "bimodal");
    assert_eq!(row.gamma, 0.5);
    assert!(row.kkt_residual <= 1e-6);
    let delivered = row.truck_parcels_per_hour + row.drone_parcels_per_hour;
    let demand = example_scenario().network.total_demand();
    assert!(
        (delivered - demand).abs() < 1e-3,
        "delivered {delivered} of {demand}"
    );
}

#[test]
fn sweep_keeps_rows_in_input_order() {
    let sc = repo_path("scenarios/example.json");
    let csv = temp_path("sweep", "csv");
    let out = bimodal(&[
        "sweep",
        "--scenario",
        sc.to_str().unwrap(),
        "--gammas",
        "1,0,0.5",
        "--jobs",
        "2",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let gammas: Vec<f64> = read_results(&csv)
        .unwrap()
        .iter()
        .map(|r| r.gamma)
        .collect();
    assert_eq!(gammas, vec![1.0, 0.0, 0.5]);
}

#[test]
fn paths_csv_matches_the_enumeration() {
    let sc = repo_path("scenarios/example.json");
    let csv = temp_path("paths", "csv");
    let out = bimodal(&[
        "paths",
        "--scenario",
        sc.to_str().unwrap(),
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let expected = enumerate_paths(&example_scenario().network, 8, None).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).filter(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), expected.len());
    assert!(stdout(&out).contains(&format!("{} routes within 8 edges", expected.len())));
}

#[test]
fn fit_reproduces_the_bundled_calibration() {
    let samples = repo_path("data/latency/two_lane_samples.csv");
    let plane_path = temp_path("plane", "json");
    let out = bimodal(&[
        "fit",
        "--samples",
        samples.to_str().unwrap(),
        "--output",
        plane_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("rmse"), "stdout: {}", stdout(&out));
    let plane = read_plane(&plane_path).unwrap();
    assert_eq!(
        plane.omega, TWO_LANE_REF_PLANE.omega,
        "fit must be deterministic"
    );
}

#[test]
fn import_writes_a_loadable_scenario() {
    let out_path = temp_path("imported", "json");
    let out = bimodal(&[
        "import-tntp",
        "--net",
        repo_path("data/tntp/SiouxFalls_net.tntp").to_str().unwrap(),
        "--nodes",
        repo_path("data/tntp/SiouxFalls_node.tntp")
            .to_str()
            .unwrap(),
        "--flows",
        repo_path("data/tntp/SiouxFalls_flow.tntp")
            .to_str()
            .unwrap(),
        "--output",
        out_path.to_str().unwrap(),
        "--name",
        "sioux-falls",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(
        stdout(&out).contains("24 nodes, 76 road edges (24 three-lane)"),
        "stdout: {}",
        stdout(&out)
    );
    let sc = load_scenario(&out_path).unwrap();
    assert_eq!(sc.name, "sioux-falls");
    assert_eq!(sc.network.aerial_edges.len(), 23);
}

#[test]
fn missing_scenario_file_exits_3() {
    let out = bimodal(&[
        "solve",
        "--scenario",
        "/no/such/file.json",
        "--gamma",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
}

#[test]
fn unsupported_schema_exits_3() {
    let path = temp_path("schema", "json");
    let text = std::fs::read_to_string(repo_path("scenarios/example.json")).unwrap();
    std::fs::write(&path, text.replace("\"schema\": 1", "\"schema\": 99")).unwrap();
    let out = bimodal(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("schema"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_mode_is_a_usage_error() {
    let sc = repo_path("scenarios/example.json");
    let out = bimodal(&[
        "solve",
        "--scenario",
        sc.to_str().unwrap(),
        "--gamma",
        "0.5",
        "--mode",
        "hovercraft",
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(
        stderr(&out).contains("hovercraft"),
        "stderr: {}",
        stderr(&out)
    );
}
