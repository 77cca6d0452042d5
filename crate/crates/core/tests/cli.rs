use std::process::{Command, Output};

use wg_lift::mesh::read_mesh;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wg-lift"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn writes_csv_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("quad.csv");
    let out = run(&[
        "--family",
        "quad",
        "--k",
        "1",
        "--levels",
        "1..3",
        "--csv-out",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("family = quad, k = 1"));
    assert_eq!(
        table
            .lines()
            .filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit()))
            .count(),
        3
    );

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[..4], ["level", "h", "err_l2", "rate_l2"]);
    assert_eq!(header.len(), 14);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.len() == header.len()));
    assert_eq!(rows[0][3], "");
    for r in &rows[1..] {
        let rate: f64 = r[3].parse().unwrap();
        assert!(rate > 1.0, "L2 rate {rate}");
    }
}

#[test]
fn dumps_mesh_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--family",
        "mixed",
        "--levels",
        "1",
        "--dump-mesh",
        dir.path().to_str().unwrap(),
        "--dump-lambda-dims",
        "--dump-certificates",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("dim Lambda_k"));
    assert!(stdout.contains("sigma_min"));
    let file = std::fs::File::open(dir.path().join("mixed_level1.wgmesh")).unwrap();
    let mesh = read_mesh(std::io::BufReader::new(file)).unwrap();
    let cert_lines = stdout.lines().filter(|l| l.contains("sigma_min")).count();
    assert_eq!(cert_lines, mesh.num_cells());
}

#[test]
fn dimension_mismatch_is_rejected() {
    let out = run(&["--family", "quad", "--solution", "sine3d"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("for `solution`"));
}

#[test]
fn zero_degree_is_rejected() {
    let out = run(&["--family", "quad", "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("for `k`"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    let csv = dir.path().join("out.csv");
    std::fs::write(
        &cfg,
        format!(
            "family = \"quad\"\nk = 2\nlevels = \"1..2\"\ncsv_out = {:?}\n",
            csv
        ),
    )
    .unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "--k", "1"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8(out.stdout).unwrap().contains("k = 1"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
}
