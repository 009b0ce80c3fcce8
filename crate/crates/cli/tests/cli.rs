use std::path::Path;
use std::process::{Command, Output};

use nematic_core::mesh::{unit_cube_mesh, write_gmsh};

fn nematic(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nematic"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

/// Values of a one-component point-data array in a legacy VTK file.
fn vtk_scalars(text: &str, name: &str, n: usize) -> Vec<f64> {
    let lines: Vec<&str> = text.lines().collect();
    let at = lines
        .iter()
        .position(|l| *l == format!("SCALARS {name} double 1"))
        .unwrap_or_else(|| panic!("no array {name}"));
    lines[at + 2..at + 2 + n]
        .iter()
        .map(|v| v.parse().unwrap())
        .collect()
}

fn report_value(report: &str, key: &str) -> f64 {
    let line = report
        .lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no {key} in report"));
    line[key.len()..].trim().parse().unwrap()
}

#[test]
fn ldg_solve_writes_report_and_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let o = nematic(
        dir.path(),
        &["solve", "--set", "domain.n=2", "--set", "boundary.s=0.3"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read(dir.path().join("report.txt"));
    assert!(report.contains("status: converged"));
    assert!(report_value(&report, "final residual:") < 1e-10);
    let vtk = read(dir.path().join("solution.vtk"));
    assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
    assert!(vtk.contains("DATASET UNSTRUCTURED_GRID"));
    for name in ["q1", "q2", "q3", "q4", "q5", "s", "margin"] {
        let v = vtk_scalars(&vtk, name, 27);
        assert!(v.iter().all(|x| x.is_finite()), "{name}");
    }
    assert!(vtk.contains("SCALARS eigenvalues double 3"));
    assert!(vtk.contains("VECTORS director double"));
    // the boundary keeps s = 0.3; the interior moves toward the bulk minimiser
    let s = vtk_scalars(&vtk, "s", 27);
    assert!(s.iter().all(|&v| v > 0.3 - 1e-12 && v < 1.0));
}

#[test]
fn bm_solve_stays_physical() {
    let dir = tempfile::tempdir().unwrap();
    let o = nematic(
        dir.path(),
        &["solve", "--set", "domain.n=2", "--set", "potential=bm"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read(dir.path().join("report.txt"));
    assert!(report.contains("status: converged"));
    assert!(report_value(&report, "final margin:") > 0.0);
    let margins = vtk_scalars(&read(dir.path().join("solution.vtk")), "margin", 27);
    assert!(margins.iter().all(|&m| m > 0.0));
}

#[test]
fn nonelliptic_constants_are_refused_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let o = nematic(
        dir.path(),
        &["solve", "--set", "domain.n=2", "--set", "elastic.l3=2"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("ellipticity"));
    let o = nematic(
        dir.path(),
        &[
            "--allow-nonelliptic",
            "solve",
            "--set",
            "domain.n=2",
            "--set",
            "elastic.l3=2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let o = nematic(dir.path(), &["solve", "--set", "bogus=1"]);
    assert_eq!(code(&o), 2);
    let o = nematic(dir.path(), &["--config", "/nonexistent/run.cfg", "solve"]);
    assert_eq!(code(&o), 2);
    let o = nematic(
        dir.path(),
        &[
            "solve",
            "--set",
            "domain.n=2",
            "--set",
            "newton.max_iters=1",
        ],
    );
    assert_eq!(code(&o), 3);
    assert!(read(dir.path().join("report.txt")).contains("status: failed"));
    let o = nematic(
        dir.path(),
        &[
            "solve",
            "--set",
            "domain.n=2",
            "--set",
            "potential=bm",
            "--set",
            "boundary.s=1.2",
        ],
    );
    assert_eq!(code(&o), 4);
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# twisted BM run\ndomain.n = 3\npotential = bm\nboundary = twisted\nboundary.s = 0.5 # order\n\
         output.report = twisted.txt\noutput.vtk = twisted.vtk\n",
    )
    .unwrap();
    let o = nematic(
        dir.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "solve",
            "--set",
            "domain.n=2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read(dir.path().join("twisted.txt"));
    assert!(report.contains("UnitCube(2)"));
    assert!(report.contains("Twisted"));
    assert!(dir.path().join("twisted.vtk").exists());
}

#[test]
fn gmsh_domain() {
    let dir = tempfile::tempdir().unwrap();
    let msh = dir.path().join("cube.msh");
    write_gmsh(&unit_cube_mesh(2).unwrap(), &msh).unwrap();
    let o = nematic(
        dir.path(),
        &["solve", "--set", &format!("domain.gmsh={}", msh.display())],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(read(dir.path().join("report.txt")).contains("27 vertices"));
    let o = nematic(
        dir.path(),
        &[
            "solve",
            "--set",
            "domain.n=2",
            "--set",
            &format!("domain.gmsh={}", msh.display()),
        ],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn potential_table_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = nematic(
        dir.path(),
        &[
            "potential-table",
            "--s-min",
            "-0.4",
            "--s-max",
            "0.4",
            "--points",
            "3",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = read(dir.path().join("potential_table.csv"));
    assert_eq!(
        text.lines().next().unwrap(),
        "s,lambda_min,f,grad_norm,hess_min_eig,hess_max_eig"
    );
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    let zero = &rows[1];
    assert_eq!(zero[0], 0.0);
    assert!((zero[2] + (4.0 * std::f64::consts::PI).ln()).abs() < 1e-10);
    assert!(zero[3].abs() < 1e-10);
    assert!((zero[4] - 7.5).abs() < 1e-8 && (zero[5] - 7.5).abs() < 1e-8);
    // 17 significant digits
    let mantissa = text.lines().nth(1).unwrap().split(',').next().unwrap();
    assert_eq!(
        mantissa
            .split('e')
            .next()
            .unwrap()
            .trim_start_matches('-')
            .len(),
        18
    );
}

#[test]
fn potential_table_blows_up_toward_the_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let o = nematic(
        dir.path(),
        &[
            "potential-table",
            "--s-min",
            "0",
            "--s-max",
            "0.99",
            "--points",
            "12",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&read(dir.path().join("potential_table.csv")));
    for w in rows.windows(2) {
        assert!(w[1][2] > w[0][2], "f not increasing at s = {}", w[1][0]);
        assert!(
            w[1][3] > w[0][3],
            "|Lambda| not increasing at s = {}",
            w[1][0]
        );
    }
}

#[test]
fn potential_table_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let o = nematic(dir.path(), &["potential-table", "--points", "0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        read(dir.path().join("potential_table.csv")),
        "s,lambda_min,f,grad_norm,hess_min_eig,hess_max_eig\n"
    );
    let o = nematic(
        dir.path(),
        &["potential-table", "--s-max", "1.0", "--points", "2"],
    );
    assert_eq!(code(&o), 4);
}

#[test]
fn infsup_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = nematic(dir.path(), &["infsup", "--levels", "2,3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = read(dir.path().join("infsup.csv"));
    assert_eq!(text.lines().next().unwrap(), "n,h,beta_h");
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[2] > 0.0));
}

#[test]
fn convergence_csv_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "convergence",
        "--levels",
        "2,4",
        "--set",
        "newton.kantorovich=true",
    ];
    let oa = nematic(a.path(), &[&["--deterministic"][..], &args].concat());
    let ob = nematic(b.path(), &args);
    assert_eq!(code(&oa), 0, "{}", stderr(&oa));
    assert_eq!(code(&ob), 0, "{}", stderr(&ob));
    let ta = read(a.path().join("convergence.csv"));
    assert_eq!(ta, read(b.path().join("convergence.csv")));
    let mut lines = ta.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,h_max,dofs,h1_error,l2_error,observed_order_h1,observed_order_l2,newton_iters,h_star"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[5], "");
    let second: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(second[5].parse::<f64>().unwrap() > 0.5);
    assert!(second[8].parse::<f64>().unwrap() > 0.0);
}
