use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cornerflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cornerflow")).current_dir(dir).args(args).output().expect("binary runs")
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn rates_on_default_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = cornerflow(dir.path(), &["rates", "--shape", "disk", "--sweep", "default", "--d-rule", "eps", "--out", "rates.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&dir.path().join("rates.csv"));
    assert_eq!(r[0].join(","), "epsilon,d_eps,n_holes,residual_l2,bound,ratio,f_l1linf,wall_ms");
    assert!(r.len() >= 5);
    for row in &r[1..] {
        let ratio: f64 = row[5].parse().unwrap();
        assert!(ratio.is_finite() && ratio > 0.0);
    }
    let m = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(m.contains("status = ok") && m.contains("sweep_ms") && m.contains("d_rule = eps"));
}

#[test]
fn rates_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sweep.txt"), "# eps d_eps\n0.2 0.04\n0.1, 0.2\n").unwrap();
    let a = cornerflow(dir.path(), &["--threads", "1", "rates", "--shape", "square", "--sweep", "sweep.txt", "--out", "a.csv"]);
    let b = cornerflow(dir.path(), &["--threads", "3", "rates", "--shape", "square", "--sweep", "sweep.txt", "--out", "b.csv"]);
    assert!(a.status.success() && b.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let strip = |p: &str| rows(&dir.path().join(p)).into_iter().map(|mut r| {
        r.pop();
        r
    }).collect::<Vec<_>>();
    let (ra, rb) = (strip("a.csv"), strip("b.csv"));
    assert_eq!(ra.len(), 3);
    assert_eq!(ra, rb);
}

#[test]
fn simulate_rejects_support_near_segment() {
    let dir = tempfile::tempdir().unwrap();
    let out = cornerflow(
        dir.path(),
        &["simulate", "--shape", "square", "--eps", "0.2", "--deps", "0.04", "--field", "bump:0.5,0.4,0.2", "--out", "traj.csv"],
    );
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0.3"));
    assert!(!dir.path().join("traj.csv").exists());
    let m = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(m.contains("status = error") && m.contains("category = simulation"));
}

#[test]
fn simulate_writes_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "command = simulate\nshape = square\neps = 0.2\ndeps = 0.04\nspacing = 0.05\nt_end = 0.1\ndt = 0.05\n").unwrap();
    let out = cornerflow(dir.path(), &["--config", "run.cfg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&dir.path().join("traj.csv"));
    assert_eq!(r[0].join(","), "t,seed_id,x_plane,y_plane,x_perf,y_perf,gap");
    let t: Vec<f64> = r[1..].iter().map(|row| row[0].parse().unwrap()).collect();
    assert_eq!(t[0], 0.0);
    assert_eq!(*t.last().unwrap(), 0.1);
    assert!(r[1..].iter().filter(|row| row[0] == "0").all(|row| row[6] == "0"));
}

#[test]
fn conformal_probe_on_square() {
    let dir = tempfile::tempdir().unwrap();
    let out = cornerflow(dir.path(), &["conformal-probe", "--shape", "square", "--corner", "1", "--out", "probe.csv"]);
    assert!(out.status.success());
    let r = rows(&dir.path().join("probe.csv"));
    assert_eq!(r[0].join(","), "r,|T'|,predicted,fitted_running");
    let rs: Vec<f64> = r[1..].iter().map(|row| row[0].parse().unwrap()).collect();
    assert!(rs.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(r[1][3], "");
    let last: f64 = r.last().unwrap()[3].parse().unwrap();
    assert!((last + 1.0 / 3.0).abs() < 0.02);
}

#[test]
fn cell_table_per_hole() {
    let dir = tempfile::tempdir().unwrap();
    let out = cornerflow(dir.path(), &["cell", "--shape", "square", "--eps", "0.2", "--deps", "0.04", "--out", "cell.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&dir.path().join("cell.csv"));
    assert_eq!(r[0].len(), 11);
    assert_eq!(r.len(), 5);
}

#[test]
fn invalid_config_lists_every_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "eps = -1\ncolour = red\n").unwrap();
    let out = cornerflow(dir.path(), &["--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`eps`") && err.contains("colour") && err.contains("shape") && err.contains("deps"), "{err}");
    assert!(fs::read_to_string(dir.path().join("manifest.txt")).unwrap().contains("category = config"));
}

#[test]
fn disk_has_no_corner_to_probe() {
    let dir = tempfile::tempdir().unwrap();
    let out = cornerflow(dir.path(), &["conformal-probe", "--shape", "disk", "--out", "p.csv"]);
    assert_eq!(out.status.code(), Some(3));
}
