use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chd_cli::io::{read_csv, read_snapshot, CSV_MAGIC};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("chd-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chd-sharp"))
        .args(args)
        .output()
        .expect("run chd-sharp")
}

/// Writes `body` plus an output directory inside `dir` and returns the path.
fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, format!("{body}\noutput.dir = {}\n", dir.join("out").display())).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL_1D: &str = "grid.nx = 64\nmodel.variant = zero_velocity\nmodel.eps = 0.08\nmodel.T = 0.002\nsolver.dt = 2e-4\noutput.diag_interval = 5";

#[test]
fn zero_time_run_writes_header_and_one_row() {
    let dir = scratch("t0");
    let cfg = config(&dir, "grid.nx = 32\nmodel.eps = 0.1\nmodel.T = 0");
    let o = run(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = dir.join("out/run_diagnostics.csv");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_MAGIC));
    assert!(lines.next().unwrap().starts_with("t,energy_E,"));
    assert_eq!(read_csv(&csv).unwrap().len(), 1);
    let snap = read_snapshot(&dir.join("out/run_phi_final.bin")).unwrap();
    assert_eq!(snap.field, "phi");
    assert_eq!(snap.t, 0.0);
    assert_eq!(snap.data.grid().nx(), 32);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = scratch("rerun");
    let cfg = config(&dir, &format!("{SMALL_1D}\noutput.snapshot_fields = phi, sigma, mu"));
    let files = ["run_diagnostics.csv", "run_phi_final.bin", "run_sigma_final.bin", "run_mu_final.bin"];
    let read_all = || -> Vec<Vec<u8>> { files.iter().map(|f| fs::read(dir.join("out").join(f)).unwrap()).collect() };
    assert_eq!(run(&["simulate", cfg.to_str().unwrap()]).status.code(), Some(0));
    let first = read_all();
    assert_eq!(run(&["simulate", cfg.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(first, read_all());
    assert_eq!(read_csv(&dir.join("out/run_diagnostics.csv")).unwrap().len(), 3);
}

#[test]
fn periodic_snapshots_are_numbered_by_step() {
    let dir = scratch("snaps");
    let cfg = config(&dir, &format!("{SMALL_1D}\noutput.snapshot_every = 5\noutput.snapshot_final = false"));
    assert_eq!(run(&["simulate", cfg.to_str().unwrap()]).status.code(), Some(0));
    for step in [0, 5, 10] {
        let s = read_snapshot(&dir.join(format!("out/run_phi_{step:07}.bin"))).unwrap();
        assert!((s.t - step as f64 * 2e-4).abs() < 1e-15);
    }
    assert!(!dir.join("out/run_phi_final.bin").exists());
}

#[test]
fn printed_defaults_parse() {
    let o = run(&["--print-defaults"]);
    assert_eq!(o.status.code(), Some(0));
    let cfg = chd_cli::parse_config(&stdout(&o)).unwrap();
    assert_eq!(cfg.model.eps, 0.04);
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = scratch("unknown");
    let cfg = config(&dir, "grid.nx = 32\nmodel.epsilon = 0.1");
    let o = run(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("kind=config") && err.contains("model.epsilon") && err.contains("line 2"), "{err}");
}

#[test]
fn missing_config_file_is_an_io_error() {
    let o = run(&["simulate", "/nonexistent/run.conf"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn check_defaults_pass() {
    let o = run(&["check"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("C0 = 3.5559") && out.contains("C1 = 0.1596"), "{out}");
    assert!(out.contains("q = 4"), "{out}");
    assert!(!out.contains("FAIL"));
}

#[test]
fn check_rejects_unnormalized_potential() {
    let dir = scratch("pot");
    let cfg = config(&dir, "model.potential_coeff = 1.0");
    let o = run(&["check", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL  normalization") || stderr(&o).contains("normaliz"));
}

#[test]
fn check_rejects_vanishing_mobility() {
    let dir = scratch("mob");
    let cfg = config(&dir, "model.m = 0.0");
    let o = run(&["check", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let all = stdout(&o) + &stderr(&o);
    assert!(all.contains("mobility"), "{all}");
}

#[test]
fn singleton_sweep_has_no_slope_footer() {
    let dir = scratch("single");
    let cfg = config(
        &dir,
        "model.variant = zero_velocity\nmodel.eps = 0.08\nmodel.T = 0.002\nsolver.dt = 2e-4\nsweep.eps_list = 0.08",
    );
    let o = run(&["sweep", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.join("out/run_sweep.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 2);
    assert!(!text.contains("slope") && !text.contains("pairwise"), "{text}");
    assert!(dir.join("out/run_eps0.08.csv").exists());
}

const CFL_SWEEP: &str = "grid.dim = 2
model.variant = darcy
model.eps = 0.2
model.T = 2e-3
model.u0 = auto
init.kind = ellipse
init.rx = 0.3
init.ry = 0.2
solver.dt = 1e-3
sweep.eps_list = 0.2, 0.1
sweep.cells_per_eps = 6";

#[test]
fn partial_sweep_failure_exits_4() {
    // the finer grid violates the Courant limit, the coarse one does not
    let dir = scratch("partial");
    let cfg = config(&dir, &format!("{CFL_SWEEP}\nsolver.cfl = 0.3"));
    let o = run(&["sweep", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let text = fs::read_to_string(dir.join("out/run_sweep.csv")).unwrap();
    assert!(text.contains(",ok,") && text.contains(",failed,"), "{text}");
    assert!(text.contains("# failed eps=0.1") && text.contains("CFL"), "{text}");
}

#[test]
fn sweep_with_every_run_failing_exits_3() {
    let dir = scratch("allfail");
    let cfg = config(&dir, &format!("{CFL_SWEEP}\nsolver.cfl = 0.05"));
    let o = run(&["sweep", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn sweep_output_is_independent_of_jobs() {
    let one = scratch("jobs1");
    let two = scratch("jobs2");
    let body = "model.variant = zero_velocity\nmodel.eps = 0.08\nmodel.T = 0.002\nsolver.dt = 2e-4\nsweep.eps_list = 0.08, 0.04";
    let c1 = config(&one, &format!("{body}\njobs = 1"));
    let c2 = config(&two, &format!("{body}\njobs = 2"));
    assert_eq!(run(&["sweep", c1.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(run(&["sweep", c2.to_str().unwrap()]).status.code(), Some(0));
    for f in ["run_sweep.csv", "run_eps0.08.csv", "run_eps0.04.csv"] {
        assert_eq!(fs::read(one.join("out").join(f)).unwrap(), fs::read(two.join("out").join(f)).unwrap(), "{f}");
    }
}
