//! The `simulate`, `sweep` and `check` commands.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chd_core::diagnostics::DynWTransform;
use chd_core::dynamics::w_transform_for;
use chd_core::potential::{growth_constants, normalization_integral, validate_double_well};
use chd_core::sweep::{compare_brinkman_darcy, fit_power_law, pairwise_orders, run_sweep, ComparisonReport, EtaRule, SweepReport};
use chd_core::{DiagnosticsRecord, Error, Observer, Result, SimState, Simulator};

use crate::config::{RawConfig, RunConfig, SnapshotField, SweepMode};
use crate::io::{write_csv, write_snapshot, CSV_MAGIC};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;
pub const EXIT_IO: i32 = 5;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_SOLVER,
    }
}

/// The single machine-readable line printed to stderr on failure.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ").replace('"', "'");
    format!("error kind={} code={} message=\"{msg}\"", e.kind(), exit_code(e))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn snapshot_value(state: &SimState, field: SnapshotField, chi: f64) -> chd_core::ScalarField {
    match field {
        SnapshotField::Phi => state.phi.clone(),
        SnapshotField::Mu => state.mu.clone(),
        SnapshotField::Theta => state.theta.clone(),
        SnapshotField::Sigma => state.sigma(chi),
        SnapshotField::Pressure => state.p.clone(),
    }
}

/// Streams diagnostics rows to the CSV and writes periodic snapshots.
struct FileObserver {
    csv: BufWriter<fs::File>,
    csv_path: PathBuf,
    dir: PathBuf,
    prefix: String,
    every: usize,
    fields: Vec<SnapshotField>,
    chi: f64,
    written: Vec<PathBuf>,
}

impl Observer for FileObserver {
    fn on_record(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        let row: Vec<String> = rec.values().iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(self.csv, "{}", row.join(","))
            .and_then(|_| self.csv.flush())
            .map_err(|e| io_err(&self.csv_path, e))
    }

    fn on_state(&mut self, state: &SimState) -> Result<()> {
        if self.every == 0 || !state.step.is_multiple_of(self.every) {
            return Ok(());
        }
        for &f in &self.fields {
            let path = self.dir.join(format!("{}_{}_{:07}.bin", self.prefix, f.name(), state.step));
            write_snapshot(&path, f.name(), state.t, &snapshot_value(state, f, self.chi))?;
            self.written.push(path);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub csv: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub final_record: DiagnosticsRecord,
    pub steps: usize,
    pub energy_residual: f64,
    pub mass_drift: f64,
}

/// Runs one simulation. The CSV is streamed, so a diverging run leaves the
/// rows written up to the failure.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateSummary> {
    let out = &cfg.output;
    create_dir(&out.dir)?;
    let csv_path = out.dir.join(format!("{}_diagnostics.csv", out.prefix));
    let file = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    let mut csv = BufWriter::new(file);
    writeln!(csv, "{CSV_MAGIC}")
        .and_then(|_| writeln!(csv, "{}", DiagnosticsRecord::COLUMNS.join(",")))
        .map_err(|e| io_err(&csv_path, e))?;
    let mut obs = FileObserver {
        csv,
        csv_path: csv_path.clone(),
        dir: out.dir.clone(),
        prefix: out.prefix.clone(),
        every: out.snapshot_every,
        fields: out.snapshot_fields.clone(),
        chi: cfg.model.chi,
        written: Vec::new(),
    };
    let sim = Simulator::new(cfg.grid, cfg.model.clone(), cfg.step)?;
    let res = sim.run(&cfg.init, &cfg.run, &mut obs)?;
    let mut snapshots = std::mem::take(&mut obs.written);
    if out.snapshot_final {
        for &f in &out.snapshot_fields {
            let path = out.dir.join(format!("{}_{}_final.bin", out.prefix, f.name()));
            write_snapshot(&path, f.name(), res.final_state.t, &snapshot_value(&res.final_state, f, cfg.model.chi))?;
            snapshots.push(path);
        }
    }
    Ok(SimulateSummary {
        csv: csv_path,
        snapshots,
        final_record: res.records.last().cloned().unwrap_or_default(),
        steps: res.final_state.step,
        energy_residual: res.energy_residual,
        mass_drift: res.mass_drift,
    })
}

pub fn simulate_report(s: &SimulateSummary) -> String {
    let r = &s.final_record;
    let mut o = String::new();
    let _ = writeln!(o, "steps            {}", s.steps);
    let _ = writeln!(o, "t                {:.6e}", r.t);
    let _ = writeln!(o, "energy_E         {:.10e}", r.energy_e);
    let _ = writeln!(o, "gl_energy        {:.10e}", r.gl_energy);
    let _ = writeln!(o, "L2_phi_dev       {:.10e}", r.l2_phi_dev);
    let _ = writeln!(o, "max_abs_phi      {:.10e}", r.max_abs_phi);
    match r.sigma_jump {
        Some(j) => {
            let _ = writeln!(o, "sigma_jump       {j:.10e}");
        }
        None => {
            let _ = writeln!(o, "sigma_jump       n/a");
        }
    }
    let _ = writeln!(o, "energy_residual  {:.6e}", s.energy_residual);
    let _ = writeln!(o, "mass_drift       {:.6e}", s.mass_drift);
    let _ = writeln!(o, "diagnostics      {}", s.csv.display());
    let _ = writeln!(o, "snapshots        {}", s.snapshots.len());
    o
}

/// Number of parallel sweep runs: `CHD_JOBS`, then the `jobs` key, then the
/// available parallelism.
pub fn resolve_jobs(cfg: &RunConfig) -> Result<usize> {
    if let Ok(v) = std::env::var("CHD_JOBS") {
        return match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Config(format!("CHD_JOBS must be a positive integer (got '{v}')"))),
        };
    }
    Ok(cfg
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)))
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone)]
pub enum SweepOutcome {
    Scaling(SweepReport),
    Comparison {
        main: ComparisonReport,
        control: Option<ComparisonReport>,
    },
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub outcome: SweepOutcome,
    pub summary_csv: PathBuf,
    /// Holder quotients within the configured spread of their medians.
    pub holder_ok: Option<bool>,
    pub failed: usize,
    pub total: usize,
}

impl SweepSummary {
    pub fn exit_code(&self) -> i32 {
        if self.failed == 0 {
            EXIT_OK
        } else if self.failed == self.total {
            EXIT_SOLVER
        } else {
            EXIT_PARTIAL
        }
    }
}

fn fmt_eps(eps: f64) -> String {
    format!("{eps}")
}

/// Largest ratio of a value to the median of all values (or of the median to it).
pub fn spread_from_median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let med = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    v.iter().map(|x| (x / med).max(med / x)).fold(1.0, f64::max)
}

/// Runs the sweep described by the `sweep.*` keys.
pub fn sweep(cfg: &RunConfig) -> Result<SweepSummary> {
    cfg.validate_sweep()?;
    let plan = cfg.sweep_plan()?;
    let jobs = resolve_jobs(cfg)?;
    let out = &cfg.output;
    create_dir(&out.dir)?;
    match cfg.sweep.mode {
        SweepMode::Scaling => {
            let report = with_jobs(jobs, || run_sweep(&plan))??;
            for r in &report.results {
                if let Ok(run) = &r.outcome {
                    let p = out.dir.join(format!("{}_eps{}.csv", out.prefix, fmt_eps(r.eps)));
                    write_csv(&p, &run.records)?;
                }
            }
            let holder_ok = cfg.sweep.holder_spread.map(|limit| {
                let ok_runs: Vec<_> = report.results.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
                let hp: Vec<f64> = ok_runs.iter().map(|r| r.holder_phi).collect();
                let hw: Vec<f64> = ok_runs.iter().map(|r| r.holder_w).collect();
                !ok_runs.is_empty() && spread_from_median(&hp) <= limit && spread_from_median(&hw) <= limit
            });
            let path = out.dir.join(format!("{}_sweep.csv", out.prefix));
            write_text(&path, &scaling_csv(&report, &plan.metrics, cfg.sweep.holder_spread))?;
            let failed = report.results.iter().filter(|r| r.outcome.is_err()).count();
            let total = report.results.len();
            Ok(SweepSummary {
                outcome: SweepOutcome::Scaling(report),
                summary_csv: path,
                holder_ok,
                failed,
                total,
            })
        }
        SweepMode::BrinkmanVsDarcy => {
            let (main, control) = with_jobs(jobs, || {
                let main = compare_brinkman_darcy(&plan, EtaRule::Scaled { beta: cfg.sweep.beta });
                let control = cfg
                    .sweep
                    .control_eta
                    .map(|eta| compare_brinkman_darcy(&plan, EtaRule::Fixed(eta)));
                (main, control)
            })?;
            let main = main?;
            let control = control.transpose()?;
            let path = out.dir.join(format!("{}_comparison.csv", out.prefix));
            write_text(&path, &comparison_csv(&main, control.as_ref()))?;
            let mut failed = main.rows.iter().filter(|r| r.diff_l2q.is_err()).count();
            let mut total = main.rows.len();
            if let Some(c) = &control {
                failed += c.rows.iter().filter(|r| r.diff_l2q.is_err()).count();
                total += c.rows.len();
            }
            Ok(SweepSummary {
                outcome: SweepOutcome::Comparison { main, control },
                summary_csv: path,
                holder_ok: None,
                failed,
                total,
            })
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Summary table: one row per ε, fitted slopes as trailing comment lines.
pub fn scaling_csv(report: &SweepReport, metrics: &[String], holder_spread: Option<f64>) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "{CSV_MAGIC}");
    let _ = writeln!(o, "eps,nx,ny,dt,status,{}", metrics.join(","));
    for r in &report.results {
        let (status, vals): (&str, Vec<String>) = match &r.outcome {
            Ok(run) => ("ok", metrics.iter().map(|m| num(run.metric(m).unwrap_or(f64::NAN))).collect()),
            Err(_) => ("failed", metrics.iter().map(|_| num(f64::NAN)).collect()),
        };
        let _ = writeln!(o, "{},{},{},{},{status},{}", num(r.eps), r.nx, r.ny, num(r.dt), vals.join(","));
    }
    for r in &report.results {
        if let Err(e) = &r.outcome {
            let _ = writeln!(o, "# failed eps={} {}", r.eps, e.replace('\n', " "));
        }
    }
    for m in &report.metrics {
        if let Some(f) = m.fit {
            let _ = writeln!(
                o,
                "# slope {} = {:.6} stderr {:.3e} residual {:.3e}",
                m.metric, f.slope, f.slope_stderr, f.residual
            );
        }
        if !m.pairwise.is_empty() {
            let p: Vec<String> = m.pairwise.iter().map(|x| format!("{x:.4}")).collect();
            let _ = writeln!(o, "# pairwise {} = {}", m.metric, p.join(","));
        }
    }
    for c in &report.checks {
        let _ = writeln!(
            o,
            "# check {} in [{}, {}]: slope {} {}",
            c.check.metric,
            c.check.min,
            c.check.max,
            c.slope.map_or("n/a".into(), |s| format!("{s:.6}")),
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    if let Some(limit) = holder_spread {
        let ok: Vec<_> = report.results.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let sp = spread_from_median(&ok.iter().map(|r| r.holder_phi).collect::<Vec<_>>());
        let sw = spread_from_median(&ok.iter().map(|r| r.holder_w).collect::<Vec<_>>());
        let pass = sp <= limit && sw <= limit;
        let _ = writeln!(
            o,
            "# holder spread phi {sp:.4} w {sw:.4} limit {limit} {}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    o
}

pub fn comparison_csv(main: &ComparisonReport, control: Option<&ComparisonReport>) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "{CSV_MAGIC}");
    let _ = writeln!(o, "eps,nx,ny,dt,diff_l2q,diff_final,reference_l2q,control_diff_l2q");
    for (i, r) in main.rows.iter().enumerate() {
        let d = r.diff_l2q.as_ref().map_or(f64::NAN, |v| *v);
        let c = control
            .and_then(|c| c.rows.get(i))
            .and_then(|row| row.diff_l2q.as_ref().ok().copied())
            .unwrap_or(f64::NAN);
        let _ = writeln!(
            o,
            "{},{},{},{},{},{},{},{}",
            num(r.eps),
            r.nx,
            r.ny,
            num(r.dt),
            num(d),
            num(r.diff_final),
            num(r.reference_l2q),
            num(c)
        );
    }
    let rows = main.rows.iter().chain(control.into_iter().flat_map(|c| c.rows.iter()));
    for r in rows {
        if let Err(e) = &r.diff_l2q {
            let _ = writeln!(o, "# failed eps={} {}", r.eps, e.replace('\n', " "));
        }
    }
    let pts: Vec<(f64, f64)> = main
        .rows
        .iter()
        .filter_map(|r| r.diff_l2q.as_ref().ok().map(|d| (r.eps, *d)))
        .collect();
    if let Ok(f) = fit_power_law(&pts) {
        let _ = writeln!(o, "# slope diff_l2q = {:.6} stderr {:.3e}", f.slope, f.slope_stderr);
    }
    if pts.len() >= 2 {
        let p: Vec<String> = pairwise_orders(&pts).iter().map(|x| format!("{x:.4}")).collect();
        let _ = writeln!(o, "# pairwise diff_l2q = {}", p.join(","));
    }
    let _ = writeln!(o, "# decreasing {}", main.strictly_decreasing());
    if let Some(c) = control {
        let _ = writeln!(o, "# control persists {}", c.persists(0.5));
    }
    o
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Property suite on the potential, its W transform, the mobilities and the
/// admissibility of the configured run.
pub fn check(raw: &RawConfig) -> Result<Vec<CheckRow>> {
    let cfg = crate::config::build(raw)?;
    let model = &cfg.model;
    let pot = model.potential.as_ref();
    let mut rows = Vec::new();
    let mut push = |name: &str, res: std::result::Result<String, String>| {
        let (pass, detail) = match res {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        rows.push(CheckRow {
            name: name.into(),
            pass,
            detail,
        });
    };

    let norm = normalization_integral(pot);
    let dev = (norm - 1.0).abs();
    let msg = format!("integral of sqrt(2 psi) over [-1,1] = {norm:.12}, deviation {dev:.2e}");
    push("normalization", if dev <= 1e-8 { Ok(msg) } else { Err(msg) });

    push("potential shape", validate_double_well(pot).map(|_| "wells at +-1, psi >= 0, psi <= 1 + y^2".into()).map_err(|e| e.to_string()));

    let wt: std::sync::Arc<DynWTransform> = w_transform_for(model.potential.clone());
    push(
        "transform constants",
        wt.inequality_constants()
            .map(|c| format!("C0 = {:.6}, C1 = {:.6}, verified on 60001 points", c.c_zero, c.c_one))
            .map_err(|e| e.to_string()),
    );

    let growth = growth_constants(pot);
    push(
        "growth",
        growth
            .as_ref()
            .map(|g| format!("q = {}, c0 = {:.6}, k0 = {:.6}, k1 = {:.6}", g.q, g.c0, g.k0, g.k1))
            .map_err(|e| e.to_string()),
    );

    for (name, m) in [("mobility m", &model.mobility_m), ("mobility n", &model.mobility_n)] {
        let key = name.trim_start_matches("mobility ");
        push(
            name,
            m.check_bounds(key)
                .map(|(lo, hi)| format!("bounds [{lo}, {hi}] on [-2, 2]"))
                .map_err(|e| e.to_string()),
        );
    }

    if let Ok(g) = &growth {
        let eps0 = if model.chi > 0.0 { (g.k0 / (model.chi * model.chi)).min(1.0) } else { 1.0 };
        let msg = format!("eps = {} <= eps0 = {eps0:.6}", model.eps);
        push("eps0 guard", if model.eps <= eps0 { Ok(msg) } else { Err(format!("eps0 guard violated: {msg} fails")) });
    }

    push(
        "admissibility",
        model
            .check_admissibility(&cfg.grid, cfg.init.u0)
            .map(|_| format!("|u0| + T sup|U| < 1 with u0 = {}", cfg.init.u0))
            .map_err(|e| e.to_string()),
    );
    Ok(rows)
}

pub fn check_table(rows: &[CheckRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut o = String::new();
    for r in rows {
        let _ = writeln!(o, "{}  {:width$}  {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    o
}
