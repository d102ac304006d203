//! ε-convergence harness: families of runs over a decreasing ε sequence on
//! proportionally refined grids, power-law fits of the collected metrics and
//! the Brinkman-against-Darcy velocity comparison.

use std::sync::Arc;

use rayon::prelude::*;

use crate::diagnostics::{DiagnosticsRecord, DynWTransform};
use crate::dynamics::{RunOutput, RunSettings, SimState, Simulator, SnapshotSchedule, StepSettings};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::{InitialData, ModelSpec, Variant};
use crate::potential::growth_constants;

/// `nx(ε) = ceil(cells_per_eps · lx / ε)`, and likewise for `ny` in 2D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRule {
    pub dim: usize,
    pub lx: f64,
    pub ly: f64,
    pub cells_per_eps: f64,
}

impl GridRule {
    pub fn grid_for(&self, eps: f64) -> Result<GridSpec> {
        let n = |l: f64| ((self.cells_per_eps * l / eps) - 1e-9).ceil().max(4.0) as usize;
        match self.dim {
            1 => GridSpec::new_1d(n(self.lx), self.lx),
            2 => GridSpec::new_2d(n(self.lx), n(self.ly), self.lx, self.ly),
            d => Err(Error::config(format!("grid.dim must be 1 or 2 (got {d})"))),
        }
    }
}

/// `dt(ε) = dt_ref · (ε / eps_ref)^power`; `power = 0` is a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtRule {
    pub dt_ref: f64,
    pub eps_ref: f64,
    pub power: f64,
}

impl DtRule {
    pub fn fixed(dt: f64) -> Self {
        Self {
            dt_ref: dt,
            eps_ref: 1.0,
            power: 0.0,
        }
    }

    pub fn dt_for(&self, eps: f64) -> f64 {
        self.dt_ref * (eps / self.eps_ref).powf(self.power)
    }
}

/// Expected range of a fitted slope.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeCheck {
    pub metric: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    /// Model of every run; its `eps` is replaced by each entry of `eps_list`.
    pub base: ModelSpec,
    pub init: InitialData,
    /// Replace `init.u0` by the natural mean of the profile on each grid.
    pub natural_mean: bool,
    pub eps_list: Vec<f64>,
    pub grid: GridRule,
    pub dt: DtRule,
    pub step: StepSettings,
    pub diag_interval: usize,
    /// Hölder snapshot times; `None` keeps the default ring.
    pub snapshot_times: Option<Vec<f64>>,
    pub probe_offset: Option<f64>,
    /// Metrics to fit; record columns plus `holder_phi`, `holder_w`,
    /// `mass_drift`, `mean_mu_l2` and `energy_residual_total`.
    pub metrics: Vec<String>,
    pub checks: Vec<SlopeCheck>,
    /// Length of a zero-velocity, source-free relaxation of the initial data
    /// before the variant comparison starts (0 = none). It removes the
    /// interface-scale transient of the sampled profile.
    pub prerelax_time: f64,
}

impl SweepPlan {
    pub fn new(base: ModelSpec, init: InitialData, eps_list: Vec<f64>, grid: GridRule, dt: DtRule) -> Self {
        Self {
            base,
            init,
            natural_mean: false,
            eps_list,
            grid,
            dt,
            step: StepSettings::default(),
            diag_interval: 100,
            snapshot_times: None,
            probe_offset: None,
            metrics: vec!["L2_phi_dev".into()],
            checks: Vec::new(),
            prerelax_time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::config("sweep.eps_list must not be empty"));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::config("sweep.eps_list entries must be positive"));
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("sweep.eps_list must be strictly decreasing"));
        }
        if !(self.grid.cells_per_eps >= 6.0) {
            return Err(Error::config(format!(
                "sweep.cells_per_eps must be >= 6 to resolve the interface (got {})",
                self.grid.cells_per_eps
            )));
        }
        if !(self.prerelax_time >= 0.0 && self.prerelax_time.is_finite()) {
            return Err(Error::config("sweep.prerelax_time must be >= 0"));
        }
        if !(self.dt.dt_ref > 0.0 && self.dt.eps_ref > 0.0 && self.dt.power.is_finite()) {
            return Err(Error::config("sweep dt rule needs dt_ref > 0 and eps_ref > 0"));
        }
        if self.base.chi > 0.0 {
            let k0 = growth_constants(self.base.potential.as_ref())?.k0;
            let eps0 = (k0 / (self.base.chi * self.base.chi)).min(1.0);
            if self.eps_list[0] > eps0 {
                return Err(Error::config(format!(
                    "eps0 guard violated: largest eps {} > eps0 = min(1, k0/chi^2) = {eps0}",
                    self.eps_list[0]
                )));
            }
        }
        for m in &self.metrics {
            if !is_metric(m) {
                return Err(Error::config(format!("unknown sweep metric '{m}'")));
            }
        }
        Ok(())
    }

    fn model_for(&self, eps: f64) -> ModelSpec {
        let mut m = self.base.clone();
        m.eps = eps;
        m
    }

    fn init_for(&self, grid: &GridSpec, eps: f64) -> Result<InitialData> {
        if self.natural_mean {
            self.init.clone().with_natural_mean(grid, eps)
        } else {
            Ok(self.init.clone())
        }
    }

    fn run_settings(&self, eps: f64) -> RunSettings {
        RunSettings {
            dt: self.dt.dt_for(eps),
            diag_interval: self.diag_interval,
            snapshots: match &self.snapshot_times {
                Some(ts) => SnapshotSchedule::Times(ts.clone()),
                None => SnapshotSchedule::default(),
            },
            probe_offset: self.probe_offset,
        }
    }
}

const EXTRA_METRICS: [&str; 5] = ["holder_phi", "holder_w", "mass_drift", "mean_mu_l2", "energy_residual_total"];

fn is_metric(name: &str) -> bool {
    EXTRA_METRICS.iter().any(|m| m.eq_ignore_ascii_case(name))
        || DiagnosticsRecord::COLUMNS.iter().any(|c| c.eq_ignore_ascii_case(name))
}

/// Summary of one completed run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsRun {
    pub final_record: DiagnosticsRecord,
    pub holder_phi: f64,
    pub holder_w: f64,
    pub mass_drift: f64,
    pub mean_mu_l2: f64,
    pub energy_residual: f64,
    pub steps: usize,
    /// Diagnostics rows of the run.
    pub records: Vec<DiagnosticsRecord>,
}

impl EpsRun {
    fn from_output(out: &RunOutput) -> Self {
        Self {
            final_record: out.records.last().cloned().unwrap_or_default(),
            holder_phi: out.holder_phi,
            holder_w: out.holder_w,
            mass_drift: out.mass_drift,
            mean_mu_l2: out.mean_mu_l2,
            energy_residual: out.energy_residual,
            steps: out.final_state.step,
            records: out.records.clone(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name.to_ascii_lowercase().as_str() {
            "holder_phi" => Some(self.holder_phi),
            "holder_w" => Some(self.holder_w),
            "mass_drift" => Some(self.mass_drift),
            "mean_mu_l2" => Some(self.mean_mu_l2),
            "energy_residual_total" => Some(self.energy_residual),
            _ => self.final_record.metric(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsResult {
    pub eps: f64,
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    /// `Err` holds the message of the failed run.
    pub outcome: std::result::Result<EpsRun, String>,
}

/// Least-squares line through `(log ε, log value)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log residuals.
    pub residual: f64,
    /// Standard error of the slope (0 for exactly three collinear points and fewer).
    pub slope_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: String,
    /// `(ε, value)` of the successful runs, ε decreasing.
    pub points: Vec<(f64, f64)>,
    pub fit: Option<PowerLawFit>,
    /// Slopes between consecutive ε.
    pub pairwise: Vec<f64>,
    pub decreasing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub check: SlopeCheck,
    pub slope: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub results: Vec<EpsResult>,
    pub metrics: Vec<MetricSummary>,
    pub checks: Vec<CheckOutcome>,
}

impl SweepReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.outcome.is_ok()) && self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self, metric: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric.eq_ignore_ascii_case(metric))
    }
}

/// Runs every ε of the plan in parallel. A failed run is marked in the report
/// and excluded from the fits; the others proceed.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepReport> {
    plan.validate()?;
    let wt: Arc<DynWTransform> = crate::dynamics::w_transform_for(plan.base.potential.clone());
    let results: Vec<EpsResult> = plan
        .eps_list
        .par_iter()
        .map(|&eps| run_one(plan, eps, &wt))
        .collect();
    let metrics = plan
        .metrics
        .iter()
        .map(|m| summarize(m, &results))
        .collect::<Vec<_>>();
    let checks = plan
        .checks
        .iter()
        .map(|c| {
            let slope = results_fit(&results, &c.metric).map(|f| f.slope);
            CheckOutcome {
                check: c.clone(),
                slope,
                pass: slope.is_some_and(|s| s >= c.min && s <= c.max),
            }
        })
        .collect();
    Ok(SweepReport { results, metrics, checks })
}

fn run_one(plan: &SweepPlan, eps: f64, wt: &Arc<DynWTransform>) -> EpsResult {
    let dt = plan.dt.dt_for(eps);
    let grid = match plan.grid.grid_for(eps) {
        Ok(g) => g,
        Err(e) => {
            return EpsResult {
                eps,
                nx: 0,
                ny: 0,
                dt,
                outcome: Err(e.to_string()),
            }
        }
    };
    let outcome = (|| {
        let model = plan.model_for(eps);
        let init = plan.init_for(&grid, eps)?;
        model.check_admissibility(&grid, init.u0)?;
        let sim = Simulator::with_w_transform(grid, model, plan.step, wt.clone())?;
        let out = sim.run(&init, &plan.run_settings(eps), &mut ())?;
        Ok::<_, Error>(EpsRun::from_output(&out))
    })()
    .map_err(|e| e.to_string());
    EpsResult {
        eps,
        nx: grid.nx(),
        ny: grid.ny(),
        dt,
        outcome,
    }
}

fn points(results: &[EpsResult], metric: &str) -> Vec<(f64, f64)> {
    results
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().and_then(|o| o.metric(metric)).map(|v| (r.eps, v)))
        .collect()
}

fn results_fit(results: &[EpsResult], metric: &str) -> Option<PowerLawFit> {
    fit_power_law(&points(results, metric)).ok()
}

fn summarize(metric: &str, results: &[EpsResult]) -> MetricSummary {
    let pts = points(results, metric);
    MetricSummary {
        metric: metric.to_string(),
        fit: fit_power_law(&pts).ok(),
        pairwise: pairwise_orders(&pts),
        decreasing: pts.windows(2).all(|w| w[1].1 < w[0].1),
        points: pts,
    }
}

/// Least-squares fit of `log value = slope · log ε + intercept`.
pub fn fit_power_law(pairs: &[(f64, f64)]) -> Result<PowerLawFit> {
    if pairs.len() < 3 {
        return Err(Error::Fit(format!("power-law fit needs at least 3 points (got {})", pairs.len())));
    }
    if let Some((e, v)) = pairs.iter().find(|(e, v)| !(*e > 0.0 && *v > 0.0 && e.is_finite() && v.is_finite())) {
        return Err(Error::Fit(format!("power-law fit needs positive finite data (got ({e}, {v}))")));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("power-law fit needs distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let slope_stderr = if pairs.len() > 2 { (ss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(PowerLawFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        slope_stderr,
    })
}

/// `log(v_i / v_{i+1}) / log(ε_i / ε_{i+1})` for consecutive pairs.
pub fn pairwise_orders(pairs: &[(f64, f64)]) -> Vec<f64> {
    pairs
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect()
}

/// How the Brinkman viscosity is chosen in a comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRule {
    /// `η = ε^β`.
    Scaled { beta: f64 },
    Fixed(f64),
}

impl EtaRule {
    pub fn variant(&self) -> Variant {
        match *self {
            EtaRule::Scaled { beta } => Variant::BrinkmanScaled { beta },
            EtaRule::Fixed(eta) => Variant::Brinkman { eta },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub eps: f64,
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    /// `‖v_a - v_b‖_{L²(Q)}` by the trapezoid rule in time, or the error of a failed run.
    pub diff_l2q: std::result::Result<f64, String>,
    /// `‖v_a - v_b‖_{L²}` at the final time.
    pub diff_final: f64,
    /// `‖v_b‖_{L²(Q)}` as a scale.
    pub reference_l2q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub variant_a: Variant,
    pub variant_b: Variant,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn diffs(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.diff_l2q.as_ref().ok().copied()).collect()
    }

    /// Every run succeeded and the differences decrease strictly with ε.
    pub fn strictly_decreasing(&self) -> bool {
        let d = self.diffs();
        d.iter().all(Option::is_some) && d.windows(2).all(|w| w[1].unwrap() < w[0].unwrap())
    }

    /// The difference at the smallest ε keeps at least `fraction` of the one
    /// at the largest ε.
    pub fn persists(&self, fraction: f64) -> bool {
        let d = self.diffs();
        match (d.first().copied().flatten(), d.last().copied().flatten()) {
            (Some(a), Some(b)) => d.len() >= 2 && b >= fraction * a,
            _ => false,
        }
    }
}

/// Runs the Brinkman variant with the given viscosity rule and the Darcy variant
/// in lockstep (same grid, initial data and steps) for each ε.
pub fn compare_brinkman_darcy(plan: &SweepPlan, eta: EtaRule) -> Result<ComparisonReport> {
    if let EtaRule::Scaled { beta } = eta {
        if !(beta > 0.0) {
            return Err(Error::config(format!("beta must be positive (got {beta})")));
        }
    }
    compare_variants(plan, eta.variant(), Variant::Darcy)
}

/// Lockstep comparison of the velocities of two variants.
pub fn compare_variants(plan: &SweepPlan, a: Variant, b: Variant) -> Result<ComparisonReport> {
    plan.validate()?;
    let wt = crate::dynamics::w_transform_for(plan.base.potential.clone());
    let rows = plan
        .eps_list
        .par_iter()
        .map(|&eps| compare_one(plan, eps, a, b, &wt))
        .collect();
    Ok(ComparisonReport {
        variant_a: a,
        variant_b: b,
        rows,
    })
}

fn compare_one(plan: &SweepPlan, eps: f64, a: Variant, b: Variant, wt: &Arc<DynWTransform>) -> ComparisonRow {
    let dt = plan.dt.dt_for(eps);
    let mut row = ComparisonRow {
        eps,
        nx: 0,
        ny: 0,
        dt,
        diff_l2q: Err(String::new()),
        diff_final: f64::NAN,
        reference_l2q: f64::NAN,
    };
    let res = (|| {
        let grid = plan.grid.grid_for(eps)?;
        row.nx = grid.nx();
        row.ny = grid.ny();
        let init = plan.init_for(&grid, eps)?;
        let make = |variant: Variant| -> Result<Simulator> {
            let mut m = plan.model_for(eps);
            m.variant = variant;
            m.check_admissibility(&grid, init.u0)?;
            Simulator::with_w_transform(grid, m, plan.step, wt.clone())
        };
        let (sa, sb) = (make(a)?, make(b)?);
        let (phi0, theta0) = prepared_fields(plan, &grid, eps, &init, wt)?;
        let mut xa = sa.state_from_fields(phi0.clone(), theta0.clone())?;
        let mut xb = sb.state_from_fields(phi0, theta0)?;
        let t_end = plan.base.t_end;
        let n = if t_end > 0.0 { ((t_end / dt) - 1e-9).ceil() as usize } else { 0 };
        let diff = |x: &SimState, y: &SimState| x.v.zip_map(&y.v, |p, q| p - q).l2_norm();
        let (mut d_prev, mut r_prev) = (diff(&xa, &xb), xb.v.l2_norm());
        let (mut acc, mut racc) = (0.0, 0.0);
        for k in 0..n {
            let t_next = if k + 1 == n { t_end } else { (k + 1) as f64 * dt };
            let h = t_next - xa.t;
            xa = sa.step(&xa, h)?;
            xb = sb.step(&xb, h)?;
            let (d, r) = (diff(&xa, &xb), xb.v.l2_norm());
            acc += 0.5 * h * (d_prev * d_prev + d * d);
            racc += 0.5 * h * (r_prev * r_prev + r * r);
            d_prev = d;
            r_prev = r;
        }
        Ok::<_, Error>((acc.sqrt(), d_prev, racc.sqrt()))
    })();
    match res {
        Ok((l2q, fin, reference)) => {
            row.diff_l2q = Ok(l2q);
            row.diff_final = fin;
            row.reference_l2q = reference;
        }
        Err(e) => row.diff_l2q = Err(e.to_string()),
    }
    row
}

/// Initial φ and θ, after the optional zero-velocity relaxation.
fn prepared_fields(
    plan: &SweepPlan,
    grid: &GridSpec,
    eps: f64,
    init: &InitialData,
    wt: &Arc<DynWTransform>,
) -> Result<(crate::grid::ScalarField, crate::grid::ScalarField)> {
    let mut m = plan.model_for(eps);
    let phi = init.phi0(grid, eps)?;
    let theta = init.theta0(&phi, m.chi);
    if plan.prerelax_time == 0.0 {
        return Ok((phi, theta));
    }
    m.variant = Variant::ZeroVelocity;
    m.sources = crate::model::SourceSpec::none();
    m.t_end = plan.prerelax_time;
    let sim = Simulator::with_w_transform(*grid, m, plan.step, wt.clone())?;
    let dt = plan.dt.dt_for(eps);
    let mut s = sim.state_from_fields(phi, theta)?;
    let n = ((plan.prerelax_time / dt) - 1e-9).ceil().max(1.0) as usize;
    for k in 0..n {
        let t_next = if k + 1 == n { plan.prerelax_time } else { (k + 1) as f64 * dt };
        s = sim.step(&s, t_next - s.t)?;
    }
    Ok((s.phi, s.theta))
}
