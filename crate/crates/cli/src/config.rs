//! Flat `key = value` run configuration.
//!
//! Lines are `section.key = value`; `#` starts a comment. Every key has a
//! documented default (see [`KEYS`] and `chd-sharp --print-defaults`) and
//! unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use chd_core::dynamics::{RunSettings, SnapshotSchedule, StepSettings};
use chd_core::elliptic::LinSolveConfig;
use chd_core::grid::{AdvectionScheme, GridSpec};
use chd_core::model::{CosineMode, InitKind, InitialData, Mobility, ModelSpec, SourceSpec, Variant};
use chd_core::potential::{validate_double_well, DoubleWell, Quartic};
use chd_core::sweep::{DtRule, GridRule, SlopeCheck, SweepPlan};
use chd_core::{Error, Result};

pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

macro_rules! keys {
    ($( $k:literal = $d:literal : $h:literal ),* $(,)?) => {
        &[ $( KeySpec { key: $k, default: $d, help: $h } ),* ]
    };
}

/// Every accepted key with its default.
pub const KEYS: &[KeySpec] = keys![
    "grid.dim" = "1" : "spatial dimension, 1 or 2",
    "grid.nx" = "128" : "cells in x",
    "grid.ny" = "128" : "cells in y (2D only)",
    "grid.lx" = "1.0" : "domain length in x",
    "grid.ly" = "1.0" : "domain length in y (2D only)",
    "model.variant" = "darcy" : "darcy | brinkman | brinkman_scaled | zero_velocity",
    "model.eps" = "0.04" : "interface parameter",
    "model.chi" = "0.0" : "coupling constant chi >= 0",
    "model.K" = "1.0" : "permeability coefficient",
    "model.eta" = "0.1" : "Brinkman viscosity (variant brinkman)",
    "model.beta" = "1.0" : "eta = eps^beta (variant brinkman_scaled)",
    "model.m" = "1.0" : "constant mobility of phi",
    "model.n" = "1.0" : "constant mobility of theta",
    "model.potential_coeff" = "0.28125" : "quartic a (1 - s^2)^2; 9/32 is normalized",
    "model.T" = "0.01" : "terminal time",
    "model.u0" = "0.0" : "initial mean of phi, or auto for the mean of the sampled profile",
    "source.U.amp" = "0.0" : "U = amp cos(kx pi x/lx) cos(ky pi y/ly), projected to zero mean",
    "source.U.kx" = "1" : "",
    "source.U.ky" = "0" : "",
    "source.S.amp" = "0.0" : "S = offset + amp cos(kx pi x/lx) cos(ky pi y/ly) cos(omega t)",
    "source.S.kx" = "1" : "",
    "source.S.ky" = "0" : "",
    "source.S.offset" = "0.0" : "",
    "source.S.omega" = "0.0" : "",
    "source.H.amp" = "0.0" : "H = amp cos(kx pi x/lx) cos(ky pi y/ly) cos(omega t), projected to zero mean",
    "source.H.kx" = "1" : "",
    "source.H.ky" = "0" : "",
    "source.H.omega" = "0.0" : "",
    "init.kind" = "strip" : "strip | circle | ellipse | random",
    "init.cx" = "0.5" : "center x",
    "init.cy" = "0.5" : "center y",
    "init.normal_x" = "1.0" : "strip normal (phi > 0 on its side)",
    "init.normal_y" = "0.0" : "",
    "init.radius" = "0.25" : "circle radius",
    "init.rx" = "0.3" : "ellipse semi-axis in x",
    "init.ry" = "0.18" : "ellipse semi-axis in y",
    "init.width" = "1.0" : "profile width relative to the equilibrium width",
    "init.amplitude" = "0.05" : "noise amplitude (random)",
    "init.seed" = "none" : "seed of the random initial data; required for init.kind = random",
    "init.sigma0" = "0.0" : "constant initial sigma; theta0 = sigma0 - chi phi0",
    "solver.dt" = "1e-4" : "time step (sweeps: step at the largest eps)",
    "solver.S0" = "4.0" : "stabilization constant",
    "solver.rel_tol" = "1e-9" : "relative CG tolerance",
    "solver.abs_tol" = "1e-12" : "absolute (RMS) CG tolerance",
    "solver.max_iter" = "auto" : "CG iteration cap; auto = 10 nx ny",
    "solver.advection" = "upwind" : "upwind | central",
    "solver.cfl" = "0.5" : "advective Courant limit",
    "output.dir" = "out" : "output directory",
    "output.prefix" = "run" : "file name prefix",
    "output.diag_interval" = "100" : "steps between diagnostics rows",
    "output.snapshot_every" = "0" : "steps between field snapshots; 0 = none",
    "output.snapshot_final" = "true" : "write snapshots of the final state",
    "output.snapshot_fields" = "phi" : "comma list of phi, mu, theta, sigma, p",
    "output.probe_offset" = "auto" : "sigma-jump probe offset; auto = max(3 eps, 2h)",
    "output.holder_snapshots" = "32" : "snapshots kept for the Hölder quotients",
    "sweep.mode" = "scaling" : "scaling | brinkman_vs_darcy",
    "sweep.eps_list" = "0.08,0.04,0.02,0.01" : "strictly decreasing eps values",
    "sweep.cells_per_eps" = "8" : "grid rule nx = ceil(cells_per_eps lx / eps)",
    "sweep.dt_power" = "0" : "dt(eps) = solver.dt (eps / eps_max)^dt_power",
    "sweep.metrics" = "L2_phi_dev" : "metrics to tabulate and fit",
    "sweep.check" = "none" : "slope checks metric:min:max, comma separated",
    "sweep.holder_spread" = "none" : "maximal ratio of per-eps Hölder quotients to their median",
    "sweep.beta" = "1.0" : "eta = eps^beta in brinkman_vs_darcy mode",
    "sweep.control_eta" = "0.1" : "fixed-eta control run in brinkman_vs_darcy mode, or none",
    "sweep.prerelax_time" = "0.0" : "zero-velocity relaxation before a brinkman_vs_darcy comparison",
    "jobs" = "auto" : "parallel sweep runs; CHD_JOBS overrides",
];

fn key_spec(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.key == key)
}

/// Text of `--print-defaults`: a valid config that sets every key to its default.
pub fn defaults_text() -> String {
    let mut out = String::from("# chd-sharp configuration keys and defaults\n");
    for k in KEYS {
        if k.help.is_empty() {
            out.push_str(&format!("{} = {}\n", k.key, k.default));
        } else {
            out.push_str(&format!("{} = {}    # {}\n", k.key, k.default, k.help));
        }
    }
    out
}

/// Key/value pairs with the line each came from (0 for defaults).
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    /// Syntax pass: comments, `key = value`, unknown and duplicate keys.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 'key = value', got '{content}'"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if key_spec(k).is_none() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown key '{k}'"),
                });
            }
            if v.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("missing value for '{k}'"),
                });
            }
            if let Some((_, prev)) = values.insert(k.to_string(), (v.to_string(), line_no)) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("duplicate key '{k}' (first set on line {prev})"),
                });
            }
        }
        Ok(Self { values })
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn raw(&self, key: &str) -> (&str, usize) {
        match self.values.get(key) {
            Some((v, l)) => (v.as_str(), *l),
            None => (key_spec(key).map(|s| s.default).unwrap_or(""), 0),
        }
    }

    fn err(line: usize, key: &str, msg: String) -> Error {
        if line == 0 {
            Error::Config(format!("{key}: {msg}"))
        } else {
            Error::Parse {
                line,
                message: format!("{key}: {msg}"),
            }
        }
    }

    pub fn str(&self, key: &str) -> &str {
        self.raw(key).0
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let (v, l) = self.raw(key);
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Self::err(l, key, format!("expected a finite number, got '{v}'")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let (v, l) = self.raw(key);
        v.parse::<usize>()
            .map_err(|_| Self::err(l, key, format!("expected a non-negative integer, got '{v}'")))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        let (v, l) = self.raw(key);
        match v {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(Self::err(l, key, format!("expected true or false, got '{v}'"))),
        }
    }

    /// `None` for the literal `token` (e.g. `auto`, `none`).
    pub fn opt_f64(&self, key: &str, token: &str) -> Result<Option<f64>> {
        if self.str(key) == token {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    pub fn opt_usize(&self, key: &str, token: &str) -> Result<Option<usize>> {
        if self.str(key) == token {
            Ok(None)
        } else {
            self.usize(key).map(Some)
        }
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.str(key)
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let (v, l) = self.raw(key);
        self.list(key)
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Self::err(l, key, format!("bad number '{s}' in list '{v}'")))
            })
            .collect()
    }

    fn choice<'a>(&self, key: &str, options: &[&'a str]) -> Result<&'a str> {
        let (v, l) = self.raw(key);
        options
            .iter()
            .find(|o| **o == v)
            .copied()
            .ok_or_else(|| Self::err(l, key, format!("expected one of {}, got '{v}'", options.join(" | "))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotField {
    Phi,
    Mu,
    Theta,
    Sigma,
    Pressure,
}

impl SnapshotField {
    pub fn name(&self) -> &'static str {
        match self {
            SnapshotField::Phi => "phi",
            SnapshotField::Mu => "mu",
            SnapshotField::Theta => "theta",
            SnapshotField::Sigma => "sigma",
            SnapshotField::Pressure => "p",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub prefix: String,
    pub snapshot_every: usize,
    pub snapshot_final: bool,
    pub snapshot_fields: Vec<SnapshotField>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Scaling,
    BrinkmanVsDarcy,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub mode: SweepMode,
    pub eps_list: Vec<f64>,
    pub cells_per_eps: f64,
    pub dt_power: f64,
    pub metrics: Vec<String>,
    pub checks: Vec<SlopeCheck>,
    pub holder_spread: Option<f64>,
    pub beta: f64,
    pub control_eta: Option<f64>,
    pub prerelax_time: f64,
}

/// A fully parsed and validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub model: ModelSpec,
    /// Initial data with `u0` resolved for `grid` and `model.eps`.
    pub init: InitialData,
    /// `model.u0 = auto`: use the mean of the sampled profile.
    pub u0_auto: bool,
    pub step: StepSettings,
    pub run: RunSettings,
    pub output: OutputConfig,
    pub sweep: SweepConfig,
    /// Any `sweep.*` key was set.
    pub has_sweep_keys: bool,
    pub jobs: Option<usize>,
}

/// Parses and validates a configuration, including the admissibility
/// conditions of the run it describes (and of every sweep run when `sweep.*`
/// keys are present).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw = RawConfig::parse(text)?;
    let cfg = build(&raw)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Builds the typed configuration without the modeling checks on the
/// potential, the mobilities and the admissibility conditions.
pub fn build(raw: &RawConfig) -> Result<RunConfig> {
    let dim = raw.usize("grid.dim")?;
    let grid = GridSpec::new(dim, raw.usize("grid.nx")?, raw.usize("grid.ny")?, raw.f64("grid.lx")?, raw.f64("grid.ly")?)?;
    let model = build_model(raw, &grid)?;

    let center = (raw.f64("init.cx")?, raw.f64("init.cy")?);
    let width_scale = raw.f64("init.width")?;
    let kind = match raw.choice("init.kind", &["strip", "circle", "ellipse", "random"])? {
        "strip" => InitKind::TanhStrip {
            center,
            normal: (raw.f64("init.normal_x")?, raw.f64("init.normal_y")?),
            width_scale,
        },
        "circle" => InitKind::TanhCircle {
            center,
            radius: raw.f64("init.radius")?,
            width_scale,
        },
        "ellipse" => InitKind::TanhEllipse {
            center,
            rx: raw.f64("init.rx")?,
            ry: raw.f64("init.ry")?,
            width_scale,
        },
        _ => {
            let seed = match raw.str("init.seed") {
                "none" => {
                    return Err(Error::Config(
                        "init.seed is required for init.kind = random".into(),
                    ))
                }
                _ => raw.usize("init.seed")? as u64,
            };
            InitKind::RandomPerturbation {
                amplitude: raw.f64("init.amplitude")?,
                seed,
            }
        }
    };
    let u0_auto = raw.str("model.u0") == "auto";
    let mut init = InitialData {
        kind,
        u0: if u0_auto { 0.0 } else { raw.f64("model.u0")? },
        sigma0: raw.f64("init.sigma0")?,
    };
    if u0_auto {
        if matches!(init.kind, InitKind::RandomPerturbation { .. }) {
            return Err(Error::Config("model.u0 = auto needs a deterministic profile, not init.kind = random".into()));
        }
        init = init.with_natural_mean(&grid, model.eps)?;
    }

    let advection = match raw.choice("solver.advection", &["upwind", "central"])? {
        "upwind" => AdvectionScheme::Upwind,
        _ => AdvectionScheme::Central,
    };
    let step = StepSettings {
        s0: raw.f64("solver.S0")?,
        lin: LinSolveConfig {
            rel_tol: raw.f64("solver.rel_tol")?,
            abs_tol: raw.f64("solver.abs_tol")?,
            max_iter: raw.opt_usize("solver.max_iter", "auto")?,
        },
        advection,
        cfl_limit: raw.f64("solver.cfl")?,
    };
    let run = RunSettings {
        dt: raw.f64("solver.dt")?,
        diag_interval: raw.usize("output.diag_interval")?,
        snapshots: SnapshotSchedule::Ring {
            capacity: raw.usize("output.holder_snapshots")?,
        },
        probe_offset: raw.opt_f64("output.probe_offset", "auto")?,
    };

    let snapshot_fields = raw
        .list("output.snapshot_fields")
        .iter()
        .map(|f| match f.as_str() {
            "phi" => Ok(SnapshotField::Phi),
            "mu" => Ok(SnapshotField::Mu),
            "theta" => Ok(SnapshotField::Theta),
            "sigma" => Ok(SnapshotField::Sigma),
            "p" => Ok(SnapshotField::Pressure),
            other => Err(Error::Config(format!("output.snapshot_fields: unknown field '{other}'"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let output = OutputConfig {
        dir: PathBuf::from(raw.str("output.dir")),
        prefix: raw.str("output.prefix").to_string(),
        snapshot_every: raw.usize("output.snapshot_every")?,
        snapshot_final: raw.bool("output.snapshot_final")?,
        snapshot_fields,
    };

    let checks = if raw.str("sweep.check") == "none" {
        Vec::new()
    } else {
        raw.list("sweep.check")
            .iter()
            .map(|c| {
                let parts: Vec<&str> = c.split(':').collect();
                let bad = || Error::Config(format!("sweep.check: expected metric:min:max, got '{c}'"));
                if parts.len() != 3 {
                    return Err(bad());
                }
                Ok(SlopeCheck {
                    metric: parts[0].to_string(),
                    min: parts[1].parse().map_err(|_| bad())?,
                    max: parts[2].parse().map_err(|_| bad())?,
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    let sweep = SweepConfig {
        mode: match raw.choice("sweep.mode", &["scaling", "brinkman_vs_darcy"])? {
            "scaling" => SweepMode::Scaling,
            _ => SweepMode::BrinkmanVsDarcy,
        },
        eps_list: raw.f64_list("sweep.eps_list")?,
        cells_per_eps: raw.f64("sweep.cells_per_eps")?,
        dt_power: raw.f64("sweep.dt_power")?,
        metrics: raw.list("sweep.metrics"),
        checks,
        holder_spread: raw.opt_f64("sweep.holder_spread", "none")?,
        beta: raw.f64("sweep.beta")?,
        control_eta: raw.opt_f64("sweep.control_eta", "none")?,
        prerelax_time: raw.f64("sweep.prerelax_time")?,
    };
    let jobs = raw.opt_usize("jobs", "auto")?;
    if jobs == Some(0) {
        return Err(Error::Config("jobs must be >= 1".into()));
    }
    Ok(RunConfig {
        grid,
        model,
        init,
        u0_auto,
        step,
        run,
        output,
        sweep,
        has_sweep_keys: KEYS.iter().any(|k| k.key.starts_with("sweep.") && raw.is_set(k.key)),
        jobs,
    })
}

fn build_model(raw: &RawConfig, grid: &GridSpec) -> Result<ModelSpec> {
    let variant = match raw.choice("model.variant", &["darcy", "brinkman", "brinkman_scaled", "zero_velocity"])? {
        "darcy" => Variant::Darcy,
        "brinkman" => Variant::Brinkman {
            eta: raw.f64("model.eta")?,
        },
        "brinkman_scaled" => Variant::BrinkmanScaled {
            beta: raw.f64("model.beta")?,
        },
        _ => Variant::ZeroVelocity,
    };
    let mut m = ModelSpec::new(raw.f64("model.eps")?, variant);
    m.chi = raw.f64("model.chi")?;
    m.k_perm = raw.f64("model.K")?;
    m.mobility_m = Mobility::Constant(raw.f64("model.m")?);
    m.mobility_n = Mobility::Constant(raw.f64("model.n")?);
    m.potential = Arc::new(Quartic::new(raw.f64("model.potential_coeff")?)?) as Arc<dyn DoubleWell>;
    m.t_end = raw.f64("model.T")?;
    let mode = |name: &str, with_time: bool| -> Result<CosineMode> {
        let get = |k: &str| raw.f64(&format!("source.{name}.{k}"));
        Ok(CosineMode {
            amp: get("amp")?,
            kx: get("kx")?,
            ky: get("ky")?,
            offset: if name == "S" { get("offset")? } else { 0.0 },
            omega: if with_time { get("omega")? } else { 0.0 },
        })
    };
    m.sources = SourceSpec::from_modes(Some(mode("U", false)?), Some(mode("S", true)?), Some(mode("H", true)?), grid);
    Ok(m)
}

impl RunConfig {
    /// Modeling checks: the potential, the mobilities and the admissibility
    /// conditions of the single run and, if configured, of every sweep run.
    pub fn validate(&self) -> Result<()> {
        validate_double_well(self.model.potential.as_ref())?;
        self.step.lin.validate()?;
        if !(self.run.dt > 0.0) {
            return Err(Error::Config(format!("solver.dt must be positive (got {})", self.run.dt)));
        }
        if self.run.diag_interval == 0 {
            return Err(Error::Config("output.diag_interval must be >= 1".into()));
        }
        if !(self.step.cfl_limit > 0.0) {
            return Err(Error::Config("solver.cfl must be positive".into()));
        }
        if !(self.step.s0 >= 0.0) {
            return Err(Error::Config("solver.S0 must be >= 0".into()));
        }
        if let Some(d) = self.run.probe_offset {
            if !(d > 0.0) {
                return Err(Error::Config("output.probe_offset must be positive".into()));
            }
        }
        self.model.check_admissibility(&self.grid, self.init.u0)?;
        if self.has_sweep_keys {
            self.validate_sweep()?;
        }
        Ok(())
    }

    /// Checks the sweep plan and the admissibility of each of its runs.
    pub fn validate_sweep(&self) -> Result<()> {
        let plan = self.sweep_plan()?;
        plan.validate()?;
        if let Some(s) = self.sweep.holder_spread {
            if !(s >= 1.0) {
                return Err(Error::Config("sweep.holder_spread must be >= 1".into()));
            }
        }
        let variants: Vec<Variant> = match self.sweep.mode {
            SweepMode::Scaling => vec![self.model.variant],
            SweepMode::BrinkmanVsDarcy => {
                if !(self.sweep.beta > 0.0) {
                    return Err(Error::Config("sweep.beta must be positive".into()));
                }
                let mut v = vec![Variant::Darcy, Variant::BrinkmanScaled { beta: self.sweep.beta }];
                if let Some(eta) = self.sweep.control_eta {
                    v.push(Variant::Brinkman { eta });
                }
                v
            }
        };
        for &eps in &plan.eps_list {
            let grid = plan.grid.grid_for(eps)?;
            let u0 = if self.u0_auto {
                self.init.clone().with_natural_mean(&grid, eps)?.u0
            } else {
                self.init.u0
            };
            for &variant in &variants {
                let mut m = self.model.clone();
                m.eps = eps;
                m.variant = variant;
                m.check_admissibility(&grid, u0)?;
            }
        }
        Ok(())
    }

    /// The sweep described by the `sweep.*` keys around this run.
    pub fn sweep_plan(&self) -> Result<SweepPlan> {
        let s = &self.sweep;
        let eps_max = s.eps_list.first().copied().unwrap_or(self.model.eps);
        let grid = GridRule {
            dim: self.grid.dim(),
            lx: self.grid.lx(),
            ly: self.grid.ly(),
            cells_per_eps: s.cells_per_eps,
        };
        let dt = DtRule {
            dt_ref: self.run.dt,
            eps_ref: eps_max,
            power: s.dt_power,
        };
        let mut plan = SweepPlan::new(self.model.clone(), self.init.clone(), s.eps_list.clone(), grid, dt);
        plan.natural_mean = self.u0_auto;
        plan.step = self.step;
        plan.diag_interval = self.run.diag_interval;
        plan.snapshot_times = match &self.run.snapshots {
            SnapshotSchedule::Times(t) => Some(t.clone()),
            SnapshotSchedule::Ring { .. } => None,
        };
        plan.probe_offset = self.run.probe_offset;
        plan.metrics = s.metrics.clone();
        for c in &s.checks {
            if !plan.metrics.iter().any(|m| m.eq_ignore_ascii_case(&c.metric)) {
                plan.metrics.push(c.metric.clone());
            }
        }
        if s.holder_spread.is_some() {
            for m in ["holder_phi", "holder_w"] {
                if !plan.metrics.iter().any(|x| x == m) {
                    plan.metrics.push(m.into());
                }
            }
        }
        plan.checks = s.checks.clone();
        plan.prerelax_time = s.prerelax_time;
        Ok(plan)
    }
}
