//! Time stepping of the phase-field system
//!
//! ```text
//! div v = H,   K v = -∇p + (μ + χθ + χ²φ)∇φ        (Darcy; Brinkman adds -ηΔv)
//! φ_t + div(φ v) = div(m ∇μ) + Uφ
//! μ = Ψ'(φ)/ε - εΔφ - χθ - χ²φ
//! (θ + χφ)_t + div((θ + χφ) v) = div(n ∇θ) + S
//! ```
//!
//! One step: velocity of the current state, semi-implicit Cahn–Hilliard step,
//! implicit θ step, then the velocity of the new state. A state therefore
//! always carries the velocity and pressure consistent with its own fields.

use std::sync::Arc;

use crate::diagnostics::{
    self, default_probe_offset, energy_terms, holder_quotients, step_residual, uniform_estimate_norms,
    w_field, DiagnosticsRecord, DynWTransform, SampledSources, Snapshot, SolverResiduals,
};
use crate::elliptic::{
    solve_brinkman, solve_ch_coupled, solve_theta_helmholtz, ChStepInput, LinSolveConfig,
    NeumannPoissonOp, SolveStats,
};
use crate::error::{Error, Result};
use crate::grid::{self, AdvectionScheme, FaceVectorField, GridSpec, ScalarField};
use crate::model::{InitialData, ModelSpec, Variant};
use crate::potential::{DoubleWell, WTransform};

/// Fields of the system at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub phi: ScalarField,
    pub mu: ScalarField,
    pub theta: ScalarField,
    pub p: ScalarField,
    pub v: FaceVectorField,
    pub t: f64,
    pub step: usize,
    pub residuals: SolverResiduals,
}

impl SimState {
    /// State with zero velocity and pressure at `t = 0`.
    pub fn at_rest(phi: ScalarField, mu: ScalarField, theta: ScalarField) -> Self {
        let g = *phi.grid();
        Self {
            phi,
            mu,
            theta,
            p: ScalarField::zeros(g),
            v: FaceVectorField::zeros(g),
            t: 0.0,
            step: 0,
            residuals: SolverResiduals::default(),
        }
    }

    /// `σ = θ + χφ`.
    pub fn sigma(&self, chi: f64) -> ScalarField {
        self.theta.zip_map(&self.phi, |t, p| t + chi * p)
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        [
            ("phi", self.phi.is_finite()),
            ("mu", self.mu.is_finite()),
            ("theta", self.theta.is_finite()),
            ("p", self.p.is_finite()),
            ("v", self.v.is_finite()),
        ]
        .into_iter()
        .find(|(_, ok)| !ok)
        .map(|(n, _)| n)
    }
}

/// Numerical parameters of the time stepper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings {
    /// Stabilization constant of the Cahn–Hilliard step.
    pub s0: f64,
    pub lin: LinSolveConfig,
    pub advection: AdvectionScheme,
    /// Maximal advective Courant number `dt·max|v|/h`.
    pub cfl_limit: f64,
}

impl Default for StepSettings {
    fn default() -> Self {
        Self {
            s0: 4.0,
            lin: LinSolveConfig::default(),
            advection: AdvectionScheme::Upwind,
            cfl_limit: 0.5,
        }
    }
}

/// When to keep `(t, φ, W(φ))` snapshots for the Hölder quotients.
#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotSchedule {
    /// Evenly spaced snapshots, decimated by two whenever `capacity` is exceeded.
    Ring { capacity: usize },
    /// The first step at or after each listed time.
    Times(Vec<f64>),
}

impl Default for SnapshotSchedule {
    fn default() -> Self {
        SnapshotSchedule::Ring { capacity: 32 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub dt: f64,
    /// Emit a diagnostics record every this many steps (and at the end).
    pub diag_interval: usize,
    pub snapshots: SnapshotSchedule,
    /// Offset of the σ-jump probes; `None` means `max(3ε, 2h)`.
    pub probe_offset: Option<f64>,
}

impl RunSettings {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            diag_interval: 100,
            snapshots: SnapshotSchedule::default(),
            probe_offset: None,
        }
    }
}

/// Receives output while a run progresses.
pub trait Observer {
    fn on_record(&mut self, _rec: &DiagnosticsRecord) -> Result<()> {
        Ok(())
    }
    /// Called for the initial state and after every step.
    fn on_state(&mut self, _state: &SimState) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

/// Everything a run produces besides the observer stream.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: SimState,
    pub holder_phi: f64,
    pub holder_w: f64,
    /// `(Σ dt · mean(μ)²)^{1/2}`.
    pub mean_mu_l2: f64,
    /// Maximum over steps of `|mean φ(t_n) - u0 - Σ dt·mean(Uφ(t_k))|`.
    pub mass_drift: f64,
    /// Accumulated `Σ_n |R_n|` of the one-step energy-identity defects.
    pub energy_residual: f64,
    /// Energy after each step (index 0 is the initial energy).
    pub energies: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

/// A configured model on a grid, ready to advance states.
#[derive(Debug, Clone)]
pub struct Simulator {
    grid: GridSpec,
    model: ModelSpec,
    settings: StepSettings,
    u_field: ScalarField,
    poisson: NeumannPoissonOp,
    wt: Arc<DynWTransform>,
}

impl Simulator {
    pub fn new(grid: GridSpec, model: ModelSpec, settings: StepSettings) -> Result<Self> {
        let wt = Arc::new(WTransform::new(model.potential.clone()));
        Self::with_w_transform(grid, model, settings, wt)
    }

    /// Like [`Simulator::new`] but reusing an existing transform of the same potential.
    pub fn with_w_transform(
        grid: GridSpec,
        model: ModelSpec,
        settings: StepSettings,
        wt: Arc<DynWTransform>,
    ) -> Result<Self> {
        model.validate()?;
        settings.lin.validate()?;
        if !(settings.s0 >= 0.0 && settings.s0.is_finite()) {
            return Err(Error::config(format!("solver.S0 must be >= 0 (got {})", settings.s0)));
        }
        if !(settings.cfl_limit > 0.0) {
            return Err(Error::config("CFL limit must be positive"));
        }
        let u_field = model.sources.sample_u(&grid);
        Ok(Self {
            grid,
            model,
            settings,
            u_field,
            poisson: NeumannPoissonOp::new(grid),
            wt,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn model(&self) -> &ModelSpec {
        &self.model
    }
    pub fn settings(&self) -> &StepSettings {
        &self.settings
    }
    pub fn w_transform(&self) -> &Arc<DynWTransform> {
        &self.wt
    }

    /// `Ψ'(φ)/ε - εΔφ - χθ - χ²φ`.
    pub fn chemical_potential(&self, phi: &ScalarField, theta: &ScalarField) -> ScalarField {
        let (eps, chi) = (self.model.eps, self.model.chi);
        let pot = &self.model.potential;
        let mut lap = ScalarField::zeros(self.grid);
        grid::apply_weighted_laplacian(&self.grid, None, phi.data(), lap.data_mut());
        let mut mu = ScalarField::zeros(self.grid);
        for (i, m) in mu.data_mut().iter_mut().enumerate() {
            let p = phi.data()[i];
            *m = pot.dpsi(p) / eps - eps * lap.data()[i] - chi * theta.data()[i] - chi * chi * p;
        }
        mu
    }

    /// Capillary force `face(μ + χθ + χ²φ) · ∇φ` on faces.
    pub fn force(&self, phi: &ScalarField, mu: &ScalarField, theta: &ScalarField) -> FaceVectorField {
        let chi = self.model.chi;
        let mut q = mu.clone();
        for (i, v) in q.data_mut().iter_mut().enumerate() {
            *v += chi * theta.data()[i] + chi * chi * phi.data()[i];
        }
        grid::face_interp(&q).zip_map(&grid::grad_cc_to_face(phi), |a, b| a * b)
    }

    /// Darcy velocity and pressure: `-Δp = K H - div f`, `v = (f - ∇p)/K`.
    pub fn velocity_darcy(
        &self,
        force: &FaceVectorField,
        h: &ScalarField,
        p_guess: Option<&ScalarField>,
    ) -> Result<(FaceVectorField, ScalarField, SolveStats)> {
        let k = self.model.k_perm;
        let mut rhs = grid::div_face_to_cc(force);
        for (r, hv) in rhs.data_mut().iter_mut().zip(h.data()) {
            *r = k * hv - *r;
        }
        rhs.project_mean_zero();
        // div v - H equals the pressure residual over K, so the tolerance has to be
        // tight relative to H rather than to the (much larger) div f.
        let mut cfg = self.settings.lin;
        cfg.rel_tol = cfg.rel_tol.min(1e-12);
        cfg.abs_tol = cfg.abs_tol.min(1e-9 * k * (1.0 + h.l2_norm()));
        let (p, st) = self.poisson.solve(&rhs, p_guess, &cfg)?;
        let gp = grid::grad_cc_to_face(&p);
        let v = force.zip_map(&gp, |f, g| (f - g) / k);
        Ok((v, p, st))
    }

    /// Velocity and pressure belonging to the given fields at time `t`.
    pub fn velocity(
        &self,
        phi: &ScalarField,
        mu: &ScalarField,
        theta: &ScalarField,
        t: f64,
        guess: Option<(&FaceVectorField, &ScalarField)>,
    ) -> Result<(FaceVectorField, ScalarField, SolveStats)> {
        match self.model.variant {
            Variant::ZeroVelocity => Ok((
                FaceVectorField::zeros(self.grid),
                ScalarField::zeros(self.grid),
                SolveStats::default(),
            )),
            Variant::Darcy => {
                let f = self.force(phi, mu, theta);
                let h = self.model.sources.sample_h(&self.grid, t);
                self.velocity_darcy(&f, &h, guess.map(|g| g.1))
            }
            Variant::Brinkman { .. } | Variant::BrinkmanScaled { .. } => {
                let f = self.force(phi, mu, theta);
                let eta = self.model.eta().unwrap_or(0.0);
                let pg = guess.map(|g| g.1);
                let s = solve_brinkman(pg, eta, self.model.k_perm, &f, &self.settings.lin)?;
                Ok((
                    s.v,
                    s.p,
                    SolveStats {
                        iterations: s.helmholtz.iterations + s.poisson.iterations,
                        residual: s.helmholtz.residual.max(s.poisson.residual),
                    },
                ))
            }
        }
    }

    /// Initial state: φ0 from the initial data, θ0 = σ0 - χφ0, μ0 from the
    /// constitutive law and the matching velocity.
    pub fn initial_state(&self, init: &InitialData) -> Result<SimState> {
        let phi = init.phi0(&self.grid, self.model.eps)?;
        let theta = init.theta0(&phi, self.model.chi);
        let s = self.state_from_fields(phi, theta)?;
        if let Some(field) = s.first_non_finite() {
            return Err(Error::Diverged { step: 0, t: 0.0, field });
        }
        Ok(s)
    }

    /// State at `t = 0` built from given φ and θ, with μ and the velocity derived from them.
    pub fn state_from_fields(&self, phi: ScalarField, theta: ScalarField) -> Result<SimState> {
        let mu = self.chemical_potential(&phi, &theta);
        let mut s = SimState::at_rest(phi, mu, theta);
        let (v, p, st) = self.velocity(&s.phi, &s.mu, &s.theta, 0.0, None)?;
        s.v = v;
        s.p = p;
        s.residuals.velocity = st.residual;
        Ok(s)
    }

    /// Largest step allowed by the advective CFL condition for this state.
    pub fn dt_max(&self, state: &SimState) -> f64 {
        let vmax = state.v.max_abs();
        if vmax == 0.0 {
            f64::INFINITY
        } else {
            self.settings.cfl_limit * self.grid.min_spacing() / vmax
        }
    }

    /// Advances `state` by `dt`.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Precondition(format!("time step must be positive (got {dt})")));
        }
        let model = &self.model;
        let (eps, chi) = (model.eps, model.chi);
        let g = self.grid;
        let courant = dt * state.v.max_abs() / g.min_spacing();
        if courant > self.settings.cfl_limit {
            return Err(Error::Cfl {
                step: state.step,
                courant,
                limit: self.settings.cfl_limit,
                dt_max: self.dt_max(state),
            });
        }
        let adv = self.settings.advection;
        let zero_v = matches!(model.variant, Variant::ZeroVelocity);

        // Cahn–Hilliard
        let mut rhs = if zero_v {
            ScalarField::zeros(g)
        } else {
            adv.advect(&state.phi, &state.v).map(|a| -a)
        };
        for (i, r) in rhs.data_mut().iter_mut().enumerate() {
            *r += self.u_field.data()[i] * state.phi.data()[i];
        }
        let pot = &model.potential;
        let explicit_mu = ScalarField::from_vec(
            g,
            (0..g.num_cells())
                .map(|i| {
                    let p = state.phi.data()[i];
                    pot.dpsi(p) / eps - chi * state.theta.data()[i] - chi * chi * p
                })
                .collect(),
        )?;
        let m_face = model.mobility_m.on_faces(&state.phi);
        let (phi, mu, ch_stats) = solve_ch_coupled(
            &ChStepInput {
                phi_old: &state.phi,
                m_face: &m_face,
                dt,
                eps,
                s0: self.settings.s0,
                explicit_rhs: &rhs,
                explicit_mu: &explicit_mu,
            },
            &self.settings.lin,
        )?;

        // θ
        let sigma_old = state.sigma(chi);
        let mut trhs = model.sources.sample_s(&g, state.t);
        if !zero_v {
            trhs.axpy(-1.0, &adv.advect(&sigma_old, &state.v));
        }
        if chi != 0.0 {
            for (i, r) in trhs.data_mut().iter_mut().enumerate() {
                *r -= chi * (phi.data()[i] - state.phi.data()[i]) / dt;
            }
        }
        let n_face = model.mobility_n.on_faces(&state.phi);
        let (theta, th_stats) =
            solve_theta_helmholtz(&state.theta, &n_face, dt, &trhs, &self.settings.lin)?;

        let t = state.t + dt;
        let (v, p, v_stats) = self.velocity(&phi, &mu, &theta, t, Some((&state.v, &state.p)))?;
        let next = SimState {
            phi,
            mu,
            theta,
            p,
            v,
            t,
            step: state.step + 1,
            residuals: SolverResiduals {
                cahn_hilliard: ch_stats.residual,
                theta: th_stats.residual,
                velocity: v_stats.residual,
                iterations: ch_stats.iterations + th_stats.iterations + v_stats.iterations,
            },
        };
        if let Some(field) = next.first_non_finite() {
            return Err(Error::Diverged {
                step: next.step,
                t,
                field,
            });
        }
        Ok(next)
    }

    fn record(&self, state: &SimState, probe_offset: f64, energy_residual: f64) -> Result<DiagnosticsRecord> {
        let mut rec = uniform_estimate_norms(state, &self.model, &self.wt);
        rec.energy_residual = energy_residual;
        // an interface too close to the boundary for the probes is not a run failure
        rec.sigma_jump = match diagnostics::measure_sigma_jump(state, &self.model, probe_offset) {
            Ok(j) => j,
            Err(Error::Probe(_)) => None,
            Err(e) => return Err(e),
        };
        rec.solver = state.residuals;
        Ok(rec)
    }

    fn snapshot(&self, state: &SimState) -> Snapshot {
        Snapshot {
            t: state.t,
            phi: state.phi.clone(),
            w: w_field(&state.phi, &self.wt),
        }
    }

    /// Runs from the initial data to `t_end`. The final step is shortened to land on `t_end`.
    pub fn run(&self, init: &InitialData, rs: &RunSettings, observer: &mut dyn Observer) -> Result<RunOutput> {
        let state = self.initial_state(init)?;
        self.run_from(state, init.u0, rs, observer)
    }

    /// Runs from a given state at `t = 0`.
    pub fn run_from(
        &self,
        mut state: SimState,
        u0: f64,
        rs: &RunSettings,
        observer: &mut dyn Observer,
    ) -> Result<RunOutput> {
        if !(rs.dt > 0.0 && rs.dt.is_finite()) {
            return Err(Error::config(format!("solver.dt must be positive (got {})", rs.dt)));
        }
        if rs.diag_interval == 0 {
            return Err(Error::config("output.diag_interval must be >= 1"));
        }
        let t_end = self.model.t_end;
        let probe_offset = rs
            .probe_offset
            .unwrap_or_else(|| default_probe_offset(&self.grid, self.model.eps));
        let n_steps = if t_end > 0.0 {
            ((t_end / rs.dt) - 1e-9).ceil().max(1.0) as usize
        } else {
            0
        };

        let mut records = Vec::new();
        let mut energy_residual = 0.0;
        let mut terms = energy_terms(&state, &self.model, &SampledSources::sample(&self.model, &self.grid, state.t));
        let mut energies = vec![terms.energy];
        let mut mean_mu_sq = 0.0;
        let mut mass_source = 0.0;
        let mut mass_drift = (grid::mean(&state.phi) - u0).abs();

        let mut snaps: Vec<Snapshot> = Vec::new();
        let mut stride = 1usize;
        let mut pending_times: Vec<f64> = match &rs.snapshots {
            SnapshotSchedule::Times(ts) => {
                let mut v = ts.clone();
                v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
                v
            }
            SnapshotSchedule::Ring { .. } => Vec::new(),
        };
        let mut take_snapshot = |state: &SimState, k: usize, snaps: &mut Vec<Snapshot>| {
            match &rs.snapshots {
                SnapshotSchedule::Ring { capacity } => {
                    if k.is_multiple_of(stride) {
                        snaps.push(self.snapshot(state));
                        if snaps.len() > (*capacity).max(2) {
                            let kept: Vec<Snapshot> = snaps.drain(..).step_by(2).collect();
                            *snaps = kept;
                            stride *= 2;
                        }
                    }
                }
                SnapshotSchedule::Times(_) => {
                    let tol = 0.5 * rs.dt;
                    let mut taken = false;
                    while let Some(&next) = pending_times.last() {
                        if state.t + tol >= next {
                            pending_times.pop();
                            if !taken {
                                snaps.push(self.snapshot(state));
                                taken = true;
                            }
                        } else {
                            break;
                        }
                    }
                }
            }
        };

        take_snapshot(&state, 0, &mut snaps);
        observer.on_state(&state)?;
        let rec = self.record(&state, probe_offset, 0.0)?;
        observer.on_record(&rec)?;
        records.push(rec);

        for k in 0..n_steps {
            let t_next = if k + 1 == n_steps { t_end } else { (k + 1) as f64 * rs.dt };
            let dt = t_next - state.t;
            mean_mu_sq += dt * grid::mean(&state.mu).powi(2);
            mass_source += dt * grid::mean(&self.u_field.zip_map(&state.phi, |u, p| u * p));

            let mut next = self.step(&state, dt)?;
            next.t = t_next;

            let new_terms = energy_terms(&next, &self.model, &SampledSources::sample(&self.model, &self.grid, next.t));
            energy_residual += step_residual(&terms, &new_terms, dt).abs();
            energies.push(new_terms.energy);
            terms = new_terms;
            mass_drift = mass_drift.max((grid::mean(&next.phi) - u0 - mass_source).abs());

            state = next;
            take_snapshot(&state, k + 1, &mut snaps);
            observer.on_state(&state)?;
            if (k + 1) % rs.diag_interval == 0 || k + 1 == n_steps {
                let rec = self.record(&state, probe_offset, energy_residual)?;
                observer.on_record(&rec)?;
                records.push(rec);
            }
        }
        if snaps.last().map(|s| s.t) != Some(state.t) {
            if let SnapshotSchedule::Ring { .. } = rs.snapshots {
                snaps.push(self.snapshot(&state));
            }
        }
        let (holder_phi, holder_w) = holder_quotients(&snaps);
        Ok(RunOutput {
            records,
            final_state: state,
            holder_phi,
            holder_w,
            mean_mu_l2: mean_mu_sq.sqrt(),
            mass_drift,
            energy_residual,
            energies,
            snapshots: snaps,
        })
    }
}

/// Convenience for callers that only need the W transform of a potential.
pub fn w_transform_for(pot: Arc<dyn DoubleWell>) -> Arc<DynWTransform> {
    Arc::new(WTransform::new(pot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CosineMode, InitKind, SourceSpec};

    fn strip_1d(u0: f64) -> InitialData {
        InitialData {
            kind: InitKind::TanhStrip {
                center: (0.5 - 0.5 * u0, 0.0),
                normal: (1.0, 0.0),
                width_scale: 1.5,
            },
            u0,
            sigma0: 0.0,
        }
    }

    #[test]
    fn pure_phase_fixed_point() {
        let g = GridSpec::new_1d(32, 1.0).unwrap();
        let model = ModelSpec::new(0.05, Variant::ZeroVelocity);
        let sim = Simulator::new(g, model, StepSettings::default()).unwrap();
        let s = SimState::at_rest(
            ScalarField::constant(g, 1.0),
            ScalarField::zeros(g),
            ScalarField::zeros(g),
        );
        let s1 = sim.step(&s, 1e-3).unwrap();
        assert!(s1.phi.zip_map(&s.phi, |a, b| a - b).max_abs() < 1e-14);
        assert!(s1.theta.max_abs() < 1e-14);
    }

    #[test]
    fn one_step_mass_identities() {
        let g = GridSpec::new_1d(64, 1.0).unwrap();
        let mut model = ModelSpec::new(0.05, Variant::ZeroVelocity);
        model.chi = 0.3;
        model.sources = SourceSpec::from_modes(
            Some(CosineMode { amp: 0.5, kx: 1.0, ..Default::default() }),
            Some(CosineMode { amp: 0.2, kx: 2.0, offset: 0.1, omega: 3.0, ..Default::default() }),
            None,
            &g,
        );
        let sim = Simulator::new(g, model.clone(), StepSettings::default()).unwrap();
        let s = sim.initial_state(&strip_1d(0.1)).unwrap();
        let dt = 1e-4;
        let s1 = sim.step(&s, dt).unwrap();
        let u = model.sources.sample_u(&g);
        let expect = grid::mean(&s.phi) + dt * grid::mean(&u.zip_map(&s.phi, |a, b| a * b));
        assert!((grid::mean(&s1.phi) - expect).abs() < 1e-9);
        let sig0 = grid::mean(&s.sigma(0.3));
        let sig1 = grid::mean(&s1.sigma(0.3));
        let smean = grid::mean(&model.sources.sample_s(&g, 0.0));
        assert!((sig1 - sig0 - dt * smean).abs() < 1e-9, "{}", sig1 - sig0 - dt * smean);
    }

    fn ellipse_2d() -> InitialData {
        InitialData {
            kind: InitKind::TanhEllipse {
                center: (0.5, 0.5),
                rx: 0.3,
                ry: 0.18,
                width_scale: 1.0,
            },
            u0: 0.0,
            sigma0: 0.0,
        }
    }

    #[test]
    fn darcy_velocity_divergence() {
        let g = GridSpec::new_2d(32, 32, 1.0, 1.0).unwrap();
        let mut model = ModelSpec::new(0.08, Variant::Darcy);
        model.sources.h = Some(Arc::new(|x, y, _| (std::f64::consts::PI * x).cos() * (0.3 + y)));
        let sim = Simulator::new(g, model.clone(), StepSettings::default()).unwrap();
        let init = ellipse_2d().with_natural_mean(&g, 0.08).unwrap();
        let s = sim.initial_state(&init).unwrap();
        assert!(s.v.boundary_is_zero());
        let h = model.sources.sample_h(&g, 0.0);
        let d = grid::div_face_to_cc(&s.v).zip_map(&h, |a, b| a - b);
        assert!(d.l2_norm() <= 1e-7 * (1.0 + h.l2_norm()), "{}", d.l2_norm());
        assert!(grid::mean(&s.p).abs() < 1e-12);
        assert!(s.v.max_abs() > 0.0);
    }

    #[test]
    fn darcy_constant_phi_pure_pressure() {
        let g = GridSpec::new_1d(64, 2.0).unwrap();
        let mut model = ModelSpec::new(0.1, Variant::Darcy);
        model.k_perm = 2.0;
        let sim = Simulator::new(g, model, StepSettings::default()).unwrap();
        let phi = ScalarField::constant(g, 0.2);
        let zero = ScalarField::zeros(g);
        let f = sim.force(&phi, &zero, &zero);
        assert_eq!(f.max_abs(), 0.0);
        let (v, p, _) = sim.velocity_darcy(&f, &zero, None).unwrap();
        assert_eq!((v.max_abs(), p.max_abs()), (0.0, 0.0));
        let h = ScalarField::from_fn(g, |x, _| (std::f64::consts::PI * x / 2.0).cos());
        let mut h = h;
        h.project_mean_zero();
        let (v, p, _) = sim.velocity_darcy(&f, &h, None).unwrap();
        let gp = grid::grad_cc_to_face(&p);
        let e = v.zip_map(&gp, |a, b| a + b / 2.0).max_abs();
        assert!(e < 1e-12);
        let d = grid::div_face_to_cc(&v).zip_map(&h, |a, b| a - b).max_abs();
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn brinkman_eta_zero_limit_matches_darcy() {
        let g = GridSpec::new_2d(24, 24, 1.0, 1.0).unwrap();
        let sim_d = Simulator::new(g, ModelSpec::new(0.08, Variant::Darcy), StepSettings::default()).unwrap();
        let s = sim_d
            .initial_state(&ellipse_2d().with_natural_mean(&g, 0.08).unwrap())
            .unwrap();
        let f = sim_d.force(&s.phi, &s.mu, &s.theta);
        let b = solve_brinkman(None, 0.0, 1.0, &f, &LinSolveConfig::default()).unwrap();
        let diff = b.v.zip_map(&s.v, |a, c| a - c).l2_norm();
        assert!(diff <= 1e-8 * s.v.l2_norm(), "{diff}");
    }

    #[test]
    fn cfl_violation_reported() {
        let g = GridSpec::new_2d(16, 16, 1.0, 1.0).unwrap();
        let sim = Simulator::new(g, ModelSpec::new(0.1, Variant::Darcy), StepSettings::default()).unwrap();
        let init = ellipse_2d().with_natural_mean(&g, 0.1).unwrap();
        let s = sim.initial_state(&init).unwrap();
        let dt = 10.0 * sim.dt_max(&s);
        match sim.step(&s, dt) {
            Err(Error::Cfl { courant, dt_max, .. }) => {
                assert!(courant > 0.5);
                assert!(dt_max < dt);
            }
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn run_zero_time_single_record() {
        let g = GridSpec::new_1d(32, 1.0).unwrap();
        let sim = Simulator::new(g, ModelSpec::new(0.05, Variant::ZeroVelocity), StepSettings::default()).unwrap();
        let out = sim.run(&strip_1d(0.0), &RunSettings::new(1e-4), &mut ()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.final_state.step, 0);
    }

    #[test]
    fn run_lands_on_t_end_and_is_deterministic() {
        let g = GridSpec::new_1d(64, 1.0).unwrap();
        let mut model = ModelSpec::new(0.05, Variant::ZeroVelocity);
        model.t_end = 0.00105;
        let sim = Simulator::new(g, model, StepSettings::default()).unwrap();
        let rs = RunSettings { diag_interval: 3, ..RunSettings::new(1e-4) };
        let a = sim.run(&strip_1d(0.0), &rs, &mut ()).unwrap();
        let b = sim.run(&strip_1d(0.0), &rs, &mut ()).unwrap();
        assert_eq!(a.final_state.t, 0.00105);
        assert_eq!(a.final_state.step, 11);
        assert_eq!(a.records, b.records);
        assert_eq!(a.records.len(), 1 + 3 + 1);
        for w in a.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-8 * w[0].abs());
        }
    }

    #[test]
    fn ring_snapshots_decimate() {
        let g = GridSpec::new_1d(32, 1.0).unwrap();
        let mut model = ModelSpec::new(0.05, Variant::ZeroVelocity);
        model.t_end = 100.0 * 1e-4;
        let sim = Simulator::new(g, model, StepSettings::default()).unwrap();
        let rs = RunSettings {
            snapshots: SnapshotSchedule::Ring { capacity: 8 },
            ..RunSettings::new(1e-4)
        };
        let out = sim.run(&strip_1d(0.0), &rs, &mut ()).unwrap();
        assert!(out.snapshots.len() <= 9 + 1);
        assert!(out.snapshots.len() >= 4);
        assert_eq!(out.snapshots.last().unwrap().t, out.final_state.t);
        assert!(out.holder_phi > 0.0 && out.holder_w > 0.0);
    }
}
