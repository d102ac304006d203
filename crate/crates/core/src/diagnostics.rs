//! Observables of a simulation state: energies, the energy-identity residual,
//! norms from the uniform estimates, Hölder quotients, interface location and
//! the σ-jump across the interface.

use std::sync::Arc;

use crate::dynamics::SimState;
use crate::elliptic::viscous_dissipation;
use crate::error::{Error, Result};
use crate::grid::{self, FaceVectorField, GridSpec, ScalarField};
use crate::model::ModelSpec;
use crate::potential::{DoubleWell, WTransform};

pub type DynWTransform = WTransform<Arc<dyn DoubleWell>>;

/// Final relative residuals of the linear solves of the last step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverResiduals {
    pub cahn_hilliard: f64,
    pub theta: f64,
    pub velocity: f64,
    pub iterations: usize,
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy_e: f64,
    pub gl_energy: f64,
    pub discrepancy_pos: f64,
    pub g_quantity: f64,
    pub mean_phi: f64,
    pub mean_mu: f64,
    pub mean_theta_sigma: f64,
    pub l2_phi_dev: f64,
    pub l2_theta: f64,
    pub h1_mu: f64,
    pub h1_theta: f64,
    pub l2_v: f64,
    pub l2_p: f64,
    pub tv_w: f64,
    pub energy_residual: f64,
    pub sigma_jump: Option<f64>,
    pub max_abs_phi: f64,
    pub solver: SolverResiduals,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 18] = [
        "t",
        "energy_E",
        "gl_energy",
        "discrepancy_pos",
        "G_quantity",
        "mean_phi",
        "mean_mu",
        "mean_theta_sigma",
        "L2_phi_dev",
        "L2_theta",
        "H1_mu",
        "H1_theta",
        "L2_v",
        "L2_p",
        "tv_w",
        "energy_residual",
        "sigma_jump",
        "max_abs_phi",
    ];

    /// Values in column order; a missing σ-jump is NaN.
    pub fn values(&self) -> [f64; 18] {
        [
            self.t,
            self.energy_e,
            self.gl_energy,
            self.discrepancy_pos,
            self.g_quantity,
            self.mean_phi,
            self.mean_mu,
            self.mean_theta_sigma,
            self.l2_phi_dev,
            self.l2_theta,
            self.h1_mu,
            self.h1_theta,
            self.l2_v,
            self.l2_p,
            self.tv_w,
            self.energy_residual,
            self.sigma_jump.unwrap_or(f64::NAN),
            self.max_abs_phi,
        ]
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        Self::COLUMNS
            .iter()
            .position(|c| c.eq_ignore_ascii_case(name))
            .map(|i| self.values()[i])
    }
}

fn psi_integral(phi: &ScalarField, pot: &dyn DoubleWell) -> f64 {
    phi.data().iter().map(|&p| pot.psi(p)).sum::<f64>() * phi.grid().cell_volume()
}

/// `ℰ = ∫ Ψ(φ)/ε + (ε/2)|∇φ|² + θ²/2 - (χ²/2)φ²`, gradient energy summed over faces.
pub fn energy_total(state: &SimState, model: &ModelSpec) -> f64 {
    energy_of(&state.phi, &state.theta, model)
}

pub fn energy_of(phi: &ScalarField, theta: &ScalarField, model: &ModelSpec) -> f64 {
    let eps = model.eps;
    let gphi = grid::grad_cc_to_face(phi);
    psi_integral(phi, model.potential.as_ref()) / eps + 0.5 * eps * gphi.dot(&gphi)
        + 0.5 * theta.dot(theta)
        - 0.5 * model.chi * model.chi * phi.dot(phi)
}

/// Cell value of `|∇u|²` as the mean of the squared adjacent face gradients.
fn cell_grad_sq(g: &FaceVectorField) -> Vec<f64> {
    let grid = *g.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = vec![0.0; grid.num_cells()];
    for j in 0..ny {
        for i in 0..nx {
            let a = g.x_faces[j * (nx + 1) + i];
            let b = g.x_faces[j * (nx + 1) + i + 1];
            out[j * nx + i] = 0.5 * (a * a + b * b);
        }
    }
    if grid.dim() == 2 {
        for j in 0..ny {
            for i in 0..nx {
                let a = g.y_faces[j * nx + i];
                let b = g.y_faces[(j + 1) * nx + i];
                out[j * nx + i] += 0.5 * (a * a + b * b);
            }
        }
    }
    out
}

/// `(∫e, ∫max(ξ, 0))` with `e = Ψ/ε + (ε/2)|∇φ|²` and `ξ = (ε/2)|∇φ|² - Ψ/ε`.
pub fn gl_density_and_discrepancy(phi: &ScalarField, eps: f64, pot: &dyn DoubleWell) -> (f64, f64) {
    let g2 = cell_grad_sq(&grid::grad_cc_to_face(phi));
    let vol = phi.grid().cell_volume();
    let (mut e, mut xi) = (0.0, 0.0);
    for (&p, &gs) in phi.data().iter().zip(&g2) {
        let bulk = pot.psi(p) / eps;
        let grad = 0.5 * eps * gs;
        e += bulk + grad;
        xi += (grad - bulk).max(0.0);
    }
    (e * vol, xi * vol)
}

/// Source fields sampled at one time level.
#[derive(Debug, Clone)]
pub struct SampledSources {
    pub u: ScalarField,
    pub s: ScalarField,
    pub h: ScalarField,
}

impl SampledSources {
    pub fn sample(model: &ModelSpec, grid: &GridSpec, t: f64) -> Self {
        Self {
            u: model.sources.sample_u(grid),
            s: model.sources.sample_s(grid, t),
            h: model.sources.sample_h(grid, t),
        }
    }
}

/// Energy, dissipation rate and source power of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    pub energy: f64,
    pub dissipation: f64,
    pub source: f64,
}

/// Terms of `dℰ/dt = -(m|∇μ|² + n|∇θ|² + 𝒦|v|² + η|∇v|²) + Uφμ + Sθ + H(p - φμ - |σ|²/2)`.
pub fn energy_terms(state: &SimState, model: &ModelSpec, src: &SampledSources) -> EnergyTerms {
    let gmu = grid::grad_cc_to_face(&state.mu);
    let gth = grid::grad_cc_to_face(&state.theta);
    let mf = model.mobility_m.on_faces(&state.phi);
    let nf = model.mobility_n.on_faces(&state.phi);
    let weighted = |w: &FaceVectorField, g: &FaceVectorField| {
        g.zip_map(w, |a, b| a * b).dot(g)
    };
    let mut dissipation = weighted(&mf, &gmu) + weighted(&nf, &gth)
        + model.k_perm * state.v.dot(&state.v);
    if let Some(eta) = model.eta() {
        dissipation += viscous_dissipation(&state.v, eta);
    }
    let chi = model.chi;
    let vol = state.phi.grid().cell_volume();
    let mut source = 0.0;
    for i in 0..state.phi.data().len() {
        let p = state.phi.data()[i];
        let mu = state.mu.data()[i];
        let th = state.theta.data()[i];
        let sigma = th + chi * p;
        source += src.u.data()[i] * p * mu + src.s.data()[i] * th
            + src.h.data()[i] * (state.p.data()[i] - p * mu - 0.5 * sigma * sigma);
    }
    EnergyTerms {
        energy: energy_total(state, model),
        dissipation,
        source: source * vol,
    }
}

/// Signed one-step defect of the energy identity with trapezoidal time quadrature.
pub fn step_residual(old: &EnergyTerms, new: &EnergyTerms, dt: f64) -> f64 {
    new.energy - old.energy + 0.5 * dt * (old.dissipation + new.dissipation)
        - 0.5 * dt * (old.source + new.source)
}

/// `|ℰ(new) - ℰ(old) + ∫dissipation - ∫sources|` over one step.
pub fn energy_identity_residual(prev: &SimState, state: &SimState, model: &ModelSpec, dt: f64) -> f64 {
    let g = *state.phi.grid();
    let a = energy_terms(prev, model, &SampledSources::sample(model, &g, prev.t));
    let b = energy_terms(state, model, &SampledSources::sample(model, &g, state.t));
    step_residual(&a, &b, dt).abs()
}

/// `W(φ)` evaluated cellwise.
pub fn w_field(phi: &ScalarField, wt: &DynWTransform) -> ScalarField {
    phi.map(|p| wt.w(p))
}

/// Fills the state-dependent columns of a record (everything but `t`,
/// `energy_residual`, `sigma_jump` and solver data).
pub fn uniform_estimate_norms(state: &SimState, model: &ModelSpec, wt: &DynWTransform) -> DiagnosticsRecord {
    let eps = model.eps;
    let pot = model.potential.as_ref();
    let phi = &state.phi;
    let gphi = grid::grad_cc_to_face(phi);
    let (gl, disc) = gl_density_and_discrepancy(phi, eps, pot);
    let psi_l1 = psi_integral(phi, pot);
    let sigma = state.theta.zip_map(phi, |t, p| t + model.chi * p);
    let w = w_field(phi, wt);
    let tv_w = grid::grad_cc_to_face(&w).l1_norm();
    DiagnosticsRecord {
        t: state.t,
        energy_e: energy_total(state, model),
        gl_energy: gl,
        discrepancy_pos: disc,
        g_quantity: psi_l1 / (2.0 * eps) + 0.5 * eps * gphi.dot(&gphi) + state.theta.dot(&state.theta),
        mean_phi: grid::mean(phi),
        mean_mu: grid::mean(&state.mu),
        mean_theta_sigma: grid::mean(&sigma),
        l2_phi_dev: phi.map(|p| p.abs() - 1.0).l2_norm(),
        l2_theta: state.theta.l2_norm(),
        h1_mu: grid::grad_cc_to_face(&state.mu).l2_norm(),
        h1_theta: grid::grad_cc_to_face(&state.theta).l2_norm(),
        l2_v: state.v.l2_norm(),
        l2_p: state.p.l2_norm(),
        tv_w,
        energy_residual: 0.0,
        sigma_jump: None,
        max_abs_phi: phi.max_abs(),
        solver: SolverResiduals::default(),
    }
}

/// A stored `(t, φ, W(φ))` triple for the Hölder quotients.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub phi: ScalarField,
    pub w: ScalarField,
}

/// `max ‖φ(t)-φ(τ)‖²_{L²}/|t-τ|^{1/4}` and `max ‖w(t)-w(τ)‖_{L¹}/|t-τ|^{1/8}`
/// over all stored pairs with distinct times.
pub fn holder_quotients(history: &[Snapshot]) -> (f64, f64) {
    let (mut qp, mut qw) = (0.0_f64, 0.0_f64);
    for (i, a) in history.iter().enumerate() {
        for b in &history[i + 1..] {
            let dt = (a.t - b.t).abs();
            if dt <= 0.0 {
                continue;
            }
            let dphi = a.phi.zip_map(&b.phi, |x, y| x - y);
            let dw = a.w.zip_map(&b.w, |x, y| x - y);
            qp = qp.max(dphi.dot(&dphi) / dt.powf(0.25));
            qw = qw.max(dw.l1_norm() / dt.powf(0.125));
        }
    }
    (qp, qw)
}

/// A point where φ changes sign between two neighboring cell centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub x: f64,
    pub y: f64,
}

/// Discrete proxy for the zero level set of φ.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceProbe {
    pub crossings: Vec<Crossing>,
    /// Polyline length of the zero contour (2D only).
    pub length: Option<f64>,
}

impl InterfaceProbe {
    pub fn is_empty(&self) -> bool {
        self.crossings.is_empty()
    }
}

fn zero_frac(a: f64, b: f64) -> Option<f64> {
    if (a > 0.0) != (b > 0.0) && a != b {
        Some(a / (a - b))
    } else {
        None
    }
}

/// Zero crossings of φ along grid lines through cell centers (linear
/// interpolation), plus a marching-squares contour length in 2D.
pub fn extract_interface(phi: &ScalarField) -> InterfaceProbe {
    let g = *phi.grid();
    let (nx, ny, hx, hy) = (g.nx(), g.ny(), g.hx(), g.hy());
    let mut crossings = Vec::new();
    for j in 0..ny {
        for i in 0..nx - 1 {
            if let Some(s) = zero_frac(phi.at(i, j), phi.at(i + 1, j)) {
                let (x, y) = g.center(i, j);
                crossings.push(Crossing { x: x + s * hx, y });
            }
        }
    }
    if g.dim() == 1 {
        return InterfaceProbe {
            crossings,
            length: None,
        };
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            if let Some(s) = zero_frac(phi.at(i, j), phi.at(i, j + 1)) {
                let (x, y) = g.center(i, j);
                crossings.push(Crossing { x, y: y + s * hy });
            }
        }
    }
    InterfaceProbe {
        crossings,
        length: Some(contour_length(phi)),
    }
}

fn contour_length(phi: &ScalarField) -> f64 {
    let g = *phi.grid();
    let (hx, hy) = (g.hx(), g.hy());
    let mut total = 0.0;
    for j in 0..g.ny() - 1 {
        for i in 0..g.nx() - 1 {
            // corners counter-clockwise: (0,0) (1,0) (1,1) (0,1)
            let c = [phi.at(i, j), phi.at(i + 1, j), phi.at(i + 1, j + 1), phi.at(i, j + 1)];
            let pos = [(0.0, 0.0), (hx, 0.0), (hx, hy), (0.0, hy)];
            let mut pts = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                if let Some(s) = zero_frac(a, b) {
                    let (p0, p1) = (pos[e], pos[(e + 1) % 4]);
                    pts.push((p0.0 + s * (p1.0 - p0.0), p0.1 + s * (p1.1 - p0.1)));
                }
            }
            let seg = |p: (f64, f64), q: (f64, f64)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
            match pts.len() {
                2 => total += seg(pts[0], pts[1]),
                4 => {
                    // saddle: pair edges according to the sign of the cell average
                    let center = c.iter().sum::<f64>() / 4.0;
                    if (center > 0.0) == (c[0] > 0.0) {
                        total += seg(pts[0], pts[3]) + seg(pts[1], pts[2]);
                    } else {
                        total += seg(pts[0], pts[1]) + seg(pts[2], pts[3]);
                    }
                }
                _ => {}
            }
        }
    }
    total
}

/// Bilinear interpolation of a cell-centered field, constant beyond the
/// outermost cell centers. `None` outside the domain.
pub fn interpolate(f: &ScalarField, x: f64, y: f64) -> Option<f64> {
    let g = *f.grid();
    if !g.contains(x, y) {
        return None;
    }
    let locate = |c: f64, h: f64, n: usize| -> (usize, f64) {
        let s = (c / h - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n.saturating_sub(2));
        (i, s - i as f64)
    };
    let (i, fx) = locate(x, g.hx(), g.nx());
    if g.dim() == 1 {
        return Some((1.0 - fx) * f.at(i, 0) + fx * f.at(i + 1, 0));
    }
    let (j, fy) = locate(y, g.hy(), g.ny());
    Some(
        (1.0 - fx) * (1.0 - fy) * f.at(i, j)
            + fx * (1.0 - fy) * f.at(i + 1, j)
            + (1.0 - fx) * fy * f.at(i, j + 1)
            + fx * fy * f.at(i + 1, j + 1),
    )
}

/// Mean jump `field(x + δn) - field(x - δn)` over all crossings, `n` the unit
/// normal along `∇φ` (pointing into φ > 0). Crossings whose probes leave the
/// domain are skipped; `Ok(None)` if there is no interface.
pub fn measure_jump(field: &ScalarField, phi: &ScalarField, probe: &InterfaceProbe, delta: f64) -> Result<Option<f64>> {
    if probe.is_empty() {
        return Ok(None);
    }
    let g = *phi.grid();
    if !(delta >= 2.0 * g.hx().max(if g.dim() == 2 { g.hy() } else { 0.0 })) {
        return Err(Error::Probe(format!(
            "probe offset {delta} must be at least two cell widths"
        )));
    }
    let h = g.min_spacing();
    let (mut sum, mut count) = (0.0, 0usize);
    for c in &probe.crossings {
        let (nx, ny) = if g.dim() == 1 {
            let l = interpolate(phi, (c.x - 0.5 * h).max(0.0), 0.0).unwrap_or(0.0);
            let r = interpolate(phi, (c.x + 0.5 * h).min(g.lx()), 0.0).unwrap_or(0.0);
            ((r - l).signum(), 0.0)
        } else {
            let d = 0.5 * h;
            let fx = interpolate(phi, c.x + d, c.y).zip(interpolate(phi, c.x - d, c.y));
            let fy = interpolate(phi, c.x, c.y + d).zip(interpolate(phi, c.x, c.y - d));
            match (fx, fy) {
                (Some((a, b)), Some((e, f))) => {
                    let (gx, gy) = (a - b, e - f);
                    let n = (gx * gx + gy * gy).sqrt();
                    if n == 0.0 {
                        continue;
                    }
                    (gx / n, gy / n)
                }
                _ => continue,
            }
        };
        if nx == 0.0 && ny == 0.0 {
            continue;
        }
        let plus = interpolate(field, c.x + delta * nx, c.y + delta * ny);
        let minus = interpolate(field, c.x - delta * nx, c.y - delta * ny);
        if let (Some(p), Some(m)) = (plus, minus) {
            sum += p - m;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Probe(format!(
            "all {} interface probes at offset {delta} fall outside the domain",
            probe.crossings.len()
        )));
    }
    Ok(Some(sum / count as f64))
}

/// Jump of `σ = θ + χφ` across the interface.
pub fn measure_sigma_jump(state: &SimState, model: &ModelSpec, delta: f64) -> Result<Option<f64>> {
    let sigma = state.theta.zip_map(&state.phi, |t, p| t + model.chi * p);
    measure_jump(&sigma, &state.phi, &extract_interface(&state.phi), delta)
}

/// Default probe offset `max(3ε, 2h)`.
pub fn default_probe_offset(grid: &GridSpec, eps: f64) -> f64 {
    let h = if grid.dim() == 2 { grid.hx().max(grid.hy()) } else { grid.hx() };
    (3.0 * eps).max(2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;
    use crate::potential::Quartic;
    use std::sync::LazyLock;

    static WT: LazyLock<DynWTransform> =
        LazyLock::new(|| WTransform::new(Arc::new(Quartic::normalized()) as Arc<dyn DoubleWell>));

    fn state(phi: ScalarField, theta: ScalarField) -> SimState {
        SimState::at_rest(phi.clone(), phi.map(|_| 0.0), theta)
    }

    #[test]
    fn energy_pure_phase() {
        let g = GridSpec::new_2d(8, 6, 2.0, 1.5).unwrap();
        let mut m = ModelSpec::new(0.05, Variant::Darcy);
        m.chi = 0.3;
        let s = state(ScalarField::constant(g, 1.0), ScalarField::zeros(g));
        let e = energy_total(&s, &m);
        assert!((e + 0.5 * 0.09 * 3.0).abs() < 1e-14);
        m.chi = 0.0;
        assert_eq!(energy_total(&s, &m), 0.0);
        let (gl, d) = gl_density_and_discrepancy(&s.phi, 0.05, &Quartic::normalized());
        assert_eq!((gl, d), (0.0, 0.0));
    }

    #[test]
    fn tanh_profile_unit_energy_and_equipartition() {
        let eps = 0.01;
        let g = GridSpec::new_1d(4000, 1.0).unwrap();
        let phi = ScalarField::from_fn(g, |x, _| (0.75 * (x - 0.5) / eps).tanh());
        let m = ModelSpec::new(eps, Variant::ZeroVelocity);
        let e = energy_total(&state(phi.clone(), ScalarField::zeros(g)), &m);
        assert!((e - 1.0).abs() < 0.05, "{e}");
        let (gl, disc) = gl_density_and_discrepancy(&phi, eps, &Quartic::normalized());
        assert!((gl - e).abs() < 1e-12);
        assert!(disc < 1e-3 * gl, "{disc}");
        let rec = uniform_estimate_norms(&state(phi, ScalarField::zeros(g)), &m, &WT);
        assert!((rec.tv_w - 1.0).abs() < 0.05 * 1.0, "{}", rec.tv_w);
    }

    #[test]
    fn discrepancy_second_order() {
        let eps = 0.05;
        let disc = |nx: usize| {
            let g = GridSpec::new_1d(nx, 1.0).unwrap();
            let phi = ScalarField::from_fn(g, |x, _| (0.75 * (x - 0.5) / eps).tanh());
            // signed discrepancy integral of |ξ|
            let g2 = cell_grad_sq(&grid::grad_cc_to_face(&phi));
            let pot = Quartic::normalized();
            phi.data()
                .iter()
                .zip(&g2)
                .map(|(&p, &s)| (0.5 * eps * s - pot.psi(p) / eps).abs())
                .sum::<f64>()
                * g.cell_volume()
        };
        let (a, b) = (disc(200), disc(400));
        assert!((a / b).log2() > 1.7, "{a} {b}");
    }

    #[test]
    fn pure_phase_norms_vanish() {
        let g = GridSpec::new_1d(16, 1.0).unwrap();
        let m = ModelSpec::new(0.1, Variant::ZeroVelocity);
        let rec = uniform_estimate_norms(&state(ScalarField::constant(g, 1.0), ScalarField::zeros(g)), &m, &WT);
        assert_eq!(rec.l2_phi_dev, 0.0);
        assert_eq!(rec.tv_w, 0.0);
    }

    #[test]
    fn holder_examples() {
        let g = GridSpec::new_1d(8, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x, _| x);
        let snap = |t: f64, f: &ScalarField| Snapshot {
            t,
            phi: f.clone(),
            w: f.clone(),
        };
        assert_eq!(holder_quotients(&[snap(0.0, &f), snap(1.0, &f)]), (0.0, 0.0));
        let f2 = f.map(|v| v + 0.5);
        let (qp, qw) = holder_quotients(&[snap(0.0, &f), snap(16.0, &f2)]);
        assert!((qp - 0.25 / 2.0).abs() < 1e-14);
        assert!((qw - 0.5 / 2f64.powf(0.5)).abs() < 1e-14);
    }

    #[test]
    fn interface_examples() {
        let g = GridSpec::new_1d(50, 1.0).unwrap();
        assert!(extract_interface(&ScalarField::constant(g, 1.0)).is_empty());
        let x0 = 0.437;
        let phi = ScalarField::from_fn(g, |x, _| (10.0 * (x - x0)).tanh());
        let p = extract_interface(&phi);
        assert_eq!(p.crossings.len(), 1);
        assert!((p.crossings[0].x - x0).abs() < g.hx());

        let g = GridSpec::new_2d(128, 128, 1.0, 1.0).unwrap();
        let r = 0.3;
        let phi = ScalarField::from_fn(g, |x, y| (20.0 * (r - ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt())).tanh());
        let len = extract_interface(&phi).length.unwrap();
        let exact = 2.0 * std::f64::consts::PI * r;
        assert!((len - exact).abs() < 0.1 * exact, "{len}");
    }

    #[test]
    fn sigma_jump_examples() {
        let eps = 0.02;
        let g = GridSpec::new_1d(200, 1.0).unwrap();
        let phi = ScalarField::from_fn(g, |x, _| (0.75 * (x - 0.5) / eps).tanh());
        let mut m = ModelSpec::new(eps, Variant::ZeroVelocity);
        let delta = default_probe_offset(&g, eps);
        // χ = 0: σ = θ continuous
        let s = state(phi.clone(), ScalarField::from_fn(g, |x, _| x));
        let j = measure_sigma_jump(&s, &m, delta).unwrap().unwrap();
        assert!((j - 2.0 * delta).abs() < 1e-9);
        // θ constant: jump = χ(φ(+δ) - φ(-δ))
        m.chi = 0.2;
        let s = state(phi.clone(), ScalarField::constant(g, 0.7));
        let j = measure_sigma_jump(&s, &m, delta).unwrap().unwrap();
        assert!((j - 0.4).abs() < 0.01, "{j}");
        // invariant under θ + const
        let s2 = state(phi.clone(), ScalarField::constant(g, -3.0));
        let j2 = measure_sigma_jump(&s2, &m, delta).unwrap().unwrap();
        assert!((j - j2).abs() < 1e-12);
        // reversed orientation keeps the sign convention
        let phi_r = phi.map(|p| -p);
        let s3 = state(phi_r, ScalarField::constant(g, 0.7));
        let j3 = measure_sigma_jump(&s3, &m, delta).unwrap().unwrap();
        assert!((j3 - j).abs() < 1e-12);
        // no interface
        let s4 = state(ScalarField::constant(g, 1.0), ScalarField::zeros(g));
        assert_eq!(measure_sigma_jump(&s4, &m, delta).unwrap(), None);
        // offset too large for the domain
        assert!(matches!(measure_sigma_jump(&s, &m, 0.8), Err(Error::Probe(_))));
        assert!(matches!(measure_sigma_jump(&s, &m, 0.001), Err(Error::Probe(_))));
    }

    #[test]
    fn sigma_jump_2d_circle() {
        let g = GridSpec::new_2d(96, 96, 1.0, 1.0).unwrap();
        let mut m = ModelSpec::new(0.03, Variant::ZeroVelocity);
        m.chi = 0.25;
        let phi = ScalarField::from_fn(g, |x, y| (25.0 * (0.3 - ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt())).tanh());
        let s = state(phi, ScalarField::constant(g, 0.1));
        let j = measure_sigma_jump(&s, &m, 0.09).unwrap().unwrap();
        assert!((j - 0.5).abs() < 0.02, "{j}");
    }
}
