//! Model parameters, source terms and initial data.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{self, FaceVectorField, GridSpec, ScalarField};
use crate::potential::{growth_constants, DoubleWell, Quartic};
use crate::rng::SplitMix64;

/// Velocity law closing the system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Darcy,
    /// Brinkman with a fixed viscosity η.
    Brinkman { eta: f64 },
    /// Brinkman with η = ε^β.
    BrinkmanScaled { beta: f64 },
    ZeroVelocity,
}

impl Variant {
    /// Brinkman viscosity for the given ε, `None` for the non-viscous variants.
    pub fn eta(&self, eps: f64) -> Option<f64> {
        match *self {
            Variant::Brinkman { eta } => Some(eta),
            Variant::BrinkmanScaled { beta } => Some(eps.powf(beta)),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Darcy => "darcy",
            Variant::Brinkman { .. } => "brinkman",
            Variant::BrinkmanScaled { .. } => "brinkman_scaled",
            Variant::ZeroVelocity => "zero_velocity",
        }
    }

    pub fn allows_volume_source(&self) -> bool {
        matches!(self, Variant::Darcy)
    }
}

/// A scalar function of φ bounded between positive constants.
#[derive(Clone)]
pub enum Mobility {
    Constant(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Mobility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mobility::Constant(c) => write!(f, "Constant({c})"),
            Mobility::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Default for Mobility {
    fn default() -> Self {
        Mobility::Constant(1.0)
    }
}

impl Mobility {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Mobility::Constant(c) => *c,
            Mobility::Custom(f) => f(s),
        }
    }

    /// `(min, max)` of the mobility over `s ∈ [-2, 2]` (step 1e-3).
    pub fn bounds(&self) -> (f64, f64) {
        (0..=4000)
            .map(|k| self.eval(-2.0 + k as f64 * 1e-3))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn check_bounds(&self, name: &str) -> Result<(f64, f64)> {
        let (lo, hi) = self.bounds();
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::config(format!(
                "mobility {name} must be bounded between positive constants on [-2, 2] (found min {lo}, max {hi})"
            )));
        }
        Ok((lo, hi))
    }

    /// Mobility on faces, evaluated at the face average of φ.
    pub fn on_faces(&self, phi: &ScalarField) -> FaceVectorField {
        match self {
            Mobility::Constant(c) => FaceVectorField::constant(*phi.grid(), *c),
            Mobility::Custom(f) => grid::face_interp(phi).map(|s| f(s)),
        }
    }
}

pub type SpaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// `offset + amp · cos(kx π x / lx) · cos(ky π y / ly) · cos(ω t)`.
///
/// Cosines with integer wave numbers satisfy the no-flux conditions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CosineMode {
    pub amp: f64,
    pub kx: f64,
    pub ky: f64,
    pub offset: f64,
    pub omega: f64,
}

impl CosineMode {
    pub fn eval(&self, x: f64, y: f64, t: f64, lx: f64, ly: f64) -> f64 {
        use std::f64::consts::PI;
        self.offset
            + self.amp
                * (self.kx * PI * x / lx).cos()
                * (self.ky * PI * y / ly).cos()
                * (self.omega * t).cos()
    }

    pub fn is_zero(&self) -> bool {
        self.amp == 0.0 && self.offset == 0.0
    }
}

/// Source terms: `U(x)` in the φ equation, `S(x,t)` in the σ equation and
/// the volume source `H(x,t)` in `div v = H`. `U` and `H` are projected to
/// zero mean when sampled.
#[derive(Clone, Default)]
pub struct SourceSpec {
    pub u: Option<SpaceFn>,
    pub s: Option<SpaceTimeFn>,
    pub h: Option<SpaceTimeFn>,
}

impl fmt::Debug for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceSpec")
            .field("u", &self.u.is_some())
            .field("s", &self.s.is_some())
            .field("h", &self.h.is_some())
            .finish()
    }
}

impl SourceSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn from_modes(
        u: Option<CosineMode>,
        s: Option<CosineMode>,
        h: Option<CosineMode>,
        grid: &GridSpec,
    ) -> Self {
        let (lx, ly) = (grid.lx(), grid.ly());
        Self {
            u: u.filter(|m| !m.is_zero())
                .map(|m| Arc::new(move |x, y| m.eval(x, y, 0.0, lx, ly)) as SpaceFn),
            s: s.filter(|m| !m.is_zero())
                .map(|m| Arc::new(move |x, y, t| m.eval(x, y, t, lx, ly)) as SpaceTimeFn),
            h: h.filter(|m| !m.is_zero())
                .map(|m| Arc::new(move |x, y, t| m.eval(x, y, t, lx, ly)) as SpaceTimeFn),
        }
    }

    pub fn sample_u(&self, grid: &GridSpec) -> ScalarField {
        match &self.u {
            Some(f) => {
                let mut u = ScalarField::from_fn(*grid, |x, y| f(x, y));
                u.project_mean_zero();
                u
            }
            None => ScalarField::zeros(*grid),
        }
    }

    pub fn sample_s(&self, grid: &GridSpec, t: f64) -> ScalarField {
        match &self.s {
            Some(f) => ScalarField::from_fn(*grid, |x, y| f(x, y, t)),
            None => ScalarField::zeros(*grid),
        }
    }

    pub fn sample_h(&self, grid: &GridSpec, t: f64) -> ScalarField {
        match &self.h {
            Some(f) => {
                let mut h = ScalarField::from_fn(*grid, |x, y| f(x, y, t));
                h.project_mean_zero();
                h
            }
            None => ScalarField::zeros(*grid),
        }
    }

    /// True if the sampled `H` is not identically zero at some probe time in `[0, t_end]`.
    pub fn h_active(&self, grid: &GridSpec, t_end: f64) -> bool {
        if self.h.is_none() {
            return false;
        }
        (0..=8).any(|k| self.sample_h(grid, t_end * k as f64 / 8.0).max_abs() > 0.0)
    }
}

/// Full set of physical parameters of one run.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub eps: f64,
    pub chi: f64,
    /// Inverse permeability 𝒦.
    pub k_perm: f64,
    pub variant: Variant,
    pub mobility_m: Mobility,
    pub mobility_n: Mobility,
    pub potential: Arc<dyn DoubleWell>,
    pub sources: SourceSpec,
    pub t_end: f64,
}

impl ModelSpec {
    pub fn new(eps: f64, variant: Variant) -> Self {
        Self {
            eps,
            chi: 0.0,
            k_perm: 1.0,
            variant,
            mobility_m: Mobility::default(),
            mobility_n: Mobility::default(),
            potential: Arc::new(Quartic::normalized()),
            sources: SourceSpec::none(),
            t_end: 0.0,
        }
    }

    pub fn eta(&self) -> Option<f64> {
        self.variant.eta(self.eps)
    }

    /// Parameter ranges, mobility bounds and the growth requirement on Ψ.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::config(format!("model.eps must be positive (got {})", self.eps)));
        }
        if !(self.chi >= 0.0 && self.chi.is_finite()) {
            return Err(Error::config(format!("model.chi must be >= 0 (got {})", self.chi)));
        }
        if !(self.k_perm > 0.0 && self.k_perm.is_finite()) {
            return Err(Error::config(format!("model.K must be positive (got {})", self.k_perm)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config(format!("model.T must be >= 0 (got {})", self.t_end)));
        }
        match self.variant {
            Variant::Brinkman { eta } if !(eta > 0.0 && eta.is_finite()) => {
                return Err(Error::config(format!("model.eta must be positive (got {eta})")));
            }
            Variant::BrinkmanScaled { beta } if !(beta > 0.0 && beta.is_finite()) => {
                return Err(Error::config(format!("model.beta must be positive (got {beta})")));
            }
            _ => {}
        }
        self.mobility_m.check_bounds("m")?;
        self.mobility_n.check_bounds("n")?;
        let q = self.potential.growth_exponent();
        let needed_ok = match self.variant {
            Variant::ZeroVelocity => q > 2.0,
            _ => q >= 4.0,
        };
        if !needed_ok {
            return Err(Error::config(format!(
                "potential growth exponent q = {q} is too small for the {} variant",
                self.variant.name()
            )));
        }
        Ok(())
    }

    /// The admissibility conditions on a run: the terminal-time condition
    /// `|u0| + T·sup|U| < 1`, the guard `eps <= eps0 = min(1, k0/chi²)` and the
    /// absence of volume sources for the solenoidal variants.
    pub fn check_admissibility(&self, grid: &GridSpec, u0: f64) -> Result<()> {
        self.validate()?;
        if !(u0.abs() < 1.0) {
            return Err(Error::config(format!("model.u0 must lie in (-1, 1) (got {u0})")));
        }
        let u_sup = self.sources.sample_u(grid).max_abs();
        let lhs = u0.abs() + self.t_end * u_sup;
        if lhs >= 1.0 {
            return Err(Error::config(format!(
                "terminal-time condition |u0| + T*sup|U| < 1 violated: |{u0}| + {} * {u_sup} = {lhs} >= 1",
                self.t_end
            )));
        }
        if self.chi > 0.0 {
            let k0 = growth_constants(self.potential.as_ref())?.k0;
            let eps0 = (k0 / (self.chi * self.chi)).min(1.0);
            if self.eps > eps0 {
                return Err(Error::config(format!(
                    "eps0 guard violated: eps = {} > eps0 = min(1, k0/chi^2) = {eps0} (k0 = {k0}, chi = {})",
                    self.eps, self.chi
                )));
            }
        }
        if !self.variant.allows_volume_source() && self.sources.h_active(grid, self.t_end) {
            return Err(Error::config(format!(
                "volume source H must vanish for the {} variant (nonzero H given)",
                self.variant.name()
            )));
        }
        Ok(())
    }
}

/// Shape of the initial phase field.
#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    /// Planar interface through `center` with unit normal `normal`; φ > 0 on the normal side.
    TanhStrip {
        center: (f64, f64),
        normal: (f64, f64),
        width_scale: f64,
    },
    /// Disc of radius `radius`; φ > 0 inside.
    TanhCircle {
        center: (f64, f64),
        radius: f64,
        width_scale: f64,
    },
    /// Axis-aligned ellipse; φ > 0 inside.
    TanhEllipse {
        center: (f64, f64),
        rx: f64,
        ry: f64,
        width_scale: f64,
    },
    /// `u0` plus uniform noise of the given amplitude.
    RandomPerturbation { amplitude: f64, seed: u64 },
}

/// Initial phase field with prescribed mean `u0` and constant `σ0`;
/// `θ0 = σ0 - χ φ0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub kind: InitKind,
    pub u0: f64,
    pub sigma0: f64,
}

impl InitialData {
    /// Samples φ0 and enforces `mean(φ0) = u0` by repeated shift and clamp to `[-1, 1]`.
    pub fn phi0(&self, grid: &GridSpec, eps: f64) -> Result<ScalarField> {
        if !(self.u0.abs() < 1.0) {
            return Err(Error::config(format!("initial mean u0 must lie in (-1, 1) (got {})", self.u0)));
        }
        let mut phi = self.profile(grid, eps)?;
        for _ in 0..200 {
            let shift = self.u0 - grid::mean(&phi);
            if shift.abs() <= 1e-14 {
                break;
            }
            for v in phi.data_mut() {
                *v = (*v + shift).clamp(-1.0, 1.0);
            }
        }
        let m = grid::mean(&phi);
        if (m - self.u0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "could not match initial mean u0 = {} (reached {m})",
                self.u0
            )));
        }
        Ok(phi)
    }

    /// Same data with `u0` replaced by the mean of the unshifted profile, so
    /// that the bulk values stay at ±1.
    pub fn with_natural_mean(mut self, grid: &GridSpec, eps: f64) -> Result<Self> {
        self.u0 = grid::mean(&self.profile(grid, eps)?);
        Ok(self)
    }

    /// The shape before the mean is adjusted.
    pub fn profile(&self, grid: &GridSpec, eps: f64) -> Result<ScalarField> {
        // equilibrium profile of the normalized quartic is tanh(3 s / (4 ε))
        let profile = |s: f64, w: f64| (0.75 * s / (eps * w)).tanh();
        let phi = match &self.kind {
            InitKind::TanhStrip {
                center,
                normal,
                width_scale,
            } => {
                let (nx, ny) = if grid.dim() == 1 { (1.0, 0.0) } else { *normal };
                let len = (nx * nx + ny * ny).sqrt();
                if !(len > 0.0) || !(*width_scale > 0.0) {
                    return Err(Error::config("strip normal must be nonzero and width_scale positive"));
                }
                let (nx, ny) = (nx / len, ny / len);
                ScalarField::from_fn(*grid, |x, y| {
                    let s = (x - center.0) * nx + if grid.dim() == 2 { (y - center.1) * ny } else { 0.0 };
                    profile(s, *width_scale)
                })
            }
            InitKind::TanhCircle {
                center,
                radius,
                width_scale,
            } => {
                if !(*radius > 0.0 && *width_scale > 0.0) {
                    return Err(Error::config("circle radius and width_scale must be positive"));
                }
                ScalarField::from_fn(*grid, |x, y| {
                    let d = if grid.dim() == 2 {
                        ((x - center.0).powi(2) + (y - center.1).powi(2)).sqrt()
                    } else {
                        (x - center.0).abs()
                    };
                    profile(radius - d, *width_scale)
                })
            }
            InitKind::TanhEllipse {
                center,
                rx,
                ry,
                width_scale,
            } => {
                if !(*rx > 0.0 && *ry > 0.0 && *width_scale > 0.0) {
                    return Err(Error::config("ellipse radii and width_scale must be positive"));
                }
                let rmin = rx.min(*ry);
                ScalarField::from_fn(*grid, |x, y| {
                    let dy = if grid.dim() == 2 { (y - center.1) / ry } else { 0.0 };
                    let r = (((x - center.0) / rx).powi(2) + dy * dy).sqrt();
                    profile((1.0 - r) * rmin, *width_scale)
                })
            }
            InitKind::RandomPerturbation { amplitude, seed } => {
                let mut rng = SplitMix64::new(*seed);
                let data = (0..grid.num_cells())
                    .map(|_| self.u0 + amplitude * (2.0 * rng.next_f64() - 1.0))
                    .collect();
                ScalarField::from_vec(*grid, data)?
            }
        };
        Ok(phi)
    }

    pub fn theta0(&self, phi0: &ScalarField, chi: f64) -> ScalarField {
        phi0.map(|p| self.sigma0 - chi * p)
    }
}
