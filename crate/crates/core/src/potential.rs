//! Double-well potentials and the Modica–Mortola transform
//! `W(y) = ∫_{-1}^{y} √(2 Ψ̃(s)) ds` with `Ψ̃ = min(Ψ, 1 + s²)`.

use std::fmt::Debug;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// A smooth non-negative potential with wells at ±1.
pub trait DoubleWell: Debug + Send + Sync {
    fn psi(&self, y: f64) -> f64;
    fn dpsi(&self, y: f64) -> f64;
    fn ddpsi(&self, y: f64) -> f64;
    /// Exponent `q` of the polynomial growth of Ψ at infinity.
    fn growth_exponent(&self) -> f64;

    fn psi_tilde(&self, y: f64) -> f64 {
        self.psi(y).min(1.0 + y * y)
    }
}

impl<T: DoubleWell + ?Sized> DoubleWell for std::sync::Arc<T> {
    fn psi(&self, y: f64) -> f64 {
        (**self).psi(y)
    }
    fn dpsi(&self, y: f64) -> f64 {
        (**self).dpsi(y)
    }
    fn ddpsi(&self, y: f64) -> f64 {
        (**self).ddpsi(y)
    }
    fn growth_exponent(&self) -> f64 {
        (**self).growth_exponent()
    }
    fn psi_tilde(&self, y: f64) -> f64 {
        (**self).psi_tilde(y)
    }
}

/// `Ψ(s) = a (1 - s²)²`; `a = 9/32` gives `∫_{-1}^{1} √(2Ψ) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartic {
    pub coeff: f64,
}

impl Quartic {
    pub const NORMALIZED_COEFF: f64 = 9.0 / 32.0;

    pub fn new(coeff: f64) -> Result<Self> {
        if !(coeff > 0.0 && coeff.is_finite()) {
            return Err(Error::config(format!(
                "potential coefficient must be positive (got {coeff})"
            )));
        }
        Ok(Self { coeff })
    }

    pub fn normalized() -> Self {
        Self {
            coeff: Self::NORMALIZED_COEFF,
        }
    }
}

impl Default for Quartic {
    fn default() -> Self {
        Self::normalized()
    }
}

impl DoubleWell for Quartic {
    fn psi(&self, y: f64) -> f64 {
        let t = 1.0 - y * y;
        self.coeff * t * t
    }
    fn dpsi(&self, y: f64) -> f64 {
        4.0 * self.coeff * (y * y * y - y)
    }
    fn ddpsi(&self, y: f64) -> f64 {
        4.0 * self.coeff * (3.0 * y * y - 1.0)
    }
    fn growth_exponent(&self) -> f64 {
        4.0
    }
}

// 15-point Kronrod rule with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = h * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (val, err) = gk15(f, a, b);
    if err <= tol || depth == 0 || (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
        return val;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, 0.5 * tol, depth - 1) + adaptive(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adaptive(&f, a, b, tol, 48)
}

/// `∫_{-1}^{1} √(2Ψ(s)) ds`; equals 1 for a normalized potential.
pub fn normalization_integral(pot: &dyn DoubleWell) -> f64 {
    integrate(|s| (2.0 * pot.psi(s)).sqrt(), -1.0, 1.0, 1e-13)
}

/// Checks the structural requirements on a potential: non-negativity, wells at ±1,
/// unit normalization and `Ψ ≤ 1 + y²` between the wells.
pub fn validate_double_well(pot: &dyn DoubleWell) -> Result<()> {
    for y in [-1.0, 1.0] {
        if pot.psi(y).abs() > 1e-14 || pot.dpsi(y).abs() > 1e-12 {
            return Err(Error::config(format!(
                "potential must have minima at ±1 (psi({y}) = {}, dpsi({y}) = {})",
                pot.psi(y),
                pot.dpsi(y)
            )));
        }
    }
    for k in 0..=6000 {
        let y = -3.0 + k as f64 * 1e-3;
        let p = pot.psi(y);
        if !(p >= 0.0) {
            return Err(Error::config(format!("potential is negative at y = {y}")));
        }
        if y.abs() <= 1.0 && p > 1.0 + y * y {
            return Err(Error::config(format!(
                "potential exceeds 1 + y^2 at y = {y} (psi = {p})"
            )));
        }
    }
    let norm = normalization_integral(pot);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::config(format!(
            "potential is not normalized: integral of sqrt(2 psi) over [-1,1] is {norm}"
        )));
    }
    Ok(())
}

const TABLE_LO: f64 = -10.0;
const TABLE_STEP: f64 = 1e-3;
const TABLE_PANELS: usize = 20_000;
const ANCHOR: usize = 9_000; // TABLE_LO + ANCHOR * TABLE_STEP = -1

/// Constants of the pointwise inequalities `(|y|-1)² ≤ C₀ Ψ(y)` and
/// `C₁ |y₁-y₂|² ≤ |W(y₁) - W(y₂)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityConstants {
    pub c_zero: f64,
    pub c_one: f64,
}

/// Growth constants: `Ψ''(y) ≥ c₀|y|^{q-2}` and `Ψ(y) ≥ k₀|y|^q - k₁` for `|y| > 1 - c₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConstants {
    pub q: f64,
    pub c0: f64,
    pub k0: f64,
    pub k1: f64,
}

/// `W` and its inverse, backed by a cumulative table on `[-10, 10]` with spacing `1e-3`.
#[derive(Debug)]
pub struct WTransform<P: DoubleWell> {
    pot: P,
    cum: Vec<f64>,
    constants: OnceLock<InequalityConstants>,
}

impl<P: DoubleWell> WTransform<P> {
    pub fn new(pot: P) -> Self {
        let integrand = |s: f64| (2.0 * pot.psi_tilde(s)).sqrt();
        let panels: Vec<f64> = (0..TABLE_PANELS)
            .into_par_iter()
            .map(|k| {
                integrate(
                    integrand,
                    node(k),
                    node(k + 1),
                    1e-15,
                )
            })
            .collect();
        // compensated running sums outward from the anchor at y = -1
        let mut cum = vec![0.0; TABLE_PANELS + 1];
        let (mut s, mut comp) = (0.0, 0.0);
        for k in ANCHOR..TABLE_PANELS {
            neumaier_add(&mut s, &mut comp, panels[k]);
            cum[k + 1] = s + comp;
        }
        let (mut s, mut comp) = (0.0, 0.0);
        for k in (0..ANCHOR).rev() {
            neumaier_add(&mut s, &mut comp, -panels[k]);
            cum[k] = s + comp;
        }
        Self {
            pot,
            cum,
            constants: OnceLock::new(),
        }
    }

    pub fn potential(&self) -> &P {
        &self.pot
    }

    fn integrand(&self, s: f64) -> f64 {
        (2.0 * self.pot.psi_tilde(s)).sqrt()
    }

    fn partial(&self, a: f64, b: f64) -> f64 {
        integrate(|s| self.integrand(s), a, b, 1e-14)
    }

    /// `W(y)`.
    pub fn w(&self, y: f64) -> f64 {
        let hi = node(TABLE_PANELS);
        if y < TABLE_LO {
            return self.cum[0] - self.partial(y, TABLE_LO);
        }
        if y > hi {
            return self.cum[TABLE_PANELS] + self.partial(hi, y);
        }
        let mut k = (((y - TABLE_LO) / TABLE_STEP).floor() as usize).min(TABLE_PANELS - 1);
        if node(k) > y {
            k -= 1;
        } else if k + 1 < TABLE_PANELS && node(k + 1) <= y {
            k += 1;
        }
        let yk = node(k);
        if y == yk {
            return self.cum[k];
        }
        self.cum[k] + self.partial(yk, y)
    }

    /// `W'(y) = √(2Ψ̃(y))`.
    pub fn dw(&self, y: f64) -> f64 {
        self.integrand(y)
    }

    /// Inverse of [`Self::w`]; `W` is a strictly increasing bijection of ℝ.
    pub fn w_inv(&self, z: f64) -> f64 {
        let (mut lo, mut hi);
        if z < self.cum[0] {
            hi = TABLE_LO;
            let mut step = 1.0;
            lo = hi - step;
            while self.w(lo) > z {
                hi = lo;
                step *= 2.0;
                lo -= step;
            }
        } else if z > self.cum[TABLE_PANELS] {
            lo = node(TABLE_PANELS);
            let mut step = 1.0;
            hi = lo + step;
            while self.w(hi) < z {
                lo = hi;
                step *= 2.0;
                hi += step;
            }
        } else {
            // first index with cum[k] > z
            let k = self.cum.partition_point(|&c| c <= z);
            if k > 0 && self.cum[k - 1] == z {
                return node(k - 1);
            }
            lo = node(k - 1);
            hi = node(k.min(TABLE_PANELS));
        }

        let mut y = 0.5 * (lo + hi);
        for _ in 0..200 {
            let r = self.w(y) - z;
            if r.abs() <= 1e-14 * (1.0 + z.abs()) {
                return y;
            }
            if r > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            if hi - lo <= 4.0 * f64::EPSILON * (1.0 + y.abs()) {
                return y;
            }
            let d = self.dw(y);
            let newton = if d > 0.0 { y - r / d } else { f64::NAN };
            y = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        y
    }

    /// Brute-force discovery of the constants `C₀` and `C₁` over `[-3, 3]`, step `1e-3`,
    /// verified on a step `1e-4` grid. Cached after the first call.
    pub fn inequality_constants(&self) -> Result<InequalityConstants> {
        if let Some(c) = self.constants.get() {
            return Ok(*c);
        }
        let c = discover_constants(self)?;
        Ok(*self.constants.get_or_init(|| c))
    }
}

// Nodes are k/1000 - 10, computed so that integers and ±1 are exact.
fn node(k: usize) -> f64 {
    (k as f64 - 10_000.0) / 1000.0
}

fn neumaier_add(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

fn c0_ratio(pot: &dyn DoubleWell, y: f64) -> f64 {
    if (y.abs() - 1.0).abs() < 1e-12 {
        // both sides vanish to second order; use the limit 2/Ψ''(±1)
        2.0 / pot.ddpsi(y.signum())
    } else {
        let d = y.abs() - 1.0;
        d * d / pot.psi(y)
    }
}

/// Scans for `C₀` and `C₁` and verifies them, together with the upper bound
/// `|W(y₁)-W(y₂)| ≤ √2 |y₁-y₂| (1+|y₁|+|y₂|)`, on a finer grid.
pub fn discover_constants<P: DoubleWell>(wt: &WTransform<P>) -> Result<InequalityConstants> {
    let pot = wt.potential();
    let coarse: Vec<f64> = (0..=6000).map(|k| -3.0 + k as f64 * 1e-3).collect();

    let c_zero_raw = coarse
        .iter()
        .map(|&y| c0_ratio(pot, y))
        .fold(0.0_f64, f64::max);
    if !(c_zero_raw.is_finite() && c_zero_raw > 0.0) {
        return Err(Error::Internal(format!("C0 scan produced {c_zero_raw}")));
    }

    let w_coarse: Vec<f64> = coarse.iter().map(|&y| wt.w(y)).collect();
    let c_one_raw = pair_min(&coarse, &w_coarse, &coarse, &w_coarse)?;
    if !(c_one_raw > 0.0) {
        return Err(Error::Internal(format!("C1 scan produced {c_one_raw}")));
    }

    let c_zero = c_zero_raw * (1.0 + 1e-4);
    let c_one = c_one_raw * (1.0 - 1e-4);

    let fine: Vec<f64> = (0..=60_000).map(|k| -3.0 + k as f64 * 1e-4).collect();
    for &y in &fine {
        let d = y.abs() - 1.0;
        if d * d > c_zero * pot.psi(y) * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::Internal(format!(
                "C0 = {c_zero} fails verification at y = {y}"
            )));
        }
    }
    let w_fine: Vec<f64> = fine.par_iter().map(|&y| wt.w(y)).collect();
    let verify_min = pair_min(&fine, &w_fine, &coarse, &w_coarse)?;
    if verify_min < c_one {
        return Err(Error::Internal(format!(
            "C1 = {c_one} fails verification (fine-grid minimum {verify_min})"
        )));
    }
    Ok(InequalityConstants { c_zero, c_one })
}

/// Minimum of `|ΔW| / |Δy|²` over all pairs, also checking the √2 upper bound.
fn pair_min(ya: &[f64], wa: &[f64], yb: &[f64], wb: &[f64]) -> Result<f64> {
    let res: Result<f64> = ya
        .par_iter()
        .zip(wa.par_iter())
        .map(|(&y1, &w1)| {
            let mut m = f64::INFINITY;
            for (&y2, &w2) in yb.iter().zip(wb) {
                let dy = (y1 - y2).abs();
                if dy < 1e-9 {
                    continue;
                }
                let dw = (w1 - w2).abs();
                let upper = std::f64::consts::SQRT_2 * dy * (1.0 + y1.abs() + y2.abs());
                if dw > upper * (1.0 + 1e-12) {
                    return Err(Error::Internal(format!(
                        "upper bound on |W(y1)-W(y2)| fails at ({y1}, {y2})"
                    )));
                }
                m = m.min(dw / (dy * dy));
            }
            Ok(m)
        })
        .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)));
    res
}

/// Largest `c₀ ∈ (0,1)` with `Ψ''(y) ≥ c₀|y|^{q-2}` for `1-c₀ < |y| ≤ 100` (bisection),
/// then `k₀ = min Ψ/|y|^q` over `2 ≤ |y| ≤ 100` and the smallest matching `k₁ ≥ 0`.
pub fn growth_constants(pot: &dyn DoubleWell) -> Result<GrowthConstants> {
    let q = pot.growth_exponent();
    let sample = |from: f64, to: f64| -> Vec<f64> {
        let mut ys = Vec::new();
        let mut y = from;
        while y <= to {
            ys.push(y);
            ys.push(-y);
            y += if y < 4.0 { 1e-3 } else { 1e-2 * y };
        }
        ys
    };
    let feasible = |c: f64| {
        sample(1.0 - c, 100.0)
            .into_iter()
            .all(|y| pot.ddpsi(y) >= c * y.abs().powf(q - 2.0))
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if !feasible(1e-6) {
        return Err(Error::Internal(
            "no positive growth constant c0 found for the potential".into(),
        ));
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c0 = lo;
    let k0 = sample(2.0, 100.0)
        .into_iter()
        .map(|y| pot.psi(y) / y.abs().powf(q))
        .fold(f64::INFINITY, f64::min);
    if !(k0 > 0.0) {
        return Err(Error::Internal(format!("growth constant k0 = {k0}")));
    }
    let k1 = sample(1.0 - c0, 100.0)
        .into_iter()
        .map(|y| k0 * y.abs().powf(q) - pot.psi(y))
        .fold(0.0_f64, f64::max);
    Ok(GrowthConstants { q, c0, k0, k1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::LazyLock;

    static WT: LazyLock<WTransform<Quartic>> =
        LazyLock::new(|| WTransform::new(Quartic::normalized()));

    // On [-1,1] the normalized quartic gives W(y) = (3/4)(y - y³/3) + 1/2.
    fn w_closed(y: f64) -> f64 {
        0.75 * (y - y * y * y / 3.0) + 0.5
    }

    #[test]
    fn quartic_values() {
        let p = Quartic::normalized();
        assert_eq!(p.psi(1.0), 0.0);
        assert_eq!(p.psi(-1.0), 0.0);
        assert_eq!(p.psi(0.0), 0.28125);
        assert_eq!(p.dpsi(1.0), 0.0);
        assert_eq!(p.dpsi(-1.0), 0.0);
        // derivatives against central differences
        for &y in &[-2.3, -0.4, 0.1, 0.9, 1.7] {
            let h = 1e-5;
            let fd1 = (p.psi(y + h) - p.psi(y - h)) / (2.0 * h);
            let fd2 = (p.dpsi(y + h) - p.dpsi(y - h)) / (2.0 * h);
            assert!((fd1 - p.dpsi(y)).abs() < 1e-8);
            assert!((fd2 - p.ddpsi(y)).abs() < 1e-8);
        }
        assert!(Quartic::new(0.0).is_err());
        validate_double_well(&p).unwrap();
        assert!(validate_double_well(&Quartic::new(0.3).unwrap()).is_err());
    }

    #[test]
    fn psi_tilde_examples() {
        let p = Quartic::normalized();
        for k in 0..=200 {
            let y = -1.0 + k as f64 * 0.01;
            assert_eq!(p.psi_tilde(y), p.psi(y));
        }
        assert_eq!(p.psi_tilde(1.0), 0.0);
        assert_eq!(p.psi_tilde(-1.0), 0.0);
        assert_eq!(p.psi_tilde(10.0), 101.0);
        assert!((p.psi(10.0) - 2756.53125).abs() < 1e-9);
    }

    #[test]
    fn normalization() {
        let n = normalization_integral(&Quartic::normalized());
        assert!((n - 1.0).abs() <= 1e-8, "{n}");
        // analytic: (4/3)√(2a)
        let a = 0.5;
        let n = normalization_integral(&Quartic::new(a).unwrap());
        assert!((n - 4.0 / 3.0 * (2.0 * a).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn w_examples() {
        assert_eq!(WT.w(-1.0), 0.0);
        assert!((WT.w(1.0) - 1.0).abs() < 1e-12);
        assert!((WT.w(0.0) - 0.5).abs() < 1e-12);
        for k in 0..=40 {
            let y = -1.0 + k as f64 * 0.05 + 0.0123 * (k % 3) as f64;
            let y = y.min(1.0);
            assert!((WT.w(y) - w_closed(y)).abs() < 1e-10, "y={y}");
        }
        // outside [-1,1], compare to direct quadrature
        for &y in &[-12.5, -4.0, -1.3, 1.8, 2.5, 7.0, 15.0] {
            let direct = integrate(|s| (2.0 * Quartic::normalized().psi_tilde(s)).sqrt(), -1.0, y, 1e-13);
            assert!((WT.w(y) - direct).abs() < 1e-9, "y={y}");
        }
    }

    #[test]
    fn w_inv_examples() {
        assert_eq!(WT.w_inv(0.0), -1.0);
        assert!((WT.w_inv(1.0) - 1.0).abs() < 1e-9);
        assert!((WT.w_inv(WT.w(0.3)) - 0.3).abs() < 1e-9);
        for &z in &[-300.0, -5.0, 0.25, 0.5, 0.999, 3.0, 120.0, 5000.0] {
            let y = WT.w_inv(z);
            assert!((WT.w(y) - z).abs() <= 1e-10 * (1.0 + z.abs()), "z={z}");
        }
    }

    #[test]
    fn constants_quartic() {
        let c = WT.inequality_constants().unwrap();
        // (|y|-1)²/Ψ(y) = (32/9)/(1+|y|)², maximal at y = 0
        assert!(c.c_zero >= 32.0 / 9.0 && c.c_zero < 32.0 / 9.0 * 1.001);
        assert!(c.c_one > 0.0);
        // independent check using the closed form of W on [-1,1]
        let mut m = f64::INFINITY;
        for a in 0..=200 {
            for b in (a + 1)..=200 {
                let (y1, y2) = (-1.0 + a as f64 * 0.01, -1.0 + b as f64 * 0.01);
                m = m.min((w_closed(y1) - w_closed(y2)).abs() / (y1 - y2).powi(2));
            }
        }
        assert!(c.c_one <= m);
        assert_eq!(WT.inequality_constants().unwrap(), c);
    }

    #[test]
    fn w_monotone_on_random_pairs() {
        let mut rng = crate::rng::SplitMix64::new(7);
        for _ in 0..10_000 {
            let a = rng.uniform(-5.0, 5.0);
            let b = rng.uniform(-5.0, 5.0);
            if a < b {
                assert!(WT.w(a) < WT.w(b));
            } else if b < a {
                assert!(WT.w(b) < WT.w(a));
            }
        }
    }

    #[test]
    fn growth_quartic() {
        let g = growth_constants(&Quartic::normalized()).unwrap();
        assert_eq!(g.q, 4.0);
        // binding point is |y| = 1 - c0: (9/8)(3(1-c)²-1) = c(1-c)²
        let f = |c: f64| 1.125 * (3.0 * (1.0 - c).powi(2) - 1.0) - c * (1.0 - c).powi(2);
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((g.c0 - lo).abs() < 2e-3, "{} vs {lo}", g.c0);
        // Ψ/y⁴ = (9/32)(1 - 1/y²)² is increasing, minimum at |y| = 2
        assert!((g.k0 - 9.0 / 32.0 * 0.5625).abs() < 1e-12);
        assert!(g.k1 >= 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn w_strictly_increasing(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(WT.w(lo) < WT.w(hi));
        }

        #[test]
        fn w_round_trip(y in -20.0f64..20.0) {
            let z = WT.w(y);
            let back = WT.w_inv(z);
            prop_assert!((WT.w(back) - z).abs() <= 1e-10 * (1.0 + z.abs()));
        }

        #[test]
        fn w_two_sided_bound(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let c = WT.inequality_constants().unwrap();
            let dw = (WT.w(a) - WT.w(b)).abs();
            let dy = (a - b).abs();
            prop_assert!(c.c_one * dy * dy <= dw * (1.0 + 1e-9));
            prop_assert!(dw <= std::f64::consts::SQRT_2 * dy * (1.0 + a.abs() + b.abs()));
        }
    }
}
