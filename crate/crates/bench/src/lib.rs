//! Fixtures shared by the benchmarks.

use chd_core::{GridSpec, InitKind, InitialData, ModelSpec, ScalarField, SimState, Simulator, StepSettings, Variant};

pub fn square(n: usize) -> GridSpec {
    GridSpec::new_2d(n, n, 1.0, 1.0).expect("valid grid")
}

pub fn smooth_field(g: GridSpec) -> ScalarField {
    ScalarField::from_fn(g, |x, y| (3.1 * x).sin() * (2.3 * y).cos() + 0.3 * x * y)
}

/// A simulator and an ellipse state ready to be stepped.
pub fn ellipse_case(n: usize, variant: Variant) -> (Simulator, SimState) {
    let g = square(n);
    let eps = 4.0 / n as f64;
    let init = InitialData {
        kind: InitKind::TanhEllipse {
            center: (0.5, 0.5),
            rx: 0.3,
            ry: 0.2,
            width_scale: 1.0,
        },
        u0: 0.0,
        sigma0: 0.0,
    }
    .with_natural_mean(&g, eps)
    .expect("natural mean");
    let mut model = ModelSpec::new(eps, variant);
    model.t_end = 1.0;
    let sim = Simulator::new(g, model, StepSettings::default()).expect("simulator");
    let state = sim.initial_state(&init).expect("initial state");
    (sim, state)
}
