use std::f64::consts::PI;

use chd_core::elliptic::{solve_poisson_neumann, NeumannPoissonOp};
use chd_core::grid::{div_face_to_cc, grad_cc_to_face, mean, upwind_advect};
use chd_core::sweep::{run_sweep, DtRule, GridRule, SweepPlan};
use chd_core::*;
use proptest::prelude::*;

fn tight() -> LinSolveConfig {
    LinSolveConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        max_iter: None,
    }
}

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    prop_oneof![
        (4usize..40, 0.3f64..3.0).prop_map(|(nx, lx)| GridSpec::new_1d(nx, lx).unwrap()),
        (4usize..24, 4usize..24, 0.3f64..3.0, 0.3f64..3.0)
            .prop_map(|(nx, ny, lx, ly)| GridSpec::new_2d(nx, ny, lx, ly).unwrap()),
    ]
}

fn random_cell(g: GridSpec, vals: &[f64]) -> ScalarField {
    let n = g.num_cells();
    ScalarField::from_vec(g, (0..n).map(|k| vals[k % vals.len()] * (1.0 + k as f64 * 0.01).sin()).collect()).unwrap()
}

/// Random face field with zero normal component on the boundary.
fn random_noflux(g: GridSpec, vals: &[f64]) -> FaceVectorField {
    let mut f = FaceVectorField::zeros(g);
    let (nx, ny) = (g.nx(), g.ny());
    let mut k = 0usize;
    let mut next = || {
        k += 1;
        vals[k % vals.len()] * (k as f64 * 0.37).cos()
    };
    for j in 0..ny {
        for i in 1..nx {
            let idx = f.xf_idx(i, j);
            f.x_faces[idx] = next();
        }
    }
    if g.dim() == 2 {
        for j in 1..ny {
            for i in 0..nx {
                let idx = f.yf_idx(i, j);
                f.y_faces[idx] = next();
            }
        }
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summation_by_parts(g in grid_strategy(), vals in prop::collection::vec(-10.0f64..10.0, 8..32)) {
        let c = random_cell(g, &vals);
        let f = random_noflux(g, &vals[1..]);
        let lhs = div_face_to_cc(&f).dot(&c);
        let rhs = f.dot(&grad_cc_to_face(&c));
        let scale = div_face_to_cc(&f).l2_norm() * c.l2_norm() + f.l2_norm() * grad_cc_to_face(&c).l2_norm();
        prop_assert!((lhs + rhs).abs() <= 1e-12 * scale.max(1e-300), "{lhs} + {rhs}");
    }

    #[test]
    fn divergence_of_noflux_field_has_zero_integral(g in grid_strategy(), vals in prop::collection::vec(-5.0f64..5.0, 4..16)) {
        let d = div_face_to_cc(&random_noflux(g, &vals));
        prop_assert!(d.integral().abs() <= 1e-12 * d.l1_norm().max(1.0));
    }

    #[test]
    fn upwind_advection_conserves(g in grid_strategy(), vals in prop::collection::vec(-5.0f64..5.0, 4..16)) {
        let c = random_cell(g, &vals);
        let v = random_noflux(g, &vals[1..]);
        let a = upwind_advect(&c, &v);
        prop_assert!(a.integral().abs() <= 1e-12 * a.l1_norm().max(1.0));
    }

    #[test]
    fn poisson_solution_reproduces_rhs(g in grid_strategy(), vals in prop::collection::vec(-1.0f64..1.0, 4..16)) {
        let mut rhs = random_cell(g, &vals);
        rhs.project_mean_zero();
        let (u, _) = solve_poisson_neumann(&rhs, &tight()).unwrap();
        let back = NeumannPoissonOp::new(g).apply(&u);
        let err = back.zip_map(&rhs, |a, b| a - b).l2_norm();
        prop_assert!(err <= 1e-8 * rhs.l2_norm().max(1e-12));
        prop_assert!(mean(&u).abs() <= 1e-12);
    }
}

#[test]
fn poisson_manufactured_order_2d() {
    let (lx, ly) = (1.0, 0.75);
    let k2 = (PI / lx).powi(2) + (2.0 * PI / ly).powi(2);
    let err = |n: usize| {
        let g = GridSpec::new_2d(n, n, lx, ly).unwrap();
        let exact = ScalarField::from_fn(g, |x, y| (PI * x / lx).cos() * (2.0 * PI * y / ly).cos());
        let rhs = exact.map(|u| k2 * u);
        let (u, _) = solve_poisson_neumann(&rhs, &tight()).unwrap();
        u.zip_map(&exact, |a, b| a - b).max_abs()
    };
    let e: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| err(n)).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&order), "errors {e:?}");
    }
}

fn tiny_plan() -> SweepPlan {
    let mut base = ModelSpec::new(0.08, Variant::ZeroVelocity);
    base.t_end = 0.01;
    let init = InitialData {
        kind: InitKind::TanhStrip {
            center: (0.4, 0.0),
            normal: (1.0, 0.0),
            width_scale: 1.5,
        },
        u0: 0.1,
        sigma0: 0.0,
    };
    let mut p = SweepPlan::new(
        base,
        init,
        vec![0.08, 0.04, 0.02],
        GridRule {
            dim: 1,
            lx: 1.0,
            ly: 1.0,
            cells_per_eps: 8.0,
        },
        DtRule::fixed(1e-3),
    );
    p.metrics = vec!["L2_phi_dev".into(), "energy_E".into()];
    p
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let plan = tiny_plan();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run_sweep(&plan)).unwrap();
    let b = many.install(|| run_sweep(&plan)).unwrap();
    assert_eq!(a, b);
    let bits = |r: &sweep::SweepReport| -> Vec<u64> {
        r.results
            .iter()
            .flat_map(|x| x.outcome.as_ref().unwrap().final_record.values())
            .map(f64::to_bits)
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn single_eps_sweep_has_no_fit() {
    let mut plan = tiny_plan();
    plan.eps_list = vec![0.04];
    let r = run_sweep(&plan).unwrap();
    assert!(r.summary("L2_phi_dev").unwrap().fit.is_none());
    assert!(r.all_passed());
}

#[test]
fn stabilized_scheme_keeps_phi_bounded() {
    // dt ~ eps^2 keeps the step at a fixed fraction of the layer relaxation
    // time; the natural mean avoids the kink a clamped shift would leave
    let mut plan = tiny_plan();
    plan.dt = DtRule {
        dt_ref: 1e-3,
        eps_ref: 0.08,
        power: 2.0,
    };
    plan.diag_interval = 1;
    plan.natural_mean = true;
    let r = run_sweep(&plan).unwrap();
    for x in &r.results {
        let run = x.outcome.as_ref().unwrap();
        let worst = run.records.iter().map(|r| r.max_abs_phi).fold(0.0, f64::max);
        assert!(worst <= 1.0 + x.eps, "eps {} max {worst}", x.eps);
    }
}

#[test]
fn zero_velocity_run_conserves_mass_without_sources() {
    let g = GridSpec::new_2d(32, 32, 1.0, 1.0).unwrap();
    let mut m = ModelSpec::new(0.08, Variant::ZeroVelocity);
    m.t_end = 0.005;
    let init = InitialData {
        kind: InitKind::TanhCircle {
            center: (0.45, 0.5),
            radius: 0.25,
            width_scale: 1.0,
        },
        u0: 0.0,
        sigma0: 0.0,
    }
    .with_natural_mean(&g, m.eps)
    .unwrap();
    let sim = Simulator::new(g, m, StepSettings::default()).unwrap();
    let out = sim.run(&init, &RunSettings::new(5e-4), &mut ()).unwrap();
    assert!(out.mass_drift <= 1e-12, "{}", out.mass_drift);
    assert!(out.energies.windows(2).all(|w| w[1] <= w[0] + 1e-10 * w[0].abs()));
}
