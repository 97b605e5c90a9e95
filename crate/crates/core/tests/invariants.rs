use approx::assert_relative_eq;
use kslimit::dynamics::{step, SimConfig, SimState};
use kslimit::experiments::estimate_c0;
use kslimit::io::fmt_f64;
use kslimit::mesh::{chemotaxis_divergence, laplacian, Field, FluxMode, Grid, HelmholtzOperator};
use kslimit::theory::{
    condition_ass_pp, eta_closed_form, f_poly, h_sign, lyapunov_functional, phi_r, phi_r_floor, r_value,
    threshold_chi0_pe, threshold_chi0_pp, ChiParams, ConditionParams, EtaInputs,
};
use kslimit::InitPreset;
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = Grid> {
    prop_oneof![
        (4usize..40, 0.5f64..3.0).prop_map(|(n, l)| Grid::line(l, n).unwrap()),
        (4usize..12, 4usize..12, 0.5f64..2.0, 0.5f64..2.0)
            .prop_map(|(nx, ny, lx, ly)| Grid::rect(lx, ly, nx, ny).unwrap()),
    ]
}

fn field_in(g: Grid, lo: f64, hi: f64) -> impl Strategy<Value = Field> {
    proptest::collection::vec(lo..hi, g.len()).prop_map(move |v| Field::new(g, v).unwrap())
}

fn grid_and_fields() -> impl Strategy<Value = (Grid, Field, Field)> {
    grid_strategy().prop_flat_map(|g| (Just(g), field_in(g, 0.0, 3.0), field_in(g, 0.05, 3.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_integrates_to_zero((g, u, _) in grid_and_fields()) {
        let l = laplacian(&g, &u).unwrap();
        let scale: f64 = u.values().iter().map(|x| x.abs()).sum::<f64>() / (g.min_spacing() * g.min_spacing());
        prop_assert!(l.values().iter().sum::<f64>().abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn chemotaxis_flux_is_conservative((g, u, v) in grid_and_fields(), upwind in any::<bool>()) {
        let chi = ChiParams::new(2.0, 0.5, 2.0).unwrap();
        let mode = if upwind { FluxMode::Upwind } else { FluxMode::Centered };
        let d = chemotaxis_divergence(&g, &u, &v, &chi, mode).unwrap();
        let scale: f64 = d.values().iter().map(|x| x.abs()).sum();
        prop_assert!(d.values().iter().sum::<f64>().abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn helmholtz_solution_has_small_residual((g, u, _) in grid_and_fields(), alpha in 0.01f64..100.0) {
        prop_assume!(u.max() > 0.0);
        let op = HelmholtzOperator::new(g, alpha).unwrap();
        let w = op.solve(&u, 1e-10).unwrap();
        prop_assert!(op.relative_residual(&w, &u).unwrap() <= 1e-9);
        // integrating the equation: alpha ∫w = ∫rhs
        assert_relative_eq!(alpha * w.integral(), u.integral(), max_relative = 1e-8);
    }

    #[test]
    fn step_conserves_mass((g, u, v) in grid_and_fields(), lambda in 0.0f64..2.0, dt in 1e-4f64..1e-2) {
        prop_assume!(u.max() > 0.0);
        let chi = ChiParams::new(0.5, 1.0, 2.0).unwrap();
        let cfg = SimConfig::new(g, chi, lambda, dt, 1.0, InitPreset::Constant { u: 1.0, v: 1.0 });
        let s = SimState { u, v, t: 0.0, step: 0 };
        let n = step(&s, &cfg).unwrap();
        assert_relative_eq!(n.u.integral(), s.u.integral(), max_relative = 1e-10);
    }

    #[test]
    fn constant_states_are_fixed(g in grid_strategy(), c in 0.01f64..10.0, lambda in 0.0f64..10.0, dt in 1e-5f64..1.0) {
        let chi = ChiParams::new(3.0, 0.2, 1.5).unwrap();
        let cfg = SimConfig::new(g, chi, lambda, dt, 1.0, InitPreset::Constant { u: c, v: c });
        let s = SimState { u: Field::constant(g, c), v: Field::constant(g, c), t: 0.0, step: 0 };
        let n = step(&s, &cfg).unwrap();
        prop_assert!(n.u.values().iter().chain(n.v.values()).all(|x| (x - c).abs() <= 1e-12 * c.max(1.0)));
    }

    #[test]
    fn f_poly_positive(p in 1.0001f64..50.0, eps in 1e-6f64..0.499_999, lambda in 0.0f64..10.0) {
        let c = ConditionParams::new(p, eps, lambda, 2).unwrap();
        prop_assert!(f_poly(&c) > 0.0);
    }

    #[test]
    fn eta_below_initial_minimum(c0 in 1e-3f64..1.0, mass in 1e-3f64..100.0, vmin in 0.0f64..100.0) {
        let eta = eta_closed_form(&EtaInputs::new(c0, mass, vmin).unwrap());
        prop_assert!(eta >= 0.0 && eta <= vmin);
        let more = eta_closed_form(&EtaInputs::new(c0, 2.0 * mass, vmin).unwrap());
        prop_assert!(more >= eta);
    }

    #[test]
    fn threshold_reduction_is_exact(n in 1u32..8, k in 1.01f64..6.0, a in 0.0f64..4.0, eta in 0.0f64..4.0) {
        let chi = ChiParams::new(1.0, a, k).unwrap();
        let pp = threshold_chi0_pp(n, 0.0, &chi, eta).unwrap().value;
        let pe = threshold_chi0_pe(n, &chi, eta).unwrap().value;
        prop_assert_eq!(pp.to_bits(), pe.to_bits());
    }

    #[test]
    fn admissible_sets_keep_h_nonpositive(
        p in 1.01f64..10.0, eps in 0.01f64..0.49, lambda in 0.01f64..5.0,
        k in 1.05f64..4.0, a in 0.1f64..3.0, eta in 0.0f64..2.0, frac in 0.01f64..1.0,
        offset in 0.0f64..1e3,
    ) {
        let cond = ConditionParams::new(p, eps, lambda, 2).unwrap();
        let chi0 = frac * kslimit::theory::condition_chi0_max(&cond, k, a, eta);
        let chi = ChiParams::new(chi0, a, k).unwrap();
        prop_assert!(condition_ass_pp(&cond, &chi, eta));
        let r = r_value(&cond, &chi);
        prop_assert!(h_sign(eta + offset, &cond, &chi, eta, r).unwrap() <= 1e-12);
    }

    #[test]
    fn phi_between_floor_and_one(r in 0.0f64..10.0, k in 1.05f64..4.0, a in 0.05f64..3.0, eta in 0.0f64..2.0, ds in 0.0f64..1e4) {
        let chi = ChiParams::new(1.0, a, k).unwrap();
        let phi = phi_r(eta + ds, r, &chi, eta).unwrap();
        let floor = phi_r_floor(r, &chi, eta);
        prop_assert!(phi <= 1.0 && phi >= floor * (1.0 - 1e-12));
    }

    #[test]
    fn lyapunov_sandwich((g, u, v) in grid_and_fields(), p in 1.1f64..4.0, r in 0.0f64..3.0) {
        let chi = ChiParams::new(1.0, 0.5, 2.0).unwrap();
        let eta = 0.05;
        let l = lyapunov_functional(&u, &v, p, r, &chi, eta).unwrap().value;
        let norm = u.values().iter().map(|x| x.powf(p)).sum::<f64>() * g.cell_volume();
        prop_assert!(l <= norm * (1.0 + 1e-12));
        prop_assert!(l >= phi_r_floor(r, &chi, eta) * norm * (1.0 - 1e-12));
    }

    #[test]
    fn decimal_format_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}

#[test]
fn more_probes_never_raise_c0() {
    for g in [Grid::line(1.0, 64).unwrap(), Grid::rect(1.0, 1.0, 12, 12).unwrap()] {
        let few = estimate_c0(&g, 1.0, 1).unwrap();
        let many = estimate_c0(&g, 1.0, 9).unwrap();
        assert!(many.c0 <= few.c0);
        assert_eq!(many.minima[0], few.minima[0]);
    }
}

#[test]
fn c0_total_mass_decays_exactly() {
    // the kernel minimum sits below the mean e^{-t*}/|Ω|
    for t_star in [0.5, 1.0, 2.0] {
        let g = Grid::line(2.0, 64).unwrap();
        let e = estimate_c0(&g, t_star, 3).unwrap();
        assert!(e.c0 <= (-t_star).exp() / g.measure());
    }
}

#[test]
fn c0_stable_under_refinement() {
    let coarse = estimate_c0(&Grid::line(1.0, 64).unwrap(), 1.0, 3).unwrap().c0;
    let fine = estimate_c0(&Grid::line(1.0, 256).unwrap(), 1.0, 3).unwrap().c0;
    assert_relative_eq!(coarse, fine, max_relative = 0.1);
    let coarse = estimate_c0(&Grid::rect(1.0, 1.0, 16, 16).unwrap(), 1.0, 5).unwrap().c0;
    let fine = estimate_c0(&Grid::rect(1.0, 1.0, 32, 32).unwrap(), 1.0, 5).unwrap().c0;
    assert_relative_eq!(coarse, fine, max_relative = 0.1);
}
