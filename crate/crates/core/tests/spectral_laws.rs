use degenspec::asymptotics::{engineered_kernel_potential, kernel_case_check};
use degenspec::potentials::hypothesis_report;
use degenspec::surface_ops::surface_eigenvalues;
use degenspec::{
    assemble_vs, build_momentum_grid, build_surface_quadrature, f_inverse, f_of_e, BsContext, GridSpec,
    KineticSymbol, Potential, RadialTable, SurfaceOperatorSet,
};
use proptest::prelude::*;

/// Modified Bessel `I_m(x)` by its power series.
fn bessel_i(m: u32, x: f64) -> f64 {
    let mut term = (0.5 * x).powi(m as i32) / (1..=m).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..60 {
        term *= 0.25 * x * x / (k as f64 * (k + m) as f64);
        sum += term;
    }
    sum
}

fn bcs2d_grid(e_min: f64, angular: usize) -> GridSpec {
    GridSpec { e_min, angular, ..GridSpec::default() }
}

#[test]
fn circle_spectrum_matches_bessel_series() {
    // on |p| = 1 with |∇P| = 2, channel m of V_S is -e^{-1} I_m(1) / 2
    let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
    let quad = build_surface_quadrature(&sym, 0.0, 32).unwrap();
    let vals = surface_eigenvalues(&assemble_vs(&quad, &Potential::gaussian(1.0, 1.0).unwrap()).unwrap()).unwrap();
    let expect = |m: u32| -(-1.0f64).exp() * bessel_i(m, 1.0) / 2.0;
    assert!((vals[0] - expect(0)).abs() < 1e-14);
    for (k, m) in [(1, 1), (2, 1), (3, 2), (4, 2), (5, 3), (6, 3)] {
        assert!((vals[k] - expect(m)).abs() < 1e-14, "eigenvalue {k}: {} vs {}", vals[k], expect(m));
    }
}

#[test]
fn coupling_and_amplitude_enter_only_through_their_product() {
    let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
    let v = Potential::gaussian(1.0, 1.0).unwrap();
    let spec = bcs2d_grid(1e-3, 16);
    let one = BsContext::build(sym.clone(), v.clone(), &spec, 0.8).unwrap();
    let two = BsContext::build(sym, v.scaled(2.0), &spec, 0.4).unwrap();
    assert!((two.a_s(1).unwrap() - 2.0 * one.a_s(1).unwrap()).abs() < 1e-15);
    let (e1, e2) = (one.solve_e(1, None).unwrap(), two.solve_e(1, None).unwrap());
    assert!((e1.e - e2.e).abs() < 1e-9 * e1.e);
    // λ f(e) |a| is invariant as well
    let lim = |c: &BsContext, e: f64| c.lambda * f_of_e(e, 1.0).unwrap() * c.a_s(1).unwrap().abs();
    assert!((lim(&one, e1.e) - lim(&two, e2.e)).abs() < 1e-8);
}

#[test]
fn bs_eigenvalues_are_linear_in_lambda() {
    let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
    let ctx = BsContext::build(sym, Potential::gaussian(1.0, 1.0).unwrap(), &bcs2d_grid(1e-3, 8), 0.3).unwrap();
    let a = ctx.bs_top_eigenvalues(0.05, 4).unwrap();
    let b = ctx.with_lambda(0.6).unwrap().bs_top_eigenvalues(0.05, 4).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((2.0 * x - y).abs() < 1e-12 * y);
    }
}

#[test]
fn root_survives_grid_refinement() {
    let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
    let ctx = BsContext::build(sym, Potential::gaussian(1.0, 1.0).unwrap(), &bcs2d_grid(1e-3, 16), 0.8).unwrap();
    let rec = ctx.solve_e(1, None).unwrap();
    let cert = ctx.certify(&rec).unwrap();
    assert!(cert.passes, "refined e moved by {}", cert.relative_change);
}

#[test]
fn separated_spectrum_counts_agree_at_small_coupling() {
    let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
    let ctx = BsContext::build(sym, Potential::gaussian(1.0, 1.0).unwrap(), &bcs2d_grid(1e-6, 16), 0.3).unwrap();
    let rep = ctx.residual_spectrum_check(0.1).unwrap();
    assert!(rep.matches, "{rep:?}");
    // lowering the probe e can only add eigenvalues above 1
    let lower = ctx.residual_spectrum_check(0.2).unwrap();
    assert!(lower.bs_count >= rep.bs_count);
}

#[test]
fn reduced_operator_tends_to_scaled_vs() {
    let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
    let ctx = BsContext::build(sym, Potential::gaussian(1.0, 1.0).unwrap(), &bcs2d_grid(1e-3, 16), 1e-3).unwrap();
    let e = 0.01;
    let red = ctx.reduced_surface_operator(e).unwrap();
    let scale = ctx.lambda * f_of_e(e, 1.0).unwrap();
    let a = ctx.surface_eigenvalues();
    for (x, y) in red.eigenvalues.iter().zip(a).take(5) {
        assert!((x - scale * y).abs() < 1e-3 * scale * a[0].abs());
    }
    assert!(red.correction_norm < 1e-2);
}

#[test]
fn ws_extrapolation_settles_for_r_below_two() {
    for r in [1.0, 1.5] {
        let sym = KineticSymbol::bcs(2, 1.0, r).unwrap();
        let v = Potential::gaussian(1.0, 1.0).unwrap();
        let grid = build_momentum_grid(&sym, &bcs2d_grid(1e-4, 16)).unwrap();
        let quad = build_surface_quadrature(&sym, 0.0, 16).unwrap();
        let set = SurfaceOperatorSet::new(quad, &v, 4).unwrap().with_ws(&v, &sym, &degenspec::surface_ops::default_e_sequence(), &grid).unwrap();
        let ws = set.ws.as_ref().unwrap();
        assert!(ws.residuals_decrease(), "r = {r}: {:?}", ws.cauchy_residuals);
    }
}

#[test]
fn engineered_kernel_vector_has_positive_second_order_form() {
    let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
    let v = engineered_kernel_potential(&sym, 16).unwrap();
    let quad = build_surface_quadrature(&sym, 0.0, 16).unwrap();
    let grid = build_momentum_grid(&sym, &bcs2d_grid(1e-4, 16)).unwrap();
    let set = SurfaceOperatorSet::new(quad, &v, 3).unwrap().with_ws(&v, &sym, &degenspec::surface_ops::default_e_sequence(), &grid).unwrap();
    let entries = kernel_case_check(&set, 1e-8).unwrap();
    assert!(!entries.is_empty());
    for k in &entries {
        assert!(k.positive, "{k:?}");
        // with V_S u = 0, (u, B_S u) = -λ (u, W_S u)
        let u = &set.eigs_vs[k.index - 1].vector;
        let lambda = 0.1;
        let bs = set.bs_matrix(lambda).unwrap();
        assert!((bs.form(u, u) + lambda * k.ws_form).abs() < 1e-8);
    }
}

#[test]
fn repulsive_potential_binds_nothing() {
    let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
    let ctx = BsContext::build(sym, Potential::gaussian(-1.0, 1.0).unwrap(), &bcs2d_grid(1e-3, 16), 1.0).unwrap();
    assert!(ctx.direct_spectrum(5).unwrap().iter().all(|&x| x >= 0.0));
}

#[test]
fn tabulated_transform_reproduces_gaussian_surface_operator() {
    let radii: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.005).collect();
    let values: Vec<f64> = radii.iter().map(|p| -(-p * p / 2.0f64).exp()).collect();
    let table = Potential::Tabulated { table: RadialTable::new(radii, values).unwrap() };
    let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
    let quad = build_surface_quadrature(&sym, 0.0, 16).unwrap();
    let a = surface_eigenvalues(&assemble_vs(&quad, &table).unwrap()).unwrap();
    let b = surface_eigenvalues(&assemble_vs(&quad, &Potential::gaussian(1.0, 1.0).unwrap()).unwrap()).unwrap();
    assert!((a[0] - b[0]).abs() < 1e-5);
}

#[test]
fn gaussian_meets_the_integrability_hypotheses() {
    for (n, s) in [(2, 2.0), (3, 2.0)] {
        let sym = KineticSymbol::bcs(n, 1.0, 1.0).unwrap();
        assert_eq!(sym.growth.s, s);
        let rep = hypothesis_report(&Potential::gaussian(1.0, 1.0).unwrap(), &sym);
        assert!(rep.passes);
        let l1 = (2.0 * std::f64::consts::PI).powf(n as f64 / 2.0);
        assert!((rep.l1_norm - l1).abs() < 1e-10 * l1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f_is_decreasing_and_inverted(r in 1.0f64..4.0, a in -9.0f64..1.0, b in -9.0f64..1.0) {
        let (e1, e2) = (10f64.powf(a.min(b)), 10f64.powf(a.max(b)));
        prop_assume!(e2 > e1 * (1.0 + 1e-9));
        let (f1, f2) = (f_of_e(e1, r).unwrap(), f_of_e(e2, r).unwrap());
        prop_assert!(f1 > f2);
        prop_assert!((f_inverse(f1, r).unwrap() - e1).abs() <= 1e-9 * e1);
    }
}
