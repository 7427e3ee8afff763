use degenspec_bench::{bcs2d, bcs3d};

#[test]
fn fixtures_have_bound_states() {
    let two = bcs2d(16, 1e-3, 0.8).unwrap();
    let rec = two.solve_e(1, None).unwrap();
    assert!(rec.e > 1e-3 && rec.residual <= 1e-8);

    let three = bcs3d(4, 1e-2, 1.5).unwrap();
    assert!(three.a_s(1).unwrap() < 0.0);
    assert_eq!(three.grid.layout.azimuths, 8);
}
