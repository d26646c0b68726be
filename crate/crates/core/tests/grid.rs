use modscat::grid::{
    dilate_exact, dilation, fourier, modulation, phase_multiply, r_operator, sobolev_norm, ComplexField,
    Direction, SpatialGrid, C64,
};
use proptest::prelude::*;

fn gaussian(grid: SpatialGrid) -> ComplexField {
    ComplexField::from_real_fn(grid, |x| (-0.5 * x * x).exp())
}

fn lumps(grid: SpatialGrid, params: &[(f64, f64, f64, f64)]) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        params
            .iter()
            .map(|&(c, k, a, b)| C64::new(a, b) * C64::from_polar((-(x - c).powi(2)).exp(), k * x))
            .sum()
    })
}

fn lump_params() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((-6.0..6.0f64, -3.0..3.0f64, -1.0..1.0f64, -1.0..1.0f64), 1..6)
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn nodes_are_symmetric_up_to_one_node() {
    let g = SpatialGrid::new(64, 10.0).unwrap();
    let x = g.x_nodes();
    assert_eq!(x[0], -10.0);
    assert_eq!(x[32], 0.0);
    for j in 1..32 {
        assert!((x[32 + j] + x[32 - j]).abs() < 1e-14);
    }
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(dx.iter().all(|d| (d - g.dx()).abs() < 1e-13));
}

#[test]
fn gaussian_on_wide_box_is_its_own_transform() {
    let g = SpatialGrid::new(512, 30.0).unwrap();
    let f = fourier(&gaussian(g), Direction::Forward).unwrap();
    let exact: Vec<C64> = g.xi_nodes().iter().map(|xi| C64::new((-0.5 * xi * xi).exp(), 0.0)).collect();
    assert!(max_diff(&f.values, &exact) < 1e-10);
}

#[test]
fn gaussian_sobolev_values() {
    let g = SpatialGrid::new(1024, 20.0).unwrap();
    let f = gaussian(g);
    let pi = std::f64::consts::PI;
    assert!((sobolev_norm(&f, 0.0, 0.0).unwrap() - pi.powf(0.25)).abs() < 1e-12);
    assert!((sobolev_norm(&f, 1.0, 0.0).unwrap() - (1.5 * pi.sqrt()).sqrt()).abs() < 1e-12);
}

#[test]
fn weighted_h1_matches_fine_quadrature() {
    // ‖⟨x⟩f‖² + ‖(⟨x⟩f)'‖² by the trapezoid rule on a grid ten times finer.
    let g = SpatialGrid::new(1024, 20.0).unwrap();
    let spectral = sobolev_norm(&gaussian(g), 1.0, 1.0).unwrap();
    let n = 10 * 1024;
    let h = 40.0 / n as f64;
    let mut acc = 0.0;
    for j in 0..n {
        let x = -20.0 + j as f64 * h;
        let e = (-0.5 * x * x).exp();
        let b = (1.0 + x * x).sqrt();
        let val = b * e;
        let der = (x / b - b * x) * e;
        acc += (val * val + der * der) * h;
    }
    assert!((spectral - acc.sqrt()).abs() < 1e-8, "{spectral} vs {}", acc.sqrt());
}

#[test]
fn undecayed_field_is_rejected_with_magnitude() {
    let g = SpatialGrid::new(256, 5.0).unwrap();
    let f = ComplexField::from_real_fn(g, |x| (-0.05 * x * x).exp());
    match sobolev_norm(&f, 1.0, 0.0) {
        Err(modscat::Error::DomainTruncation { boundary_magnitude, .. }) => assert!(boundary_magnitude > 0.1),
        other => panic!("expected truncation error, got {other:?}"),
    }
}

#[test]
fn unit_dilation_is_a_constant_phase() {
    let g = SpatialGrid::new(256, 12.0).unwrap();
    let f = gaussian(g);
    let d = dilation(&f, 1.0).unwrap().field;
    let c = C64::new(0.0, 1.0).powf(-0.5);
    let expect: Vec<C64> = f.values.iter().map(|v| v * c).collect();
    assert!(max_diff(&d.values, &expect) < 1e-12);
}

#[test]
fn r_operator_limit() {
    let g = SpatialGrid::new(2048, 40.0).unwrap();
    let f = gaussian(g);
    let h2 = sobolev_norm(&f, 2.0, 0.0).unwrap();
    let r = r_operator(&f, 1e6).unwrap();
    assert!(r.l2_norm() / h2 < 1e-4);
    let ratios: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&t| t * r_operator(&f, t).unwrap().l2_norm() / h2)
        .collect();
    assert!(ratios.iter().all(|r| *r < 1.0), "{ratios:?}");
}

#[test]
fn wrong_length_is_structural_error() {
    let g = SpatialGrid::new(64, 4.0).unwrap();
    assert!(matches!(
        ComplexField::new(g, modscat::Space::Physical, vec![C64::new(0.0, 0.0); 63]),
        Err(modscat::Error::GridMismatch(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn round_trip_is_identity(params in lump_params()) {
        let g = SpatialGrid::new(512, 16.0).unwrap();
        let f = lumps(g, &params);
        let back = fourier(&fourier(&f, Direction::Forward).unwrap(), Direction::Inverse).unwrap();
        let scale = f.linf_norm().max(1e-300);
        prop_assert!(max_diff(&back.values, &f.values) / scale < 1e-13);
    }

    #[test]
    fn plancherel(params in lump_params()) {
        let g = SpatialGrid::new(512, 16.0).unwrap();
        let f = lumps(g, &params);
        let fh = fourier(&f, Direction::Forward).unwrap();
        prop_assert!((fh.l2_norm() - f.l2_norm()).abs() / f.l2_norm() < 1e-12);
    }

    #[test]
    fn unimodular_multipliers_preserve_mass(params in lump_params(), t in 0.5..500.0f64, seed in any::<u64>()) {
        let g = SpatialGrid::new(256, 16.0).unwrap();
        let f = lumps(g, &params);
        let m = modulation(&f, t).unwrap();
        let phase: Vec<f64> = (0..g.n()).map(|j| ((j as u64).wrapping_mul(seed | 1) % 1000) as f64 * 0.01).collect();
        let p = phase_multiply(&f, &phase).unwrap();
        prop_assert!((m.l2_norm() - f.l2_norm()).abs() <= 1e-14 * f.l2_norm());
        prop_assert!((p.l2_norm() - f.l2_norm()).abs() <= 1e-14 * f.l2_norm());
    }

    #[test]
    fn plain_sobolev_is_l2_bit_for_bit(params in lump_params()) {
        let g = SpatialGrid::new(256, 16.0).unwrap();
        let f = lumps(g, &params);
        prop_assert_eq!(sobolev_norm(&f, 0.0, 0.0).unwrap(), f.l2_norm());
    }

    #[test]
    fn exact_dilation_is_isometry(t in 1.0..1e4f64) {
        let g = SpatialGrid::new(256, 12.0).unwrap();
        let f = gaussian(g);
        let d = dilate_exact(&f, t).unwrap();
        prop_assert!((d.l2_norm() - f.l2_norm()).abs() < 1e-10 * f.l2_norm());
        prop_assert!((d.linf_norm() * t.sqrt() - f.linf_norm()).abs() < 1e-12);
    }
}
