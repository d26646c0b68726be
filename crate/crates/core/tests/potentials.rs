use modscat::grid::{ComplexField, SpatialGrid, C64};
use modscat::potentials::{CutoffChi, LongRange, PotentialSpec, ShortRange, Singular};
use proptest::prelude::*;

#[test]
fn cutoff_reference_values() {
    let chi = CutoffChi::new(1.0).unwrap();
    assert_eq!(chi.value(0.2), 1.0);
    assert_eq!(chi.value(0.4), 0.0);
    let mid = chi.value(0.29);
    assert!(mid > 0.0 && mid < 1.0);
    assert!(CutoffChi::new(0.0).is_err());
    assert!(CutoffChi::new(f64::NAN).is_err());
}

#[test]
fn cutoff_scales_with_c0() {
    let a = CutoffChi::new(1.0).unwrap();
    let b = CutoffChi::new(3.0).unwrap();
    for i in 0..200 {
        let x = i as f64 * 0.002;
        assert!((a.value(x) - b.value(3.0 * x)).abs() < 1e-14);
    }
}

#[test]
fn effective_potential_plateau_and_exterior() {
    let spec = PotentialSpec::hj_benchmark();
    for &t in &[1.0, 10.0, 1e3, 1e5] {
        let s = t + spec.t1;
        for i in 0..100 {
            let inner = i as f64 / 100.0 * s / 8.0;
            assert_eq!(spec.effective(t, inner), 0.0);
            let outer = s / 6.0 * (1.0 + i as f64);
            assert_eq!(spec.effective(t, outer), spec.long_range.value(outer));
        }
    }
}

#[test]
fn decay_ratios_stay_bounded() {
    let spec = PotentialSpec::scatter_benchmark();
    let mut x = 1.0;
    while x <= 1e5 {
        let dl = spec.long_range.derivs(x);
        let ds = spec.short_range.derivs(x);
        let b = (1.0 + x * x).sqrt();
        let mut pl = 0.1;
        let mut ps = 0.1;
        for k in 0..4 {
            // the k-th derivative of ⟨x⟩^{-ρ} has leading coefficient ρ(ρ+1)…(ρ+k-1)
            let rl = dl[k].abs() * b.powf(0.7 + k as f64) / pl;
            let rs = ds[k].abs() * b.powf(2.0 + k as f64) / ps;
            assert!(rl <= 2.0 && rs <= 2.0, "x={x} k={k} {rl} {rs}");
            if x > 1e4 {
                assert!((rl - 1.0).abs() < 0.01 && (rs - 1.0).abs() < 0.01, "x={x} k={k}");
            }
            pl *= 0.7 + k as f64;
            ps *= 2.0 + k as f64;
        }
        x *= 1.2;
    }
}

#[test]
fn singular_part_has_finite_mass_and_support() {
    // radius on a cell edge so the cell averages integrate exactly
    let r = 64.5 / 128.0;
    let s = Singular { amplitude: 1.0, radius: r, exponent: 0.3 };
    let grid = SpatialGrid::new(1024, 4.0).unwrap();
    let v = s.sample(&grid);
    let integral: f64 = v.iter().sum::<f64>() * grid.dx();
    assert!((integral - 2.0 * r / 0.7).abs() < 1e-12, "{integral}");
    for (j, val) in v.iter().enumerate() {
        if grid.x(j).abs() >= r {
            assert_eq!(*val, 0.0);
        }
    }
}

#[test]
fn attractive_pairing_against_quadrature() {
    let spec = PotentialSpec {
        long_range: LongRange { amplitude: -0.1, rho: 0.7 },
        short_range: ShortRange { amplitude: -0.1, rho: 2.0 },
        ..PotentialSpec::free()
    };
    let grid = SpatialGrid::new(2048, 20.0).unwrap();
    let f = ComplexField::from_fn(grid, |x| C64::from_polar((-x * x).exp(), 0.7 * x));
    let vf = spec.assemble_total(&f).unwrap();
    let pairing = vf.inner(&f).unwrap();
    assert!(pairing.im.abs() < 1e-14);
    // ∫ V e^{-2x²}, Simpson on [-8, 8].
    let n = 20000;
    let h = 16.0 / n as f64;
    let g = |x: f64| spec.long_range.value(x) * 1.0 + spec.short_range.value(x) * 1.0;
    let mut acc = 0.0;
    for i in 0..=n {
        let x = -8.0 + i as f64 * h;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(x) * (-2.0 * x * x).exp();
    }
    acc *= h / 3.0;
    assert!(acc < 0.0);
    assert!((pairing.re - acc).abs() < 1e-10, "{} vs {acc}", pairing.re);
}

#[test]
fn validation_rejects_out_of_range_exponents() {
    let mut spec = PotentialSpec::scatter_benchmark();
    spec.long_range.rho = 0.5;
    assert!(spec.validate().unwrap_err().to_string().contains("rho_L > 1/2"));
    let mut spec = PotentialSpec::scatter_benchmark();
    spec.short_range.rho = 1.5;
    assert!(spec.validate().unwrap_err().to_string().contains("rho_S > 3/2"));
    assert!(PotentialSpec::scatter_benchmark().validate().is_ok());
}

proptest! {
    #[test]
    fn cutoff_is_even_and_in_unit_interval(x in -1.0..1.0f64) {
        let chi = CutoffChi::new(1.0).unwrap();
        let v = chi.value(x);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, chi.value(-x));
    }

    #[test]
    fn pairing_is_real(c in -3.0..3.0f64, k in -2.0..2.0f64, z in -1.0..1.0f64) {
        let spec = PotentialSpec {
            long_range: LongRange { amplitude: 0.1 * z, rho: 0.7 },
            short_range: ShortRange { amplitude: 0.1, rho: 2.0 },
            ..PotentialSpec::free()
        };
        let grid = SpatialGrid::new(256, 12.0).unwrap();
        let f = ComplexField::from_fn(grid, |x| C64::from_polar((-(x - c).powi(2)).exp(), k * x));
        let p = spec.assemble_total(&f).unwrap().inner(&f).unwrap();
        prop_assert!(p.im.abs() <= 1e-14 * (1.0 + p.re.abs()));
    }

    #[test]
    fn effective_matches_full_potential_far_out(t in 1.0..1e5f64, y in 0.34..10.0f64) {
        let spec = PotentialSpec::hj_benchmark();
        let x = y * 0.5 * (t + spec.t1);
        prop_assert_eq!(spec.effective(t, x), spec.long_range.value(x));
        prop_assert_eq!(spec.effective(t, -x), spec.long_range.value(-x));
    }
}
