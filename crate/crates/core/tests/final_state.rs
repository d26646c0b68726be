use modscat::final_state::{
    backward_shoot, default_delta, perturbation_series, picard_probe, residual_bundle, ProbeConfig, Seed,
    ShootConfig,
};
use modscat::grid::SpatialGrid;
use modscat::potentials::{PotentialSpec, Singular};
use modscat::profile::{ProfilePhase, ScatteringDatum};
use modscat::propagator::Method;
use modscat::Error;

fn datum(epsilon: f64, lambda: f64) -> ScatteringDatum {
    ScatteringDatum { epsilon, lambda, ..ScatteringDatum::default() }
}

fn grid() -> SpatialGrid {
    SpatialGrid::new(4096, 800.0).unwrap()
}

#[test]
fn linear_coupling_has_no_nonlinear_residual() {
    let spec = PotentialSpec::scatter_benchmark();
    let phase = ProfilePhase::free(spec);
    let b = residual_bundle(&datum(0.1, 0.0), &phase, &spec, grid(), 100.0).unwrap();
    assert_eq!(b.norms.e2, 0.0);
    assert!(b.norms.e1 > 0.0);
}

#[test]
fn nonlinear_residual_is_cubic_in_amplitude() {
    let spec = PotentialSpec::scatter_benchmark();
    let phase = ProfilePhase::free(spec);
    let full = residual_bundle(&datum(0.1, 1.0), &phase, &spec, grid(), 100.0).unwrap();
    let half = residual_bundle(&datum(0.05, 1.0), &phase, &spec, grid(), 100.0).unwrap();
    let e2 = half.norms.e2 / full.norms.e2;
    assert!((e2 / 0.125 - 1.0).abs() < 0.1, "E2 ratio {e2}");
    let e1 = half.norms.e1 / full.norms.e1;
    assert!((e1 / 0.5 - 1.0).abs() < 0.1, "E1 ratio {e1}");
}

#[test]
fn decomposition_matches_direct_route() {
    let spec = PotentialSpec::scatter_benchmark();
    let phase = ProfilePhase::free(spec);
    let b = residual_bundle(&datum(0.1, 1.0), &phase, &spec, grid(), 100.0).unwrap();
    assert!(b.norms.consistency_h1 <= 1e-6 * b.norms.e3, "{:?}", b.norms);
}

#[test]
fn free_potential_leaves_only_kinematic_parts() {
    let spec = PotentialSpec::free();
    let phase = ProfilePhase::free(spec);
    let b = residual_bundle(&datum(0.1, 1.0), &phase, &spec, grid(), 100.0).unwrap();
    assert_eq!(b.norms.i4, 0.0);
    assert_eq!(b.norms.i5, 0.0);
}

#[test]
fn residual_needs_time_past_the_singular_support() {
    let spec = PotentialSpec {
        singular: Singular { amplitude: 1.0, radius: 2.0, exponent: 0.0 },
        ..PotentialSpec::scatter_benchmark()
    };
    assert_eq!(spec.t2(), 8.0);
    let phase = ProfilePhase::free(spec);
    let err = residual_bundle(&datum(0.1, 1.0), &phase, &spec, grid(), 5.0).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn default_delta_sits_below_both_exponents() {
    let d = default_delta(&PotentialSpec::scatter_benchmark());
    assert!((d - 0.65).abs() < 1e-12);
    let mut spec = PotentialSpec::scatter_benchmark();
    spec.long_range.rho = 0.52;
    assert!(default_delta(&spec) > 0.5);
}

#[test]
fn identical_probe_inputs_are_degenerate() {
    let spec = PotentialSpec::scatter_benchmark();
    let phase = ProfilePhase::free(spec);
    let d = datum(0.1, 1.0);
    let g = SpatialGrid::new(2048, 800.0).unwrap();
    let times = vec![100.0, 120.0, 140.0];
    let v = perturbation_series(&d, &phase, g, &times, 1e-3, 0.65, 2.5, 3).unwrap();
    let cfg = ProbeConfig { grid: g, dt: 0.05, times, delta: 0.65, b: 2.5, tail_tolerance: 1.0 };
    let r = picard_probe(&v, &v, &d, &phase, &spec, &cfg).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.ratio, 0.0);
    assert_eq!(r.tail_bound, 0.0);
}

#[test]
fn perturbations_have_the_requested_size() {
    let spec = PotentialSpec::scatter_benchmark();
    let phase = ProfilePhase::free(spec);
    let g = SpatialGrid::new(2048, 800.0).unwrap();
    let times = [100.0, 150.0];
    let v = perturbation_series(&datum(0.1, 1.0), &phase, g, &times, 1e-3, 0.65, 2.5, 9).unwrap();
    for (t, f) in times.iter().zip(&v) {
        let target = 1e-3 * t.powf(-0.65) * t.ln().powf(2.5);
        assert!((modscat::grid::h1_norm(f) / target - 1.0).abs() < 1e-12);
    }
    let again = perturbation_series(&datum(0.1, 1.0), &phase, g, &times, 1e-3, 0.65, 2.5, 9).unwrap();
    assert_eq!(v[0].values, again[0].values);
}

fn shoot_cfg(t_start: f64) -> ShootConfig {
    ShootConfig {
        grid: grid(),
        dt: 0.02,
        method: Method::Strang,
        t_end: 120.0,
        t_start,
        checkpoints: 12,
        seed: Seed::ProfileOnly,
        b: 2.5,
        fit_window: Some((50.0, 120.0)),
    }
}

#[test]
fn free_linear_shoot_matches_the_control() {
    // With no potential and no coupling the profile is exactly M D û₊.
    let spec = PotentialSpec::free();
    let phase = ProfilePhase::free(spec);
    let run = backward_shoot(&datum(0.1, 0.0), &phase, &spec, &shoot_cfg(50.0)).unwrap();
    assert!(run.failure.is_none());
    assert_eq!(run.samples.len(), 12);
    assert_eq!(run.samples[0].v_h1, 0.0);
    for s in &run.samples {
        assert_eq!(s.v_h1, s.control_h1);
    }
    let c = run.conservation.as_ref().unwrap();
    assert!(c.mass_drift < 1e-12);
}

#[test]
fn shoot_is_deterministic_and_checks_its_start() {
    let spec = PotentialSpec::scatter_benchmark();
    let phase = ProfilePhase::free(spec);
    let d = datum(0.1, 1.0);
    let a = backward_shoot(&d, &phase, &spec, &shoot_cfg(50.0)).unwrap();
    let b = backward_shoot(&d, &phase, &spec, &shoot_cfg(50.0)).unwrap();
    assert_eq!(a.samples, b.samples);
    let err = backward_shoot(&d, &phase, &spec, &shoot_cfg(20.0)).unwrap_err();
    assert!(err.to_string().contains("max(T1, T2, 2)"));
}
