//! Lemma-shaped property checks: free-theory exactness, the Dollard
//! factorization, dilation and `R(t)` bounds, the cubic Taylor split, growth
//! of `w_p` in Sobolev norms, the phase-conjugation identities and the decay
//! of the phase corrections.
//!
//! Every check yields a [`Check`] with the measured value and the tolerance
//! it was held to. "Bounded" claims are envelope checks: the measured series
//! is divided by the claimed envelope and the ratio of the last-quartile
//! maximum to the first-quartile maximum is reported against
//! [`ENVELOPE_THRESHOLD`].

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{envelope_check_with, fit_rate, log_space, Envelope, ENVELOPE_THRESHOLD};
use crate::error::Result;
use crate::grid::{
    derivative, dilate_exact, dilation, fourier, modulation, phase_multiply, r_operator,
    sobolev_norm, ComplexField, Direction, SpatialGrid, C64,
};
use crate::hj::{solve_bicharacteristics, window_points, BicharTable, HjOptions, PhaseSlice};
use crate::potentials::{LongRange, PotentialSpec};
use crate::profile::{cubic, taylor_split, w_p, ProfilePhase, ScatteringDatum};
use crate::propagator::free_propagate;

/// One pass/fail line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        }
    }

    /// Envelope check: value is the quartile ratio.
    pub fn envelope(name: &str, env: &Envelope, detail: impl Into<String>) -> Self {
        let ratio = env.last_quartile_max / env.first_quartile_max;
        Check {
            name: name.into(),
            passed: env.bounded,
            value: ratio,
            tolerance: env.threshold,
            detail: format!("sup {:.4e}; {}", env.sup, detail.into()),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {:.4e} (tol {:.1e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance,
            self.detail
        )
    }
}

fn gaussian(grid: SpatialGrid) -> ComplexField {
    ComplexField::from_real_fn(grid, |x| (-0.5 * x * x).exp())
}

fn bounded(series: &[(f64, f64)]) -> Envelope {
    envelope_check_with(series, |_| 1.0, ENVELOPE_THRESHOLD)
}

/// Free table: `Ψ = x²/(2t)`, `Z = tξ`, `S = tξ²/2` at a few times; returns
/// the largest error relative to `max(1, |exact|)`.
pub fn free_table_error(times: &[f64]) -> Result<f64> {
    let table = solve_bicharacteristics(&PotentialSpec::free(), &HjOptions::default())?;
    let mut err: f64 = 0.0;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    for &t in times {
        let slice = PhaseSlice::from_table(&table, t, None)?;
        for x in window_points(&slice, 101, 0.0) {
            err = err.max(rel(slice.evaluate(x)?.psi(), x * x / (2.0 * t)));
        }
        let (lo, hi) = (table.options.xi_min, table.options.xi_max);
        for i in 0..=100 {
            let xi = lo + (hi - lo) * i as f64 / 100.0;
            for xi in [xi, -xi] {
                let (s, z, _) = slice.generating_function(xi)?;
                err = err.max(rel(z, t * xi)).max(rel(s, 0.5 * t * xi * xi));
            }
        }
    }
    Ok(err)
}

/// `‖U_0(t)F^{-1}ĝ − M D (ĝ + R ĝ)‖ / ‖ĝ‖` for a Gaussian `ĝ` on `n` nodes.
///
/// The frequency grid has half length `√(πn/(2t))`, so that dilating by `t`
/// lands exactly on the physical grid of `F^{-1}ĝ`.
pub fn dollard_defect(t: f64, n: usize) -> Result<f64> {
    let freq = SpatialGrid::new(n, (std::f64::consts::PI * n as f64 / (2.0 * t)).sqrt())?;
    let g = gaussian(freq);
    let lhs = free_propagate(&fourier(&g.clone().dual_view(), Direction::Inverse)?, t)?;
    let inner = g.add(&r_operator(&g, t)?)?;
    let rhs = modulation(&dilate_exact(&inner, t)?, t)?;
    lhs.grid.ensure_compatible(&rhs.grid)?;
    let diff: f64 =
        lhs.values.iter().zip(&rhs.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * lhs.grid.dx();
    Ok(diff.sqrt() / g.l2_norm())
}

/// Free-theory exactness and the Dollard factorization at `t = 10, 100`.
pub fn free_theory() -> Result<Vec<Check>> {
    let mut out = vec![Check::at_most(
        "free phase, Z and S",
        free_table_error(&[10.0, 100.0, 1000.0])?,
        1e-9,
        "relative to max(1, exact), t in {10, 100, 1000}",
    )];
    for t in [10.0, 100.0] {
        out.push(Check::at_most(
            &format!("Dollard factorization t={t}"),
            dollard_defect(t, 1 << 14)?,
            1e-10,
            "relative L2 defect, Gaussian datum",
        ));
    }
    Ok(out)
}

/// `L^p` scaling of `D(t)`: band-limited and exact paths.
pub fn dilation_norms() -> Result<Vec<Check>> {
    let grid = SpatialGrid::new(4096, 40.0)?;
    let f = gaussian(grid);
    let d5 = dilation(&f, 5.0)?.field;
    let d4 = dilation(&f, 4.0)?.field;
    let e4 = dilate_exact(&f, 4.0)?;
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    Ok(vec![
        Check::at_most("dilation L2 isometry t=5", rel(d5.l2_norm(), f.l2_norm()), 1e-10, "band-limited"),
        Check::at_most("dilation Linf factor t=4", rel(d4.linf_norm(), 0.5 * f.linf_norm()), 1e-10, "band-limited"),
        Check::at_most("exact dilation L2 t=4", rel(e4.l2_norm(), f.l2_norm()), 1e-12, "relabelled grid"),
        Check::at_most("exact dilation Linf t=4", rel(e4.linf_norm(), 0.5 * f.linf_norm()), 1e-12, "relabelled grid"),
    ])
}

/// `t‖R(t)f‖/‖f‖_{H²}` and `t‖xR(t)f‖/(‖xf‖_{H²} + ‖f‖_{H¹})` over `[10, 10³]`,
/// plus the large-`t` limit.
pub fn r_envelopes() -> Result<Vec<Check>> {
    let grid = SpatialGrid::new(2048, 30.0)?;
    let f = gaussian(grid);
    let x: Vec<f64> = grid.x_nodes();
    let xf = f.clone().mul_real(&x)?;
    let h2 = sobolev_norm(&f, 2.0, 0.0)?;
    let weighted_rhs = sobolev_norm(&xf, 2.0, 0.0)? + sobolev_norm(&f, 1.0, 0.0)?;
    let mut plain = Vec::new();
    let mut weighted = Vec::new();
    for t in log_space(10.0, 1e3, 13) {
        let r = r_operator(&f, t)?;
        plain.push((t, t * r.l2_norm() / h2));
        weighted.push((t, t * r.mul_real(&x)?.l2_norm() / weighted_rhs));
    }
    let far = r_operator(&f, 1e6)?.l2_norm() / h2;
    Ok(vec![
        Check::envelope("R(t) envelope t^-1", &bounded(&plain), "t in [10, 1e3]"),
        Check::envelope("weighted R(t) envelope t^-1", &bounded(&weighted), "t in [10, 1e3]"),
        Check::at_most("R(1e6) limit", far, 1e-4, "relative to H2 norm"),
    ])
}

/// Largest `|Σ parts − F(z1)|` over `samples` random pairs, in units of
/// `ε_mach` times the largest term of the expansion. The terms are `F(z0)`,
/// the two linear parts and the three products making up `G`; `G` itself can
/// be much smaller than its terms.
pub fn taylor_split_ulps(samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let lambda = if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut z = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (z1, z0) = (z(), z());
        let s = taylor_split(z1, z0, lambda);
        let exact = z1 * (lambda * z1.norm_sqr());
        let dz = z1 - z0;
        let g_terms = [
            dz * (2.0 * lambda * (dz * z0.conj()).re),
            z0 * (lambda * dz.norm_sqr()),
            dz * (lambda * dz.norm_sqr()),
        ];
        let scale = [s.base, s.lin_modulus, s.lin_conj, exact]
            .iter()
            .chain(&g_terms)
            .map(|p| p.re.abs().max(p.im.abs()))
            .fold(0.0, f64::max);
        if scale == 0.0 {
            continue;
        }
        let d = s.total() - exact;
        worst = worst.max(d.re.abs().max(d.im.abs()) / (f64::EPSILON * scale));
    }
    worst
}

/// `‖w_p(t)‖_{H^s}` and `‖F(w_p(t))‖_{H^s}` over `⟨log t⟩^s`, `s = 1, 2`,
/// on `t ∈ [2, 10⁴]`.
pub fn growth_envelopes(datum: &ScatteringDatum) -> Result<Vec<Check>> {
    let grid = SpatialGrid::new(2048, 8.0)?;
    let ts = log_space(2.0, 1e4, 25);
    let mut out = Vec::new();
    for s in [1.0, 2.0] {
        let mut wp = Vec::new();
        let mut fw = Vec::new();
        for &t in &ts {
            let env = (1.0 + t.ln().powi(2)).sqrt().powf(s);
            let w = w_p(datum, grid, t)?;
            wp.push((t, sobolev_norm(&w, s, 0.0)? / env));
            fw.push((t, sobolev_norm(&cubic(&w, datum.lambda), s, 0.0)? / env));
        }
        out.push(Check::envelope(&format!("w_p H^{s} growth"), &bounded(&wp), "envelope <log t>^s"));
        out.push(Check::envelope(&format!("F(w_p) H^{s} growth"), &bounded(&fw), "envelope <log t>^s"));
    }
    Ok(out)
}

/// Relative defects of the two conjugation identities at time `t`:
/// `∂_x(M_Ψ f) = M_Ψ(ix/t + ∂_x)f + r1 M_Ψ f` with `r1 = i(∂_xΨ − x/t)`, and
/// `∂_x(M D g) = M D(iξ + t^{-1}∂_ξ)g`. Also returns `sup|r1|` over the
/// datum support.
pub fn conjugation_defects(
    datum: &ScatteringDatum,
    phase: &ProfilePhase,
    t: f64,
    n: usize,
) -> Result<(f64, f64, f64)> {
    let at = phase.at(t)?;
    let grid = SpatialGrid::new(n, 4.0 * t)?;
    let xi_grid = grid.scaled(1.0 / t);
    let g = w_p(datum, xi_grid, t)?;
    let f = dilate_exact(&g, t)?;
    let xs = grid.x_nodes();
    let mut delta = vec![0.0; n];
    let mut r1 = vec![C64::new(0.0, 0.0); n];
    let mut sup_r1: f64 = 0.0;
    for (j, &x) in xs.iter().enumerate() {
        if datum.value(x / t) != 0.0 {
            let p = at.point(x)?;
            delta[j] = p.delta;
            r1[j] = C64::new(0.0, p.d1);
            sup_r1 = sup_r1.max(p.d1.abs());
        }
    }
    let psi: Vec<f64> = xs.iter().zip(&delta).map(|(x, d)| x * x / (2.0 * t) + d).collect();
    let mf = phase_multiply(&f, &psi)?;
    let lhs = derivative(&mf, 1)?;
    let df = derivative(&f, 1)?;
    let inner: Vec<C64> = (0..n)
        .map(|j| C64::new(0.0, xs[j] / t) * f.values[j] + df.values[j])
        .collect();
    let inner = ComplexField { values: inner, ..f.clone() };
    let rhs = phase_multiply(&inner, &psi)?.add(&mf.clone().mul_complex(&r1)?)?;
    let first = lhs.sub(&rhs)?.l2_norm() / lhs.l2_norm();

    let md = modulation(&f, t)?;
    let lhs2 = derivative(&md, 1)?;
    let dg = derivative(&g, 1)?;
    let xg = g.grid.x_nodes();
    let k: Vec<C64> =
        (0..n).map(|j| C64::new(0.0, xg[j]) * g.values[j] + dg.values[j] / t).collect();
    let rhs2 = modulation(&dilate_exact(&ComplexField { values: k, ..g.clone() }, t)?, t)?;
    let second = lhs2.sub(&rhs2)?.l2_norm() / lhs2.l2_norm();
    Ok((first, second, sup_r1))
}

/// `sup|r1(t,·)| = sup|∂_xΨ − x/t|` over `n` points per sign of the datum support.
pub fn r1_series(datum: &ScatteringDatum, phase: &ProfilePhase, times: &[f64], n: usize) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = (datum.xi_lo(), datum.xi_hi());
    times
        .iter()
        .map(|&t| {
            let at = phase.at(t)?;
            let mut sup: f64 = 0.0;
            for i in 0..n {
                let v = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                for x in [t * v, -t * v] {
                    sup = sup.max(at.point(x)?.d1.abs());
                }
            }
            Ok((t, sup))
        })
        .collect()
}

/// Conjugation identities on `[T1, 10³]` and the envelope `t^{-ρ_L'}` of
/// `sup|r1|` on the datum support over `[10, 10⁴]`, the range of
/// [`phase_decay_suite`]. The quartile ratio over `[T1, 10³]` is reported in
/// the detail: `r1` changes sign near `t ≈ 30` and the heuristic is sensitive
/// to where the window starts.
pub fn conjugation_suite(datum: &ScatteringDatum, phase: &ProfilePhase, rho_prime: f64) -> Result<Vec<Check>> {
    let t0 = phase.spec.t1.max(2.0);
    let mut worst1: f64 = 0.0;
    let mut worst2: f64 = 0.0;
    for t in log_space(t0, 1e3, 13) {
        let (a, b, _) = conjugation_defects(datum, phase, t, 1 << 14)?;
        worst1 = worst1.max(a);
        worst2 = worst2.max(b);
    }
    let envelope = |t: f64| t.powf(-rho_prime);
    let env = envelope_check_with(&r1_series(datum, phase, &log_space(10.0, 1e4, 40), 400)?, envelope, ENVELOPE_THRESHOLD);
    let late = envelope_check_with(&r1_series(datum, phase, &log_space(t0, 1e3, 40), 400)?, envelope, ENVELOPE_THRESHOLD);
    Ok(vec![
        Check::at_most("phase conjugation identity", worst1, 1e-9, "relative L2 defect, t in [T1, 1e3]"),
        Check::at_most("modulation-dilation identity", worst2, 1e-9, "relative L2 defect, t in [T1, 1e3]"),
        Check::envelope(
            "sup|r1| envelope t^-rho'",
            &env,
            format!(
                "rho' = {rho_prime:.2}, t in [10, 1e4]; ratio on [T1, 1e3] is {:.3}",
                late.last_quartile_max / late.first_quartile_max
            ),
        ),
    ])
}

/// `sup |∂_x^k(Ψ − x²/(2t))|`, `k = 1, 2`, over the table window at each time.
pub fn phase_correction_series(table: &BicharTable, times: &[f64], n_x: usize) -> Result<Vec<(f64, [f64; 2])>> {
    times
        .iter()
        .map(|&t| {
            let slice = PhaseSlice::from_table(table, t, None)?;
            let mut m = [0.0f64; 2];
            for x in window_points(&slice, n_x, 0.0) {
                let s = slice.evaluate(x)?;
                m[0] = m[0].max(s.a1.abs());
                m[1] = m[1].max(s.d2.abs());
            }
            Ok((t, m))
        })
        .collect()
}

/// Decay of the phase corrections on `t ∈ [10, 10⁴]` for the benchmark
/// long-range part (`ρ_L = 0.7`) and for `ρ_L = 1` with the logarithmic
/// envelope. The tables are solved here unless supplied.
pub fn phase_decay_suite(benchmark: Option<&BicharTable>) -> Result<Vec<Check>> {
    let spec = PotentialSpec::hj_benchmark();
    let opts = HjOptions::default();
    let owned;
    let table = match benchmark {
        Some(t) => t,
        None => {
            owned = solve_bicharacteristics(&spec, &opts)?;
            &owned
        }
    };
    let times = log_space(10.0, 1e4, 40);
    let mut out = Vec::new();
    let rho = table.spec.long_range.rho;
    let series = phase_correction_series(table, &times, 400)?;
    for k in 0..2 {
        let s: Vec<(f64, f64)> = series.iter().map(|(t, m)| (*t, m[k])).collect();
        let alpha = rho + k as f64;
        let env = envelope_check_with(&s, |t| (1.0 + t * t).powf(-0.5 * alpha), ENVELOPE_THRESHOLD);
        let fit = fit_rate(&s, (10.0, 1e4), Some(0.0))?;
        out.push(Check::envelope(
            &format!("phase correction k={} rho={rho}", k + 1),
            &env,
            format!("envelope <t>^-{alpha}; fitted slope {:.3}", fit.alpha),
        ));
    }

    let spec1 = PotentialSpec { long_range: LongRange { rho: 1.0, ..spec.long_range }, ..spec };
    let table1 = solve_bicharacteristics(&spec1, &opts)?;
    let t1 = spec1.t1;
    let series = phase_correction_series(&table1, &times, 400)?;
    for k in 0..2 {
        let s: Vec<(f64, f64)> = series.iter().map(|(t, m)| (*t, m[k])).collect();
        let kk = (k + 1) as f64;
        let env = envelope_check_with(
            &s,
            |t| (1.0 + t * t).powf(-0.5 * kk) * (t / t1 + 1.0).ln(),
            ENVELOPE_THRESHOLD,
        );
        out.push(Check::envelope(
            &format!("phase correction k={} rho=1", k + 1),
            &env,
            format!("envelope <t>^-{kk} log(t/T1 + 1)"),
        ));
    }
    Ok(out)
}

/// Options of [`run_suite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub taylor_samples: usize,
    pub seed: u64,
    pub datum: ScatteringDatum,
    /// Include the phase-decay checks, which need two table solves.
    pub phase_decay: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { taylor_samples: 100_000, seed: 7, datum: ScatteringDatum::default(), phase_decay: true }
    }
}

/// The full lemma suite on the benchmark potential.
pub fn run_suite(opts: &SuiteOptions) -> Result<Vec<Check>> {
    let mut out = free_theory()?;
    out.extend(dilation_norms()?);
    out.extend(r_envelopes()?);
    out.push(Check::at_most(
        "cubic Taylor split",
        taylor_split_ulps(opts.taylor_samples, opts.seed),
        4.0,
        format!("ulps over {} random pairs", opts.taylor_samples),
    ));
    out.extend(growth_envelopes(&opts.datum)?);
    let spec = PotentialSpec::hj_benchmark();
    let table = Arc::new(solve_bicharacteristics(&spec, &HjOptions::default())?);
    let phase = ProfilePhase::from_table(table.clone());
    out.extend(conjugation_suite(&opts.datum, &phase, spec.long_range.rho - 0.05)?);
    if opts.phase_decay {
        out.extend(phase_decay_suite(Some(&table))?);
    }
    Ok(out)
}
