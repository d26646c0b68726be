//! Residual terms of the energy method, backward shooting from the
//! prescribed asymptotic profile, and the Picard-operator contraction probe.
//!
//! Notation: `w = w_p(t)`, `g = F M(t) F^{-1} w`, `q = M_Ψ D(t) g`
//! (which equals `U_Ψ F^{-1} w`), `B = (1 - χ_t) U_Ψ F^{-1}` with
//! `χ_t(x) = χ(x/t)`.
//!
//! `E3 = H(Bw) - i(∂_t B)w` is computed two ways. The direct route
//! differentiates every factor of `B` in `t` (closed form for `D`, `M`, the
//! cutoff; centered differences for `Ψ`). The decomposition route uses the
//! phase equation:
//!
//! ```text
//! I1 = -i(1-χ_t) e^{iΨ}(a1 ∂_x(Dg) + a2 Dg)
//! I2 = ((i/t) a1 χ'(x/t) + χ''(x/t)/(2t²)) q
//! I3 = t^{-1} χ'(x/t) e^{iΨ} ∂_x(Dg)
//! I4 = (1-χ_t)(V^S + V^C) q
//! I5 = (1-χ_t)(D_Ψ + V^L - V_T1) q
//! ```
//!
//! with `a1 = ∂_x(Ψ - x²/2t)`, `a2 = ½∂_x²(Ψ - x²/2t)` and `D_Ψ` the
//! Hamilton–Jacobi defect of `Ψ`. `I5` vanishes where `Ψ` solves the phase
//! equation and `t ≥ 2T1`; it is kept so that `E3 = I1 + … + I5` is an
//! exact identity for the phase actually used.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{conservation_audit, fit_rate, log_space, ConservationReport, RateFit};
use crate::error::{Error, Result};
use crate::write_csv_row;
use crate::grid::{
    conjugated_modulation, conjugated_multiplier, derivative, dilate_exact, dilation_prefactor,
    h1_norm, r_operator, ComplexField, Space, SpatialGrid, C64,
};
use crate::hj::centered_derivative;
use crate::potentials::PotentialSpec;
use crate::profile::{
    cubic, free_profile, remainder_field, u_p, w_p, PhaseAt, PhasePoint, ProfilePhase,
    ScatteringDatum,
};
use crate::propagator::{
    evolve_to, linear_propagate, Checkpoint, EvolutionState, Hamiltonian, Method, SplitStep,
};

/// Relative step `h/t` of the centered difference for `∂_tΨ`.
pub const PHASE_FD_STEP: f64 = 1e-3;

/// Frequency grid whose exact dilation by `t` is `grid`.
pub fn xi_grid_for(grid: SpatialGrid, t: f64) -> SpatialGrid {
    grid.scaled(1.0 / t)
}

/// `D(t)f` relabelled onto `grid`.
fn dilate_onto(f: &ComplexField, t: f64, grid: SpatialGrid) -> Result<ComplexField> {
    let d = dilate_exact(f, t)?;
    grid.ensure_compatible(&d.grid)?;
    Ok(ComplexField { grid, ..d })
}

/// Phase and cutoff data on every node of a grid at one time.
pub struct TimeContext {
    pub t: f64,
    pub grid: SpatialGrid,
    pub xi_grid: SpatialGrid,
    pub points: Vec<PhasePoint>,
    /// `e^{iΨ}` on the nodes.
    pub phase: Vec<C64>,
}

impl TimeContext {
    pub fn new(phase: &PhaseAt, grid: SpatialGrid) -> Result<Self> {
        let t = phase.t;
        let points: Vec<PhasePoint> =
            grid.x_nodes().par_iter().map(|&x| phase.point(x)).collect::<Result<_>>()?;
        let e = (0..grid.n())
            .map(|j| {
                let x = grid.x(j);
                C64::from_polar(1.0, x * x / (2.0 * t) + points[j].delta)
            })
            .collect();
        Ok(TimeContext { t, grid, xi_grid: xi_grid_for(grid, t), points, phase: e })
    }

    fn times_phase(&self, f: ComplexField) -> Result<ComplexField> {
        f.mul_complex(&self.phase)
    }
}

/// `M_Ψ D (1 - χ) R(t) f` for a function `f` of `ξ` on `ctx.xi_grid`.
fn cut_r_profile(spec: &PotentialSpec, ctx: &TimeContext, f: &ComplexField) -> Result<ComplexField> {
    let chi = spec.chi();
    let r = r_operator(f, ctx.t)?;
    let cut: Vec<f64> = ctx.xi_grid.x_nodes().iter().map(|&xi| 1.0 - chi.value(xi)).collect();
    let d = dilate_onto(&r.mul_real(&cut)?, ctx.t, ctx.grid)?;
    ctx.times_phase(d)
}

/// `E1(t) = M_Ψ D (1 - χ) R(t) w_p(t)`.
pub fn residual_e1(datum: &ScatteringDatum, spec: &PotentialSpec, ctx: &TimeContext) -> Result<ComplexField> {
    cut_r_profile(spec, ctx, &w_p(datum, ctx.xi_grid, ctx.t)?)
}

/// `E2(t) = -t^{-1} M_Ψ D (1 - χ) R(t) F(w_p(t))`.
pub fn residual_e2(datum: &ScatteringDatum, spec: &PotentialSpec, ctx: &TimeContext) -> Result<ComplexField> {
    let f = cubic(&w_p(datum, ctx.xi_grid, ctx.t)?, datum.lambda);
    Ok(cut_r_profile(spec, ctx, &f)?.scale(C64::new(-1.0 / ctx.t, 0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub t: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    /// `‖E3 - ΣI_k‖_{H¹}`.
    pub consistency_h1: f64,
    /// `sup |E3 - ΣI_k|`.
    pub consistency_sup: f64,
}

#[derive(Clone, Debug)]
pub struct ResidualBundle {
    pub t: f64,
    pub e1: ComplexField,
    pub e2: ComplexField,
    /// Direct route.
    pub e3: ComplexField,
    /// `I1..I5`.
    pub parts: [ComplexField; 5],
    pub norms: ResidualNorms,
}

impl ResidualBundle {
    pub fn parts_sum(&self) -> Result<ComplexField> {
        let mut s = self.parts[0].clone();
        for p in &self.parts[1..] {
            s = s.add(p)?;
        }
        Ok(s)
    }
}

/// All residual terms at time `t` on `grid`. Requires `t > T2`.
pub fn residual_bundle(
    datum: &ScatteringDatum,
    phase: &ProfilePhase,
    spec: &PotentialSpec,
    grid: SpatialGrid,
    t: f64,
) -> Result<ResidualBundle> {
    let t2 = spec.t2();
    if !(t > t2) {
        return Err(Error::Precondition(format!("E3 requires t > T2 = {t2}, got t = {t}")));
    }
    let h = PHASE_FD_STEP * t;
    let stencil = phase.stencil(t, h)?;
    let ctx = TimeContext::new(&stencil[2], grid)?;
    let e1 = residual_e1(datum, spec, &ctx)?;
    let e2 = residual_e2(datum, spec, &ctx)?;

    let n = grid.n();
    let w = w_p(datum, ctx.xi_grid, t)?;
    let g = conjugated_modulation(&w, t)?;
    let g_t = conjugated_multiplier(&w, |y| {
        C64::new(0.0, -y * y / (2.0 * t * t)) * C64::from_polar(1.0, y * y / (2.0 * t))
    })?;
    let g_xi = derivative(&g, 1)?;
    let dg = dilate_onto(&g, t, grid)?;
    let dg_x = derivative(&dg, 1)?;
    let pre = dilation_prefactor(t);

    let chi = spec.chi();
    let vc = spec.singular.sample(&grid);
    let i = C64::new(0.0, 1.0);
    let xs = grid.x_nodes();

    // ∂_tΔ by centered differences of the phase actually used.
    let dt_fd: Vec<f64> = xs
        .par_iter()
        .map(|&x| {
            let d = |k: usize| stencil[k].delta(x);
            Ok(centered_derivative(d(0)?, d(1)?, d(3)?, d(4)?, h))
        })
        .collect::<Result<_>>()?;

    let mut parts: [Vec<C64>; 5] = std::array::from_fn(|_| Vec::with_capacity(n));
    let mut bw = Vec::with_capacity(n);
    let mut dt_bw = Vec::with_capacity(n);
    for j in 0..n {
        let x = xs[j];
        let p = &ctx.points[j];
        let e = ctx.phase[j];
        let v = x / t;
        let c = chi.derivs(v);
        let cut = 1.0 - c[0];
        let q = e * dg.values[j];
        let a1 = p.d1;
        let a2 = 0.5 * p.d2;
        parts[0].push(-i * cut * e * (dg_x.values[j] * a1 + dg.values[j] * a2));
        parts[1].push((i * (a1 * c[1] / t) + C64::new(c[2] / (2.0 * t * t), 0.0)) * q);
        parts[2].push(e * dg_x.values[j] * (c[1] / t));
        let vs = spec.short_range.value(x) + vc[j];
        parts[3].push(q * (cut * vs));
        let vl_gap = spec.long_range.value(x) - spec.effective(t, x);
        parts[4].push(q * (cut * (p.defect + vl_gap)));

        bw.push(q * cut);
        let dq = q * C64::new(-0.5 / t, -x * x / (2.0 * t * t) + dt_fd[j])
            + pre * e * (g_t.values[j] - g_xi.values[j] * (x / (t * t)));
        // ∂_t(1 - χ(x/t)) = χ'(x/t) x/t².
        dt_bw.push(q * (c[1] * x / (t * t)) + dq * cut);
    }
    let ham = Hamiltonian::new(spec, grid, 0.0);
    let bw = ComplexField::new(grid, Space::Physical, bw)?;
    let hbw = ham.apply(&bw)?;
    let e3_values = hbw.values.iter().zip(&dt_bw).map(|(a, b)| a - i * b).collect();
    let e3 = ComplexField::new(grid, Space::Physical, e3_values)?;
    let parts = parts.map(|v| ComplexField { grid, space: Space::Physical, values: v });

    let mut bundle = ResidualBundle {
        t,
        e1,
        e2,
        e3,
        parts,
        norms: ResidualNorms {
            t,
            e1: 0.0,
            e2: 0.0,
            e3: 0.0,
            i1: 0.0,
            i2: 0.0,
            i3: 0.0,
            i4: 0.0,
            i5: 0.0,
            consistency_h1: 0.0,
            consistency_sup: 0.0,
        },
    };
    let diff = bundle.e3.sub(&bundle.parts_sum()?)?;
    let nm = &mut bundle.norms;
    nm.e1 = h1_norm(&bundle.e1);
    nm.e2 = h1_norm(&bundle.e2);
    nm.e3 = h1_norm(&bundle.e3);
    let pn: Vec<f64> = bundle.parts.iter().map(h1_norm).collect();
    (nm.i1, nm.i2, nm.i3, nm.i4, nm.i5) = (pn[0], pn[1], pn[2], pn[3], pn[4]);
    nm.consistency_h1 = h1_norm(&diff);
    nm.consistency_sup = diff.linf_norm();
    Ok(bundle)
}

/// Terminal data of the backward shoot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Seed {
    ProfileOnly,
    #[default]
    ProfilePlusE1,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    pub grid: SpatialGrid,
    pub dt: f64,
    pub method: Method,
    pub t_end: f64,
    pub t_start: f64,
    /// Log-spaced checkpoints including both ends.
    pub checkpoints: usize,
    pub seed: Seed,
    /// Log exponent frozen in the decay fit.
    pub b: f64,
    /// Fit window; defaults to `[max(50, T_start), 0.8 T_end]`.
    pub fit_window: Option<(f64, f64)>,
}

/// One checkpoint of a scattering run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterSample {
    pub t: f64,
    /// `‖u(t) - u_p(t)‖_{H¹}`.
    pub v_h1: f64,
    pub v_l2: f64,
    /// Same against the unmodified leading term `M D û_+`.
    pub control_h1: f64,
    pub control_l2: f64,
    pub u_h1: f64,
    pub u_linf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRun {
    pub config: ShootConfig,
    /// In decreasing `t` (the integration order).
    pub samples: Vec<ScatterSample>,
    pub log: Vec<Checkpoint>,
    pub fit: Option<RateFit>,
    pub control_fit: Option<RateFit>,
    pub conservation: Option<ConservationReport>,
    /// `sup_t t^{1/2}‖u(t)‖_{L^∞}`.
    pub linf_scaled_max: f64,
    /// `‖v(t)‖_{H¹} ≤ ‖v(T_start)‖_{H¹}` at every checkpoint.
    pub dominated_by_start: bool,
    pub failure: Option<String>,
}

impl ScatterRun {
    /// Samples in increasing `t`.
    pub fn ascending(&self) -> Vec<ScatterSample> {
        let mut s = self.samples.clone();
        s.sort_by(|a, b| a.t.total_cmp(&b.t));
        s
    }

    /// CSV rows `t,v_h1,v_l2,control_h1,control_l2,u_h1,u_linf` in increasing `t`.
    pub fn write_series_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,v_h1,v_l2,control_h1,control_l2,u_h1,u_linf")?;
        for s in self.ascending() {
            write_csv_row(&mut w, &[s.t, s.v_h1, s.v_l2, s.control_h1, s.control_l2, s.u_h1, s.u_linf])?;
        }
        Ok(())
    }

    /// CSV rows `t,mass,energy,linf,h1` in integration order.
    pub fn write_log_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,mass,energy,linf,h1")?;
        for c in &self.log {
            write_csv_row(&mut w, &[c.t, c.mass, c.energy, c.linf, c.h1])?;
        }
        Ok(())
    }
}

/// Impose `u(T_end) = u_p(T_end)` (plus `E1(T_end)` if seeded), integrate
/// the full equation backward to `T_start` and measure `u - u_p` on the way.
///
/// Blow-up or domain escape end the run early; the partial record carries
/// the failure message.
pub fn backward_shoot(
    datum: &ScatteringDatum,
    phase: &ProfilePhase,
    spec: &PotentialSpec,
    cfg: &ShootConfig,
) -> Result<ScatterRun> {
    let floor = spec.t1.max(spec.t2()).max(2.0);
    if !(cfg.t_start >= floor) {
        return Err(Error::Precondition(format!(
            "T_start = {} must be >= max(T1, T2, 2) = {floor}",
            cfg.t_start
        )));
    }
    if !(cfg.t_end > cfg.t_start) {
        return Err(Error::Invalid("T_end must exceed T_start".into()));
    }
    let grid = cfg.grid;
    let budget = 1.25 * datum.xi_hi() * cfg.t_end;
    if grid.half_length() < budget {
        return Err(Error::Precondition(format!(
            "grid half length {} below the ballistic budget 1.25·ξ_max·T_end = {budget}",
            grid.half_length()
        )));
    }
    let ham = Hamiltonian::new(spec, grid, datum.lambda);
    let mut stepper = SplitStep::new(ham.clone(), cfg.method);

    let at_end = phase.at(cfg.t_end)?;
    let mut u0 = u_p(datum, &at_end, grid)?;
    if cfg.seed == Seed::ProfilePlusE1 {
        let ctx = TimeContext::new(&at_end, grid)?;
        u0 = u0.add(&residual_e1(datum, spec, &ctx)?)?;
    }
    let mut state = EvolutionState::new(cfg.t_end, u0, cfg.dt)?;
    let mut times = log_space(cfg.t_start, cfg.t_end, cfg.checkpoints.max(2));
    times.reverse();

    let mut samples = Vec::with_capacity(times.len());
    let mut log = Vec::with_capacity(times.len());
    let mut failure = None;
    for &t in &times {
        if let Err(e) = evolve_to(&mut state, &mut stepper, t) {
            failure = Some(e.to_string());
            break;
        }
        let up = u_p(datum, &phase.at(t)?, grid)?;
        let v = state.u.sub(&up)?;
        let ctrl = state.u.sub(&free_profile(datum, t, grid))?;
        let cp = ham.checkpoint(t, &state.u)?;
        samples.push(ScatterSample {
            t,
            v_h1: h1_norm(&v),
            v_l2: v.l2_norm(),
            control_h1: h1_norm(&ctrl),
            control_l2: ctrl.l2_norm(),
            u_h1: cp.h1,
            u_linf: cp.linf,
        });
        log.push(cp);
    }

    let window = cfg.fit_window.unwrap_or((cfg.t_start.max(50.0), 0.8 * cfg.t_end));
    let asc: Vec<ScatterSample> = {
        let mut s = samples.clone();
        s.sort_by(|a, b| a.t.total_cmp(&b.t));
        s
    };
    let series: Vec<(f64, f64)> = asc.iter().map(|s| (s.t, s.v_h1)).collect();
    let control: Vec<(f64, f64)> = asc.iter().map(|s| (s.t, s.control_h1)).collect();
    let fit = fit_rate(&series, window, Some(cfg.b)).ok();
    let control_fit = fit_rate(&control, window, Some(0.0)).ok();
    let conservation = conservation_audit(&log).ok();
    let linf_scaled_max = samples.iter().map(|s| s.t.sqrt() * s.u_linf).fold(0.0, f64::max);
    let dominated_by_start = match asc.first() {
        Some(first) if first.t == cfg.t_start => {
            asc.iter().all(|s| s.v_h1 <= first.v_h1 * (1.0 + 1e-9))
        }
        _ => false,
    };
    Ok(ScatterRun {
        config: *cfg,
        samples,
        log,
        fit,
        control_fit,
        conservation,
        linf_scaled_max,
        dominated_by_start,
        failure,
    })
}

/// Coarse time grid and weights of the contraction probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub grid: SpatialGrid,
    /// Step of the linear transport between checkpoints.
    pub dt: f64,
    /// Increasing checkpoints; the last one is `T_trunc`.
    pub times: Vec<f64>,
    pub delta: f64,
    pub b: f64,
    /// Largest admissible tail bound relative to the measured numerator.
    pub tail_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// `sup_t w(t)‖Φ[v1] - Φ[v2]‖ / sup_t w(t)‖v1 - v2‖` with `w = t^δ (log t)^{-b}`.
    pub ratio: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// `(numerator + tail_bound) / denominator`: the ratio with the truncated
    /// tail counted at its bound.
    pub ratio_with_tail: f64,
    /// `v1 = v2`: ratio reported as zero.
    pub degenerate: bool,
    /// Bound on the weighted contribution of `∫_{T_trunc}^∞`.
    pub tail_bound: f64,
    /// `sup_t w(t)‖Φ[v_i]‖_{H¹}`.
    pub phi_norms: [f64; 2],
}

fn weight(t: f64, delta: f64, b: f64) -> f64 {
    t.powf(delta) * t.ln().powf(-b)
}

/// `J_k = ∫_{t_k}^{t_last} e^{-i(t_k - s)H} f(s) ds` by the trapezoid rule
/// through `J_k = e^{i h_k H}(J_{k+1} + (h_k/2) f_{k+1}) + (h_k/2) f_k`.
fn backward_duhamel(ham: &Hamiltonian, times: &[f64], f: &[ComplexField], dt: f64) -> Result<Vec<ComplexField>> {
    let m = times.len();
    let mut out = vec![ComplexField::zeros(ham.grid, Space::Physical); m];
    for k in (0..m - 1).rev() {
        let h = times[k + 1] - times[k];
        let carried = out[k + 1].add(&f[k + 1].clone().scale(C64::new(0.5 * h, 0.0)))?;
        let back = linear_propagate(ham, &carried, -h, dt)?;
        out[k] = back.add(&f[k].clone().scale(C64::new(0.5 * h, 0.0)))?;
    }
    Ok(out)
}

/// `2λ|u_p|²v + λu_p² v̄ + G(v, u_p)`.
fn nonlinear_source(v: &ComplexField, up: &ComplexField, lambda: f64) -> Result<ComplexField> {
    let g = remainder_field(v, up, lambda)?;
    let values = v
        .values
        .iter()
        .zip(&up.values)
        .zip(&g.values)
        .map(|((&z, &z0), &r)| z * (2.0 * lambda * z0.norm_sqr()) + z0 * z0 * z.conj() * lambda + r)
        .collect();
    ComplexField::new(v.grid, Space::Physical, values)
}

/// Evaluate `Φ[v_i](t) = E1 + i∫_t^{T_trunc} e^{-i(t-s)H}(N[v_i] + E2 + E3)(s)ds`
/// on the probe checkpoints and return the contraction ratio.
pub fn picard_probe(
    v1: &[ComplexField],
    v2: &[ComplexField],
    datum: &ScatteringDatum,
    phase: &ProfilePhase,
    spec: &PotentialSpec,
    cfg: &ProbeConfig,
) -> Result<ProbeResult> {
    let m = cfg.times.len();
    if m < 2 || v1.len() != m || v2.len() != m {
        return Err(Error::Invalid("probe series must match the checkpoint grid".into()));
    }
    if cfg.times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("probe checkpoints must increase".into()));
    }
    let ham = Hamiltonian::new(spec, cfg.grid, 0.0);
    let mut e1 = Vec::with_capacity(m);
    let mut src = Vec::with_capacity(m);
    let mut n1 = Vec::with_capacity(m);
    let mut n2 = Vec::with_capacity(m);
    for (k, &t) in cfg.times.iter().enumerate() {
        let bundle = residual_bundle(datum, phase, spec, cfg.grid, t)?;
        let up = u_p(datum, &phase.at(t)?, cfg.grid)?;
        n1.push(nonlinear_source(&v1[k], &up, datum.lambda)?);
        n2.push(nonlinear_source(&v2[k], &up, datum.lambda)?);
        src.push(bundle.e2.add(&bundle.e3)?);
        e1.push(bundle.e1);
    }
    let j_src = backward_duhamel(&ham, &cfg.times, &src, cfg.dt)?;
    let j1 = backward_duhamel(&ham, &cfg.times, &n1, cfg.dt)?;
    let j2 = backward_duhamel(&ham, &cfg.times, &n2, cfg.dt)?;
    let i = C64::new(0.0, 1.0);
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    let mut phi = [0.0f64; 2];
    for k in 0..m {
        let w = weight(cfg.times[k], cfg.delta, cfg.b);
        let base = e1[k].add(&j_src[k].clone().scale(i))?;
        let p1 = base.add(&j1[k].clone().scale(i))?;
        let p2 = base.add(&j2[k].clone().scale(i))?;
        phi[0] = phi[0].max(w * h1_norm(&p1));
        phi[1] = phi[1].max(w * h1_norm(&p2));
        num = num.max(w * h1_norm(&p1.sub(&p2)?));
        den = den.max(w * h1_norm(&v1[k].sub(&v2[k])?));
    }
    // Tail beyond T_trunc: the difference integrand decays at least like
    // s^{-1-δ}, so its integral is bounded by T_trunc/δ times its last value.
    let last = m - 1;
    let t_last = cfg.times[last];
    let tail_integrand = h1_norm(&n1[last].sub(&n2[last])?);
    let tail_bound =
        weight(cfg.times[0], cfg.delta, cfg.b) * tail_integrand * t_last / cfg.delta;
    if den == 0.0 {
        return Ok(ProbeResult {
            ratio: 0.0,
            ratio_with_tail: 0.0,
            numerator: num,
            denominator: 0.0,
            degenerate: true,
            tail_bound,
            phi_norms: phi,
        });
    }
    if tail_bound > cfg.tail_tolerance * num.max(f64::MIN_POSITIVE) {
        return Err(Error::Precondition(format!(
            "T_trunc = {t_last} too small: tail bound {tail_bound:.3e} against measured {num:.3e}"
        )));
    }
    Ok(ProbeResult {
        ratio: num / den,
        ratio_with_tail: (num + tail_bound) / den,
        numerator: num,
        denominator: den,
        degenerate: false,
        tail_bound,
        phi_norms: phi,
    })
}

/// Random perturbation series `v(t) = c(t) M_Ψ D φ` with `φ` a random
/// combination of bumps inside the datum windows, scaled so that
/// `‖v(t)‖_{H¹} = size · t^{-δ}(log t)^b` at every checkpoint.
pub fn perturbation_series(
    datum: &ScatteringDatum,
    phase: &ProfilePhase,
    grid: SpatialGrid,
    times: &[f64],
    size: f64,
    delta: f64,
    b: f64,
    seed: u64,
) -> Result<Vec<ComplexField>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (datum.xi_lo(), datum.xi_hi());
    let lumps: Vec<(f64, f64, C64)> = (0..6)
        .map(|_| {
            let w = rng.gen_range(0.15..0.4) * (hi - lo);
            let c = rng.gen_range(lo + 0.5 * w..hi - 0.5 * w) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (c, w, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        })
        .collect();
    let phi = |xi: f64| -> C64 {
        lumps
            .iter()
            .map(|&(c, w, a)| {
                let s = (xi - c) / w + 0.5;
                if s <= 0.0 || s >= 1.0 {
                    C64::new(0.0, 0.0)
                } else {
                    a * (4.0 - 1.0 / (s * (1.0 - s))).exp()
                }
            })
            .sum()
    };
    times
        .iter()
        .map(|&t| {
            let at = phase.at(t)?;
            let pre = dilation_prefactor(t);
            let values = (0..grid.n())
                .map(|j| {
                    let x = grid.x(j);
                    let f = phi(x / t);
                    if f == C64::new(0.0, 0.0) {
                        return Ok(f);
                    }
                    Ok(pre * f * C64::from_polar(1.0, x * x / (2.0 * t) + at.delta(x)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let v = ComplexField::new(grid, Space::Physical, values)?;
            let target = size * t.powf(-delta) * t.ln().powf(b);
            let norm = h1_norm(&v);
            Ok(v.scale(C64::new(target / norm, 0.0)))
        })
        .collect()
}

/// `δ = min{ρ_L, ρ_S - 1} - 0.05` clipped to `(1/2, 1]`.
pub fn default_delta(spec: &PotentialSpec) -> f64 {
    let d = spec.long_range.rho.min(spec.short_range.rho - 1.0) - 0.05;
    d.clamp(0.5 + 1e-6, 1.0)
}

/// Default log exponent of the asymptotic bound.
pub const DEFAULT_B: f64 = 2.5;

/// `ρ_L' = ρ_L - 0.05`.
pub fn rho_prime(spec: &PotentialSpec) -> f64 {
    spec.long_range.rho - 0.05
}
