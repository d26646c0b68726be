//! Free group, split-step evolution of `i∂_t u = H u + λ|u|²u` with
//! `H = -½∂_x² + V`, checkpoint logging and the Duhamel consistency check.
//!
//! Each step composes the exact kinetic flow `e^{-ihξ²/2}` (one FFT pair)
//! with the exact flow of `i∂_t u = (V + λ|u|²)u`, which is the pointwise
//! phase `e^{-ih(V + λ|u|²)}` because it leaves `|u|` invariant. All substeps
//! are unitary, so negative `h` runs the equation backward.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::Fft;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    apply_multiplier, fft_plans, fourier, ComplexField, Direction, Space, SpatialGrid, C64,
    BOUNDARY_FRACTION,
};
use crate::potentials::PotentialSpec;

/// Boundary mass fraction above which an evolution reports domain escape.
pub const ESCAPE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Strang,
    /// Triple-jump composition of Strang steps.
    FourthOrder,
}

impl Method {
    /// Coefficients `(a, b)` of `N(a_0 h) K(b_0 h) N(a_1 h) … K(b_{m-1} h) N(a_m h)`.
    fn coefficients(self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Method::Strang => (vec![0.5, 0.5], vec![1.0]),
            Method::FourthOrder => {
                let w1 = 1.0 / (2.0 - 2f64.cbrt());
                let w0 = 1.0 - 2.0 * w1;
                (vec![0.5 * w1, 0.5 * (w1 + w0), 0.5 * (w0 + w1), 0.5 * w1], vec![w1, w0, w1])
            }
        }
    }
}

/// One logged state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub linf: f64,
    pub h1: f64,
}

/// `H = -½∂_x² + V` together with the coupling `λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    pub grid: SpatialGrid,
    pub potential: Vec<f64>,
    pub lambda: f64,
}

impl Hamiltonian {
    pub fn new(spec: &PotentialSpec, grid: SpatialGrid, lambda: f64) -> Self {
        Hamiltonian { grid, potential: spec.total_on_grid(&grid), lambda }
    }

    pub fn free(grid: SpatialGrid, lambda: f64) -> Self {
        Hamiltonian { grid, potential: vec![0.0; grid.n()], lambda }
    }

    /// Same potential with `λ = 0`.
    pub fn linear(&self) -> Self {
        Hamiltonian { lambda: 0.0, ..self.clone() }
    }

    /// `H u` (linear part only).
    pub fn apply(&self, u: &ComplexField) -> Result<ComplexField> {
        u.ensure_space(Space::Physical)?;
        self.grid.ensure_compatible(&u.grid)?;
        let kin = apply_multiplier(u, |xi| C64::new(0.5 * xi * xi, 0.0))?;
        let values = kin
            .values
            .iter()
            .zip(&u.values)
            .zip(&self.potential)
            .map(|((k, v), &p)| k + v * p)
            .collect();
        ComplexField::new(u.grid, Space::Physical, values)
    }

    /// `F(u) = λ|u|²u`.
    pub fn nonlinearity(&self, u: &ComplexField) -> ComplexField {
        crate::profile::cubic(u, self.lambda)
    }

    /// Mass, energy `½‖∂_xu‖² + ⟨Vu,u⟩ + (λ/2)‖u‖⁴_{L⁴}`, `L^∞` and `H¹` norms.
    pub fn checkpoint(&self, t: f64, u: &ComplexField) -> Result<Checkpoint> {
        u.ensure_space(Space::Physical)?;
        let dx = u.grid.dx();
        let spec = fourier(u, Direction::Forward)?;
        let d_xi = u.grid.d_xi();
        let (mut kin, mut h1sq) = (0.0, 0.0);
        for (k, v) in spec.values.iter().enumerate() {
            let xi = u.grid.xi(k);
            kin += xi * xi * v.norm_sqr();
            h1sq += (1.0 + xi * xi) * v.norm_sqr();
        }
        let (mut mass, mut pot, mut quart, mut linf) = (0.0, 0.0, 0.0, 0.0f64);
        for (v, &p) in u.values.iter().zip(&self.potential) {
            let m = v.norm_sqr();
            mass += m;
            pot += p * m;
            quart += m * m;
            linf = linf.max(m);
        }
        Ok(Checkpoint {
            t,
            mass: mass * dx,
            energy: 0.5 * kin * d_xi + pot * dx + 0.5 * self.lambda * quart * dx,
            linf: linf.sqrt(),
            h1: (h1sq * d_xi).sqrt(),
        })
    }
}

/// `e^{-itH_0} f` as the exact spectral multiplier.
pub fn free_propagate(f: &ComplexField, t: f64) -> Result<ComplexField> {
    apply_multiplier(f, |xi| C64::from_polar(1.0, -0.5 * t * xi * xi))
}

/// Fraction of the mass carried by nodes with `|x| ≥ BOUNDARY_FRACTION · L`.
pub fn boundary_mass_fraction(u: &ComplexField) -> f64 {
    let edge = BOUNDARY_FRACTION * u.grid.half_length();
    let (mut total, mut edge_mass) = (0.0, 0.0);
    for (j, v) in u.values.iter().enumerate() {
        let m = v.norm_sqr();
        total += m;
        if u.grid.x(j).abs() >= edge {
            edge_mass += m;
        }
    }
    if total > 0.0 {
        edge_mass / total
    } else {
        0.0
    }
}

/// Split-step integrator bound to one Hamiltonian.
pub struct SplitStep {
    pub ham: Hamiltonian,
    pub method: Method,
    k_sq: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
    kinetic_cache: Vec<(f64, Vec<C64>)>,
}

impl SplitStep {
    pub fn new(ham: Hamiltonian, method: Method) -> Self {
        let n = ham.grid.n();
        let dk = PI / ham.grid.half_length();
        let k_sq = (0..n)
            .map(|m| {
                let k = if m < n / 2 { m as f64 } else { m as f64 - n as f64 } * dk;
                k * k
            })
            .collect();
        let (fwd, inv) = fft_plans(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        SplitStep {
            ham,
            method,
            k_sq,
            fwd,
            inv,
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
            kinetic_cache: Vec::new(),
        }
    }

    fn kinetic(&mut self, u: &mut [C64], h: f64) {
        let idx = match self.kinetic_cache.iter().position(|(key, _)| *key == h) {
            Some(i) => i,
            None => {
                let inv_n = 1.0 / u.len() as f64;
                let m = self.k_sq.iter().map(|&k2| C64::from_polar(inv_n, -0.5 * h * k2)).collect();
                if self.kinetic_cache.len() >= 8 {
                    self.kinetic_cache.remove(0);
                }
                self.kinetic_cache.push((h, m));
                self.kinetic_cache.len() - 1
            }
        };
        self.fwd.process_with_scratch(u, &mut self.scratch);
        for (v, m) in u.iter_mut().zip(&self.kinetic_cache[idx].1) {
            *v *= m;
        }
        self.inv.process_with_scratch(u, &mut self.scratch);
    }

    fn local_phase(&self, u: &mut [C64], h: f64) {
        let lambda = self.ham.lambda;
        for (v, &p) in u.iter_mut().zip(&self.ham.potential) {
            *v *= C64::from_polar(1.0, -h * (p + lambda * v.norm_sqr()));
        }
    }

    /// `n` steps of size `h`, merging adjacent local substeps.
    pub fn advance(&mut self, u: &mut [C64], h: f64, n: usize) {
        if n == 0 {
            return;
        }
        let (a, b) = self.method.coefficients();
        let m = b.len();
        self.local_phase(u, a[0] * h);
        for step in 0..n {
            for i in 0..m {
                self.kinetic(u, b[i] * h);
                let c = if i + 1 < m {
                    a[i + 1]
                } else if step + 1 < n {
                    a[m] + a[0]
                } else {
                    a[m]
                };
                self.local_phase(u, c * h);
            }
        }
    }
}

/// Evolution state owned by a single run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionState {
    pub t: f64,
    pub u: ComplexField,
    /// Nominal step magnitude; the actual step is adjusted to land on targets.
    pub dt: f64,
    pub steps: u64,
}

impl EvolutionState {
    pub fn new(t: f64, u: ComplexField, dt: f64) -> Result<Self> {
        u.ensure_space(Space::Physical)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
        }
        Ok(EvolutionState { t, u, dt, steps: 0 })
    }
}

/// Steps between blow-up checks.
const GUARD_CHUNK: usize = 256;

/// Evolve to `t_target` (either direction) with steps of at most `state.dt`.
/// On blow-up the state is restored to the last finite chunk.
pub fn evolve_to(state: &mut EvolutionState, stepper: &mut SplitStep, t_target: f64) -> Result<()> {
    stepper.ham.grid.ensure_compatible(&state.u.grid)?;
    let span = t_target - state.t;
    if span == 0.0 {
        return Ok(());
    }
    let n = ((span.abs() / state.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let t0 = state.t;
    let mut done = 0;
    while done < n {
        let chunk = GUARD_CHUNK.min(n - done);
        let backup = state.u.values.clone();
        stepper.advance(&mut state.u.values, h, chunk);
        if state.u.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            state.u.values = backup;
            return Err(Error::BlowUp { t: t0 + h * (done + chunk) as f64 });
        }
        done += chunk;
        state.t = t0 + h * done as f64;
        state.steps += chunk as u64;
    }
    state.t = t_target;
    let boundary_mass = boundary_mass_fraction(&state.u);
    if boundary_mass > ESCAPE_TOLERANCE {
        return Err(Error::DomainEscape { t: state.t, boundary_mass });
    }
    Ok(())
}

/// Evolve through `times` in order, logging a checkpoint at each and the
/// start, and calling `visit` on every checkpointed state.
pub fn evolve_logged<F>(
    state: &mut EvolutionState,
    stepper: &mut SplitStep,
    times: &[f64],
    mut visit: F,
) -> Result<Vec<Checkpoint>>
where
    F: FnMut(&EvolutionState) -> Result<()>,
{
    let mut log = vec![stepper.ham.checkpoint(state.t, &state.u)?];
    visit(state)?;
    for &t in times {
        evolve_to(state, stepper, t)?;
        log.push(stepper.ham.checkpoint(state.t, &state.u)?);
        visit(state)?;
    }
    Ok(log)
}

/// `e^{-itH} f` by linear split steps of at most `dt`.
pub fn linear_propagate(ham: &Hamiltonian, f: &ComplexField, t: f64, dt: f64) -> Result<ComplexField> {
    let mut state = EvolutionState::new(0.0, f.clone(), dt)?;
    let mut stepper = SplitStep::new(ham.linear(), Method::Strang);
    evolve_to(&mut state, &mut stepper, t)?;
    Ok(state.u)
}

/// `L²` defect of `u(t_M) = e^{-i(t_M - t_0)H}u(t_0) - i∫ e^{-i(t_M - s)H}F(u(s))ds`
/// with the integral by the trapezoid rule on the series nodes, evaluated by
/// the recurrence `W ← e^{-ihH}W - i w_k F(u_k)` (one propagation per node).
pub fn duhamel_residual(series: &[(f64, ComplexField)], ham: &Hamiltonian, dt: f64) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::InsufficientData { got: series.len(), need: 2 });
    }
    let h = series[1].0 - series[0].0;
    for w in series.windows(2) {
        if ((w[1].0 - w[0].0) - h).abs() > 1e-9 * h.abs() {
            return Err(Error::Invalid("duhamel series must be uniformly spaced".into()));
        }
    }
    let mut stepper = SplitStep::new(ham.linear(), Method::Strang);
    let n_sub = ((h.abs() / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let minus_i = C64::new(0.0, -1.0);
    let last = series.len() - 1;
    let push = |w: &mut Vec<C64>, u: &ComplexField, weight: f64| {
        let f = ham.nonlinearity(u);
        for (a, b) in w.iter_mut().zip(&f.values) {
            *a += minus_i * weight * b;
        }
    };
    let mut w = series[0].1.values.clone();
    push(&mut w, &series[0].1, 0.5 * h);
    for (k, (_, u)) in series.iter().enumerate().skip(1) {
        stepper.advance(&mut w, h / n_sub as f64, n_sub);
        push(&mut w, u, if k == last { 0.5 * h } else { h });
    }
    let target = &series[last].1;
    let diff = ComplexField::new(target.grid, Space::Physical, w)?.sub(target)?;
    Ok(diff.l2_norm())
}
