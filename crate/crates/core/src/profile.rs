//! Scattering datum `û_+`, the profile `w_p = e^{-iλ|û_+|² log t}û_+`, the
//! modified profile `u_p = M_Ψ D w_p` and the cubic nonlinearity.
//!
//! The phase used here is [`ProfilePhase`]: `Ψ = x²/(2t) + βΔΨ`, where `ΔΨ`
//! comes from the bicharacteristic table and `β(|x|/t)` is a smooth window
//! equal to one on the bulk of the table's momentum range and zero outside
//! it. On the datum support `β = 1`, so `u_p` carries the exact phase; off
//! it the blend keeps every derived quantity smooth and the Hamilton–Jacobi
//! defect it introduces is reported rather than hidden.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::write_csv_row;
use crate::grid::{dilation_prefactor, ComplexField, Space, SpatialGrid, C64};
use crate::hj::{stencil_slices, BicharTable, PhaseSlice};
use crate::potentials::{CutoffChi, PotentialSpec};

/// `exp(4 - 1/(s(1-s)))` on `0 < s < 1`: a C^∞ bump with maximum 1 at `s = ½`.
fn unit_bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let e = 4.0 - 1.0 / (s * (1.0 - s));
    if e < -745.0 {
        0.0
    } else {
        e.exp()
    }
}

/// `û_+(ξ) = ε Σ_w bump_w(|ξ|)` (or only `ξ > 0` when one-sided), with
/// bumps on disjoint windows `[lo, hi] ⊂ {ξ ≥ c0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringDatum {
    pub epsilon: f64,
    pub lambda: f64,
    pub c0: f64,
    pub windows: Vec<(f64, f64)>,
    #[serde(default = "yes")]
    pub two_sided: bool,
}

fn yes() -> bool {
    true
}

impl Default for ScatteringDatum {
    fn default() -> Self {
        ScatteringDatum { epsilon: 0.1, lambda: 1.0, c0: 1.0, windows: vec![(1.0, 3.0)], two_sided: true }
    }
}

impl ScatteringDatum {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Invalid(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.windows.is_empty() {
            return Err(Error::Invalid("datum needs at least one window".into()));
        }
        let mut w = self.windows.clone();
        w.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (lo, hi) in &w {
            if !(hi > lo) {
                return Err(Error::Invalid(format!("datum window [{lo}, {hi}] is empty")));
            }
            if *lo < self.c0 {
                return Err(Error::Invalid(format!(
                    "datum window [{lo}, {hi}] violates supp û_+ ⊂ {{|ξ| ≥ c0}} with c0 = {}",
                    self.c0
                )));
            }
        }
        if w.windows(2).any(|p| p[1].0 < p[0].1) {
            return Err(Error::Invalid("datum windows overlap".into()));
        }
        Ok(())
    }

    pub fn value(&self, xi: f64) -> f64 {
        if xi < 0.0 && !self.two_sided {
            return 0.0;
        }
        let a = xi.abs();
        self.epsilon
            * self
                .windows
                .iter()
                .map(|&(lo, hi)| unit_bump((a - lo) / (hi - lo)))
                .sum::<f64>()
    }

    /// Largest `|ξ|` in the support.
    pub fn xi_hi(&self) -> f64 {
        self.windows.iter().map(|w| w.1).fold(0.0, f64::max)
    }

    pub fn xi_lo(&self) -> f64 {
        self.windows.iter().map(|w| w.0).fold(f64::INFINITY, f64::min)
    }

    /// `û_+` on the nodes of `grid` (read as frequencies).
    pub fn sample(&self, grid: SpatialGrid) -> ComplexField {
        ComplexField::from_real_fn(grid, |xi| self.value(xi))
    }

    /// `e^{-iλ|û_+|² log t}` factor at one frequency.
    #[inline]
    pub fn log_phase(&self, xi: f64, t: f64) -> f64 {
        let u = self.value(xi);
        -self.lambda * u * u * t.ln()
    }

    /// Same datum with `ε` replaced.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        ScatteringDatum { epsilon, ..self.clone() }
    }
}

/// `w_p(t)` on the nodes of `grid`. Requires `t ≥ 1`.
pub fn w_p(datum: &ScatteringDatum, grid: SpatialGrid, t: f64) -> Result<ComplexField> {
    if !(t >= 1.0) {
        return Err(Error::Precondition(format!("w_p requires t >= 1, got {t}")));
    }
    let lt = t.ln();
    let lambda = datum.lambda;
    Ok(ComplexField::from_fn(grid, |xi| {
        let u = datum.value(xi);
        C64::from_polar(u, -lambda * u * u * lt)
    }))
}

/// `F(u) = λ|u|²u`.
pub fn cubic(f: &ComplexField, lambda: f64) -> ComplexField {
    let values = f.values.iter().map(|v| v * (lambda * v.norm_sqr())).collect();
    ComplexField { grid: f.grid, space: f.space, values }
}

/// Pieces of `F(z1) - F(z0)`: the two linear terms in `z = z1 - z0` and the
/// remainder `G(z, z0) = 2λRe[z z̄0]z + λ|z|²z0 + λ|z|²z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorSplit {
    pub base: C64,
    pub lin_modulus: C64,
    pub lin_conj: C64,
    pub remainder: C64,
}

impl TaylorSplit {
    /// Sum of the four parts with compensated summation per component.
    pub fn total(&self) -> C64 {
        let parts = [self.base, self.lin_modulus, self.lin_conj, self.remainder];
        C64::new(neumaier(parts.iter().map(|p| p.re)), neumaier(parts.iter().map(|p| p.im)))
    }
}

fn neumaier(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

pub fn taylor_split(z1: C64, z0: C64, lambda: f64) -> TaylorSplit {
    let z = z1 - z0;
    let n0 = z0.norm_sqr();
    let nz = z.norm_sqr();
    TaylorSplit {
        base: z0 * (lambda * n0),
        lin_modulus: z * (2.0 * lambda * n0),
        lin_conj: z0 * z0 * z.conj() * lambda,
        remainder: z * (2.0 * lambda * (z * z0.conj()).re) + z0 * (lambda * nz) + z * (lambda * nz),
    }
}

/// `G(v, u_p)` pointwise.
pub fn remainder_field(v: &ComplexField, u: &ComplexField, lambda: f64) -> Result<ComplexField> {
    v.ensure_same_layout(u)?;
    let values = v
        .values
        .iter()
        .zip(&u.values)
        .map(|(&z, &z0)| taylor_split(z0 + z, z0, lambda).remainder)
        .collect();
    ComplexField::new(v.grid, v.space, values)
}

/// `‖i∂_t w_p - t^{-1}F(w_p)‖` with the closed-form derivative
/// `∂_t w_p = -iλ|û_+|² t^{-1} w_p`.
pub fn profile_ode_residual(datum: &ScatteringDatum, grid: SpatialGrid, t: f64) -> Result<f64> {
    if !(t >= 2.0) {
        return Err(Error::Precondition(format!("profile residual requires t >= 2, got {t}")));
    }
    let w = w_p(datum, grid, t)?;
    let f = cubic(&w, datum.lambda);
    let i = C64::new(0.0, 1.0);
    let values: Vec<C64> = w
        .values
        .iter()
        .zip(grid.x_nodes())
        .zip(&f.values)
        .map(|((wv, xi), fv)| {
            let u = datum.value(xi);
            let dt = wv * C64::new(0.0, -datum.lambda * u * u / t);
            i * dt - fv / t
        })
        .collect();
    Ok(ComplexField::new(grid, Space::Physical, values)?.l2_norm())
}

/// Same residual with `∂_t` by a centered difference of step `dt`.
pub fn profile_ode_residual_fd(
    datum: &ScatteringDatum,
    grid: SpatialGrid,
    t: f64,
    dt: f64,
) -> Result<f64> {
    if !(t - dt >= 1.0) {
        return Err(Error::Precondition("difference stencil reaches below t = 1".into()));
    }
    let (wp, wm, w) = (w_p(datum, grid, t + dt)?, w_p(datum, grid, t - dt)?, w_p(datum, grid, t)?);
    let f = cubic(&w, datum.lambda);
    let i = C64::new(0.0, 1.0);
    let values = (0..grid.n())
        .map(|j| i * (wp.values[j] - wm.values[j]) / (2.0 * dt) - f.values[j] / t)
        .collect();
    Ok(ComplexField::new(grid, Space::Physical, values)?.l2_norm())
}

/// `0` below `a`, `1` above `b`, smooth in between: `[value, d/dv, d²/dv²]`.
fn smooth_step(v: f64, a: f64, b: f64) -> [f64; 3] {
    if v <= a {
        return [0.0; 3];
    }
    if v >= b {
        return [1.0, 0.0, 0.0];
    }
    let chi = CutoffChi { c0: 1.0 };
    let k = (chi.outer() - chi.inner()) / (b - a);
    let c = chi.derivs(chi.inner() + (v - a) * k);
    [1.0 - c[0], -c[1] * k, -c[2] * k * k]
}

/// Where the table phase is used: `β(v) = 1` on `[lo.1, hi.0]`, `0` outside
/// `[lo.0, hi.1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendWindow {
    pub lo: (f64, f64),
    pub hi: (f64, f64),
}

impl BlendWindow {
    /// Ramps of width 0.05 starting 0.05 inside the lower table edge, and of
    /// width 0.2 ending 0.2 inside the upper one.
    pub fn for_table(xi_min: f64, xi_max: f64) -> Self {
        BlendWindow { lo: (xi_min + 0.05, xi_min + 0.1), hi: (xi_max - 0.4, xi_max - 0.2) }
    }

    /// `[β, β', β'']` in `v = |x|/t`.
    pub fn beta(&self, v: f64) -> [f64; 3] {
        let up = smooth_step(v, self.lo.0, self.lo.1);
        let down = smooth_step(v, self.hi.0, self.hi.1);
        let dn = [1.0 - down[0], -down[1], -down[2]];
        [up[0] * dn[0], up[1] * dn[0] + up[0] * dn[1], up[2] * dn[0] + 2.0 * up[1] * dn[1] + up[0] * dn[2]]
    }
}

/// Phase of the modified profile.
#[derive(Clone, Debug)]
pub struct ProfilePhase {
    pub spec: PotentialSpec,
    table: Option<Arc<BicharTable>>,
    pub blend: BlendWindow,
}

/// Phase data at one point: `Δ = Ψ - x²/(2t)` and its derivatives, together
/// with `D = ∂_tΔ + (x/t)∂_xΔ + ½(∂_xΔ)² + V_T1`, the Hamilton–Jacobi defect
/// of `Ψ` (zero wherever `β = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PhasePoint {
    pub delta: f64,
    pub d1: f64,
    pub d2: f64,
    pub dt: f64,
    pub defect: f64,
}

impl ProfilePhase {
    pub fn free(spec: PotentialSpec) -> Self {
        ProfilePhase { spec, table: None, blend: BlendWindow::for_table(0.85, 4.5) }
    }

    pub fn from_table(table: Arc<BicharTable>) -> Self {
        let o = &table.options;
        ProfilePhase { spec: table.spec, blend: BlendWindow::for_table(o.xi_min, o.xi_max), table: Some(table) }
    }

    pub fn table(&self) -> Option<&BicharTable> {
        self.table.as_deref()
    }

    pub fn at(&self, t: f64) -> Result<PhaseAt> {
        if !(t > 0.0) {
            return Err(Error::Precondition(format!("phase requires t > 0, got {t}")));
        }
        let slice = match &self.table {
            Some(tab) => Some(PhaseSlice::from_table(tab, t, None)?),
            None => None,
        };
        Ok(PhaseAt { t, slice, spec: self.spec, blend: self.blend })
    }

    /// Slices at `t + k h`, `k = -2..=2`, continued from a common node.
    pub fn stencil(&self, t: f64, h: f64) -> Result<[PhaseAt; 5]> {
        match &self.table {
            Some(tab) => {
                let s = stencil_slices(tab, t, h)?;
                let mk = |k: usize, sl: PhaseSlice| PhaseAt {
                    t: t + (k as f64 - 2.0) * h,
                    slice: Some(sl),
                    spec: self.spec,
                    blend: self.blend,
                };
                let [a, b, c, d, e] = s;
                Ok([mk(0, a), mk(1, b), mk(2, c), mk(3, d), mk(4, e)])
            }
            None => {
                let mk = |k: f64| PhaseAt { t: t + k * h, slice: None, spec: self.spec, blend: self.blend };
                Ok([mk(-2.0), mk(-1.0), mk(0.0), mk(1.0), mk(2.0)])
            }
        }
    }
}

/// A [`ProfilePhase`] frozen at one time.
#[derive(Clone, Debug)]
pub struct PhaseAt {
    pub t: f64,
    slice: Option<PhaseSlice>,
    spec: PotentialSpec,
    blend: BlendWindow,
}

impl PhaseAt {
    pub fn point(&self, x: f64) -> Result<PhasePoint> {
        let t = self.t;
        let vt = self.spec.effective(t, x);
        let slice = match &self.slice {
            None => return Ok(PhasePoint { defect: vt, ..PhasePoint::default() }),
            Some(s) => s,
        };
        let v = x.abs() / t;
        let [b0, b1, b2] = self.blend.beta(v);
        if b0 == 0.0 && b1 == 0.0 && b2 == 0.0 {
            return Ok(PhasePoint { defect: vt, ..PhasePoint::default() });
        }
        let s = slice.evaluate(x)?;
        let sg = x.signum();
        // β as a function of x and t.
        let bx = b1 * sg / t;
        let bxx = b2 / (t * t);
        let bt = -b1 * v / t;
        let dt_true = -((x / t) * s.a1 + 0.5 * s.a1 * s.a1 + vt);
        let delta = b0 * s.delta_psi;
        let d1 = bx * s.delta_psi + b0 * s.a1;
        let d2 = bxx * s.delta_psi + 2.0 * bx * s.a1 + b0 * s.d2;
        let dt = bt * s.delta_psi + b0 * dt_true;
        let defect = dt + (x / t) * d1 + 0.5 * d1 * d1 + vt;
        Ok(PhasePoint { delta, d1, d2, dt, defect })
    }

    /// `Δ` only; zero where the blend vanishes.
    pub fn delta(&self, x: f64) -> Result<f64> {
        Ok(self.point(x)?.delta)
    }

    pub fn covers(&self, x: f64) -> bool {
        match &self.slice {
            None => true,
            Some(s) => {
                let b = self.blend.beta(x.abs() / self.t);
                (b[0] == 0.0 && b[1] == 0.0 && b[2] == 0.0) || s.contains(x)
            }
        }
    }
}

/// `u_p(t)` on `grid`: `(it)^{-1/2} e^{iΨ} e^{-iλ|û_+(x/t)|² log t} û_+(x/t)`,
/// exactly zero where `û_+(x/t) = 0`.
pub fn u_p(datum: &ScatteringDatum, phase: &PhaseAt, grid: SpatialGrid) -> Result<ComplexField> {
    let t = phase.t;
    if !(t >= 1.0) {
        return Err(Error::Precondition(format!("u_p requires t >= 1, got {t}")));
    }
    let c = dilation_prefactor(t);
    let lt = t.ln();
    let values = (0..grid.n())
        .map(|j| {
            let x = grid.x(j);
            let u = datum.value(x / t);
            if u == 0.0 {
                return Ok(C64::new(0.0, 0.0));
            }
            let psi = x * x / (2.0 * t) + phase.delta(x)?;
            Ok(c * C64::from_polar(u, psi - datum.lambda * u * u * lt))
        })
        .collect::<Result<Vec<_>>>()?;
    ComplexField::new(grid, Space::Physical, values)
}

/// Unmodified leading term `M(t)D(t)û_+`.
pub fn free_profile(datum: &ScatteringDatum, t: f64, grid: SpatialGrid) -> ComplexField {
    let c = dilation_prefactor(t);
    ComplexField::from_fn(grid, |x| c * C64::from_polar(datum.value(x / t), x * x / (2.0 * t)))
}

/// Phase samples of `Ψ` on a grid (zero where the datum vanishes is not
/// assumed; every node is evaluated).
pub fn psi_on_grid(phase: &PhaseAt, grid: SpatialGrid) -> Result<Vec<PhasePoint>> {
    use rayon::prelude::*;
    grid.x_nodes().par_iter().map(|&x| phase.point(x)).collect()
}

/// Snapshot of the profile at one time.
#[derive(Clone, Debug)]
pub struct ProfileSnapshot {
    pub t: f64,
    pub u_p: ComplexField,
    pub w_p: ComplexField,
    /// `Ψ(t,x)` on the nodes of `u_p` where `û_+(x/t) ≠ 0`, `NaN` elsewhere.
    pub psi: Vec<f64>,
    /// `-λ|û_+(x/t)|² log t` on the same nodes.
    pub log_phase: Vec<f64>,
}

impl ProfileSnapshot {
    pub fn build(
        datum: &ScatteringDatum,
        phase: &PhaseAt,
        grid: SpatialGrid,
        xi_grid: SpatialGrid,
    ) -> Result<Self> {
        let t = phase.t;
        let u = u_p(datum, phase, grid)?;
        let w = w_p(datum, xi_grid, t)?;
        let mut psi = Vec::with_capacity(grid.n());
        let mut log_phase = Vec::with_capacity(grid.n());
        for x in grid.x_nodes() {
            if datum.value(x / t) == 0.0 {
                psi.push(f64::NAN);
                log_phase.push(0.0);
            } else {
                psi.push(x * x / (2.0 * t) + phase.delta(x)?);
                log_phase.push(datum.log_phase(x / t, t));
            }
        }
        Ok(ProfileSnapshot { t, u_p: u, w_p: w, psi, log_phase })
    }

    /// CSV rows `x,re,im` of `u_p`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,re,im")?;
        for (j, v) in self.u_p.values.iter().enumerate() {
            write_csv_row(&mut w, &[self.u_p.grid.x(j), v.re, v.im])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_peaks_at_one() {
        assert_eq!(unit_bump(0.5), 1.0);
        assert_eq!(unit_bump(0.0), 0.0);
        assert_eq!(unit_bump(1.0), 0.0);
        assert!(unit_bump(0.3) < 1.0);
    }

    #[test]
    fn blend_is_one_in_bulk_and_zero_outside() {
        let b = BlendWindow::for_table(0.85, 4.5);
        assert_eq!(b.beta(2.0), [1.0, 0.0, 0.0]);
        assert_eq!(b.beta(0.5)[0], 0.0);
        assert_eq!(b.beta(5.0)[0], 0.0);
        let m = b.beta(0.925);
        assert!(m[0] > 0.0 && m[0] < 1.0 && m[1] > 0.0);
    }

    #[test]
    fn hand_checked_split() {
        let s = taylor_split(C64::new(1.0, 1.0), C64::new(1.0, 0.0), 1.0);
        assert_eq!(s.base, C64::new(1.0, 0.0));
        assert_eq!(s.lin_modulus, C64::new(0.0, 2.0));
        assert_eq!(s.lin_conj, C64::new(0.0, -1.0));
        assert_eq!(s.remainder, C64::new(1.0, 1.0));
        assert_eq!(s.total(), C64::new(2.0, 2.0));
    }
}
