//! Uniform periodic grids, the unitary Fourier transform and the spectral
//! operators built on it.
//!
//! The continuum transform is `F f(ξ) = (2π)^{-1/2} ∫ e^{-ixξ} f(x) dx`. A
//! grid with `n` nodes on `[-L, L)` pairs with the frequency nodes
//! `ξ_k = -π/dx + k π/L`, and the scaled FFT below reproduces the continuum
//! transform on those nodes for fields that decay inside the box. The
//! frequency nodes of one grid are exactly the physical nodes of its
//! [`SpatialGrid::dual`], which lets functions of `ξ` be treated as ordinary
//! fields.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default absolute decay tolerance at the edge of the box.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Fraction of the half length beyond which a field counts as "at the boundary".
pub const BOUNDARY_FRACTION: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    n_points: usize,
    half_length: f64,
}

impl SpatialGrid {
    pub fn new(n_points: usize, half_length: f64) -> Result<Self> {
        if n_points < 4 || n_points % 2 != 0 {
            return Err(Error::Invalid(format!(
                "n_points must be an even integer >= 4, got {n_points}"
            )));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::Invalid(format!(
                "half_length must be positive and finite, got {half_length}"
            )));
        }
        Ok(Self { n_points, half_length })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n_points as f64
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.dx()
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Frequency spacing `π/L`.
    #[inline]
    pub fn d_xi(&self) -> f64 {
        PI / self.half_length
    }

    /// Nyquist frequency `π/dx`.
    #[inline]
    pub fn xi_max(&self) -> f64 {
        PI / self.dx()
    }

    #[inline]
    pub fn xi(&self, k: usize) -> f64 {
        -self.xi_max() + k as f64 * self.d_xi()
    }

    pub fn xi_nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.xi(k)).collect()
    }

    /// The grid whose physical nodes are this grid's frequency nodes.
    pub fn dual(&self) -> SpatialGrid {
        SpatialGrid { n_points: self.n_points, half_length: self.xi_max() }
    }

    /// Same node count, half length multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> SpatialGrid {
        SpatialGrid { n_points: self.n_points, half_length: self.half_length * factor }
    }

    pub fn compatible(&self, other: &SpatialGrid) -> bool {
        self.n_points == other.n_points
            && (self.half_length - other.half_length).abs() <= 1e-12 * self.half_length
    }

    pub fn ensure_compatible(&self, other: &SpatialGrid) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(n={}, L={}) vs (n={}, L={})",
                self.n_points, self.half_length, other.n_points, other.half_length
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Physical,
    Spectral,
}

impl Space {
    fn name(self) -> &'static str {
        match self {
            Space::Physical => "physical",
            Space::Spectral => "spectral",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Complex samples on a grid. Physical fields live on the grid nodes,
/// spectral fields on its frequency nodes (centred order).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub grid: SpatialGrid,
    pub space: Space,
    pub values: Vec<C64>,
}

impl ComplexField {
    pub fn new(grid: SpatialGrid, space: Space, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "field has {} samples, grid has {} nodes",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, space, values })
    }

    pub fn zeros(grid: SpatialGrid, space: Space) -> Self {
        Self { grid, space, values: vec![C64::new(0.0, 0.0); grid.n()] }
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> C64) -> Self {
        let values = (0..grid.n()).map(|j| f(grid.x(j))).collect();
        Self { grid, space: Space::Physical, values }
    }

    pub fn from_real_fn(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    /// Sample nodes of this field (grid nodes or frequency nodes).
    pub fn nodes(&self) -> Vec<f64> {
        match self.space {
            Space::Physical => self.grid.x_nodes(),
            Space::Spectral => self.grid.xi_nodes(),
        }
    }

    /// Quadrature weight of one sample.
    pub fn weight(&self) -> f64 {
        match self.space {
            Space::Physical => self.grid.dx(),
            Space::Spectral => self.grid.d_xi(),
        }
    }

    /// Reinterpret the samples as the same function on the dual grid with the
    /// opposite space. A physical field on `P` becomes a spectral field on
    /// `P.dual()` and vice versa; no values change.
    pub fn dual_view(self) -> ComplexField {
        let space = match self.space {
            Space::Physical => Space::Spectral,
            Space::Spectral => Space::Physical,
        };
        ComplexField { grid: self.grid.dual(), space, values: self.values }
    }

    pub fn ensure_space(&self, expected: Space) -> Result<()> {
        if self.space == expected {
            Ok(())
        } else {
            Err(Error::WrongSpace { expected: expected.name(), found: self.space.name() })
        }
    }

    pub fn ensure_same_layout(&self, other: &ComplexField) -> Result<()> {
        self.grid.ensure_compatible(&other.grid)?;
        other.ensure_space(self.space)
    }

    pub fn scale(mut self, c: C64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= c);
        self
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        self.ensure_same_layout(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(ComplexField { grid: self.grid, space: self.space, values })
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        self.ensure_same_layout(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(ComplexField { grid: self.grid, space: self.space, values })
    }

    pub fn mul_real(mut self, m: &[f64]) -> Result<ComplexField> {
        if m.len() != self.values.len() {
            return Err(Error::GridMismatch("multiplier length".into()));
        }
        self.values.iter_mut().zip(m).for_each(|(v, &c)| *v *= c);
        Ok(self)
    }

    pub fn mul_complex(mut self, m: &[C64]) -> Result<ComplexField> {
        if m.len() != self.values.len() {
            return Err(Error::GridMismatch("multiplier length".into()));
        }
        self.values.iter_mut().zip(m).for_each(|(v, &c)| *v *= c);
        Ok(self)
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.weight()).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `⟨f, g⟩ = Σ f conj(g) h`.
    pub fn inner(&self, other: &ComplexField) -> Result<C64> {
        self.ensure_same_layout(other)?;
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.weight())
    }

    /// Largest magnitude on nodes with `|x| >= BOUNDARY_FRACTION * L`.
    pub fn boundary_magnitude(&self) -> f64 {
        let nodes = self.nodes();
        let edge = BOUNDARY_FRACTION * nodes[self.grid.n() - 1].abs().max(nodes[0].abs());
        nodes
            .iter()
            .zip(&self.values)
            .filter(|(x, _)| x.abs() >= edge)
            .fold(0.0, |m, (_, v)| m.max(v.norm()))
    }

    pub fn ensure_decayed(&self, tolerance: f64) -> Result<()> {
        let boundary_magnitude = self.boundary_magnitude();
        if boundary_magnitude > tolerance {
            Err(Error::DomainTruncation { boundary_magnitude, tolerance })
        } else {
            Ok(())
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward and inverse FFT plans for length `n`, cached per thread.
pub fn fft_plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

#[inline]
fn parity_sign(j: usize) -> f64 {
    if j % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Unitary transform in the `(2π)^{-1/2} e^{-ixξ}` convention.
pub fn fourier(f: &ComplexField, direction: Direction) -> Result<ComplexField> {
    let n = f.grid.n();
    if f.values.len() != n {
        return Err(Error::GridMismatch("field length differs from grid".into()));
    }
    let half_sign = parity_sign(n / 2);
    let (fwd, inv) = fft_plans(n);
    let mut buf: Vec<C64> =
        f.values.iter().enumerate().map(|(j, v)| v * parity_sign(j)).collect();
    let (plan, scale, space) = match direction {
        Direction::Forward => {
            f.ensure_space(Space::Physical)?;
            (fwd, f.grid.dx() / (2.0 * PI).sqrt(), Space::Spectral)
        }
        Direction::Inverse => {
            f.ensure_space(Space::Spectral)?;
            (inv, f.grid.d_xi() / (2.0 * PI).sqrt(), Space::Physical)
        }
    };
    plan.process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= scale * half_sign * parity_sign(k);
    }
    Ok(ComplexField { grid: f.grid, space, values: buf })
}

/// Multiply a physical field by a function of `ξ` in spectral space.
pub fn apply_multiplier(f: &ComplexField, m: impl Fn(f64) -> C64) -> Result<ComplexField> {
    f.ensure_space(Space::Physical)?;
    let mut spec = fourier(f, Direction::Forward)?;
    for (k, v) in spec.values.iter_mut().enumerate() {
        *v *= m(f.grid.xi(k));
    }
    fourier(&spec, Direction::Inverse)
}

/// Spectral derivative `∂_x^order f`. Odd orders zero the Nyquist mode.
pub fn derivative(f: &ComplexField, order: u32) -> Result<ComplexField> {
    let xi_nyq = f.grid.xi_max();
    apply_multiplier(f, |xi| {
        if order % 2 == 1 && (xi + xi_nyq).abs() < 1e-9 * xi_nyq {
            C64::new(0.0, 0.0)
        } else {
            C64::new(0.0, xi).powu(order)
        }
    })
}

/// `‖⟨ξ⟩^s F[⟨x⟩^r f]‖` with the boundary decay check.
pub fn sobolev_norm(f: &ComplexField, s: f64, r: f64) -> Result<f64> {
    f.ensure_space(Space::Physical)?;
    if s < 0.0 || r < 0.0 {
        return Err(Error::Invalid(format!("sobolev indices must be >= 0, got s={s}, r={r}")));
    }
    f.ensure_decayed(BOUNDARY_TOLERANCE)?;
    sobolev_norm_unchecked(f, s, r)
}

/// Same as [`sobolev_norm`] without the boundary check. Used inside
/// pipelines that audit domain escape separately.
pub fn sobolev_norm_unchecked(f: &ComplexField, s: f64, r: f64) -> Result<f64> {
    f.ensure_space(Space::Physical)?;
    if s == 0.0 && r == 0.0 {
        return Ok(f.l2_norm());
    }
    let weighted = if r == 0.0 {
        f.clone()
    } else {
        let w: Vec<f64> =
            f.grid.x_nodes().iter().map(|x| (1.0 + x * x).powf(0.5 * r)).collect();
        f.clone().mul_real(&w)?
    };
    if s == 0.0 {
        return Ok(weighted.l2_norm());
    }
    let spec = fourier(&weighted, Direction::Forward)?;
    let sum: f64 = spec
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let xi = f.grid.xi(k);
            (1.0 + xi * xi).powf(s) * v.norm_sqr()
        })
        .sum();
    Ok((sum * f.grid.d_xi()).sqrt())
}

/// `H¹` norm without the boundary check.
pub fn h1_norm(f: &ComplexField) -> f64 {
    sobolev_norm_unchecked(f, 1.0, 0.0).expect("physical field")
}

/// Evaluate the band-limited interpolant of a physical field at arbitrary
/// points (periodic extension outside `[-L, L)`).
pub fn eval_band_limited(f: &ComplexField, points: &[f64]) -> Result<Vec<C64>> {
    use rayon::prelude::*;
    f.ensure_space(Space::Physical)?;
    let spec = fourier(f, Direction::Forward)?;
    let grid = f.grid;
    let n = grid.n();
    let scale = grid.d_xi() / (2.0 * PI).sqrt();
    let d_xi = grid.d_xi();
    let xi0 = grid.xi(0);
    const RESYNC: usize = 128;
    let out = points
        .par_iter()
        .map(|&y| {
            // Nyquist mode split symmetrically so real fields stay real.
            let mut acc = spec.values[0] * (y * xi0).cos();
            let step = C64::from_polar(1.0, y * d_xi);
            let mut rot = C64::from_polar(1.0, y * grid.xi(1));
            for k in 1..n {
                if k % RESYNC == 0 {
                    rot = C64::from_polar(1.0, y * grid.xi(k));
                }
                acc += spec.values[k] * rot;
                rot *= step;
            }
            acc * scale
        })
        .collect();
    Ok(out)
}

/// Result of a band-limited dilation.
#[derive(Clone, Debug)]
pub struct Dilated {
    pub field: ComplexField,
    /// Largest input magnitude that falls outside the resampled window.
    pub truncated_magnitude: f64,
}

/// `D(t)f(x) = (it)^{-1/2} f(x/t)` on the same grid, by band-limited
/// interpolation. Requires `|t| >= 1`.
pub fn dilation(f: &ComplexField, t: f64) -> Result<Dilated> {
    f.ensure_space(Space::Physical)?;
    if !(t.abs() >= 1.0) {
        return Err(Error::Precondition(format!("dilation requires |t| >= 1, got {t}")));
    }
    let grid = f.grid;
    let window = grid.half_length() / t.abs();
    let truncated_magnitude = grid
        .x_nodes()
        .iter()
        .zip(&f.values)
        .filter(|(x, _)| x.abs() > window + 0.5 * grid.dx())
        .fold(0.0f64, |m, (_, v)| m.max(v.norm()));
    if truncated_magnitude > BOUNDARY_TOLERANCE {
        log::warn!(
            "dilation by t = {t} drops input of magnitude {truncated_magnitude:.3e} outside |x| <= {window}"
        );
    }
    let points: Vec<f64> = grid.x_nodes().iter().map(|x| x / t).collect();
    let mut values = eval_band_limited(f, &points)?;
    let c = dilation_prefactor(t);
    values.iter_mut().for_each(|v| *v *= c);
    Ok(Dilated { field: ComplexField { grid, space: Space::Physical, values }, truncated_magnitude })
}

/// `(it)^{-1/2}` on the principal branch.
pub fn dilation_prefactor(t: f64) -> C64 {
    C64::new(0.0, t).powf(-0.5)
}

/// Exact dilation by relabelling: a field on grid `P` becomes a field on
/// `P.scaled(t)` whose node `t·x_j` carries `(it)^{-1/2} f(x_j)`. Requires `t > 0`.
pub fn dilate_exact(f: &ComplexField, t: f64) -> Result<ComplexField> {
    f.ensure_space(Space::Physical)?;
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("exact dilation requires t > 0, got {t}")));
    }
    let c = dilation_prefactor(t);
    Ok(ComplexField {
        grid: f.grid.scaled(t),
        space: Space::Physical,
        values: f.values.iter().map(|v| v * c).collect(),
    })
}

/// `e^{iθ} - 1` without cancellation for small `θ`.
#[inline]
pub fn expm1_i(theta: f64) -> C64 {
    let h = 0.5 * theta;
    C64::new(0.0, 2.0 * h.sin()) * C64::from_polar(1.0, h)
}

/// `M(t)f(x) = e^{i x²/(2t)} f(x)`.
pub fn modulation(f: &ComplexField, t: f64) -> Result<ComplexField> {
    f.ensure_space(Space::Physical)?;
    let phase: Vec<f64> = f.grid.x_nodes().iter().map(|x| x * x / (2.0 * t)).collect();
    phase_multiply(f, &phase)
}

/// Pointwise multiplication by `e^{iφ}`.
pub fn phase_multiply(f: &ComplexField, phase: &[f64]) -> Result<ComplexField> {
    if phase.len() != f.values.len() {
        return Err(Error::GridMismatch("phase length differs from field".into()));
    }
    let values = f.values.iter().zip(phase).map(|(v, &p)| v * C64::from_polar(1.0, p)).collect();
    Ok(ComplexField { grid: f.grid, space: f.space, values })
}

/// `F M(t) F^{-1}` applied to a function of the frequency variable sampled on
/// the physical nodes of its grid.
pub fn conjugated_modulation(f: &ComplexField, t: f64) -> Result<ComplexField> {
    conjugated_multiplier(f, |y| C64::from_polar(1.0, y * y / (2.0 * t)))
}

/// `R(t) = F (M(t) - 1) F^{-1}` applied to a function of the frequency
/// variable sampled on the physical nodes of its grid.
pub fn r_operator(f: &ComplexField, t: f64) -> Result<ComplexField> {
    if t == 0.0 {
        return Err(Error::Precondition("R(t) requires t != 0".into()));
    }
    conjugated_multiplier(f, |y| expm1_i(y * y / (2.0 * t)))
}

/// `F m(y) F^{-1}` applied to a function of the frequency variable.
pub fn conjugated_multiplier(f: &ComplexField, m: impl Fn(f64) -> C64) -> Result<ComplexField> {
    f.ensure_space(Space::Physical)?;
    let mut g = fourier(&f.clone().dual_view(), Direction::Inverse)?;
    for (j, v) in g.values.iter_mut().enumerate() {
        *v *= m(g.grid.x(j));
    }
    let back = fourier(&g, Direction::Forward)?;
    Ok(ComplexField { grid: f.grid, space: Space::Physical, values: back.values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(grid: SpatialGrid) -> ComplexField {
        ComplexField::from_real_fn(grid, |x| (-0.5 * x * x).exp())
    }

    fn random_band_limited(grid: SpatialGrid, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centres: Vec<(f64, f64, f64, f64)> = (0..6)
            .map(|_| {
                (rng.gen_range(-5.0..5.0), rng.gen_range(-2.0..2.0), rng.gen(), rng.gen())
            })
            .collect();
        ComplexField::from_fn(grid, |x| {
            centres
                .iter()
                .map(|&(c, k, a, b)| {
                    C64::new(a, b) * C64::from_polar((-(x - c).powi(2)).exp(), k * x)
                })
                .sum()
        })
    }

    #[test]
    fn gaussian_is_its_own_transform() {
        let grid = SpatialGrid::new(512, 24.0).unwrap();
        let fhat = fourier(&gaussian(grid), Direction::Forward).unwrap();
        let err = grid
            .xi_nodes()
            .iter()
            .zip(&fhat.values)
            .map(|(xi, v)| (v - C64::new((-0.5 * xi * xi).exp(), 0.0)).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "max error {err}");
    }

    #[test]
    fn gaussian_transform_with_n_not_multiple_of_four() {
        let grid = SpatialGrid::new(514, 24.0).unwrap();
        let fhat = fourier(&gaussian(grid), Direction::Forward).unwrap();
        let err = grid
            .xi_nodes()
            .iter()
            .zip(&fhat.values)
            .map(|(xi, v)| (v - C64::new((-0.5 * xi * xi).exp(), 0.0)).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "max error {err}");
    }

    #[test]
    fn round_trip_and_plancherel() {
        let grid = SpatialGrid::new(1024, 30.0).unwrap();
        let f = random_band_limited(grid, 3);
        let fhat = fourier(&f, Direction::Forward).unwrap();
        let back = fourier(&fhat, Direction::Inverse).unwrap();
        let diff = back.sub(&f).unwrap().l2_norm() / f.l2_norm();
        assert!(diff <= 1e-13, "round trip {diff}");
        let rel = (fhat.l2_norm() - f.l2_norm()).abs() / f.l2_norm();
        assert!(rel <= 1e-12, "plancherel {rel}");
    }

    #[test]
    fn wrong_space_is_rejected() {
        let grid = SpatialGrid::new(64, 10.0).unwrap();
        let f = gaussian(grid);
        assert!(matches!(fourier(&f, Direction::Inverse), Err(Error::WrongSpace { .. })));
        let bad = ComplexField::new(grid, Space::Physical, vec![C64::new(0.0, 0.0); 10]);
        assert!(matches!(bad, Err(Error::GridMismatch(_))));
    }

    #[test]
    fn sobolev_norms_of_gaussian() {
        let grid = SpatialGrid::new(1024, 30.0).unwrap();
        let f = gaussian(grid);
        let l2 = sobolev_norm(&f, 0.0, 0.0).unwrap();
        assert!((l2 - PI.powf(0.25)).abs() < 1e-12);
        assert_eq!(l2, f.l2_norm());
        let h1 = sobolev_norm(&f, 1.0, 0.0).unwrap();
        assert!((h1 - (1.5 * PI.sqrt()).sqrt()).abs() < 1e-12, "{h1}");
    }

    #[test]
    fn sobolev_norm_rejects_undecayed_field() {
        let grid = SpatialGrid::new(256, 5.0).unwrap();
        let f = gaussian(grid);
        match sobolev_norm(&f, 1.0, 0.0) {
            Err(Error::DomainTruncation { boundary_magnitude, .. }) => {
                assert!(boundary_magnitude > 1e-6)
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn dilation_at_unit_time_is_phase_only() {
        let grid = SpatialGrid::new(256, 20.0).unwrap();
        let f = random_band_limited(grid, 9);
        let d = dilation(&f, 1.0).unwrap().field;
        let c = dilation_prefactor(1.0);
        let err = d
            .values
            .iter()
            .zip(&f.values)
            .map(|(a, b)| (a - c * b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn band_limited_and_relabel_dilation_agree() {
        // Target grid G, source on G.scaled(1/t): relabelling is exact, the
        // band-limited path resamples a field given on G itself.
        let t = 4.0;
        let grid = SpatialGrid::new(512, 80.0).unwrap();
        let on_grid = gaussian(grid);
        let bl = dilation(&on_grid, t).unwrap().field;
        let src = gaussian(grid.scaled(1.0 / t));
        let ex = dilate_exact(&src, t).unwrap();
        assert!(ex.grid.compatible(&grid));
        let err = bl.sub(&ex).unwrap().linf_norm();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn modulation_preserves_norm() {
        let grid = SpatialGrid::new(512, 20.0).unwrap();
        let f = random_band_limited(grid, 1);
        let g = modulation(&f, 3.7).unwrap();
        assert!((g.l2_norm() - f.l2_norm()).abs() <= 1e-14 * f.l2_norm());
        let phase: Vec<f64> = (0..grid.n()).map(|j| (j as f64).sin() * 40.0).collect();
        let h = phase_multiply(&f, &phase).unwrap();
        assert!((h.l2_norm() - f.l2_norm()).abs() <= 1e-14 * f.l2_norm());
    }

    #[test]
    fn r_operator_vanishes_for_large_time() {
        let grid = SpatialGrid::new(512, 20.0).unwrap();
        let f = gaussian(grid);
        let r = r_operator(&f, 1e12).unwrap();
        assert!(r.l2_norm() < 1e-11);
        assert!(r_operator(&f, 0.0).is_err());
    }

    #[test]
    fn spectral_derivative_of_gaussian() {
        let grid = SpatialGrid::new(512, 20.0).unwrap();
        let d = derivative(&gaussian(grid), 1).unwrap();
        let err = grid
            .x_nodes()
            .iter()
            .zip(&d.values)
            .map(|(x, v)| (v - C64::new(-x * (-0.5 * x * x).exp(), 0.0)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn dual_of_dual_is_identity() {
        let grid = SpatialGrid::new(2048, 123.5).unwrap();
        assert!(grid.dual().dual().compatible(&grid));
        let xi = grid.xi_nodes();
        let dual_x = grid.dual().x_nodes();
        for (a, b) in xi.iter().zip(&dual_x) {
            assert!((a - b).abs() < 1e-12 * grid.xi_max());
        }
    }

    #[test]
    fn small_angle_expm1() {
        for &th in &[1e-12, 1e-6, 0.3, 2.0] {
            let exact = C64::from_polar(1.0, th) - 1.0;
            assert!((expm1_i(th) - exact).norm() <= 1e-15 * (1.0 + th));
        }
        let tiny = expm1_i(1e-20);
        assert!((tiny.im - 1e-20).abs() < 1e-35);
    }
}
