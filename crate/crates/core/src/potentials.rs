//! Potentials `V = V^S + V^L + V^C`, the smooth cutoff `χ` and the effective
//! long-range potential `V_{T1}(t,x) = V^L(x)(1 - χ(2x/(t+T1)))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Space, SpatialGrid};
use crate::jet::Jet;

/// `Z⟨x⟩^{-ρ_L}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongRange {
    pub amplitude: f64,
    pub rho: f64,
}

/// `a⟨x⟩^{-ρ_S}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortRange {
    pub amplitude: f64,
    pub rho: f64,
}

/// `a (|x|/r)^{-γ}` on `|x| < r`, zero elsewhere. With `γ = 0` this is a
/// plain indicator; `0 < γ < 1/2` gives an unbounded but square-integrable
/// spike. Grid samples are cell averages, so the rough profile is represented
/// without pointwise blow-up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Singular {
    pub amplitude: f64,
    pub radius: f64,
    #[serde(default)]
    pub exponent: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub long_range: LongRange,
    pub short_range: ShortRange,
    pub singular: Singular,
    pub c0: f64,
    pub t1: f64,
}

impl LongRange {
    /// `[V, V', V'', V''']` at `x`.
    pub fn derivs(&self, x: f64) -> [f64; 4] {
        if self.amplitude == 0.0 {
            return [0.0; 4];
        }
        bracket_power(x, self.rho).scale(self.amplitude).derivatives()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * (1.0 + x * x).powf(-0.5 * self.rho)
    }
}

impl ShortRange {
    pub fn derivs(&self, x: f64) -> [f64; 4] {
        if self.amplitude == 0.0 {
            return [0.0; 4];
        }
        bracket_power(x, self.rho).scale(self.amplitude).derivatives()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * (1.0 + x * x).powf(-0.5 * self.rho)
    }
}

impl Singular {
    pub fn none() -> Self {
        Singular { amplitude: 0.0, radius: 0.0, exponent: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0 || self.radius <= 0.0
    }

    /// Pointwise value (infinite at 0 when `γ > 0`).
    pub fn value(&self, x: f64) -> f64 {
        if self.is_zero() || x.abs() >= self.radius {
            return 0.0;
        }
        if self.exponent == 0.0 {
            self.amplitude
        } else {
            self.amplitude * (x.abs() / self.radius).powf(-self.exponent)
        }
    }

    /// `∫_a^b (|x|/r)^{-γ} dx` for `0 ≤ a ≤ b ≤ r`.
    fn radial_integral(&self, a: f64, b: f64) -> f64 {
        let g = self.exponent;
        if g == 0.0 {
            b - a
        } else {
            let r = self.radius;
            r / (1.0 - g) * ((b / r).powf(1.0 - g) - (a / r).powf(1.0 - g))
        }
    }

    /// Cell averages over `[x_j - dx/2, x_j + dx/2] ∩ (-r, r)`, zero for `|x_j| ≥ r`.
    pub fn sample(&self, grid: &SpatialGrid) -> Vec<f64> {
        let dx = grid.dx();
        (0..grid.n())
            .map(|j| {
                let x = grid.x(j);
                if self.is_zero() || x.abs() >= self.radius {
                    return 0.0;
                }
                let lo = (x - 0.5 * dx).max(-self.radius);
                let hi = (x + 0.5 * dx).min(self.radius);
                let integral = if lo >= 0.0 {
                    self.radial_integral(lo, hi)
                } else if hi <= 0.0 {
                    self.radial_integral(-hi, -lo)
                } else {
                    self.radial_integral(0.0, -lo) + self.radial_integral(0.0, hi)
                };
                self.amplitude * integral / dx
            })
            .collect()
    }
}

fn bracket_power(x: f64, rho: f64) -> Jet {
    let xj = Jet::var(x);
    (Jet::constant(1.0) + xj * xj).powf(-0.5 * rho)
}

/// Smooth cutoff: `χ = 1` on `|x| ≤ c0/4`, `χ = 0` on `|x| ≥ c0/3`,
/// with the standard `e^{-1/s}` smoothed step in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffChi {
    pub c0: f64,
}

impl CutoffChi {
    pub fn new(c0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::Invalid(format!("c0 must be positive, got {c0}")));
        }
        Ok(Self { c0 })
    }

    pub fn inner(&self) -> f64 {
        self.c0 / 4.0
    }

    pub fn outer(&self) -> f64 {
        self.c0 / 3.0
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivs(x)[0]
    }

    /// `[χ, χ', χ'', χ''']` at `x`.
    pub fn derivs(&self, x: f64) -> [f64; 4] {
        let a = x.abs();
        if a <= self.inner() {
            return [1.0, 0.0, 0.0, 0.0];
        }
        if a >= self.outer() {
            return [0.0; 4];
        }
        let width = self.outer() - self.inner();
        let s = (a - self.inner()) / width;
        let sj = Jet([s, x.signum() / width, 0.0, 0.0]);
        // χ = h(1-s)/(h(s)+h(1-s)) with h = e^{-1/s}, written as the logistic
        // 1/(1+e^{-g}) of g = 1/s - 1/(1-s) to avoid cancellation near the ends.
        let g = sj.recip() - (Jet::constant(1.0) - sj).recip();
        if g.value() > 700.0 {
            return [1.0, 0.0, 0.0, 0.0];
        }
        if g.value() < -700.0 {
            return [0.0; 4];
        }
        // Exponentiate only non-positive arguments so that no intermediate
        // overflows against the large derivatives of g near the ends.
        if g.value() >= 0.0 {
            (Jet::constant(1.0) + (-g).exp()).recip().derivatives()
        } else {
            let e = g.exp();
            (e * (Jet::constant(1.0) + e).recip()).derivatives()
        }
    }
}

impl PotentialSpec {
    pub fn free() -> Self {
        PotentialSpec {
            long_range: LongRange { amplitude: 0.0, rho: 0.7 },
            short_range: ShortRange { amplitude: 0.0, rho: 2.0 },
            singular: Singular::none(),
            c0: 1.0,
            t1: 50.0,
        }
    }

    /// `0.1⟨x⟩^{-0.7}`, `c0 = 1`, `T1 = 50`, no short-range or singular part.
    pub fn hj_benchmark() -> Self {
        PotentialSpec {
            long_range: LongRange { amplitude: 0.1, rho: 0.7 },
            ..Self::free()
        }
    }

    /// `0.1⟨x⟩^{-0.7} + 0.1⟨x⟩^{-2}`, `c0 = 1`, `T1 = 50`.
    pub fn scatter_benchmark() -> Self {
        PotentialSpec {
            short_range: ShortRange { amplitude: 0.1, rho: 2.0 },
            ..Self::hj_benchmark()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.long_range.rho > 0.5) {
            return Err(Error::Invalid(format!(
                "long-range exponent must satisfy rho_L > 1/2, got {}",
                self.long_range.rho
            )));
        }
        if !(self.short_range.rho > 1.5) {
            return Err(Error::Invalid(format!(
                "short-range exponent must satisfy rho_S > 3/2, got {}",
                self.short_range.rho
            )));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::Invalid(format!("c0 must be > 0, got {}", self.c0)));
        }
        if !(self.t1 >= 1.0) {
            return Err(Error::Invalid(format!("T1 must be >= 1, got {}", self.t1)));
        }
        let s = &self.singular;
        if !s.is_zero() && !(s.exponent >= 0.0 && s.exponent < 0.5) {
            return Err(Error::Invalid(format!(
                "singular exponent must lie in [0, 1/2) for an L2 profile, got {}",
                s.exponent
            )));
        }
        Ok(())
    }

    pub fn chi(&self) -> CutoffChi {
        CutoffChi { c0: self.c0 }
    }

    /// Time after which `(1 - χ(x/t)) V^C ≡ 0`: the plateau `|x| ≤ c0 t/4`
    /// covers the support radius for `t ≥ T2`.
    pub fn t2(&self) -> f64 {
        if self.singular.is_zero() {
            0.0
        } else {
            4.0 * self.singular.radius / self.c0
        }
    }

    pub fn effective(&self, t: f64, x: f64) -> f64 {
        let y = 2.0 * x / (t + self.t1);
        let chi = self.chi();
        if y.abs() <= chi.inner() {
            0.0
        } else if y.abs() >= chi.outer() {
            self.long_range.value(x)
        } else {
            self.long_range.value(x) * (1.0 - chi.value(y))
        }
    }

    /// `[V_T1, ∂_x V_T1, ∂_x² V_T1, ∂_x³ V_T1]` at `(t, x)`.
    pub fn effective_derivs(&self, t: f64, x: f64) -> [f64; 4] {
        let scale = 2.0 / (t + self.t1);
        let y = scale * x;
        let chi = self.chi();
        if y.abs() <= chi.inner() || self.long_range.amplitude == 0.0 {
            return [0.0; 4];
        }
        let vl = self.long_range.derivs(x);
        if y.abs() >= chi.outer() {
            return vl;
        }
        let c = chi.derivs(y);
        let one_minus = Jet([
            1.0 - c[0],
            -c[1] * scale,
            -0.5 * c[2] * scale * scale,
            -c[3] * scale * scale * scale / 6.0,
        ]);
        let v = Jet([vl[0], vl[1], 0.5 * vl[2], vl[3] / 6.0]);
        (v * one_minus).derivatives()
    }

    /// `V^S + V^L + V^C` sampled on the grid (cell averages for `V^C`).
    pub fn total_on_grid(&self, grid: &SpatialGrid) -> Vec<f64> {
        let vc = self.singular.sample(grid);
        (0..grid.n())
            .map(|j| {
                let x = grid.x(j);
                self.long_range.value(x) + self.short_range.value(x) + vc[j]
            })
            .collect()
    }

    /// Multiplication by the total potential.
    pub fn assemble_total(&self, field: &ComplexField) -> Result<ComplexField> {
        field.ensure_space(Space::Physical)?;
        field.clone().mul_real(&self.total_on_grid(&field.grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::C64;

    #[test]
    fn chi_plateau_and_support() {
        let chi = CutoffChi::new(1.0).unwrap();
        assert_eq!(chi.value(0.2), 1.0);
        assert_eq!(chi.value(-0.25), 1.0);
        assert_eq!(chi.value(0.4), 0.0);
        assert_eq!(chi.value(1.0 / 3.0), 0.0);
        let v = chi.value(0.29);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn chi_is_monotone_on_transition() {
        let chi = CutoffChi::new(1.0).unwrap();
        let mut prev = 1.0;
        for i in 0..=2000 {
            let x = 0.25 + (1.0 / 3.0 - 0.25) * i as f64 / 2000.0;
            let v = chi.value(x);
            assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v), "x={x} v={v} prev={prev}");
            prev = v;
            let d = chi.derivs(x);
            assert!(d[1] <= 1e-15, "x={x} d1={}", d[1]);
        }
    }

    #[test]
    fn chi_derivatives_match_differences() {
        let chi = CutoffChi::new(2.0).unwrap();
        let h = 1e-5;
        for &x in &[0.52, 0.58, 0.6, 0.64, -0.55, -0.61] {
            let d = chi.derivs(x);
            let fd1 = (chi.value(x + h) - chi.value(x - h)) / (2.0 * h);
            let fd2 = (chi.derivs(x + h)[1] - chi.derivs(x - h)[1]) / (2.0 * h);
            let fd3 = (chi.derivs(x + h)[2] - chi.derivs(x - h)[2]) / (2.0 * h);
            assert!((d[1] - fd1).abs() < 1e-6 * (1.0 + d[1].abs()), "x={x}");
            assert!((d[2] - fd2).abs() < 1e-5 * (1.0 + d[2].abs()), "x={x}");
            assert!((d[3] - fd3).abs() < 1e-4 * (1.0 + d[3].abs()), "x={x}");
        }
    }

    #[test]
    fn long_range_decay_bounds() {
        let vl = LongRange { amplitude: 1.0, rho: 0.7 };
        for k in 0..4 {
            let mut max_ratio: f64 = 0.0;
            let mut min_tail_ratio = f64::INFINITY;
            for i in 0..=500 {
                let x = 10f64.powf(5.0 * i as f64 / 500.0);
                let d = vl.derivs(x)[k].abs();
                let r = d * (1.0 + x * x).powf(0.5 * (0.7 + k as f64));
                max_ratio = max_ratio.max(r);
                if x > 1e3 {
                    min_tail_ratio = min_tail_ratio.min(r);
                }
            }
            assert!(max_ratio < 10.0, "k={k} ratio {max_ratio}");
            // the bound is sharp: the ratio does not collapse at large x
            assert!(min_tail_ratio > 1e-2, "k={k}");
        }
    }

    #[test]
    fn short_range_decay_bounds() {
        let vs = ShortRange { amplitude: 0.3, rho: 2.0 };
        for k in 0..2 {
            let max_ratio = (0..=500)
                .map(|i| 10f64.powf(5.0 * i as f64 / 500.0))
                .map(|x| vs.derivs(x)[k].abs() * (1.0 + x * x))
                .fold(0.0, f64::max);
            assert!(max_ratio < 1.0, "k={k}");
        }
    }

    #[test]
    fn singular_part_vanishes_outside_support() {
        let s = Singular { amplitude: -2.0, radius: 1.3, exponent: 0.25 };
        let grid = SpatialGrid::new(1024, 20.0).unwrap();
        let samples = s.sample(&grid);
        for (j, v) in samples.iter().enumerate() {
            if grid.x(j).abs() >= 1.3 {
                assert_eq!(*v, 0.0);
            } else {
                assert!(v.is_finite() && *v < 0.0);
            }
        }
        // cell averages integrate the profile: ∫ = 2 a r/(1-γ)
        let total: f64 = samples.iter().sum::<f64>() * grid.dx();
        let exact = 2.0 * -2.0 * 1.3 / 0.75;
        assert!((total - exact).abs() < 0.05 * exact.abs());
    }

    #[test]
    fn effective_potential_regions() {
        let spec = PotentialSpec {
            long_range: LongRange { amplitude: -0.4, rho: 0.8 },
            ..PotentialSpec::free()
        };
        for &t in &[0.0, 7.0, 300.0] {
            let w = spec.c0 * (t + spec.t1);
            for i in 0..=50 {
                let x = w / 8.0 * i as f64 / 50.0;
                assert_eq!(spec.effective(t, x), 0.0);
                assert_eq!(spec.effective(t, -x), 0.0);
                assert_eq!(spec.effective_derivs(t, x), [0.0; 4]);
            }
            for i in 0..=50 {
                let x = w / 4.0 * (1.0 + i as f64 / 10.0);
                assert_eq!(spec.effective(t, x), spec.long_range.value(x));
                assert_eq!(spec.effective_derivs(t, -x), spec.long_range.derivs(-x));
            }
        }
    }

    #[test]
    fn effective_derivatives_match_differences() {
        let spec = PotentialSpec::hj_benchmark();
        let t = 20.0;
        let h = 1e-3;
        for &x in &[9.0, 9.5, 10.3, 11.0, -10.0] {
            let d = spec.effective_derivs(t, x);
            assert!((d[0] - spec.effective(t, x)).abs() < 1e-15);
            let fd = |k: usize| {
                (spec.effective_derivs(t, x + h)[k] - spec.effective_derivs(t, x - h)[k])
                    / (2.0 * h)
            };
            for k in 0..3 {
                assert!((d[k + 1] - fd(k)).abs() < 1e-6 * (1.0 + d[k + 1].abs()), "x={x} k={k}");
            }
        }
    }

    #[test]
    fn effective_force_decay_slope() {
        // T1 = 1 so that (t+T1) is close to t across the fitted decade range
        let spec = PotentialSpec {
            long_range: LongRange { amplitude: 1.0, rho: 0.7 },
            t1: 1.0,
            ..PotentialSpec::free()
        };
        let ts: Vec<f64> = (0..=30).map(|i| 10f64.powf(1.0 + 3.0 * i as f64 / 30.0)).collect();
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let w = spec.c0 * (t + spec.t1);
                (0..=4000)
                    .map(|i| w / 8.0 + (w / 3.0) * i as f64 / 4000.0)
                    .map(|x| spec.effective_derivs(t, x)[1].abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let slope = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
            / lx.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
        assert!((slope + 1.7).abs() <= 0.1, "slope {slope}");
    }

    #[test]
    fn total_potential_pairing() {
        let grid = SpatialGrid::new(2048, 40.0).unwrap();
        let spec = PotentialSpec {
            long_range: LongRange { amplitude: -1.0, rho: 0.7 },
            ..PotentialSpec::free()
        };
        let f = ComplexField::from_real_fn(grid, |x| (-0.5 * x * x).exp());
        let vf = spec.assemble_total(&f).unwrap();
        let pairing = vf.inner(&f).unwrap();
        assert!(pairing.im.abs() < 1e-12);
        // Simpson oracle at ten times the resolution
        let m = 20480;
        let h = 80.0 / m as f64;
        let g = |x: f64| -(1.0 + x * x).powf(-0.35) * (-x * x).exp();
        let mut s = g(-40.0) + g(40.0);
        for i in 1..m {
            let x = -40.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(x);
        }
        let oracle = s * h / 3.0;
        assert!((pairing.re - oracle).abs() < 1e-8, "{} vs {}", pairing.re, oracle);

        let zero = PotentialSpec::free().assemble_total(&f).unwrap();
        assert!(zero.values.iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn validation_names_the_constraint() {
        let mut spec = PotentialSpec::hj_benchmark();
        spec.long_range.rho = 0.4;
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("rho_L > 1/2"));
        assert_eq!(PotentialSpec { singular: Singular { amplitude: 1.0, radius: 2.0, exponent: 0.0 }, ..PotentialSpec::free() }.t2(), 8.0);
    }
}
