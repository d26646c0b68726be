//! Phase `Ψ(t,x) = xΘ(t,x) - S(t,Θ(t,x))` evaluated from a time slice of the
//! bicharacteristic table.
//!
//! For `x` given, `ζ` solves `Z(t,ζ) = x` and `Θ = Ξ(t,ζ)`; then with the
//! deviation variables of the column through `ζ`
//!
//! ```text
//! Ψ - x²/(2t)      = tζξ̃ + z̃ξ̃ - φ̃ - z̃²/(2t)
//! ∂_x(Ψ - x²/(2t)) = ξ̃ - z̃/t
//! ∂_x²Ψ            = Ξ_ξ / Z_ξ
//! ∂_x³Ψ            = (Ξ_ξξ Z_ξ - Ξ_ξ Z_ξξ) / Z_ξ³
//! ```
//!
//! Between columns every quantity is a quintic Hermite interpolant in ξ built
//! from its value and first two ξ-derivatives.
//!
//! Columns are stored for positive labels only. All potentials are even, so
//! `Ψ` is even in `x` and negative `x` is served by reflection.

use crate::error::{Error, Result};
use crate::hj::bichar::{BicharTable, State, PHI, XI, XI1, XI2, Z, Z1, Z2};

/// Coefficients of the quintic on `[0,1]` matching value, first and second
/// derivative at both ends.
#[inline]
fn quintic(a: [f64; 3], b: [f64; 3]) -> [f64; 6] {
    let (a0, a1, a2) = (a[0], a[1], a[2]);
    let (b0, b1, b2) = (b[0], b[1], b[2]);
    [
        a0,
        a1,
        0.5 * a2,
        -10.0 * a0 - 6.0 * a1 - 1.5 * a2 + 10.0 * b0 - 4.0 * b1 + 0.5 * b2,
        15.0 * a0 + 8.0 * a1 + 1.5 * a2 - 15.0 * b0 + 7.0 * b1 - b2,
        -6.0 * a0 - 3.0 * a1 - 0.5 * a2 + 6.0 * b0 - 3.0 * b1 + 0.5 * b2,
    ]
}

/// Value and first two derivatives (in `u`) of the polynomial at `u`.
#[inline]
fn poly3(c: &[f64; 6], u: f64) -> [f64; 3] {
    let mut p = c[5];
    let mut d1 = 5.0 * c[5];
    let mut d2 = 20.0 * c[5];
    p = p * u + c[4];
    d1 = d1 * u + 4.0 * c[4];
    d2 = d2 * u + 12.0 * c[4];
    p = p * u + c[3];
    d1 = d1 * u + 3.0 * c[3];
    d2 = d2 * u + 6.0 * c[3];
    p = p * u + c[2];
    d1 = d1 * u + 2.0 * c[2];
    d2 = d2 * u + 2.0 * c[2];
    p = p * u + c[1];
    d1 = d1 * u + c[1];
    p = p * u + c[0];
    [p, d1, d2]
}

/// Phase data at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSample {
    pub t: f64,
    pub x: f64,
    /// Characteristic label `ζ` with `Z(t,ζ) = x`.
    pub zeta: f64,
    /// `Θ(t,x) = ∂_xΨ(t,x)`.
    pub theta: f64,
    /// `Ψ - x²/(2t)`.
    pub delta_psi: f64,
    /// `∂_xΨ - x/t`.
    pub a1: f64,
    /// `∂_x²Ψ - 1/t`.
    pub d2: f64,
    /// `∂_x³Ψ`.
    pub d3: f64,
}

impl PhaseSample {
    pub fn free(t: f64, x: f64) -> Self {
        PhaseSample { t, x, zeta: x / t, theta: x / t, delta_psi: 0.0, a1: 0.0, d2: 0.0, d3: 0.0 }
    }

    pub fn psi(&self) -> f64 {
        self.x * self.x / (2.0 * self.t) + self.delta_psi
    }
}

/// All columns at a single time.
#[derive(Clone, Debug)]
pub struct PhaseSlice {
    pub t: f64,
    pub xi_grid: Vec<f64>,
    pub states: Vec<State>,
    spacing: f64,
}

/// Interpolated column quantities at `ζ`.
#[derive(Clone, Copy, Debug)]
pub struct ColumnSample {
    pub zeta: f64,
    /// `[z̃, ∂_ξz̃, ∂_ξ²z̃]`.
    pub z: [f64; 3],
    /// `[ξ̃, ∂_ξξ̃, ∂_ξ²ξ̃]`.
    pub xi: [f64; 3],
    pub phi: f64,
}

impl PhaseSlice {
    pub fn new(t: f64, xi_grid: Vec<f64>, states: Vec<State>) -> Self {
        let spacing = (xi_grid[xi_grid.len() - 1] - xi_grid[0]) / (xi_grid.len() - 1) as f64;
        PhaseSlice { t, xi_grid, states, spacing }
    }

    pub fn from_table(table: &BicharTable, t: f64, anchor: Option<usize>) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::Precondition(format!("phase requires t > 0, got {t}")));
        }
        let states = table.states_at(t, anchor)?;
        Ok(Self::new(t, table.xi_grid.clone(), states))
    }

    /// Range of `|x/t|` covered by the slice.
    pub fn window(&self) -> (f64, f64) {
        (self.big_z(0) / self.t, self.big_z(self.xi_grid.len() - 1) / self.t)
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.window();
        let v = x.abs() / self.t;
        v >= lo && v <= hi
    }

    #[inline]
    fn big_z(&self, j: usize) -> f64 {
        self.t * self.xi_grid[j] + self.states[j][Z]
    }

    fn phi_data(&self, j: usize) -> [f64; 3] {
        let s = &self.states[j];
        let t = self.t;
        let xi = self.xi_grid[j];
        let (z, z1) = (s[Z], s[Z1]);
        let (p1, p2) = (s[XI1], s[XI2]);
        [
            s[PHI],
            t * xi * p1 + z + z * p1,
            z1 + t * p1 + t * xi * p2 + z1 * p1 + z * p2,
        ]
    }

    fn coefficients(&self, j: usize) -> ([f64; 6], [f64; 6], [f64; 6]) {
        let h = self.spacing;
        let (a, b) = (&self.states[j], &self.states[j + 1]);
        let scale = |v: [f64; 3]| [v[0], v[1] * h, v[2] * h * h];
        let cz = quintic(scale([a[Z], a[Z1], a[Z2]]), scale([b[Z], b[Z1], b[Z2]]));
        let cx = quintic(scale([a[XI], a[XI1], a[XI2]]), scale([b[XI], b[XI1], b[XI2]]));
        let cp = quintic(scale(self.phi_data(j)), scale(self.phi_data(j + 1)));
        (cz, cx, cp)
    }

    fn sample_in(&self, j: usize, u: f64, coeffs: &([f64; 6], [f64; 6], [f64; 6])) -> ColumnSample {
        let h = self.spacing;
        let unscale = |v: [f64; 3]| [v[0], v[1] / h, v[2] / (h * h)];
        ColumnSample {
            zeta: self.xi_grid[j] + u * h,
            z: unscale(poly3(&coeffs.0, u)),
            xi: unscale(poly3(&coeffs.1, u)),
            phi: poly3(&coeffs.2, u)[0],
        }
    }

    /// Interval index and local coordinate of a column label.
    fn locate_label(&self, zeta: f64) -> Option<(usize, f64)> {
        let n = self.xi_grid.len();
        let u = (zeta - self.xi_grid[0]) / self.spacing;
        if !(u >= -1e-12 && u <= (n - 1) as f64 + 1e-12) {
            return None;
        }
        let j = (u.floor().max(0.0) as usize).min(n - 2);
        Some((j, (u - j as f64).clamp(0.0, 1.0)))
    }

    /// Column quantities at an arbitrary label `ζ`.
    pub fn column_at(&self, zeta: f64) -> Option<ColumnSample> {
        let (j, u) = self.locate_label(zeta)?;
        Some(self.sample_in(j, u, &self.coefficients(j)))
    }

    /// Solve `Z(t,ζ) = x` for `x > 0` and return the interpolated column at `ζ`.
    pub fn invert(&self, x: f64) -> Result<ColumnSample> {
        let n = self.xi_grid.len();
        let t = self.t;
        let (z_lo, z_hi) = (self.big_z(0), self.big_z(n - 1));
        let slack = 1e-12 * z_hi.abs();
        if !(x >= z_lo - slack && x <= z_hi + slack) {
            return Err(Error::OutOfWindow { t, x, window: self.window().1 });
        }
        let x = x.clamp(z_lo, z_hi);
        // Z is strictly increasing in ξ: bracket by bisection over columns.
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.big_z(mid) <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let j = lo;
        let coeffs = self.coefficients(j);
        let h = self.spacing;
        let (za, zb) = (self.big_z(j), self.big_z(j + 1));
        let mut u = if zb > za { ((x - za) / (zb - za)).clamp(0.0, 1.0) } else { 0.0 };
        let (mut ulo, mut uhi) = (0.0, 1.0);
        for _ in 0..60 {
            let p = poly3(&coeffs.0, u);
            let zeta = self.xi_grid[j] + u * h;
            let g = t * zeta + p[0] - x;
            if g > 0.0 {
                uhi = u;
            } else {
                ulo = u;
            }
            let dg = t * h + p[1];
            let mut next = u - g / dg;
            if !(next > ulo && next < uhi) {
                next = 0.5 * (ulo + uhi);
            }
            let done = (next - u).abs() * h <= 1e-14 * (1.0 + zeta.abs());
            u = next;
            if done {
                break;
            }
        }
        Ok(self.sample_in(j, u, &coeffs))
    }

    pub fn sample_from_column(&self, x: f64, c: &ColumnSample) -> PhaseSample {
        let t = self.t;
        let [z, z1, z2] = c.z;
        let [p, p1, p2] = c.xi;
        let zeta = c.zeta;
        let z_xi = t + z1;
        let xi_xi = 1.0 + p1;
        PhaseSample {
            t,
            x,
            zeta,
            theta: zeta + p,
            delta_psi: t * zeta * p + z * p - c.phi - z * z / (2.0 * t),
            a1: p - z / t,
            d2: (t * p1 - z1) / (t * z_xi),
            d3: (p2 * z_xi - xi_xi * z2) / (z_xi * z_xi * z_xi),
        }
    }

    pub fn evaluate(&self, x: f64) -> Result<PhaseSample> {
        if x < 0.0 {
            let s = self.evaluate(-x).map_err(|_| Error::OutOfWindow {
                t: self.t,
                x,
                window: self.window().1,
            })?;
            return Ok(PhaseSample {
                x,
                zeta: -s.zeta,
                theta: -s.theta,
                a1: -s.a1,
                d3: -s.d3,
                ..s
            });
        }
        let c = self.invert(x)?;
        Ok(self.sample_from_column(x, &c))
    }

    /// `S(t,ξ) = φ(t,η)` with `Ξ(t,η) = ξ`, together with `Z(t,η)` (which equals
    /// `∂_ξS`) and `η`.
    pub fn generating_function(&self, xi: f64) -> Result<(f64, f64, f64)> {
        if xi < 0.0 {
            let (s, dz, eta) = self.generating_function(-xi)?;
            return Ok((s, -dz, -eta));
        }
        let n = self.xi_grid.len();
        let big_xi = |j: usize| self.xi_grid[j] + self.states[j][XI];
        if !(xi >= big_xi(0) && xi <= big_xi(n - 1)) {
            return Err(Error::OutOfWindow { t: self.t, x: xi, window: big_xi(n - 1) });
        }
        let (mut lo, mut hi) = (0, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if big_xi(mid) <= xi {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let j = lo;
        let coeffs = self.coefficients(j);
        let h = self.spacing;
        let (mut ulo, mut uhi) = (0.0, 1.0);
        let mut u = 0.5;
        for _ in 0..80 {
            let p = poly3(&coeffs.1, u);
            let g = self.xi_grid[j] + u * h + p[0] - xi;
            if g > 0.0 {
                uhi = u;
            } else {
                ulo = u;
            }
            let mut next = u - g / (h + p[1]);
            if !(next > ulo && next < uhi) {
                next = 0.5 * (ulo + uhi);
            }
            let done = (next - u).abs() < 1e-15;
            u = next;
            if done {
                break;
            }
        }
        let c = self.sample_in(j, u, &coeffs);
        let eta = c.zeta;
        let s = 0.5 * self.t * eta * eta + c.phi;
        Ok((s, self.t * eta + c.z[0], eta))
    }
}

/// Tabulated phase on a time × space lattice, for export and plotting.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseLattice {
    pub t_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    /// Row-major `t × x`; `None` outside the momentum window.
    pub samples: Vec<Option<PhaseSample>>,
}

impl PhaseLattice {
    pub fn build(table: &BicharTable, t_grid: &[f64], x_grid: &[f64]) -> Result<Self> {
        let mut samples = Vec::with_capacity(t_grid.len() * x_grid.len());
        for &t in t_grid {
            let slice = PhaseSlice::from_table(table, t, None)?;
            for &x in x_grid {
                samples.push(slice.evaluate(x).ok());
            }
        }
        Ok(PhaseLattice { t_grid: t_grid.to_vec(), x_grid: x_grid.to_vec(), samples })
    }

    /// CSV rows `t,x,psi,dpsi,d2psi,d3psi,theta`; points outside the window are skipped.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,psi,dpsi,d2psi,d3psi,theta")?;
        for s in self.samples.iter().flatten() {
            crate::write_csv_row(
                &mut w,
                &[s.t, s.x, s.psi(), s.x / s.t + s.a1, 1.0 / s.t + s.d2, s.d3, s.theta],
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quintic_reproduces_quintic_polynomials() {
        let p = |u: f64| [1.0 - 2.0 * u + 0.5 * u.powi(3) + 0.7 * u.powi(5),
            -2.0 + 1.5 * u * u + 3.5 * u.powi(4),
            3.0 * u + 14.0 * u.powi(3)];
        let c = quintic(p(0.0), p(1.0));
        for &u in &[0.0, 0.3, 0.77, 1.0] {
            let v = poly3(&c, u);
            let e = p(u);
            for k in 0..3 {
                assert!((v[k] - e[k]).abs() < 1e-13);
            }
        }
    }
}
