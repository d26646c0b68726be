//! Bicharacteristics `(Z, Ξ)` of the effective Hamiltonian `½ξ² + V_T1(t,x)`
//! with `Z(0,ξ) = 0` and `Ξ(t,ξ) → ξ` as `t → ∞`, solved as the fixed point
//!
//! ```text
//! Z(t,ξ) = tξ + ∫_0^∞ min{t,s} ∂_xV_T1(s, Z(s,ξ)) ds,
//! Ξ(t,ξ) = ξ  + ∫_t^∞ ∂_xV_T1(s, Z(s,ξ)) ds.
//! ```
//!
//! Each ξ column is iterated in deviation variables `z̃ = Z - tξ`,
//! `ξ̃ = Ξ - ξ` together with their first and second ξ-derivatives. Times
//! are sampled on `t = t_scale (e^σ - 1)` with σ uniform, so a uniform
//! fourth-order rule in σ integrates the decaying forces accurately over many
//! decades. The integral beyond `s_max` is evaluated along the straight ray
//! leaving the last node.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;

/// Index of each deviation quantity in a [`State`].
pub const Z: usize = 0;
pub const XI: usize = 1;
pub const Z1: usize = 2;
pub const XI1: usize = 3;
pub const Z2: usize = 4;
pub const XI2: usize = 5;
pub const PHI: usize = 6;

/// `[z̃, ξ̃, ∂_ξz̃, ∂_ξξ̃, ∂_ξ²z̃, ∂_ξ²ξ̃, φ̃]` with `φ̃ = φ - tξ²/2`.
pub type State = [f64; 7];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HjOptions {
    /// Columns cover `[xi_min, xi_max]`; negative labels follow by symmetry.
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_spacing: f64,
    pub t_scale: f64,
    /// Nodes per unit of σ.
    pub nodes_per_unit: usize,
    /// Quadrature truncation time.
    pub s_max: f64,
    /// Largest node time kept in the table.
    pub t_keep: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub tail_tolerance: f64,
}

impl Default for HjOptions {
    fn default() -> Self {
        HjOptions {
            xi_min: 0.85,
            xi_max: 4.5,
            xi_spacing: 0.02,
            t_scale: 1.0,
            nodes_per_unit: 128,
            s_max: 1e10,
            t_keep: 1e4,
            tolerance: 1e-10,
            max_iterations: 200,
            tail_tolerance: 1e-10,
        }
    }
}

impl HjOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.xi_min > 0.0
            && self.xi_max > self.xi_min + 2.0 * self.xi_spacing
            && self.xi_spacing > 0.0
            && self.t_scale > 0.0
            && self.nodes_per_unit >= 4
            && self.s_max > 0.0
            && self.t_keep > 0.0
            && self.t_keep <= self.s_max
            && self.tolerance > 0.0
            && self.max_iterations >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("inconsistent Hamilton-Jacobi options: {self:?}")))
        }
    }

    pub fn xi_grid(&self) -> Vec<f64> {
        let m = ((self.xi_max - self.xi_min) / self.xi_spacing).round().max(2.0) as usize;
        let h = (self.xi_max - self.xi_min) / m as f64;
        (0..=m).map(|k| self.xi_min + k as f64 * h).collect()
    }
}

/// Log-uniform time nodes `t_i = t_scale (e^{iH} - 1)`, with `t_0 = 0` and the
/// last node exactly `s_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_scale: f64,
    /// Step in σ.
    pub h: f64,
    pub t: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_scale: f64, nodes_per_unit: usize, s_max: f64) -> Self {
        let sigma_max = (s_max / t_scale).ln_1p();
        let m = ((sigma_max * nodes_per_unit as f64).ceil() as usize).max(4);
        let h = sigma_max / m as f64;
        let mut t: Vec<f64> = (0..=m).map(|i| t_scale * (i as f64 * h).exp_m1()).collect();
        t[m] = s_max;
        TimeGrid { t_scale, h, t }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `dt/dσ` at node `i`.
    pub fn jacobian(&self, i: usize) -> f64 {
        self.t[i] + self.t_scale
    }

    /// Largest `i` with `t_i ≤ t` (clamped to the grid).
    pub fn lower_node(&self, t: f64) -> usize {
        match self.t.partition_point(|&ti| ti <= t) {
            0 => 0,
            k => (k - 1).min(self.t.len() - 2),
        }
    }
}

/// Integrals of `y` (uniform spacing `h`) over each interval `[i, i+1]` with a
/// fourth-order rule.
fn interval_integrals(y: &[f64], h: f64) -> Vec<f64> {
    let m = y.len() - 1;
    let c = h / 24.0;
    (0..m)
        .map(|i| {
            if i == 0 {
                c * (9.0 * y[0] + 19.0 * y[1] - 5.0 * y[2] + y[3])
            } else if i == m - 1 {
                c * (y[m - 3] - 5.0 * y[m - 2] + 19.0 * y[m - 1] + 9.0 * y[m])
            } else {
                c * (-y[i - 1] + 13.0 * y[i] + 13.0 * y[i + 1] - y[i + 2])
            }
        })
        .collect()
}

/// `∫_{σ_0}^{σ_i} y` at every node.
pub fn cumulative_forward(y: &[f64], h: f64) -> Vec<f64> {
    let pieces = interval_integrals(y, h);
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    out.push(0.0);
    for p in pieces {
        acc += p;
        out.push(acc);
    }
    out
}

/// `∫_{σ_i}^{σ_M} y` at every node.
pub fn cumulative_backward(y: &[f64], h: f64) -> Vec<f64> {
    let pieces = interval_integrals(y, h);
    let mut out = vec![0.0; y.len()];
    let mut acc = 0.0;
    for i in (0..pieces.len()).rev() {
        acc += pieces[i];
        out[i] = acc;
    }
    out
}

/// Weight of the contraction metric: `⟨t⟩(t+T1)^{-ρ}` for `ρ < 1`,
/// `log(t/T1 + 2)` for `ρ = 1`, and 1 for `ρ > 1`.
pub fn theta_weight(t: f64, t1: f64, rho: f64) -> f64 {
    if (rho - 1.0).abs() < 1e-12 {
        (t / t1 + 2.0).ln()
    } else if rho < 1.0 {
        (1.0 + t * t).sqrt() * (t + t1).powf(-rho)
    } else {
        1.0
    }
}

/// One converged ξ column.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub xi: f64,
    /// States at the kept nodes.
    pub states: Vec<State>,
    pub iterations: usize,
    pub last_update: f64,
    /// Integrals beyond `s_max` of the force and its two variations.
    pub tail: [f64; 3],
    pub tail_bound: f64,
}

/// Right-hand side of the deviation system at time `t` for column `xi`.
pub fn deviation_rhs(spec: &PotentialSpec, xi: f64, t: f64, y: &State) -> State {
    let zx = t * xi + y[Z];
    let [v, f, f2, f3] = spec.effective_derivs(t, zx);
    let z_xi = t + y[Z1];
    [
        y[XI],
        -f,
        y[XI1],
        -f2 * z_xi,
        y[XI2],
        -(f3 * z_xi * z_xi + f2 * y[Z2]),
        xi * y[XI] + 0.5 * y[XI] * y[XI] + v - zx * f,
    ]
}

/// Classical RK4 from `(t0, y0)` to `t` in `substeps` equal steps.
pub fn continue_state(
    spec: &PotentialSpec,
    xi: f64,
    t0: f64,
    y0: &State,
    t: f64,
    substeps: usize,
) -> State {
    if t == t0 {
        return *y0;
    }
    let h = (t - t0) / substeps as f64;
    let mut y = *y0;
    let mut tau = t0;
    let add = |a: &State, b: &State, c: f64| -> State {
        let mut r = *a;
        for k in 0..7 {
            r[k] += c * b[k];
        }
        r
    };
    for _ in 0..substeps {
        let k1 = deviation_rhs(spec, xi, tau, &y);
        let k2 = deviation_rhs(spec, xi, tau + 0.5 * h, &add(&y, &k1, 0.5 * h));
        let k3 = deviation_rhs(spec, xi, tau + 0.5 * h, &add(&y, &k2, 0.5 * h));
        let k4 = deviation_rhs(spec, xi, tau + h, &add(&y, &k3, h));
        for k in 0..7 {
            y[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        tau += h;
    }
    y
}

/// Integrals of the force and its variations beyond `s_m`, along the ray
/// `Z = Z_m + Ξ_m (s - s_m)` and its linearised ξ-derivatives, with
/// `s = s_m e^u`.
fn ray_tail(spec: &PotentialSpec, xi: f64, s_m: f64, y: &State) -> ([f64; 3], f64) {
    let zm = s_m * xi + y[Z];
    let pm = xi + y[XI];
    let zm1 = s_m + y[Z1];
    let pm1 = 1.0 + y[XI1];
    let zm2 = y[Z2];
    let pm2 = y[XI2];
    let rho = spec.long_range.rho;
    let u_max = 60.0 / rho;
    let n = 2000;
    let du = u_max / n as f64;
    let mut acc = [0.0; 3];
    for i in 0..=n {
        let u = i as f64 * du;
        let s = s_m * u.exp();
        let d = s - s_m;
        let zx = zm + pm * d;
        let z1 = zm1 + pm1 * d;
        let z2 = zm2 + pm2 * d;
        let [_, f, f2, f3] = spec.effective_derivs(s, zx);
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let jac = s * w * du / 3.0;
        acc[0] += jac * f;
        acc[1] += jac * f2 * z1;
        acc[2] += jac * (f3 * z1 * z1 + f2 * z2);
    }
    // Beyond s_m the true Ξ moves by at most the force tail, so the ray's
    // relative error in Z is at most |tail|/|Ξ_m|.
    let rel = if pm.abs() > 0.0 { acc[0].abs() / pm.abs() } else { 0.0 };
    let bound = (rho + 2.0) * rel * acc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (acc, bound)
}

/// Solve the fixed point for a single column.
pub fn solve_column(
    spec: &PotentialSpec,
    xi: f64,
    grid: &TimeGrid,
    keep: usize,
    opts: &HjOptions,
) -> Result<Column> {
    let m = grid.len();
    let h = grid.h;
    let mut y: Vec<State> = vec![[0.0; 7]; m];
    let rho = spec.long_range.rho;
    let weights: Vec<f64> = grid.t.iter().map(|&t| theta_weight(t, spec.t1, rho)).collect();
    let mut prev_update = f64::INFINITY;
    let mut increases = 0;
    let mut g = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    let mut sg = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    for iteration in 1..=opts.max_iterations {
        for i in 0..m {
            let t = grid.t[i];
            let [_, f, f2, f3] = spec.effective_derivs(t, t * xi + y[i][Z]);
            let z_xi = t + y[i][Z1];
            let jac = grid.jacobian(i);
            let vals = [f, f2 * z_xi, f3 * z_xi * z_xi + f2 * y[i][Z2]];
            for k in 0..3 {
                g[k][i] = vals[k] * jac;
                sg[k][i] = vals[k] * jac * t;
            }
        }
        let (tail, tail_bound) = ray_tail(spec, xi, grid.t[m - 1], &y[m - 1]);
        let mut update: f64 = 0.0;
        let mut next = y.clone();
        for k in 0..3 {
            let b = cumulative_backward(&g[k], h);
            let a = cumulative_forward(&sg[k], h);
            let (iz, ix) = (2 * k, 2 * k + 1);
            for i in 0..m {
                let bk = b[i] + tail[k];
                let zk = a[i] + grid.t[i] * bk;
                next[i][ix] = bk;
                next[i][iz] = zk;
            }
        }
        for i in 0..m {
            let d = (next[i][Z] - y[i][Z]).abs()
                + (next[i][Z1] - y[i][Z1]).abs()
                + (next[i][Z2] - y[i][Z2]).abs();
            update = update.max(d / weights[i]);
        }
        y = next;
        if !update.is_finite() {
            return Err(Error::NonContraction { expansion_factor: f64::INFINITY, t1: spec.t1 });
        }
        if update < opts.tolerance {
            if tail_bound > opts.tail_tolerance {
                return Err(Error::TailTooLarge { bound: tail_bound, tolerance: opts.tail_tolerance });
            }
            finish_action(spec, xi, grid, &mut y);
            y.truncate(keep);
            return Ok(Column {
                xi,
                states: y,
                iterations: iteration,
                last_update: update,
                tail,
                tail_bound,
            });
        }
        if update > prev_update {
            increases += 1;
            if increases >= 2 {
                return Err(Error::NonContraction {
                    expansion_factor: update / prev_update,
                    t1: spec.t1,
                });
            }
        } else {
            increases = 0;
        }
        prev_update = update;
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, last_update: prev_update })
}

/// `φ̃(t) = ∫_0^t (ξξ̃ + ½ξ̃² + V_T1 - Z ∂_xV_T1) ds` on the converged column.
fn finish_action(spec: &PotentialSpec, xi: f64, grid: &TimeGrid, y: &mut [State]) {
    let integrand: Vec<f64> = (0..y.len())
        .map(|i| {
            let t = grid.t[i];
            let zx = t * xi + y[i][Z];
            let [v, f, _, _] = spec.effective_derivs(t, zx);
            let p = y[i][XI];
            (xi * p + 0.5 * p * p + v - zx * f) * grid.jacobian(i)
        })
        .collect();
    let phi = cumulative_forward(&integrand, grid.h);
    for (s, p) in y.iter_mut().zip(phi) {
        s[PHI] = p;
    }
}

const BINARY_MAGIC: &[u8; 8] = b"MSPHASE1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub max_iterations: usize,
    pub max_last_update: f64,
    pub max_tail_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BicharTable {
    pub spec: PotentialSpec,
    pub options: HjOptions,
    pub xi_grid: Vec<f64>,
    /// Full integration grid; only the first `states.len()` nodes are stored.
    pub time: TimeGrid,
    pub columns: Vec<Column>,
    pub report: SolveReport,
}

/// Solve every column of the table in parallel.
pub fn solve_bicharacteristics(spec: &PotentialSpec, opts: &HjOptions) -> Result<BicharTable> {
    spec.validate()?;
    opts.validate()?;
    let time = TimeGrid::new(opts.t_scale, opts.nodes_per_unit, opts.s_max);
    let keep = (time.t.partition_point(|&t| t <= opts.t_keep) + 1).min(time.len());
    let xi_grid = opts.xi_grid();
    let columns: Result<Vec<Column>> =
        xi_grid.par_iter().map(|&xi| solve_column(spec, xi, &time, keep, opts)).collect();
    let columns = columns?;
    let report = SolveReport {
        max_iterations: columns.iter().map(|c| c.iterations).max().unwrap_or(0),
        max_last_update: columns.iter().map(|c| c.last_update).fold(0.0, f64::max),
        max_tail_bound: columns.iter().map(|c| c.tail_bound).fold(0.0, f64::max),
    };
    let table = BicharTable { spec: *spec, options: *opts, xi_grid, time, columns, report };
    table.check_monotone()?;
    Ok(table)
}

/// Double `T1` from `t1_start` until the fixed point contracts; returns the
/// smallest contracting value found together with its table.
pub fn find_contracting_t1(
    spec: &PotentialSpec,
    opts: &HjOptions,
    t1_start: f64,
    max_doublings: usize,
) -> Result<(f64, BicharTable)> {
    let mut t1 = t1_start.max(1.0);
    let mut last_err = None;
    for _ in 0..=max_doublings {
        let trial = PotentialSpec { t1, ..*spec };
        match solve_bicharacteristics(&trial, opts) {
            Ok(table) => return Ok((t1, table)),
            Err(e @ Error::NonContraction { .. }) | Err(e @ Error::NoConvergence { .. }) => {
                last_err = Some(e);
                t1 *= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(Error::Invalid("no doubling attempted".into())))
}

impl BicharTable {
    pub fn kept_nodes(&self) -> usize {
        self.columns.first().map(|c| c.states.len()).unwrap_or(0)
    }

    pub fn t_max(&self) -> f64 {
        self.time.t[self.kept_nodes() - 1]
    }

    /// `Z(t_i, ξ_j)`.
    pub fn z(&self, i: usize, j: usize) -> f64 {
        self.time.t[i] * self.xi_grid[j] + self.columns[j].states[i][Z]
    }

    /// `Ξ(t_i, ξ_j)`.
    pub fn big_xi(&self, i: usize, j: usize) -> f64 {
        self.xi_grid[j] + self.columns[j].states[i][XI]
    }

    /// `∂_ξZ > 0` at every stored node with `t > 0`, and `Z` strictly
    /// increasing along each time row.
    pub fn check_monotone(&self) -> Result<()> {
        for i in 1..self.kept_nodes() {
            let t = self.time.t[i];
            for j in 0..self.xi_grid.len() {
                let dz = t + self.columns[j].states[i][Z1];
                if !(dz > 0.0) {
                    return Err(Error::NotInvertible {
                        t,
                        detail: format!("d Z/d xi = {dz} at xi = {}", self.xi_grid[j]),
                    });
                }
                if j > 0 && !(self.z(i, j) > self.z(i, j - 1)) {
                    return Err(Error::NotInvertible {
                        t,
                        detail: format!("Z not increasing near xi = {}", self.xi_grid[j]),
                    });
                }
                let dxi = 1.0 + self.columns[j].states[i][XI1];
                if !(dxi > 0.0) {
                    return Err(Error::NotInvertible {
                        t,
                        detail: format!("d Xi/d xi = {dxi} at xi = {}", self.xi_grid[j]),
                    });
                }
            }
        }
        Ok(())
    }

    /// Column states continued to an arbitrary time by RK4 from node `anchor`
    /// (default: the node just below `t`).
    pub fn states_at(&self, t: f64, anchor: Option<usize>) -> Result<Vec<State>> {
        if !(t >= 0.0 && t <= self.t_max()) {
            return Err(Error::Precondition(format!(
                "time {t} outside the tabulated range [0, {}]",
                self.t_max()
            )));
        }
        let i = anchor.unwrap_or_else(|| self.time.lower_node(t).min(self.kept_nodes() - 2));
        let t0 = self.time.t[i];
        Ok(self
            .columns
            .par_iter()
            .map(|c| continue_state(&self.spec, c.xi, t0, &c.states[i], t, 4))
            .collect())
    }

    /// CSV rows `xi,t,z,xi_dev,z_xi,xi_dev_xi,z_xixi,xi_dev_xixi,phi` over all stored nodes.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "xi,t,z,xi_dev,z_xi,xi_dev_xi,z_xixi,xi_dev_xixi,phi")?;
        for c in &self.columns {
            for (i, s) in c.states.iter().enumerate() {
                let mut row = vec![c.xi, self.time.t[i]];
                row.extend_from_slice(s);
                crate::write_csv_row(&mut w, &row)?;
            }
        }
        Ok(())
    }

    /// Rebuild a table from [`BicharTable::write_csv`] output. The options
    /// and potential must be the ones the table was produced with.
    pub fn read_csv<R: std::io::BufRead>(
        spec: &PotentialSpec,
        opts: &HjOptions,
        reader: R,
    ) -> Result<BicharTable> {
        let mut columns: Vec<Column> = Vec::with_capacity(opts.xi_grid().len());
        let mut lines = reader.lines();
        lines.next().transpose()?;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Io(format!("bad phase-table row: {e}")))?;
            if vals.len() != 9 {
                return Err(Error::Io(format!("phase-table row has {} fields", vals.len())));
            }
            let state: State = [vals[2], vals[3], vals[4], vals[5], vals[6], vals[7], vals[8]];
            match columns.last_mut() {
                Some(c) if c.xi == vals[0] => c.states.push(state),
                _ => columns.push(Column {
                    xi: vals[0],
                    states: vec![state],
                    iterations: 0,
                    last_update: 0.0,
                    tail: [0.0; 3],
                    tail_bound: 0.0,
                }),
            }
        }
        Self::assemble(spec, opts, columns)
    }

    fn assemble(spec: &PotentialSpec, opts: &HjOptions, columns: Vec<Column>) -> Result<BicharTable> {
        let time = TimeGrid::new(opts.t_scale, opts.nodes_per_unit, opts.s_max);
        let xi_grid = opts.xi_grid();
        let consistent = columns.len() == xi_grid.len()
            && columns.iter().zip(&xi_grid).all(|(c, x)| c.xi == *x)
            && columns.iter().all(|c| c.states.len() == columns[0].states.len())
            && columns[0].states.len() >= 2
            && columns[0].states.len() <= time.len();
        if !consistent {
            return Err(Error::Io("phase table does not match the requested grids".into()));
        }
        let report = SolveReport { max_iterations: 0, max_last_update: 0.0, max_tail_bound: 0.0 };
        Ok(BicharTable { spec: *spec, options: *opts, xi_grid, time, columns, report })
    }

    /// Little-endian binary dump: magic, column and node counts, then per
    /// column its label and states. Round trips exactly.
    pub fn write_binary<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.columns.len() as u64).to_le_bytes())?;
        w.write_all(&(self.kept_nodes() as u64).to_le_bytes())?;
        for c in &self.columns {
            w.write_all(&c.xi.to_le_bytes())?;
            for s in &c.states {
                for v in s {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    /// Inverse of [`BicharTable::write_binary`].
    pub fn read_binary<R: std::io::Read>(
        spec: &PotentialSpec,
        opts: &HjOptions,
        mut r: R,
    ) -> Result<BicharTable> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Io("not a phase-table file".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let n_cols = u64::from_le_bytes(next(&mut r)?) as usize;
        let n_nodes = u64::from_le_bytes(next(&mut r)?) as usize;
        if n_cols > 1 << 20 || n_nodes > 1 << 24 {
            return Err(Error::Io("phase-table header out of range".into()));
        }
        let mut columns = Vec::with_capacity(n_cols);
        for _ in 0..n_cols {
            let xi = f64::from_le_bytes(next(&mut r)?);
            let mut states = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let mut s: State = [0.0; 7];
                for v in s.iter_mut() {
                    *v = f64::from_le_bytes(next(&mut r)?);
                }
                states.push(s);
            }
            columns.push(Column { xi, states, iterations: 0, last_update: 0.0, tail: [0.0; 3], tail_bound: 0.0 });
        }
        Self::assemble(spec, opts, columns)
    }
}
