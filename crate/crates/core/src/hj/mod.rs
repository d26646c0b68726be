//! Long-range phase correction: bicharacteristics, the generating function
//! and the phase `Ψ` solving `-∂_tΨ = ½|∂_xΨ|² + V_T1`.

pub mod bichar;
pub mod phase;

pub use bichar::{
    find_contracting_t1, solve_bicharacteristics, solve_column, theta_weight, BicharTable,
    Column, HjOptions, TimeGrid,
};
pub use phase::{ColumnSample, PhaseLattice, PhaseSample, PhaseSlice};

use crate::error::Result;

/// Largest offset of the centered difference stencils used below, in steps.
const STENCIL: f64 = 2.0;

/// Fourth-order centered difference from samples at `t ± h, t ± 2h`.
#[inline]
pub fn centered_derivative(fm2: f64, fm1: f64, fp1: f64, fp2: f64, h: f64) -> f64 {
    (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h)
}

/// Slices at `t + k h` for `k = -2..=2`, all continued from the node below `t - 2h`.
pub fn stencil_slices(table: &BicharTable, t: f64, h: f64) -> Result<[PhaseSlice; 5]> {
    let anchor = table.time.lower_node(t - STENCIL * h).min(table.kept_nodes() - 2);
    let mk = |k: f64| PhaseSlice::from_table(table, t + k * h, Some(anchor));
    Ok([mk(-2.0)?, mk(-1.0)?, mk(0.0)?, mk(1.0)?, mk(2.0)?])
}

/// Residual of `∂_tΨ + ½|∂_xΨ|² + V_T1` at time `t` on the given points,
/// with `∂_t` by a fourth-order centered difference of `Ψ - x²/(2t)`.
pub fn hj_residual_at(table: &BicharTable, t: f64, xs: &[f64], rel_step: f64) -> Result<f64> {
    let h = rel_step * t;
    let slices = stencil_slices(table, t, h)?;
    let mut sup: f64 = 0.0;
    for &x in xs {
        let centre = slices[2].evaluate(x)?;
        let d = |k: usize| slices[k].evaluate(x).map(|s| s.delta_psi);
        let dt = centered_derivative(d(0)?, d(1)?, d(3)?, d(4)?, h);
        let v = table.spec.effective(t, x);
        let r = dt + (x / t) * centre.a1 + 0.5 * centre.a1 * centre.a1 + v;
        sup = sup.max(r.abs());
    }
    Ok(sup)
}

/// Points `x` with `|x/t|` uniform over the slice window shrunk by `margin`
/// at each end, `n` per sign.
pub fn window_points(slice: &PhaseSlice, n: usize, margin: f64) -> Vec<f64> {
    let (lo, hi) = slice.window();
    let (a, b) = (lo + margin * (hi - lo), hi - margin * (hi - lo));
    let pos = (0..n).map(|i| slice.t * (a + (b - a) * i as f64 / (n - 1).max(1) as f64));
    pos.flat_map(|x| [x, -x]).collect()
}

/// Sup-residual per time on `n_x` points per sign in the window.
pub fn hj_residual(
    table: &BicharTable,
    times: &[f64],
    n_x: usize,
    margin: f64,
) -> Result<Vec<(f64, f64)>> {
    times
        .iter()
        .map(|&t| {
            let xs = window_points(&PhaseSlice::from_table(table, t, None)?, n_x, margin);
            Ok((t, hj_residual_at(table, t, &xs, 1e-3)?))
        })
        .collect()
}
