//! Decay-rate fits with logarithmic corrections, envelope checks for
//! estimates of the form `y(t) ≲ t^{-α}(log t)^β`, and conservation audits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagator::Checkpoint;

/// Minimum number of points a fit window must contain.
pub const MIN_FIT_POINTS: usize = 12;

/// Default growth threshold of [`envelope_check`].
pub const ENVELOPE_THRESHOLD: f64 = 1.5;

/// Result of fitting `y = C t^{-α} (log t)^β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub window: (f64, f64),
    pub points: usize,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Whether β was held fixed.
    pub beta_frozen: bool,
    /// RMS of the log-space residual.
    pub rms: f64,
}

impl RateFit {
    pub fn model(&self, t: f64) -> f64 {
        self.c * t.powf(-self.alpha) * t.ln().powf(self.beta)
    }

    /// `sup y t^α̂ (log t)^{-β̂}` over the fit window.
    pub fn normalized_sup(&self, series: &[(f64, f64)]) -> f64 {
        in_window(series, self.window)
            .map(|(t, y)| y * t.powf(self.alpha) * t.ln().powf(-self.beta))
            .fold(0.0, f64::max)
    }
}

fn in_window(series: &[(f64, f64)], w: (f64, f64)) -> impl Iterator<Item = (f64, f64)> + '_ {
    series.iter().copied().filter(move |&(t, _)| t >= w.0 && t <= w.1)
}

/// Least squares on `log y = log C - α log t + β log log t` over the points
/// with `t` in `window`.
///
/// A frozen β of zero allows `t ≤ 1`; otherwise all `t` must exceed 1.
pub fn fit_rate(
    series: &[(f64, f64)],
    window: (f64, f64),
    freeze_beta: Option<f64>,
) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = in_window(series, window).collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData { got: pts.len(), need: MIN_FIT_POINTS });
    }
    if pts.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Invalid("fit series must be strictly increasing in t".into()));
    }
    if pts.iter().any(|&(_, y)| !(y > 0.0 && y.is_finite())) {
        return Err(Error::Invalid("fit series must be positive and finite".into()));
    }
    let needs_loglog = freeze_beta.map_or(true, |b| b != 0.0);
    if needs_loglog && pts.iter().any(|&(t, _)| t <= 1.0) {
        return Err(Error::Invalid("log-corrected fit requires t > 1".into()));
    }

    let n = pts.len();
    let cols = if freeze_beta.is_some() { 2 } else { 3 };
    let mut a = DMatrix::<f64>::zeros(n, cols);
    let mut b = DVector::<f64>::zeros(n);
    for (i, &(t, y)) in pts.iter().enumerate() {
        let lt = t.ln();
        a[(i, 0)] = 1.0;
        a[(i, 1)] = -lt;
        let mut rhs = y.ln();
        match freeze_beta {
            Some(beta) if beta != 0.0 => rhs -= beta * lt.ln(),
            Some(_) => {}
            None => a[(i, 2)] = lt.ln(),
        }
        b[i] = rhs;
    }
    let svd = a.clone().svd(true, true);
    let p = svd.solve(&b, 1e-14).map_err(|e| Error::Invalid(format!("fit failed: {e}")))?;
    let resid = &a * &p - &b;
    let rms = (resid.norm_squared() / n as f64).sqrt();
    Ok(RateFit {
        window,
        points: n,
        c: p[0].exp(),
        alpha: p[1],
        beta: freeze_beta.unwrap_or_else(|| p[2]),
        beta_frozen: freeze_beta.is_some(),
        rms,
    })
}

/// Outcome of an envelope check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// Supremum of the normalized series.
    pub sup: f64,
    pub first_quartile_max: f64,
    pub last_quartile_max: f64,
    pub threshold: f64,
    /// `last_quartile_max ≤ threshold · first_quartile_max`.
    pub bounded: bool,
    pub normalized: Vec<(f64, f64)>,
}

/// Normalize `y_i` by `envelope(t_i)` and test for non-growth.
pub fn envelope_check_with<F: Fn(f64) -> f64>(
    series: &[(f64, f64)],
    envelope: F,
    threshold: f64,
) -> Envelope {
    let normalized: Vec<(f64, f64)> = series.iter().map(|&(t, y)| (t, y / envelope(t))).collect();
    let n = normalized.len();
    let q = (n / 4).max(1);
    let max_of = |s: &[(f64, f64)]| s.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let sup = max_of(&normalized);
    let (first, last) = if n == 0 {
        (f64::NAN, f64::NAN)
    } else {
        (max_of(&normalized[..q]), max_of(&normalized[n - q..]))
    };
    let bounded = sup.is_finite() && last <= threshold * first;
    Envelope { sup, first_quartile_max: first, last_quartile_max: last, threshold, bounded, normalized }
}

/// Envelope `t^{-α}(log t)^β`: normalized series `y t^α (log t)^{-β}`.
pub fn envelope_check(series: &[(f64, f64)], alpha: f64, beta: f64) -> Envelope {
    envelope_check_with(series, |t| t.powf(-alpha) * t.ln().powf(beta), ENVELOPE_THRESHOLD)
}

/// Conservation summary of a checkpoint log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub mass_drift: f64,
    pub energy_drift: f64,
    /// Run-derived `C` in `E(u) + C‖u‖² ≥ c‖u‖²_{H¹}`.
    pub equivalence_shift: f64,
    /// Largest admissible `c` for that shift; positive when the equivalence holds.
    pub equivalence_lower: f64,
    pub checkpoints: usize,
}

/// Largest relative drifts from the first checkpoint and the energy/H¹
/// equivalence constants.
///
/// Energy drift is relative to `max(|E₀|, ‖u₀‖²_{H¹}/2)` so that runs with
/// nearly cancelling energy are not penalized.
pub fn conservation_audit(log: &[Checkpoint]) -> Result<ConservationReport> {
    let first = log
        .first()
        .ok_or(Error::InsufficientData { got: 0, need: 1 })?;
    let e_scale = first.energy.abs().max(0.5 * first.h1 * first.h1);
    let mut mass_drift: f64 = 0.0;
    let mut energy_drift: f64 = 0.0;
    for c in log {
        mass_drift = mass_drift.max((c.mass - first.mass).abs() / first.mass);
        energy_drift = energy_drift.max((c.energy - first.energy).abs() / e_scale);
    }
    let shift = log
        .iter()
        .map(|c| (-c.energy / c.mass).max(0.0))
        .fold(0.0, f64::max)
        + 1.0;
    let lower = log
        .iter()
        .map(|c| (c.energy + shift * c.mass) / (c.h1 * c.h1))
        .fold(f64::INFINITY, f64::min);
    Ok(ConservationReport {
        mass_drift,
        energy_drift,
        equivalence_shift: shift,
        equivalence_lower: lower,
        checkpoints: log.len(),
    })
}

/// `n` log-spaced points on `[a, b]`.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                a
            } else if i + 1 == n {
                b
            } else {
                (la + (lb - la) * i as f64 / (n - 1).max(1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_endpoints() {
        let v = log_space(10.0, 1e4, 13);
        assert_eq!(v[0], 10.0);
        assert_eq!(v[12], 1e4);
        assert!((v[4] - 100.0).abs() < 1e-10);
    }

    #[test]
    fn too_few_points() {
        let s: Vec<(f64, f64)> = (1..10).map(|i| (i as f64 + 1.0, 1.0)).collect();
        assert!(matches!(fit_rate(&s, (0.0, 100.0), None), Err(Error::InsufficientData { .. })));
    }
}
