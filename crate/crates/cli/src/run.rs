//! The experiments behind each subcommand and the artifact directory they write.
//!
//! Layout of a run directory:
//!
//! - `config.toml`: resolved config, enough to reproduce the run
//! - `summary.json`: kind-specific summary
//! - `*.csv`: comma separated, header row, shortest round-trip floats
//! - `FAILED` and `failure.json`: only when the run failed or ended early

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use modscat::diagnostics::{conservation_audit, envelope_check, fit_rate, log_space, RateFit};
use modscat::final_state::{backward_shoot, residual_e1, xi_grid_for, Seed, ShootConfig, TimeContext};
use modscat::grid::h1_norm;
use modscat::hj::{hj_residual, window_points, BicharTable, PhaseSlice};
use modscat::profile::{profile_ode_residual, profile_ode_residual_fd, u_p, ProfilePhase, ProfileSnapshot};
use modscat::propagator::{evolve_to, EvolutionState, Hamiltonian, SplitStep};
use modscat::verify::{run_suite, SuiteOptions};
use modscat::write_csv_row;
use serde::Serialize;
use serde_json::json;

use crate::cache::{load_or_solve, CacheStatus};
use crate::config::{Kind, RunConfig};

/// Headline numbers of one run, shared by the sweep table.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub delta_hat: Option<f64>,
    pub delta_rms: Option<f64>,
    /// Fitted exponent of `‖u - M D û_+‖_{H¹}` (decay if positive).
    pub control_alpha: Option<f64>,
    pub dominated_by_start: Option<bool>,
    pub envelope_bounded: Option<bool>,
    pub mass_drift: Option<f64>,
    pub energy_drift: Option<f64>,
    pub linf_scaled_max: Option<f64>,
    pub passed: Option<bool>,
}

/// What a finished experiment hands back to the writer.
#[derive(Debug)]
pub struct Outcome {
    pub summary: serde_json::Value,
    pub metrics: Metrics,
    /// Set when the run ended early.
    pub failure: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunFlags {
    /// Also write the full bicharacteristic table as CSV (`hj-solve`).
    pub export_table: bool,
}

/// Result of [`execute`].
#[derive(Debug)]
pub struct Executed {
    pub dir: PathBuf,
    pub metrics: Metrics,
    pub error: Option<String>,
}

impl Executed {
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            1
        } else {
            0
        }
    }
}

/// Validate, run and persist one experiment into `cfg.output`. Errors of any
/// stage end up in the failure report; only an unwritable output directory
/// is returned as `Err`.
pub fn execute(cfg: &RunConfig, kind: Kind, flags: RunFlags) -> anyhow::Result<Executed> {
    let dir = cfg.output.clone();
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for stale in ["FAILED", "failure.json"] {
        let p = dir.join(stale);
        if p.exists() {
            fs::remove_file(p)?;
        }
    }
    let resolved = cfg.resolved(kind);
    fs::write(dir.join("config.toml"), resolved.to_toml()?)?;

    let result = match resolved.validate(kind) {
        Ok(()) => dispatch(&resolved, kind, &dir, flags),
        Err(e) => Err(anyhow::Error::new(e)),
    };
    let (metrics, error) = match result {
        Ok(out) => {
            let mut summary = out.summary;
            summary["kind"] = json!(kind.name());
            summary["seed"] = json!(resolved.seed);
            write_json(&dir.join("summary.json"), &summary)?;
            (out.metrics, out.failure)
        }
        Err(e) => (Metrics::default(), Some(format!("{e:#}"))),
    };
    if let Some(msg) = &error {
        fs::write(dir.join("FAILED"), format!("{msg}\n"))?;
        write_json(&dir.join("failure.json"), &json!({ "kind": kind.name(), "error": msg }))?;
    }
    Ok(Executed { dir, metrics, error })
}

fn dispatch(cfg: &RunConfig, kind: Kind, dir: &Path, flags: RunFlags) -> anyhow::Result<Outcome> {
    match kind {
        Kind::HjSolve => hj_solve(cfg, dir, flags),
        Kind::ProfileCheck => profile_check(cfg, dir),
        Kind::Evolve => evolve(cfg, dir),
        Kind::Scatter => scatter(cfg, dir),
        Kind::VerifyLemmas => verify_lemmas(cfg, dir),
        Kind::Fit => fit(cfg, dir),
    }
}

fn write_json(path: &Path, v: &impl Serialize) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn create(path: PathBuf) -> anyhow::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?))
}

fn table_for(cfg: &RunConfig) -> anyhow::Result<(Arc<BicharTable>, CacheStatus)> {
    load_or_solve(&cfg.spec(), &cfg.hj, &cfg.cache_dir)
}

fn hj_solve(cfg: &RunConfig, dir: &Path, flags: RunFlags) -> anyhow::Result<Outcome> {
    let spec = cfg.spec();
    let (table, cache) = table_for(cfg)?;
    let t_hi = table.t_max().min(1e3);
    let t_lo = spec.t1.min(t_hi / 2.0);
    let times = log_space(t_lo, t_hi, 9);
    let residual = hj_residual(&table, &times, 50, 0.005)?;
    let sup_residual = residual.iter().map(|r| r.1).fold(0.0, f64::max);

    // Plot data: the phase and its derivatives across the window at each time.
    let mut w = create(dir.join("phase.csv"))?;
    writeln!(w, "t,x,psi,dpsi,d2psi,d3psi")?;
    let mut free_dev: f64 = 0.0;
    for &t in &times {
        let slice = PhaseSlice::from_table(&table, t, None)?;
        let mut xs = window_points(&slice, 101, 0.0);
        xs.sort_by(f64::total_cmp);
        for x in xs {
            let s = slice.evaluate(x)?;
            let exact = x * x / (2.0 * t);
            free_dev = free_dev.max((s.psi() - exact).abs() / exact.abs().max(1.0));
            write_csv_row(&mut w, &[t, x, s.psi(), x / t + s.a1, 1.0 / t + s.d2, s.d3])?;
        }
    }
    w.flush()?;
    let mut r = create(dir.join("residual.csv"))?;
    writeln!(r, "t,sup_residual")?;
    for (t, v) in &residual {
        write_csv_row(&mut r, &[*t, *v])?;
    }
    r.flush()?;
    if flags.export_table {
        let mut t = create(dir.join("table.csv"))?;
        table.write_csv(&mut t)?;
        t.flush()?;
    }

    let free = spec.long_range.amplitude == 0.0;
    let passed = sup_residual <= 1e-5 && (!free || free_dev <= 1e-9);
    let summary = json!({
        "cache": cache,
        "t1": spec.t1,
        "columns": table.xi_grid.len(),
        "kept_nodes": table.kept_nodes(),
        "t_max": table.t_max(),
        "solve": table.report,
        "sup_residual": sup_residual,
        "residual_window": [t_lo, t_hi],
        "free_potential": free,
        "free_phase_deviation": if free { json!(free_dev) } else { json!(null) },
        "passed": passed,
    });
    Ok(Outcome { summary, metrics: Metrics { passed: Some(passed), ..Default::default() }, failure: None })
}

fn profile_phase(cfg: &RunConfig) -> anyhow::Result<(ProfilePhase, CacheStatus)> {
    let (table, cache) = table_for(cfg)?;
    Ok((ProfilePhase::from_table(table), cache))
}

fn profile_check(cfg: &RunConfig, dir: &Path) -> anyhow::Result<Outcome> {
    let datum = cfg.datum();
    let grid = cfg.spatial_grid()?;
    let (phase, cache) = profile_phase(cfg)?;
    let times = log_space(cfg.grid.t_start, cfg.grid.t_end, cfg.grid.checkpoints);
    let mut w = create(dir.join("profile.csv"))?;
    writeln!(w, "t,ode_residual,ode_residual_fd,mass_defect,h1,linf_scaled")?;
    let mut worst_ode: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    let mut last = None;
    for &t in &times {
        let xi = xi_grid_for(grid, t);
        let ode = profile_ode_residual(&datum, xi, t)?;
        let fd = profile_ode_residual_fd(&datum, xi, t, 1e-3 * t)?;
        let at = phase.at(t)?;
        let up = u_p(&datum, &at, grid)?;
        let mass = datum.sample(xi).l2_norm();
        let defect = (up.l2_norm() - mass).abs() / mass;
        worst_ode = worst_ode.max(ode);
        worst_mass = worst_mass.max(defect);
        write_csv_row(&mut w, &[t, ode, fd, defect, h1_norm(&up), t.sqrt() * up.linf_norm()])?;
        last = Some((at, xi));
    }
    w.flush()?;
    if let Some((at, xi)) = last {
        let snap = ProfileSnapshot::build(&datum, &at, grid, xi)?;
        let mut s = create(dir.join("snapshot.csv"))?;
        snap.write_csv(&mut s)?;
        s.flush()?;
    }
    let passed = worst_ode <= 1e-12 && worst_mass <= 1e-10;
    let summary = json!({
        "cache": cache,
        "times": times.len(),
        "max_ode_residual": worst_ode,
        "max_mass_defect": worst_mass,
        "snapshot_time": cfg.grid.t_end,
        "passed": passed,
    });
    Ok(Outcome { summary, metrics: Metrics { passed: Some(passed), ..Default::default() }, failure: None })
}

fn evolve(cfg: &RunConfig, dir: &Path) -> anyhow::Result<Outcome> {
    let datum = cfg.datum();
    let spec = cfg.spec();
    let grid = cfg.spatial_grid()?;
    let (phase, cache) = profile_phase(cfg)?;
    let g = &cfg.grid;
    let at = phase.at(g.t_start)?;
    let mut u0 = u_p(&datum, &at, grid)?;
    if cfg.solver.seed_mode == Seed::ProfilePlusE1 {
        u0 = u0.add(&residual_e1(&datum, &spec, &TimeContext::new(&at, grid)?)?)?;
    }
    let ham = Hamiltonian::new(&spec, grid, datum.lambda);
    let mut stepper = SplitStep::new(ham.clone(), cfg.solver.method);
    let mut state = EvolutionState::new(g.t_start, u0, g.dt)?;
    let times = log_space(g.t_start, g.t_end, g.checkpoints);

    let mut log = Vec::new();
    let mut series = Vec::new();
    let mut failure = None;
    for &t in &times {
        if let Err(e) = evolve_to(&mut state, &mut stepper, t) {
            failure = Some(e.to_string());
            break;
        }
        let cp = ham.checkpoint(t, &state.u)?;
        let v = state.u.sub(&u_p(&datum, &phase.at(t)?, grid)?)?;
        series.push((t, h1_norm(&v), v.l2_norm()));
        log.push(cp);
    }
    let mut w = create(dir.join("log.csv"))?;
    writeln!(w, "t,mass,energy,linf,h1")?;
    for c in &log {
        write_csv_row(&mut w, &[c.t, c.mass, c.energy, c.linf, c.h1])?;
    }
    w.flush()?;
    let mut s = create(dir.join("series.csv"))?;
    writeln!(s, "t,diff_h1,diff_l2,linf_scaled")?;
    for (c, (t, h1, l2)) in log.iter().zip(&series) {
        write_csv_row(&mut s, &[*t, *h1, *l2, t.sqrt() * c.linf])?;
    }
    s.flush()?;
    let report = conservation_audit(&log).ok();
    let linf_scaled_max = log.iter().map(|c| c.t.sqrt() * c.linf).fold(0.0, f64::max);
    let passed = failure.is_none()
        && report.as_ref().map_or(false, |r| r.mass_drift <= 1e-8 && r.energy_drift <= 1e-6);
    let metrics = Metrics {
        mass_drift: report.as_ref().map(|r| r.mass_drift),
        energy_drift: report.as_ref().map(|r| r.energy_drift),
        linf_scaled_max: Some(linf_scaled_max),
        passed: Some(passed),
        ..Default::default()
    };
    let summary = json!({
        "cache": cache,
        "steps": state.steps,
        "t_reached": state.t,
        "conservation": report,
        "linf_scaled_max": linf_scaled_max,
        "passed": passed,
        "failure": failure,
    });
    Ok(Outcome { summary, metrics, failure })
}

fn scatter(cfg: &RunConfig, dir: &Path) -> anyhow::Result<Outcome> {
    let datum = cfg.datum();
    let spec = cfg.spec();
    let grid = cfg.spatial_grid()?;
    let (phase, cache) = profile_phase(cfg)?;
    let g = &cfg.grid;
    let shoot = ShootConfig {
        grid,
        dt: g.dt,
        method: cfg.solver.method,
        t_end: g.t_end,
        t_start: g.t_start,
        checkpoints: g.checkpoints,
        seed: cfg.solver.seed_mode,
        b: cfg.solver.b,
        fit_window: cfg.solver.fit_window.map(|w| (w[0], w[1])),
    };
    let run = backward_shoot(&datum, &phase, &spec, &shoot)?;

    let mut w = create(dir.join("series.csv"))?;
    run.write_series_csv(&mut w)?;
    w.flush()?;
    let mut l = create(dir.join("log.csv"))?;
    run.write_log_csv(&mut l)?;
    l.flush()?;

    let delta = cfg.delta();
    let b = cfg.solver.b;
    let asc = run.ascending();
    let series: Vec<(f64, f64)> = asc.iter().map(|s| (s.t, s.v_h1)).collect();
    let env = envelope_check(&series, delta, b);
    let mut n = create(dir.join("normalized.csv"))?;
    writeln!(n, "t,v_h1_normalized")?;
    for (t, y) in &env.normalized {
        write_csv_row(&mut n, &[*t, *y])?;
    }
    n.flush()?;

    let cons = run.conservation.clone();
    let metrics = Metrics {
        delta_hat: run.fit.as_ref().map(|f| f.alpha),
        delta_rms: run.fit.as_ref().map(|f| f.rms),
        control_alpha: run.control_fit.as_ref().map(|f| f.alpha),
        dominated_by_start: Some(run.dominated_by_start),
        envelope_bounded: Some(env.bounded),
        mass_drift: cons.as_ref().map(|c| c.mass_drift),
        energy_drift: cons.as_ref().map(|c| c.energy_drift),
        linf_scaled_max: Some(run.linf_scaled_max),
        passed: None,
    };
    let summary = json!({
        "cache": cache,
        "delta_hat": metrics.delta_hat,
        "b": b,
        "delta": delta,
        "fit": run.fit,
        "control_fit": run.control_fit,
        "dominated_by_start": run.dominated_by_start,
        "envelope": { "alpha": delta, "beta": b, "sup": env.sup, "bounded": env.bounded },
        "conservation": cons,
        "linf_scaled_max": run.linf_scaled_max,
        "checkpoints": run.samples.len(),
        "failure": run.failure,
    });
    Ok(Outcome { summary, metrics, failure: run.failure })
}

fn verify_lemmas(cfg: &RunConfig, dir: &Path) -> anyhow::Result<Outcome> {
    let opts = SuiteOptions { seed: cfg.seed, datum: cfg.datum(), ..SuiteOptions::default() };
    let checks = run_suite(&opts)?;
    let mut text = String::new();
    for c in &checks {
        text.push_str(&c.line());
        text.push('\n');
    }
    fs::write(dir.join("summary.txt"), &text)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let passed = failed.is_empty();
    let summary = json!({
        "checks": checks,
        "passed": passed,
        "failed": failed,
        "lines": text.lines().collect::<Vec<_>>(),
    });
    Ok(Outcome { summary, metrics: Metrics { passed: Some(passed), ..Default::default() }, failure: None })
}

/// Read two named columns of a header-row CSV.
pub fn read_series(path: &Path, t_col: &str, y_col: &str) -> anyhow::Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| anyhow::anyhow!("column `{name}` not in {}", path.display()))
    };
    let (it, iy) = (idx(t_col)?, idx(y_col)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| -> anyhow::Result<f64> {
            rec.get(i).unwrap_or("").trim().parse::<f64>().with_context(|| format!("bad number in row {:?}", rec))
        };
        out.push((get(it)?, get(iy)?));
    }
    Ok(out)
}

fn fit(cfg: &RunConfig, dir: &Path) -> anyhow::Result<Outcome> {
    let fc = cfg.fit.clone().expect("validated");
    let series = read_series(&fc.input, &fc.t_column, &fc.column)?;
    let window = match fc.window {
        Some(w) => (w[0], w[1]),
        None => {
            let t_end = series.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            (50f64.min(0.8 * t_end), 0.8 * t_end)
        }
    };
    let beta = fc.beta.unwrap_or(cfg.solver.b);
    let freeze = if fc.joint { None } else { Some(beta) };
    let fitted: RateFit = fit_rate(&series, window, freeze)?;
    let env = envelope_check(
        &series.iter().copied().filter(|&(t, _)| t >= window.0 && t <= window.1).collect::<Vec<_>>(),
        fitted.alpha,
        fitted.beta,
    );
    let mut w = create(dir.join("fit.csv"))?;
    writeln!(w, "t,y,model")?;
    for &(t, y) in &series {
        write_csv_row(&mut w, &[t, y, fitted.model(t)])?;
    }
    w.flush()?;
    let summary = json!({
        "input": fc.input,
        "column": fc.column,
        "fit": fitted,
        "normalized_sup": fitted.normalized_sup(&series),
        "envelope": { "sup": env.sup, "bounded": env.bounded },
    });
    let metrics = Metrics {
        delta_hat: Some(fitted.alpha),
        delta_rms: Some(fitted.rms),
        envelope_bounded: Some(env.bounded),
        ..Default::default()
    };
    Ok(Outcome { summary, metrics, failure: None })
}
