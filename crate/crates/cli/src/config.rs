//! Run configuration: TOML layout, dotted-path overrides and validation.
//!
//! A config is a nested TOML document. Every section is optional and filled
//! with the benchmark defaults; the resolved config (with `δ` and the kind
//! filled in) is what gets written next to the results.

use std::fmt;
use std::path::{Path, PathBuf};

use modscat::final_state::{default_delta, Seed, DEFAULT_B};
use modscat::hj::HjOptions;
use modscat::potentials::{LongRange, PotentialSpec, ShortRange, Singular};
use modscat::profile::ScatteringDatum;
use modscat::propagator::Method;
use modscat::SpatialGrid;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    HjSolve,
    ProfileCheck,
    Evolve,
    Scatter,
    VerifyLemmas,
    Fit,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::HjSolve => "hj-solve",
            Kind::ProfileCheck => "profile-check",
            Kind::Evolve => "evolve",
            Kind::Scatter => "scatter",
            Kind::VerifyLemmas => "verify-lemmas",
            Kind::Fit => "fit",
        }
    }

    /// Kinds that evolve or sample fields up to `T_end` on the grid.
    fn needs_grid(self) -> bool {
        matches!(self, Kind::ProfileCheck | Kind::Evolve | Kind::Scatter)
    }
}

/// `V = Z(a_L⟨x⟩^{-ρ_L} + a_S⟨x⟩^{-ρ_S}) + V^C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    /// Sign and scale applied to both smooth parts.
    pub z: f64,
    pub long_amplitude: f64,
    pub rho_l: f64,
    pub short_amplitude: f64,
    pub rho_s: f64,
    pub singular: Option<Singular>,
    pub c0: f64,
    pub t1: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            z: 1.0,
            long_amplitude: 0.1,
            rho_l: 0.7,
            short_amplitude: 0.1,
            rho_s: 2.0,
            singular: None,
            c0: 1.0,
            t1: 50.0,
        }
    }
}

impl PotentialConfig {
    pub fn spec(&self) -> PotentialSpec {
        PotentialSpec {
            long_range: LongRange { amplitude: self.z * self.long_amplitude, rho: self.rho_l },
            short_range: ShortRange { amplitude: self.z * self.short_amplitude, rho: self.rho_s },
            singular: self.singular.unwrap_or_else(Singular::none),
            c0: self.c0,
            t1: self.t1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatumConfig {
    pub epsilon: f64,
    pub lambda: f64,
    /// Bump windows `[lo, hi]` in `|ξ|`.
    pub windows: Vec<[f64; 2]>,
    pub two_sided: bool,
}

impl Default for DatumConfig {
    fn default() -> Self {
        DatumConfig { epsilon: 0.1, lambda: 1.0, windows: vec![[1.0, 3.0]], two_sided: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    pub half_length: f64,
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub checkpoints: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_points: 1 << 14,
            half_length: 8000.0,
            dt: 5e-3,
            t_start: 50.0,
            t_end: 2000.0,
            checkpoints: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub seed_mode: Seed,
    /// Decay exponent; filled with `min{ρ_L, ρ_S-1} - 0.05` when absent.
    pub delta: Option<f64>,
    pub b: f64,
    pub fit_window: Option<[f64; 2]>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: Method::Strang, seed_mode: Seed::ProfilePlusE1, delta: None, b: DEFAULT_B, fit_window: None }
    }
}

/// Input of the `fit` experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub input: PathBuf,
    pub t_column: String,
    pub column: String,
    pub window: Option<[f64; 2]>,
    /// Fit β jointly instead of freezing it at `beta`.
    pub joint: bool,
    /// Frozen log exponent; defaults to `solver.b`.
    pub beta: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            input: PathBuf::from("series.csv"),
            t_column: "t".into(),
            column: "v_h1".into(),
            window: None,
            joint: false,
            beta: None,
        }
    }
}

/// One sweep axis: a dotted config path and the values it takes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub field: String,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: Kind,
    pub axes: Vec<Axis>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { kind: Kind::Scatter, axes: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kind: Option<Kind>,
    pub output: PathBuf,
    pub seed: u64,
    /// Phase-table cache directory.
    pub cache_dir: PathBuf,
    pub potential: PotentialConfig,
    pub datum: DatumConfig,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub hj: HjOptions,
    pub fit: Option<FitConfig>,
    pub sweep: Option<SweepConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: None,
            output: PathBuf::from("runs/out"),
            seed: 7,
            cache_dir: PathBuf::from(".modscat-cache"),
            potential: PotentialConfig::default(),
            datum: DatumConfig::default(),
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            hj: HjOptions::default(),
            fit: None,
            sweep: None,
        }
    }
}

/// A rejected config: which constraint failed and the values involved.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub violated: String,
    pub detail: String,
}

impl ConfigError {
    fn new(violated: impl Into<String>, detail: impl Into<String>) -> Self {
        ConfigError { violated: violated.into(), detail: detail.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config rejected, violated {}: {}", self.violated, self.detail)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn spec(&self) -> PotentialSpec {
        self.potential.spec()
    }

    pub fn datum(&self) -> ScatteringDatum {
        ScatteringDatum {
            epsilon: self.datum.epsilon,
            lambda: self.datum.lambda,
            c0: self.potential.c0,
            windows: self.datum.windows.iter().map(|w| (w[0], w[1])).collect(),
            two_sided: self.datum.two_sided,
        }
    }

    pub fn delta(&self) -> f64 {
        self.solver.delta.unwrap_or_else(|| default_delta(&self.spec()))
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid, ConfigError> {
        SpatialGrid::new(self.grid.n_points, self.grid.half_length)
            .map_err(|e| ConfigError::new("grid shape", e.to_string()))
    }

    /// Check every constraint relevant to `kind`.
    pub fn validate(&self, kind: Kind) -> Result<(), ConfigError> {
        let spec = self.spec();
        let p = &self.potential;
        if !(p.rho_l > 0.5) {
            return Err(ConfigError::new("ρ_L > 1/2", format!("ρ_L = {}", p.rho_l)));
        }
        if !(p.rho_s > 1.5) {
            return Err(ConfigError::new("ρ_S > 3/2", format!("ρ_S = {}", p.rho_s)));
        }
        spec.validate().map_err(|e| ConfigError::new("potential descriptor", e.to_string()))?;

        let d = &self.datum;
        if !(d.epsilon > 0.0 && d.epsilon.is_finite()) {
            return Err(ConfigError::new("ε > 0", format!("ε = {}", d.epsilon)));
        }
        if d.windows.is_empty() {
            return Err(ConfigError::new("datum has a window", "no bump windows given"));
        }
        for w in &d.windows {
            if !(w[1] > w[0]) {
                return Err(ConfigError::new("lo < hi", format!("datum window [{}, {}]", w[0], w[1])));
            }
            if !(w[0] >= p.c0) {
                return Err(ConfigError::new(
                    "supp û_+ ⊂ {|ξ| ≥ c0}",
                    format!("datum window [{}, {}] reaches below c0 = {}", w[0], w[1], p.c0),
                ));
            }
        }
        self.datum().validate().map_err(|e| ConfigError::new("datum descriptor", e.to_string()))?;

        if kind == Kind::Scatter {
            let delta = self.delta();
            let cap = p.rho_l.min(p.rho_s - 1.0);
            if !(delta > 0.5) {
                return Err(ConfigError::new("δ > 1/2", format!("δ = {delta} ≤ 1/2")));
            }
            if !(delta < cap) {
                return Err(ConfigError::new(
                    "δ < min{ρ_L, ρ_S−1}",
                    format!("δ = {delta} ≥ min{{ρ_L, ρ_S−1}} = {cap}"),
                ));
            }
            if !(delta <= 1.0) {
                return Err(ConfigError::new("δ ≤ 1", format!("δ = {delta}")));
            }
            if !(self.solver.b > 2.0) {
                return Err(ConfigError::new("b > 2", format!("b = {} ≤ 2", self.solver.b)));
            }
        }

        if kind.needs_grid() {
            let grid = self.spatial_grid()?;
            let g = &self.grid;
            if !(g.dt > 0.0 && g.dt.is_finite()) {
                return Err(ConfigError::new("dt > 0", format!("dt = {}", g.dt)));
            }
            if !(g.t_start >= 2.0) {
                return Err(ConfigError::new("T_start ≥ 2", format!("T_start = {}", g.t_start)));
            }
            if !(g.t_end > g.t_start) {
                return Err(ConfigError::new(
                    "T_end > T_start",
                    format!("T_start = {}, T_end = {}", g.t_start, g.t_end),
                ));
            }
            if g.checkpoints < 2 {
                return Err(ConfigError::new("checkpoints ≥ 2", format!("checkpoints = {}", g.checkpoints)));
            }
            let budget = 1.25 * self.datum().xi_hi() * g.t_end;
            if grid.half_length() < budget {
                return Err(ConfigError::new(
                    "L ≥ 1.25·ξ_max·T_end",
                    format!("L = {} below {budget}", grid.half_length()),
                ));
            }
            if g.t_end > self.hj.t_keep {
                return Err(ConfigError::new(
                    "T_end ≤ hj.t_keep",
                    format!("T_end = {} beyond the tabulated phase ({})", g.t_end, self.hj.t_keep),
                ));
            }
        }
        if kind == Kind::Scatter {
            let floor = p.t1.max(spec.t2()).max(2.0);
            if !(self.grid.t_start >= floor) {
                return Err(ConfigError::new(
                    "T_start ≥ max(T1, T2, 2)",
                    format!("T_start = {} below {floor}", self.grid.t_start),
                ));
            }
        }
        if let Some(w) = self.solver.fit_window {
            if !(w[1] > w[0]) {
                return Err(ConfigError::new("fit window lo < hi", format!("{w:?}")));
            }
        }
        if kind == Kind::Fit && self.fit.is_none() {
            return Err(ConfigError::new("[fit] section present", "fit needs an input series"));
        }
        self.hj.validate().map_err(|e| ConfigError::new("hj options", e.to_string()))?;
        Ok(())
    }

    /// Config with the kind and every defaulted quantity written out, as
    /// persisted next to results.
    pub fn resolved(&self, kind: Kind) -> RunConfig {
        let mut c = self.clone();
        c.kind = Some(kind);
        c.solver.delta = Some(self.delta());
        c
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Parse a TOML document, apply `key=value` overrides and deserialize.
pub fn parse_str(text: &str, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let mut table: toml::Table = toml::from_str(text)?;
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("override `{o}` is not of the form key=value"))?;
        set_path(&mut table, key.trim(), parse_value(value.trim()))?;
    }
    from_table(table)
}

pub fn from_table(table: toml::Table) -> anyhow::Result<RunConfig> {
    Ok(toml::Value::Table(table).try_into()?)
}

pub fn parse_config(path: &Path, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
    parse_str(&text, overrides)
}

/// A TOML literal, or a bare string when the text is not one.
pub fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Set `a.b.c` in a table, creating intermediate tables.
pub fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> anyhow::Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| anyhow::anyhow!("empty key"))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => anyhow::bail!("`{p}` in `{path}` is not a table"),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let c = parse_str("", &["potential.z=-1".into(), "datum.windows=[[1.5, 2.5]]".into()]).unwrap();
        assert_eq!(c.potential.z, -1.0);
        assert_eq!(c.datum.windows, vec![[1.5, 2.5]]);
    }

    #[test]
    fn bare_words_become_strings() {
        assert_eq!(parse_value("strang"), toml::Value::String("strang".into()));
        assert_eq!(parse_value("2.5"), toml::Value::Float(2.5));
    }
}
