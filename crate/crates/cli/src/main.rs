use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modscat_cli::config::{self, parse_value, Axis, Kind, RunConfig};
use modscat_cli::run::{execute, RunFlags};
use modscat_cli::{init_threads, sweep};

#[derive(Debug, Parser)]
#[command(name = "modscat", version, about = "Modified scattering experiments for the 1D cubic NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run config; benchmark defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output`).
    #[arg(short, long)]
    output: Option<PathBuf>,

    /// Override a config field, e.g. `--set potential.z=-1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the bicharacteristic table and report the Hamilton-Jacobi residual.
    HjSolve {
        #[command(flatten)]
        common: Common,
        /// Also write the full table as CSV.
        #[arg(long)]
        export_table: bool,
    },
    /// Profile equation residual, profile mass and a snapshot of u_p.
    ProfileCheck(Common),
    /// Forward evolution from the profile with conservation logs.
    Evolve(Common),
    /// Backward shoot from T_end and fit the decay of u - u_p.
    Scatter(Common),
    /// Run the lemma suite and print one line per check.
    VerifyLemmas(Common),
    /// Fit C t^-a (log t)^b to a column of a CSV series.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Input CSV (overrides `fit.input`).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Column to fit (overrides `fit.column`).
        #[arg(long)]
        column: Option<String>,
    },
    /// Cartesian sweep over config fields.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Experiment run in every cell (overrides `sweep.kind`).
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// Axis `field=v1,v2,...`, appended to `sweep.axes`. Repeatable.
        #[arg(long = "axis", value_name = "FIELD=V1,V2")]
        axes: Vec<String>,
    },
}

fn load(common: &Common, extra: Vec<String>) -> anyhow::Result<(toml::Table, RunConfig)> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", p.display()))?,
        None => String::new(),
    };
    let mut table: toml::Table = toml::from_str(&text)?;
    let mut overrides = common.overrides.clone();
    overrides.extend(extra);
    for o in &overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("override `{o}` is not of the form key=value"))?;
        config::set_path(&mut table, k.trim(), parse_value(v.trim()))?;
    }
    if let Some(out) = &common.output {
        config::set_path(&mut table, "output", toml::Value::String(out.to_string_lossy().into_owned()))?;
    }
    let cfg = config::from_table(table.clone())?;
    Ok((table, cfg))
}

fn parse_axis(spec: &str) -> anyhow::Result<Axis> {
    let (field, values) =
        spec.split_once('=').ok_or_else(|| anyhow::anyhow!("axis `{spec}` is not of the form field=v1,v2"))?;
    let values = match parse_value(values.trim()) {
        toml::Value::Array(a) => a,
        _ => values.split(',').map(|v| parse_value(v.trim())).collect(),
    };
    Ok(Axis { field: field.trim().to_string(), values })
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn single(common: &Common, kind: Kind, flags: RunFlags, extra: Vec<String>) -> anyhow::Result<ExitCode> {
    let (_, cfg) = load(common, extra)?;
    let done = execute(&cfg, kind, flags)?;
    if kind == Kind::VerifyLemmas {
        if let Ok(text) = std::fs::read_to_string(done.dir.join("summary.txt")) {
            print!("{text}");
        }
    }
    match &done.error {
        Some(e) => eprintln!("{} failed: {e} (report in {})", kind.name(), done.dir.display()),
        None => println!("{} finished, results in {}", kind.name(), done.dir.display()),
    }
    Ok(ExitCode::from(done.exit_code() as u8))
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(n) = init_threads()? {
        log::info!("using {n} worker threads");
    }
    match cli.command {
        Command::HjSolve { common, export_table } => {
            single(&common, Kind::HjSolve, RunFlags { export_table }, vec![])
        }
        Command::ProfileCheck(c) => single(&c, Kind::ProfileCheck, RunFlags::default(), vec![]),
        Command::Evolve(c) => single(&c, Kind::Evolve, RunFlags::default(), vec![]),
        Command::Scatter(c) => single(&c, Kind::Scatter, RunFlags::default(), vec![]),
        Command::VerifyLemmas(c) => single(&c, Kind::VerifyLemmas, RunFlags::default(), vec![]),
        Command::Fit { common, input, column } => {
            let mut extra = Vec::new();
            if let Some(i) = input {
                extra.push(format!("fit.input={}", quoted(&i.to_string_lossy())));
            }
            if let Some(c) = column {
                extra.push(format!("fit.column={}", quoted(&c)));
            }
            single(&common, Kind::Fit, RunFlags::default(), extra)
        }
        Command::Sweep { common, kind, axes } => {
            let (table, cfg) = load(&common, vec![])?;
            let sc = cfg.sweep.clone().unwrap_or_default();
            let kind = kind.unwrap_or(sc.kind);
            let mut all = sc.axes;
            for a in &axes {
                all.push(parse_axis(a)?);
            }
            let cells = sweep::sweep(&table, kind, &all, &cfg.output)?;
            let failed = cells.iter().filter(|c| c.error.is_some()).count();
            println!(
                "sweep finished: {} cells, {failed} failed, table in {}",
                cells.len(),
                cfg.output.join("sweep.csv").display()
            );
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
