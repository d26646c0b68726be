//! Config parsing, experiment orchestration and persistence behind the
//! `modscat` binary.

pub mod cache;
pub mod config;
pub mod run;
pub mod sweep;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "MODSCAT_THREADS";

/// Build the global rayon pool from [`THREADS_ENV`] when it is set.
pub fn init_threads() -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
            if n == 0 {
                anyhow::bail!("{THREADS_ENV} must be a positive integer, got 0");
            }
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            Ok(Some(n))
        }
        _ => Ok(None),
    }
}
