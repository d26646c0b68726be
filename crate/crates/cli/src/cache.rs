//! On-disk cache of bicharacteristic tables, keyed by the SHA-256 of the
//! canonical JSON of (potential, table options).
//!
//! Entries are written to a temporary file and renamed into place, and each
//! key is built at most once per process, so concurrent sweep cells share
//! one solve.

use std::collections::HashMap;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use modscat::hj::{solve_bicharacteristics, BicharTable, HjOptions};
use modscat::potentials::PotentialSpec;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CacheStatus {
    pub key: String,
    /// Loaded from disk or memory rather than solved.
    pub hit: bool,
    pub path: PathBuf,
}

pub fn table_key(spec: &PotentialSpec, opts: &HjOptions) -> String {
    let canonical = serde_json::to_string(&(spec, opts)).expect("potential and options serialize");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

type Slot = Arc<Mutex<Option<Arc<BicharTable>>>>;

fn slots() -> &'static Mutex<HashMap<PathBuf, Slot>> {
    static SLOTS: OnceLock<Mutex<HashMap<PathBuf, Slot>>> = OnceLock::new();
    SLOTS.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Table for `(spec, opts)`: from this process, from `dir`, or solved and stored.
pub fn load_or_solve(
    spec: &PotentialSpec,
    opts: &HjOptions,
    dir: &Path,
) -> anyhow::Result<(Arc<BicharTable>, CacheStatus)> {
    let key = table_key(spec, opts);
    let path = dir.join(format!("{key}.phase"));
    let slot = slots().lock().unwrap().entry(path.clone()).or_default().clone();
    let mut guard = slot.lock().unwrap();
    if let Some(t) = guard.as_ref() {
        return Ok((t.clone(), CacheStatus { key, hit: true, path }));
    }
    if path.exists() {
        match fs::File::open(&path)
            .map_err(anyhow::Error::from)
            .and_then(|f| Ok(BicharTable::read_binary(spec, opts, BufReader::new(f))?))
        {
            Ok(t) => {
                let t = Arc::new(t);
                *guard = Some(t.clone());
                log::info!("phase table {key} loaded from cache");
                return Ok((t, CacheStatus { key, hit: true, path }));
            }
            Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", path.display()),
        }
    }
    log::info!("solving phase table {key}");
    let table = Arc::new(solve_bicharacteristics(spec, opts)?);
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!("{key}.phase.tmp{}", std::process::id()));
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        table.write_binary(&mut w)?;
        std::io::Write::flush(&mut w)?;
    }
    fs::rename(&tmp, &path)?;
    fs::write(dir.join(format!("{key}.json")), serde_json::to_string_pretty(&(spec, opts))?)?;
    *guard = Some(table.clone());
    Ok((table, CacheStatus { key, hit: false, path }))
}
