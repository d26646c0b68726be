//! Cartesian parameter sweeps over a config template.
//!
//! Each cell gets its own run directory `cell-NNN` under the sweep output and
//! runs independently (in parallel); a failing cell is recorded in the
//! aggregate table and the sweep carries on.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use modscat::Num;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{from_table, set_path, Axis, Kind};
use crate::run::{execute, Metrics, RunFlags};

#[derive(Clone, Debug, Serialize)]
pub struct Cell {
    pub index: usize,
    pub values: Vec<toml::Value>,
    pub dir: PathBuf,
    pub metrics: Metrics,
    pub error: Option<String>,
}

/// Every combination of axis values, first axis slowest. No axes gives one
/// empty combination.
pub fn cartesian(axes: &[Axis]) -> Vec<Vec<toml::Value>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut row = prefix.clone();
                    row.push(v.clone());
                    row
                })
            })
            .collect()
    })
}

fn render(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Float(f) => Num(*f).to_string(),
        other => other.to_string(),
    }
}

fn num(v: Option<f64>) -> String {
    v.map(|x| Num(x).to_string()).unwrap_or_default()
}

fn flag(v: Option<bool>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Run the sweep described by `template` (its `[sweep]` section is dropped
/// from the cells) into `out`, writing `sweep.csv` and `sweep.json`.
pub fn sweep(template: &toml::Table, kind: Kind, axes: &[Axis], out: &Path) -> anyhow::Result<Vec<Cell>> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut base = template.clone();
    base.remove("sweep");
    let combos = cartesian(axes);
    let cells: Vec<Cell> = combos
        .into_par_iter()
        .enumerate()
        .map(|(index, values)| {
            let dir = out.join(format!("cell-{index:03}"));
            let run = || -> anyhow::Result<(Metrics, Option<String>)> {
                let mut t = base.clone();
                for (axis, v) in axes.iter().zip(&values) {
                    set_path(&mut t, &axis.field, v.clone())?;
                }
                set_path(&mut t, "output", toml::Value::String(dir.to_string_lossy().into_owned()))?;
                let cfg = from_table(t)?;
                let done = execute(&cfg, kind, RunFlags::default())?;
                Ok((done.metrics, done.error))
            };
            let (metrics, error) = match run() {
                Ok(r) => r,
                Err(e) => (Metrics::default(), Some(format!("{e:#}"))),
            };
            if let Some(e) = &error {
                log::warn!("sweep cell {index} failed: {e}");
            }
            Cell { index, values, dir, metrics, error }
        })
        .collect();

    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    let mut header: Vec<String> = vec!["cell".into()];
    header.extend(axes.iter().map(|a| a.field.clone()));
    header.extend(
        [
            "status",
            "delta_hat",
            "delta_rms",
            "control_alpha",
            "dominated_by_start",
            "envelope_bounded",
            "mass_drift",
            "energy_drift",
            "linf_scaled_max",
            "passed",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for c in &cells {
        let m = &c.metrics;
        let mut row: Vec<String> = vec![c.index.to_string()];
        row.extend(c.values.iter().map(render));
        row.push(if c.error.is_some() { "failed" } else { "ok" }.into());
        row.extend([
            num(m.delta_hat),
            num(m.delta_rms),
            num(m.control_alpha),
            flag(m.dominated_by_start),
            flag(m.envelope_bounded),
            num(m.mass_drift),
            num(m.energy_drift),
            num(m.linf_scaled_max),
            flag(m.passed),
            c.error.clone().unwrap_or_default(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    fs::write(
        out.join("sweep.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "kind": kind.name(),
            "axes": axes,
            "cells": cells,
            "failed": cells.iter().filter(|c| c.error.is_some()).count(),
        }))? + "\n",
    )?;
    Ok(cells)
}
