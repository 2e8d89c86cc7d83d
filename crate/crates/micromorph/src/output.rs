//! CSV/JSON writers. Every file gets a `<name>.meta.json` sidecar carrying the resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::dispersion::DispersionResult;
use crate::dynamics::Trajectory;
use crate::energy::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::mms::{ConvergenceTable, QUANTITIES};
use crate::probe::ProbeTable;
use crate::snapshot::{write_snapshot, Snapshot};

/// Output directory bound to the configuration recorded in every sidecar.
#[derive(Debug, Clone)]
pub struct OutputDir {
    pub root: PathBuf,
    pub config: Value,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path, config: Value) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            config,
            written: Vec::new(),
        })
    }

    /// Paths written so far (data files only), in order.
    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn sidecar(&mut self, path: &Path) -> Result<()> {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let meta = json!({
            "file": name,
            "generator": concat!("micromorph ", env!("CARGO_PKG_VERSION")),
            "config": self.config,
        });
        let side = self.root.join(format!("{name}.meta.json"));
        write_json_file(&side, &meta)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.root.join(name);
        write_json_file(&path, value)?;
        self.sidecar(&path)?;
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::format(&path, e))?;
        w.write_record(header).map_err(|e| Error::format(&path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| Error::format(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.sidecar(&path)?;
        Ok(path)
    }

    pub fn snapshot(&mut self, stem: &str, snap: &Snapshot) -> Result<PathBuf> {
        let path = self.root.join(stem);
        write_snapshot(&path, snap)?;
        self.sidecar(&path.with_extension("bin"))?;
        Ok(path)
    }
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Header and rows of the energy series.
pub fn energy_table(traj: &Trajectory) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = strings(&["step", "time"]);
    header.extend(EnergyBreakdown::PART_NAMES.iter().map(|s| s.to_string()));
    header.push("total".into());
    header.push("discrete_total".into());
    let rows = traj
        .energies
        .iter()
        .enumerate()
        .map(|(i, e): (usize, &EnergyBreakdown)| {
            let mut r = vec![traj.steps[i].to_string(), num(traj.times[i])];
            r.extend(e.parts().iter().map(|&v| num(v)));
            r.push(num(e.total));
            r.push(num(traj.discrete_energies[i]));
            r
        })
        .collect();
    (header, rows)
}

/// One row per `k` sample with the twelve branches.
pub fn dispersion_table(d: &DispersionResult) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["k".to_string()];
    header.extend((0..12).map(|b| format!("omega_{b}")));
    let rows = d
        .k_samples
        .iter()
        .zip(&d.branches)
        .map(|(k, br)| std::iter::once(num(*k)).chain(br.iter().map(|&w| num(w))).collect())
        .collect();
    (header, rows)
}

pub fn probe_table(t: &ProbeTable) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = strings(&["axis", "multiple", "h", "sup_energy", "time_of_sup"]);
    header.extend(EnergyBreakdown::PART_NAMES.iter().map(|s| s.to_string()));
    let rows = t
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![
                r.axis.to_string(),
                r.multiple.to_string(),
                num(r.h),
                num(r.sup_energy),
                num(r.time_of_sup),
            ];
            v.extend(r.breakdown.parts().iter().map(|&x| num(x)));
            v
        })
        .collect();
    (header, rows)
}

pub fn convergence_csv(t: &ConvergenceTable) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = strings(&["n", "h", "dt", "steps"]);
    header.extend(QUANTITIES.iter().map(|s| s.to_string()));
    let rows = t
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![r.n.to_string(), num(r.h), num(r.dt), r.steps.to_string()];
            v.extend(QUANTITIES.iter().map(|q| num(r.value(q))));
            v
        })
        .collect();
    (header, rows)
}
