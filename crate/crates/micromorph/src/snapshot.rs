//! Raw little-endian `f64` field dumps with a JSON header.
//!
//! `<stem>.bin` holds the named blocks back to back, each component contiguous in node order;
//! `<stem>.json` records the grid, time and block layout.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CartesianGrid, NodalField, SimulationState, TensorField, VectorField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub grid: CartesianGrid,
    pub time: f64,
    pub blocks: Vec<BlockInfo>,
}

const FORMAT: &str = "micromorph-f64le-v1";

/// In-memory snapshot: named component blocks on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: CartesianGrid,
    pub time: f64,
    pub blocks: Vec<(String, Vec<Vec<f64>>)>,
}

impl Snapshot {
    pub fn new(grid: &CartesianGrid, time: f64) -> Self {
        Self {
            grid: *grid,
            time,
            blocks: Vec::new(),
        }
    }

    pub fn with<F: NodalField>(mut self, name: &str, field: &F) -> Self {
        self.blocks.push((name.to_string(), field.components().to_vec()));
        self
    }

    pub fn from_state(s: &SimulationState) -> Self {
        Self::new(s.grid(), s.time)
            .with("u", &s.u)
            .with("u_t", &s.u_t)
            .with("p", &s.p)
            .with("p_t", &s.p_t)
    }

    fn block(&self, name: &str, comps: usize) -> Result<&Vec<Vec<f64>>> {
        let b = self
            .blocks
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("snapshot has no block `{name}`")))?;
        if b.1.len() != comps {
            return Err(Error::ShapeMismatch(format!(
                "block `{name}` has {} components, expected {comps}",
                b.1.len()
            )));
        }
        Ok(&b.1)
    }

    pub fn vector(&self, name: &str) -> Result<VectorField> {
        VectorField::from_components(&self.grid, self.block(name, 3)?)
    }

    pub fn tensor(&self, name: &str) -> Result<TensorField> {
        TensorField::from_components(&self.grid, self.block(name, 9)?)
    }

    pub fn state(&self) -> Result<SimulationState> {
        Ok(SimulationState {
            time: self.time,
            u: self.vector("u")?,
            u_t: self.vector("u_t")?,
            p: self.tensor("p")?,
            p_t: self.tensor("p_t")?,
        })
    }

    pub fn header(&self) -> SnapshotHeader {
        SnapshotHeader {
            format: FORMAT.to_string(),
            grid: self.grid,
            time: self.time,
            blocks: self
                .blocks
                .iter()
                .map(|(n, c)| BlockInfo {
                    name: n.clone(),
                    components: c.len(),
                })
                .collect(),
        }
    }
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Writes `<stem>.bin` and `<stem>.json`.
pub fn write_snapshot(stem: &Path, snap: &Snapshot) -> Result<()> {
    let (bin, json) = paths(stem);
    let mut bytes = Vec::with_capacity(8 * snap.grid.len() * snap.blocks.iter().map(|b| b.1.len()).sum::<usize>());
    for (_, comps) in &snap.blocks {
        for c in comps {
            for v in c {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let text = serde_json::to_string_pretty(&snap.header()).map_err(|e| Error::format(&json, e))?;
    fs::write(&json, text).map_err(|e| Error::io(&json, e))
}

/// Reads a snapshot written by [`write_snapshot`]; `stem` may carry either extension.
pub fn read_snapshot(stem: &Path) -> Result<Snapshot> {
    let (bin, json) = paths(stem);
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let header: SnapshotHeader = serde_json::from_str(&text).map_err(|e| Error::format(&json, e))?;
    if header.format != FORMAT {
        return Err(Error::format(&json, format!("unsupported format `{}`", header.format)));
    }
    let grid = CartesianGrid::build(
        header.grid.lengths(),
        header.grid.counts(),
        header.grid.topology(),
        header.grid.closure(),
    )
    .map_err(|e| Error::format(&json, e))?;
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let n = grid.len();
    let total: usize = header.blocks.iter().map(|b| b.components).sum();
    if bytes.len() != 8 * n * total {
        return Err(Error::format(
            &bin,
            format!("expected {} bytes, found {}", 8 * n * total, bytes.len()),
        ));
    }
    let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let blocks = header
        .blocks
        .iter()
        .map(|b| {
            let comps = (0..b.components).map(|_| values.by_ref().take(n).collect()).collect();
            (b.name.clone(), comps)
        })
        .collect();
    Ok(Snapshot {
        grid,
        time: header.time,
        blocks,
    })
}

/// Snapshot stems in `dir` (files named `snapshot_*.json`), sorted by name.
pub fn list_snapshots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("snapshot_") && !n.ends_with(".meta.json"))
        })
        .map(|p| p.with_extension(""))
        .collect();
    out.sort();
    Ok(out)
}
