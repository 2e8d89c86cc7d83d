//! JSON run configuration: parsing, cross-validation and assembly of run inputs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{cfl_timestep, BoundaryData, RunSpec, SourceTerms};
use crate::error::{ConfigViolation, Error, Result};
use crate::grid::{BoundaryClosure, CartesianGrid, SimulationState, Topology};
use crate::initial::{random_modes, standing_wave, RandomModes};
use crate::mms::{manufactured_case, CATALOG};
use crate::model::MaterialParameters;
use crate::probe::CutoffSpec;
use crate::snapshot::read_snapshot;

pub const DEFAULT_SEED: u64 = 0x5eed_cafe;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "unit_lengths")]
    pub lengths: [f64; 3],
    pub counts: [usize; 3],
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub closure: BoundaryClosure,
}

fn unit_lengths() -> [f64; 3] {
    [1.0; 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub cfl_safety: f64,
    /// Explicit step; capped by the stability limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub record_every: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            cfl_safety: 0.5,
            dt: None,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BcMode {
    #[default]
    Homogeneous,
    Extension,
}

/// Boundary data. In `extension` mode, `g` names a snapshot with a vector block `g` and
/// `extension` one with a tensor block `G`; both are held constant in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    #[serde(default)]
    pub mode: BcMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Zero,
    StandingWave {
        #[serde(default = "default_amplitude")]
        amplitude: [f64; 3],
        #[serde(default = "default_modes")]
        modes: [usize; 3],
    },
    RandomModes {
        #[serde(default)]
        max_mode: Option<usize>,
        #[serde(default)]
        count: Option<usize>,
        #[serde(default)]
        amplitude: Option<f64>,
        #[serde(default)]
        with_velocity: Option<bool>,
    },
    Snapshot {
        path: PathBuf,
    },
}

fn default_amplitude() -> [f64; 3] {
    [1.0, 0.6, -0.4]
}

fn default_modes() -> [usize; 3] {
    [1, 1, 1]
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Zero
    }
}

/// Either a manufactured case (which then also fixes initial and boundary data) or static field files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SourcesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub cutoff: CutoffSpec,
    #[serde(default = "all_axes")]
    pub axes: Vec<usize>,
    /// Physical steps; each must be a lattice multiple along every probed axis.
    pub h: Vec<f64>,
}

fn all_axes() -> Vec<usize> {
    vec![0, 1, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    pub direction: [f64; 3],
    /// Defaults to the Nyquist wavenumber of the grid along `direction`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
    pub samples: usize,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self {
            direction: [1.0, 0.0, 0.0],
            k_max: None,
            samples: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    /// Write a snapshot every this many steps (0: none). Recorded steps only.
    #[serde(default)]
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub parameters: MaterialParameters,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub bc: BcConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<SourcesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    #[serde(default)]
    pub dispersion: DispersionConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn pointer_for_violation(v: &str) -> String {
    const FIELDS: [(&str, &str); 6] = [
        ("mu_e", "mu_e"),
        ("mu_c", "mu_c"),
        ("mu_micro", "mu_micro"),
        ("L_c", "L_c"),
        ("lambda_e", "lambda_e"),
        ("lambda_micro", "lambda_micro"),
    ];
    FIELDS
        .iter()
        .find(|(name, _)| v.starts_with(&format!("{name} ")))
        .map(|(_, f)| format!("/parameters/{f}"))
        .unwrap_or_else(|| "/parameters".to_string())
}

impl RunConfig {
    /// Minimal homogeneous configuration on an `n³` unit cube with the reference parameters.
    pub fn minimal(n: usize) -> Self {
        Self {
            grid: GridConfig {
                lengths: unit_lengths(),
                counts: [n; 3],
                topology: Topology::Bounded,
                closure: BoundaryClosure::default(),
            },
            parameters: MaterialParameters::reference(),
            time: TimeConfig::default(),
            bc: BcConfig::default(),
            initial: InitialConfig::Zero,
            sources: None,
            probe: None,
            dispersion: DispersionConfig::default(),
            outputs: OutputConfig::default(),
            seed: DEFAULT_SEED,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(vec![ConfigViolation {
                pointer: String::new(),
                message: e.to_string(),
            }])
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<CartesianGrid> {
        let g = &self.grid;
        CartesianGrid::build(g.lengths, g.counts, g.topology, g.closure)
    }

    fn manufactured(&self) -> Option<&str> {
        self.sources.as_ref().and_then(|s| s.catalog.as_deref())
    }

    /// All violated constraints, each located by a JSON pointer.
    pub fn violations(&self) -> Vec<ConfigViolation> {
        let mut out = Vec::new();
        let mut push = |pointer: &str, message: String| {
            out.push(ConfigViolation {
                pointer: pointer.to_string(),
                message,
            })
        };
        for v in self.parameters.violations() {
            push(&pointer_for_violation(&v), format!("admissibility requires {v}"));
        }
        let grid = match self.grid() {
            Ok(g) => Some(g),
            Err(e) => {
                push("/grid", e.to_string());
                None
            }
        };
        let t = &self.time;
        if !(t.t_final >= 0.0 && t.t_final.is_finite()) {
            push("/time/T", format!("final time {} must be finite and >= 0", t.t_final));
        }
        if !(t.cfl_safety > 0.0 && t.cfl_safety <= 1.0) {
            push("/time/cfl_safety", format!("{} must lie in (0, 1]", t.cfl_safety));
        }
        if let Some(dt) = t.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                push("/time/dt", format!("{dt} must be positive"));
            }
        }
        if t.record_every == 0 {
            push("/time/record_every", "must be >= 1".into());
        }
        let periodic = self.grid.topology == Topology::Periodic;
        match self.bc.mode {
            BcMode::Homogeneous => {
                if self.bc.g.is_some() || self.bc.extension.is_some() {
                    push("/bc/mode", "data files require mode `extension`".into());
                }
            }
            BcMode::Extension => {
                if periodic {
                    push("/bc/mode", "periodic grids take no boundary data".into());
                }
                if self.bc.g.is_none() && self.bc.extension.is_none() {
                    push("/bc", "mode `extension` needs `g` and/or `extension`".into());
                }
            }
        }
        if let Some(s) = &self.sources {
            match (&s.catalog, s.f.is_some() || s.m.is_some()) {
                (Some(_), true) => push("/sources", "give either `catalog` or field files, not both".into()),
                (None, false) => push("/sources", "empty sources section".into()),
                _ => {}
            }
            if let Some(c) = &s.catalog {
                if !CATALOG.contains(&c.as_str()) {
                    push("/sources/catalog", format!("unknown case `{c}`; expected one of {CATALOG:?}"));
                }
                if periodic {
                    push("/sources/catalog", "manufactured cases need a bounded grid".into());
                }
                if self.initial != InitialConfig::Zero {
                    push("/initial", "manufactured cases fix the initial data; omit `initial`".into());
                }
                if self.bc.mode != BcMode::Homogeneous {
                    push("/bc", "manufactured cases fix the boundary data; omit `bc`".into());
                }
            }
        }
        if let InitialConfig::StandingWave { modes, .. } = &self.initial {
            if modes.contains(&0) {
                push("/initial/modes", "mode numbers must be >= 1".into());
            }
        }
        if let InitialConfig::RandomModes { max_mode: Some(0), .. } = &self.initial {
            push("/initial/max_mode", "must be >= 1".into());
        }
        if let (Some(pr), Some(g)) = (&self.probe, grid.as_ref()) {
            if let Err(e) = pr.cutoff.validate(g) {
                push("/probe/cutoff", e.to_string());
            }
            for (i, &a) in pr.axes.iter().enumerate() {
                if a > 2 {
                    push(&format!("/probe/axes/{i}"), format!("axis {a} out of range"));
                }
            }
            if pr.h.is_empty() {
                push("/probe/h", "at least one step required".into());
            }
            for (i, &h) in pr.h.iter().enumerate() {
                for &a in pr.axes.iter().filter(|&&a| a <= 2) {
                    if let Err(e) = crate::probe::DifferenceQuotient::new(g, a, h, Some(&pr.cutoff)) {
                        push(&format!("/probe/h/{i}"), format!("h = {h}: {e}"));
                        break;
                    }
                }
            }
        }
        let d = &self.dispersion;
        if !(d.direction.iter().map(|v| v * v).sum::<f64>() > 0.0) {
            push("/dispersion/direction", "direction must be nonzero".into());
        }
        if d.samples < 2 {
            push("/dispersion/samples", "at least two samples".into());
        }
        if let Some(k) = d.k_max {
            if !(k > 0.0 && k.is_finite()) {
                push("/dispersion/k_max", format!("{k} must be positive"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Upper end of the dispersion sweep.
    pub fn dispersion_k_max(&self) -> Result<f64> {
        if let Some(k) = self.dispersion.k_max {
            return Ok(k);
        }
        let g = self.grid()?;
        let h = g.spacing();
        let d = self.dispersion.direction;
        let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        // Largest |k| along d with every component within the Nyquist range.
        Ok((0..3)
            .filter(|&a| d[a] != 0.0)
            .map(|a| std::f64::consts::PI / h[a] * n / d[a].abs())
            .fold(f64::INFINITY, f64::min))
    }

    /// Initial state, sources, boundary data and step.
    pub fn run_spec(&self, base: &Path) -> Result<RunSpec> {
        self.validate()?;
        let grid = self.grid()?;
        let p = self.parameters;
        let mut dt = cfl_timestep(&p, &grid, self.time.cfl_safety)?;
        if let Some(d) = self.time.dt {
            dt = dt.min(d);
        }
        let resolve = |q: &Path| if q.is_absolute() { q.to_path_buf() } else { base.join(q) };
        let (initial, sources, bc) = if let Some(name) = self.manufactured() {
            let case = manufactured_case(name, &p, grid.lengths())?;
            let sc = case.on_grid(&grid)?;
            (sc.state(0.0), sc.sources(), sc.boundary())
        } else {
            let initial = match &self.initial {
                InitialConfig::Zero => SimulationState::zeros(&grid),
                InitialConfig::StandingWave { amplitude, modes } => standing_wave(&grid, *amplitude, *modes),
                InitialConfig::RandomModes {
                    max_mode,
                    count,
                    amplitude,
                    with_velocity,
                } => {
                    let d = RandomModes::default();
                    random_modes(
                        &grid,
                        &RandomModes {
                            seed: self.seed,
                            max_mode: max_mode.unwrap_or(d.max_mode),
                            count: count.unwrap_or(d.count),
                            amplitude: amplitude.unwrap_or(d.amplitude),
                            with_velocity: with_velocity.unwrap_or(d.with_velocity),
                        },
                    )
                }
                InitialConfig::Snapshot { path } => {
                    let s = read_snapshot(&resolve(path))?;
                    if s.grid != grid {
                        return Err(Error::ShapeMismatch(format!(
                            "snapshot {} lives on a different grid",
                            path.display()
                        )));
                    }
                    s.state()?
                }
            };
            let mut sources = SourceTerms::none();
            if let Some(s) = &self.sources {
                if let Some(f) = &s.f {
                    let field = Arc::new(read_snapshot(&resolve(f))?.vector("f")?);
                    sources.f = Some(Arc::new(move |_| (*field).clone()));
                }
                if let Some(m) = &s.m {
                    let field = Arc::new(read_snapshot(&resolve(m))?.tensor("M")?);
                    sources.m = Some(Arc::new(move |_| (*field).clone()));
                }
            }
            let bc = match self.bc.mode {
                BcMode::Homogeneous => BoundaryData::homogeneous(),
                BcMode::Extension => {
                    let g = match &self.bc.g {
                        Some(q) => {
                            let v = Arc::new(read_snapshot(&resolve(q))?.vector("g")?);
                            Some(Arc::new(move |_| (*v).clone()) as crate::dynamics::VectorSignal)
                        }
                        None => None,
                    };
                    let e = match &self.bc.extension {
                        Some(q) => {
                            let v = Arc::new(read_snapshot(&resolve(q))?.tensor("G")?);
                            Some(Arc::new(move |_| (*v).clone()) as crate::dynamics::TensorSignal)
                        }
                        None => None,
                    };
                    BoundaryData::from_signals(g, e)
                }
            };
            (initial, sources, bc)
        };
        Ok(RunSpec {
            initial,
            params: p,
            sources,
            bc,
            t_final: self.time.t_final,
            dt,
            record_every: self.time.record_every,
            keep_states: self.outputs.snapshot_every > 0,
            compatibility_tol: Some(1e-8),
        })
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_json_str(&text)
}
