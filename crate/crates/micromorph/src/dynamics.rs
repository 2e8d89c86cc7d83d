//! Equations of motion, boundary/initial data, compatibility checking and leapfrog time stepping.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::dispersion;
use crate::energy::{total_energy, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::grid::{CartesianGrid, NodalField, SimulationState, TensorField, VectorField};
use crate::model::{cauchy_stress, micro_stress, MaterialParameters};
use crate::ops::Operators;

/// Time-dependent vector field on the full grid.
pub type VectorSignal = Arc<dyn Fn(f64) -> VectorField + Send + Sync>;
/// Time-dependent tensor field on the full grid.
pub type TensorSignal = Arc<dyn Fn(f64) -> TensorField + Send + Sync>;

/// Face ids: `2·axis` is the low face, `2·axis + 1` the high face.
pub const FACE_NAMES: [&str; 6] = ["x-", "x+", "y-", "y+", "z-", "z+"];

/// Dirichlet displacement data and tangential micro-distortion data.
///
/// `g` is sampled at boundary nodes only. `extension` is a volumetric field whose tangential
/// rows are copied onto the boundary. Faces flagged homogeneous ignore both and pin zero.
#[derive(Clone)]
pub struct BoundaryData {
    pub g: Option<VectorSignal>,
    pub g_rate: Option<VectorSignal>,
    pub extension: Option<TensorSignal>,
    pub extension_rate: Option<TensorSignal>,
    pub homogeneous_faces: [bool; 6],
    /// Step of the centered difference used when a rate is not supplied.
    pub rate_step: f64,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData")
            .field("g", &self.g.is_some())
            .field("g_rate", &self.g_rate.is_some())
            .field("extension", &self.extension.is_some())
            .field("extension_rate", &self.extension_rate.is_some())
            .field("homogeneous_faces", &self.homogeneous_faces)
            .finish()
    }
}

impl Default for BoundaryData {
    fn default() -> Self {
        Self::homogeneous()
    }
}

impl BoundaryData {
    pub fn homogeneous() -> Self {
        Self {
            g: None,
            g_rate: None,
            extension: None,
            extension_rate: None,
            homogeneous_faces: [true; 6],
            rate_step: 1e-4,
        }
    }

    /// Inhomogeneous data on every face.
    pub fn from_signals(g: Option<VectorSignal>, extension: Option<TensorSignal>) -> Self {
        Self {
            g,
            extension,
            homogeneous_faces: [false; 6],
            ..Self::homogeneous()
        }
    }

    pub fn with_rates(mut self, g_rate: Option<VectorSignal>, extension_rate: Option<TensorSignal>) -> Self {
        self.g_rate = g_rate;
        self.extension_rate = extension_rate;
        self
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous_faces.iter().all(|&h| h) || (self.g.is_none() && self.extension.is_none())
    }

    fn displacement(&self, t: f64) -> Option<VectorField> {
        self.g.as_ref().map(|g| g(t))
    }

    fn displacement_rate(&self, t: f64) -> Option<VectorField> {
        match (&self.g_rate, &self.g) {
            (Some(r), _) => Some(r(t)),
            (None, Some(g)) => {
                let d = self.rate_step;
                let mut a = g(t + d);
                a.axpy(-1.0, &g(t - d));
                a.scale(0.5 / d);
                Some(a)
            }
            _ => None,
        }
    }

    fn tangential(&self, t: f64) -> Option<TensorField> {
        self.extension.as_ref().map(|e| e(t))
    }

    fn tangential_rate(&self, t: f64) -> Option<TensorField> {
        match (&self.extension_rate, &self.extension) {
            (Some(r), _) => Some(r(t)),
            (None, Some(e)) => {
                let d = self.rate_step;
                let mut a = e(t + d);
                a.axpy(-1.0, &e(t - d));
                a.scale(0.5 / d);
                Some(a)
            }
            _ => None,
        }
    }
}

/// Body force `f` and body moment `M`; absent terms are zero.
#[derive(Clone, Default)]
pub struct SourceTerms {
    pub f: Option<VectorSignal>,
    pub m: Option<TensorSignal>,
}

impl fmt::Debug for SourceTerms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceTerms")
            .field("f", &self.f.is_some())
            .field("m", &self.m.is_some())
            .finish()
    }
}

impl SourceTerms {
    pub fn none() -> Self {
        Self::default()
    }
}

/// Which nodal degrees of freedom are prescribed by boundary conditions.
///
/// `u` is pinned on every boundary node. Component `P_ij` is pinned on a face with normal
/// `e_k` when `j ≠ k` (the tangential part of row `i`).
#[derive(Debug, Clone)]
pub struct Constraints {
    pub u_pinned: Vec<bool>,
    /// Indexed by column `j`; shared by all rows.
    pub p_pinned: [Vec<bool>; 3],
    u_zero: Vec<bool>,
    p_zero: [Vec<bool>; 3],
}

impl Constraints {
    pub fn new(grid: &CartesianGrid, homogeneous_faces: [bool; 6]) -> Self {
        let n = grid.len();
        let mut c = Self {
            u_pinned: vec![false; n],
            p_pinned: std::array::from_fn(|_| vec![false; n]),
            u_zero: vec![false; n],
            p_zero: std::array::from_fn(|_| vec![false; n]),
        };
        for idx in 0..n {
            for k in 0..3 {
                if let Some(face) = grid.face_on_axis(idx, k) {
                    let zero = homogeneous_faces[face];
                    c.u_pinned[idx] = true;
                    c.u_zero[idx] |= zero;
                    for j in (0..3).filter(|&j| j != k) {
                        c.p_pinned[j][idx] = true;
                        c.p_zero[j][idx] |= zero;
                    }
                }
            }
        }
        c
    }

    pub fn for_data(grid: &CartesianGrid, bc: &BoundaryData) -> Self {
        Self::new(grid, bc.homogeneous_faces)
    }

    /// Zero every prescribed component.
    pub fn mask(&self, u: &mut VectorField, p: &mut TensorField) {
        for c in u.comps.iter_mut() {
            c.par_iter_mut().zip(self.u_pinned.par_iter()).for_each(|(v, &m)| {
                if m {
                    *v = 0.0
                }
            });
        }
        for (a, c) in p.comps.iter_mut().enumerate() {
            c.par_iter_mut().zip(self.p_pinned[a % 3].par_iter()).for_each(|(v, &m)| {
                if m {
                    *v = 0.0
                }
            });
        }
    }

    /// Number of unconstrained scalar unknowns in `(u, P)`.
    pub fn free_count(&self) -> usize {
        3 * self.u_pinned.iter().filter(|&&b| !b).count()
            + 3 * self.p_pinned.iter().map(|m| m.iter().filter(|&&b| !b).count()).sum::<usize>()
    }

    fn copy_u(&self, dst: &mut VectorField, src: Option<&VectorField>) {
        for (a, c) in dst.comps.iter_mut().enumerate() {
            for idx in 0..c.len() {
                if self.u_pinned[idx] {
                    c[idx] = match src {
                        Some(s) if !self.u_zero[idx] => s.comps[a][idx],
                        _ => 0.0,
                    };
                }
            }
        }
    }

    fn copy_p(&self, dst: &mut TensorField, src: Option<&TensorField>) {
        for (a, c) in dst.comps.iter_mut().enumerate() {
            let j = a % 3;
            for idx in 0..c.len() {
                if self.p_pinned[j][idx] {
                    c[idx] = match src {
                        Some(s) if !self.p_zero[j][idx] => s.comps[a][idx],
                        _ => 0.0,
                    };
                }
            }
        }
    }

    /// Overwrite prescribed values and rates with the boundary data at time `t`.
    pub fn impose(&self, bc: &BoundaryData, state: &mut SimulationState, t: f64) {
        if state.grid().is_periodic() {
            return;
        }
        self.copy_u(&mut state.u, bc.displacement(t).as_ref());
        self.copy_u(&mut state.u_t, bc.displacement_rate(t).as_ref());
        self.copy_p(&mut state.p, bc.tangential(t).as_ref());
        self.copy_p(&mut state.p_t, bc.tangential_rate(t).as_ref());
    }
}

/// Accelerations `(u_tt, P_tt)` from the equations of motion at every node (no masking):
///
/// `u_tt = Div σ(∇u − P) + f`,
/// `P_tt = σ(∇u − P) − (2μ_micro sym P + λ_micro tr P Id) − μ_micro L_c² Curl Curl P + M`.
pub fn rhs(
    state: &SimulationState,
    p: &MaterialParameters,
    src: &SourceTerms,
    t: f64,
) -> Result<(VectorField, TensorField)> {
    state.check_consistent()?;
    let ops = Operators::new(state.grid());
    Ok(rhs_with(&ops, state, p, src, t))
}

pub(crate) fn rhs_with(
    ops: &Operators,
    state: &SimulationState,
    p: &MaterialParameters,
    src: &SourceTerms,
    t: f64,
) -> (VectorField, TensorField) {
    let grid = ops.grid;
    let mut e = ops.gradient(&state.u);
    e.axpy(-1.0, &state.p);
    let sigma = e.map(|x| cauchy_stress(p, x));
    let mut a_u = ops.div_tensor(&sigma);
    let cc = ops.curl_tensor(&ops.curl_tensor(&state.p));
    let kappa = p.curvature_modulus();
    let mut a_p = TensorField::zeros(&grid);
    let micro = state.p.map(|x| micro_stress(p, x));
    for a in 0..9 {
        a_p.comps[a]
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = sigma.comps[a][i] - micro.comps[a][i] - kappa * cc.comps[a][i]);
    }
    if let Some(f) = &src.f {
        a_u.axpy(1.0, &f(t));
    }
    if let Some(m) = &src.m {
        a_p.axpy(1.0, &m(t));
    }
    (a_u, a_p)
}

/// `safety · h_min / c_max`, with `c_max` the largest phase speed of the plane-wave
/// matrix over the grid's Nyquist wavevectors.
pub fn cfl_timestep(p: &MaterialParameters, grid: &CartesianGrid, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::InvalidArgument(format!("CFL safety {safety} must lie in (0, 1]")));
    }
    p.validate()?;
    let c = dispersion::max_nyquist_speed(p, grid)?;
    Ok(safety * grid.h_min() / c)
}

/// Kick-drift-kick leapfrog with the acceleration of the last stage cached for the next step.
#[derive(Debug, Clone)]
pub struct Leapfrog {
    pub params: MaterialParameters,
    pub sources: SourceTerms,
    pub bc: BoundaryData,
    pub dt: f64,
    ops: Operators,
    constraints: Option<Constraints>,
    accel: Option<(f64, VectorField, TensorField)>,
}

impl Leapfrog {
    pub fn new(
        grid: &CartesianGrid,
        params: MaterialParameters,
        sources: SourceTerms,
        bc: BoundaryData,
        dt: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
        }
        let constraints = (!grid.is_periodic()).then(|| Constraints::for_data(grid, &bc));
        Ok(Self {
            params,
            sources,
            bc,
            dt,
            ops: Operators::new(grid),
            constraints,
            accel: None,
        })
    }

    pub fn constraints(&self) -> Option<&Constraints> {
        self.constraints.as_ref()
    }

    /// Masked accelerations at the state's time, reusing the cache when valid.
    pub fn accelerations(&mut self, state: &SimulationState) -> (&VectorField, &TensorField) {
        let stale = !matches!(&self.accel, Some((t, _, _)) if *t == state.time);
        if stale {
            let (mut au, mut ap) = rhs_with(&self.ops, state, &self.params, &self.sources, state.time);
            if let Some(c) = &self.constraints {
                c.mask(&mut au, &mut ap);
            }
            self.accel = Some((state.time, au, ap));
        }
        let (_, au, ap) = self.accel.as_ref().expect("cached");
        (au, ap)
    }

    /// Drop the cached acceleration (call after mutating the state externally).
    pub fn invalidate(&mut self) {
        self.accel = None;
    }

    pub fn step(&mut self, state: &mut SimulationState) -> Result<()> {
        let dt = self.dt;
        {
            let (au, ap) = self.accelerations(state);
            state.u_t.axpy(0.5 * dt, au);
            state.p_t.axpy(0.5 * dt, ap);
        }
        state.u.axpy(dt, &state.u_t);
        state.p.axpy(dt, &state.p_t);
        state.time += dt;
        if let Some(c) = &self.constraints {
            c.impose(&self.bc, state, state.time);
        }
        self.accel = None;
        {
            let (au, ap) = self.accelerations(state);
            state.u_t.axpy(0.5 * dt, au);
            state.p_t.axpy(0.5 * dt, ap);
        }
        if !state.all_finite() {
            return Err(Error::Unstable {
                time: state.time,
                diagnosis: format!(
                    "non-finite values after a step of {dt:e}; reduce the CFL safety factor"
                ),
            });
        }
        Ok(())
    }

    /// Energy conserved exactly by the scheme when sources vanish and boundary data are
    /// homogeneous: `E − (dt²/8)(‖u_tt‖² + ‖P_tt‖²)`.
    pub fn discrete_energy(&mut self, state: &SimulationState) -> Result<f64> {
        let e = total_energy(state, &self.params, None)?.total;
        let dt = self.dt;
        let (au, ap) = self.accelerations(state);
        let a2 = crate::grid::l2_norm_squared(au, None)? + crate::grid::l2_norm_squared(ap, None)?;
        Ok(e - dt * dt / 8.0 * a2)
    }
}

/// One leapfrog step from a fresh state (two right-hand-side evaluations).
pub fn step_leapfrog(
    state: &SimulationState,
    p: &MaterialParameters,
    src: &SourceTerms,
    bc: &BoundaryData,
    dt: f64,
) -> Result<SimulationState> {
    let mut lf = Leapfrog::new(state.grid(), *p, src.clone(), bc.clone(), dt)?;
    let mut next = state.clone();
    lf.step(&mut next)?;
    Ok(next)
}

/// Outcome of one compatibility condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub max_violation: f64,
    /// Node index triple with the largest violation.
    pub worst_node: Option<[usize; 3]>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub tolerance: f64,
    pub conditions: Vec<ConditionCheck>,
}

impl CompatibilityReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn violations(&self) -> Vec<&ConditionCheck> {
        self.conditions.iter().filter(|c| !c.passed).collect()
    }
}

/// Checks `u⁽⁰⁾ = g(0)`, `u⁽¹⁾ = g_t(0)`, `P⁽⁰⁾_i × n = G_i(0) × n`, `P⁽¹⁾_i × n = G_{i,t}(0) × n`
/// on boundary nodes in the max norm.
pub fn check_compatibility(
    u0: &VectorField,
    u1: &VectorField,
    p0: &TensorField,
    p1: &TensorField,
    bc: &BoundaryData,
    tol: f64,
) -> Result<CompatibilityReport> {
    let grid = u0.grid;
    grid.check_same(&u1.grid)?;
    grid.check_same(&p0.grid)?;
    grid.check_same(&p1.grid)?;
    let cons = Constraints::for_data(&grid, bc);
    let periodic = grid.is_periodic();

    let mut target = SimulationState::zeros(&grid);
    if !periodic {
        cons.impose(bc, &mut target, 0.0);
    }

    let worst_u = |field: &VectorField, want: &VectorField| -> (f64, Option<[usize; 3]>) {
        let mut best = (0.0, None);
        if periodic {
            return best;
        }
        for idx in (0..grid.len()).filter(|&i| cons.u_pinned[i]) {
            for a in 0..3 {
                let d = (field.comps[a][idx] - want.comps[a][idx]).abs();
                if d > best.0 || (d.is_nan() && best.1.is_none()) {
                    best = (d, Some(grid.coords(idx)));
                }
            }
        }
        best
    };
    let worst_p = |field: &TensorField, want: &TensorField| -> (f64, Option<[usize; 3]>) {
        let mut best = (0.0, None);
        if periodic {
            return best;
        }
        for idx in 0..grid.len() {
            for a in 0..9 {
                if !cons.p_pinned[a % 3][idx] {
                    continue;
                }
                let d = (field.comps[a][idx] - want.comps[a][idx]).abs();
                if d > best.0 || (d.is_nan() && best.1.is_none()) {
                    best = (d, Some(grid.coords(idx)));
                }
            }
        }
        best
    };

    let mut conditions = Vec::new();
    let mut push = |name: &str, (v, node): (f64, Option<[usize; 3]>)| {
        conditions.push(ConditionCheck {
            name: name.to_string(),
            max_violation: v,
            worst_node: node,
            passed: v <= tol,
        });
    };
    push("u0 = g(0)", worst_u(u0, &target.u));
    push("u1 = g_t(0)", worst_u(u1, &target.u_t));
    push("P0_i x n = G_i(0) x n", worst_p(p0, &target.p));
    push("P1_i x n = G_i,t(0) x n", worst_p(p1, &target.p_t));
    Ok(CompatibilityReport {
        tolerance: tol,
        conditions,
    })
}

/// Inputs of a time-domain run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub initial: SimulationState,
    pub params: MaterialParameters,
    pub sources: SourceTerms,
    pub bc: BoundaryData,
    pub t_final: f64,
    pub dt: f64,
    pub record_every: usize,
    /// Keep a copy of the state at every recorded time.
    pub keep_states: bool,
    /// Tolerance of the initial compatibility check (`None` skips it).
    pub compatibility_tol: Option<f64>,
}

/// Recorded energy series and (optionally) states.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub dt: f64,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub energies: Vec<EnergyBreakdown>,
    /// Leapfrog-conserved energy at the recorded times.
    pub discrete_energies: Vec<f64>,
    pub states: Vec<SimulationState>,
}

/// Integrate from `t = 0` to `t_final` with a step no larger than `spec.dt`, landing exactly on `t_final`.
pub fn run_simulation(spec: &RunSpec) -> Result<Trajectory> {
    spec.initial.check_consistent()?;
    if spec.record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be >= 1".into()));
    }
    if !(spec.t_final >= 0.0 && spec.t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time {} must be >= 0", spec.t_final)));
    }
    let grid = *spec.initial.grid();
    let steps = if spec.t_final == 0.0 { 0 } else { (spec.t_final / spec.dt).ceil() as usize };
    let dt = if steps == 0 { spec.dt } else { spec.t_final / steps as f64 };
    let mut lf = Leapfrog::new(&grid, spec.params, spec.sources.clone(), spec.bc.clone(), dt)?;

    if let Some(tol) = spec.compatibility_tol {
        let s = &spec.initial;
        let rep = check_compatibility(&s.u, &s.u_t, &s.p, &s.p_t, &spec.bc, tol)?;
        if let Some(bad) = rep.violations().first() {
            return Err(Error::InvalidArgument(format!(
                "initial data violate compatibility condition `{}` by {:e} at node {:?}",
                bad.name, bad.max_violation, bad.worst_node
            )));
        }
    }

    let mut state = spec.initial.clone();
    state.time = 0.0;
    let mut traj = Trajectory {
        dt,
        ..Default::default()
    };
    let mut record = |n: usize, s: &SimulationState, lf: &mut Leapfrog| -> Result<()> {
        traj.steps.push(n);
        traj.times.push(s.time);
        traj.energies.push(total_energy(s, &spec.params, None)?);
        traj.discrete_energies.push(lf.discrete_energy(s)?);
        if spec.keep_states {
            traj.states.push(s.clone());
        }
        Ok(())
    };
    record(0, &state, &mut lf)?;
    for n in 1..=steps {
        lf.step(&mut state)?;
        if n == steps {
            state.time = spec.t_final;
            lf.invalidate();
        }
        if n % spec.record_every == 0 || n == steps {
            record(n, &state, &mut lf)?;
        }
    }
    Ok(traj)
}
