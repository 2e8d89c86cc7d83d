//! Box domain, node lattice, nodal field containers and trapezoidal quadrature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Tensor3;

/// Boundary handling of the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Nodes on both faces of every axis; fields are constrained there.
    #[default]
    Bounded,
    /// Wraparound along every axis; node `n` coincides with node `0`.
    Periodic,
}

/// Closure rows of the first-derivative matrix on bounded axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryClosure {
    /// First-order one-sided rows; together with trapezoid weights the operator
    /// satisfies summation by parts.
    #[default]
    SummationByParts,
    /// Three-point second-order one-sided rows.
    OneSidedSecondOrder,
}

/// Axis-aligned box `[0, L_x] × [0, L_y] × [0, L_z]` sampled on a uniform node lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianGrid {
    lengths: [f64; 3],
    counts: [usize; 3],
    topology: Topology,
    closure: BoundaryClosure,
}

impl CartesianGrid {
    /// Bounded grid with the default closure.
    pub fn new(lengths: [f64; 3], counts: [usize; 3]) -> Result<Self> {
        Self::build(lengths, counts, Topology::Bounded, BoundaryClosure::default())
    }

    pub fn periodic(lengths: [f64; 3], counts: [usize; 3]) -> Result<Self> {
        Self::build(lengths, counts, Topology::Periodic, BoundaryClosure::default())
    }

    pub fn build(
        lengths: [f64; 3],
        counts: [usize; 3],
        topology: Topology,
        closure: BoundaryClosure,
    ) -> Result<Self> {
        for a in 0..3 {
            if !(lengths[a].is_finite() && lengths[a] > 0.0) {
                return Err(Error::InvalidGrid(format!("lengths[{a}] = {} must be > 0", lengths[a])));
            }
            if counts[a] < 4 {
                return Err(Error::InvalidGrid(format!("counts[{a}] = {} must be >= 4", counts[a])));
            }
        }
        Ok(Self {
            lengths,
            counts,
            topology,
            closure,
        })
    }

    /// Unit cube with `n` nodes per axis.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new([1.0; 3], [n; 3])
    }

    pub fn with_closure(mut self, closure: BoundaryClosure) -> Self {
        self.closure = closure;
        self
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn closure(&self) -> BoundaryClosure {
        self.closure
    }

    pub fn is_periodic(&self) -> bool {
        self.topology == Topology::Periodic
    }

    pub fn spacing(&self) -> [f64; 3] {
        let mut h = [0.0; 3];
        for a in 0..3 {
            h[a] = match self.topology {
                Topology::Bounded => self.lengths[a] / (self.counts[a] - 1) as f64,
                Topology::Periodic => self.lengths[a] / self.counts[a] as f64,
            };
        }
        h
    }

    pub fn h_min(&self) -> f64 {
        let h = self.spacing();
        h[0].min(h[1]).min(h[2])
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes per z-plane.
    pub fn plane_len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.counts[0],
            _ => self.counts[0] * self.counts[1],
        }
    }

    /// Flat index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.counts[0] * (j + self.counts[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.counts[0];
        let ny = self.counts[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let h = self.spacing();
        [c[0] as f64 * h[0], c[1] as f64 * h[1], c[2] as f64 * h[2]]
    }

    /// For each axis, whether the node lies on a face with that normal.
    #[inline]
    pub fn face_normals(&self, idx: usize) -> [bool; 3] {
        if self.is_periodic() {
            return [false; 3];
        }
        let c = self.coords(idx);
        [0, 1, 2].map(|a| c[a] == 0 || c[a] + 1 == self.counts[a])
    }

    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        self.face_normals(idx).iter().any(|&b| b)
    }

    /// Face id of a node along `axis`: `Some(2·axis)` on the low face, `Some(2·axis+1)` on the high face.
    #[inline]
    pub fn face_on_axis(&self, idx: usize, axis: usize) -> Option<usize> {
        if self.is_periodic() {
            return None;
        }
        let c = self.coords(idx)[axis];
        if c == 0 {
            Some(2 * axis)
        } else if c + 1 == self.counts[axis] {
            Some(2 * axis + 1)
        } else {
            None
        }
    }

    /// One-dimensional quadrature weights along `axis`.
    pub fn weights_1d(&self, axis: usize) -> Vec<f64> {
        let n = self.counts[axis];
        let h = self.spacing()[axis];
        let mut w = vec![h; n];
        if !self.is_periodic() {
            w[0] *= 0.5;
            w[n - 1] *= 0.5;
        }
        w
    }

    /// Product trapezoid weight of every node.
    pub fn weights(&self) -> Vec<f64> {
        let w = [self.weights_1d(0), self.weights_1d(1), self.weights_1d(2)];
        (0..self.len())
            .map(|idx| {
                let c = self.coords(idx);
                w[0][c[0]] * w[1][c[1]] * w[2][c[2]]
            })
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Closed sub-box of nodes whose coordinates lie in `[lo, hi]` (tolerance 1e-9 spacing).
    pub fn node_box(&self, lo: [f64; 3], hi: [f64; 3]) -> Result<NodeBox> {
        let h = self.spacing();
        let mut first = [0; 3];
        let mut last = [0; 3];
        for a in 0..3 {
            let eps = 1e-9 * h[a];
            let f = ((lo[a] - eps) / h[a]).ceil().max(0.0) as usize;
            let l = ((hi[a] + eps) / h[a]).floor();
            if l < 0.0 {
                return Err(Error::InvalidArgument(format!("box on axis {a} lies outside the grid")));
            }
            let l = (l as usize).min(self.counts[a] - 1);
            if l <= f {
                return Err(Error::InvalidArgument(format!(
                    "box [{}, {}] on axis {a} contains fewer than two nodes",
                    lo[a], hi[a]
                )));
            }
            first[a] = f;
            last[a] = l;
        }
        Ok(NodeBox { first, last })
    }

    pub(crate) fn check_same(&self, other: &CartesianGrid) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch(format!(
                "grid {:?} differs from {:?}",
                self.counts, other.counts
            )));
        }
        Ok(())
    }
}

/// Inclusive index range `first..=last` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeBox {
    pub first: [usize; 3],
    pub last: [usize; 3],
}

impl NodeBox {
    pub fn contains(&self, c: [usize; 3]) -> bool {
        (0..3).all(|a| c[a] >= self.first[a] && c[a] <= self.last[a])
    }

    /// Trapezoid weight of node `c` on the sub-lattice (zero outside).
    pub fn weight(&self, grid: &CartesianGrid, c: [usize; 3]) -> f64 {
        let h = grid.spacing();
        let mut w = 1.0;
        for a in 0..3 {
            if c[a] < self.first[a] || c[a] > self.last[a] {
                return 0.0;
            }
            w *= if c[a] == self.first[a] || c[a] == self.last[a] { 0.5 * h[a] } else { h[a] };
        }
        w
    }
}

/// Deterministic parallel sum of `f(idx)` over all nodes: planes in parallel, fixed reduction order.
pub fn sum_nodes(grid: &CartesianGrid, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let plane = grid.plane_len();
    let partial: Vec<f64> = (0..grid.counts()[2])
        .into_par_iter()
        .map(|k| {
            let mut s = 0.0;
            for idx in k * plane..(k + 1) * plane {
                s += f(idx);
            }
            s
        })
        .collect();
    partial.iter().sum()
}

/// Trapezoid-rule integral of the nodal function `f(idx)`.
pub fn integrate_with(grid: &CartesianGrid, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let w = [grid.weights_1d(0), grid.weights_1d(1), grid.weights_1d(2)];
    sum_nodes(grid, |idx| {
        let c = grid.coords(idx);
        w[0][c[0]] * w[1][c[1]] * w[2][c[2]] * f(idx)
    })
}

/// Trapezoid-rule integral over a closed node sub-box.
pub fn integrate_over(grid: &CartesianGrid, bx: &NodeBox, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    sum_nodes(grid, |idx| {
        let c = grid.coords(idx);
        let w = bx.weight(grid, c);
        if w == 0.0 {
            0.0
        } else {
            w * f(idx)
        }
    })
}

/// Common access to component arrays of nodal fields.
pub trait NodalField: Clone + Send + Sync {
    const COMPONENTS: usize;

    fn grid(&self) -> &CartesianGrid;
    fn components(&self) -> &[Vec<f64>];
    fn components_mut(&mut self) -> &mut [Vec<f64>];
    fn zeros(grid: &CartesianGrid) -> Self;

    /// self += alpha · other
    fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.components_mut().iter_mut().zip(other.components()) {
            a.par_iter_mut().zip(b.par_iter()).for_each(|(x, y)| *x += alpha * y);
        }
    }

    fn scale(&mut self, alpha: f64) {
        for c in self.components_mut() {
            c.par_iter_mut().for_each(|x| *x *= alpha);
        }
    }

    fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// Multiply every component nodewise by `w`.
    fn weighted(&self, w: &ScalarField) -> Self {
        let mut out = self.clone();
        for c in out.components_mut() {
            c.par_iter_mut().zip(w.data.par_iter()).for_each(|(x, y)| *x *= y);
        }
        out
    }

    fn max_abs(&self) -> f64 {
        self.components()
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn all_finite(&self) -> bool {
        self.components().iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Pointwise squared Euclidean/Frobenius norm at `idx`.
    fn norm_squared_at(&self, idx: usize) -> f64 {
        self.components().iter().map(|c| c[idx] * c[idx]).sum()
    }

    /// Flattened copy, component-major.
    fn to_vec(&self) -> Vec<f64> {
        self.components().iter().flat_map(|c| c.iter().copied()).collect()
    }

    fn from_slice(grid: &CartesianGrid, data: &[f64]) -> Self {
        let mut out = Self::zeros(grid);
        let n = grid.len();
        for (c, comp) in out.components_mut().iter_mut().enumerate() {
            comp.copy_from_slice(&data[c * n..(c + 1) * n]);
        }
        out
    }

    /// From per-component arrays, checking their number and lengths.
    fn from_components(grid: &CartesianGrid, comps: &[Vec<f64>]) -> Result<Self> {
        if comps.len() != Self::COMPONENTS || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::ShapeMismatch(format!(
                "expected {} components of {} nodes",
                Self::COMPONENTS,
                grid.len()
            )));
        }
        let mut out = Self::zeros(grid);
        for (o, c) in out.components_mut().iter_mut().zip(comps) {
            o.copy_from_slice(c);
        }
        Ok(out)
    }
}

/// Real value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: CartesianGrid,
    pub data: Vec<f64>,
}

/// 3-vector per node, stored as three component arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: CartesianGrid,
    pub comps: [Vec<f64>; 3],
}

/// 3×3 tensor per node, stored as nine component arrays in row-major order (`3 i + j`).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub grid: CartesianGrid,
    pub comps: [Vec<f64>; 9],
}

impl NodalField for ScalarField {
    const COMPONENTS: usize = 1;
    fn grid(&self) -> &CartesianGrid {
        &self.grid
    }
    fn components(&self) -> &[Vec<f64>] {
        std::slice::from_ref(&self.data)
    }
    fn components_mut(&mut self) -> &mut [Vec<f64>] {
        std::slice::from_mut(&mut self.data)
    }
    fn zeros(grid: &CartesianGrid) -> Self {
        Self {
            grid: *grid,
            data: vec![0.0; grid.len()],
        }
    }
}

impl NodalField for VectorField {
    const COMPONENTS: usize = 3;
    fn grid(&self) -> &CartesianGrid {
        &self.grid
    }
    fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }
    fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.comps
    }
    fn zeros(grid: &CartesianGrid) -> Self {
        Self {
            grid: *grid,
            comps: std::array::from_fn(|_| vec![0.0; grid.len()]),
        }
    }
}

impl NodalField for TensorField {
    const COMPONENTS: usize = 9;
    fn grid(&self) -> &CartesianGrid {
        &self.grid
    }
    fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }
    fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.comps
    }
    fn zeros(grid: &CartesianGrid) -> Self {
        Self {
            grid: *grid,
            comps: std::array::from_fn(|_| vec![0.0; grid.len()]),
        }
    }
}

impl ScalarField {
    pub fn from_fn(grid: &CartesianGrid, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        let data = (0..grid.len()).into_par_iter().map(|i| f(grid.position(i))).collect();
        Self { grid: *grid, data }
    }

    pub fn constant(grid: &CartesianGrid, v: f64) -> Self {
        Self {
            grid: *grid,
            data: vec![v; grid.len()],
        }
    }
}

impl VectorField {
    pub fn from_fn(grid: &CartesianGrid, f: impl Fn([f64; 3]) -> [f64; 3] + Sync) -> Self {
        let vals: Vec<[f64; 3]> = (0..grid.len()).into_par_iter().map(|i| f(grid.position(i))).collect();
        let mut out = Self::zeros(grid);
        for (idx, v) in vals.iter().enumerate() {
            out.set(idx, *v);
        }
        out
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: [f64; 3]) {
        for (c, x) in v.iter().enumerate() {
            self.comps[c][idx] = *x;
        }
    }
}

impl TensorField {
    pub fn from_fn(grid: &CartesianGrid, f: impl Fn([f64; 3]) -> Tensor3 + Sync) -> Self {
        let vals: Vec<Tensor3> = (0..grid.len()).into_par_iter().map(|i| f(grid.position(i))).collect();
        let mut out = Self::zeros(grid);
        for (idx, v) in vals.iter().enumerate() {
            out.set(idx, v);
        }
        out
    }

    #[inline]
    pub fn at(&self, idx: usize) -> Tensor3 {
        Tensor3::from_fn(|i, j| self.comps[3 * i + j][idx])
    }

    #[inline]
    pub fn set(&mut self, idx: usize, t: &Tensor3) {
        for i in 0..3 {
            for j in 0..3 {
                self.comps[3 * i + j][idx] = t.0[i][j];
            }
        }
    }

    /// Nodewise map over tensors.
    pub fn map(&self, f: impl Fn(&Tensor3) -> Tensor3 + Sync) -> Self {
        let vals: Vec<Tensor3> = (0..self.grid.len()).into_par_iter().map(|i| f(&self.at(i))).collect();
        let mut out = Self::zeros(&self.grid);
        for (idx, v) in vals.iter().enumerate() {
            out.set(idx, v);
        }
        out
    }

    /// View of row `i` as a vector field (copy).
    pub fn row(&self, i: usize) -> VectorField {
        VectorField {
            grid: self.grid,
            comps: std::array::from_fn(|j| self.comps[3 * i + j].clone()),
        }
    }
}

/// Node-sampled state `(u, u_t, P, P_t)` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub time: f64,
    pub u: VectorField,
    pub u_t: VectorField,
    pub p: TensorField,
    pub p_t: TensorField,
}

impl SimulationState {
    pub fn zeros(grid: &CartesianGrid) -> Self {
        Self {
            time: 0.0,
            u: VectorField::zeros(grid),
            u_t: VectorField::zeros(grid),
            p: TensorField::zeros(grid),
            p_t: TensorField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.u.grid
    }

    pub fn check_consistent(&self) -> Result<()> {
        let g = self.u.grid;
        g.check_same(&self.u_t.grid)?;
        g.check_same(&self.p.grid)?;
        g.check_same(&self.p_t.grid)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            time: self.time,
            u: self.u.scaled(alpha),
            u_t: self.u_t.scaled(alpha),
            p: self.p.scaled(alpha),
            p_t: self.p_t.scaled(alpha),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.u.all_finite() && self.u_t.all_finite() && self.p.all_finite() && self.p_t.all_finite()
    }
}

/// Trapezoidal integral of a scalar field over the box.
pub fn integrate_scalar(f: &ScalarField) -> f64 {
    integrate_with(&f.grid, |i| f.data[i])
}

/// `∫ w² |F|²` (or `∫ |F|²` without weight) for any nodal field.
pub fn l2_norm_squared<F: NodalField>(field: &F, weight: Option<&ScalarField>) -> Result<f64> {
    if let Some(w) = weight {
        field.grid().check_same(&w.grid)?;
    }
    Ok(integrate_with(field.grid(), |i| {
        let s = field.norm_squared_at(i);
        match weight {
            Some(w) => w.data[i] * w.data[i] * s,
            None => s,
        }
    }))
}
