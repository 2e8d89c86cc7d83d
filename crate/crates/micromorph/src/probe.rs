//! Cutoff functions, difference quotients and the localized-energy h-sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_densities, integrate_parts, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::grid::{integrate_over, CartesianGrid, NodalField, ScalarField, SimulationState};
use crate::model::MaterialParameters;
use crate::ops::Operators;

/// Axis-aligned box given by its corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

/// Nested boxes `V ⋐ U ⋐ Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub inner: Box3,
    pub outer: Box3,
}

/// Steepest slope of the quintic smoothstep on a unit ramp.
pub const SMOOTHSTEP_SLOPE: f64 = 15.0 / 8.0;

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

impl CutoffSpec {
    pub fn new(inner: Box3, outer: Box3) -> Self {
        Self { inner, outer }
    }

    /// Same inner/outer interval on every axis.
    pub fn cube(outer: (f64, f64), inner: (f64, f64)) -> Self {
        Self {
            inner: Box3 {
                lo: [inner.0; 3],
                hi: [inner.1; 3],
            },
            outer: Box3 {
                lo: [outer.0; 3],
                hi: [outer.1; 3],
            },
        }
    }

    /// Requires at least two spacings between `V` and `∂U` and one spacing between `U` and `∂Ω`.
    pub fn validate(&self, grid: &CartesianGrid) -> Result<()> {
        let h = grid.spacing();
        let l = grid.lengths();
        let eps = 1e-9;
        for a in 0..3 {
            let (u, v) = (&self.outer, &self.inner);
            if !(v.lo[a] < v.hi[a]) {
                return Err(Error::InvalidCutoff(format!("inner box is empty on axis {a}")));
            }
            if u.lo[a] < h[a] * (1.0 - eps) || u.hi[a] > l[a] - h[a] * (1.0 - eps) {
                return Err(Error::InvalidCutoff(format!(
                    "outer box [{}, {}] on axis {a} is closer than one spacing to the domain boundary",
                    u.lo[a], u.hi[a]
                )));
            }
            let margin = (v.lo[a] - u.lo[a]).min(u.hi[a] - v.hi[a]);
            if margin < 2.0 * h[a] * (1.0 - eps) {
                return Err(Error::InvalidCutoff(format!(
                    "margin {margin} between inner and outer box on axis {a} is thinner than two spacings ({})",
                    2.0 * h[a]
                )));
            }
        }
        Ok(())
    }

    /// Smallest distance between `V` and `∂U` over the axes.
    pub fn min_margin(&self) -> f64 {
        (0..3)
            .map(|a| (self.inner.lo[a] - self.outer.lo[a]).min(self.outer.hi[a] - self.inner.hi[a]))
            .fold(f64::INFINITY, f64::min)
    }

    /// One-dimensional cutoff factor along `axis`.
    pub fn eta_1d(&self, axis: usize, x: f64) -> f64 {
        let (ul, vl, vh, uh) = (self.outer.lo[axis], self.inner.lo[axis], self.inner.hi[axis], self.outer.hi[axis]);
        if x <= ul || x >= uh {
            0.0
        } else if x < vl {
            smoothstep((x - ul) / (vl - ul))
        } else if x > vh {
            smoothstep((uh - x) / (uh - vh))
        } else {
            1.0
        }
    }
}

/// `η = 1` on `V`, `0` outside `U`: product over axes of quintic smoothstep ramps.
pub fn cutoff_eta(grid: &CartesianGrid, spec: &CutoffSpec) -> Result<ScalarField> {
    spec.validate(grid)?;
    Ok(ScalarField::from_fn(grid, |x| {
        spec.eta_1d(0, x[0]) * spec.eta_1d(1, x[1]) * spec.eta_1d(2, x[2])
    }))
}

/// Forward difference quotient `(φ(x + h e_k) − φ(x))/h` with `h = m·spacing[k]`.
/// Nodes whose shifted partner leaves a bounded grid receive 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceQuotient {
    pub grid: CartesianGrid,
    pub axis: usize,
    pub multiple: usize,
    pub h: f64,
}

impl DifferenceQuotient {
    /// Rejects non-lattice steps and, given a cutoff, steps that push `U` off the grid.
    pub fn new(grid: &CartesianGrid, axis: usize, h: f64, spec: Option<&CutoffSpec>) -> Result<Self> {
        if axis > 2 {
            return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
        }
        let dx = grid.spacing()[axis];
        let m = (h / dx).round();
        if !(h > 0.0) || m < 1.0 || (h / dx - m).abs() > 1e-9 * m {
            return Err(Error::InvalidStep(format!(
                "h = {h} is not a positive multiple of the spacing {dx} on axis {axis}"
            )));
        }
        let m = m as usize;
        if !grid.is_periodic() && m >= grid.counts()[axis] {
            return Err(Error::InvalidStep(format!("h = {h} exceeds the grid on axis {axis}")));
        }
        if let Some(s) = spec {
            if !grid.is_periodic() && s.outer.hi[axis] + h > grid.lengths()[axis] * (1.0 + 1e-12) {
                return Err(Error::InvalidStep(format!(
                    "h = {h} shifts the outer box (upper corner {}) beyond the domain on axis {axis}",
                    s.outer.hi[axis]
                )));
            }
        }
        Ok(Self {
            grid: *grid,
            axis,
            multiple: m,
            h: m as f64 * dx,
        })
    }

    /// From a lattice multiple directly.
    pub fn with_multiple(grid: &CartesianGrid, axis: usize, m: usize, spec: Option<&CutoffSpec>) -> Result<Self> {
        Self::new(grid, axis, m as f64 * grid.spacing()[axis], spec)
    }

    pub fn apply_slice(&self, f: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let n = g.counts()[self.axis];
        let stride = g.stride(self.axis);
        let m = self.multiple;
        let inv = 1.0 / self.h;
        let periodic = g.is_periodic();
        (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let c = g.coords(idx)[self.axis];
                let base = idx - c * stride;
                if c + m < n {
                    (f[idx + m * stride] - f[idx]) * inv
                } else if periodic {
                    (f[base + ((c + m) % n) * stride] - f[idx]) * inv
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn apply<F: NodalField>(&self, field: &F) -> F {
        let mut out = field.clone();
        for (o, s) in out.components_mut().iter_mut().zip(field.components()) {
            *o = self.apply_slice(s);
        }
        out
    }

    pub fn apply_state(&self, s: &SimulationState) -> SimulationState {
        SimulationState {
            time: s.time,
            u: self.apply(&s.u),
            u_t: self.apply(&s.u_t),
            p: self.apply(&s.p),
            p_t: self.apply(&s.p_t),
        }
    }
}

/// Scalar-field convenience wrapper.
pub fn difference_quotient(f: &ScalarField, axis: usize, h: f64, spec: Option<&CutoffSpec>) -> Result<ScalarField> {
    Ok(DifferenceQuotient::new(&f.grid, axis, h, spec)?.apply(f))
}

/// Energy of `(η D^h_k u, η D^h_k u_t, η D^h_k P, η D^h_k P_t)`, the weight sitting inside
/// every integrand after differentiation.
pub fn localized_energy(
    state: &SimulationState,
    p: &MaterialParameters,
    eta: &ScalarField,
    dq: &DifferenceQuotient,
) -> Result<EnergyBreakdown> {
    state.check_consistent()?;
    let shifted = dq.apply_state(state);
    crate::energy::total_energy(&shifted, p, Some(eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DqCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `‖D^h_k φ‖_{L²(V)} / ‖∇φ‖_{L²(U)}`; requires `V + h e_k ⊂ U`.
pub fn dq_theorem_check(phi: &ScalarField, spec: &CutoffSpec, axis: usize, h: f64) -> Result<DqCheck> {
    let grid = phi.grid;
    spec.validate(&grid)?;
    let dq = DifferenceQuotient::new(&grid, axis, h, None)?;
    if spec.inner.hi[axis] + dq.h > spec.outer.hi[axis] * (1.0 + 1e-12) {
        return Err(Error::InvalidStep(format!(
            "h = {} moves the inner box out of the outer box on axis {axis}",
            dq.h
        )));
    }
    let vbox = grid.node_box(spec.inner.lo, spec.inner.hi)?;
    let ubox = grid.node_box(spec.outer.lo, spec.outer.hi)?;
    let d = dq.apply(phi);
    let ops = Operators::new(&grid);
    let grads: [Vec<f64>; 3] = std::array::from_fn(|a| ops.axis(a).apply(&grid, &phi.data));
    let lhs = integrate_over(&grid, &vbox, |i| d.data[i] * d.data[i]).sqrt();
    let rhs = integrate_over(&grid, &ubox, |i| grads.iter().map(|g| g[i] * g[i]).sum()).sqrt();
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        return Err(Error::InvalidArgument(format!(
            "inconsistent field: difference quotient norm {lhs} with vanishing gradient"
        )));
    };
    Ok(DqCheck { lhs, rhs, ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub axis: usize,
    pub multiple: usize,
    pub h: f64,
    pub sup_energy: f64,
    pub time_of_sup: f64,
    pub breakdown: EnergyBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeTable {
    pub rows: Vec<ProbeRow>,
    /// Per axis: max over h of the suprema divided by their min.
    pub axis_ratios: Vec<(usize, f64)>,
    pub max_ratio: f64,
}

/// For each axis and lattice multiple, the supremum over recorded states of the localized total energy.
pub fn h_sweep_probe(
    states: &[SimulationState],
    p: &MaterialParameters,
    spec: &CutoffSpec,
    axes: &[usize],
    multiples: &[usize],
) -> Result<ProbeTable> {
    let grid = match states.first() {
        Some(s) => *s.grid(),
        None => return Err(Error::InvalidArgument("empty trajectory".into())),
    };
    let eta = cutoff_eta(&grid, spec)?;
    let mut quotients = Vec::new();
    for &a in axes {
        for &m in multiples {
            quotients.push(DifferenceQuotient::with_multiple(&grid, a, m, Some(spec))?);
        }
    }
    let ops = Operators::new(&grid);
    let rows: Vec<ProbeRow> = quotients
        .par_iter()
        .map(|dq| {
            let mut best: Option<(f64, EnergyBreakdown)> = None;
            for s in states {
                let shifted = dq.apply_state(s);
                let dens = energy_densities(p, &ops, &shifted);
                let e = EnergyBreakdown::from_parts(integrate_parts(&grid, &dens, Some(&eta)));
                if best.as_ref().is_none_or(|(_, b)| e.total > b.total) {
                    best = Some((s.time, e));
                }
            }
            let (t, e) = best.expect("nonempty");
            ProbeRow {
                axis: dq.axis,
                multiple: dq.multiple,
                h: dq.h,
                sup_energy: e.total,
                time_of_sup: t,
                breakdown: e,
            }
        })
        .collect();
    let mut axis_ratios = Vec::new();
    for &a in axes {
        let v: Vec<f64> = rows.iter().filter(|r| r.axis == a).map(|r| r.sup_energy).collect();
        let hi = v.iter().copied().fold(0.0, f64::max);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let r = if hi == 0.0 {
            1.0
        } else if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        };
        axis_ratios.push((a, r));
    }
    let max_ratio = axis_ratios.iter().map(|x| x.1).fold(1.0, f64::max);
    Ok(ProbeTable {
        rows,
        axis_ratios,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VectorField;
    use crate::ops::axis_derivative;

    fn spec() -> CutoffSpec {
        CutoffSpec::cube((0.125, 0.75), (0.3125, 0.5625))
    }

    #[test]
    fn eta_values_and_slope_bound() {
        let g = CartesianGrid::cube(17).unwrap();
        let s = spec();
        let eta = cutoff_eta(&g, &s).unwrap();
        for idx in 0..g.len() {
            let x = g.position(idx);
            let v = eta.data[idx];
            assert!((0.0..=1.0).contains(&v));
            let inside_v = (0..3).all(|a| x[a] >= s.inner.lo[a] && x[a] <= s.inner.hi[a]);
            let outside_u = (0..3).any(|a| x[a] <= s.outer.lo[a] || x[a] >= s.outer.hi[a]);
            if inside_v {
                assert_eq!(v, 1.0);
            }
            if outside_u {
                assert_eq!(v, 0.0);
            }
        }
        let bound = 2.0 * SMOOTHSTEP_SLOPE / s.min_margin();
        for a in 0..3 {
            let d = axis_derivative(&eta, a);
            assert!(d.data.iter().all(|v| v.abs() <= bound));
        }
    }

    #[test]
    fn thin_margin_rejected() {
        let g = CartesianGrid::cube(17).unwrap();
        assert!(cutoff_eta(&g, &CutoffSpec::cube((0.25, 0.75), (0.3, 0.7))).is_err());
        assert!(cutoff_eta(&g, &CutoffSpec::cube((0.0, 0.75), (0.25, 0.5))).is_err());
    }

    #[test]
    fn quotient_examples() {
        let g = CartesianGrid::cube(17).unwrap();
        let h = 2.0 / 16.0;
        let lin = ScalarField::from_fn(&g, |x| x[1]);
        let d = difference_quotient(&lin, 1, h, None).unwrap();
        let sq = ScalarField::from_fn(&g, |x| x[1] * x[1]);
        let d2 = difference_quotient(&sq, 1, h, None).unwrap();
        let c = difference_quotient(&ScalarField::constant(&g, 4.0), 1, h, None).unwrap();
        for idx in 0..g.len() {
            if g.coords(idx)[1] + 2 < 17 {
                assert!((d.data[idx] - 1.0).abs() < 1e-12);
                assert!((d2.data[idx] - (2.0 * g.position(idx)[1] + h)).abs() < 1e-12);
            } else {
                assert_eq!(d.data[idx], 0.0);
            }
            assert_eq!(c.data[idx], 0.0);
        }
    }

    #[test]
    fn non_lattice_and_oversized_steps_rejected() {
        let g = CartesianGrid::cube(17).unwrap();
        assert!(matches!(DifferenceQuotient::new(&g, 0, 0.07, None), Err(Error::InvalidStep(_))));
        assert!(matches!(DifferenceQuotient::new(&g, 0, 0.5, Some(&spec())), Err(Error::InvalidStep(_))));
        assert!(DifferenceQuotient::new(&g, 0, 0.25, Some(&spec())).is_ok());
    }

    #[test]
    fn dq_check_on_linear_and_constant() {
        let g = CartesianGrid::cube(17).unwrap();
        let s = CutoffSpec::cube((0.0625, 0.9375), (0.1875, 0.625));
        let lin = ScalarField::from_fn(&g, |x| x[2]);
        let r = dq_theorem_check(&lin, &s, 2, 0.25).unwrap();
        let want = ((0.625f64 - 0.1875).powi(3) / (0.9375f64 - 0.0625).powi(3)).sqrt();
        assert!((r.ratio - want).abs() < 1e-12);
        let c = dq_theorem_check(&ScalarField::constant(&g, 2.0), &s, 0, 0.0625).unwrap();
        assert_eq!(c.lhs, 0.0);
    }

    #[test]
    fn localized_energy_of_zero_and_scaling() {
        let g = CartesianGrid::cube(17).unwrap();
        let eta = cutoff_eta(&g, &spec()).unwrap();
        let dq = DifferenceQuotient::with_multiple(&g, 0, 2, Some(&spec())).unwrap();
        let p = MaterialParameters::reference();
        let z = localized_energy(&SimulationState::zeros(&g), &p, &eta, &dq).unwrap();
        assert_eq!(z.total, 0.0);
        let mut s = SimulationState::zeros(&g);
        s.u = VectorField::from_fn(&g, |x| [x[0] * x[0], x[1] * x[0], 0.3 * x[2]]);
        let a = localized_energy(&s, &p, &eta, &dq).unwrap();
        let b = localized_energy(&s.scaled(3.0), &p, &eta, &dq).unwrap();
        assert!((b.total - 9.0 * a.total).abs() < 1e-12 * b.total);
    }

    #[test]
    fn quotient_commutes_with_other_axis_derivative() {
        let g = CartesianGrid::new([1.0, 1.0, 1.0], [9, 10, 11]).unwrap();
        let f = ScalarField::from_fn(&g, |x| (3.0 * x[0] + x[1] * x[1]).sin() + x[2]);
        let dq = DifferenceQuotient::with_multiple(&g, 0, 2, None).unwrap();
        let a = dq.apply(&axis_derivative(&f, 1));
        let b = axis_derivative(&dq.apply(&f), 1);
        for i in 0..g.len() {
            assert!((a.data[i] - b.data[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_trajectory_probe() {
        let g = CartesianGrid::cube(17).unwrap();
        let t = h_sweep_probe(&[SimulationState::zeros(&g)], &MaterialParameters::reference(), &spec(), &[0, 1, 2], &[1, 2, 4]).unwrap();
        assert!(t.rows.iter().all(|r| r.sup_energy == 0.0));
        assert_eq!(t.rows.len(), 9);
    }
}
