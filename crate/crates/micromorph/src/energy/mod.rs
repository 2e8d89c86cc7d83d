//! Total energy, its breakdown, the power balance, and discrete inequality constants.

mod constants;
pub mod eigen;

pub use constants::{
    coercivity_constant, coercivity_dense, gaffney_constant, gaffney_dense, CoercivityEstimate,
    ConstantOptions, GaffneyEstimate,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{SourceTerms, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{CartesianGrid, ScalarField, SimulationState};
use crate::model::MaterialParameters;
use crate::ops::Operators;

/// The quadratic contributions to the total energy. Elastic and micro parts are grouped as
/// deviator plus trace so that each is nonnegative for admissible parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic_u: f64,
    pub kinetic_p: f64,
    pub elastic_sym: f64,
    pub elastic_trace: f64,
    pub elastic_skew: f64,
    pub micro_sym: f64,
    pub micro_trace: f64,
    pub curvature: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub const PART_NAMES: [&'static str; 8] = [
        "kinetic_u",
        "kinetic_P",
        "elastic_sym",
        "elastic_trace",
        "elastic_skew",
        "micro_sym",
        "micro_trace",
        "curvature",
    ];

    pub fn from_parts(p: [f64; 8]) -> Self {
        Self {
            kinetic_u: p[0],
            kinetic_p: p[1],
            elastic_sym: p[2],
            elastic_trace: p[3],
            elastic_skew: p[4],
            micro_sym: p[5],
            micro_trace: p[6],
            curvature: p[7],
            total: p.iter().sum(),
        }
    }

    pub fn parts(&self) -> [f64; 8] {
        [
            self.kinetic_u,
            self.kinetic_p,
            self.elastic_sym,
            self.elastic_trace,
            self.elastic_skew,
            self.micro_sym,
            self.micro_trace,
            self.curvature,
        ]
    }

    pub fn kinetic(&self) -> f64 {
        self.kinetic_u + self.kinetic_p
    }

    pub fn potential(&self) -> f64 {
        self.total - self.kinetic()
    }
}

/// Nodal energy densities of the eight parts (unweighted).
pub(crate) fn energy_densities(
    p: &MaterialParameters,
    ops: &Operators,
    state: &SimulationState,
) -> Vec<[f64; 8]> {
    let grad = ops.gradient(&state.u);
    let curl = ops.curl_tensor(&state.p);
    let n = ops.grid.len();
    let ke = 0.5 * p.curvature_modulus();
    let ce = (2.0 * p.mu_e + 3.0 * p.lambda_e) / 6.0;
    let cm = (2.0 * p.mu_micro + 3.0 * p.lambda_micro) / 6.0;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let pt = state.p.at(i);
            let e = grad.at(i) - pt;
            let (es, ek, etr) = e.decompose();
            let (ps, _, ptr) = pt.decompose();
            let c = curl.at(i);
            [
                0.5 * (0..3).map(|a| state.u_t.comps[a][i].powi(2)).sum::<f64>(),
                0.5 * (0..9).map(|a| state.p_t.comps[a][i].powi(2)).sum::<f64>(),
                p.mu_e * es.dev().norm_squared(),
                ce * etr * etr,
                p.mu_c * ek.norm_squared(),
                p.mu_micro * ps.dev().norm_squared(),
                cm * ptr * ptr,
                ke * c.norm_squared(),
            ]
        })
        .collect()
}

/// Trapezoid integral of each part; with `weight`, every integrand carries `weight²`.
pub fn total_energy(
    state: &SimulationState,
    p: &MaterialParameters,
    weight: Option<&ScalarField>,
) -> Result<EnergyBreakdown> {
    state.check_consistent()?;
    let grid = *state.grid();
    if let Some(w) = weight {
        if w.grid != grid {
            return Err(Error::ShapeMismatch("weight lives on a different grid".into()));
        }
    }
    let ops = Operators::new(&grid);
    let dens = energy_densities(p, &ops, state);
    Ok(EnergyBreakdown::from_parts(integrate_parts(&grid, &dens, weight)))
}

pub(crate) fn integrate_parts(grid: &CartesianGrid, dens: &[[f64; 8]], weight: Option<&ScalarField>) -> [f64; 8] {
    let w = [grid.weights_1d(0), grid.weights_1d(1), grid.weights_1d(2)];
    let plane = grid.plane_len();
    let partial: Vec<[f64; 8]> = (0..grid.counts()[2])
        .into_par_iter()
        .map(|k| {
            let mut s = [0.0; 8];
            for idx in k * plane..(k + 1) * plane {
                let c = grid.coords(idx);
                let mut q = w[0][c[0]] * w[1][c[1]] * w[2][c[2]];
                if let Some(wt) = weight {
                    q *= wt.data[idx] * wt.data[idx];
                }
                for (a, d) in s.iter_mut().zip(dens[idx].iter()) {
                    *a += q * d;
                }
            }
            s
        })
        .collect();
    let mut out = [0.0; 8];
    for s in partial {
        for (o, v) in out.iter_mut().zip(s) {
            *o += v;
        }
    }
    out
}

/// Injected power `∫ (⟨u_t, f⟩ + ⟨P_t, M⟩)` at the state's time.
pub fn injected_power(state: &SimulationState, src: &SourceTerms) -> f64 {
    let grid = *state.grid();
    let t = state.time;
    let f = src.f.as_ref().map(|f| f(t));
    let m = src.m.as_ref().map(|m| m(t));
    crate::grid::integrate_with(&grid, |i| {
        let mut s = 0.0;
        if let Some(f) = &f {
            for a in 0..3 {
                s += state.u_t.comps[a][i] * f.comps[a][i];
            }
        }
        if let Some(m) = &m {
            for a in 0..9 {
                s += state.p_t.comps[a][i] * m.comps[a][i];
            }
        }
        s
    })
}

/// `E(t_{n+1}) − E(t_n) − ∫ power dt` (trapezoid in time) between consecutive recorded states.
pub fn energy_balance_residual(
    trajectory: &Trajectory,
    p: &MaterialParameters,
    src: &SourceTerms,
) -> Result<Vec<f64>> {
    if trajectory.states.len() != trajectory.times.len() {
        return Err(Error::InvalidArgument(
            "energy balance needs the trajectory's recorded states".into(),
        ));
    }
    let mut energy = Vec::with_capacity(trajectory.states.len());
    let mut power = Vec::with_capacity(trajectory.states.len());
    for s in &trajectory.states {
        energy.push(total_energy(s, p, None)?.total);
        power.push(injected_power(s, src));
    }
    Ok((1..energy.len())
        .map(|n| {
            let dt = trajectory.times[n] - trajectory.times[n - 1];
            energy[n] - energy[n - 1] - 0.5 * dt * (power[n] + power[n - 1])
        })
        .collect())
}
