//! Discrete coercivity (incompatible Korn) and Gaffney constants on constrained node fields.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::eigen::{assemble_dense, dense_generalized_eigenvalues, lobpcg, LobpcgOptions};
use crate::dynamics::Constraints;
use crate::error::{Error, Result};
use crate::grid::{l2_norm_squared, CartesianGrid, NodalField, ScalarField, TensorField, VectorField};
use crate::model::{cauchy_stress, micro_stress, MaterialParameters};
use crate::ops::Operators;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantOptions {
    pub samples: usize,
    pub seed: u64,
    /// Refine with LOBPCG when the grid has at most this many nodes.
    pub refine_max_nodes: usize,
    pub block: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ConstantOptions {
    fn default() -> Self {
        Self {
            samples: 64,
            seed: 0x5eed_cafe,
            refine_max_nodes: 9 * 9 * 9,
            block: 4,
            max_iter: 600,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityEstimate {
    /// Smallest quotient over the random smooth trial fields.
    pub sampled: f64,
    /// Smallest Ritz value of the generalized eigenproblem, when refinement ran.
    pub refined: Option<f64>,
    pub refine_iterations: usize,
    /// Final estimate: the minimum over everything tried.
    pub constant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GaffneyEstimate {
    pub sampled: f64,
    /// `sqrt` of the largest Ritz value of `‖∇v‖² / (‖curl v‖² + ‖div v‖² + ‖v‖²)`.
    pub rayleigh_bound: Option<f64>,
    pub refine_iterations: usize,
    /// Largest `‖∇v‖ / (‖curl v‖ + ‖div v‖ + ‖v‖)` over every candidate.
    pub constant: f64,
}

/// Free slots of `(u, P)` in a flat vector: `(component 0..12, node)`.
struct FreeMap {
    grid: CartesianGrid,
    slots: Vec<(usize, usize)>,
}

impl FreeMap {
    fn coercivity(grid: &CartesianGrid) -> Self {
        let c = Constraints::new(grid, [true; 6]);
        let mut slots = Vec::new();
        for comp in 0..12 {
            for idx in 0..grid.len() {
                let pinned = if comp < 3 { c.u_pinned[idx] } else { c.p_pinned[(comp - 3) % 3][idx] };
                if !pinned {
                    slots.push((comp, idx));
                }
            }
        }
        Self { grid: *grid, slots }
    }

    /// Vector fields whose normal component vanishes on the boundary.
    fn normal_free(grid: &CartesianGrid) -> Self {
        let mut slots = Vec::new();
        for comp in 0..3 {
            for idx in 0..grid.len() {
                if grid.face_on_axis(idx, comp).is_none() {
                    slots.push((comp, idx));
                }
            }
        }
        Self { grid: *grid, slots }
    }

    fn scatter(&self, x: &[f64]) -> (VectorField, TensorField) {
        let mut u = VectorField::zeros(&self.grid);
        let mut p = TensorField::zeros(&self.grid);
        for (&(c, idx), &v) in self.slots.iter().zip(x) {
            if c < 3 {
                u.comps[c][idx] = v;
            } else {
                p.comps[c - 3][idx] = v;
            }
        }
        (u, p)
    }

    fn gather(&self, u: &VectorField, p: &TensorField) -> Vec<f64> {
        self.slots
            .iter()
            .map(|&(c, idx)| if c < 3 { u.comps[c][idx] } else { p.comps[c - 3][idx] })
            .collect()
    }
}

fn weight_field(grid: &CartesianGrid) -> ScalarField {
    ScalarField {
        grid: *grid,
        data: grid.weights(),
    }
}

struct CoercivityForms {
    map: FreeMap,
    ops: Operators,
    w: ScalarField,
    p: MaterialParameters,
}

impl CoercivityForms {
    fn new(grid: &CartesianGrid, p: &MaterialParameters) -> Self {
        Self {
            map: FreeMap::coercivity(grid),
            ops: Operators::new(grid),
            w: weight_field(grid),
            p: *p,
        }
    }

    /// Gradient of the potential energy: `E_pot = ½ xᵀ A x`.
    fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        let (u, pt) = self.map.scatter(x);
        let mut e = self.ops.gradient(&u);
        e.axpy(-1.0, &pt);
        let s = e.map(|t| cauchy_stress(&self.p, t)).weighted(&self.w);
        let gu = self.ops.gradient_transpose(&s);
        let mut gp = pt.map(|t| micro_stress(&self.p, t)).weighted(&self.w);
        gp.axpy(-1.0, &s);
        let wc = self.ops.curl_tensor(&pt).weighted(&self.w);
        gp.axpy(self.p.curvature_modulus(), &self.ops.curl_tensor_transpose(&wc));
        self.map.gather(&gu, &gp)
    }

    /// `‖∇u‖² + ‖P‖² + ‖Curl P‖² = xᵀ B x`.
    fn apply_b(&self, x: &[f64]) -> Vec<f64> {
        let (u, pt) = self.map.scatter(x);
        let gu = self.ops.gradient_transpose(&self.ops.gradient(&u).weighted(&self.w));
        let mut gp = pt.weighted(&self.w);
        gp.axpy(1.0, &self.ops.curl_tensor_transpose(&self.ops.curl_tensor(&pt).weighted(&self.w)));
        self.map.gather(&gu, &gp)
    }

    fn quotient(&self, x: &[f64]) -> f64 {
        let (u, pt) = self.map.scatter(x);
        let mut e = self.ops.gradient(&u);
        e.axpy(-1.0, &pt);
        let curl = self.ops.curl_tensor(&pt);
        let grad = self.ops.gradient(&u);
        let p = &self.p;
        let num = crate::grid::integrate_with(&self.map.grid, |i| {
            let ei = e.at(i);
            let pi = pt.at(i);
            crate::model::local_energy_density(p, &ei, &pi) + 0.5 * p.curvature_modulus() * curl.at(i).norm_squared()
        });
        let den = l2_norm_squared(&grad, None).unwrap_or(f64::NAN)
            + l2_norm_squared(&pt, None).unwrap_or(f64::NAN)
            + l2_norm_squared(&curl, None).unwrap_or(f64::NAN);
        num / den
    }
}

struct GaffneyForms {
    map: FreeMap,
    ops: Operators,
    w: ScalarField,
}

impl GaffneyForms {
    fn new(grid: &CartesianGrid) -> Self {
        Self {
            map: FreeMap::normal_free(grid),
            ops: Operators::new(grid),
            w: weight_field(grid),
        }
    }

    fn vector(&self, x: &[f64]) -> VectorField {
        self.map.scatter(x).0
    }

    fn gather(&self, v: &VectorField) -> Vec<f64> {
        self.map.gather(v, &TensorField::zeros(&self.map.grid))
    }

    fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        let v = self.vector(x);
        self.gather(&self.ops.gradient_transpose(&self.ops.gradient(&v).weighted(&self.w)))
    }

    fn apply_b(&self, x: &[f64]) -> Vec<f64> {
        let v = self.vector(x);
        let mut out = v.weighted(&self.w);
        out.axpy(1.0, &self.ops.curl_vector_transpose(&self.ops.curl_vector(&v).weighted(&self.w)));
        out.axpy(1.0, &self.ops.div_vector_transpose(&self.ops.div_vector(&v).weighted(&self.w)));
        self.gather(&out)
    }

    fn quotient(&self, x: &[f64]) -> f64 {
        let v = self.vector(x);
        let n = |s: f64| s.sqrt();
        let g = n(l2_norm_squared(&self.ops.gradient(&v), None).unwrap_or(f64::NAN));
        let c = n(l2_norm_squared(&self.ops.curl_vector(&v), None).unwrap_or(f64::NAN));
        let d = n(l2_norm_squared(&self.ops.div_vector(&v), None).unwrap_or(f64::NAN));
        let m = n(l2_norm_squared(&v, None).unwrap_or(f64::NAN));
        g / (c + d + m)
    }
}

/// Random smooth field: a few sine/cosine products per component with random amplitudes.
/// `sine_axes(c)` tells which axes carry a sine factor for component `c`, so the boundary
/// pattern of the constraints is respected.
fn smooth_random(
    grid: &CartesianGrid,
    rng: &mut ChaCha8Rng,
    comps: usize,
    sine_axes: impl Fn(usize, usize) -> bool,
) -> Vec<Vec<f64>> {
    let l = grid.lengths();
    (0..comps)
        .map(|c| {
            let modes: Vec<([usize; 3], f64)> = (0..4)
                .map(|_| {
                    let m = [rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3)];
                    (m, rng.random_range(-1.0..1.0))
                })
                .collect();
            (0..grid.len())
                .map(|idx| {
                    let x = grid.position(idx);
                    modes
                        .iter()
                        .map(|(m, a)| {
                            let mut v = *a;
                            for ax in 0..3 {
                                let arg = m[ax] as f64 * PI * x[ax] / l[ax];
                                v *= if sine_axes(c, ax) { arg.sin() } else { arg.cos() };
                            }
                            v
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

fn coercivity_trials(forms: &CoercivityForms, rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<f64>> {
    let g = forms.map.grid;
    (0..count)
        .map(|_| {
            let uc = smooth_random(&g, rng, 3, |_, _| true);
            // Column j of P carries a cosine along axis j only.
            let pc = smooth_random(&g, rng, 9, |c, ax| ax != c % 3);
            let mut u = VectorField::zeros(&g);
            let mut p = TensorField::zeros(&g);
            for (dst, src) in u.comps.iter_mut().zip(uc) {
                *dst = src;
            }
            for (dst, src) in p.comps.iter_mut().zip(pc) {
                *dst = src;
            }
            forms.map.gather(&u, &p)
        })
        .collect()
}

/// Smallest ratio of potential energy to `‖∇u‖² + ‖P‖² + ‖Curl P‖²` over fields with
/// `u = 0` and tangential `P` rows `= 0` on the boundary.
pub fn coercivity_constant(
    grid: &CartesianGrid,
    p: &MaterialParameters,
    opts: &ConstantOptions,
) -> Result<CoercivityEstimate> {
    p.validate()?;
    if grid.is_periodic() {
        return Err(Error::InvalidArgument("coercivity needs a bounded grid".into()));
    }
    let forms = CoercivityForms::new(grid, p);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let trials = coercivity_trials(&forms, &mut rng, opts.samples.max(opts.block));
    let q: Vec<f64> = trials.par_iter().map(|x| forms.quotient(x)).collect();
    let sampled = q.iter().copied().fold(f64::INFINITY, f64::min);

    let mut refined = None;
    let mut iters = 0;
    if grid.len() <= opts.refine_max_nodes {
        let n = forms.map.slots.len();
        let a = (n, |x: &[f64]| forms.apply_a(x));
        let b = (n, |x: &[f64]| forms.apply_b(x));
        let mut order: Vec<usize> = (0..q.len()).collect();
        order.sort_by(|&i, &j| q[i].total_cmp(&q[j]));
        let x0: Vec<Vec<f64>> = order.iter().take(opts.block).map(|&i| trials[i].clone()).collect();
        let res = lobpcg(&a, &b, &x0, LobpcgOptions { max_iter: opts.max_iter, tol: opts.tol, largest: false })?;
        iters = res.iterations;
        refined = Some(0.5 * res.values[0]);
    }
    let constant = refined.map_or(sampled, |r| r.min(sampled));
    if !(constant > 0.0) {
        return Err(Error::CoercivityFailure(constant));
    }
    Ok(CoercivityEstimate {
        sampled,
        refined,
        refine_iterations: iters,
        constant,
    })
}

/// Exact smallest quotient from a dense generalized eigen solve (small grids only).
pub fn coercivity_dense(grid: &CartesianGrid, p: &MaterialParameters) -> Result<f64> {
    p.validate()?;
    let forms = CoercivityForms::new(grid, p);
    let n = forms.map.slots.len();
    let a = assemble_dense(&(n, |x: &[f64]| forms.apply_a(x)));
    let b = assemble_dense(&(n, |x: &[f64]| forms.apply_b(x)));
    Ok(0.5 * dense_generalized_eigenvalues(&a, &b)?[0])
}

/// Largest `‖∇v‖ / (‖curl v‖ + ‖div v‖ + ‖v‖)` over vector fields with vanishing normal
/// component on the boundary.
pub fn gaffney_constant(grid: &CartesianGrid, opts: &ConstantOptions) -> Result<GaffneyEstimate> {
    if grid.is_periodic() {
        return Err(Error::InvalidArgument("Gaffney constant needs a bounded grid".into()));
    }
    let forms = GaffneyForms::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let trials: Vec<Vec<f64>> = (0..opts.samples.max(opts.block))
        .map(|_| {
            let comps = smooth_random(grid, &mut rng, 3, |c, ax| ax == c);
            let mut v = VectorField::zeros(grid);
            for (dst, src) in v.comps.iter_mut().zip(comps) {
                *dst = src;
            }
            forms.gather(&v)
        })
        .collect();
    let q: Vec<f64> = trials.par_iter().map(|x| forms.quotient(x)).collect();
    let sampled = q.iter().copied().fold(0.0, f64::max);

    let n = forms.map.slots.len();
    let a = (n, |x: &[f64]| forms.apply_a(x));
    let b = (n, |x: &[f64]| forms.apply_b(x));
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&i, &j| q[j].total_cmp(&q[i]));
    let x0: Vec<Vec<f64>> = order.iter().take(opts.block).map(|&i| trials[i].clone()).collect();
    let res = lobpcg(&a, &b, &x0, LobpcgOptions { max_iter: opts.max_iter, tol: opts.tol, largest: true })?;
    let refined_q = res.vectors.iter().map(|v| forms.quotient(v)).fold(0.0, f64::max);
    Ok(GaffneyEstimate {
        sampled,
        rayleigh_bound: Some(res.values[0].max(0.0).sqrt()),
        refine_iterations: res.iterations,
        constant: sampled.max(refined_q),
    })
}

/// `sqrt` of the largest generalized eigenvalue from a dense solve (small grids only).
pub fn gaffney_dense(grid: &CartesianGrid) -> Result<f64> {
    let forms = GaffneyForms::new(grid);
    let n = forms.map.slots.len();
    let a = assemble_dense(&(n, |x: &[f64]| forms.apply_a(x)));
    let b = assemble_dense(&(n, |x: &[f64]| forms.apply_b(x)));
    let v = dense_generalized_eigenvalues(&a, &b)?;
    Ok(v[n - 1].max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms_are_consistent_with_quotient() {
        let g = CartesianGrid::cube(5).unwrap();
        let p = MaterialParameters::new(1.0, 0.2, 0.0, 0.8, 0.1, 0.7);
        let f = CoercivityForms::new(&g, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for x in coercivity_trials(&f, &mut rng, 3) {
            let ax: f64 = f.apply_a(&x).iter().zip(&x).map(|(a, b)| a * b).sum();
            let bx: f64 = f.apply_b(&x).iter().zip(&x).map(|(a, b)| a * b).sum();
            let q = f.quotient(&x);
            assert!((0.5 * ax / bx - q).abs() < 1e-12 * q.abs().max(1e-3));
        }
    }

    #[test]
    fn couple_modulus_monotonicity() {
        let g = CartesianGrid::cube(5).unwrap();
        let p0 = MaterialParameters::reference();
        let p1 = MaterialParameters { mu_c: 1.0, ..p0 };
        let a = coercivity_dense(&g, &p0).unwrap();
        let b = coercivity_dense(&g, &p1).unwrap();
        assert!(a > 0.0);
        assert!(b >= a - 1e-12);
    }

    #[test]
    fn gradient_field_is_bounded_by_estimate() {
        let g = CartesianGrid::cube(9).unwrap();
        let forms = GaffneyForms::new(&g);
        let ops = Operators::new(&g);
        // Neumann cosine product: its gradient has vanishing normal component.
        let phi = ScalarField::from_fn(&g, |x| (PI * x[0]).cos() * (PI * x[1]).cos() * (PI * x[2]).cos());
        let v = VectorField {
            grid: g,
            comps: std::array::from_fn(|a| ops.axis(a).apply(&g, &phi.data)),
        };
        let q = forms.quotient(&forms.gather(&v));
        let est = gaffney_constant(&g, &ConstantOptions::default()).unwrap();
        assert!(q <= est.constant + 1e-12);
    }
}
