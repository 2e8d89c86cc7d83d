//! Manufactured solutions and convergence studies.
//!
//! Exact solutions are separable, `u*(x, t) = τ(t) U(x)` and `P*(x, t) = τ(t) Π(x)`, with `U`, `Π`
//! sums of products of one-dimensional factors. That family is closed under differentiation, so
//! the sources are exact closed forms.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{cfl_timestep, rhs, run_simulation, BoundaryData, RunSpec, SourceTerms};
use crate::error::{Error, Result};
use crate::grid::{integrate_over, integrate_with, CartesianGrid, NodalField, SimulationState, TensorField, VectorField};
use crate::model::MaterialParameters;
use crate::ops::Operators;

/// Names accepted by [`manufactured_case`].
pub const CATALOG: [&str; 4] = ["poly2", "trig1", "trig-mixed", "zero"];

/// Errors below this are reported as the round-off floor.
pub const ERROR_FLOOR: f64 = 1e-10;

/// One-dimensional factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor {
    /// `x^n`
    Pow(u32),
    /// `sin(k x + q·π/2)`
    Sin { k: f64, quarter: u32 },
    /// `max(0, x − c)^n`
    Ramp { c: f64, n: u32 },
}

impl Factor {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Factor::Pow(n) => x.powi(n as i32),
            Factor::Sin { k, quarter } => match quarter % 4 {
                0 => (k * x).sin(),
                1 => (k * x).cos(),
                2 => -(k * x).sin(),
                _ => -(k * x).cos(),
            },
            Factor::Ramp { c, n } => {
                let r = (x - c).max(0.0);
                if n == 0 {
                    if x > c {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    r.powi(n as i32)
                }
            }
        }
    }

    /// `(a, g)` with `f' = a·g`.
    fn derivative(&self) -> (f64, Factor) {
        match *self {
            Factor::Pow(0) => (0.0, Factor::Pow(0)),
            Factor::Pow(n) => (n as f64, Factor::Pow(n - 1)),
            Factor::Sin { k, quarter } => (k, Factor::Sin { k, quarter: (quarter + 1) % 4 }),
            Factor::Ramp { n: 0, .. } => (f64::NAN, Factor::Pow(0)),
            Factor::Ramp { c, n } => (n as f64, Factor::Ramp { c, n: n - 1 }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub factors: [Factor; 3],
}

/// Finite sum of separable terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expr(pub Vec<Term>);

impl Expr {
    pub fn zero() -> Self {
        Self(Vec::new())
    }

    pub fn term(coef: f64, factors: [Factor; 3]) -> Self {
        Self(vec![Term { coef, factors }])
    }

    pub fn constant(c: f64) -> Self {
        Self::term(c, [Factor::Pow(0); 3])
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.0
            .iter()
            .map(|t| t.coef * t.factors[0].eval(x[0]) * t.factors[1].eval(x[1]) * t.factors[2].eval(x[2]))
            .sum()
    }

    pub fn diff(&self, axis: usize) -> Expr {
        Expr(
            self.0
                .iter()
                .filter_map(|t| {
                    let (a, g) = t.factors[axis].derivative();
                    if a == 0.0 || t.coef == 0.0 {
                        return None;
                    }
                    let mut factors = t.factors;
                    factors[axis] = g;
                    Some(Term { coef: t.coef * a, factors })
                })
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Expr {
        if s == 0.0 {
            return Expr::zero();
        }
        Expr(self.0.iter().map(|t| Term { coef: s * t.coef, ..*t }).collect())
    }

    pub fn add(&self, other: &Expr) -> Expr {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Expr(v)
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.scaled(-1.0))
    }
}

type VecExpr = [Expr; 3];
type TenExpr = [Expr; 9];

fn sum_exprs(items: impl IntoIterator<Item = Expr>) -> Expr {
    items.into_iter().fold(Expr::zero(), |a, b| a.add(&b))
}

/// Row-wise curl: `(Curl P)_ij = ε_jkl ∂_k P_il`.
fn curl(p: &TenExpr) -> TenExpr {
    std::array::from_fn(|n| {
        let (i, j) = (n / 3, n % 3);
        let (k, l) = ((j + 1) % 3, (j + 2) % 3);
        p[3 * i + l].diff(k).sub(&p[3 * i + k].diff(l))
    })
}

fn sigma(p: &MaterialParameters, e: &TenExpr) -> TenExpr {
    let tr = sum_exprs((0..3).map(|a| e[4 * a].clone()));
    std::array::from_fn(|n| {
        let (i, j) = (n / 3, n % 3);
        let sym = e[n].add(&e[3 * j + i]).scaled(0.5);
        let skew = e[n].sub(&e[3 * j + i]).scaled(0.5);
        let mut s = sym.scaled(2.0 * p.mu_e).add(&skew.scaled(2.0 * p.mu_c));
        if i == j {
            s = s.add(&tr.scaled(p.lambda_e));
        }
        s
    })
}

fn micro(p: &MaterialParameters, q: &TenExpr) -> TenExpr {
    let tr = sum_exprs((0..3).map(|a| q[4 * a].clone()));
    std::array::from_fn(|n| {
        let (i, j) = (n / 3, n % 3);
        let mut s = q[n].add(&q[3 * j + i]).scaled(p.mu_micro);
        if i == j {
            s = s.add(&tr.scaled(p.lambda_micro));
        }
        s
    })
}

/// Temporal factor `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TimeProfile {
    Cos { omega: f64 },
    Quadratic { c0: f64, c1: f64, c2: f64 },
}

impl TimeProfile {
    /// `(τ, τ', τ'')` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            TimeProfile::Cos { omega } => {
                let (s, c) = (omega * t).sin_cos();
                (c, -omega * s, -omega * omega * c)
            }
            TimeProfile::Quadratic { c0, c1, c2 } => (c0 + c1 * t + c2 * t * t, c1 + 2.0 * c2 * t, 2.0 * c2),
        }
    }
}

/// A catalog entry with its exact sources.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub params: MaterialParameters,
    pub lengths: [f64; 3],
    pub time: TimeProfile,
    pub u: VecExpr,
    pub p: TenExpr,
    /// `Div σ(∇U − Π)`, so `f = τ'' U − τ·force_static`.
    pub force_static: VecExpr,
    /// `−σ(∇U − Π) + micro(Π) + μ_micro L_c² Curl Curl Π`, so `M = τ'' Π + τ·moment_static`.
    pub moment_static: TenExpr,
    pub curl_p: TenExpr,
    /// Whether the traces of `u*` and the tangential rows of `P*` vanish identically.
    pub homogeneous_bc: bool,
}

/// Default material set used by the catalog (all couplings active).
pub fn mms_parameters() -> MaterialParameters {
    MaterialParameters::new(1.0, 0.5, 0.3, 1.0, 0.2, 0.5)
}

const TRIG_A: [f64; 3] = [1.0, 0.5, -0.25];
const TRIG_B: [[f64; 3]; 3] = [[0.3, -0.6, 0.9], [0.5, 0.2, -0.4], [-0.7, 0.8, 0.1]];
/// Kink location (fraction of the x₁ extent) of the reduced-smoothness feature.
pub const KINK_AT: f64 = 0.6;

impl ManufacturedCase {
    fn assemble(
        name: &str,
        params: MaterialParameters,
        lengths: [f64; 3],
        time: TimeProfile,
        u: VecExpr,
        p: TenExpr,
        homogeneous_bc: bool,
    ) -> Self {
        let e: TenExpr = std::array::from_fn(|n| u[n / 3].diff(n % 3).sub(&p[n]));
        let s = sigma(&params, &e);
        let force_static = std::array::from_fn(|i| sum_exprs((0..3).map(|j| s[3 * i + j].diff(j))));
        let curl_p = curl(&p);
        let cc = curl(&curl_p);
        let mi = micro(&params, &p);
        let kappa = params.curvature_modulus();
        let moment_static = std::array::from_fn(|n| mi[n].sub(&s[n]).add(&cc[n].scaled(kappa)));
        Self {
            name: name.to_string(),
            params,
            lengths,
            time,
            u,
            p,
            force_static,
            moment_static,
            curl_p,
            homogeneous_bc,
        }
    }

    pub fn u_at(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let tau = self.time.eval(t).0;
        std::array::from_fn(|i| tau * self.u[i].eval(x))
    }

    pub fn p_at(&self, x: [f64; 3], t: f64) -> [f64; 9] {
        let tau = self.time.eval(t).0;
        std::array::from_fn(|n| tau * self.p[n].eval(x))
    }

    pub fn f_at(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let (tau, _, tau2) = self.time.eval(t);
        std::array::from_fn(|i| tau2 * self.u[i].eval(x) - tau * self.force_static[i].eval(x))
    }

    pub fn m_at(&self, x: [f64; 3], t: f64) -> [f64; 9] {
        let (tau, _, tau2) = self.time.eval(t);
        std::array::from_fn(|n| tau2 * self.p[n].eval(x) + tau * self.moment_static[n].eval(x))
    }

    /// Spatial parts sampled on `grid`, ready for time-stepping.
    pub fn on_grid(&self, grid: &CartesianGrid) -> Result<SampledCase> {
        if grid.lengths() != self.lengths {
            return Err(Error::InvalidArgument(format!(
                "case `{}` is built for box {:?}, grid has {:?}",
                self.name,
                self.lengths,
                grid.lengths()
            )));
        }
        let vec = |e: &VecExpr| VectorField::from_fn(grid, |x| std::array::from_fn(|i| e[i].eval(x)));
        let ten = |e: &TenExpr| TensorField::from_fn(grid, |x| crate::model::Tensor3::from_fn(|i, j| e[3 * i + j].eval(x)));
        Ok(SampledCase {
            time: self.time,
            homogeneous_bc: self.homogeneous_bc,
            u: Arc::new(vec(&self.u)),
            p: Arc::new(ten(&self.p)),
            force: Arc::new(vec(&self.force_static)),
            moment: Arc::new(ten(&self.moment_static)),
            curl_p: Arc::new(ten(&self.curl_p)),
        })
    }
}

/// Catalog lookup on the box `[0, L₁]×[0, L₂]×[0, L₃]`.
pub fn manufactured_case(name: &str, params: &MaterialParameters, lengths: [f64; 3]) -> Result<ManufacturedCase> {
    params.validate()?;
    let zero_u = || std::array::from_fn(|_| Expr::zero());
    match name {
        "zero" => Ok(ManufacturedCase::assemble(
            name,
            *params,
            lengths,
            TimeProfile::Cos { omega: 1.0 },
            zero_u(),
            std::array::from_fn(|_| Expr::zero()),
            true,
        )),
        "poly2" => {
            use Factor::Pow;
            let u = [
                Expr::term(1.0, [Pow(1), Pow(1), Pow(0)]).add(&Expr::term(0.5, [Pow(0), Pow(0), Pow(1)])),
                Expr::term(1.0, [Pow(0), Pow(1), Pow(1)]).add(&Expr::term(-0.3, [Pow(1), Pow(0), Pow(0)])),
                Expr::term(0.2, [Pow(1), Pow(0), Pow(1)]).add(&Expr::term(1.0, [Pow(0), Pow(1), Pow(0)])),
            ];
            let p = std::array::from_fn(|n| {
                let (i, j) = (n / 3, n % 3);
                let b = TRIG_B[i][j];
                let (a, c) = ((i + j) % 3, (i + j + 1) % 3);
                let mut f = [Pow(0); 3];
                f[a] = Pow(1);
                f[c] = Pow(1);
                Expr::constant(b).add(&Expr::term(b, f))
            });
            Ok(ManufacturedCase::assemble(
                name,
                *params,
                lengths,
                TimeProfile::Quadratic { c0: 1.0, c1: 0.5, c2: 0.25 },
                u,
                p,
                false,
            ))
        }
        "trig1" | "trig-mixed" => {
            let k: [f64; 3] = std::array::from_fn(|a| std::f64::consts::PI / lengths[a]);
            let s = |d: usize| -> [Factor; 3] {
                std::array::from_fn(|a| Factor::Sin {
                    k: k[a],
                    quarter: (a == d) as u32,
                })
            };
            let u = std::array::from_fn(|i| Expr::term(TRIG_A[i], s(3)));
            let mut p: TenExpr = std::array::from_fn(|n| Expr::term(TRIG_B[n / 3][n % 3], s(n % 3)));
            let mixed = name == "trig-mixed";
            if mixed {
                let c = KINK_AT * lengths[0];
                p[0] = p[0].add(&Expr::term(k[0], [Factor::Ramp { c, n: 2 }, Factor::Pow(0), Factor::Pow(0)]));
            }
            Ok(ManufacturedCase::assemble(
                name,
                *params,
                lengths,
                TimeProfile::Cos { omega: 1.0 },
                u,
                p,
                !mixed,
            ))
        }
        _ => Err(Error::UnknownCase(name.to_string())),
    }
}

/// Spatial profiles of a case sampled on one grid.
#[derive(Debug, Clone)]
pub struct SampledCase {
    pub time: TimeProfile,
    pub homogeneous_bc: bool,
    pub u: Arc<VectorField>,
    pub p: Arc<TensorField>,
    pub force: Arc<VectorField>,
    pub moment: Arc<TensorField>,
    pub curl_p: Arc<TensorField>,
}

impl SampledCase {
    pub fn state(&self, t: f64) -> SimulationState {
        let (tau, dtau, _) = self.time.eval(t);
        SimulationState {
            time: t,
            u: self.u.scaled(tau),
            u_t: self.u.scaled(dtau),
            p: self.p.scaled(tau),
            p_t: self.p.scaled(dtau),
        }
    }

    pub fn sources(&self) -> SourceTerms {
        let (time, u, force) = (self.time, self.u.clone(), self.force.clone());
        let f = Arc::new(move |t: f64| {
            let (tau, _, tau2) = time.eval(t);
            let mut out = u.scaled(tau2);
            out.axpy(-tau, &force);
            out
        });
        let (p, moment) = (self.p.clone(), self.moment.clone());
        let m = Arc::new(move |t: f64| {
            let (tau, _, tau2) = time.eval(t);
            let mut out = p.scaled(tau2);
            out.axpy(tau, &moment);
            out
        });
        SourceTerms { f: Some(f), m: Some(m) }
    }

    /// Traces of the exact solution as boundary data.
    pub fn boundary(&self) -> BoundaryData {
        if self.homogeneous_bc {
            return BoundaryData::homogeneous();
        }
        let time = self.time;
        let (u, p) = (self.u.clone(), self.p.clone());
        let (u2, p2) = (self.u.clone(), self.p.clone());
        BoundaryData::from_signals(
            Some(Arc::new(move |t| u.scaled(time.eval(t).0))),
            Some(Arc::new(move |t| p.scaled(time.eval(t).0))),
        )
        .with_rates(
            Some(Arc::new(move |t| u2.scaled(time.eval(t).1))),
            Some(Arc::new(move |t| p2.scaled(time.eval(t).1))),
        )
    }
}

/// Largest interior (two or more nodes from the boundary) residual of the discrete equations
/// evaluated on the sampled exact solution at time `t`: `(u part, P part)`.
pub fn source_residual(case: &ManufacturedCase, grid: &CartesianGrid, t: f64) -> Result<(f64, f64)> {
    let sc = case.on_grid(grid)?;
    let state = sc.state(t);
    let (au, ap) = rhs(&state, &case.params, &sc.sources(), t)?;
    let tau2 = case.time.eval(t).2;
    let n = grid.counts();
    let deep = |idx: usize| {
        let c = grid.coords(idx);
        (0..3).all(|a| c[a] >= 2 && c[a] + 2 < n[a])
    };
    let mut ru: f64 = 0.0;
    let mut rp: f64 = 0.0;
    for idx in (0..grid.len()).filter(|&i| deep(i)) {
        for a in 0..3 {
            ru = ru.max((au.comps[a][idx] - tau2 * sc.u.comps[a][idx]).abs());
        }
        for a in 0..9 {
            rp = rp.max((ap.comps[a][idx] - tau2 * sc.p.comps[a][idx]).abs());
        }
    }
    Ok((ru, rp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyOptions {
    pub t_final: f64,
    /// `dt = dt_per_h · h_min`, capped by the stability limit.
    pub dt_per_h: f64,
    pub cfl_safety: f64,
    /// Interior box as fractions of each edge.
    pub interior: (f64, f64),
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            t_final: 0.5,
            dt_per_h: 0.2,
            cfl_safety: 0.9,
            interior: (0.25, 0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub u_interior: f64,
    pub u_global: f64,
    pub p_interior: f64,
    pub p_global: f64,
    pub curl_p: f64,
}

/// Least-squares slope of `log e` against `log h` for one error column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderFit {
    pub quantity: String,
    /// `None` when every error sits at the floor or the sequence is not monotone.
    pub order: Option<f64>,
    pub monotone: bool,
    pub at_floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub case: String,
    pub options: StudyOptions,
    pub rows: Vec<ConvergenceRow>,
    pub fits: Vec<OrderFit>,
}

impl ConvergenceTable {
    pub fn fit(&self, quantity: &str) -> Option<&OrderFit> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }

    /// Quantities whose error sequence failed to decrease.
    pub fn non_monotone(&self) -> Vec<&str> {
        self.fits.iter().filter(|f| !f.monotone).map(|f| f.quantity.as_str()).collect()
    }
}

pub const QUANTITIES: [&str; 5] = ["u_interior", "u_global", "p_interior", "p_global", "curl_p"];

impl ConvergenceRow {
    pub fn value(&self, q: &str) -> f64 {
        match q {
            "u_interior" => self.u_interior,
            "u_global" => self.u_global,
            "p_interior" => self.p_interior,
            "p_global" => self.p_global,
            "curl_p" => self.curl_p,
            _ => f64::NAN,
        }
    }
}

/// Slope of the least-squares line through `(x, y)`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn fit(rows: &[ConvergenceRow], q: &str) -> OrderFit {
    let e: Vec<f64> = rows.iter().map(|r| r.value(q)).collect();
    let at_floor = e.iter().all(|&v| v < ERROR_FLOOR);
    let monotone = at_floor || e.windows(2).all(|w| w[1] < w[0]);
    let order = if at_floor || !monotone || rows.len() < 2 {
        None
    } else {
        let lh: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
        let le: Vec<f64> = e.iter().map(|v| v.ln()).collect();
        Some(least_squares_slope(&lh, &le))
    };
    OrderFit {
        quantity: q.to_string(),
        order,
        monotone,
        at_floor,
    }
}

/// One run of `case` on a cube-shaped `n³` grid of the case's box.
pub fn convergence_run(case: &ManufacturedCase, n: usize, opts: &StudyOptions) -> Result<ConvergenceRow> {
    let grid = CartesianGrid::new(case.lengths, [n; 3])?;
    let sc = case.on_grid(&grid)?;
    let h = grid.h_min();
    let dt = (opts.dt_per_h * h).min(cfl_timestep(&case.params, &grid, opts.cfl_safety)?);
    let spec = RunSpec {
        initial: sc.state(0.0),
        params: case.params,
        sources: sc.sources(),
        bc: sc.boundary(),
        t_final: opts.t_final,
        dt,
        record_every: usize::MAX,
        keep_states: true,
        compatibility_tol: Some(1e-12),
    };
    let traj = run_simulation(&spec)?;
    let last = traj.states.last().expect("final state recorded");
    let exact = sc.state(opts.t_final);
    let l = grid.lengths();
    let vbox = grid.node_box(
        std::array::from_fn(|a| opts.interior.0 * l[a]),
        std::array::from_fn(|a| opts.interior.1 * l[a]),
    )?;
    let du = |i: usize| (0..3).map(|a| (last.u.comps[a][i] - exact.u.comps[a][i]).powi(2)).sum::<f64>();
    let dp = |i: usize| (0..9).map(|a| (last.p.comps[a][i] - exact.p.comps[a][i]).powi(2)).sum::<f64>();
    let curl_h = Operators::new(&grid).curl_tensor(&last.p);
    let tau = case.time.eval(opts.t_final).0;
    let dc = |i: usize| {
        (0..9)
            .map(|a| (curl_h.comps[a][i] - tau * sc.curl_p.comps[a][i]).powi(2))
            .sum::<f64>()
    };
    Ok(ConvergenceRow {
        n,
        h,
        dt: traj.dt,
        steps: *traj.steps.last().unwrap_or(&0),
        u_interior: integrate_over(&grid, &vbox, du).sqrt(),
        u_global: integrate_with(&grid, du).sqrt(),
        p_interior: integrate_over(&grid, &vbox, dp).sqrt(),
        p_global: integrate_with(&grid, dp).sqrt(),
        curl_p: integrate_with(&grid, dc).sqrt(),
    })
}

/// Runs every resolution (in parallel) and fits orders.
pub fn convergence_study(case: &ManufacturedCase, resolutions: &[usize], opts: &StudyOptions) -> Result<ConvergenceTable> {
    if resolutions.is_empty() || resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "resolutions {resolutions:?} must be nonempty and strictly increasing"
        )));
    }
    if !(opts.t_final > 0.0) || !(opts.dt_per_h > 0.0) {
        return Err(Error::InvalidArgument("final time and dt/h must be positive".into()));
    }
    let rows = resolutions
        .par_iter()
        .map(|&n| convergence_run(case, n, opts))
        .collect::<Result<Vec<_>>>()?;
    let fits = QUANTITIES.iter().map(|q| fit(&rows, q)).collect();
    Ok(ConvergenceTable {
        case: case.name.clone(),
        options: *opts,
        rows,
        fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: [f64; 3] = [1.0; 3];

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5;
        (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn factor_derivatives_match_finite_differences() {
        let fs = [
            Factor::Pow(3),
            Factor::Sin { k: 2.5, quarter: 0 },
            Factor::Sin { k: 1.5, quarter: 3 },
            Factor::Ramp { c: 0.4, n: 2 },
        ];
        for f in fs {
            let (a, g) = f.derivative();
            for x in [0.1, 0.55, 0.9] {
                assert!((a * g.eval(x) - fd(|y| f.eval(y), x)).abs() < 1e-8, "{f:?} at {x}");
            }
        }
    }

    #[test]
    fn unknown_case_rejected() {
        let e = manufactured_case("cubic", &mms_parameters(), UNIT).unwrap_err();
        assert!(matches!(e, Error::UnknownCase(_)));
    }

    #[test]
    fn zero_case_has_zero_sources() {
        let c = manufactured_case("zero", &mms_parameters(), UNIT).unwrap();
        assert_eq!(c.f_at([0.3, 0.4, 0.5], 0.7), [0.0; 3]);
        assert_eq!(c.m_at([0.3, 0.4, 0.5], 0.7), [0.0; 9]);
    }

    #[test]
    fn trig1_force_at_center_matches_symbolic_value() {
        // Independent symbolic evaluation at x = (1/2, 1/2, 1/2), t = 0.
        let c = manufactured_case("trig1", &mms_parameters(), UNIT).unwrap();
        let f = c.f_at([0.5; 3], 0.0);
        for i in 0..3 {
            assert!((f[i] - TRIG1_F_CENTER[i]).abs() < 1e-12 * TRIG1_F_CENTER[i].abs(), "{f:?}");
        }
    }

    const TRIG1_F_CENTER: [f64; 3] = [45.753566820463364664, 22.688287851016294738, -13.527550819753053670];

    #[test]
    fn trig1_traces_vanish() {
        let c = manufactured_case("trig1", &mms_parameters(), UNIT).unwrap();
        for x in [[0.0, 0.3, 0.7], [0.4, 1.0, 0.2], [0.6, 0.1, 0.0]] {
            assert!(c.u_at(x, 0.3).iter().all(|v| v.abs() < 1e-15));
            let p = c.p_at(x, 0.3);
            let k = (0..3).find(|&a| x[a] == 0.0 || x[a] == 1.0).unwrap();
            for n in 0..9 {
                if n % 3 != k {
                    assert!(p[n].abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn kink_feature_is_curl_free() {
        let p = mms_parameters();
        let a = manufactured_case("trig1", &p, UNIT).unwrap();
        let b = manufactured_case("trig-mixed", &p, UNIT).unwrap();
        for x in [[0.7, 0.3, 0.4], [0.2, 0.5, 0.9]] {
            for n in 0..9 {
                assert!((a.curl_p[n].eval(x) - b.curl_p[n].eval(x)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sources_reproduce_equations_pointwise() {
        // σ, micro and curl curl from a tensor-level oracle using finite differences of the closed forms.
        let p = mms_parameters();
        let c = manufactured_case("trig-mixed", &p, UNIT).unwrap();
        let x0 = [0.31, 0.47, 0.73];
        let t = 0.4;
        let h = 1e-4;
        let grad_u = |x: [f64; 3]| -> crate::model::Tensor3 {
            crate::model::Tensor3::from_fn(|i, j| {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                (c.u_at(xp, t)[i] - c.u_at(xm, t)[i]) / (2.0 * h)
            })
        };
        let stress = |x: [f64; 3]| {
            let pt = crate::model::Tensor3::from_flat(c.p_at(x, t));
            crate::model::cauchy_stress(&p, &(grad_u(x) - pt))
        };
        let mut div = [0.0; 3];
        for j in 0..3 {
            let mut xp = x0;
            let mut xm = x0;
            xp[j] += h;
            xm[j] -= h;
            let (sp, sm) = (stress(xp), stress(xm));
            for (i, d) in div.iter_mut().enumerate() {
                *d += (sp[(i, j)] - sm[(i, j)]) / (2.0 * h);
            }
        }
        let utt = c.u_at(x0, t).map(|v| -v);
        let f = c.f_at(x0, t);
        for i in 0..3 {
            assert!((f[i] - (utt[i] - div[i])).abs() < 1e-5, "{i}: {} vs {}", f[i], utt[i] - div[i]);
        }
    }

    #[test]
    fn poly2_sources_are_exact_on_the_grid() {
        let c = manufactured_case("poly2", &mms_parameters(), UNIT).unwrap();
        let (ru, rp) = source_residual(&c, &CartesianGrid::cube(7).unwrap(), 0.3).unwrap();
        assert!(ru < 1e-12 && rp < 1e-12, "{ru} {rp}");
    }

    #[test]
    fn trig_residual_converges_at_second_order() {
        for name in ["trig1", "trig-mixed"] {
            let c = manufactured_case(name, &mms_parameters(), UNIT).unwrap();
            let r: Vec<(f64, f64)> = [17, 33]
                .iter()
                .map(|&n| source_residual(&c, &CartesianGrid::cube(n).unwrap(), 0.2).unwrap())
                .collect();
            let ou = (r[0].0 / r[1].0).log2();
            let op = (r[0].1 / r[1].1).log2();
            assert!(ou > 1.8 && op > 1.8, "{name}: {ou} {op}");
        }
    }

    #[test]
    fn least_squares_recovers_power_law() {
        let h = [0.5, 0.25, 0.125];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powf(1.7)).collect();
        let s = least_squares_slope(&h.map(f64::ln), &e.iter().map(|v| v.ln()).collect::<Vec<_>>());
        assert!((s - 1.7).abs() < 1e-12);
    }

    #[test]
    fn resolutions_must_increase() {
        let c = manufactured_case("zero", &mms_parameters(), UNIT).unwrap();
        assert!(convergence_study(&c, &[9, 9], &StudyOptions::default()).is_err());
    }
}
