//! Discrete gradient, row-wise curl and divergence built from per-axis difference matrices.
//!
//! Every operator is a sum of terms `D_a` acting along one axis. The `D_a` for distinct
//! axes commute, so `Div∘Curl = 0` and `Curl∘Grad = 0` hold exactly (up to round-off).

use rayon::prelude::*;

use crate::grid::{BoundaryClosure, CartesianGrid, NodalField, ScalarField, TensorField, Topology, VectorField};

/// Sparse rows of a one-dimensional operator: `rows[r]` lists `(column, coefficient)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisOperator {
    pub axis: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl AxisOperator {
    /// First-derivative matrix along `axis`.
    pub fn derivative(grid: &CartesianGrid, axis: usize) -> Self {
        let n = grid.counts()[axis];
        let h = grid.spacing()[axis];
        let c = 0.5 / h;
        let mut rows = Vec::with_capacity(n);
        for r in 0..n {
            let row = match grid.topology() {
                Topology::Periodic => vec![((r + n - 1) % n, -c), ((r + 1) % n, c)],
                Topology::Bounded if r > 0 && r + 1 < n => vec![(r - 1, -c), (r + 1, c)],
                Topology::Bounded => match grid.closure() {
                    BoundaryClosure::SummationByParts if r == 0 => vec![(0, -1.0 / h), (1, 1.0 / h)],
                    BoundaryClosure::SummationByParts => vec![(n - 2, -1.0 / h), (n - 1, 1.0 / h)],
                    BoundaryClosure::OneSidedSecondOrder if r == 0 => {
                        vec![(0, -3.0 * c), (1, 4.0 * c), (2, -c)]
                    }
                    BoundaryClosure::OneSidedSecondOrder => {
                        vec![(n - 3, c), (n - 2, -4.0 * c), (n - 1, 3.0 * c)]
                    }
                },
            };
            rows.push(row);
        }
        Self { axis, rows }
    }

    pub fn transpose(&self) -> Self {
        let n = self.rows.len();
        let mut rows = vec![Vec::new(); n];
        for (r, row) in self.rows.iter().enumerate() {
            for &(col, v) in row {
                rows[col].push((r, v));
            }
        }
        Self { axis: self.axis, rows }
    }

    /// `out += alpha · (D src)` along this axis.
    pub fn apply_add(&self, grid: &CartesianGrid, src: &[f64], alpha: f64, out: &mut [f64]) {
        let stride = grid.stride(self.axis);
        let plane = grid.plane_len();
        let nx = grid.counts()[0];
        let axis = self.axis;
        out.par_chunks_mut(plane).enumerate().for_each(|(k, chunk)| {
            for (local, o) in chunk.iter_mut().enumerate() {
                let idx = k * plane + local;
                let pos = match axis {
                    0 => local % nx,
                    1 => local / nx,
                    _ => k,
                };
                let base = idx - pos * stride;
                let mut s = 0.0;
                for &(col, v) in &self.rows[pos] {
                    s += v * src[base + col * stride];
                }
                *o += alpha * s;
            }
        });
    }

    pub fn apply(&self, grid: &CartesianGrid, src: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        self.apply_add(grid, src, 1.0, &mut out);
        out
    }
}

/// The three axis derivative matrices of one grid (and their transposes).
#[derive(Debug, Clone)]
pub struct Operators {
    pub grid: CartesianGrid,
    d: [AxisOperator; 3],
    dt: [AxisOperator; 3],
}

impl Operators {
    pub fn new(grid: &CartesianGrid) -> Self {
        let d = [0, 1, 2].map(|a| AxisOperator::derivative(grid, a));
        let dt = [0, 1, 2].map(|a| d[a].transpose());
        Self { grid: *grid, d, dt }
    }

    pub fn axis(&self, a: usize) -> &AxisOperator {
        &self.d[a]
    }

    pub fn axis_transpose(&self, a: usize) -> &AxisOperator {
        &self.dt[a]
    }

    #[inline]
    fn op(&self, a: usize, transpose: bool) -> &AxisOperator {
        if transpose {
            &self.dt[a]
        } else {
            &self.d[a]
        }
    }

    /// `(∇u)_{ij} = D_j u_i`
    pub fn gradient(&self, u: &VectorField) -> TensorField {
        let mut out = TensorField::zeros(&self.grid);
        for i in 0..3 {
            for j in 0..3 {
                self.d[j].apply_add(&self.grid, &u.comps[i], 1.0, &mut out.comps[3 * i + j]);
            }
        }
        out
    }

    /// Adjoint of `gradient` in the plain Euclidean inner product.
    pub fn gradient_transpose(&self, t: &TensorField) -> VectorField {
        let mut out = VectorField::zeros(&self.grid);
        for i in 0..3 {
            for j in 0..3 {
                self.dt[j].apply_add(&self.grid, &t.comps[3 * i + j], 1.0, &mut out.comps[i]);
            }
        }
        out
    }

    fn curl_rows_add(&self, src: &[&[f64]; 3], dst: &mut [&mut Vec<f64>; 3], transpose: bool) {
        // curl v = (D1 v2 − D2 v1, D2 v0 − D0 v2, D0 v1 − D1 v0); the transpose swaps roles.
        let g = &self.grid;
        if !transpose {
            self.op(1, false).apply_add(g, src[2], 1.0, dst[0]);
            self.op(2, false).apply_add(g, src[1], -1.0, dst[0]);
            self.op(2, false).apply_add(g, src[0], 1.0, dst[1]);
            self.op(0, false).apply_add(g, src[2], -1.0, dst[1]);
            self.op(0, false).apply_add(g, src[1], 1.0, dst[2]);
            self.op(1, false).apply_add(g, src[0], -1.0, dst[2]);
        } else {
            self.op(2, true).apply_add(g, src[1], 1.0, dst[0]);
            self.op(1, true).apply_add(g, src[2], -1.0, dst[0]);
            self.op(0, true).apply_add(g, src[2], 1.0, dst[1]);
            self.op(2, true).apply_add(g, src[0], -1.0, dst[1]);
            self.op(1, true).apply_add(g, src[0], 1.0, dst[2]);
            self.op(0, true).apply_add(g, src[1], -1.0, dst[2]);
        }
    }

    fn curl_tensor_impl(&self, p: &TensorField, transpose: bool) -> TensorField {
        let mut out = TensorField::zeros(&self.grid);
        let [c0, c1, c2, c3, c4, c5, c6, c7, c8] = &mut out.comps;
        let mut rows = [[c0, c1, c2], [c3, c4, c5], [c6, c7, c8]];
        for (i, row) in rows.iter_mut().enumerate() {
            let src = [&p.comps[3 * i][..], &p.comps[3 * i + 1][..], &p.comps[3 * i + 2][..]];
            self.curl_rows_add(&src, row, transpose);
        }
        out
    }

    /// Row-wise curl: row `i` of the result is the curl of row `i` of `P`.
    pub fn curl_tensor(&self, p: &TensorField) -> TensorField {
        self.curl_tensor_impl(p, false)
    }

    pub fn curl_tensor_transpose(&self, p: &TensorField) -> TensorField {
        self.curl_tensor_impl(p, true)
    }

    /// `(Div S)_i = Σ_j D_j S_{ij}`
    pub fn div_tensor(&self, s: &TensorField) -> VectorField {
        let mut out = VectorField::zeros(&self.grid);
        for i in 0..3 {
            for j in 0..3 {
                self.d[j].apply_add(&self.grid, &s.comps[3 * i + j], 1.0, &mut out.comps[i]);
            }
        }
        out
    }

    pub fn curl_vector(&self, v: &VectorField) -> VectorField {
        self.curl_vector_impl(v, false)
    }

    pub fn curl_vector_transpose(&self, v: &VectorField) -> VectorField {
        self.curl_vector_impl(v, true)
    }

    fn curl_vector_impl(&self, v: &VectorField, transpose: bool) -> VectorField {
        let mut out = VectorField::zeros(&self.grid);
        let [a, b, c] = &mut out.comps;
        let src = [&v.comps[0][..], &v.comps[1][..], &v.comps[2][..]];
        self.curl_rows_add(&src, &mut [a, b, c], transpose);
        out
    }

    pub fn div_vector(&self, v: &VectorField) -> ScalarField {
        let mut out = ScalarField::zeros(&self.grid);
        for j in 0..3 {
            self.d[j].apply_add(&self.grid, &v.comps[j], 1.0, &mut out.data);
        }
        out
    }

    pub fn div_vector_transpose(&self, s: &ScalarField) -> VectorField {
        let mut out = VectorField::zeros(&self.grid);
        for j in 0..3 {
            self.dt[j].apply_add(&self.grid, &s.data, 1.0, &mut out.comps[j]);
        }
        out
    }
}

/// `∂_axis f` on the nodes of `f`'s grid.
pub fn axis_derivative(f: &ScalarField, axis: usize) -> ScalarField {
    let op = AxisOperator::derivative(&f.grid, axis);
    ScalarField {
        grid: f.grid,
        data: op.apply(&f.grid, &f.data),
    }
}

pub fn gradient(u: &VectorField) -> TensorField {
    Operators::new(&u.grid).gradient(u)
}

pub fn curl_tensor(p: &TensorField) -> TensorField {
    Operators::new(&p.grid).curl_tensor(p)
}

pub fn div_tensor(s: &TensorField) -> VectorField {
    Operators::new(&s.grid).div_tensor(s)
}

pub fn curl_vector(v: &VectorField) -> VectorField {
    Operators::new(&v.grid).curl_vector(v)
}

pub fn div_vector(v: &VectorField) -> ScalarField {
    Operators::new(&v.grid).div_vector(v)
}

/// Worst relative defects `(‖Div Curl P‖/‖P‖, ‖Curl Grad u‖/‖u‖)` in the discrete L² norm.
pub fn identity_defects(u: &VectorField, p: &TensorField) -> (f64, f64) {
    let ops = Operators::new(&u.grid);
    let dc = ops.div_tensor(&ops.curl_tensor(p));
    let cg = ops.curl_tensor(&ops.gradient(u));
    let r1 = rel(&dc, p);
    let r2 = rel(&cg, u);
    (r1, r2)
}

fn rel<A: NodalField, B: NodalField>(num: &A, den: &B) -> f64 {
    let n = crate::grid::l2_norm_squared(num, None).unwrap_or(f64::NAN).sqrt();
    let d = crate::grid::l2_norm_squared(den, None).unwrap_or(f64::NAN).sqrt();
    if d == 0.0 {
        n
    } else {
        n / d
    }
}
