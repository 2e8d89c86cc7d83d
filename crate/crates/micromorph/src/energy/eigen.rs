//! Extreme generalized eigenpairs `A x = λ B x` (A symmetric, B symmetric positive definite):
//! matrix-free LOBPCG and a dense reference solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// A symmetric linear map on `R^n`.
pub trait LinearMap: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> LinearMap for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.1)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LobpcgOptions {
    pub max_iter: usize,
    /// Relative residual `‖A x − λ B x‖ / (|λ| ‖B x‖)` at which a pair counts as converged.
    pub tol: f64,
    pub largest: bool,
}

impl Default for LobpcgOptions {
    fn default() -> Self {
        Self {
            max_iter: 400,
            tol: 1e-8,
            largest: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

fn apply_cols(op: &dyn LinearMap, s: &DMatrix<f64>) -> DMatrix<f64> {
    let cols: Vec<Vec<f64>> = (0..s.ncols())
        .map(|c| op.apply(s.column(c).as_slice()))
        .collect();
    DMatrix::from_fn(s.nrows(), s.ncols(), |r, c| cols[c][r])
}

/// Rayleigh–Ritz on span(S): returns (values, coefficients) of the `m` extreme Ritz pairs.
fn rayleigh_ritz(
    s: &DMatrix<f64>,
    a_s: &DMatrix<f64>,
    b_s: &DMatrix<f64>,
    m: usize,
    largest: bool,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let gb = s.transpose() * b_s;
    let ga = s.transpose() * a_s;
    let gb = 0.5 * (&gb + gb.transpose());
    let ga = 0.5 * (&ga + ga.transpose());
    let eb = SymmetricEigen::new(gb);
    let top = eb.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let keep: Vec<usize> = (0..eb.eigenvalues.len())
        .filter(|&i| eb.eigenvalues[i] > 1e-13 * top)
        .collect();
    if keep.len() < m {
        return Err(Error::Eigen("search space collapsed".into()));
    }
    let t = DMatrix::from_fn(s.ncols(), keep.len(), |r, c| {
        eb.eigenvectors[(r, keep[c])] / eb.eigenvalues[keep[c]].sqrt()
    });
    let h = t.transpose() * ga * &t;
    let h = 0.5 * (&h + h.transpose());
    let eh = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eh.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eh.eigenvalues[a].total_cmp(&eh.eigenvalues[b]));
    if largest {
        order.reverse();
    }
    let sel = &order[..m];
    let vals = sel.iter().map(|&i| eh.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(keep.len(), m, |r, c| eh.eigenvectors[(r, sel[c])]);
    Ok((vals, t * y))
}

/// Block LOBPCG started from the columns of `x0`.
pub fn lobpcg(
    a: &dyn LinearMap,
    b: &dyn LinearMap,
    x0: &[Vec<f64>],
    opts: LobpcgOptions,
) -> Result<EigenResult> {
    let n = a.dim();
    let m = x0.len();
    if m == 0 || n < 3 * m {
        return Err(Error::Eigen(format!("block of {m} vectors unsuitable for dimension {n}")));
    }
    let mut x = DMatrix::from_fn(n, m, |r, c| x0[c][r]);
    let (mut vals, coef) = rayleigh_ritz(&x, &apply_cols(a, &x), &apply_cols(b, &x), m, opts.largest)?;
    x = &x * coef;
    let mut p: Option<DMatrix<f64>> = None;
    let mut residuals = vec![f64::INFINITY; m];
    let mut it = 0;
    while it < opts.max_iter {
        let ax = apply_cols(a, &x);
        let bx = apply_cols(b, &x);
        let mut r = &ax - &bx * DMatrix::from_diagonal(&DVector::from_vec(vals.clone()));
        for c in 0..m {
            let rn = r.column(c).norm();
            let scale = vals[c].abs().max(1e-300) * bx.column(c).norm();
            residuals[c] = rn / scale;
            if rn > 0.0 {
                r.column_mut(c).scale_mut(1.0 / rn);
            }
        }
        if residuals.iter().all(|&v| v < opts.tol) {
            break;
        }
        it += 1;
        let blocks: Vec<&DMatrix<f64>> = match &p {
            Some(pm) => vec![&x, &r, pm],
            None => vec![&x, &r],
        };
        let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
        let mut s = DMatrix::zeros(n, cols);
        let mut off = 0;
        for bl in &blocks {
            s.columns_mut(off, bl.ncols()).copy_from(bl);
            off += bl.ncols();
        }
        let a_s = apply_cols(a, &s);
        let b_s = apply_cols(b, &s);
        let rr = rayleigh_ritz(&s, &a_s, &b_s, m, opts.largest).or_else(|_| {
            // Drop the conjugate directions and retry once.
            let s2 = s.columns(0, 2 * m).into_owned();
            let a2 = a_s.columns(0, 2 * m).into_owned();
            let b2 = b_s.columns(0, 2 * m).into_owned();
            rayleigh_ritz(&s2, &a2, &b2, m, opts.largest).map(|(v, c)| {
                let mut full = DMatrix::zeros(cols, m);
                full.rows_mut(0, 2 * m).copy_from(&c);
                (v, full)
            })
        })?;
        vals = rr.0;
        let coef = rr.1;
        let x_new = &s * &coef;
        let mut cp = coef.clone();
        cp.rows_mut(0, m).fill(0.0);
        let mut pn = &s * cp;
        for c in 0..m {
            let nrm = pn.column(c).norm();
            if nrm > 0.0 {
                pn.column_mut(c).scale_mut(1.0 / nrm);
            }
        }
        p = Some(pn);
        x = x_new;
    }
    let vectors = (0..m).map(|c| x.column(c).iter().copied().collect()).collect();
    Ok(EigenResult {
        values: vals,
        vectors,
        iterations: it,
        residuals,
    })
}

/// Dense matrix of a linear map, assembled column by column.
pub fn assemble_dense(op: &dyn LinearMap) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let col = op.apply(&e);
        m.column_mut(c).copy_from_slice(&col);
        e[c] = 0.0;
    }
    m
}

/// All generalized eigenvalues (ascending) of dense `A`, `B` via Cholesky reduction.
pub fn dense_generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let bs = 0.5 * (b + b.transpose());
    let chol = bs
        .cholesky()
        .ok_or_else(|| Error::Eigen("B is not positive definite".into()))?;
    let l = chol.l();
    let linv_a = l
        .solve_lower_triangular(&(0.5 * (a + a.transpose())))
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let c = 0.5 * (&c + c.transpose());
    let mut v: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}
