//! Plane-wave reduction of the equations of motion and band-gap detection.
//!
//! Substituting `(u, P) = (û, P̂) exp(i(⟨k, x⟩ − ωt))` gives `ω² w = B(k) w` with
//! `w = (û₁, û₂, û₃, P̂₁₁, …, P̂₃₃)` and
//!
//! ```text
//! B_u w = −i σ(E) k
//! B_P w = −σ(E) + 2μ_micro sym P̂ + λ_micro tr P̂ Id + μ_micro L_c² (|k|² P̂_i − ⟨P̂_i, k⟩ k)   (row i)
//! E     = i û ⊗ k − P̂
//! ```

use nalgebra::{Complex, SMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::CartesianGrid;
use crate::model::{cauchy_stress, micro_stress, MaterialParameters, Tensor3};

pub type C64 = Complex<f64>;
pub type Matrix12 = SMatrix<C64, 12, 12>;

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveMatrix {
    pub k: [f64; 3],
    pub b: Matrix12,
}

fn split(t: &[C64; 9]) -> (Tensor3, Tensor3) {
    (
        Tensor3::from_fn(|i, j| t[3 * i + j].re),
        Tensor3::from_fn(|i, j| t[3 * i + j].im),
    )
}

fn apply(p: &MaterialParameters, k: [f64; 3], w: &[C64; 12]) -> [C64; 12] {
    let i_unit = C64::new(0.0, 1.0);
    let mut e = [C64::new(0.0, 0.0); 9];
    for a in 0..3 {
        for b in 0..3 {
            e[3 * a + b] = i_unit * w[a] * k[b] - w[3 + 3 * a + b];
        }
    }
    let (er, ei) = split(&e);
    let (sr, si) = (cauchy_stress(p, &er), cauchy_stress(p, &ei));
    let sigma = |a: usize, b: usize| C64::new(sr.0[a][b], si.0[a][b]);
    let pw: [C64; 9] = std::array::from_fn(|c| w[3 + c]);
    let (pr, pi) = split(&pw);
    let (mr, mi) = (micro_stress(p, &pr), micro_stress(p, &pi));
    let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    let kappa = p.curvature_modulus();

    let mut out = [C64::new(0.0, 0.0); 12];
    for a in 0..3 {
        let mut s = C64::new(0.0, 0.0);
        for b in 0..3 {
            s += sigma(a, b) * k[b];
        }
        out[a] = -i_unit * s;
    }
    for a in 0..3 {
        let pk: C64 = (0..3).map(|b| pw[3 * a + b] * k[b]).sum();
        for b in 0..3 {
            out[3 + 3 * a + b] = -sigma(a, b)
                + C64::new(mr.0[a][b], mi.0[a][b])
                + kappa * (pw[3 * a + b] * kk - pk * k[b]);
        }
    }
    out
}

/// Assemble `B(k)` column by column from the linear map above.
pub fn assemble_plane_wave_matrix(p: &MaterialParameters, k: [f64; 3]) -> PlaneWaveMatrix {
    let mut b = Matrix12::zeros();
    for c in 0..12 {
        let mut e = [C64::new(0.0, 0.0); 12];
        e[c] = C64::new(1.0, 0.0);
        let col = apply(p, k, &e);
        for r in 0..12 {
            b[(r, c)] = col[r];
        }
    }
    PlaneWaveMatrix { k, b }
}

impl PlaneWaveMatrix {
    /// `max |B − B*|`
    pub fn hermitian_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for r in 0..12 {
            for c in 0..12 {
                m = m.max((self.b[(r, c)] - self.b[(c, r)].conj()).norm());
            }
        }
        m
    }

    /// Eigenvalues (ω²) in ascending order.
    pub fn eigenvalues(&self) -> [f64; 12] {
        let eig = SymmetricEigen::new(self.b);
        let mut v: [f64; 12] = std::array::from_fn(|i| eig.eigenvalues[i]);
        v.sort_by(f64::total_cmp);
        v
    }

    /// Eigenpairs sorted by eigenvalue; each vector has unit Euclidean norm.
    pub fn eigenpairs(&self) -> Vec<(f64, [C64; 12])> {
        let eig = SymmetricEigen::new(self.b);
        let mut out: Vec<(f64, [C64; 12])> = (0..12)
            .map(|c| (eig.eigenvalues[c], std::array::from_fn(|r| eig.eigenvectors[(r, c)])))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Frequencies `ω = sqrt(max(λ, 0))`, ascending.
    pub fn frequencies(&self) -> [f64; 12] {
        self.eigenvalues().map(|l| l.max(0.0).sqrt())
    }
}

/// Largest phase speed `sqrt(λ_max(B(k)))/|k|` over the Nyquist wavevectors `k_a ∈ {0, π/h_a}`.
pub fn max_nyquist_speed(p: &MaterialParameters, grid: &CartesianGrid) -> Result<f64> {
    let h = grid.spacing();
    let mut c: f64 = 0.0;
    for mask in 1..8usize {
        let k: [f64; 3] = std::array::from_fn(|a| {
            if mask & (1 << a) != 0 {
                std::f64::consts::PI / h[a]
            } else {
                0.0
            }
        });
        let norm = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        let lmax = assemble_plane_wave_matrix(p, k).eigenvalues()[11];
        if !lmax.is_finite() {
            return Err(Error::Eigen(format!("non-finite eigenvalue at k = {k:?}")));
        }
        c = c.max(lmax.max(0.0).sqrt() / norm);
    }
    if c <= 0.0 {
        return Err(Error::Eigen("vanishing maximal wave speed".into()));
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionResult {
    pub direction: [f64; 3],
    pub k_samples: Vec<f64>,
    /// Twelve ascending frequencies per sample.
    pub branches: Vec<[f64; 12]>,
    pub gaps: Vec<(f64, f64)>,
}

impl DispersionResult {
    pub fn max_frequency(&self) -> f64 {
        self.branches.iter().flat_map(|b| b.iter()).fold(0.0, |m, &v| m.max(v))
    }
}

/// Frequencies along `κ·direction` for `κ` uniform on `[0, k_max]`; gaps detected at
/// resolution `1e-3·max ω`.
pub fn band_structure(
    p: &MaterialParameters,
    direction: [f64; 3],
    k_max: f64,
    samples: usize,
) -> Result<DispersionResult> {
    p.validate()?;
    if samples < 2 {
        return Err(Error::InvalidArgument(format!("samples = {samples} must be >= 2")));
    }
    if !(k_max > 0.0 && k_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("k_max = {k_max} must be > 0")));
    }
    let norm = (direction.iter().map(|d| d * d).sum::<f64>()).sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument("direction must be nonzero".into()));
    }
    let dir = direction.map(|d| d / norm);
    let k_samples: Vec<f64> = (0..samples).map(|s| k_max * s as f64 / (samples - 1) as f64).collect();
    let branches: Vec<[f64; 12]> = k_samples
        .par_iter()
        .map(|&kappa| assemble_plane_wave_matrix(p, dir.map(|d| kappa * d)).frequencies())
        .collect();
    if let Some((s, _)) = branches.iter().enumerate().find(|(_, b)| b.iter().any(|v| !v.is_finite())) {
        return Err(Error::Eigen(format!("eigen solve failed at sample {s}")));
    }
    let mut result = DispersionResult {
        direction: dir,
        k_samples,
        branches,
        gaps: Vec::new(),
    };
    let res = 1e-3 * result.max_frequency();
    result.gaps = find_band_gaps(&result, res);
    Ok(result)
}

/// Frequency intervals wider than `resolution` that no branch reaches for any `k` in the sampled range.
///
/// Sorted eigenvalues of a continuous Hermitian family are continuous, so between two adjacent
/// samples the `j`-th branch covers every value between its endpoint values.
pub fn find_band_gaps(result: &DispersionResult, resolution: f64) -> Vec<(f64, f64)> {
    let mut covered: Vec<(f64, f64)> = Vec::new();
    for (s, b) in result.branches.iter().enumerate() {
        for (j, &w) in b.iter().enumerate() {
            let (lo, hi) = match result.branches.get(s + 1) {
                Some(next) => (w.min(next[j]), w.max(next[j])),
                None => (w, w),
            };
            covered.push((lo, hi));
        }
    }
    gaps_in(covered, resolution)
}

/// Complement of the union of `covered` within its hull, keeping pieces wider than `resolution`.
/// With nothing covered the whole axis is one gap.
pub fn gaps_in(mut covered: Vec<(f64, f64)>, resolution: f64) -> Vec<(f64, f64)> {
    if covered.is_empty() {
        return vec![(0.0, f64::INFINITY)];
    }
    covered.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut gaps = Vec::new();
    let mut reach = covered[0].1;
    for &(lo, hi) in &covered[1..] {
        if lo - reach > resolution {
            gaps.push((reach, lo));
        }
        reach = reach.max(hi);
    }
    gaps
}
