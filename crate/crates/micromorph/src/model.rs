//! Constitutive parameters and pointwise tensor algebra.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Isotropic constants of the relaxed micromorphic model plus the characteristic length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParameters {
    pub mu_e: f64,
    pub lambda_e: f64,
    pub mu_c: f64,
    pub mu_micro: f64,
    pub lambda_micro: f64,
    #[serde(rename = "L_c")]
    pub l_c: f64,
}

impl MaterialParameters {
    pub const fn new(
        mu_e: f64,
        lambda_e: f64,
        mu_c: f64,
        mu_micro: f64,
        lambda_micro: f64,
        l_c: f64,
    ) -> Self {
        Self {
            mu_e,
            lambda_e,
            mu_c,
            mu_micro,
            lambda_micro,
            l_c,
        }
    }

    /// μ_e = μ_micro = L_c = 1, everything else 0.
    pub const fn reference() -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0, 0.0, 1.0)
    }

    /// Names of every violated admissibility inequality (empty when admissible).
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let all = [
            self.mu_e,
            self.lambda_e,
            self.mu_c,
            self.mu_micro,
            self.lambda_micro,
            self.l_c,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            out.push("all parameters finite".to_string());
        }
        if !(self.mu_e > 0.0) {
            out.push("mu_e > 0".to_string());
        }
        if !(2.0 * self.mu_e + 3.0 * self.lambda_e > 0.0) {
            out.push("2·mu_e+3·lambda_e > 0".to_string());
        }
        if !(self.mu_c >= 0.0) {
            out.push("mu_c >= 0".to_string());
        }
        if !(self.mu_micro > 0.0) {
            out.push("mu_micro > 0".to_string());
        }
        if !(2.0 * self.mu_micro + 3.0 * self.lambda_micro > 0.0) {
            out.push("2·mu_micro+3·lambda_micro > 0".to_string());
        }
        if !(self.l_c >= 0.0) {
            out.push("L_c >= 0".to_string());
        }
        out
    }

    pub fn validate(self) -> Result<Self> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidParameters(v))
        }
    }

    /// Every modulus multiplied by `alpha`; L_c unchanged.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            mu_e: alpha * self.mu_e,
            lambda_e: alpha * self.lambda_e,
            mu_c: alpha * self.mu_c,
            mu_micro: alpha * self.mu_micro,
            lambda_micro: alpha * self.lambda_micro,
            l_c: self.l_c,
        }
    }

    /// Curvature modulus μ_micro·L_c².
    #[inline]
    pub fn curvature_modulus(&self) -> f64 {
        self.mu_micro * self.l_c * self.l_c
    }
}

/// 3×3 real tensor, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tensor3(pub [[f64; 3]; 3]);

impl Tensor3 {
    pub const ZERO: Tensor3 = Tensor3([[0.0; 3]; 3]);
    pub const IDENTITY: Tensor3 = Tensor3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        }
        Tensor3(m)
    }

    /// Row-major flat view: entry (i, j) at `3 i + j`.
    pub fn from_flat(a: [f64; 9]) -> Self {
        Self::from_fn(|i, j| a[3 * i + j])
    }

    pub fn to_flat(&self) -> [f64; 9] {
        let mut a = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                a[3 * i + j] = self.0[i][j];
            }
        }
        a
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn sym(&self) -> Self {
        Self::from_fn(|i, j| 0.5 * (self.0[i][j] + self.0[j][i]))
    }

    pub fn skew(&self) -> Self {
        Self::from_fn(|i, j| 0.5 * (self.0[i][j] - self.0[j][i]))
    }

    /// Traceless part.
    pub fn dev(&self) -> Self {
        let t = self.trace() / 3.0;
        Self::from_fn(|i, j| self.0[i][j] - if i == j { t } else { 0.0 })
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    /// Returns (sym X, skew X, tr X).
    pub fn decompose(&self) -> (Self, Self, f64) {
        (self.sym(), self.skew(), self.trace())
    }
}

impl Index<(usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Add for Tensor3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] + o.0[i][j])
    }
}

impl AddAssign for Tensor3 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Tensor3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] - o.0[i][j])
    }
}

impl Neg for Tensor3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::from_fn(|i, j| -self.0[i][j])
    }
}

impl Mul<Tensor3> for f64 {
    type Output = Tensor3;
    fn mul(self, t: Tensor3) -> Tensor3 {
        Tensor3::from_fn(|i, j| self * t.0[i][j])
    }
}

/// σ(E) = 2μ_e sym E + 2μ_c skew E + λ_e tr(E) Id.
#[inline]
pub fn cauchy_stress(p: &MaterialParameters, e: &Tensor3) -> Tensor3 {
    let tr = e.trace();
    Tensor3::from_fn(|i, j| {
        let (a, b) = (e.0[i][j], e.0[j][i]);
        p.mu_e * (a + b) + p.mu_c * (a - b) + if i == j { p.lambda_e * tr } else { 0.0 }
    })
}

/// 2μ_micro sym P + λ_micro tr(P) Id.
#[inline]
pub fn micro_stress(p: &MaterialParameters, pt: &Tensor3) -> Tensor3 {
    let tr = pt.trace();
    Tensor3::from_fn(|i, j| {
        p.mu_micro * (pt.0[i][j] + pt.0[j][i]) + if i == j { p.lambda_micro * tr } else { 0.0 }
    })
}

/// Stored-energy density without curvature, grouped as deviator plus trace so that
/// every summand is nonnegative for admissible parameters.
pub fn local_energy_density(p: &MaterialParameters, e: &Tensor3, pt: &Tensor3) -> f64 {
    let (es, ek, etr) = e.decompose();
    let (ps, _, ptr) = pt.decompose();
    p.mu_e * es.dev().norm_squared()
        + (2.0 * p.mu_e + 3.0 * p.lambda_e) / 6.0 * etr * etr
        + p.mu_c * ek.norm_squared()
        + p.mu_micro * ps.dev().norm_squared()
        + (2.0 * p.mu_micro + 3.0 * p.lambda_micro) / 6.0 * ptr * ptr
}
