//! Small dense symmetric matrices.
//!
//! Everything in the subequation catalog is a function of the ordered
//! spectrum, so the only heavy primitive here is the eigenvalue solver:
//! closed forms for `n = 2, 3` and cyclic Jacobi rotations above that.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;

use crate::error::{Error, Result};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 64;

fn check_dim(n: usize) -> Result<()> {
    if (MIN_DIM..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "dimension {n} outside [{MIN_DIM}, {MAX_DIM}]"
        )))
    }
}

/// Real symmetric `n x n` matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self {
            n,
            data: vec![0.0; n * n],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(values.len())?;
        let n = m.n;
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        Ok(m)
    }

    /// Builds from full rows; rejects anything that is not exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        check_dim(n)?;
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        for i in 0..n {
            for j in 0..i {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::InvalidInput(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(Self { n, data })
    }

    /// Builds from the upper triangle given by `f(i, j)` with `i <= j`.
    pub fn from_upper<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        Ok(m)
    }

    /// Outer product `v vᵀ`.
    pub fn outer(v: &[f64]) -> Result<Self> {
        Self::from_upper(v.len(), |i, j| v[i] * v[j])
    }

    /// Entries i.i.d. uniform on `[-1, 1]` (upper triangle, mirrored).
    pub fn random_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::from_upper(n, |_, _| rng.gen_range(-1.0..=1.0))
    }

    /// Random positive semidefinite matrix `B Bᵀ` with a random rank.
    pub fn random_psd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let rank = rng.gen_range(1..=n);
        let mut m = Self::zeros(n)?;
        for _ in 0..rank {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            m = &m + &Self::outer(&v)?;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, t: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * t).collect(),
        }
    }

    /// `self + t I`.
    pub fn shift(&self, t: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i] += t;
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    out[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// `tr A^q` for a positive integer `q`, summed over the spectrum.
    pub fn power_trace(&self, q: u32) -> Result<f64> {
        Ok(self.eigvals()?.iter().map(|l| l.powi(q as i32)).sum())
    }

    /// Ascending eigenvalues.
    pub fn eigvals(&self) -> Result<Vec<f64>> {
        check_dim(self.n)?;
        match self.n {
            2 => Ok(eig2(self)),
            3 => Ok(eig3(self).unwrap_or_else(|| jacobi(self).0)),
            _ => Ok(jacobi(self).0),
        }
    }

    /// Ascending eigenvalues and matching orthonormal eigenvectors (as
    /// columns of a row-major `n x n` array), computed by Jacobi rotations.
    pub fn eigh(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(self.n)?;
        Ok(jacobi(self))
    }

    /// Elementary symmetric functions `σ_1..σ_n` of the spectrum.
    pub fn elementary_symmetric(&self) -> Result<Vec<f64>> {
        let lambdas = self.eigvals()?;
        let n = lambdas.len();
        // coefficients of prod (1 + λ_i x)
        let mut e = vec![0.0; n + 1];
        e[0] = 1.0;
        for l in &lambdas {
            for k in (1..=n).rev() {
                e[k] += l * e[k - 1];
            }
        }
        Ok(e[1..].to_vec())
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.n).collect();
        f.debug_struct("SymMatrix")
            .field("n", &self.n)
            .field("rows", &rows)
            .finish()
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch in SymMatrix addition");
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch in SymMatrix subtraction");
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, t: f64) -> SymMatrix {
        self.scale(t)
    }
}

fn eig2(a: &SymMatrix) -> Vec<f64> {
    let (p, q, r) = (a.get(0, 0), a.get(0, 1), a.get(1, 1));
    let mid = 0.5 * (p + r);
    let rad = (0.5 * (p - r)).hypot(q);
    vec![mid - rad, mid + rad]
}

/// Trigonometric solution of the characteristic cubic. Returns `None` when
/// two roots are close enough that the `acos` branch loses accuracy; the
/// caller falls back to rotations there.
fn eig3(a: &SymMatrix) -> Option<Vec<f64>> {
    let off = a.get(0, 1).powi(2) + a.get(0, 2).powi(2) + a.get(1, 2).powi(2);
    let scale = a.frobenius_norm();
    if off == 0.0 {
        let mut d = vec![a.get(0, 0), a.get(1, 1), a.get(2, 2)];
        d.sort_by(f64::total_cmp);
        return Some(d);
    }
    let q = a.trace() / 3.0;
    let p2 = (a.get(0, 0) - q).powi(2) + (a.get(1, 1) - q).powi(2) + (a.get(2, 2) - q).powi(2)
        + 2.0 * off;
    let p = (p2 / 6.0).sqrt();
    let b = |i: usize, j: usize| (a.get(i, j) - if i == j { q } else { 0.0 }) / p;
    let det_b = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
        - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let r = (0.5 * det_b).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l_max = q + 2.0 * p * phi.cos();
    let l_min = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let l_mid = 3.0 * q - l_max - l_min;
    let mut out = vec![l_min, l_mid, l_max];
    out.sort_by(f64::total_cmp);
    let gap = (out[1] - out[0]).min(out[2] - out[1]);
    if gap < 1e-4 * scale {
        None
    } else {
        Some(out)
    }
}

/// Cyclic Jacobi rotations. Returns ascending eigenvalues and the
/// eigenvector matrix with eigenvectors as columns.
fn jacobi(a: &SymMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.n;
    let mut m = a.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * norm * 1e-2 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + col] = v[k * n + src];
        }
    }
    (values, vectors)
}

/// A unit vector in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector {
    components: Vec<f64>,
}

impl UnitVector {
    /// Accepts `components` only if it already has norm one within `1e-12`.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        check_dim(components.len())?;
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("vector norm {norm} is not 1")));
        }
        Ok(Self { components })
    }

    pub fn normalized(v: &[f64]) -> Result<Self> {
        check_dim(v.len())?;
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput("cannot normalize zero vector".into()));
        }
        Ok(Self {
            components: v.iter().map(|c| c / norm).collect(),
        })
    }

    pub fn basis(n: usize, i: usize) -> Result<Self> {
        check_dim(n)?;
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        Ok(Self { components: c })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let norm2: f64 = v.iter().map(|c| c * c).sum();
            if norm2 > 1e-4 && norm2 <= 1.0 {
                return Self::normalized(&v);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }
}

/// Orthogonal projection `P_e = e eᵀ` onto the line through `e`.
pub fn proj_line(e: &UnitVector) -> SymMatrix {
    SymMatrix::outer(e.components()).expect("unit vector has a valid dimension")
}

/// Orthogonal projection `I - P_e` onto the hyperplane perpendicular to `e`.
pub fn proj_perp(e: &UnitVector) -> SymMatrix {
    let n = e.dim();
    &SymMatrix::identity(n).expect("valid dimension") - &proj_line(e)
}

/// `P_{e⊥} - (p-1) P_e`, the Hessian of the `p`-th Riesz kernel at a unit point.
pub fn riesz_test_matrix(e: &UnitVector, p: f64) -> SymMatrix {
    &proj_perp(e) - &proj_line(e).scale(p - 1.0)
}

/// Hessian of the classical Riesz kernel `K_p` at `x`:
/// `|x|^{-p} (P_{x⊥} - (p-1) P_x)`.
pub fn riesz_hessian(x: &[f64], p: f64) -> Result<SymMatrix> {
    check_dim(x.len())?;
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("Riesz exponent {p} < 1")));
    }
    let r2: f64 = x.iter().map(|c| c * c).sum();
    if r2 == 0.0 {
        return Err(Error::SingularPoint);
    }
    let r = r2.sqrt();
    let e = UnitVector::normalized(x)?;
    Ok(riesz_test_matrix(&e, p).scale(r.powf(-p)))
}
