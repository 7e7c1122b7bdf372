//! Dense vectors, symmetric matrices, and a Jacobi eigensolver.
//!
//! Everything downstream (kernels, covariance models, homotopy Gram updates)
//! is built on these few pieces, so the contracts here are strict: vectors
//! are non-empty and finite by construction, and `sym_eig` either returns an
//! orthonormal eigenbasis or an error, never a half-converged one.

use crate::error::{Error, Result};
use std::ops::Deref;

/// Non-empty, all-finite column vector of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    entries: Vec<f64>,
}

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Validation("vector must be non-empty".into()));
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("vector entry {bad} is not finite")));
        }
        Ok(Vector { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.entries
    }
}

/// Euclidean inner product. Errors when dimensions disagree.
pub fn dot(a: &Vector, b: &Vector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(dot_slices(a, b))
}

pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_slice(a: &[f64]) -> f64 {
    dot_slices(a, a).sqrt()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Scales `v` to unit Euclidean norm. The zero vector has no direction, so
/// it is rejected rather than passed through.
pub fn l2_normalize(v: &Vector) -> Result<Vector> {
    let n = norm_slice(v);
    if n == 0.0 {
        return Err(Error::DegenerateInput("cannot normalize the zero vector".into()));
    }
    // A vector already unit to within accumulated rounding passes through
    // untouched; dividing by a norm one ulp off 1.0 would perturb the
    // entries, and normalization has to be exactly idempotent so repeated
    // preprocessing cannot drift features.
    if (n - 1.0).abs() <= 4.0 * v.dim() as f64 * f64::EPSILON {
        return Ok(v.clone());
    }
    Vector::new(v.iter().map(|x| x / n).collect())
}

/// Symmetric matrix in full row-major storage.
///
/// Both triangles are kept so row access stays contiguous; `set` writes the
/// mirrored entry too, which keeps the symmetry invariant unconditional.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("matrix order must be positive".into()));
        }
        Ok(SymMatrix { n, data: vec![0.0; n * n] })
    }

    /// Builds the matrix from `f(i, j)` evaluated on the upper triangle
    /// (`i <= j`) and mirrored, so an asymmetric `f` cannot sneak through.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = SymMatrix::zeros(n)?;
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::Validation(format!("matrix entry ({i},{j}) = {v} is not finite")));
                }
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm_slice(&self.data)
    }
}

/// Eigendecomposition of a symmetric matrix: `a == V diag(λ) Vᵀ` with the
/// eigenvalues sorted descending and `eigenvectors[t]` the column paired
/// with `eigenvalues[t]`.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vector>,
}

impl EigDecomposition {
    /// Clamps eigenvalues that are zero up to round-off (relative to the
    /// largest magnitude) to exactly zero. Covariance-style consumers call
    /// this so tiny negative round-off never reaches a square root.
    pub fn clamp_small_to_zero(mut self) -> Self {
        let max_abs = self.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_abs > 0.0 {
            for v in &mut self.eigenvalues {
                if v.abs() < 1e-12 * max_abs {
                    *v = 0.0;
                }
            }
        }
        self
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver.
///
/// Sweeps the strict upper triangle applying 2x2 rotations until the
/// off-diagonal Frobenius norm falls below `1e-14 * ||A||_F`, which is as far
/// as f64 arithmetic meaningfully goes. Symmetric input is guaranteed by the
/// `SymMatrix` type; failure to converge inside 100 sweeps is an error, not
/// a silent partial answer.
pub fn sym_eig(a: &SymMatrix) -> Result<EigDecomposition> {
    let n = a.order();
    let mut m = a.data.clone();
    // Eigenvector accumulator, starts as the identity.
    let mut vt = vec![0.0f64; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }

    let total = norm_slice(&m);
    let tol = 1e-14 * total;

    let mut converged = total == 0.0 || n == 1;
    let mut sweeps = 0u64;
    while !converged && sweeps < JACOBI_MAX_SWEEPS as u64 {
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                // An entry this far below the convergence target cannot
                // affect the outcome; rotating on it risks dividing by a
                // subnormal. Flush it instead.
                if apq.abs() < 1e-3 * tol / (n as f64) {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                // For very large theta the textbook formula underflows;
                // 1/(2 theta) is the first-order expansion of the root.
                let t = if theta.abs() > 1e10 {
                    1.0 / (2.0 * theta)
                } else if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    let nkp = akp - s * (akq + tau * akp);
                    let nkq = akq + s * (akp - tau * akq);
                    m[k * n + p] = nkp;
                    m[p * n + k] = nkp;
                    m[k * n + q] = nkq;
                    m[q * n + k] = nkq;
                }
                for k in 0..n {
                    let vkp = vt[k * n + p];
                    let vkq = vt[k * n + q];
                    vt[k * n + p] = vkp - s * (vkq + tau * vkp);
                    vt[k * n + q] = vkq + s * (vkp - tau * vkq);
                }
            }
        }
        let mut off_sq = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off_sq += 2.0 * m[i * n + j] * m[i * n + j];
            }
        }
        converged = off_sq.sqrt() <= tol;
    }
    if !converged {
        let mut off_sq = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off_sq += 2.0 * m[i * n + j] * m[i * n + j];
            }
        }
        return Err(Error::Convergence { iterations: sweeps, gap: off_sq.sqrt() });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Descending by eigenvalue; ties keep the lower original index first so
    // the decomposition is deterministic.
    order.sort_by(|&i, &j| {
        m[j * n + j].total_cmp(&m[i * n + i]).then_with(|| i.cmp(&j))
    });

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Vec::with_capacity(n);
    for &col in &order {
        eigenvalues.push(m[col * n + col]);
        let v: Vec<f64> = (0..n).map(|k| vt[k * n + col]).collect();
        eigenvectors.push(Vector::new(v)?);
    }
    Ok(EigDecomposition { eigenvalues, eigenvectors })
}
