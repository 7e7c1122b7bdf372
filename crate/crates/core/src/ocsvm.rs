//! One-class support vector machine with an RBF kernel.
//!
//! Solves the dual
//!
//! ```text
//! min_a  1/2 aᵀ K a   s.t.  0 <= a_i <= C = 1/(nu n),  sum a = 1
//! ```
//!
//! by sequential minimal optimization on maximal-violating pairs. `nu` keeps
//! its usual role: an upper bound (up to 2/n) on the fraction of training
//! points scored as anomalous and a lower bound on the fraction kept as
//! support vectors.
//!
//! Training sorts its input lexicographically first, so the fitted model is
//! a pure function of the training *set*: permuting the caller's vectors
//! changes nothing, bit for bit.

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Vector};
use std::cmp::Ordering;

pub const DEFAULT_NU: f64 = 0.05;

/// Gaussian kernel `k(x, y) = exp(-gamma |x - y|^2)`, so `k` ranges over
/// `(0, 1]` and `k(x, x) == 1` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfKernel {
    gamma: f64,
}

impl RbfKernel {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Validation(format!("gamma must be positive and finite, got {gamma}")));
        }
        Ok(RbfKernel { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        (-self.gamma * sq_dist(a, b)).exp()
    }
}

/// Sets the kernel width from the data: `gamma = 1 / median(|x_i - x_j|^2)`
/// over a deterministic stride subsample of at most 256 training vectors.
/// For even pair counts the median is the mean of the two middle values.
/// All-coincident samples give a zero median and are rejected, since no
/// finite width separates them.
pub fn auto_gamma(train: &[Vector]) -> Result<f64> {
    if train.len() < 2 {
        return Err(Error::Validation("auto gamma needs at least 2 training vectors".into()));
    }
    check_dims(train)?;
    let n = train.len();
    let m = n.min(256);
    let sample: Vec<&Vector> = (0..m).map(|i| &train[i * n / m]).collect();
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            dists.push(sq_dist(sample[i], sample[j]));
        }
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if median <= 0.0 {
        return Err(Error::DegenerateInput(
            "median pairwise distance is zero; training vectors are coincident".into(),
        ));
    }
    Ok(1.0 / median)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcsvmModel {
    /// Training vectors with positive dual weight, in the solver's canonical
    /// (lexicographically sorted) order.
    pub support_vectors: Vec<Vector>,
    /// Dual weights aligned with `support_vectors`; each lies in
    /// `(0, 1/(nu n)]` and they sum to 1 up to round-off.
    pub alphas: Vec<f64>,
    /// Offset of the decision surface.
    pub rho: f64,
    pub kernel: RbfKernel,
    pub nu: f64,
}

/// Anomaly score `rho - sum_i a_i k(sv_i, x)`: zero on the decision surface,
/// positive outside the learned support of the training distribution.
pub fn ocsvm_score(model: &OcsvmModel, x: &Vector) -> Result<f64> {
    let dim = model.support_vectors[0].dim();
    if x.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.dim() });
    }
    let mut g = 0.0;
    for (sv, &a) in model.support_vectors.iter().zip(&model.alphas) {
        g += a * model.kernel.eval(sv, x);
    }
    Ok(model.rho - g)
}

fn check_dims(train: &[Vector]) -> Result<()> {
    let dim = train[0].dim();
    for v in train {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.dim() });
        }
    }
    Ok(())
}

fn lex_cmp(a: &Vector, b: &Vector) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

const GRAM_CACHE_LIMIT: usize = 4096;
const SMO_TOLERANCE: f64 = 1e-6;
const SMO_MAX_UPDATES: u64 = 10_000_000;

enum Gram<'a> {
    /// Full kernel matrix, row-major.
    Cached(Vec<f64>),
    /// Rows recomputed on demand when the matrix would not fit.
    Lazy(&'a RbfKernel),
}

struct Problem<'a> {
    points: &'a [Vector],
    gram: Gram<'a>,
}

impl Problem<'_> {
    fn new<'a>(points: &'a [Vector], kernel: &'a RbfKernel) -> Problem<'a> {
        let n = points.len();
        let gram = if n <= GRAM_CACHE_LIMIT {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                k[i * n + i] = 1.0;
                for j in i + 1..n {
                    let v = kernel.eval(&points[i], &points[j]);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            Gram::Cached(k)
        } else {
            Gram::Lazy(kernel)
        };
        Problem { points, gram }
    }

    fn row_into(&self, i: usize, buf: &mut [f64]) {
        let n = self.points.len();
        match &self.gram {
            Gram::Cached(k) => buf.copy_from_slice(&k[i * n..(i + 1) * n]),
            Gram::Lazy(kernel) => {
                for (j, p) in self.points.iter().enumerate() {
                    buf[j] = kernel.eval(&self.points[i], p);
                }
            }
        }
    }
}

/// Trains on the given real-access vectors. `nu` must lie in `(0, 1]`.
///
/// Convergence criterion is the maximal KKT violation over feasible pairs:
/// `max_{a_j > 0} F_j - min_{a_i < C} F_i <= 1e-6` with `F = K a`. Exceeding
/// the update budget is reported as a convergence error, never as a model.
pub fn train_ocsvm(train: &[Vector], nu: f64, kernel: RbfKernel) -> Result<OcsvmModel> {
    if train.len() < 2 {
        return Err(Error::Validation(format!(
            "one-class SVM needs at least 2 training vectors, got {}",
            train.len()
        )));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Validation(format!("nu must be in (0, 1], got {nu}")));
    }
    check_dims(train)?;

    let mut points = train.to_vec();
    points.sort_by(lex_cmp);
    let n = points.len();
    let c = 1.0 / (nu * n as f64);
    let problem = Problem::new(&points, &kernel);

    // Feasible start: the first floor(nu n) weights at the cap, one more
    // carrying the remainder. This is exact: the weights add to 1 by
    // construction, at nu == 1 every weight is exactly 1/n.
    let nn = ((nu * n as f64).floor() as usize).min(n);
    let mut alphas = vec![0.0; n];
    for a in alphas.iter_mut().take(nn) {
        *a = c;
    }
    if nn < n {
        alphas[nn] = 1.0 - nn as f64 * c;
    }

    // F = K a, maintained incrementally.
    let mut f = vec![0.0; n];
    let mut row = vec![0.0; n];
    for (j, &a) in alphas.iter().enumerate() {
        if a > 0.0 {
            problem.row_into(j, &mut row);
            for k in 0..n {
                f[k] += a * row[k];
            }
        }
    }

    let mut row_j = vec![0.0; n];
    let mut updates = 0u64;
    loop {
        // Maximal-violating pair: i may grow (below the cap), j may shrink
        // (above zero). Strict inequalities on the first match keep ties at
        // the lowest index.
        let mut i_up: Option<usize> = None;
        let mut j_dn: Option<usize> = None;
        for k in 0..n {
            if alphas[k] < c && i_up.is_none_or(|b| f[k] < f[b]) {
                i_up = Some(k);
            }
            if alphas[k] > 0.0 && j_dn.is_none_or(|b| f[k] > f[b]) {
                j_dn = Some(k);
            }
        }
        let (i, j) = match (i_up, j_dn) {
            (Some(i), Some(j)) => (i, j),
            // nu == 1 pins every weight at the cap; nothing can move.
            _ => break,
        };
        let gap = f[j] - f[i];
        if gap <= SMO_TOLERANCE {
            break;
        }
        if updates >= SMO_MAX_UPDATES {
            return Err(Error::Convergence { iterations: updates, gap });
        }
        updates += 1;

        problem.row_into(i, &mut row);
        problem.row_into(j, &mut row_j);
        let eta = row[i] + row_j[j] - 2.0 * row[j];
        let room_i = c - alphas[i];
        let room_j = alphas[j];
        // Degenerate curvature: move as far as the box allows.
        let step = if eta > 1e-12 { (gap / eta).min(room_i).min(room_j) } else { room_i.min(room_j) };
        // Land exactly on the bound when the step is clipped, so bound
        // membership stays an exact comparison.
        if step == room_i {
            alphas[i] = c;
        } else {
            alphas[i] += step;
        }
        if step == room_j {
            alphas[j] = 0.0;
        } else {
            alphas[j] -= step;
        }
        for k in 0..n {
            f[k] += step * (row[k] - row_j[k]);
        }
    }

    // Offset: mean F over margin support vectors; if none sit strictly
    // inside the box, the midpoint of the feasible interval, falling back to
    // whichever endpoint exists.
    let margin: Vec<usize> = (0..n).filter(|&k| alphas[k] > 0.0 && alphas[k] < c).collect();
    let rho = if !margin.is_empty() {
        margin.iter().map(|&k| f[k]).sum::<f64>() / margin.len() as f64
    } else {
        let lo = (0..n).filter(|&k| alphas[k] == c).map(|k| f[k]).fold(f64::NEG_INFINITY, f64::max);
        let hi = (0..n).filter(|&k| alphas[k] == 0.0).map(|k| f[k]).fold(f64::INFINITY, f64::min);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => unreachable!("weights sum to 1, some weight is positive"),
        }
    };

    let mut support_vectors = Vec::new();
    let mut sv_alphas = Vec::new();
    for k in 0..n {
        if alphas[k] > 0.0 {
            support_vectors.push(points[k].clone());
            sv_alphas.push(alphas[k]);
        }
    }
    Ok(OcsvmModel { support_vectors, alphas: sv_alphas, rho, kernel, nu })
}
