//! Reference implementations the integration tests check the library
//! against. Everything here deliberately takes a different algorithmic
//! route from the production code: projected-gradient instead of SMO,
//! coordinate descent instead of the homotopy path, naive recounting
//! instead of incremental sweeps, explicit matrix inversion instead of
//! eigendecomposition. Agreement between two unrelated routes is the
//! point, so none of this shares solver code with the crate.

#![allow(dead_code)]

use ocpad::dataset::Label;
use ocpad::evaluation::{Granularity, ScoreItem, ScoreSet};
use ocpad::linalg::{sym_eig, SymMatrix, Vector};
use ocpad::ocsvm::RbfKernel;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn gauss_vec<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

// ---------------------------------------------------------------------
// One-class SVM dual QP by FISTA over the capped simplex.
// ---------------------------------------------------------------------

/// Euclidean projection onto `{ 0 <= x_i <= cap, sum x = 1 }` by bisecting
/// the shift. The sum of clamped coordinates is continuous and
/// non-increasing in the shift, so 200 halvings pin it to the last bit.
pub fn project_capped_simplex(y: &[f64], cap: f64) -> Vec<f64> {
    let min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = min - cap - 1.0;
    let mut hi = max;
    for _ in 0..200 {
        let tau = 0.5 * (lo + hi);
        let sum: f64 = y.iter().map(|&v| (v - tau).clamp(0.0, cap)).sum();
        if sum > 1.0 {
            lo = tau;
        } else {
            hi = tau;
        }
    }
    let tau = 0.5 * (lo + hi);
    y.iter().map(|&v| (v - tau).clamp(0.0, cap)).collect()
}

pub struct QpSolution {
    pub alphas: Vec<f64>,
    pub objective: f64,
}

/// Solves `min 0.5 a' K a` over the capped simplex by accelerated
/// projected gradient with adaptive restart. Panics if the pair gap does
/// not close; an oracle that silently returns garbage is worse than none.
pub fn ocsvm_qp_oracle(points: &[Vector], kernel: &RbfKernel, nu: f64) -> QpSolution {
    let n = points.len();
    let cap = 1.0 / (nu * n as f64);
    let k = SymMatrix::from_fn(n, |i, j| kernel.eval(&points[i], &points[j]))
        .expect("kernel matrix entries are finite");
    let eig = sym_eig(&k).expect("kernel matrix eigendecomposition");
    let lip = eig.eigenvalues[0].max(1e-12);

    let kv = |x: &[f64]| -> Vec<f64> {
        (0..n).map(|i| (0..n).map(|j| k.get(i, j) * x[j]).sum()).collect()
    };

    let mut x = vec![1.0 / n as f64; n];
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let g = kv(&y);
        let step: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - gi / lip).collect();
        let x_new = project_capped_simplex(&step, cap);

        let f = kv(&x_new);
        let mut worst_up = f64::INFINITY;
        let mut worst_dn = f64::NEG_INFINITY;
        for i in 0..n {
            if x_new[i] < cap {
                worst_up = worst_up.min(f[i]);
            }
            if x_new[i] > 0.0 {
                worst_dn = worst_dn.max(f[i]);
            }
        }
        let gap = if worst_up.is_finite() { worst_dn - worst_up } else { 0.0 };
        if gap <= 1e-10 {
            let obj = 0.5 * dot(&f, &x_new);
            return QpSolution { alphas: x_new, objective: obj };
        }

        // Adaptive restart: drop momentum when it points against progress.
        let against: f64 =
            (0..n).map(|i| (y[i] - x_new[i]) * (x_new[i] - x[i])).sum();
        if against > 0.0 {
            t = 1.0;
            y = x_new.clone();
        } else {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_new;
            y = (0..n).map(|i| x_new[i] + beta * (x_new[i] - x[i])).collect();
            t = t_new;
        }
        x = x_new;
    }
    panic!("projected-gradient oracle did not converge");
}

pub fn qp_objective(points: &[Vector], kernel: &RbfKernel, alphas: &[f64]) -> f64 {
    let n = points.len();
    let mut obj = 0.0;
    for i in 0..n {
        for j in 0..n {
            obj += alphas[i] * alphas[j] * kernel.eval(&points[i], &points[j]);
        }
    }
    0.5 * obj
}

/// Reconstructs the dense weight vector from a trained model's support
/// vectors. Both lists are in the same canonical order and support vectors
/// are bit-exact copies of training points, so a merge walk suffices.
pub fn full_alphas(
    sorted_train: &[Vector],
    support_vectors: &[Vector],
    alphas: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; sorted_train.len()];
    let mut si = 0;
    for (ti, tv) in sorted_train.iter().enumerate() {
        if si < support_vectors.len() && tv.as_slice() == support_vectors[si].as_slice() {
            out[ti] = alphas[si];
            si += 1;
        }
    }
    assert_eq!(si, support_vectors.len(), "every support vector matches a training point");
    out
}

/// Worst KKT violation of a feasible point for the capped-simplex QP: any
/// coordinate that can still grow must not have a strictly smaller
/// gradient than one that can still shrink.
pub fn qp_pair_gap(points: &[Vector], kernel: &RbfKernel, nu: f64, alphas: &[f64]) -> f64 {
    let n = points.len();
    let cap = 1.0 / (nu * n as f64);
    let mut worst_up = f64::INFINITY;
    let mut worst_dn = f64::NEG_INFINITY;
    for i in 0..n {
        let f: f64 = (0..n).map(|j| alphas[j] * kernel.eval(&points[i], &points[j])).sum();
        if alphas[i] < cap {
            worst_up = worst_up.min(f);
        }
        if alphas[i] > 0.0 {
            worst_dn = worst_dn.max(f);
        }
    }
    if worst_up.is_finite() && worst_dn.is_finite() {
        (worst_dn - worst_up).max(0.0)
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------
// Lasso by cyclic coordinate descent.
// ---------------------------------------------------------------------

fn soft(v: f64, lam: f64) -> f64 {
    if v > lam {
        v - lam
    } else if v < -lam {
        v + lam
    } else {
        0.0
    }
}

/// Minimizes `0.5 ||x - D w||^2 + lambda ||w||_1` for unit-norm atoms by
/// cyclic coordinate descent; each coordinate update is then an exact
/// soft threshold. Panics rather than returning an unconverged answer.
pub fn cd_lasso_oracle(atoms: &[Vector], x: &[f64], lambda: f64) -> Vec<f64> {
    let m = atoms.len();
    let corr: Vec<f64> = atoms.iter().map(|d| dot(d, x)).collect();
    let gram: Vec<Vec<f64>> =
        (0..m).map(|i| (0..m).map(|j| dot(&atoms[i], &atoms[j])).collect()).collect();
    let mut w = vec![0.0; m];
    for _ in 0..200_000 {
        let mut max_delta = 0.0f64;
        for j in 0..m {
            let cross: f64 = (0..m).filter(|&k| k != j).map(|k| gram[j][k] * w[k]).sum();
            let new = soft(corr[j] - cross, lambda);
            max_delta = max_delta.max((new - w[j]).abs());
            w[j] = new;
        }
        if max_delta <= 1e-13 {
            return w;
        }
    }
    panic!("coordinate-descent oracle did not converge");
}

pub fn lasso_objective(atoms: &[Vector], x: &[f64], w: &[f64], lambda: f64) -> f64 {
    let resid = lasso_residual(atoms, x, w);
    0.5 * dot(&resid, &resid) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn lasso_residual(atoms: &[Vector], x: &[f64], w: &[f64]) -> Vec<f64> {
    let mut r = x.to_vec();
    for (d, &wj) in atoms.iter().zip(w) {
        if wj != 0.0 {
            for (rk, dk) in r.iter_mut().zip(d.as_slice()) {
                *rk -= wj * dk;
            }
        }
    }
    r
}

/// Worst violation of the lasso stationarity conditions: active atoms must
/// hold correlation exactly `lambda * sign(w)`, inactive ones at most
/// `lambda` in magnitude.
pub fn lasso_kkt_violation(atoms: &[Vector], x: &[f64], w: &[f64], lambda: f64) -> f64 {
    let resid = lasso_residual(atoms, x, w);
    let mut worst = 0.0f64;
    for (d, &wj) in atoms.iter().zip(w) {
        let c = dot(d, &resid);
        let v = if wj != 0.0 { (c - lambda * wj.signum()).abs() } else { (c.abs() - lambda).max(0.0) };
        worst = worst.max(v);
    }
    worst
}

/// Exact recovery condition for a support set: every off-support atom's
/// L1 fit against the support's pseudoinverse stays below one.
pub fn erc_holds(atoms: &[Vector], support: &[usize]) -> bool {
    let s = support.len();
    let g: Vec<Vec<f64>> = support
        .iter()
        .map(|&a| support.iter().map(|&b| dot(&atoms[a], &atoms[b])).collect())
        .collect();
    let g_inv = match gauss_jordan_inverse(&g) {
        Some(inv) => inv,
        None => return false,
    };
    for j in 0..atoms.len() {
        if support.contains(&j) {
            continue;
        }
        let rhs: Vec<f64> = support.iter().map(|&a| dot(&atoms[a], &atoms[j])).collect();
        let h: Vec<f64> =
            (0..s).map(|r| (0..s).map(|c| g_inv[r][c] * rhs[c]).sum()).collect();
        if h.iter().map(|v| v.abs()).sum::<f64>() >= 1.0 {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------
// Dense linear algebra by Gauss-Jordan.
// ---------------------------------------------------------------------

/// Inverse by Gauss-Jordan elimination with partial pivoting; `None` when
/// a pivot collapses.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col && m[row][col] != 0.0 {
                let factor = m[row][col];
                for k in 0..2 * n {
                    let s = m[col][k];
                    m[row][k] -= factor * s;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Mahalanobis distance straight from the definition: sample mean, sample
/// covariance, explicit inverse. Only valid when the covariance has full
/// rank, which the callers arrange.
pub fn direct_md_oracle(train: &[Vector], query: &[f64]) -> f64 {
    let n = train.len();
    let dim = train[0].dim();
    let mut mean = vec![0.0; dim];
    for v in train {
        for (m, x) in mean.iter_mut().zip(v.as_slice()) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for v in train {
        let d: Vec<f64> = v.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= (n - 1) as f64;
        }
    }
    let inv = gauss_jordan_inverse(&cov).expect("covariance is invertible");
    let d: Vec<f64> = query.iter().zip(&mean).map(|(x, m)| x - m).collect();
    let mut q = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            q += d[i] * inv[i][j] * d[j];
        }
    }
    q.max(0.0).sqrt()
}

/// Random orthonormal basis by Gram-Schmidt on gaussian draws.
pub fn random_orthonormal<R: Rng>(rng: &mut R, dim: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(count <= dim);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = gauss_vec(rng, dim);
        for b in &basis {
            let c = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            basis.push(v);
        }
    }
    basis
}

// ---------------------------------------------------------------------
// Threshold metrics by exhaustive recount.
// ---------------------------------------------------------------------

fn rates_naive(reals: &[f64], attacks: &[f64], t: f64) -> (f64, f64) {
    let fa = attacks.iter().filter(|&&s| s < t).count() as f64 / attacks.len() as f64;
    let fr = reals.iter().filter(|&&s| s >= t).count() as f64 / reals.len() as f64;
    (fa, fr)
}

/// EER by trying every candidate threshold with a full recount.
pub fn eer_oracle(reals: &[f64], attacks: &[f64]) -> (f64, f64) {
    let mut all: Vec<f64> = reals.iter().chain(attacks).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let mut candidates = vec![f64::NEG_INFINITY];
    for w in all.windows(2) {
        candidates.push(0.5 * (w[0] + w[1]));
    }
    candidates.push(f64::INFINITY);
    let mut best = (f64::NAN, f64::INFINITY, (0.0, 0.0));
    for &t in &candidates {
        let (fa, fr) = rates_naive(reals, attacks, t);
        if (fa - fr).abs() < best.1 {
            best = (t, (fa - fr).abs(), (fa, fr));
        }
    }
    (best.0, 0.5 * (best.2 .0 + best.2 .1))
}

/// AUC as the raw pairwise ranking probability with half credit for ties.
pub fn auc_oracle(reals: &[f64], attacks: &[f64]) -> f64 {
    let mut num = 0.0;
    for &a in attacks {
        for &r in reals {
            num += if a > r {
                1.0
            } else if a == r {
                0.5
            } else {
                0.0
            };
        }
    }
    num / (reals.len() * attacks.len()) as f64
}

pub fn hter_oracle(reals: &[f64], attacks: &[f64], t: f64) -> f64 {
    let (fa, fr) = rates_naive(reals, attacks, t);
    0.5 * (fa + fr)
}

/// Random score set with guaranteed label coverage and a deliberate bias
/// toward tied scores (values snap to a coarse grid) so the tie-handling
/// paths get exercised.
pub fn random_scoreset<R: Rng>(rng: &mut R) -> ScoreSet {
    let n_clients = rng.random_range(1..=4usize);
    let mut items = Vec::new();
    let snap = rng.random_range(0..3u8);
    let draw = |rng: &mut R| -> f64 {
        let raw: f64 = rng.sample::<f64, _>(StandardNormal);
        match snap {
            0 => (raw * 4.0).round() / 4.0,
            1 => (raw * 16.0).round() / 16.0,
            _ => raw,
        }
    };
    for c in 0..n_clients {
        let n_real = rng.random_range(1..=12usize);
        let n_attack = rng.random_range(1..=12usize);
        for v in 0..n_real {
            items.push(ScoreItem {
                claimed_id: format!("client{c:02}"),
                label: Label::Real,
                attack_type: None,
                video_id: format!("r{v}"),
                score: draw(rng),
            });
        }
        for v in 0..n_attack {
            items.push(ScoreItem {
                claimed_id: format!("client{c:02}"),
                label: Label::Attack,
                attack_type: Some("print".into()),
                video_id: format!("a{v}"),
                score: draw(rng) + 0.5,
            });
        }
    }
    ScoreSet { granularity: Granularity::Frame, items }
}

pub fn split_scores(set: &ScoreSet) -> (Vec<f64>, Vec<f64>) {
    let mut reals = Vec::new();
    let mut attacks = Vec::new();
    for it in &set.items {
        match it.label {
            Label::Real => reals.push(it.score),
            Label::Attack => attacks.push(it.score),
        }
    }
    (reals, attacks)
}
