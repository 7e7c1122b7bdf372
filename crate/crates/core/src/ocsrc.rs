//! Sparse-representation scoring.
//!
//! A client's dictionary is a deterministic subsample of their real-access
//! training vectors, one unit-norm atom per column. A query is sparse-coded
//! against the dictionary by following the lasso regularization path
//!
//! ```text
//! min_w 1/2 |x - D w|^2 + lambda |w|_1
//! ```
//!
//! from `lambda_0 = |Dᵀx|_inf` (where `w = 0`) downward by homotopy: between
//! breakpoints the solution is affine in lambda, and at each breakpoint one
//! atom either enters or leaves the active set. The anomaly score is the
//! reconstruction residual norm at the final solution: queries matching the
//! client reconstruct cheaply, imposters and attacks do not.
//!
//! The active-set Gram factorization is maintained by rank-one Cholesky
//! updates and Givens downdates; a condition estimate above `1e12` aborts
//! the path rather than returning garbage coefficients.

use crate::dataset::subsample;
use crate::error::{Error, Result};
use crate::linalg::{dot_slices, l2_normalize, norm_slice, Vector};

/// Unit-norm atom collection. Construction validates the norm invariant
/// instead of silently re-normalizing, so a corrupt model file cannot smuggle
/// in a scaled atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Vec<Vector>,
    fraction: f64,
}

impl Dictionary {
    pub fn new(atoms: Vec<Vector>, fraction: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Validation("dictionary must have at least one atom".into()));
        }
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Validation(format!("dictionary fraction must be in (0, 1], got {fraction}")));
        }
        let dim = atoms[0].dim();
        for (i, a) in atoms.iter().enumerate() {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.dim() });
            }
            let n = norm_slice(a);
            if (n - 1.0).abs() > 1e-8 {
                return Err(Error::Validation(format!("atom {i} has norm {n}, expected 1")));
            }
        }
        Ok(Dictionary { atoms, fraction })
    }

    pub fn atoms(&self) -> &[Vector] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    /// Subsample fraction the dictionary was built with.
    pub fn fraction(&self) -> f64 {
        self.fraction
    }
}

/// Takes every `1/fraction`-th training vector (deterministic stride, same
/// rule as the training subsampler) and normalizes each to an atom.
pub fn build_dictionary(train: &[Vector], fraction: f64) -> Result<Dictionary> {
    if train.is_empty() {
        return Err(Error::Validation("cannot build a dictionary from no vectors".into()));
    }
    let picked = subsample(train, fraction)?;
    let mut atoms = Vec::with_capacity(picked.len());
    for (i, v) in picked.iter().enumerate() {
        let a = l2_normalize(v).map_err(|_| {
            Error::DegenerateInput(format!("dictionary candidate {i} is the zero vector"))
        })?;
        atoms.push(a);
    }
    Dictionary::new(atoms, fraction)
}

/// Where the homotopy path stops regularizing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaStop {
    /// Stop at this lambda value.
    Absolute(f64),
    /// Stop at this multiple of the path's own `lambda_0`, which adapts the
    /// stopping point to the query's scale.
    RelativeToFirst(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyConfig {
    pub stop: LambdaStop,
    /// Cap on the active set; `None` means `min(dim, n_atoms)`, the rank
    /// limit past which the active Gram must be singular.
    pub max_active: Option<usize>,
    /// Cap on path breakpoints after the first activation.
    pub max_steps: usize,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        HomotopyConfig { stop: LambdaStop::RelativeToFirst(1e-6), max_active: None, max_steps: 10_000 }
    }
}

impl HomotopyConfig {
    pub fn validate(&self) -> Result<()> {
        match self.stop {
            LambdaStop::Absolute(v) => {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Validation(format!("absolute lambda stop must be >= 0, got {v}")));
                }
            }
            LambdaStop::RelativeToFirst(f) => {
                if !(f >= 0.0 && f < 1.0) {
                    return Err(Error::Validation(format!("relative lambda stop must be in [0, 1), got {f}")));
                }
            }
        }
        if self.max_active == Some(0) {
            return Err(Error::Validation("max_active must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Validation("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Lasso solution at the lambda where the path stopped.
///
/// `active_indices` is ascending and aligned with `coefficients`;
/// `residual` is `|x - D w|` recomputed from the emitted coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub active_indices: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub final_lambda: f64,
    pub residual: f64,
}

/// One record per breakpoint: the solution right at that lambda.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub lambda: f64,
    pub active_count: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathTrace {
    pub breakpoints: Vec<PathPoint>,
}

pub fn homotopy_solve(dict: &Dictionary, x: &Vector, cfg: &HomotopyConfig) -> Result<SparseCode> {
    homotopy_solve_traced(dict, x, cfg).map(|(code, _)| code)
}

pub fn ocsrc_score(dict: &Dictionary, x: &Vector, cfg: &HomotopyConfig) -> Result<f64> {
    homotopy_solve(dict, x, cfg).map(|code| code.residual)
}

enum Event {
    Enter { atom: usize, sign: f64 },
    Leave { pos: usize },
}

pub fn homotopy_solve_traced(
    dict: &Dictionary,
    x: &Vector,
    cfg: &HomotopyConfig,
) -> Result<(SparseCode, PathTrace)> {
    cfg.validate()?;
    let dim = dict.dim();
    if x.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.dim() });
    }
    let p = dict.len();
    let atoms = dict.atoms();
    let max_active = cfg.max_active.unwrap_or_else(|| dim.min(p)).min(p);

    let corr0: Vec<f64> = atoms.iter().map(|d| dot_slices(d, x)).collect();
    let lambda0 = corr0.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let stop = match cfg.stop {
        LambdaStop::Absolute(v) => v,
        LambdaStop::RelativeToFirst(f) => f * lambda0,
    };

    let mut trace = PathTrace::default();
    if lambda0 <= stop {
        // Nothing ever activates; w = 0 satisfies the optimality condition
        // |Dᵀx|_inf <= lambda for every lambda >= lambda0, in particular at
        // the stop. Covers x orthogonal to the whole dictionary.
        trace.breakpoints.push(PathPoint {
            lambda: lambda0,
            active_count: 0,
            residual_norm: norm_slice(x),
        });
        let code = SparseCode {
            active_indices: Vec::new(),
            coefficients: Vec::new(),
            final_lambda: stop.max(lambda0),
            residual: norm_slice(x),
        };
        return Ok((code, trace));
    }

    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut is_active = vec![false; p];
    let mut chol = Chol::empty();
    let mut lambda_t = lambda0;
    // An atom dropped at some lambda still has its correlation pinned to the
    // boundary there, so its re-entry root equals the drop lambda exactly.
    // Suppress that root (and only that root) until the path moves on.
    let mut banned: Option<(usize, f64)> = None;
    let mut steps = 0usize;

    let emit = |active: &[usize], u: &[f64], v: &[f64], lambda_f: f64, trace: PathTrace| {
        let mut order: Vec<usize> = (0..active.len()).collect();
        order.sort_by_key(|&i| active[i]);
        let active_indices: Vec<usize> = order.iter().map(|&i| active[i]).collect();
        let coefficients: Vec<f64> = order.iter().map(|&i| u[i] - lambda_f * v[i]).collect();
        let mut res: Vec<f64> = x.to_vec();
        for (k, &a) in active_indices.iter().enumerate() {
            let w = coefficients[k];
            for d in 0..dim {
                res[d] -= w * atoms[a][d];
            }
        }
        let code = SparseCode {
            active_indices,
            coefficients,
            final_lambda: lambda_f,
            residual: norm_slice(&res),
        };
        Ok((code, trace))
    };

    loop {
        // Solution on the current segment: w(lambda) = u - lambda v on the
        // active set, with G u = D_Aᵀ x and G v = s.
        let b: Vec<f64> = active.iter().map(|&a| corr0[a]).collect();
        let u = chol.solve(&b);
        let v = chol.solve(&signs);

        {
            let mut res: Vec<f64> = x.to_vec();
            for (k, &a) in active.iter().enumerate() {
                let w = u[k] - lambda_t * v[k];
                for d in 0..dim {
                    res[d] -= w * atoms[a][d];
                }
            }
            trace.breakpoints.push(PathPoint {
                lambda: lambda_t,
                active_count: active.len(),
                residual_norm: norm_slice(&res),
            });
        }

        if steps >= cfg.max_steps {
            return emit(&active, &u, &v, lambda_t, trace);
        }

        // D_A u and D_A v, so inactive correlations are two dot products.
        let mut pu = vec![0.0; dim];
        let mut qv = vec![0.0; dim];
        for (k, &a) in active.iter().enumerate() {
            for d in 0..dim {
                pu[d] += u[k] * atoms[a][d];
                qv[d] += v[k] * atoms[a][d];
            }
        }

        // Next breakpoint: the largest event lambda in (stop, lambda_t].
        // Ties break toward the lowest atom index.
        let mut best: Option<(f64, usize, Event)> = None;
        let consider = |lam: f64, atom_idx: usize, ev: Event, best: &mut Option<(f64, usize, Event)>| {
            let better = match best {
                None => true,
                Some((bl, ba, _)) => lam > *bl || (lam == *bl && atom_idx < *ba),
            };
            if better {
                *best = Some((lam, atom_idx, ev));
            }
        };

        for j in 0..p {
            if is_active[j] {
                continue;
            }
            let a_j = corr0[j] - dot_slices(&atoms[j], &pu);
            let b_j = dot_slices(&atoms[j], &qv);
            for (root, sign) in [(a_j / (1.0 - b_j), 1.0), (-a_j / (1.0 + b_j), -1.0)] {
                if !root.is_finite() || root <= stop || root > lambda_t * (1.0 + 1e-10) {
                    continue;
                }
                if let Some((b_atom, b_lam)) = banned {
                    if b_atom == j && root >= b_lam * (1.0 - 1e-12) {
                        continue;
                    }
                }
                let lam = root.min(lambda_t);
                consider(lam, j, Event::Enter { atom: j, sign }, &mut best);
            }
        }
        for k in 0..active.len() {
            if v[k] == 0.0 {
                continue;
            }
            let root = u[k] / v[k];
            // Strictly inside the segment: an atom that just entered has a
            // zero coefficient at lambda_t itself and must not leave there.
            if root.is_finite() && root > stop && root < lambda_t * (1.0 - 1e-12) {
                consider(root, active[k], Event::Leave { pos: k }, &mut best);
            }
        }

        let (lam, _, event) = match best {
            // No event above the stop: the segment extends past it, emit
            // the solution exactly at the stop.
            None => return emit(&active, &u, &v, stop, trace),
            Some(b) => b,
        };

        match event {
            Event::Enter { atom, sign } => {
                if active.len() == max_active {
                    // Admitting the atom would exceed the cap; the path ends
                    // where it first wants in.
                    return emit(&active, &u, &v, lam, trace);
                }
                let g: Vec<f64> = active.iter().map(|&a| dot_slices(&atoms[a], &atoms[atom])).collect();
                chol.extend(&g).map_err(|cond| Error::PathBreakdown { lambda: lam, condition: cond })?;
                active.push(atom);
                signs.push(sign);
                is_active[atom] = true;
            }
            Event::Leave { pos } => {
                let atom = active.remove(pos);
                signs.remove(pos);
                is_active[atom] = false;
                chol.remove(pos);
                banned = Some((atom, lam));
            }
        }
        if let Some((_, cond)) = chol.ill_conditioned() {
            return Err(Error::PathBreakdown { lambda: lam, condition: cond });
        }
        lambda_t = lam;
        if let Some((_, b_lam)) = banned {
            if lambda_t < b_lam * (1.0 - 1e-12) {
                banned = None;
            }
        }
        steps += 1;
    }
}

/// Upper-triangular Cholesky factor of the active-set Gram matrix, grown by
/// one column per entering atom and shrunk by Givens rotations per leaving
/// atom. Diagonal entries are kept positive so their ratio estimates the
/// Gram condition number.
struct Chol {
    k: usize,
    r: Vec<f64>,
}

const COND_LIMIT: f64 = 1e12;

impl Chol {
    fn empty() -> Chol {
        Chol { k: 0, r: Vec::new() }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.k);
        let k = self.k;
        let mut y = vec![0.0; k];
        for i in 0..k {
            let mut s = b[i];
            for l in 0..i {
                s -= self.r[l * k + i] * y[l];
            }
            y[i] = s / self.r[i * k + i];
        }
        let mut z = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = y[i];
            for l in i + 1..k {
                s -= self.r[i * k + l] * z[l];
            }
            z[i] = s / self.r[i * k + i];
        }
        z
    }

    /// Appends a unit-norm atom whose correlations with the current active
    /// atoms are `g`. Fails with a condition estimate when the new atom is
    /// numerically inside the current span.
    fn extend(&mut self, g: &[f64]) -> std::result::Result<(), f64> {
        let k = self.k;
        debug_assert_eq!(g.len(), k);
        let mut z = vec![0.0; k];
        for i in 0..k {
            let mut s = g[i];
            for l in 0..i {
                s -= self.r[l * k + i] * z[l];
            }
            z[i] = s / self.r[i * k + i];
        }
        let rho_sq = 1.0 - dot_slices(&z, &z);
        if !(rho_sq > 0.0) {
            return Err(f64::INFINITY);
        }
        let rho = rho_sq.sqrt();
        let nk = k + 1;
        let mut nr = vec![0.0; nk * nk];
        for i in 0..k {
            for j in i..k {
                nr[i * nk + j] = self.r[i * k + j];
            }
            nr[i * nk + k] = z[i];
        }
        nr[k * nk + k] = rho;
        self.k = nk;
        self.r = nr;
        Ok(())
    }

    /// Removes column `pos` and re-triangularizes with Givens rotations.
    fn remove(&mut self, pos: usize) {
        let k = self.k;
        debug_assert!(pos < k);
        let nk = k - 1;
        // k rows by k-1 columns, with one subdiagonal per column >= pos.
        let mut m = vec![0.0; k * nk];
        for r in 0..k {
            for c in 0..nk {
                let oc = if c < pos { c } else { c + 1 };
                m[r * nk + c] = self.r[r * k + oc];
            }
        }
        for c in pos..nk {
            let a = m[c * nk + c];
            let b = m[(c + 1) * nk + c];
            if b == 0.0 {
                continue;
            }
            let r = a.hypot(b);
            let (cs, sn) = (a / r, b / r);
            for col in c..nk {
                let top = m[c * nk + col];
                let bot = m[(c + 1) * nk + col];
                m[c * nk + col] = cs * top + sn * bot;
                m[(c + 1) * nk + col] = -sn * top + cs * bot;
            }
        }
        let mut nr = vec![0.0; nk * nk];
        for r in 0..nk {
            // Keep the diagonal positive; flipping a row of R leaves RᵀR
            // unchanged.
            let flip = m[r * nk + r] < 0.0;
            for c in 0..nk {
                let v = m[r * nk + c];
                nr[r * nk + c] = if flip { -v } else { v };
            }
        }
        self.k = nk;
        self.r = nr;
    }

    /// `Some((ratio, cond))` when the squared diagonal ratio exceeds the
    /// breakdown limit.
    fn ill_conditioned(&self) -> Option<(f64, f64)> {
        if self.k == 0 {
            return None;
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..self.k {
            let d = self.r[i * self.k + i];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let cond = (hi / lo) * (hi / lo);
        if !(cond <= COND_LIMIT) {
            Some((hi / lo, cond))
        } else {
            None
        }
    }
}
