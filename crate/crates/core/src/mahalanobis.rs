//! Gaussian model with a PCA-truncated, variance-whitened metric.
//!
//! Fitting estimates the training mean and covariance (unbiased, `n - 1`
//! denominator), keeps the leading eigenvectors covering the requested
//! variance fraction, and whitens each retained direction by the square
//! root of its eigenvalue. The score of a query is then the Euclidean norm
//! of its whitened projection, i.e. the Mahalanobis distance restricted to
//! the retained subspace.
//!
//! When the dimension exceeds the sample count the covariance is rank
//! deficient and its `dim x dim` eigenproblem is wasteful; the snapshot
//! route solves the `n x n` Gram eigenproblem instead and maps eigenvectors
//! back through the centered data matrix. Both routes give the same model
//! up to round-off.

use crate::error::{Error, Result};
use crate::linalg::{dot_slices, sym_eig, EigDecomposition, SymMatrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vector,
    /// Orthonormal retained eigenvectors, leading eigenvalue first.
    pub components: Vec<Vector>,
    /// `sqrt(eigenvalue)` per retained component.
    pub scales: Vec<f64>,
    pub variance_fraction: f64,
}

impl PcaModel {
    pub fn retained(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }
}

/// Smallest eigenvalue kept, relative to the largest: anything below this is
/// rank-deficiency round-off, not signal.
const RANK_CUTOFF: f64 = 1e-12;

pub fn fit_pca(train: &[Vector], variance_fraction: f64) -> Result<PcaModel> {
    if train.len() < 2 {
        return Err(Error::Validation(format!(
            "covariance estimation needs at least 2 training vectors, got {}",
            train.len()
        )));
    }
    if !(variance_fraction > 0.0 && variance_fraction <= 1.0) {
        return Err(Error::Validation(format!(
            "variance fraction must be in (0, 1], got {variance_fraction}"
        )));
    }
    let n = train.len();
    let dim = train[0].dim();
    for v in train {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.dim() });
        }
    }

    let mut mean = vec![0.0; dim];
    for v in train {
        for d in 0..dim {
            mean[d] += v[d];
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let centered: Vec<Vec<f64>> = train
        .iter()
        .map(|v| (0..dim).map(|d| v[d] - mean[d]).collect())
        .collect();
    let denom = (n - 1) as f64;

    let (eigenvalues, components) = if dim <= n {
        let cov = SymMatrix::from_fn(dim, |i, j| {
            centered.iter().map(|row| row[i] * row[j]).sum::<f64>() / denom
        })?;
        let eig = sym_eig(&cov)?.clamp_small_to_zero();
        let EigDecomposition { eigenvalues, eigenvectors } = eig;
        (eigenvalues, eigenvectors)
    } else {
        // Snapshot route: eigentriples of the Gram matrix G = Y Yᵀ/(n-1)
        // give covariance eigenvectors v = Yᵀ u / sqrt((n-1) lambda).
        let gram = SymMatrix::from_fn(n, |i, j| {
            dot_slices(&centered[i], &centered[j]) / denom
        })?;
        let eig = sym_eig(&gram)?.clamp_small_to_zero();
        let lambda_max = eig.eigenvalues.first().copied().unwrap_or(0.0);
        let mut eigenvalues = Vec::new();
        let mut components = Vec::new();
        for (t, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda <= RANK_CUTOFF * lambda_max {
                // The remaining covariance spectrum is zeros (rank <= n-1);
                // directions for them are not recoverable from the Gram and
                // are never retained anyway.
                break;
            }
            let u = &eig.eigenvectors[t];
            let scale = (denom * lambda).sqrt();
            let v: Vec<f64> = (0..dim)
                .map(|d| {
                    (0..n).map(|i| centered[i][d] * u[i]).sum::<f64>() / scale
                })
                .collect();
            eigenvalues.push(lambda);
            components.push(Vector::new(v)?);
        }
        (eigenvalues, components)
    };

    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        return Err(Error::DegenerateInput(
            "training vectors are identical; covariance has no spread".into(),
        ));
    }
    let rank = eigenvalues.iter().filter(|&&l| l > RANK_CUTOFF * lambda_max).count();
    let total: f64 = eigenvalues.iter().filter(|&&l| l > 0.0).sum();

    // Smallest k whose cumulative variance reaches the requested fraction,
    // never past the numerical rank.
    let mut k = rank;
    let mut cum = 0.0;
    for (t, &lambda) in eigenvalues.iter().take(rank).enumerate() {
        cum += lambda;
        if cum >= variance_fraction * total {
            k = t + 1;
            break;
        }
    }

    let scales: Vec<f64> = eigenvalues[..k].iter().map(|&l| l.sqrt()).collect();
    Ok(PcaModel {
        mean: Vector::new(mean)?,
        components: components[..k].to_vec(),
        scales,
        variance_fraction,
    })
}

/// Mahalanobis distance of `x` in the retained, whitened subspace.
pub fn md_score(model: &PcaModel, x: &Vector) -> Result<f64> {
    if x.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x.dim() });
    }
    let centered: Vec<f64> = x.iter().zip(model.mean.iter()).map(|(a, b)| a - b).collect();
    let mut sum = 0.0;
    for (c, &s) in model.components.iter().zip(&model.scales) {
        let z = dot_slices(c, &centered) / s;
        sum += z * z;
    }
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn gauss(rng: &mut ChaCha12Rng, dim: usize) -> Vector {
        Vector::new((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).unwrap()
    }

    #[test]
    fn rejects_degenerate_and_invalid_input() {
        let v = Vector::new(vec![1.0, 2.0]).unwrap();
        assert!(fit_pca(&[v.clone()], 0.99).is_err());
        assert!(fit_pca(&[v.clone(), v.clone()], 0.0).is_err());
        assert!(fit_pca(&[v.clone(), v.clone()], 1.1).is_err());
        // Identical vectors: zero covariance.
        assert!(matches!(
            fit_pca(&[v.clone(), v.clone(), v.clone()], 0.99),
            Err(Error::DegenerateInput(_))
        ));
        let w = Vector::new(vec![1.0]).unwrap();
        assert!(matches!(
            fit_pca(&[v, w], 0.99),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn axis_aligned_example_recovers_known_spectrum() {
        // Data on a 2-D grid with independent coordinates of variance 4 and
        // 1: eigenvalues 4 and 1, axes as components.
        let mut pts = Vec::new();
        for &a in &[-2.0f64, 0.0, 2.0] {
            for &b in &[-1.0f64, 0.0, 1.0] {
                pts.push(Vector::new(vec![a, b]).unwrap());
            }
        }
        let model = fit_pca(&pts, 1.0).unwrap();
        assert_eq!(model.retained(), 2);
        // Variance along x: 9 points, mean 0, sum of squares 24, /8 = 3.
        assert!((model.scales[0] * model.scales[0] - 3.0).abs() < 1e-12);
        assert!((model.scales[1] * model.scales[1] - 0.75).abs() < 1e-12);
        assert!(model.components[0][0].abs() > 0.999);
        assert!(model.components[1][1].abs() > 0.999);

        // Whitened distances: the point (sqrt(3), 0) is one deviation out.
        let q = Vector::new(vec![3f64.sqrt(), 0.0]).unwrap();
        assert!((md_score(&model, &q).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variance_fraction_truncates_the_tail() {
        // Eigenvalues 3 and 0.75 from the grid above: the first direction
        // carries 80% of the variance, so fractions at or below 0.8 keep
        // one component and larger fractions keep both.
        let mut pts = Vec::new();
        for &a in &[-2.0f64, 0.0, 2.0] {
            for &b in &[-1.0f64, 0.0, 1.0] {
                pts.push(Vector::new(vec![a, b]).unwrap());
            }
        }
        let model = fit_pca(&pts, 0.8).unwrap();
        assert_eq!(model.retained(), 1);
        let model = fit_pca(&pts, 0.81).unwrap();
        assert_eq!(model.retained(), 2);
        let model = fit_pca(&pts, 0.05).unwrap();
        assert_eq!(model.retained(), 1);
    }

    #[test]
    fn rank_deficient_data_never_retains_null_directions() {
        // 20 samples on a 1-D line embedded in 3-D.
        let dir = [0.6, 0.0, 0.8];
        let pts: Vec<Vector> = (0..20)
            .map(|i| {
                let t = i as f64 - 9.5;
                Vector::new(dir.iter().map(|d| d * t).collect()).unwrap()
            })
            .collect();
        let model = fit_pca(&pts, 1.0).unwrap();
        assert_eq!(model.retained(), 1);
        assert!((model.components[0][0].abs() - 0.6).abs() < 1e-10);
        // Scoring ignores off-line displacement entirely.
        let on = Vector::new(vec![0.6, 0.0, 0.8]).unwrap();
        let off = Vector::new(vec![0.6, 99.0, 0.8]).unwrap();
        let s_on = md_score(&model, &on).unwrap();
        let s_off = md_score(&model, &off).unwrap();
        assert!((s_on - s_off).abs() < 1e-12);
    }

    #[test]
    fn snapshot_route_matches_direct_route() {
        // dim > n forces the snapshot path; compare with the direct path on
        // the same data padded so dim <= n. Instead, fit both ways on data
        // where both routes are exercised by transposing the role: build 6
        // samples in 10-D (snapshot), then verify against scores computed
        // from the direct covariance eigendecomposition done here inline.
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let n = 6;
        let dim = 10;
        let pts: Vec<Vector> = (0..n).map(|_| gauss(&mut rng, dim)).collect();
        let model = fit_pca(&pts, 1.0).unwrap();
        assert!(model.retained() <= n - 1);

        // Direct covariance eigendecomposition, same clamping rules.
        let mut mean = vec![0.0; dim];
        for v in &pts {
            for d in 0..dim {
                mean[d] += v[d] / n as f64;
            }
        }
        let cov = SymMatrix::from_fn(dim, |i, j| {
            pts.iter().map(|v| (v[i] - mean[i]) * (v[j] - mean[j])).sum::<f64>() / (n - 1) as f64
        })
        .unwrap();
        let eig = sym_eig(&cov).unwrap().clamp_small_to_zero();
        for t in 0..model.retained() {
            assert!(
                (model.scales[t] * model.scales[t] - eig.eigenvalues[t]).abs()
                    < 1e-9 * eig.eigenvalues[0],
                "eigenvalue {t}"
            );
            // Components agree up to sign.
            let d = dot_slices(&model.components[t], &eig.eigenvectors[t]).abs();
            assert!(d > 1.0 - 1e-8, "component {t}: |cos| = {d}");
        }
        // And the scores agree.
        let mut rng2 = ChaCha12Rng::seed_from_u64(100);
        for _ in 0..20 {
            let q = gauss(&mut rng2, dim);
            let direct: f64 = {
                let c: Vec<f64> = (0..dim).map(|d| q[d] - mean[d]).collect();
                let mut s = 0.0;
                for t in 0..model.retained() {
                    let z = dot_slices(&eig.eigenvectors[t], &c) / eig.eigenvalues[t].sqrt();
                    s += z * z;
                }
                s.sqrt()
            };
            let snap = md_score(&model, &q).unwrap();
            assert!((snap - direct).abs() < 1e-8 * (1.0 + direct), "{snap} vs {direct}");
        }
    }

    #[test]
    fn components_are_orthonormal_both_routes() {
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        for (n, dim) in [(30usize, 5usize), (5, 12)] {
            let pts: Vec<Vector> = (0..n).map(|_| gauss(&mut rng, dim)).collect();
            let model = fit_pca(&pts, 1.0).unwrap();
            for s in 0..model.retained() {
                for t in 0..model.retained() {
                    let d = dot_slices(&model.components[s], &model.components[t]);
                    let expect = if s == t { 1.0 } else { 0.0 };
                    assert!((d - expect).abs() < 1e-8, "({s},{t}) route n={n} dim={dim}: {d}");
                }
            }
            // Scales are sorted descending like the eigenvalues.
            for w in model.scales.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn score_of_the_mean_is_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let pts: Vec<Vector> = (0..40).map(|_| gauss(&mut rng, 4)).collect();
        let model = fit_pca(&pts, 0.99).unwrap();
        assert!(md_score(&model, &model.mean.clone()).unwrap() < 1e-12);
        let q = Vector::new(vec![1.0]).unwrap();
        assert!(md_score(&model, &q).is_err());
    }
}
