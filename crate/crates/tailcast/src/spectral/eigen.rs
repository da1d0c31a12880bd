//! Cyclic Jacobi eigensolver for small symmetric matrices plus the
//! eigenvalue and leading-eigenvector feature families.

use ndarray::{Array2, ArrayView2};

use crate::correlation::CorrelationSnapshot;
use crate::error::{Error, Result};
use crate::stats;

/// Off-diagonal Frobenius norm at which iteration stops.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Sentinel for eigenvalue ratios whose denominator is below 1e-12.
pub const RATIO_CAP: f64 = 1e6;
const RATIO_DENOM_FLOOR: f64 = 1e-12;

/// Eigendecomposition result: eigenvalues descending and floored at zero,
/// plus the sign-fixed leading eigenvector.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub leading_vector: Vec<f64>,
}

fn off_norm(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += m[[i, j]] * m[[i, j]];
        }
    }
    (2.0 * sum).sqrt()
}

/// Full Jacobi eigendecomposition of a symmetric matrix. Returns unsorted
/// eigenvalues with the matching eigenvectors as columns.
pub fn jacobi(a: ArrayView2<'_, f64>, tol: f64, max_sweeps: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi needs a square matrix");
    let mut m = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    if n < 2 {
        return Ok((m.diag().to_vec(), v));
    }
    let mut sweeps = 0;
    while off_norm(&m) > tol {
        if sweeps == max_sweeps {
            return Err(Error::EigenNonConvergence {
                sweeps,
                off_norm: off_norm(&m),
            });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let app = m[[p, p]];
                let aqq = m[[q, q]];
                m[[p, p]] = app - t * apq;
                m[[q, q]] = aqq + t * apq;
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = m[[k, p]];
                        let akq = m[[k, q]];
                        let new_kp = akp - s * (akq + tau * akp);
                        let new_kq = akq + s * (akp - tau * akq);
                        m[[k, p]] = new_kp;
                        m[[p, k]] = new_kp;
                        m[[k, q]] = new_kq;
                        m[[q, k]] = new_kq;
                    }
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = vkp - s * (vkq + tau * vkp);
                    v[[k, q]] = vkq + s * (vkp - tau * vkq);
                }
            }
        }
    }
    Ok((m.diag().to_vec(), v))
}

/// Decompose a correlation snapshot: eigenvalues sorted descending and
/// floored at 0, leading eigenvector sign-fixed so its largest-magnitude
/// entry is positive.
pub fn eigendecompose(snapshot: &CorrelationSnapshot) -> Result<Spectrum> {
    let (values, vectors) = jacobi(snapshot.matrix.view(), JACOBI_TOL, JACOBI_MAX_SWEEPS)
        .map_err(|e| match e {
            Error::EigenNonConvergence { sweeps, off_norm } => Error::Numerical(format!(
                "eigensolver failed on {} {}: no convergence after {sweeps} sweeps (off-norm {off_norm:.3e})",
                snapshot.estimator.label(),
                snapshot.as_of
            )),
            other => other,
        })?;
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();
    let mut leading: Vec<f64> = (0..n).map(|k| vectors[[k, order[0]]]).collect();

    let mut arg = 0;
    for (k, x) in leading.iter().enumerate() {
        if x.abs() > leading[arg].abs() {
            arg = k;
        }
    }
    if leading[arg] < 0.0 {
        for x in leading.iter_mut() {
            *x = -*x;
        }
    }
    Ok(Spectrum { eigenvalues, leading_vector: leading })
}

pub fn eigen_feature_names() -> Vec<&'static str> {
    vec![
        "ar1", "ar3", "ar5", "entropy", "eff_rank", "gap", "cond", "mp_excess",
        "eig_std", "eig_skew", "eig_kurt",
    ]
}

fn capped_ratio(num: f64, denom: f64) -> f64 {
    if denom < RATIO_DENOM_FLOOR {
        RATIO_CAP
    } else {
        num / denom
    }
}

/// Absorption ratio AR_k = (top-k eigenvalue mass) / (total mass).
pub fn absorption_ratio(eigenvalues: &[f64], k: usize) -> f64 {
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    eigenvalues.iter().take(k).sum::<f64>() / total
}

/// Eigenvalue entropy H = -sum(p ln p) over p_i = lambda_i / sum(lambda),
/// with 0 ln 0 = 0.
pub fn eigenvalue_entropy(eigenvalues: &[f64]) -> f64 {
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -eigenvalues
        .iter()
        .map(|&l| {
            let p = l / total;
            if p > 0.0 { p * p.ln() } else { 0.0 }
        })
        .sum::<f64>()
}

/// The 11 eigenvalue features in manifest order.
pub fn eigen_feature_values(spectrum: &Spectrum, effective_t: usize) -> Vec<f64> {
    let lam = &spectrum.eigenvalues;
    let n = lam.len();
    let entropy = eigenvalue_entropy(lam);
    let mp_edge = (1.0 + (n as f64 / effective_t as f64).sqrt()).powi(2);
    vec![
        absorption_ratio(lam, 1),
        absorption_ratio(lam, 3),
        absorption_ratio(lam, 5),
        entropy,
        entropy.exp(),
        capped_ratio(lam[0], lam[1]),
        capped_ratio(lam[0], lam[n - 1]),
        lam[0] - mp_edge,
        stats::population_std(lam),
        stats::population_skew(lam),
        stats::population_excess_kurtosis(lam),
    ]
}

pub fn eigenvector_feature_names() -> Vec<&'static str> {
    vec!["v1_hhi", "v1_entropy", "v1_max", "v1_quartile_disp"]
}

/// The 4 leading-eigenvector features on L1-normalised absolute loadings.
pub fn eigenvector_feature_values(spectrum: &Spectrum) -> Vec<f64> {
    let n = spectrum.leading_vector.len();
    let abs: Vec<f64> = spectrum.leading_vector.iter().map(|x| x.abs()).collect();
    let total: f64 = abs.iter().sum();
    if total <= 0.0 {
        return vec![0.0; 4];
    }
    let q: Vec<f64> = abs.iter().map(|a| a / total).collect();
    let hhi: f64 = q.iter().map(|x| x * x).sum();
    let ent: f64 = -q.iter().map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 }).sum::<f64>();
    let max = q.iter().cloned().fold(0.0, f64::max);
    let k = n / 4;
    let disp = if k == 0 {
        0.0
    } else {
        let mut sorted = q.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let top: f64 = sorted[..k].iter().sum::<f64>() / k as f64;
        let bottom: f64 = sorted[n - k..].iter().sum::<f64>() / k as f64;
        top - bottom
    };
    vec![hhi, ent, max, disp]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use chrono::NaiveDate;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::correlation::{CorrelationSnapshot, Estimator};

    fn snapshot(matrix: Array2<f64>, effective_t: usize) -> CorrelationSnapshot {
        CorrelationSnapshot {
            estimator: Estimator::Roll60,
            as_of: NaiveDate::from_ymd_opt(2020, 1, 6).unwrap(),
            matrix,
            effective_t,
            degenerate: vec![],
        }
    }

    #[test]
    fn identity_spectrum_and_features() {
        let snap = snapshot(Array2::eye(24), 60);
        let spec = eigendecompose(&snap).unwrap();
        for l in &spec.eigenvalues {
            assert_abs_diff_eq!(*l, 1.0, epsilon = 1e-12);
        }
        let f = eigen_feature_values(&spec, 60);
        let names = eigen_feature_names();
        let get = |n: &str| f[names.iter().position(|x| *x == n).unwrap()];
        assert_abs_diff_eq!(get("ar1"), 1.0 / 24.0, epsilon = 1e-12);
        assert_abs_diff_eq!(get("entropy"), (24.0f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(get("eff_rank"), 24.0, epsilon = 1e-10);
        assert_abs_diff_eq!(get("gap"), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(get("cond"), 1.0, epsilon = 1e-12);
        // Hand evaluation of lambda1 - (1 + sqrt(n/T))^2 at n=24, T=60:
        // 1 - (1 + sqrt(0.4))^2 = 1 - 2.6649110640673518.
        assert_abs_diff_eq!(get("mp_excess"), -1.664_911_064_067_351_8, epsilon = 1e-9);
        assert_abs_diff_eq!(get("eig_std"), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(get("eig_skew"), 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(get("eig_kurt"), 0.0, epsilon = 0.0);
    }

    #[test]
    fn all_ones_matrix_spectrum_and_features() {
        let snap = snapshot(Array2::from_elem((24, 24), 1.0), 60);
        let spec = eigendecompose(&snap).unwrap();
        assert_abs_diff_eq!(spec.eigenvalues[0], 24.0, epsilon = 1e-10);
        for l in &spec.eigenvalues[1..] {
            assert_abs_diff_eq!(*l, 0.0, epsilon = 1e-10);
        }
        let expected = 1.0 / (24.0f64).sqrt();
        for x in &spec.leading_vector {
            assert_abs_diff_eq!(*x, expected, epsilon = 1e-10);
        }
        let f = eigen_feature_values(&spec, 60);
        let names = eigen_feature_names();
        let get = |n: &str| f[names.iter().position(|x| *x == n).unwrap()];
        assert_abs_diff_eq!(get("ar1"), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(get("entropy"), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(get("eff_rank"), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(get("gap"), RATIO_CAP, epsilon = 0.0);
        assert_abs_diff_eq!(get("cond"), RATIO_CAP, epsilon = 0.0);
    }

    #[test]
    fn reconstruction_of_random_psd_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let b = Array2::from_shape_fn((5, 5), |_| rng.gen_range(-1.0..1.0));
            let a = b.t().dot(&b);
            let (values, vectors) = jacobi(a.view(), JACOBI_TOL, JACOBI_MAX_SWEEPS).unwrap();
            let lam = Array2::from_diag(&ndarray::Array1::from_vec(values));
            let recon = vectors.dot(&lam).dot(&vectors.t());
            for i in 0..5 {
                for j in 0..5 {
                    assert_abs_diff_eq!(recon[[i, j]], a[[i, j]], epsilon = 1e-8);
                }
            }
            // Orthonormal eigenvectors.
            let gram = vectors.t().dot(&vectors);
            for i in 0..5 {
                for j in 0..5 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(gram[[i, j]], expect, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn correlation_spectra_satisfy_trace_and_psd_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let returns = Array2::from_shape_fn((40, 8), |_| rng.gen_range(-0.03..0.03));
            let (corr, _) = crate::correlation::pearson(returns.view());
            let (values, _) = jacobi(corr.view(), JACOBI_TOL, JACOBI_MAX_SWEEPS).unwrap();
            let sum: f64 = values.iter().sum();
            assert_abs_diff_eq!(sum, 8.0, epsilon = 1e-8);
            for v in &values {
                assert!(*v >= -1e-8, "negative eigenvalue {v}");
            }
            let snap = snapshot(corr, 40);
            let spec = eigendecompose(&snap).unwrap();
            let norm: f64 = spec.leading_vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-10);
            for w in spec.eigenvalues.windows(2) {
                assert!(w[0] >= w[1]);
            }
            let arg = spec
                .leading_vector
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .unwrap()
                .0;
            assert!(spec.leading_vector[arg] > 0.0);
        }
    }

    #[test]
    fn absorption_ratios_are_monotone_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let returns = Array2::from_shape_fn((50, 10), |_| rng.gen_range(-0.02..0.02));
            let (corr, _) = crate::correlation::pearson(returns.view());
            let spec = eigendecompose(&snapshot(corr, 50)).unwrap();
            let f = eigen_feature_values(&spec, 50);
            let (ar1, ar3, ar5) = (f[0], f[1], f[2]);
            assert!(ar1 <= ar3 + 1e-12 && ar3 <= ar5 + 1e-12 && ar5 <= 1.0 + 1e-12);
            let names = eigen_feature_names();
            let h = f[names.iter().position(|x| *x == "entropy").unwrap()];
            let er = f[names.iter().position(|x| *x == "eff_rank").unwrap()];
            assert!(h >= 0.0 && h <= (10.0f64).ln() + 1e-12);
            assert!(er >= 1.0 - 1e-12 && er <= 10.0 + 1e-9);
        }
    }

    #[test]
    fn uniform_and_one_hot_eigenvector_features() {
        let n = 24;
        let uniform = Spectrum {
            eigenvalues: vec![1.0; n],
            leading_vector: vec![1.0 / (n as f64).sqrt(); n],
        };
        let f = eigenvector_feature_values(&uniform);
        assert_abs_diff_eq!(f[0], 1.0 / 24.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], (24.0f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(f[2], 1.0 / 24.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[3], 0.0, epsilon = 1e-12);

        let mut v = vec![0.0; n];
        v[7] = 1.0;
        let one_hot = Spectrum { eigenvalues: vec![1.0; n], leading_vector: v };
        let g = eigenvector_feature_values(&one_hot);
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvector_feature_bounds_over_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 24;
        for _ in 0..1000 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-6 {
                continue;
            }
            for x in v.iter_mut() {
                *x /= norm;
            }
            let spec = Spectrum { eigenvalues: vec![1.0; n], leading_vector: v };
            let f = eigenvector_feature_values(&spec);
            assert!(f[0] >= 1.0 / n as f64 - 1e-12 && f[0] <= 1.0 + 1e-12);
            assert!(f[1] >= -1e-12 && f[1] <= (n as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn non_convergence_reports_sweeps() {
        let a = Array2::from_shape_fn((4, 4), |(i, j)| if i == j { 1.0 } else { 0.5 });
        let err = jacobi(a.view(), 0.0, 0).unwrap_err();
        match err {
            Error::EigenNonConvergence { sweeps, .. } => assert_eq!(sweeps, 0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
