//! Dense linear algebra and sample statistics used across the toolkit.
//!
//! Matrices are small (at most a few hundred rows), so everything here is a
//! straightforward dense routine over [`ndarray::Array2`].

use ndarray::{Array1, Array2, ArrayView2, Axis};
use crate::error::{insufficient, invalid, Error, Result};

pub type Matrix = Array2<f64>;

/// Absolute tolerance for treating a matrix as symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Eigenvalues in `[-PSD_TOLERANCE, 0)` are treated as round-off and clamped.
pub const PSD_TOLERANCE: f64 = 1e-8;

const MAX_JACOBI_SWEEPS: usize = 100;

/// Mean vector and covariance matrix of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPair {
    pub mean: Array1<f64>,
    pub covariance: Matrix,
}

impl MomentPair {
    pub fn new(mean: Array1<f64>, covariance: Matrix) -> Result<Self> {
        let d = mean.len();
        if covariance.dim() != (d, d) {
            return Err(invalid(format!(
                "covariance shape {:?} does not match mean dimension {d}",
                covariance.dim()
            )));
        }
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Adds `amount` to the covariance diagonal.
    pub fn regularized(mut self, amount: f64) -> Self {
        self.covariance.diag_mut().mapv_inplace(|v| v + amount);
        self
    }
}

fn check_symmetric(a: &ArrayView2<f64>) -> Result<()> {
    let (r, c) = a.dim();
    if r != c {
        return Err(invalid(format!("matrix is {r}x{c}, expected square")));
    }
    if r == 0 {
        return Err(invalid("matrix is empty"));
    }
    for i in 0..r {
        for j in (i + 1)..r {
            let diff = (a[[i, j]] - a[[j, i]]).abs();
            if !(diff <= SYMMETRY_TOLERANCE) {
                return Err(invalid(format!(
                    "matrix is not symmetric at ({i},{j}): |difference| = {diff:e}"
                )));
            }
        }
    }
    Ok(())
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matrix whose columns are
/// the matching orthonormal eigenvectors, so that `a = V diag(λ) Vᵀ`.
pub fn sym_eig(a: &Matrix) -> Result<(Array1<f64>, Matrix)> {
    check_symmetric(&a.view())?;
    let n = a.nrows();
    // Work on the exactly symmetrized copy.
    let mut m = (a + &a.t()) * 0.5;
    let mut v = Matrix::eye(n);

    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        if off.sqrt() <= f64::EPSILON * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;

                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let vectors = v.select(Axis(1), &order);
    Ok((values, vectors))
}

/// Principal square root of a positive semidefinite matrix after adding
/// `regularizer · I`.
pub fn spd_sqrt(a: &Matrix, regularizer: f64) -> Result<Matrix> {
    if !(regularizer >= 0.0) || !regularizer.is_finite() {
        return Err(invalid(format!("regularizer must be finite and >= 0, got {regularizer}")));
    }
    let (values, vectors) = sym_eig(a)?;
    if let Some(&lowest) = values.iter().last() {
        if lowest < -PSD_TOLERANCE {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: lowest });
        }
    }
    let roots = values.mapv(|l| (l.max(0.0) + regularizer).sqrt());
    let scaled = &vectors * &roots.insert_axis(Axis(0));
    let s = scaled.dot(&vectors.t());
    Ok((&s + &s.t()) * 0.5)
}

/// Sample mean and unbiased (n − 1) covariance.
pub fn mean_cov<V: AsRef<[f64]>>(samples: &[V]) -> Result<MomentPair> {
    let n = samples.len();
    if n < 2 {
        return Err(insufficient(format!("need at least 2 samples, got {n}")));
    }
    let d = samples[0].as_ref().len();
    if d == 0 {
        return Err(invalid("samples have zero dimension"));
    }
    let mut data = Matrix::zeros((n, d));
    for (i, s) in samples.iter().enumerate() {
        let s = s.as_ref();
        if s.len() != d {
            return Err(invalid(format!("sample {i} has dimension {}, expected {d}", s.len())));
        }
        data.row_mut(i).assign(&ndarray::ArrayView1::from(s));
    }
    let mean = data.sum_axis(Axis(0)) / n as f64;
    let centered = &data - &mean.view().insert_axis(Axis(0));
    let mut cov = centered.t().dot(&centered) / (n - 1) as f64;
    // Force exact symmetry; gemm accumulation order can differ between halves.
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (cov[[i, j]] + cov[[j, i]]);
            cov[[i, j]] = avg;
            cov[[j, i]] = avg;
        }
    }
    Ok(MomentPair { mean, covariance: cov })
}

/// Nearest-rank percentile: the ⌈p·n/100⌉-th smallest value.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(insufficient("percentile of an empty sequence"));
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(invalid(format!("percentile must lie in (0, 100], got {p}")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(invalid("percentile input contains NaN"));
    }
    let n = values.len();
    let rank = ((p * n as f64) / 100.0).ceil() as usize;
    let rank = rank.clamp(1, n);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[rank - 1])
}

/// Euclidean distance matrix with an exact zero diagonal.
pub fn pairwise_distances<V: AsRef<[f64]>>(points: &[V]) -> Result<Matrix> {
    let n = points.len();
    if n == 0 {
        return Err(insufficient("no points"));
    }
    let d = points[0].as_ref().len();
    if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.as_ref().len() != d) {
        return Err(invalid(format!(
            "point {i} has dimension {}, expected {d}",
            p.as_ref().len()
        )));
    }
    let mut out = Matrix::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = euclidean(points[i].as_ref(), points[j].as_ref());
            out[[i, j]] = dist;
            out[[j, i]] = dist;
        }
    }
    Ok(out)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
