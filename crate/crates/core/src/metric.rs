//! Mahalanobis distance fitted on the proper-training vectors.
//!
//! The covariance is the maximum-likelihood estimate shrunk linearly toward
//! a scaled identity:
//!
//! ```text
//! S' = (1 - s) * S + s * (tr(S) / L) * I
//! ```
//!
//! The model keeps both the precision matrix `P = S'^-1` and the inverse
//! Cholesky factor `W` of `S'` (so `P = W^T W`). Pairwise distances in the
//! hot path are Euclidean distances between whitened vectors `W x`; the
//! explicit quadratic form is available through [`mahalanobis`].

use nalgebra::{DMatrix, DVector};

use crate::embedding::EmbeddedVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MetricModel {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    whitener: DMatrix<f64>,
    shrinkage: f64,
}

impl MetricModel {
    /// Plain Euclidean distance in `dim` dimensions.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            precision: DMatrix::identity(dim, dim),
            whitener: DMatrix::identity(dim, dim),
            shrinkage: 1.0,
        }
    }

    /// Builds a model from an explicit symmetric positive-definite precision.
    pub fn from_precision(precision: DMatrix<f64>) -> Result<Self> {
        let dim = precision.nrows();
        if precision.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: precision.ncols(),
            });
        }
        // P = R R^T  =>  |R^T d|^2 = d^T P d
        let chol = precision
            .clone()
            .cholesky()
            .ok_or(Error::SingularCovariance)?;
        let whitener = chol.l().transpose();
        Ok(Self {
            mean: DVector::zeros(dim),
            precision,
            whitener,
            shrinkage: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.precision.nrows()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    /// Maps `v` into the space where this metric is Euclidean.
    pub fn whiten(&self, v: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let w = &self.whitener;
        (0..dim)
            .map(|i| (0..dim).map(|j| w[(i, j)] * v[j]).sum())
            .collect()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Fits the shrunk covariance on `reference` and inverts it.
///
/// A reference with zero total variance has no shape to learn; with a
/// positive shrinkage the model falls back to the Euclidean metric.
pub fn fit_metric(reference: &[EmbeddedVector], shrinkage: f64) -> Result<MetricModel> {
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(Error::InvalidShrinkage(shrinkage));
    }
    let n = reference.len();
    if n < 2 {
        return Err(Error::DegenerateReference(n));
    }
    let dim = reference[0].dim();
    if let Some(bad) = reference.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.dim(),
        });
    }

    let mut mean = DVector::zeros(dim);
    for v in reference {
        mean += DVector::from_column_slice(v.values());
    }
    mean /= n as f64;

    let mut cov = DMatrix::zeros(dim, dim);
    for v in reference {
        let d = DVector::from_column_slice(v.values()) - &mean;
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= n as f64;

    let trace = cov.trace();
    let regularized = if trace > 0.0 {
        let mut r = cov * (1.0 - shrinkage);
        let target = shrinkage * trace / dim as f64;
        for i in 0..dim {
            r[(i, i)] += target;
        }
        r
    } else if shrinkage > 0.0 {
        DMatrix::identity(dim, dim)
    } else {
        return Err(Error::SingularCovariance);
    };

    let chol = regularized.cholesky().ok_or(Error::SingularCovariance)?;
    let mut precision = chol.inverse();
    // exact symmetry
    let sym = (&precision + precision.transpose()) * 0.5;
    precision = sym;
    let whitener = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(dim, dim))
        .ok_or(Error::SingularCovariance)?;

    Ok(MetricModel {
        mean,
        precision,
        whitener,
        shrinkage,
    })
}

/// `sqrt((a - b)^T P (a - b))`, evaluated as a quadratic form.
pub fn mahalanobis(model: &MetricModel, a: &EmbeddedVector, b: &EmbeddedVector) -> Result<f64> {
    model.check_dim(a.dim())?;
    model.check_dim(b.dim())?;
    let diff: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x - y)
        .collect();
    let p = &model.precision;
    let mut q = 0.0;
    for (i, di) in diff.iter().enumerate() {
        let row: f64 = diff.iter().enumerate().map(|(j, dj)| p[(i, j)] * dj).sum();
        q += di * row;
    }
    Ok(q.max(0.0).sqrt())
}

/// Euclidean distance between two already-whitened vectors.
#[inline]
pub(crate) fn whitened_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}
