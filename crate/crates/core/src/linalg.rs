//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Dyn, LU, SymmetricEigen};

use crate::error::{Error, Result};

/// Symmetric eigendecomposition with eigenvalues sorted ascending and each
/// eigenvector's sign fixed so that its first non-negligible entry is positive.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let scale = col.amax();
        let sign = col
            .iter()
            .find(|v| v.abs() > 1e-8 * scale)
            .map_or(1.0, |v| v.signum());
        vectors.column_mut(dst).copy_from(&(col * sign));
    }
    Ok((values, vectors))
}

/// LU factorization with partial pivoting that refuses numerically singular
/// matrices.
#[derive(Clone, Debug)]
pub struct DenseLu {
    lu: LU<f64, Dyn, Dyn>,
    dim: usize,
}

impl DenseLu {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let dim = a.nrows();
        if dim != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: a.ncols(),
            });
        }
        let scale = a.amax();
        let lu = a.lu();
        let diag = lu.u().diagonal();
        let min_pivot = diag.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        let max_pivot = diag.amax();
        if !(scale > 0.0)
            || !min_pivot.is_finite()
            || min_pivot <= (dim as f64) * f64::EPSILON * max_pivot.max(scale)
        {
            return Err(Error::SingularKkt);
        }
        Ok(Self { lu, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve_in_place(&self, rhs: &mut DVector<f64>) -> Result<()> {
        if rhs.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rhs.len(),
            });
        }
        if self.lu.solve_mut(rhs) {
            Ok(())
        } else {
            Err(Error::SingularKkt)
        }
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = rhs.clone();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// `‖PA − LU‖_F / ‖A‖_F` for the original matrix `a`.
    pub fn factorization_residual(&self, a: &DMatrix<f64>) -> f64 {
        let (p, l, u) = self.lu.clone().unpack();
        let mut pa = a.clone();
        p.permute_rows(&mut pa);
        (pa - l * u).norm() / a.norm()
    }
}

/// 1-norm condition number, computed by explicit inversion. Only meant for
/// diagnostics on moderately sized matrices.
pub fn condition_number_1(a: &DMatrix<f64>) -> f64 {
    let norm1 = |m: &DMatrix<f64>| {
        m.column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match a.clone().try_inverse() {
        Some(inv) => norm1(a) * norm1(&inv),
        None => f64::INFINITY,
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolated quantile; sorts `values` in place.
pub(crate) fn quantile(values: &mut [f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    values[lo] * (1.0 - frac) + values[hi] * frac
}
