//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hilbert::{Point, Shape};

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// symmetric matrix point.
pub fn sym_eigen(x: &Point) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let p = match x.shape() {
        Shape::Matrix(p) => p,
        Shape::Vector(_) => return Err(Error::invalid("eigendecomposition needs a matrix point")),
    };
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen);
    }
    let eig = SymmetricEigen::try_new(DMatrix::from_row_slice(p, p, x.as_slice()), 1e-15, 0).ok_or(Error::Eigen)?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// `Σ_i values[i] q_i q_iᵀ` with `q_i` the columns of `vectors`.
pub fn sym_recompose(values: &[f64], vectors: &DMatrix<f64>) -> Result<Point> {
    let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| vectors[(r, c)] * values[c]);
    Point::from_matrix(&(scaled * vectors.transpose()))
}

pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("matrix must be square"));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, 1e-15, 0).ok_or(Error::Eigen)?;
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn solve(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let rhs = DVector::from_column_slice(b);
    let sol = a.lu().solve(&rhs).ok_or(Error::Singular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(sol.iter().copied().collect())
}

pub fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).iter().copied().collect()
}
