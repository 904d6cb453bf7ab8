//! Small dense helpers shared by the grid and dual eigen paths.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// nonincreasing order. Column `j` of the returned matrix pairs with value `j`.
pub(crate) fn symmetric_eigen_desc(matrix: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let dim = matrix.nrows();
    if dim == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub(crate) fn symmetrize(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    (matrix + matrix.transpose()) * 0.5
}

pub(crate) fn max_asymmetry(matrix: &DMatrix<f64>) -> f64 {
    let n = matrix.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    worst
}

/// Square root and Moore–Penrose pseudo-inverse square root of a symmetric PSD
/// matrix. Singular values of the root below `rel_tol` times the largest are
/// treated as zero.
pub(crate) fn psd_sqrt_and_pinv_sqrt(matrix: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let dim = matrix.nrows();
    let (values, vectors) = symmetric_eigen_desc(symmetrize(matrix));
    let roots: Vec<f64> = values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let top = roots.first().copied().unwrap_or(0.0);
    let inv_roots: Vec<f64> =
        roots.iter().map(|&r| if top > 0.0 && r > rel_tol * top { 1.0 / r } else { 0.0 }).collect();
    let sqrt = &vectors * DMatrix::from_diagonal(&DVector::from_vec(roots)) * vectors.transpose();
    let pinv = &vectors * DMatrix::from_diagonal(&DVector::from_vec(inv_roots)) * vectors.transpose();
    debug_assert_eq!(sqrt.nrows(), dim);
    (sqrt, pinv)
}
