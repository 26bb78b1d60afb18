//! Small dense linear-algebra helpers shared by the engine and the models.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Kronecker product `a (x) b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * a[(i, j)]));
        }
    }
    out
}

/// Column-major flattening.
pub fn vec_cm(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_cm`].
pub fn unvec_cm(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch { expected: rows * cols, found: v.len() });
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Orthonormal basis (columns) of the null space of `a`.
pub fn nullspace(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let gram = a.transpose() * a;
    let eig = gram.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i].abs() <= 1e-12 * scale).collect();
    let mut out = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &eig.eigenvectors.column(i));
    }
    out
}

// nalgebra's SVD loses accuracy (errors near 1e-4) on matrices with clustered
// singular values, which orthonormal-ish tangent frames produce all the time.
// The helpers below use Householder QR and symmetric eigensolvers instead.

/// Least-squares solution of `a x = b` for `a` of full column rank; fails
/// when a diagonal entry of the QR factor drops below `rel_tol` times the
/// largest.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64, what: &'static str) -> Result<DMatrix<f64>> {
    if a.nrows() < a.ncols() || a.ncols() == 0 {
        return Err(Error::Singular(what));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let diag = r.diagonal();
    let dmax = diag.amax();
    if !(dmax > 0.0) || diag.iter().any(|d| d.abs() <= rel_tol * dmax) {
        return Err(Error::Singular(what));
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb).ok_or(Error::Singular(what))
}

/// Vector form of [`lstsq`].
pub fn lstsq_vec(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64, what: &'static str) -> Result<DVector<f64>> {
    let x = lstsq(a, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()), rel_tol, what)?;
    Ok(x.column(0).into_owned())
}

/// Moore-Penrose pseudo-inverse of a matrix of full rank `min(rows, cols)`,
/// via QR of the tall orientation.
pub fn pinv_full_rank(a: &DMatrix<f64>, rel_tol: f64, what: &'static str) -> Result<DMatrix<f64>> {
    if a.nrows() >= a.ncols() {
        lstsq(a, &DMatrix::identity(a.nrows(), a.nrows()), rel_tol, what)
    } else {
        Ok(pinv_full_rank(&a.transpose(), rel_tol, what)?.transpose())
    }
}

/// Singular values of `a` (ascending), from the eigenvalues of the smaller
/// Gram matrix. Values below about `1e-8` times the largest are not resolved.
pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    let gram = if a.nrows() >= a.ncols() { a.transpose() * a } else { a * a.transpose() };
    let mut values: Vec<f64> = gram.symmetric_eigenvalues().iter().map(|l| l.max(0.0).sqrt()).collect();
    values.sort_by(f64::total_cmp);
    DVector::from_vec(values)
}

/// `J M^T J` for sign vector `j`; the inverse of a J-orthogonal `M`.
pub fn j_transpose(signs: &[f64], m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.ncols(), m.nrows(), |i, k| signs[i] * m[(k, i)] * signs[k])
}

pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}
