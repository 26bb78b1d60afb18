//! Indefinite scalar products and the group SE(V) of semi-Euclidean motions.
//!
//! A [`SignatureForm`] carries the diagonal sign matrix `J` of the scalar
//! product `<x, y> = sum_k J_kk x_k y_k`. Motions `g = (R, s)` act on `V` by
//! `g.v = R v + s` and compose as `(R2, s2)(R1, s1) = (R2 R1, s2 + R2 s1)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Default residual bound for accepting a matrix as a J-orthogonal isometry.
pub const DEFAULT_ISOMETRY_TOL: f64 = 1e-9;

/// A non-degenerate diagonal scalar product on `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SignatureForm {
    signs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for SignatureForm {
    type Error = Error;

    fn try_from(signs: Vec<f64>) -> Result<Self> {
        SignatureForm::new(signs)
    }
}

impl From<SignatureForm> for Vec<f64> {
    fn from(form: SignatureForm) -> Self {
        form.signs
    }
}

impl SignatureForm {
    pub fn new(signs: Vec<f64>) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::InvalidInput("signature form must have positive dimension".into()));
        }
        if let Some(bad) = signs.iter().find(|s| **s != 1.0 && **s != -1.0) {
            return Err(Error::InvalidInput(format!("signature entries must be +1 or -1, got {bad}")));
        }
        Ok(Self { signs })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self { signs: vec![1.0; dim] }
    }

    /// `diag(I_p, -I_q)`.
    pub fn from_pq(p: usize, q: usize) -> Self {
        let mut signs = vec![1.0; p];
        signs.extend(std::iter::repeat(-1.0).take(q));
        Self { signs }
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    /// Number of `+1` entries.
    pub fn p(&self) -> usize {
        self.signs.iter().filter(|s| **s > 0.0).count()
    }

    /// Number of `-1` entries.
    pub fn q(&self) -> usize {
        self.dim() - self.p()
    }

    pub fn is_definite(&self) -> bool {
        self.q() == 0
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.signs))
    }

    pub fn positive_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&k| self.signs[k] > 0.0).collect()
    }

    pub fn negative_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&k| self.signs[k] < 0.0).collect()
    }

    /// `J x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().zip(&self.signs).map(|(v, s)| v * s))
    }

    /// `J M` (scales rows).
    pub fn apply_rows(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (i, s) in self.signs.iter().enumerate() {
            if *s < 0.0 {
                out.row_mut(i).neg_mut();
            }
        }
        out
    }

    /// Unchecked scalar product; panics on length mismatch in debug builds only.
    pub fn dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        x.iter().zip(y.iter()).zip(&self.signs).map(|((a, b), s)| s * a * b).sum()
    }

    /// Gram matrix `F^T J F` of the columns of `frame`.
    pub fn gram(&self, frame: &DMatrix<f64>) -> DMatrix<f64> {
        frame.transpose() * self.apply_rows(frame)
    }

    /// Largest entry of `|R^T J R - J|`.
    pub fn isometry_residual(&self, r: &DMatrix<f64>) -> f64 {
        let defect = self.gram(r) - self.matrix();
        defect.amax()
    }
}

/// `sum_k signs[k] x[k] y[k]`.
pub fn indefinite_ip(form: &SignatureForm, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    check_dim(form.dim(), x.len())?;
    check_dim(form.dim(), y.len())?;
    Ok(form.dot(x, y))
}

/// Outcome of [`is_oriented_isometry`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationCheck {
    pub accepted: bool,
    /// Largest entry of `|R^T J R - J|`.
    pub residual: f64,
    /// Determinant of the block of `R` on the `+1` index set.
    pub positive_block_det: f64,
    /// Determinant of the block of `R` on the `-1` index set (1 when empty).
    pub negative_block_det: f64,
}

fn block_det(r: &DMatrix<f64>, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let block = DMatrix::from_fn(idx.len(), idx.len(), |i, j| r[(idx[i], idx[j])]);
    block.determinant()
}

/// Membership test for the identity component `SO(V)` of the J-orthogonal group.
///
/// The orientation criterion is positivity of the determinants of the two
/// diagonal blocks in the basis adapted to `J`.
pub fn is_oriented_isometry(r: &DMatrix<f64>, form: &SignatureForm, tol: f64) -> OrientationCheck {
    let n = form.dim();
    if r.nrows() != n || r.ncols() != n {
        return OrientationCheck {
            accepted: false,
            residual: f64::INFINITY,
            positive_block_det: f64::NAN,
            negative_block_det: f64::NAN,
        };
    }
    let residual = form.isometry_residual(r);
    let positive_block_det = block_det(r, &form.positive_indices());
    let negative_block_det = block_det(r, &form.negative_indices());
    OrientationCheck {
        accepted: residual <= tol && positive_block_det > 0.0 && negative_block_det > 0.0,
        residual,
        positive_block_det,
        negative_block_det,
    }
}

/// An operator on `V`, nominally in `SO(V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Isometry(DMatrix<f64>);

impl Isometry {
    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    /// Wraps `r` after checking membership in `SO(V)` at tolerance `tol`.
    pub fn checked(r: DMatrix<f64>, form: &SignatureForm, tol: f64) -> Result<Self> {
        let check = is_oriented_isometry(&r, form, tol);
        if check.accepted {
            Ok(Self(r))
        } else {
            Err(Error::Constraint(format!(
                "not an oriented isometry (residual {:.3e}, block dets {:.3e}, {:.3e})",
                check.residual, check.positive_block_det, check.negative_block_det
            )))
        }
    }

    /// Wraps `r` without validation; only squareness is required.
    pub fn from_matrix(r: DMatrix<f64>) -> Result<Self> {
        check_dim(r.nrows(), r.ncols())?;
        Ok(Self(r))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// An element `g = (R, s)` of `SE(V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidMotion {
    pub rotation: Isometry,
    pub translation: DVector<f64>,
}

impl RigidMotion {
    pub fn new(rotation: Isometry, translation: DVector<f64>) -> Result<Self> {
        check_dim(rotation.dim(), translation.len())?;
        Ok(Self { rotation, translation })
    }

    pub fn from_parts(r: DMatrix<f64>, s: DVector<f64>) -> Result<Self> {
        Self::new(Isometry::from_matrix(r)?, s)
    }

    pub fn identity(dim: usize) -> Self {
        Self { rotation: Isometry::identity(dim), translation: DVector::zeros(dim) }
    }

    pub fn translation_only(s: DVector<f64>) -> Self {
        Self { rotation: Isometry::identity(s.len()), translation: s }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn r(&self) -> &DMatrix<f64> {
        self.rotation.matrix()
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.translation
    }

    /// Largest entry of `|g - h|` over both components.
    pub fn max_abs_diff(&self, other: &RigidMotion) -> f64 {
        let dr = (self.r() - other.r()).amax();
        let ds = (self.s() - other.s()).amax();
        dr.max(ds)
    }
}

/// `R v + s`.
pub fn se_act(g: &RigidMotion, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(g.dim(), v.len())?;
    Ok(g.r() * v + g.s())
}

/// `g2 g1 = (R2 R1, s2 + R2 s1)`: apply `g1` first.
pub fn se_compose(g2: &RigidMotion, g1: &RigidMotion) -> Result<RigidMotion> {
    check_dim(g2.dim(), g1.dim())?;
    Ok(RigidMotion {
        rotation: Isometry(g2.r() * g1.r()),
        translation: g2.s() + g2.r() * g1.s(),
    })
}

/// `(R, s)^{-1} = (R^{-1}, -R^{-1} s)`.
pub fn se_inverse(g: &RigidMotion) -> Result<RigidMotion> {
    let r_inv = g.r().clone().try_inverse().ok_or(Error::Singular("se_inverse"))?;
    let s = -(&r_inv * g.s());
    Ok(RigidMotion { rotation: Isometry(r_inv), translation: s })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, k: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[k] = 1.0;
        v
    }

    #[test]
    fn minkowski_timelike_unit() {
        let form = SignatureForm::new(vec![-1.0, 1.0, 1.0]).unwrap();
        assert_eq!(indefinite_ip(&form, &e(3, 0), &e(3, 0)).unwrap(), -1.0);
        assert_eq!(indefinite_ip(&form, &e(3, 0), &e(3, 1)).unwrap(), 0.0);
    }

    #[test]
    fn euclidean_norm_squared() {
        let form = SignatureForm::euclidean(3);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(indefinite_ip(&form, &x, &x).unwrap(), 14.0);
    }

    #[test]
    fn ip_rejects_mismatch() {
        let form = SignatureForm::euclidean(3);
        let x = DVector::zeros(2);
        assert!(matches!(
            indefinite_ip(&form, &x, &x),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn signs_are_validated() {
        assert!(SignatureForm::new(vec![1.0, 0.5]).is_err());
        assert!(SignatureForm::new(vec![]).is_err());
        let f = SignatureForm::from_pq(2, 3);
        assert_eq!((f.p(), f.q(), f.dim()), (2, 3, 5));
    }

    #[test]
    fn identity_and_translation() {
        let v = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let id = RigidMotion::identity(3);
        assert_eq!(se_act(&id, &v).unwrap(), v);
        let s = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let t = RigidMotion::translation_only(s.clone());
        assert_eq!(se_act(&t, &v).unwrap(), &v + &s);
        let t_inv = se_inverse(&t).unwrap();
        assert_eq!(t_inv.s(), &(-&s));
        assert_eq!(se_inverse(&id).unwrap(), id);
        assert_eq!(se_compose(&id, &t).unwrap(), t);
    }

    #[test]
    fn orientation_reversal_is_rejected() {
        let form = SignatureForm::euclidean(3);
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0]));
        let check = is_oriented_isometry(&r, &form, DEFAULT_ISOMETRY_TOL);
        assert!(!check.accepted);
        assert_eq!(check.residual, 0.0);
        let id = is_oriented_isometry(&DMatrix::identity(3, 3), &form, 0.0);
        assert!(id.accepted && id.residual == 0.0);
    }

    #[test]
    fn time_reversal_is_rejected_in_minkowski() {
        // diag(-1, -1, 1) is J-orthogonal with det 1 but flips both blocks.
        let form = SignatureForm::new(vec![-1.0, 1.0, 1.0]).unwrap();
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -1.0, 1.0]));
        let check = is_oriented_isometry(&r, &form, DEFAULT_ISOMETRY_TOL);
        assert!(check.residual < 1e-15);
        assert!(!check.accepted);
    }

    #[test]
    fn singular_rotation_has_no_inverse() {
        let g = RigidMotion::from_parts(DMatrix::zeros(2, 2), DVector::zeros(2)).unwrap();
        assert!(matches!(se_inverse(&g), Err(Error::Singular(_))));
    }
}
