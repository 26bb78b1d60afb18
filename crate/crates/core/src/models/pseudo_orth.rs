//! `SO+(p,q)` as the homogeneous space `(G x G)/diag`, acting by
//! `P -> Q1 P Q2^{-1}` and embedded in `V = gl(n)` with the form
//! `<B, C> = tr(J B^T J C)`.
//!
//! Group elements are realized as `blockdiag(Q1, Q2)`; matrices in `V` are
//! flattened column-major.

use nalgebra::{DMatrix, DVector};

use super::elementary;
use crate::error::{check_dim, Error, Result};
use crate::homogeneous::{matrix_to_rows, BasePoint, ControlCurve, Geometry, ModelDescription};
use crate::integrate::{flow_matrix_ode, integrate_vector, Side};
use crate::linalg_semi::{RigidMotion, SignatureForm};
use crate::rolling::{FramedRolling, RollingMapPath, TangentFramePath};
use crate::util::{j_transpose, kron, unvec_cm, vec_cm};

const SKEW_TOL: f64 = 1e-10;

/// Signature `(p, q)` and base point `P0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoOrthParams {
    pub p: usize,
    pub q: usize,
    pub p0: DMatrix<f64>,
}

impl PseudoOrthParams {
    pub fn new(p: usize, q: usize, p0: DMatrix<f64>) -> Result<Self> {
        let n = p + q;
        if n < 2 {
            return Err(Error::InvalidInput(format!("SO({p},{q}) is trivial")));
        }
        if p0.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, found: p0.nrows() });
        }
        let params = Self { p, q, p0 };
        let signs = params.signs();
        let defect = (j_transpose(&signs, &params.p0) * &params.p0 - DMatrix::identity(n, n)).amax();
        if defect > 1e-10 {
            return Err(Error::Constraint(format!("P0 is not in O({p},{q}) (defect {defect:.3e})")));
        }
        let det = params.p0.determinant();
        let pos = if p > 0 { params.p0.view((0, 0), (p, p)).determinant() } else { 1.0 };
        if det < 0.0 || pos <= 0.0 {
            return Err(Error::Constraint("P0 is not in the identity component".into()));
        }
        Ok(params)
    }

    pub fn identity(p: usize, q: usize) -> Result<Self> {
        Self::new(p, q, DMatrix::identity(p + q, p + q))
    }

    /// Reads `(p, q)` from a sign vector of the form `(+1,...,+1,-1,...,-1)`.
    pub fn from_signs(signs: &[f64], p0: DMatrix<f64>) -> Result<Self> {
        let p = signs.iter().take_while(|s| **s == 1.0).count();
        if signs[p..].iter().any(|s| *s != -1.0) {
            return Err(Error::InvalidInput(format!("J_signs {signs:?} must be +1 entries followed by -1 entries")));
        }
        Self::new(p, signs.len() - p, p0)
    }

    pub fn n(&self) -> usize {
        self.p + self.q
    }

    pub fn signs(&self) -> Vec<f64> {
        (0..self.n()).map(|i| if i < self.p { 1.0 } else { -1.0 }).collect()
    }

    /// `B^J = J B^T J`.
    pub fn j_adjoint(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        j_transpose(&self.signs(), b)
    }

    /// Basis `E_ij - J_i J_j E_ji`, `i < j`, of `so(p,q)`.
    pub fn skew_basis(&self) -> Vec<DMatrix<f64>> {
        let (n, s) = (self.n(), self.signs());
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                out.push(elementary(n, n, i, j) - elementary(n, n, j, i) * (s[i] * s[j]));
            }
        }
        out
    }

    /// Basis of the `J`-symmetric matrices: `E_ij + J_i J_j E_ji` and `E_ii`.
    pub fn symmetric_basis(&self) -> Vec<DMatrix<f64>> {
        let (n, s) = (self.n(), self.signs());
        let mut out = Vec::new();
        for i in 0..n {
            out.push(elementary(n, n, i, i));
            for j in i + 1..n {
                out.push(elementary(n, n, i, j) + elementary(n, n, j, i) * (s[i] * s[j]));
            }
        }
        out
    }

    fn p0_inv(&self) -> DMatrix<f64> {
        self.j_adjoint(&self.p0)
    }

    fn blockdiag(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(a);
        out.view_mut((n, n), (n, n)).copy_from(b);
        out
    }

    /// `h` elements `(B, P0^{-1} B P0)` first, then `p` elements `(B, -P0^{-1} B P0)`.
    pub fn algebra_basis(&self) -> Vec<DMatrix<f64>> {
        let (pi, p0) = (self.p0_inv(), &self.p0);
        let skew = self.skew_basis();
        let h = skew.iter().map(|b| self.blockdiag(b, &(&pi * b * p0)));
        let p = skew.iter().map(|b| self.blockdiag(b, &(-(&pi * b * p0))));
        h.chain(p).collect()
    }

    /// Signs of the trace form on column-major `vec(gl(n))`.
    pub fn ambient_signs(&self) -> Vec<f64> {
        let s = self.signs();
        let n = self.n();
        (0..n * n).map(|k| s[k % n] * s[k / n]).collect()
    }

    pub fn description(&self, name: &str) -> ModelDescription {
        let m = self.skew_basis().len();
        let signs = self.signs();
        ModelDescription {
            name: name.into(),
            j_signs: signs.clone(),
            group_signs: Some(signs.iter().chain(&signs).copied().collect()),
            basis: self.algebra_basis().iter().map(matrix_to_rows).collect(),
            h_indices: (0..m).collect(),
            p_indices: (m..2 * m).collect(),
            base_point: BasePoint::from_matrix(&self.p0),
            embedding: "builtin:pseudo_orth".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PseudoOrthGeometry {
    params: PseudoOrthParams,
    signs: Vec<f64>,
}

impl PseudoOrthGeometry {
    pub(crate) fn new(params: PseudoOrthParams) -> Self {
        let signs = params.signs();
        Self { params, signs }
    }

    fn blocks(&self, q: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.params.n();
        (q.view((0, 0), (n, n)).into_owned(), q.view((n, n), (n, n)).into_owned())
    }

    fn point(&self, m: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.params.n();
        unvec_cm(m, n, n)
    }
}

impl Geometry for PseudoOrthGeometry {
    fn id(&self) -> &'static str {
        "pseudo_orth"
    }

    fn chart_dim(&self) -> usize {
        self.params.n().pow(2)
    }

    fn ambient_form(&self) -> SignatureForm {
        SignatureForm::new(self.params.ambient_signs()).expect("valid signs")
    }

    fn group_form(&self) -> SignatureForm {
        SignatureForm::new(self.signs.iter().chain(&self.signs).copied().collect()).expect("valid signs")
    }

    fn action(&self, q: &DMatrix<f64>, m: &DVector<f64>) -> Result<DVector<f64>> {
        let (q1, q2) = self.blocks(q);
        let inv = q2.try_inverse().ok_or(Error::Singular("Q2"))?;
        Ok(vec_cm(&(q1 * self.point(m)? * inv)))
    }

    fn action_jacobian(&self, q: &DMatrix<f64>, _m: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (q1, q2) = self.blocks(q);
        let inv = q2.try_inverse().ok_or(Error::Singular("Q2"))?;
        Ok(kron(&inv.transpose(), &q1))
    }

    fn infinitesimal_action(&self, x: &DMatrix<f64>, m: &DVector<f64>) -> Result<DVector<f64>> {
        let (x1, x2) = self.blocks(x);
        let p = self.point(m)?;
        Ok(vec_cm(&(x1 * &p - p * x2)))
    }

    fn metric(&self, _m: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&DVector::from_vec(self.params.ambient_signs())))
    }

    fn embed(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.chart_dim(), m.len())?;
        Ok(m.clone())
    }

    fn embed_jacobian(&self, _m: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.chart_dim(), self.chart_dim()))
    }

    fn chart_point(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.embed(x)
    }

    fn representation(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let (q1, q2) = self.blocks(q);
        let inv = q2.clone().try_inverse().unwrap_or_else(|| j_transpose(&self.signs, &q2));
        kron(&inv.transpose(), &q1)
    }

    fn algebra_representation(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let (x1, x2) = self.blocks(x);
        let id = DMatrix::identity(self.params.n(), self.params.n());
        kron(&id, &x1) - kron(&x2.transpose(), &id)
    }

    fn tangent_frame(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = self.point(x)?;
        let cols: Vec<DVector<f64>> = self.params.skew_basis().iter().map(|b| vec_cm(&(b * &p))).collect();
        Ok(DMatrix::from_columns(&cols))
    }

    fn normal_frame(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = self.point(x)?;
        let cols: Vec<DVector<f64>> = self.params.symmetric_basis().iter().map(|c| vec_cm(&(c * &p))).collect();
        Ok(DMatrix::from_columns(&cols))
    }

    fn closed_form_normal(&self) -> bool {
        true
    }
}

/// Output of [`roll_pseudo_orthogonal`]: the factor paths and the induced
/// rolling map on `V`.
#[derive(Debug, Clone)]
pub struct PseudoOrthRolling {
    pub r1: Vec<DMatrix<f64>>,
    pub r2: Vec<DMatrix<f64>>,
    /// Translation part as `n x n` matrices.
    pub s: Vec<DMatrix<f64>>,
    pub rolling: FramedRolling,
}

/// Rolling of `SO+(p,q)` on its affine tangent space at `P0`, driven by a
/// `J`-skew `U(t)` given as column-major `vec(U)` samples:
/// `R1' = -U R1`, `R2' = P0^{-1} U P0 R2`, `s' = 2 U P0`.
pub fn roll_pseudo_orthogonal(params: &PseudoOrthParams, u: &ControlCurve) -> Result<PseudoOrthRolling> {
    let n = params.n();
    check_dim(n * n, u.dim())?;
    let u_at = |t: f64| unvec_cm(&u.at(t), n, n).expect("checked length");
    for (k, v) in u.coords.iter().enumerate() {
        let m = unvec_cm(v, n, n)?;
        let defect = (params.j_adjoint(&m) + &m).amax();
        if defect > SKEW_TOL * (1.0 + m.amax()) {
            return Err(Error::InvalidInput(format!("U is not J-skew at node {k} (defect {defect:.3e})")));
        }
    }
    let grid = u.grid;
    let form = SignatureForm::new(params.signs())?;
    let p0i = params.p0_inv();
    let id = DMatrix::identity(n, n);
    let r1 = flow_matrix_ode(|t| -u_at(t), &id, &grid, Side::Left, Some(&form))?;
    let r2 = flow_matrix_ode(|t| &p0i * u_at(t) * &params.p0, &id, &grid, Side::Left, Some(&form))?;
    let s = integrate_vector(|t| vec_cm(&(u_at(t) * &params.p0 * 2.0)), &DVector::zeros(n * n), &grid)?;
    let geometry = PseudoOrthGeometry::new(params.clone());
    let signs = params.signs();
    let base = vec_cm(&params.p0);
    let mut motions = Vec::with_capacity(grid.len());
    let mut alpha = Vec::with_capacity(grid.len());
    let mut alpha_hat = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (a1, a2) = (&r1.samples[k], &r2.samples[k]);
        let r2_inv_t = j_transpose(&signs, a2).transpose();
        let rot = kron(&r2_inv_t, a1);
        let a = vec_cm(&(j_transpose(&signs, a1) * &params.p0 * a2));
        let ah = &base + &s[k];
        motions.push(RigidMotion::from_parts(rot.clone(), &ah - &rot * &a)?);
        alpha.push(a);
        alpha_hat.push(ah);
    }
    let tangent_m = TangentFramePath::new(grid, alpha.iter().map(|x| geometry.tangent_frame(x)).collect::<Result<_>>()?)?;
    let tangent_mhat = TangentFramePath::new(grid, vec![geometry.tangent_frame(&base)?; grid.len()])?;
    let normal_mhat = TangentFramePath::new(grid, vec![geometry.normal_frame(&base)?; grid.len()])?;
    let path = RollingMapPath::new(grid, geometry.ambient_form(), motions, alpha, alpha_hat)?;
    let s_mats = s.iter().map(|v| unvec_cm(v, n, n)).collect::<Result<_>>()?;
    Ok(PseudoOrthRolling {
        r1: r1.samples,
        r2: r2.samples,
        s: s_mats,
        rolling: FramedRolling { path, tangent_m, tangent_mhat, normal_mhat },
    })
}
