//! Stiefel manifolds `St_{n,k} = SO(n)/SO(n-k)` of orthonormal `k`-frames,
//! embedded in `V = R^{n x k}` with the trace inner product.
//!
//! Operators on `V` are `(nk) x (nk)` matrices acting on column-major
//! flattenings.

use nalgebra::{DMatrix, DVector};

use super::elementary;
use crate::error::{check_dim, Error, Result};
use crate::homogeneous::{horizontal_lift, matrix_to_rows, BasePoint, CartanModel, CurveInput, Geometry, Lift, ModelDescription};
use crate::integrate::{flow_matrix_ode, integrate_vector, OperatorPath, Side};
use crate::linalg_semi::{RigidMotion, SignatureForm};
use crate::rolling::{FramedRolling, RollingMapPath, TangentFramePath};
use crate::util::{kron, nullspace, unvec_cm, vec_cm};

/// `n`, `k` and the base frame `E` (`E^T E = I_k`).
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelShape {
    pub n: usize,
    pub k: usize,
    pub e: DMatrix<f64>,
}

impl StiefelShape {
    /// Base frame `E` = first `k` columns of `I_n`.
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(Error::InvalidInput(format!("Stiefel shape needs 1 <= k < n, got n={n}, k={k}")));
        }
        Ok(Self { n, k, e: DMatrix::identity(n, k) })
    }

    pub fn with_base(e: DMatrix<f64>) -> Result<Self> {
        let (n, k) = e.shape();
        let mut shape = Self::new(n, k)?;
        let defect = (e.transpose() * &e - DMatrix::identity(k, k)).amax();
        if defect > 1e-10 {
            return Err(Error::Constraint(format!("E^T E != I (defect {defect:.3e})")));
        }
        shape.e = e;
        Ok(shape)
    }

    pub fn dim_v(&self) -> usize {
        self.n * self.k
    }

    pub fn manifold_dim(&self) -> usize {
        self.k * (self.k - 1) / 2 + (self.n - self.k) * self.k
    }

    /// `so(n)` basis `E_ij - E_ji` (`i < j`), with the indices of `h`
    /// (both `i, j >= k`) and of `p`.
    pub fn algebra_basis(&self) -> (Vec<DMatrix<f64>>, Vec<usize>, Vec<usize>) {
        let n = self.n;
        let mut basis = Vec::new();
        let (mut h, mut p) = (Vec::new(), Vec::new());
        for i in 0..n {
            for j in i + 1..n {
                if i >= self.k {
                    h.push(basis.len());
                } else {
                    p.push(basis.len());
                }
                basis.push(elementary(n, n, i, j) - elementary(n, n, j, i));
            }
        }
        (basis, h, p)
    }

    pub fn description(&self, name: &str) -> ModelDescription {
        let (basis, h, p) = self.algebra_basis();
        ModelDescription {
            name: name.into(),
            j_signs: vec![1.0; self.n],
            group_signs: Some(vec![1.0; self.n]),
            basis: basis.iter().map(matrix_to_rows).collect(),
            h_indices: h,
            p_indices: p,
            base_point: BasePoint::from_matrix(&self.e),
            embedding: "builtin:stiefel".into(),
        }
    }

    fn check_point(&self, m: &DVector<f64>) -> Result<DMatrix<f64>> {
        unvec_cm(m, self.n, self.k)
    }
}

fn skew_unit(k: usize, i: usize, j: usize) -> DMatrix<f64> {
    (elementary(k, k, i, j) - elementary(k, k, j, i)) / 2f64.sqrt()
}

fn sym_offdiag(k: usize, i: usize, j: usize) -> DMatrix<f64> {
    (elementary(k, k, i, j) + elementary(k, k, j, i)) / 2f64.sqrt()
}

/// Trace-orthonormal tangent frame at `m`: `m A_ij` and `m_perp E_ab`.
fn tangent_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.ncols();
    let perp = nullspace(&m.transpose());
    let mut cols = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            cols.push(vec_cm(&(m * skew_unit(k, i, j))));
        }
    }
    for b in 0..k {
        for a in 0..perp.ncols() {
            cols.push(vec_cm(&(&perp * elementary(perp.ncols(), k, a, b))));
        }
    }
    DMatrix::from_columns(&cols)
}

/// Trace-orthonormal normal frame at `m`: `m S` for symmetric `S`.
fn normal_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.ncols();
    let mut cols = Vec::new();
    for i in 0..k {
        cols.push(vec_cm(&(m * elementary(k, k, i, i))));
        for j in i + 1..k {
            cols.push(vec_cm(&(m * sym_offdiag(k, i, j))));
        }
    }
    DMatrix::from_columns(&cols)
}

#[derive(Debug, Clone)]
pub(crate) struct StiefelGeometry {
    shape: StiefelShape,
}

impl StiefelGeometry {
    pub(crate) fn new(shape: StiefelShape) -> Self {
        Self { shape }
    }
}

impl Geometry for StiefelGeometry {
    fn id(&self) -> &'static str {
        "stiefel"
    }

    fn chart_dim(&self) -> usize {
        self.shape.dim_v()
    }

    fn ambient_form(&self) -> SignatureForm {
        SignatureForm::euclidean(self.shape.dim_v())
    }

    fn group_form(&self) -> SignatureForm {
        SignatureForm::euclidean(self.shape.n)
    }

    fn action(&self, q: &DMatrix<f64>, m: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(vec_cm(&(q * self.shape.check_point(m)?)))
    }

    fn action_jacobian(&self, q: &DMatrix<f64>, _m: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.representation(q))
    }

    fn infinitesimal_action(&self, x: &DMatrix<f64>, m: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(vec_cm(&(x * self.shape.check_point(m)?)))
    }

    fn metric(&self, _m: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(self.chart_dim(), self.chart_dim()))
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
        kron(&DMatrix::identity(self.shape.k, self.shape.k), q)
    }

    fn algebra_representation(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.representation(x)
    }

    fn tangent_frame(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(tangent_basis(&self.shape.check_point(x)?))
    }

    fn normal_frame(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(normal_basis(&self.shape.check_point(x)?))
    }

    fn closed_form_normal(&self) -> bool {
        self.shape.k == 1
    }
}

/// Orthonormal bases (columns in `V`) of the subspaces at `E`, and the
/// projectors onto the tangent and normal spaces.
#[derive(Debug, Clone)]
pub struct StiefelSubspaces {
    pub tangent: DMatrix<f64>,
    pub normal: DMatrix<f64>,
    /// `E / sqrt(k)`.
    pub v_e: DMatrix<f64>,
    /// `E S` for traceless symmetric `S`; zero columns when `k = 1`.
    pub sl_kk: DMatrix<f64>,
    pub pi: DMatrix<f64>,
    pub pi_perp: DMatrix<f64>,
}

pub fn stiefel_subspaces(shape: &StiefelShape) -> Result<StiefelSubspaces> {
    let (e, k) = (&shape.e, shape.k);
    let tangent = tangent_basis(e);
    let normal = normal_basis(e);
    let v_e = DMatrix::from_column_slice(shape.dim_v(), 1, vec_cm(e).as_slice()) / (k as f64).sqrt();
    let mut sl = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            sl.push(vec_cm(&(e * sym_offdiag(k, i, j))));
        }
    }
    for m in 1..k {
        let mut d = DMatrix::zeros(k, k);
        for i in 0..m {
            d[(i, i)] = 1.0;
        }
        d[(m, m)] = -(m as f64);
        sl.push(vec_cm(&(e * d / ((m * (m + 1)) as f64).sqrt())));
    }
    let sl_kk = if sl.is_empty() { DMatrix::zeros(shape.dim_v(), 0) } else { DMatrix::from_columns(&sl) };
    let pi = &tangent * tangent.transpose();
    let pi_perp = &normal * normal.transpose();
    Ok(StiefelSubspaces { tangent, normal, v_e, sl_kk, pi, pi_perp })
}

/// A linear operator on `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelOperator {
    pub matrix: DMatrix<f64>,
}

impl StiefelOperator {
    pub fn apply(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let out = &self.matrix * vec_cm(m);
        unvec_cm(&out, m.nrows(), m.ncols())
    }

    /// `|Omega + Omega^T|`.
    pub fn skewness(&self) -> f64 {
        (&self.matrix + self.matrix.transpose()).amax()
    }
}

fn p_defect(shape: &StiefelShape, qdot: &DMatrix<f64>) -> f64 {
    let skew = (qdot + qdot.transpose()).amax();
    let corner = qdot.view((shape.k, shape.k), (shape.n - shape.k, shape.n - shape.k)).amax();
    skew.max(corner)
}

/// `Omega = -Pi (I (x) U) Pi - Pi_perp (I (x) U) Pi_perp` for `U = Q^{-1} Q'`.
pub fn stiefel_omega(shape: &StiefelShape, qdot: &DMatrix<f64>) -> Result<StiefelOperator> {
    if qdot.shape() != (shape.n, shape.n) {
        return Err(Error::DimensionMismatch { expected: shape.n, found: qdot.nrows() });
    }
    if shape.e != DMatrix::identity(shape.n, shape.k) {
        return Err(Error::InvalidInput("stiefel_omega uses the block structure of the standard base frame".into()));
    }
    let defect = p_defect(shape, qdot);
    if defect > 1e-10 * (1.0 + qdot.amax()) {
        return Err(Error::InvalidInput(format!("Q^-1 Q' is not in p (defect {defect:.3e})")));
    }
    let sub = stiefel_subspaces(shape)?;
    Ok(omega_from(&sub, shape, qdot))
}

fn omega_from(sub: &StiefelSubspaces, shape: &StiefelShape, u: &DMatrix<f64>) -> StiefelOperator {
    let lifted = kron(&DMatrix::identity(shape.k, shape.k), u);
    StiefelOperator { matrix: -(&sub.pi * &lifted * &sub.pi) - &sub.pi_perp * &lifted * &sub.pi_perp }
}

/// Output of [`roll_stiefel`].
#[derive(Debug, Clone)]
pub struct StiefelRolling {
    pub rolling: FramedRolling,
    pub lift: Lift,
    /// `S(t)` with `S' = Omega S`, `S(0) = Id_V`.
    pub s_operator: OperatorPath,
}

/// Extrinsic rolling of `St_{n,k}` on its affine tangent space at `E`:
/// horizontal lift `Q`, `S' = Omega S`, `R = S^{-1} rho(Q^{-1})`,
/// `s' = S^{-1} vec(U E)`.
pub fn roll_stiefel(shape: &StiefelShape, input: &CurveInput) -> Result<StiefelRolling> {
    let model = CartanModel::from_description(shape.description("stiefel"))?;
    if shape.e != DMatrix::identity(shape.n, shape.k) {
        return Err(Error::InvalidInput("roll_stiefel uses the standard base frame".into()));
    }
    let lift = horizontal_lift(&model, input, &DMatrix::identity(shape.n, shape.n))?;
    let grid = lift.group.grid;
    let sub = stiefel_subspaces(shape)?;
    let u_at = |t: f64| model.p_element(&lift.control.at(t));
    let dim = shape.dim_v();
    let form = SignatureForm::euclidean(dim);
    let s_op = flow_matrix_ode(|t| omega_from(&sub, shape, &u_at(t)).matrix, &DMatrix::identity(dim, dim), &grid, Side::Left, Some(&form))?;
    let e = &shape.e;
    let s = integrate_vector(|t| s_op.at(t).transpose() * vec_cm(&(u_at(t) * e)), &DVector::zeros(dim), &grid)?;
    let geometry = StiefelGeometry::new(shape.clone());
    let base = vec_cm(e);
    let mut motions = Vec::with_capacity(grid.len());
    let mut alpha = Vec::with_capacity(grid.len());
    let mut alpha_hat = Vec::with_capacity(grid.len());
    for (k, q) in lift.group.samples.iter().enumerate() {
        let rot = s_op.samples[k].transpose() * geometry.representation(&q.transpose());
        let a = vec_cm(&(q * e));
        let ah = &base + &s[k];
        motions.push(RigidMotion::from_parts(rot.clone(), &ah - &rot * &a)?);
        alpha.push(a);
        alpha_hat.push(ah);
    }
    let tangent_m = TangentFramePath::new(grid, alpha.iter().map(|x| geometry.tangent_frame(x)).collect::<Result<_>>()?)?;
    let tangent_mhat = TangentFramePath::new(grid, vec![sub.tangent.clone(); grid.len()])?;
    let normal_mhat = TangentFramePath::new(grid, vec![sub.normal.clone(); grid.len()])?;
    let path = RollingMapPath::new(grid, form, motions, alpha, alpha_hat)?;
    Ok(StiefelRolling { rolling: FramedRolling { path, tangent_m, tangent_mhat, normal_mhat }, lift, s_operator: s_op })
}
