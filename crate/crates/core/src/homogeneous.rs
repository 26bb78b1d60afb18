//! Rolling of homogeneous spaces `M = G/H` driven by horizontal lifts.
//!
//! A [`CartanModel`] couples a matrix realization of the Lie algebra, split
//! into isotropy part `h` and complement `p`, with a [`Geometry`] that knows
//! the action on chart coordinates, the representation on the ambient space
//! `V` and the equivariant embedding `M -> V`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::integrate::{
    differentiate, flow_matrix_ode, integrate_matrix_ode, integrate_vector, interpolate, reproject, Side, TimeGrid,
};
use crate::linalg_semi::{RigidMotion, SignatureForm};
use crate::rolling::{
    parallel_transport_embedded, FramedRolling, ResidualReport, RollingMapPath, RollingTriple, Subspace,
    TangentFramePath,
};
use crate::util::{commutator, j_transpose, lstsq_vec, pinv_full_rank};

/// Concrete pieces of a homogeneous space that the generic engine needs.
///
/// Group elements are square matrices in the realization used by the model's
/// basis. Points of `M` are chart coordinate vectors, points of `V` ambient
/// vectors.
pub trait Geometry: Send + Sync + fmt::Debug {
    fn id(&self) -> &'static str;
    fn chart_dim(&self) -> usize;
    fn ambient_form(&self) -> SignatureForm;
    fn group_form(&self) -> SignatureForm;
    /// `tau_q(m)`.
    fn action(&self, q: &DMatrix<f64>, m: &DVector<f64>) -> Result<DVector<f64>>;
    /// Derivative of `m -> tau_q(m)` in chart coordinates.
    fn action_jacobian(&self, q: &DMatrix<f64>, m: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// `d/dt tau_{exp(tX)}(m)` at `t = 0`.
    fn infinitesimal_action(&self, x: &DMatrix<f64>, m: &DVector<f64>) -> Result<DVector<f64>>;
    /// Coordinate metric at `m`.
    fn metric(&self, m: &DVector<f64>) -> Result<DMatrix<f64>>;
    fn embed(&self, m: &DVector<f64>) -> Result<DVector<f64>>;
    fn embed_jacobian(&self, m: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// Inverse of [`Geometry::embed`] on its image.
    fn chart_point(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    /// `rho(q)` acting on `V`.
    fn representation(&self, q: &DMatrix<f64>) -> DMatrix<f64>;
    /// `d rho(X)`.
    fn algebra_representation(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    /// Basis of the tangent space of the embedded manifold at `x`.
    fn tangent_frame(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// Basis of the normal space of the embedded manifold at `x`.
    fn normal_frame(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// Whether `R = rho(q)^{-1}` already satisfies the normal no-twist
    /// condition, so no frame matching is needed.
    fn closed_form_normal(&self) -> bool;
}

/// Base point as stored in model files: a coordinate vector or a matrix
/// (rows), flattened column-major into chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasePoint {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl BasePoint {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        BasePoint::Matrix(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        match self {
            BasePoint::Vector(v) => Ok(DMatrix::from_column_slice(v.len(), 1, v)),
            BasePoint::Matrix(rows) => rows_to_matrix(rows),
        }
    }

    pub fn to_chart(&self) -> Result<DVector<f64>> {
        let m = self.to_matrix()?;
        Ok(DVector::from_column_slice(m.as_slice()))
    }
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput("matrix rows must be non-empty and of equal length".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Declarative model description, the on-disk JSON format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescription {
    pub name: String,
    #[serde(rename = "J_signs")]
    pub j_signs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_signs: Option<Vec<f64>>,
    /// Basis matrices of the Lie algebra, each given as rows.
    pub basis: Vec<Vec<Vec<f64>>>,
    pub h_indices: Vec<usize>,
    pub p_indices: Vec<usize>,
    pub base_point: BasePoint,
    /// `builtin:<id>`
    pub embedding: String,
}

impl ModelDescription {
    pub fn builtin_id(&self) -> Result<&str> {
        self.embedding
            .strip_prefix("builtin:")
            .ok_or_else(|| Error::InvalidInput(format!("embedding must be builtin:<id>, got {}", self.embedding)))
    }

    pub fn basis_matrices(&self) -> Result<Vec<DMatrix<f64>>> {
        self.basis.iter().map(|b| rows_to_matrix(b)).collect()
    }
}

const BRACKET_TOL: f64 = 1e-10;
const EQUIVARIANCE_TOL: f64 = 1e-9;

/// Cartan data plus geometry for a homogeneous space.
#[derive(Clone)]
pub struct CartanModel {
    pub name: String,
    pub basis: Vec<DMatrix<f64>>,
    pub h_indices: Vec<usize>,
    pub p_indices: Vec<usize>,
    pub group_form: SignatureForm,
    pub ambient_form: SignatureForm,
    /// `o` in chart coordinates.
    pub base_point: DVector<f64>,
    /// `iota(o)`.
    pub embedded_base: DVector<f64>,
    /// Matrix of `d_e pi` restricted to `p`, chart coordinates by `p` coordinates.
    pub d_e_pi: DMatrix<f64>,
    /// Scalar product on `p` pulled back from the metric at `o`.
    pub ip_p: DMatrix<f64>,
    /// `[p, p]` lies in `h`.
    pub is_symmetric: bool,
    pub description: ModelDescription,
    geometry: Arc<dyn Geometry>,
    basis_pinv: DMatrix<f64>,
}

impl fmt::Debug for CartanModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CartanModel")
            .field("name", &self.name)
            .field("geometry", &self.geometry.id())
            .field("algebra_dim", &self.basis.len())
            .field("h_indices", &self.h_indices)
            .field("p_indices", &self.p_indices)
            .field("is_symmetric", &self.is_symmetric)
            .finish()
    }
}

/// Bracket and orthogonality diagnostics from model validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartanCheck {
    /// Largest component of `[h,h]` or `[h,p]` outside its required part,
    /// including failure of the brackets to close in the algebra.
    pub reductive_defect: f64,
    /// Largest `h`-exterior component of `[p,p]`.
    pub symmetric_defect: f64,
    /// Largest `|<h_i, p_j>|`.
    pub orthogonality_defect: f64,
    /// Largest `|iota(tau_q(m)) - rho(q) iota(m)|` over the sample pairs.
    pub equivariance_defect: f64,
}

impl CartanModel {
    /// Builds and validates a model from its description.
    pub fn from_description(description: ModelDescription) -> Result<Self> {
        let geometry = crate::models::geometry_for(&description)?;
        Self::with_geometry(description, geometry)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_description(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// A bundled model by name, or else a model file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if let Some(desc) = crate::models::bundled_description(name_or_path) {
            return Self::from_description(desc?);
        }
        let path = Path::new(name_or_path);
        if path.is_file() {
            return Self::load(path);
        }
        Err(Error::UnknownModel(name_or_path.to_string()))
    }

    pub fn with_geometry(description: ModelDescription, geometry: Arc<dyn Geometry>) -> Result<Self> {
        let basis = description.basis_matrices()?;
        let group_form = geometry.group_form();
        let n = group_form.dim();
        if basis.is_empty() {
            return Err(Error::InvalidInput("empty Lie algebra basis".into()));
        }
        for b in &basis {
            if b.shape() != (n, n) {
                return Err(Error::DimensionMismatch { expected: n, found: b.nrows() });
            }
        }
        let mut seen = vec![0u8; basis.len()];
        for &i in description.h_indices.iter().chain(&description.p_indices) {
            if i >= basis.len() {
                return Err(Error::InvalidInput(format!("basis index {i} out of range")));
            }
            seen[i] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(Error::InvalidInput("h_indices and p_indices must partition the basis".into()));
        }
        let stacked = DMatrix::from_fn(n * n, basis.len(), |r, c| basis[c].as_slice()[r]);
        let basis_pinv = pinv_full_rank(&stacked, 1e-12, "Lie algebra basis")?;
        let base_point = description.base_point.to_chart()?;
        check_dim(geometry.chart_dim(), base_point.len())?;
        let embedded_base = geometry.embed(&base_point)?;
        let mut d_e_pi = DMatrix::zeros(geometry.chart_dim(), description.p_indices.len());
        for (c, &i) in description.p_indices.iter().enumerate() {
            d_e_pi.set_column(c, &geometry.infinitesimal_action(&basis[i], &base_point)?);
        }
        pinv_full_rank(&d_e_pi, 1e-10, "d_e pi on p")?;
        let ip_p = d_e_pi.transpose() * geometry.metric(&base_point)? * &d_e_pi;
        let ambient_form = geometry.ambient_form();
        let mut model = Self {
            name: description.name.clone(),
            basis,
            h_indices: description.h_indices.clone(),
            p_indices: description.p_indices.clone(),
            group_form,
            ambient_form,
            base_point,
            embedded_base,
            d_e_pi,
            ip_p,
            is_symmetric: false,
            description,
            geometry,
            basis_pinv,
        };
        let check = model.check()?;
        if check.reductive_defect > BRACKET_TOL {
            return Err(Error::Constraint(format!(
                "model {}: [h,h] in h and [h,p] in p fail (defect {:.3e})",
                model.name, check.reductive_defect
            )));
        }
        if check.orthogonality_defect > BRACKET_TOL {
            return Err(Error::Constraint(format!(
                "model {}: h and p are not orthogonal (defect {:.3e})",
                model.name, check.orthogonality_defect
            )));
        }
        if check.equivariance_defect > EQUIVARIANCE_TOL {
            return Err(Error::Constraint(format!(
                "model {}: embedding is not equivariant (defect {:.3e})",
                model.name, check.equivariance_defect
            )));
        }
        model.is_symmetric = check.symmetric_defect <= BRACKET_TOL;
        if !model.is_symmetric {
            log::info!("model {} is not symmetric: [p,p] leaves h by {:.3e}", model.name, check.symmetric_defect);
        }
        Ok(model)
    }

    pub fn geometry(&self) -> &dyn Geometry {
        self.geometry.as_ref()
    }

    pub fn algebra_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn manifold_dim(&self) -> usize {
        self.p_indices.len()
    }

    pub fn chart_dim(&self) -> usize {
        self.geometry.chart_dim()
    }

    pub fn group_dim(&self) -> usize {
        self.group_form.dim()
    }

    /// `sum_j c_j P_j` over the `p` basis.
    pub fn p_element(&self, coords: &DVector<f64>) -> DMatrix<f64> {
        let n = self.group_dim();
        self.p_indices.iter().zip(coords.iter()).fold(DMatrix::zeros(n, n), |acc, (&i, c)| acc + &self.basis[i] * *c)
    }

    /// Coordinates of `x` in the full basis, and the norm of the part of `x`
    /// outside the algebra.
    pub fn algebra_coords(&self, x: &DMatrix<f64>) -> (DVector<f64>, f64) {
        let flat = DVector::from_column_slice(x.as_slice());
        let coords = &self.basis_pinv * &flat;
        let n = self.group_dim();
        let back = (0..self.basis.len()).fold(DMatrix::zeros(n, n), |acc, i| acc + &self.basis[i] * coords[i]);
        (coords, (back - x).amax())
    }

    /// Scalar product `tr(J^ X^T J^ Y)` on the matrix realization.
    pub fn algebra_ip(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        let s = self.group_form.signs();
        (j_transpose(s, x) * y).trace()
    }

    /// Group inverse using the group form.
    pub fn group_inverse(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        j_transpose(self.group_form.signs(), q)
    }

    pub fn check(&self) -> Result<CartanCheck> {
        let in_h = |i: usize| self.h_indices.contains(&i);
        let mut reductive: f64 = 0.0;
        let mut symmetric: f64 = 0.0;
        let mut orth: f64 = 0.0;
        for i in 0..self.basis.len() {
            for j in 0..self.basis.len() {
                let (coords, outside) = self.algebra_coords(&commutator(&self.basis[i], &self.basis[j]));
                reductive = reductive.max(outside);
                let off_h = self.p_indices.iter().map(|&k| coords[k].abs()).fold(0.0, f64::max);
                let off_p = self.h_indices.iter().map(|&k| coords[k].abs()).fold(0.0, f64::max);
                match (in_h(i), in_h(j)) {
                    (true, true) => reductive = reductive.max(off_h),
                    (true, false) | (false, true) => reductive = reductive.max(off_p),
                    (false, false) => symmetric = symmetric.max(off_h),
                }
                if in_h(i) && !in_h(j) {
                    orth = orth.max(self.algebra_ip(&self.basis[i], &self.basis[j]).abs());
                }
            }
        }
        Ok(CartanCheck {
            reductive_defect: reductive,
            symmetric_defect: symmetric,
            orthogonality_defect: orth,
            equivariance_defect: self.equivariance_defect(5)?,
        })
    }

    /// Deterministic group elements `exp(X)` for fixed algebra elements `X`
    /// of moderate size, obtained by integrating the flow.
    pub fn sample_group_elements(&self, count: usize) -> Result<Vec<DMatrix<f64>>> {
        let grid = TimeGrid::new(0.0, 1.0, 64)?;
        let n = self.group_dim();
        (0..count)
            .map(|s| {
                let x = (0..self.basis.len()).fold(DMatrix::zeros(n, n), |acc, i| {
                    let c = 0.6 * ((1.7 * i as f64 + 2.3 * s as f64 + 0.4).sin());
                    acc + &self.basis[i] * c
                });
                let path = flow_matrix_ode(|_| x.clone(), &DMatrix::identity(n, n), &grid, Side::Right, Some(&self.group_form))?;
                Ok(path.last().clone())
            })
            .collect()
    }

    /// Largest `|iota(tau_q(m)) - rho(q) iota(m)|` over sampled pairs.
    pub fn equivariance_defect(&self, count: usize) -> Result<f64> {
        let qs = self.sample_group_elements(2 * count)?;
        let g = self.geometry();
        let mut worst: f64 = 0.0;
        for pair in qs.chunks(2) {
            let m = g.action(&pair[1], &self.base_point)?;
            let lhs = g.embed(&g.action(&pair[0], &m)?)?;
            let rhs = g.representation(&pair[0]) * g.embed(&m)?;
            worst = worst.max((lhs - &rhs).amax() / (1.0 + rhs.amax()));
        }
        Ok(worst)
    }

    /// `rho(q)^{-1}` via the ambient form.
    pub fn representation_inverse(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        j_transpose(self.ambient_form.signs(), &self.geometry.representation(q))
    }

    /// Push-forward `d_o tau_q (d_e pi)` of the `p` basis to `tau_q(o)`.
    pub fn moved_p_frame(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.geometry.action_jacobian(q, &self.base_point)? * &self.d_e_pi)
    }
}

/// Coefficients of `U(t)` in the `p` basis, sampled on a grid, with an
/// optional closed form for off-grid evaluation.
#[derive(Clone)]
pub struct ControlCurve {
    pub grid: TimeGrid,
    pub coords: Vec<DVector<f64>>,
    func: Option<Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>>,
}

impl fmt::Debug for ControlCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlCurve")
            .field("grid", &self.grid)
            .field("dim", &self.dim())
            .field("closed_form", &self.func.is_some())
            .finish()
    }
}

impl ControlCurve {
    pub fn from_samples(grid: TimeGrid, coords: Vec<DVector<f64>>) -> Result<Self> {
        grid.check_samples(coords.len())?;
        let dim = coords[0].len();
        for c in &coords {
            check_dim(dim, c.len())?;
        }
        Ok(Self { grid, coords, func: None })
    }

    pub fn from_fn<F>(grid: TimeGrid, f: F) -> Self
    where
        F: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    {
        let coords = grid.nodes().map(&f).collect();
        Self { grid, coords, func: Some(Arc::new(f)) }
    }

    pub fn constant(grid: TimeGrid, u: DVector<f64>) -> Self {
        Self::from_fn(grid, move |_| u.clone())
    }

    pub fn zero(grid: TimeGrid, dim: usize) -> Self {
        Self::constant(grid, DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.coords[0].len()
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        match &self.func {
            Some(f) => f(t),
            None => interpolate(&self.grid, &self.coords, t),
        }
    }
}

/// Sampled group curve `q(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPath {
    pub grid: TimeGrid,
    pub samples: Vec<DMatrix<f64>>,
}

/// A horizontal lift together with the control that drives it.
#[derive(Debug, Clone)]
pub struct Lift {
    pub group: GroupPath,
    pub control: ControlCurve,
}

/// Input curve: a control in `p` coordinates, or chart samples on a grid.
#[derive(Debug, Clone)]
pub enum CurveInput {
    Control(ControlCurve),
    Samples { grid: TimeGrid, points: Vec<DVector<f64>> },
}

impl CurveInput {
    pub fn grid(&self) -> TimeGrid {
        match self {
            CurveInput::Control(c) => c.grid,
            CurveInput::Samples { grid, .. } => *grid,
        }
    }
}

/// Least-squares threshold for recovering `U` from a sampled velocity.
pub const LIFT_RESIDUAL_TOL: f64 = 1e-8;

fn solve_control(model: &CartanModel, q: &DMatrix<f64>, velocity: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let frame = model.moved_p_frame(q)?;
    let u = lstsq_vec(&frame, velocity, 1e-12, "d tau_q d_e pi (curve left the chart)")?;
    let residual = (&frame * &u - velocity).norm();
    Ok((u, residual))
}

/// Horizontal lift `q' = q U(t)` from `q0`.
///
/// For sampled curves, `U` is recovered at every node and stage by solving
/// `d_o tau_q (d_e pi U) = alpha'` in the least-squares sense; nodes whose
/// residual exceeds `1e-8 max(1, |alpha'|)` reject the curve.
pub fn horizontal_lift(model: &CartanModel, input: &CurveInput, q0: &DMatrix<f64>) -> Result<Lift> {
    let n = model.group_dim();
    if q0.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, found: q0.nrows() });
    }
    match input {
        CurveInput::Control(control) => {
            check_dim(model.manifold_dim(), control.dim())?;
            let path = flow_matrix_ode(
                |t| model.p_element(&control.at(t)),
                q0,
                &control.grid,
                Side::Right,
                Some(&model.group_form),
            )?;
            Ok(Lift { group: GroupPath { grid: control.grid, samples: path.samples }, control: control.clone() })
        }
        CurveInput::Samples { grid, points } => {
            grid.check_samples(points.len())?;
            check_dim(model.chart_dim(), points[0].len())?;
            let start = model.geometry().action(q0, &model.base_point)?;
            let gap = (&start - &points[0]).amax();
            if gap > 1e-8 {
                return Err(Error::InvalidInput(format!("curve does not start at tau_q0(o) (gap {gap:.3e})")));
            }
            let velocity = differentiate(points, grid.h())?;
            let f = |t: f64, q: &DMatrix<f64>| -> DMatrix<f64> {
                let v = interpolate(grid, &velocity, t);
                match solve_control(model, q, &v) {
                    Ok((u, _)) => q * model.p_element(&u),
                    Err(_) => DMatrix::from_element(n, n, f64::NAN),
                }
            };
            let path = integrate_matrix_ode(f, q0, grid, Some(&model.group_form))?;
            let mut coords = Vec::with_capacity(grid.len());
            for (k, (q, v)) in path.samples.iter().zip(&velocity).enumerate() {
                let (u, residual) = solve_control(model, q, v)?;
                if residual > LIFT_RESIDUAL_TOL * v.norm().max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "sampled velocity is not tangent at node {k} (residual {residual:.3e})"
                    )));
                }
                coords.push(u);
            }
            let control = ControlCurve::from_samples(*grid, coords)?;
            Ok(Lift { group: GroupPath { grid: *grid, samples: path.samples }, control })
        }
    }
}

/// Largest `h` component of `q^{-1} q'` along the path (finite differences).
pub fn horizontality_residual(model: &CartanModel, group: &GroupPath) -> Result<f64> {
    let dq = differentiate(&group.samples, group.grid.h())?;
    let mut worst: f64 = 0.0;
    for (q, d) in group.samples.iter().zip(&dq) {
        let (coords, outside) = model.algebra_coords(&(model.group_inverse(q) * d));
        let h_part = model.h_indices.iter().map(|&i| coords[i].abs()).fold(0.0, f64::max);
        worst = worst.max(h_part).max(outside);
    }
    Ok(worst)
}

/// Development `alpha_hat(t) = int_0^t d_e pi U` in `T_o M` coordinates.
pub fn develop_intrinsic(model: &CartanModel, control: &ControlCurve) -> Result<Vec<DVector<f64>>> {
    check_dim(model.manifold_dim(), control.dim())?;
    integrate_vector(|t| &model.d_e_pi * control.at(t), &DVector::zeros(model.chart_dim()), &control.grid)
}

/// `A(t) = d_e pi (d_o tau_q d_e pi)^+`: from chart coordinates of
/// `T_{alpha(t)} M` to chart coordinates of `T_o M`.
pub fn isometry_chain_a(model: &CartanModel, lift: &GroupPath) -> Result<Vec<DMatrix<f64>>> {
    lift.samples
        .iter()
        .map(|q| {
            let moved = model.moved_p_frame(q)?;
            Ok(&model.d_e_pi * pinv_full_rank(&moved, 1e-12, "d_q pi on the horizontal space")?)
        })
        .collect()
}

/// Intrinsic rolling of `M` on `T_o M`.
#[derive(Debug, Clone)]
pub struct IntrinsicRolling {
    pub triple: RollingTriple,
    pub lift: Lift,
    /// `A(t)` in chart coordinates, see [`isometry_chain_a`].
    pub a_chart: Vec<DMatrix<f64>>,
}

fn chart_curve(model: &CartanModel, input: &CurveInput, lift: &Lift) -> Result<Vec<DVector<f64>>> {
    match input {
        CurveInput::Samples { points, .. } => Ok(points.clone()),
        CurveInput::Control(_) => {
            lift.group.samples.iter().map(|q| model.geometry().action(q, &model.base_point)).collect()
        }
    }
}

fn identity_q(model: &CartanModel) -> DMatrix<f64> {
    DMatrix::identity(model.group_dim(), model.group_dim())
}

/// Lift, develop and assemble `(alpha, alpha_hat, A)` starting at `o`.
pub fn intrinsic_roll(model: &CartanModel, input: &CurveInput) -> Result<IntrinsicRolling> {
    let lift = horizontal_lift(model, input, &identity_q(model))?;
    let alpha = chart_curve(model, input, &lift)?;
    let alpha_hat = develop_intrinsic(model, &lift.control)?;
    let a_chart = isometry_chain_a(model, &lift.group)?;
    let g = model.geometry();
    let square = model.chart_dim() == model.manifold_dim();
    let m = model.chart_dim();
    let metric_hat = g.metric(&model.base_point)?;
    let mut a = Vec::with_capacity(alpha.len());
    let mut frame = Vec::with_capacity(alpha.len());
    let mut metric = Vec::with_capacity(alpha.len());
    let d_pinv = pinv_full_rank(&model.d_e_pi, 1e-12, "d_e pi")?;
    for (k, q) in lift.group.samples.iter().enumerate() {
        metric.push(g.metric(&alpha[k])?);
        if square {
            a.push(a_chart[k].clone());
            frame.push(DMatrix::identity(m, m));
        } else {
            let f = model.moved_p_frame(q)?;
            a.push(&d_pinv * &a_chart[k] * &f);
            frame.push(f);
        }
    }
    let frame_hat = if square { DMatrix::identity(m, m) } else { model.d_e_pi.clone() };
    let n = alpha.len();
    let triple = RollingTriple::new(
        lift.group.grid,
        alpha,
        alpha_hat,
        a,
        frame,
        vec![frame_hat; n],
        metric,
        vec![metric_hat; n],
    )?;
    Ok(IntrinsicRolling { triple, lift, a_chart })
}

/// Field `rho(q) d rho(sum y_j P_j) o_bar` along the embedded curve: the
/// push-forward of a left-invariant horizontal field with constant
/// coefficients, which is parallel along the curve.
pub fn transport_homogeneous(model: &CartanModel, lift: &GroupPath, y0: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    check_dim(model.manifold_dim(), y0.len())?;
    let v0 = model.geometry().algebra_representation(&model.p_element(y0)) * &model.embedded_base;
    Ok(lift.samples.iter().map(|q| model.geometry().representation(q) * &v0).collect())
}

/// Extrinsic development `s_bar' = rho(q)^{-1} alpha_bar'`, `s_bar(0) = 0`.
pub fn extrinsic_develop(model: &CartanModel, lift: &GroupPath, emb_curve: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    lift.grid.check_samples(emb_curve.len())?;
    check_dim(model.ambient_form.dim(), emb_curve[0].len())?;
    let gap = (&emb_curve[0] - &model.embedded_base).amax();
    if gap > 1e-8 {
        return Err(Error::InvalidInput(format!("embedded curve does not start at iota(o) (gap {gap:.3e})")));
    }
    let velocity = differentiate(emb_curve, lift.grid.h())?;
    let rhs: Vec<DVector<f64>> =
        lift.samples.iter().zip(&velocity).map(|(q, v)| model.representation_inverse(q) * v).collect();
    let grid = lift.grid;
    integrate_vector(|t| interpolate(&grid, &rhs, t), &DVector::zeros(model.ambient_form.dim()), &grid)
}

/// How `R(t)` acts on normal vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalStrategy {
    /// `R = rho(q)^{-1}` on all of `V`.
    ClosedForm,
    /// Match normal-parallel frames along the curve and the development.
    FrameMatching,
}

/// An extrinsic rolling of `iota(M)` on its affine tangent space at `o_bar`,
/// with the frames needed by the residual suite.
#[derive(Debug, Clone)]
pub struct ExtrinsicRolling {
    pub rolling: FramedRolling,
    pub lift: Lift,
    /// Chart coordinates of `alpha`.
    pub alpha_chart: Vec<DVector<f64>>,
}

impl ExtrinsicRolling {
    pub fn path(&self) -> &RollingMapPath {
        &self.rolling.path
    }

    pub fn residuals(&self) -> Result<ResidualReport> {
        self.rolling.residuals()
    }
}

/// Extends tangential actions by sending one normal frame onto another:
/// `R = [L T | N_hat] [T | N]^{-1}`, then reprojected onto the group of `form`.
pub fn normal_extension_by_frames(
    form: &SignatureForm,
    tangential: &[DMatrix<f64>],
    tangent_frames: &TangentFramePath,
    normal_frames: &[DMatrix<f64>],
    normal_dev: &[DMatrix<f64>],
) -> Result<Vec<DMatrix<f64>>> {
    let grid = tangent_frames.grid;
    grid.check_samples(tangential.len())?;
    grid.check_samples(normal_frames.len())?;
    grid.check_samples(normal_dev.len())?;
    (0..grid.len())
        .map(|k| {
            let (t, nf, nd) = (&tangent_frames.frames[k], &normal_frames[k], &normal_dev[k]);
            let mismatch = (form.gram(nf) - form.gram(nd)).amax();
            if mismatch > 1e-6 * (1.0 + form.gram(nf).amax()) {
                return Err(Error::Constraint(format!("normal frames are not isometric at node {k} ({mismatch:.3e})")));
            }
            let src = concat_columns(t, nf);
            let dst = concat_columns(&(&tangential[k] * t), nd);
            check_dim(form.dim(), src.ncols())?;
            let inv = src.try_inverse().ok_or(Error::Singular("tangent and normal frames"))?;
            reproject(&(dst * inv), form)
        })
        .collect()
}

fn concat_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Assembles the extrinsic rolling map starting at `o`.
pub fn extrinsic_roll(model: &CartanModel, input: &CurveInput, strategy: NormalStrategy) -> Result<ExtrinsicRolling> {
    let g = model.geometry();
    if strategy == NormalStrategy::ClosedForm && !g.closed_form_normal() {
        return Err(Error::StrategyUnavailable {
            model: model.name.clone(),
            reason: "rho(q)^{-1} does not satisfy the normal no-twist condition here; use frame_matching".into(),
        });
    }
    let lift = horizontal_lift(model, input, &identity_q(model))?;
    let grid = lift.group.grid;
    let alpha_chart = chart_curve(model, input, &lift)?;
    let alpha_bar = alpha_chart.iter().map(|m| g.embed(m)).collect::<Result<Vec<_>>>()?;
    let s_bar = extrinsic_develop(model, &lift.group, &alpha_bar)?;
    let alpha_hat: Vec<DVector<f64>> = s_bar.iter().map(|s| &model.embedded_base + s).collect();
    let tangential: Vec<DMatrix<f64>> = lift.group.samples.iter().map(|q| model.representation_inverse(q)).collect();
    let tangent_m = TangentFramePath::new(grid, alpha_bar.iter().map(|x| g.tangent_frame(x)).collect::<Result<_>>()?)?;
    let t_hat = g.tangent_frame(&model.embedded_base)?;
    let n_hat = g.normal_frame(&model.embedded_base)?;
    let rotations = match strategy {
        NormalStrategy::ClosedForm => tangential,
        NormalStrategy::FrameMatching => {
            let columns = (0..n_hat.ncols())
                .map(|c| {
                    parallel_transport_embedded(&model.ambient_form, &tangent_m, &n_hat.column(c).into_owned(), Subspace::Normal)
                })
                .collect::<Result<Vec<_>>>()?;
            let normal_frames: Vec<DMatrix<f64>> = (0..grid.len())
                .map(|k| DMatrix::from_columns(&columns.iter().map(|col| col[k].clone()).collect::<Vec<_>>()))
                .collect();
            normal_extension_by_frames(&model.ambient_form, &tangential, &tangent_m, &normal_frames, &vec![n_hat.clone(); grid.len()])?
        }
    };
    let motions = rotations
        .into_iter()
        .zip(alpha_bar.iter().zip(&alpha_hat))
        .map(|(r, (a, ah))| {
            let s = ah - &r * a;
            RigidMotion::from_parts(r, s)
        })
        .collect::<Result<Vec<_>>>()?;
    let path = RollingMapPath::new(grid, model.ambient_form.clone(), motions, alpha_bar, alpha_hat)?;
    let rolling = FramedRolling {
        path,
        tangent_m,
        tangent_mhat: TangentFramePath::new(grid, vec![t_hat; grid.len()])?,
        normal_mhat: TangentFramePath::new(grid, vec![n_hat; grid.len()])?,
    };
    Ok(ExtrinsicRolling { rolling, lift, alpha_chart })
}

/// Per-node gap `|R(t) d iota F - d iota(o) A(t) F|` between the tangential
/// part of an extrinsic rolling and an intrinsic isometry chain, over a basis
/// `F` of `T_{alpha(t)} M` in chart coordinates.
pub fn tangent_restriction_gap(
    model: &CartanModel,
    extrinsic: &ExtrinsicRolling,
    a_chart: &[DMatrix<f64>],
) -> Result<Vec<f64>> {
    let g = model.geometry();
    let square = model.chart_dim() == model.manifold_dim();
    let jo = g.embed_jacobian(&model.base_point)?;
    (0..a_chart.len())
        .map(|k| {
            let m = &extrinsic.alpha_chart[k];
            let f = if square {
                DMatrix::identity(model.chart_dim(), model.chart_dim())
            } else {
                model.moved_p_frame(&extrinsic.lift.group.samples[k])?
            };
            let lhs = extrinsic.rolling.path.motions[k].r() * g.embed_jacobian(m)? * &f;
            let rhs = &jo * &a_chart[k] * &f;
            Ok((lhs - rhs).column_iter().map(|c| c.norm()).fold(0.0, f64::max))
        })
        .collect()
}
