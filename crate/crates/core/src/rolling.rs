//! Rolling maps of embedded manifolds and the residual checks for the
//! rolling, no-slip and no-twist conditions.
//!
//! All velocities are recovered by finite differences on the shared grid
//! (see [`differentiate`]), so every residual carries a discretization floor
//! that shrinks with the step size.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::integrate::{differentiate, integrate_matrix_ode, interpolate, TimeGrid};
use crate::linalg_semi::{se_compose, se_inverse, RigidMotion, SignatureForm};
use crate::util::{lstsq_vec, singular_values};

/// Frames with a Gram condition number above this are rejected.
pub const MAX_FRAME_CONDITION: f64 = 1e6;

/// A sampled curve `g(t) = (R(t), s(t))` together with the contact curves.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingMapPath {
    pub grid: TimeGrid,
    pub form: SignatureForm,
    pub motions: Vec<RigidMotion>,
    pub alpha: Vec<DVector<f64>>,
    pub alpha_hat: Vec<DVector<f64>>,
}

impl RollingMapPath {
    pub fn new(
        grid: TimeGrid,
        form: SignatureForm,
        motions: Vec<RigidMotion>,
        alpha: Vec<DVector<f64>>,
        alpha_hat: Vec<DVector<f64>>,
    ) -> Result<Self> {
        grid.check_samples(motions.len())?;
        grid.check_samples(alpha.len())?;
        grid.check_samples(alpha_hat.len())?;
        let n = form.dim();
        for g in &motions {
            check_dim(n, g.dim())?;
        }
        for v in alpha.iter().chain(&alpha_hat) {
            check_dim(n, v.len())?;
        }
        Ok(Self { grid, form, motions, alpha, alpha_hat })
    }

    /// Constant identity motion with `alpha_hat = alpha`.
    pub fn identity(grid: TimeGrid, form: SignatureForm, alpha: Vec<DVector<f64>>) -> Result<Self> {
        let n = form.dim();
        let motions = vec![RigidMotion::identity(n); alpha.len()];
        Self::new(grid, form, motions, alpha.clone(), alpha)
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn rotations(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.motions.iter().map(|g| g.r())
    }

    /// `R^{-1} = J R^T J` for a J-orthogonal `R`.
    fn rotation_inverse(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let jr = self.form.apply_rows(r);
        self.form.apply_rows(&jr.transpose())
    }

    /// Angular velocity `Omega = R' R^{-1}` at every node.
    ///
    /// The finite-difference estimate is replaced by its J-skew part
    /// `(Omega - J Omega^T J) / 2`, which is where the exact value lives.
    pub fn angular_velocity(&self) -> Result<Vec<DMatrix<f64>>> {
        let rs: Vec<DMatrix<f64>> = self.rotations().cloned().collect();
        let dr = differentiate(&rs, self.grid.h())?;
        Ok(dr
            .iter()
            .zip(&rs)
            .map(|(d, r)| {
                let om = d * self.rotation_inverse(r);
                let mirrored = self.form.apply_rows(&self.form.apply_rows(&om).transpose());
                (om - mirrored) * 0.5
            })
            .collect())
    }
}

/// Sampled curve `alpha`, development `alpha_hat` and tangent isometries `A`.
///
/// Points are given in coordinates. `frame[k]` and `frame_hat[k]` hold bases
/// (as columns) of the tangent spaces at `alpha[k]` and `alpha_hat[k]`,
/// `a[k]` is the matrix of `A(t_k)` in those bases, and `metric[k]`,
/// `metric_hat[k]` are the coordinate metrics at the two points.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingTriple {
    pub grid: TimeGrid,
    pub alpha: Vec<DVector<f64>>,
    pub alpha_hat: Vec<DVector<f64>>,
    pub a: Vec<DMatrix<f64>>,
    pub frame: Vec<DMatrix<f64>>,
    pub frame_hat: Vec<DMatrix<f64>>,
    pub metric: Vec<DMatrix<f64>>,
    pub metric_hat: Vec<DMatrix<f64>>,
}

/// Residuals of a [`RollingTriple`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleResiduals {
    /// max `|A alpha' - alpha_hat'|` in coordinates
    pub velocity: f64,
    /// max `|A^T G_hat A - G|` on the frames
    pub isometry: f64,
    /// Nodes where `det A <= 0`.
    pub orientation_failures: usize,
}

impl RollingTriple {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: TimeGrid,
        alpha: Vec<DVector<f64>>,
        alpha_hat: Vec<DVector<f64>>,
        a: Vec<DMatrix<f64>>,
        frame: Vec<DMatrix<f64>>,
        frame_hat: Vec<DMatrix<f64>>,
        metric: Vec<DMatrix<f64>>,
        metric_hat: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        for count in [alpha.len(), alpha_hat.len(), a.len(), frame.len(), frame_hat.len(), metric.len(), metric_hat.len()] {
            grid.check_samples(count)?;
        }
        Ok(Self { grid, alpha, alpha_hat, a, frame, frame_hat, metric, metric_hat })
    }

    pub fn residuals(&self) -> Result<TripleResiduals> {
        let h = self.grid.h();
        let da = differentiate(&self.alpha, h)?;
        let dah = differentiate(&self.alpha_hat, h)?;
        let mut velocity: f64 = 0.0;
        let mut isometry: f64 = 0.0;
        let mut orientation_failures = 0;
        for k in 0..self.a.len() {
            let (f, fh, a) = (&self.frame[k], &self.frame_hat[k], &self.a[k]);
            let coords = lstsq_vec(f, &da[k], 1e-12, "tangent frame")?;
            velocity = velocity.max((fh * a * coords - &dah[k]).norm());
            let g = f.transpose() * &self.metric[k] * f;
            let gh = fh.transpose() * &self.metric_hat[k] * fh;
            isometry = isometry.max((a.transpose() * gh * a - g).amax());
            if a.determinant() <= 0.0 {
                orientation_failures += 1;
            }
        }
        Ok(TripleResiduals { velocity, isometry, orientation_failures })
    }
}

/// Per-node spanning sets (as matrix columns) of a tangent or normal space.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFramePath {
    pub grid: TimeGrid,
    pub frames: Vec<DMatrix<f64>>,
}

impl TangentFramePath {
    pub fn new(grid: TimeGrid, frames: Vec<DMatrix<f64>>) -> Result<Self> {
        grid.check_samples(frames.len())?;
        if let Some(first) = frames.first() {
            let rank = first.ncols();
            if frames.iter().any(|f| f.ncols() != rank || f.nrows() != first.nrows()) {
                return Err(Error::DegenerateFrame("frame rank changes along the path".into()));
            }
        }
        Ok(Self { grid, frames })
    }

    /// Frames from a closure evaluated at the grid nodes.
    pub fn from_fn<F: Fn(usize) -> DMatrix<f64>>(grid: TimeGrid, f: F) -> Result<Self> {
        Self::new(grid, (0..grid.len()).map(f).collect())
    }

    pub fn rank(&self) -> usize {
        self.frames.first().map_or(0, |f| f.ncols())
    }
}

/// Per-node values for each residual of the suite.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeResiduals {
    pub rolling_point: Vec<f64>,
    pub tangency: Vec<f64>,
    pub no_slip: Vec<f64>,
    pub no_twist_tan: Vec<f64>,
    pub no_twist_norm: Vec<f64>,
}

/// Maximum residuals of the rolling conditions along a path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub rolling_point: f64,
    pub tangency: f64,
    pub no_slip: f64,
    pub no_twist_tan: f64,
    pub no_twist_norm: f64,
    pub per_node: NodeResiduals,
}

fn vec_max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

impl ResidualReport {
    pub fn from_nodes(per_node: NodeResiduals) -> Self {
        Self {
            rolling_point: vec_max(&per_node.rolling_point),
            tangency: vec_max(&per_node.tangency),
            no_slip: vec_max(&per_node.no_slip),
            no_twist_tan: vec_max(&per_node.no_twist_tan),
            no_twist_norm: vec_max(&per_node.no_twist_norm),
            per_node,
        }
    }

    pub fn max(&self) -> f64 {
        [self.rolling_point, self.tangency, self.no_slip, self.no_twist_tan, self.no_twist_norm]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }

    /// Named maxima, in report order.
    pub fn entries(&self) -> [(&'static str, f64); 5] {
        [
            ("rolling_point", self.rolling_point),
            ("tangency", self.tangency),
            ("no_slip", self.no_slip),
            ("no_twist_tan", self.no_twist_tan),
            ("no_twist_norm", self.no_twist_norm),
        ]
    }
}

fn normalized_columns(frame: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut f = frame.clone();
    for mut c in f.column_iter_mut() {
        let n = c.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateFrame("zero frame vector".into()));
        }
        c /= n;
    }
    Ok(f)
}

/// J-orthogonal projector `F (F^T J F)^{-1} F^T J` onto the span of the
/// columns of `frame`. The span must be nondegenerate for the form.
pub fn j_projector(form: &SignatureForm, frame: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim(form.dim(), frame.nrows())?;
    if frame.ncols() == 0 {
        return Ok(DMatrix::zeros(form.dim(), form.dim()));
    }
    let f = normalized_columns(frame)?;
    let gram = form.gram(&f);
    let sv = gram.clone().symmetric_eigenvalues().abs();
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= 0.0 || smax / smin > MAX_FRAME_CONDITION {
        return Err(Error::DegenerateFrame(format!("Gram condition number {:.3e}", smax / smin.max(f64::MIN_POSITIVE))));
    }
    let inv = gram.try_inverse().ok_or(Error::Singular("frame Gram matrix"))?;
    Ok(&f * inv * form.apply_rows(&f).transpose())
}

fn orthonormal_basis(frame: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let f = normalized_columns(frame)?;
    let qr = f.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().amax();
    let diag_min = r.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if diag_min <= diag_max / MAX_FRAME_CONDITION {
        return Err(Error::DegenerateFrame("rank-deficient frame".into()));
    }
    Ok(qr.q())
}

/// Largest principal-angle deviation `sqrt(1 - cos^2)` between two spans of
/// equal dimension.
pub fn principal_angle_deviation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    check_dim(a.nrows(), b.nrows())?;
    check_dim(a.ncols(), b.ncols())?;
    if a.ncols() == 0 {
        return Ok(0.0);
    }
    let qa = orthonormal_basis(a)?;
    let qb = orthonormal_basis(b)?;
    // largest sine, read off the part of span(a) outside span(b)
    let outside = &qa - &qb * (qb.transpose() * &qa);
    Ok(singular_values(&outside).max().min(1.0))
}

fn check_aligned(path: &RollingMapPath, frames: &TangentFramePath) -> Result<()> {
    if !path.grid.same_as(&frames.grid) {
        return Err(Error::InvalidGrid("frame grid differs from path grid".into()));
    }
    if let Some(f) = frames.frames.first() {
        check_dim(path.dim(), f.nrows())?;
    }
    Ok(())
}

/// Conditions 1 and 2: contact point and tangent-space matching.
pub fn rolling_condition_residuals(
    path: &RollingMapPath,
    tangent_m: &TangentFramePath,
    tangent_mhat: &TangentFramePath,
) -> Result<ResidualReport> {
    let (point, tangency) = contact_residuals(path, tangent_m, tangent_mhat)?;
    Ok(ResidualReport::from_nodes(NodeResiduals { rolling_point: point, tangency, ..Default::default() }))
}

fn contact_residuals(
    path: &RollingMapPath,
    tangent_m: &TangentFramePath,
    tangent_mhat: &TangentFramePath,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_aligned(path, tangent_m)?;
    check_aligned(path, tangent_mhat)?;
    let mut point = Vec::with_capacity(path.grid.len());
    let mut tangency = Vec::with_capacity(path.grid.len());
    for k in 0..path.grid.len() {
        let g = &path.motions[k];
        point.push((g.r() * &path.alpha[k] + g.s() - &path.alpha_hat[k]).norm());
        let moved = g.r() * &tangent_m.frames[k];
        tangency.push(principal_angle_deviation(&moved, &tangent_mhat.frames[k])?);
    }
    Ok((point, tangency))
}

/// Norm of `(g' g^{-1}).alpha_hat = R' R^{-1}(alpha_hat - s) + s'` per node.
pub fn no_slip_residual(path: &RollingMapPath) -> Result<Vec<f64>> {
    if path.grid.n_steps < 2 {
        return Err(Error::GridTooShort { needed: 2, have: path.grid.n_steps });
    }
    let omega = path.angular_velocity()?;
    let s: Vec<DVector<f64>> = path.motions.iter().map(|g| g.s().clone()).collect();
    let ds = differentiate(&s, path.grid.h())?;
    Ok((0..s.len()).map(|k| (&omega[k] * (&path.alpha_hat[k] - &s[k]) + &ds[k]).norm()).collect())
}

/// Tangential and normal parts of the no-twist condition per node.
///
/// The first entry measures the tangential component of `R' R^{-1} v` for
/// unit tangent vectors `v` at the development, the second the normal
/// component for unit normal vectors.
pub fn no_twist_residuals(
    path: &RollingMapPath,
    tangent_mhat: &TangentFramePath,
    normal_mhat: &TangentFramePath,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_aligned(path, tangent_mhat)?;
    check_aligned(path, normal_mhat)?;
    let omega = path.angular_velocity()?;
    let mut tan = Vec::with_capacity(omega.len());
    let mut norm = Vec::with_capacity(omega.len());
    for (k, om) in omega.iter().enumerate() {
        let t = normalized_columns_or_empty(&tangent_mhat.frames[k])?;
        let n = normalized_columns_or_empty(&normal_mhat.frames[k])?;
        let pt = j_projector(&path.form, &t)?;
        let pn = j_projector(&path.form, &n)?;
        tan.push(max_column_norm(&(&pt * om * &t)));
        norm.push(max_column_norm(&(&pn * om * &n)));
    }
    Ok((tan, norm))
}

fn normalized_columns_or_empty(frame: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if frame.ncols() == 0 {
        Ok(frame.clone())
    } else {
        normalized_columns(frame)
    }
}

fn max_column_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// The complete suite: conditions 1 and 2, no-slip, and both no-twist parts.
pub fn residual_suite(
    path: &RollingMapPath,
    tangent_m: &TangentFramePath,
    tangent_mhat: &TangentFramePath,
    normal_mhat: &TangentFramePath,
) -> Result<ResidualReport> {
    let (rolling_point, tangency) = contact_residuals(path, tangent_m, tangent_mhat)?;
    let no_slip = no_slip_residual(path)?;
    let (no_twist_tan, no_twist_norm) = no_twist_residuals(path, tangent_mhat, normal_mhat)?;
    Ok(ResidualReport::from_nodes(NodeResiduals { rolling_point, tangency, no_slip, no_twist_tan, no_twist_norm }))
}

/// A rolling map with the frames the residual suite needs: tangent spaces
/// along `alpha` and tangent and normal spaces along the development.
#[derive(Debug, Clone, PartialEq)]
pub struct FramedRolling {
    pub path: RollingMapPath,
    pub tangent_m: TangentFramePath,
    pub tangent_mhat: TangentFramePath,
    pub normal_mhat: TangentFramePath,
}

impl FramedRolling {
    pub fn residuals(&self) -> Result<ResidualReport> {
        residual_suite(&self.path, &self.tangent_m, &self.tangent_mhat, &self.normal_mhat)
    }
}

/// `g^{-1}` pointwise with the curves swapped: `M_hat` rolling on `M`.
pub fn invert_rolling(path: &RollingMapPath) -> Result<RollingMapPath> {
    let motions = path.motions.iter().map(se_inverse).collect::<Result<Vec<_>>>()?;
    RollingMapPath::new(path.grid, path.form.clone(), motions, path.alpha_hat.clone(), path.alpha.clone())
}

/// Chains `M` rolling on `M1` (`path_01`) with `M1` rolling on `M2`
/// (`path_12`) into `M` rolling on `M2`, with motions `g12(t) g01(t)`.
pub fn compose_rolling(path_01: &RollingMapPath, path_12: &RollingMapPath) -> Result<RollingMapPath> {
    if !path_01.grid.same_as(&path_12.grid) {
        return Err(Error::InvalidGrid("rolling paths use different grids".into()));
    }
    check_dim(path_01.dim(), path_12.dim())?;
    if path_01.form != path_12.form {
        return Err(Error::InvalidInput("rolling paths use different scalar products".into()));
    }
    let tol = 1e-8;
    for (k, (a, b)) in path_01.alpha_hat.iter().zip(&path_12.alpha).enumerate() {
        let gap = (a - b).amax();
        if gap > tol * (1.0 + a.amax()) {
            return Err(Error::InvalidInput(format!(
                "development of the first path does not match the second rolling curve at node {k} (gap {gap:.3e})"
            )));
        }
    }
    let motions = path_12
        .motions
        .iter()
        .zip(&path_01.motions)
        .map(|(g12, g01)| se_compose(g12, g01))
        .collect::<Result<Vec<_>>>()?;
    RollingMapPath::new(path_01.grid, path_01.form.clone(), motions, path_01.alpha.clone(), path_12.alpha_hat.clone())
}

/// Admissibility tolerance for the normal perturbation generator.
pub const PERTURBATION_TOL: f64 = 1e-9;

/// Replaces `R' = Omega R` by `R~' = (Omega + Omega0) R~` with `R~(0) = R(0)`,
/// keeping both contact curves; `s~ = alpha_hat - R~ alpha`.
///
/// `omega0(t)` must vanish on the tangent space of the development and map
/// its normal space into itself.
pub fn perturb_normal_generator<F>(
    path: &RollingMapPath,
    omega0: F,
    tangent_mhat: &TangentFramePath,
    normal_mhat: &TangentFramePath,
) -> Result<RollingMapPath>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    check_aligned(path, tangent_mhat)?;
    check_aligned(path, normal_mhat)?;
    let n = path.dim();
    for k in 0..path.grid.len() {
        let w = omega0(path.grid.node(k));
        if w.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, found: w.nrows() });
        }
        let t = normalized_columns_or_empty(&tangent_mhat.frames[k])?;
        let nf = normalized_columns_or_empty(&normal_mhat.frames[k])?;
        let pt = j_projector(&path.form, &t)?;
        let on_tangent = max_column_norm(&(&w * &t));
        let leaks = max_column_norm(&(&pt * &w * &nf));
        let scale = 1.0 + w.amax();
        if on_tangent > PERTURBATION_TOL * scale || leaks > PERTURBATION_TOL * scale {
            return Err(Error::Constraint(format!(
                "normal generator not admissible at node {k}: tangent image {on_tangent:.3e}, normal leak {leaks:.3e}"
            )));
        }
    }
    let omega = path.angular_velocity()?;
    let grid = path.grid;
    let r0 = path.motions[0].r().clone();
    let rotations = integrate_matrix_ode(
        |t, x| (interpolate(&grid, &omega, t) + omega0(t)) * x,
        &r0,
        &grid,
        Some(&path.form),
    )?;
    let motions = rotations
        .samples
        .into_iter()
        .zip(path.alpha.iter().zip(&path.alpha_hat))
        .map(|(r, (a, ah))| {
            let s = ah - &r * a;
            RigidMotion::from_parts(r, s)
        })
        .collect::<Result<Vec<_>>>()?;
    RollingMapPath::new(grid, path.form.clone(), motions, path.alpha.clone(), path.alpha_hat.clone())
}

/// Subspace selector for [`parallel_transport_embedded`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subspace {
    Tangent,
    Normal,
}

fn transport_pass(
    form: &SignatureForm,
    projectors: &[DMatrix<f64>],
    stride: usize,
    v0: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    let norm0 = form.dot(v0, v0);
    let mut out = vec![v0.clone()];
    let mut v = v0.clone();
    let mut k = 0;
    while k + stride < projectors.len() {
        k += stride;
        v = &projectors[k] * &v;
        v = rescale(form, &v, norm0)?;
        out.push(v.clone());
    }
    Ok(out)
}

fn rescale(form: &SignatureForm, v: &DVector<f64>, target: f64) -> Result<DVector<f64>> {
    let current = form.dot(v, v);
    let floor = 1e-12 * v.norm_squared().max(1e-300);
    if target.abs() <= floor {
        return Ok(v.clone());
    }
    if current.signum() != target.signum() || current.abs() <= floor {
        return Err(Error::DegenerateFrame("transported vector changed causal character".into()));
    }
    Ok(v * (target / current).sqrt())
}

/// Parallel transport along an embedded curve by repeated projection.
///
/// Each step projects the current vector J-orthogonally onto the subspace
/// at the next node and restores its indefinite norm. The projection scheme
/// is first order; when the step count is even, one Richardson step against
/// the half-resolution pass (`2 v_h - v_2h`) lifts it to second order, and
/// odd nodes are filled by cubic interpolation, then re-projected.
pub fn parallel_transport_embedded(
    form: &SignatureForm,
    tangent_frames: &TangentFramePath,
    v0: &DVector<f64>,
    which: Subspace,
) -> Result<Vec<DVector<f64>>> {
    check_dim(form.dim(), v0.len())?;
    let grid = tangent_frames.grid;
    let n = form.dim();
    let projectors = tangent_frames
        .frames
        .iter()
        .map(|f| {
            let p = j_projector(form, f)?;
            Ok(match which {
                Subspace::Tangent => p,
                Subspace::Normal => DMatrix::identity(n, n) - p,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let miss = (&projectors[0] * v0 - v0).norm();
    if miss > 1e-8 * (1.0 + v0.norm()) {
        return Err(Error::InvalidInput(format!("initial vector is off the subspace by {miss:.3e}")));
    }
    let fine = transport_pass(form, &projectors, 1, v0)?;
    if grid.n_steps % 2 != 0 || grid.n_steps < 4 {
        return Ok(fine);
    }
    let coarse = transport_pass(form, &projectors, 2, v0)?;
    let norm0 = form.dot(v0, v0);
    let even: Vec<DVector<f64>> = coarse
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let v = &fine[2 * j] * 2.0 - c;
            rescale(form, &(&projectors[2 * j] * v), norm0)
        })
        .collect::<Result<Vec<_>>>()?;
    let coarse_grid = grid.coarsened()?;
    (0..grid.len())
        .map(|k| {
            if k % 2 == 0 {
                Ok(even[k / 2].clone())
            } else {
                let v = interpolate(&coarse_grid, &even, grid.node(k));
                rescale(form, &(&projectors[k] * v), norm0)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot_y(t: f64) -> DMatrix<f64> {
        let (s, c) = t.sin_cos();
        DMatrix::from_row_slice(3, 3, &[c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c])
    }

    fn col(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn colm(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    struct SpherePlane {
        path: RollingMapPath,
        tan_m: TangentFramePath,
        tan_hat: TangentFramePath,
        norm_hat: TangentFramePath,
    }

    /// Unit sphere rolling on the plane z = -1 along the great circle in the
    /// x-z plane: R = Rot_y(t), s = (t, 0, 0).
    fn sphere_on_plane(n: usize, t1: f64) -> SpherePlane {
        let grid = TimeGrid::new(0.0, t1, n).unwrap();
        let form = SignatureForm::euclidean(3);
        let mut motions = Vec::new();
        let mut alpha = Vec::new();
        let mut alpha_hat = Vec::new();
        for t in grid.nodes() {
            motions.push(RigidMotion::from_parts(rot_y(t), col(&[t, 0.0, 0.0])).unwrap());
            alpha.push(col(&[t.sin(), 0.0, -t.cos()]));
            alpha_hat.push(col(&[t, 0.0, -1.0]));
        }
        let path = RollingMapPath::new(grid, form, motions, alpha, alpha_hat).unwrap();
        let tan_m = TangentFramePath::from_fn(grid, |k| {
            let t = grid.node(k);
            DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, t.cos(), 0.0, t.sin()])
        })
        .unwrap();
        let plane = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let tan_hat = TangentFramePath::from_fn(grid, |_| plane.clone()).unwrap();
        let norm_hat = TangentFramePath::from_fn(grid, |_| colm(&[0.0, 0.0, 1.0])).unwrap();
        SpherePlane { path, tan_m, tan_hat, norm_hat }
    }

    #[test]
    fn closed_form_sphere_rolling_passes() {
        let sp = sphere_on_plane(200, 2.0);
        let report = residual_suite(&sp.path, &sp.tan_m, &sp.tan_hat, &sp.norm_hat).unwrap();
        assert!(report.rolling_point <= 1e-10 && report.tangency <= 1e-7, "{report:?}");
        let h = sp.path.grid.h();
        assert!(report.no_slip <= 50.0 * h * h, "{report:?}");
        assert!(report.no_twist_tan <= 50.0 * h * h && report.no_twist_norm <= 50.0 * h * h);
    }

    #[test]
    fn flat_identity_path_has_zero_residuals() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let form = SignatureForm::euclidean(3);
        let v = col(&[1.0, 2.0, 0.0]);
        let alpha: Vec<_> = grid.nodes().map(|t| &v * t).collect();
        let path = RollingMapPath::identity(grid, form, alpha).unwrap();
        let plane = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let tan = TangentFramePath::from_fn(grid, |_| plane.clone()).unwrap();
        let norm = TangentFramePath::from_fn(grid, |_| colm(&[0.0, 0.0, 1.0])).unwrap();
        let report = residual_suite(&path, &tan, &tan, &norm).unwrap();
        assert!(report.max() < 1e-12, "{report:?}");
    }

    #[test]
    fn corrupted_translation_is_detected() {
        let mut sp = sphere_on_plane(100, 1.0);
        sp.path.motions[37].translation[1] += 1e-3;
        let report = rolling_condition_residuals(&sp.path, &sp.tan_m, &sp.tan_hat).unwrap();
        assert!((report.rolling_point - 1e-3).abs() < 1e-9);
        assert!(report.per_node.rolling_point[36] < 1e-12);
    }

    #[test]
    fn spinning_in_place_slips() {
        // same rotation, translation frozen at zero: the contact point stays
        // put while the sphere turns under it at unit speed
        let mut sp = sphere_on_plane(400, 1.0);
        for (k, g) in sp.path.motions.iter_mut().enumerate() {
            g.translation = DVector::zeros(3);
            sp.path.alpha_hat[k] = g.r() * &sp.path.alpha[k];
        }
        let slip = no_slip_residual(&sp.path).unwrap();
        assert!(slip.iter().all(|r| (r - 1.0).abs() < 1e-8), "{:?}", &slip[..3]);
    }

    #[test]
    fn one_dimensional_manifold_has_no_tangential_twist() {
        let sp = sphere_on_plane(50, 1.0);
        // the circle alpha itself, rolled on the line y = 0, z = -1
        let grid = sp.path.grid;
        let line = TangentFramePath::from_fn(grid, |_| colm(&[1.0, 0.0, 0.0])).unwrap();
        let normals = TangentFramePath::from_fn(grid, |_| DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]))
            .unwrap();
        let (tan, _) = no_twist_residuals(&sp.path, &line, &normals).unwrap();
        assert!(tan.iter().all(|r| *r < 1e-12));
    }

    #[test]
    fn inversion_is_an_involution_and_keeps_the_suite() {
        let sp = sphere_on_plane(200, 1.5);
        let inv = invert_rolling(&sp.path).unwrap();
        let back = invert_rolling(&inv).unwrap();
        for (a, b) in back.motions.iter().zip(&sp.path.motions) {
            assert!(a.max_abs_diff(b) < 1e-13);
        }
        // plane rolling on sphere: tangent/normal frames at the development are the sphere's
        let grid = sp.path.grid;
        let sphere_normals = TangentFramePath::from_fn(grid, |k| colm(sp.path.alpha[k].as_slice())).unwrap();
        let report = residual_suite(&inv, &sp.tan_hat, &sp.tan_m, &sphere_normals).unwrap();
        let h = grid.h();
        assert!(report.max() <= 100.0 * h * h, "{report:?}");
    }

    #[test]
    fn composition_cancels_and_chains() {
        let sp = sphere_on_plane(100, 1.0);
        let inv = invert_rolling(&sp.path).unwrap();
        let cancel = compose_rolling(&sp.path, &inv).unwrap();
        for g in &cancel.motions {
            assert!(g.max_abs_diff(&RigidMotion::identity(3)) < 1e-10);
        }
        let grid = sp.path.grid;
        let shift = col(&[0.5, -1.0, 2.0]);
        let shifted: Vec<_> = sp.path.alpha_hat.iter().map(|p| p + &shift).collect();
        let plane_shift = RollingMapPath::new(
            grid,
            SignatureForm::euclidean(3),
            vec![RigidMotion::translation_only(shift.clone()); grid.len()],
            sp.path.alpha_hat.clone(),
            shifted,
        )
        .unwrap();
        let chained = compose_rolling(&sp.path, &plane_shift).unwrap();
        let report = residual_suite(&chained, &sp.tan_m, &sp.tan_hat, &sp.norm_hat).unwrap();
        let h = grid.h();
        assert!(report.max() <= 50.0 * h * h, "{report:?}");
        let ident = RollingMapPath::identity(grid, SignatureForm::euclidean(3), sp.path.alpha_hat.clone()).unwrap();
        let same = compose_rolling(&sp.path, &ident).unwrap();
        assert_eq!(same.motions, sp.path.motions);
        assert!(compose_rolling(&sp.path, &sp.path).is_err());
    }

    #[test]
    fn zero_perturbation_keeps_the_path() {
        let sp = sphere_on_plane(400, 1.0);
        let out = perturb_normal_generator(&sp.path, |_| DMatrix::zeros(3, 3), &sp.tan_hat, &sp.norm_hat).unwrap();
        for (a, b) in out.motions.iter().zip(&sp.path.motions) {
            assert!(a.max_abs_diff(b) < 1e-9);
        }
    }

    #[test]
    fn inadmissible_perturbation_is_rejected() {
        let sp = sphere_on_plane(20, 1.0);
        let w = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let r = perturb_normal_generator(&sp.path, |_| w.clone(), &sp.tan_hat, &sp.norm_hat);
        assert!(matches!(r, Err(Error::Constraint(_))));
    }

    #[test]
    fn degenerate_frames_are_rejected() {
        let form = SignatureForm::new(vec![-1.0, 1.0, 1.0]).unwrap();
        let null = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        assert!(matches!(j_projector(&form, &null), Err(Error::DegenerateFrame(_))));
        let twice = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert!(principal_angle_deviation(&twice, &twice).is_err());
    }

    #[test]
    fn transport_on_a_line_is_constant() {
        let grid = TimeGrid::new(0.0, 1.0, 16).unwrap();
        let form = SignatureForm::euclidean(3);
        let frames = TangentFramePath::from_fn(grid, |_| DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]))
            .unwrap();
        let v0 = col(&[0.3, -0.4, 0.0]);
        let out = parallel_transport_embedded(&form, &frames, &v0, Subspace::Tangent).unwrap();
        assert!(out.iter().all(|v| (v - &v0).amax() < 1e-15));
    }

    #[test]
    fn transport_along_quarter_great_circle() {
        let n = 4096;
        let grid = TimeGrid::new(0.0, std::f64::consts::FRAC_PI_2, n).unwrap();
        let form = SignatureForm::euclidean(3);
        // circle (cos t, sin t, 0); tangent plane spanned by its velocity and e3
        let frames = TangentFramePath::from_fn(grid, |k| {
            let t = grid.node(k);
            DMatrix::from_column_slice(3, 2, &[-t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0])
        })
        .unwrap();
        let v0 = col(&[0.0, 1.0, 0.0]);
        let out = parallel_transport_embedded(&form, &frames, &v0, Subspace::Tangent).unwrap();
        let end = out.last().unwrap();
        assert!((end - col(&[-1.0, 0.0, 0.0])).norm() <= 1e-6, "{end}");
        // a vector along e3 rotates about nothing
        let w = parallel_transport_embedded(&form, &frames, &col(&[0.0, 0.0, 1.0]), Subspace::Tangent).unwrap();
        assert!((w.last().unwrap() - col(&[0.0, 0.0, 1.0])).norm() <= 1e-6);
        // normal field along the circle is the position vector
        let normal = parallel_transport_embedded(&form, &frames, &col(&[1.0, 0.0, 0.0]), Subspace::Normal).unwrap();
        assert!((normal.last().unwrap() - col(&[0.0, 1.0, 0.0])).norm() <= 1e-6);
    }

    #[test]
    fn triple_residuals_of_a_flat_translation() {
        let grid = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let v = col(&[1.0, -1.0]);
        let alpha: Vec<_> = grid.nodes().map(|t| &v * t).collect();
        let i2 = DMatrix::identity(2, 2);
        let n = grid.len();
        let ones = vec![i2; n];
        let triple =
            RollingTriple::new(grid, alpha.clone(), alpha, ones.clone(), ones.clone(), ones.clone(), ones.clone(), ones)
                .unwrap();
        let res = triple.residuals().unwrap();
        assert!(res.velocity < 1e-13 && res.isometry == 0.0 && res.orientation_failures == 0);
    }

    #[test]
    fn report_serializes_with_named_fields() {
        let report = ResidualReport::from_nodes(NodeResiduals {
            rolling_point: vec![0.0, 2.0],
            tangency: vec![1.0],
            ..Default::default()
        });
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["rolling_point"], 2.0);
        assert_eq!(json["no_twist_norm"], 0.0);
        assert!(json["per_node"]["tangency"].is_array());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn invert_twice_is_identity(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -3.0f64..3.0) {
                let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
                let motions: Vec<_> = grid
                    .nodes()
                    .map(|t| RigidMotion::from_parts(rot_y(a * t + c), col(&[b * t, a, c * t * t])).unwrap())
                    .collect();
                let alpha: Vec<_> = grid.nodes().map(|t| col(&[t, b, a])).collect();
                let alpha_hat: Vec<_> = motions.iter().zip(&alpha).map(|(g, p)| g.r() * p + g.s()).collect();
                let path = RollingMapPath::new(grid, SignatureForm::euclidean(3), motions, alpha, alpha_hat).unwrap();
                let back = invert_rolling(&invert_rolling(&path).unwrap()).unwrap();
                for (x, y) in back.motions.iter().zip(&path.motions) {
                    prop_assert!(x.max_abs_diff(y) < 1e-12);
                }
                prop_assert_eq!(back.alpha, path.alpha);
            }
        }
    }
}
