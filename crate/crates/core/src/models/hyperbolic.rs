//! Poincare disc under SU(1,1), embedded as the upper sheet of the
//! hyperboloid `x1^2 = 1 + x2^2 + x3^2` in `R^{1,2}`.

use nalgebra::{DMatrix, DVector};

use super::{
    chart_complex, complex_chart, complex_entries, complex_mult, moebius, moebius_derivative, moebius_field, realize,
    C64,
};
use crate::error::{Error, Result};
use crate::homogeneous::{matrix_to_rows, BasePoint, ControlCurve, Geometry, GroupPath, ModelDescription};
use crate::integrate::{differentiate, flow_matrix_ode, integrate_vector, interpolate, Side, TimeGrid};
use crate::linalg_semi::{RigidMotion, SignatureForm};
use crate::rolling::{FramedRolling, RollingMapPath, TangentFramePath};
use crate::util::nullspace;

const CONSTRAINT_TOL: f64 = 1e-10;

/// Which unimodular group a [`MoebiusElement`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoebiusBranch {
    /// `[[a, b], [conj b, conj a]]`, `|a|^2 - |b|^2 = 1`
    Su11,
    /// `[[a, b], [-conj b, conj a]]`, `|a|^2 + |b|^2 = 1`
    Su2,
}

/// Group element determined by its first row `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusElement {
    pub a: C64,
    pub b: C64,
    pub branch: MoebiusBranch,
}

impl MoebiusElement {
    pub fn new(a: C64, b: C64, branch: MoebiusBranch) -> Result<Self> {
        let g = Self { a, b, branch };
        let defect = g.constraint_defect();
        if defect > CONSTRAINT_TOL {
            return Err(Error::Constraint(format!("{branch:?} element off its group by {defect:.3e}")));
        }
        Ok(g)
    }

    pub fn identity(branch: MoebiusBranch) -> Self {
        Self { a: C64::new(1.0, 0.0), b: C64::new(0.0, 0.0), branch }
    }

    pub fn constraint_defect(&self) -> f64 {
        let (a2, b2) = (self.a.norm_sqr(), self.b.norm_sqr());
        match self.branch {
            MoebiusBranch::Su11 => (a2 - b2 - 1.0).abs(),
            MoebiusBranch::Su2 => (a2 + b2 - 1.0).abs(),
        }
    }

    pub fn complex_matrix(&self) -> [[C64; 2]; 2] {
        let c = match self.branch {
            MoebiusBranch::Su11 => self.b.conj(),
            MoebiusBranch::Su2 => -self.b.conj(),
        };
        [[self.a, self.b], [c, self.a.conj()]]
    }

    pub fn realization(&self) -> DMatrix<f64> {
        realize(&self.complex_matrix())
    }

    pub fn from_realization(q: &DMatrix<f64>, branch: MoebiusBranch) -> Result<Self> {
        if q.shape() != (4, 4) {
            return Err(Error::DimensionMismatch { expected: 4, found: q.nrows() });
        }
        let [[a, b], _] = complex_entries(q);
        Self::new(a, b, branch)
    }

    /// Fractional linear action on a complex point.
    pub fn apply(&self, z: C64) -> C64 {
        let [[a, b], [c, d]] = self.complex_matrix();
        (a * z + b) / (c * z + d)
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Basis `A1 = diag(i, -i)/2`, `A2 = [[0, 1], [1, 0]]/2`, `A3 = [[0, i], [-i, 0]]/2`.
pub fn su11_basis() -> [[[C64; 2]; 2]; 3] {
    let z = c(0.0, 0.0);
    [
        [[c(0.0, 0.5), z], [z, c(0.0, -0.5)]],
        [[z, c(0.5, 0.0)], [c(0.5, 0.0), z]],
        [[z, c(0.0, 0.5)], [c(0.0, -0.5), z]],
    ]
}

/// Model description: `h = {A1}`, `p = {A2, A3}`, base point `0`.
pub fn description() -> ModelDescription {
    ModelDescription {
        name: "hyperbolic_disc".into(),
        j_signs: vec![-1.0, 1.0, 1.0],
        group_signs: Some(vec![1.0, 1.0, -1.0, -1.0]),
        basis: su11_basis().iter().map(|m| matrix_to_rows(&realize(m))).collect(),
        h_indices: vec![0],
        p_indices: vec![1, 2],
        base_point: BasePoint::Vector(vec![0.0, 0.0]),
        embedding: "builtin:hyperboloid12".into(),
    }
}

fn check_disc(z: C64) -> Result<()> {
    if z.norm_sqr() >= 1.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Constraint(format!("point {z} is not inside the unit disc")));
    }
    Ok(())
}

/// `iota(z) = ((1+|z|^2), 2 y, -2 x) / (1-|z|^2)` for `z = x + i y`.
pub fn embed_hyperbolic(z: C64) -> Result<DVector<f64>> {
    check_disc(z)?;
    let r2 = z.norm_sqr();
    let d = 1.0 - r2;
    Ok(DVector::from_vec(vec![(1.0 + r2) / d, 2.0 * z.im / d, -2.0 * z.re / d]))
}

/// Adjoint matrix of an SU(1,1) element acting on `R^{1,2}`.
pub fn ad_su11(g: &MoebiusElement) -> Result<DMatrix<f64>> {
    if g.branch != MoebiusBranch::Su11 {
        return Err(Error::InvalidInput("ad_su11 needs an SU(1,1) element".into()));
    }
    let defect = g.constraint_defect();
    if defect > CONSTRAINT_TOL {
        return Err(Error::Constraint(format!("|a|^2 - |b|^2 = 1 violated by {defect:.3e}")));
    }
    Ok(ad_entries(g.a, g.b))
}

fn ad_entries(a: C64, b: C64) -> DMatrix<f64> {
    let ab = a * b;
    let abar_b = a.conj() * b;
    let a_bbar = a * b.conj();
    let (p, m) = (a * a + b * b, a * a - b * b);
    DMatrix::from_row_slice(
        3,
        3,
        &[
            a.norm_sqr() + b.norm_sqr(),
            2.0 * abar_b.im,
            -2.0 * a_bbar.re,
            2.0 * ab.im,
            m.re,
            -p.im,
            -2.0 * ab.re,
            m.im,
            p.re,
        ],
    )
}

/// `ad` of `A = [[i v, u], [conj u, -i v]] / 2` with `u = u1 + i u2`.
fn ad_algebra(v: f64, u: C64) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, u.im, -u.re, u.im, 0.0, -v, -u.re, v, 0.0])
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct HyperbolicDisc;

impl Geometry for HyperbolicDisc {
    fn id(&self) -> &'static str {
        "hyperboloid12"
    }

    fn chart_dim(&self) -> usize {
        2
    }

    fn ambient_form(&self) -> SignatureForm {
        SignatureForm::new(vec![-1.0, 1.0, 1.0]).expect("valid signs")
    }

    fn group_form(&self) -> SignatureForm {
        SignatureForm::new(vec![1.0, 1.0, -1.0, -1.0]).expect("valid signs")
    }

    fn action(&self, q: &DMatrix<f64>, m: &DVector<f64>) -> Result<DVector<f64>> {
        let z = chart_complex(m);
        check_disc(z)?;
        Ok(complex_chart(moebius(q, z)?))
    }

    fn action_jacobian(&self, q: &DMatrix<f64>, m: &DVector<f64>) -> Result<DMatrix<f64>> {
        let z = chart_complex(m);
        check_disc(z)?;
        Ok(complex_mult(moebius_derivative(q, z)?))
    }

    fn infinitesimal_action(&self, x: &DMatrix<f64>, m: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(complex_chart(moebius_field(x, chart_complex(m))))
    }

    fn metric(&self, m: &DVector<f64>) -> Result<DMatrix<f64>> {
        let z = chart_complex(m);
        check_disc(z)?;
        let f = 2.0 / (1.0 - z.norm_sqr());
        Ok(DMatrix::identity(2, 2) * (f * f))
    }

    fn embed(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        embed_hyperbolic(chart_complex(m))
    }

    fn embed_jacobian(&self, m: &DVector<f64>) -> Result<DMatrix<f64>> {
        let z = chart_complex(m);
        check_disc(z)?;
        let (x, y) = (z.re, z.im);
        let d = 1.0 - z.norm_sqr();
        let d2 = d * d;
        Ok(DMatrix::from_row_slice(
            3,
            2,
            &[
                4.0 * x / d2,
                4.0 * y / d2,
                4.0 * x * y / d2,
                (2.0 * d + 4.0 * y * y) / d2,
                (-2.0 * d - 4.0 * x * x) / d2,
                -4.0 * x * y / d2,
            ],
        ))
    }

    fn chart_point(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let den = 1.0 + x[0];
        if den <= 0.0 {
            return Err(Error::Constraint("point is not on the upper sheet".into()));
        }
        Ok(DVector::from_vec(vec![-x[2] / den, x[1] / den]))
    }

    fn representation(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let [[a, b], _] = complex_entries(q);
        ad_entries(a, b)
    }

    fn algebra_representation(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let [[x00, x01], _] = complex_entries(x);
        ad_algebra(2.0 * x00.im, x01 * 2.0)
    }

    fn tangent_frame(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let row = DMatrix::from_row_slice(1, 3, &[-x[0], x[1], x[2]]);
        Ok(nullspace(&row))
    }

    fn normal_frame(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_column_slice(3, 1, x.as_slice()))
    }

    fn closed_form_normal(&self) -> bool {
        true
    }
}

/// Horizontal lift `g = (1 - |z|^2)^{-1/2} [[1, z], [conj z, 1]] exp(theta A1)`.
#[derive(Debug, Clone)]
pub struct HyperbolicLift {
    pub group: GroupPath,
    pub theta: Vec<f64>,
    /// Sign `s` in `theta' = s 2 (x1 x2' - x1' x2) / (1 - |z|^2)` that made
    /// the lift horizontal.
    pub theta_sign: f64,
    /// Largest `h` component of `g^{-1} g'` for the chosen sign.
    pub horizontality: f64,
}

fn assemble_g(z: C64, theta: f64) -> DMatrix<f64> {
    let s = 1.0 / (1.0 - z.norm_sqr()).sqrt();
    let e = C64::from_polar(1.0, theta / 2.0);
    realize(&[[c(s, 0.0) * e, z * s * e.conj()], [z.conj() * s * e, c(s, 0.0) * e.conj()]])
}

/// Per-node `|h part of g^{-1} g'|`, read off the (1,1) complex entry.
fn h_components(group: &[DMatrix<f64>], h: f64) -> Result<Vec<f64>> {
    let dg = differentiate(group, h)?;
    let form = [1.0, 1.0, -1.0, -1.0];
    Ok(group
        .iter()
        .zip(&dg)
        .map(|(g, d)| {
            let ginv = crate::util::j_transpose(&form, g);
            complex_entries(&(ginv * d))[0][0].im.abs()
        })
        .collect())
}

/// Lifts a sampled disc curve to SU(1,1).
///
/// The sign of `theta'` is chosen at runtime: both signs are integrated and
/// the one with the smaller horizontality residual wins; the winner must be
/// at least as good at every node where `theta'` is not negligible.
pub fn hyperbolic_lift(grid: TimeGrid, z: &[C64], theta0: f64) -> Result<HyperbolicLift> {
    grid.check_samples(z.len())?;
    for p in z {
        check_disc(*p)?;
    }
    let pts: Vec<DVector<f64>> = z.iter().map(|p| complex_chart(*p)).collect();
    let dz = differentiate(&pts, grid.h())?;
    let rate: Vec<DVector<f64>> = pts
        .iter()
        .zip(&dz)
        .map(|(p, d)| DVector::from_element(1, 2.0 * (p[0] * d[1] - d[0] * p[1]) / (1.0 - p.norm_squared())))
        .collect();
    let base = integrate_vector(|t| interpolate(&grid, &rate, t), &DVector::zeros(1), &grid)?;
    let mut candidates = Vec::new();
    for sign in [-1.0, 1.0] {
        let theta: Vec<f64> = base.iter().map(|b| theta0 + sign * b[0]).collect();
        let group: Vec<DMatrix<f64>> = z.iter().zip(&theta).map(|(p, t)| assemble_g(*p, *t)).collect();
        let h = h_components(&group, grid.h())?;
        candidates.push((sign, theta, group, h));
    }
    let worst = |h: &[f64]| h.iter().copied().fold(0.0, f64::max);
    let (win, lose) = if worst(&candidates[0].3) <= worst(&candidates[1].3) { (0, 1) } else { (1, 0) };
    let scale = rate.iter().map(|r| r[0].abs()).fold(0.0, f64::max);
    for (k, r) in rate.iter().enumerate() {
        if r[0].abs() > 1e-6 * scale.max(1e-300) && candidates[win].3[k] > candidates[lose].3[k] + 1e-12 {
            return Err(Error::Constraint(format!("theta sign is not consistent along the curve (node {k})")));
        }
    }
    let (sign, theta, group, h) = candidates.swap_remove(win);
    Ok(HyperbolicLift {
        group: GroupPath { grid, samples: group },
        theta,
        theta_sign: sign,
        horizontality: worst(&h),
    })
}

/// `U_bar = [[0, u1, u2], [u1, 0, 0], [u2, 0, 0]]`.
pub fn hyperboloid_generator(u: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, u[0], u[1], u[0], 0.0, 0.0, u[1], 0.0, 0.0])
}

/// Rolling of the hyperboloid on its affine tangent plane at `e1`:
/// `R' = -U_bar R`, `s' = U_bar e1`, with `alpha = R^{-1} e1`.
pub fn roll_hyperboloid(u: &ControlCurve) -> Result<FramedRolling> {
    if u.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: u.dim() });
    }
    let form = SignatureForm::new(vec![-1.0, 1.0, 1.0])?;
    let grid = u.grid;
    let e1 = super::unit(3, 0);
    let rot = flow_matrix_ode(|t| -hyperboloid_generator(&u.at(t)), &DMatrix::identity(3, 3), &grid, Side::Left, Some(&form))?;
    let s = integrate_vector(|t| hyperboloid_generator(&u.at(t)) * &e1, &DVector::zeros(3), &grid)?;
    let mut motions = Vec::with_capacity(grid.len());
    let mut alpha = Vec::with_capacity(grid.len());
    let mut alpha_hat = Vec::with_capacity(grid.len());
    for (r, sk) in rot.samples.iter().zip(&s) {
        let a = crate::util::j_transpose(form.signs(), r) * &e1;
        let ah = &e1 + sk;
        let shift = &ah - r * &a;
        motions.push(RigidMotion::from_parts(r.clone(), shift)?);
        alpha.push(a);
        alpha_hat.push(ah);
    }
    let geometry = HyperbolicDisc;
    let tangent_m = TangentFramePath::new(grid, alpha.iter().map(|x| geometry.tangent_frame(x)).collect::<Result<_>>()?)?;
    let tangent_mhat = TangentFramePath::new(grid, vec![geometry.tangent_frame(&e1)?; grid.len()])?;
    let normal_mhat = TangentFramePath::new(grid, vec![geometry.normal_frame(&e1)?; grid.len()])?;
    let path = RollingMapPath::new(grid, form, motions, alpha, alpha_hat)?;
    Ok(FramedRolling { path, tangent_m, tangent_mhat, normal_mhat })
}
