//! CP^1 under SU(2), embedded as the unit sphere in Euclidean `R^3` by
//! stereographic projection.

use nalgebra::{DMatrix, DVector, Vector3};

use super::{chart_complex, complex_chart, complex_entries, complex_mult, moebius, moebius_derivative, moebius_field, realize, unit, C64};
use crate::error::{check_dim, Error, Result};
use crate::homogeneous::{matrix_to_rows, BasePoint, ControlCurve, Geometry, ModelDescription};
use crate::integrate::{flow_matrix_ode, integrate_vector, Side};
use crate::linalg_semi::{RigidMotion, SignatureForm};
use crate::rolling::{FramedRolling, RollingMapPath, TangentFramePath};
use crate::util::nullspace;

type C2 = [[C64; 2]; 2];

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn cmul(a: &C2, b: &C2) -> C2 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn cadj(a: &C2) -> C2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn ctrace(a: &C2) -> C64 {
    a[0][0] + a[1][1]
}

fn cadd(a: &C2, b: &C2) -> C2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

fn pauli() -> [C2; 3] {
    let (z, o, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    [[[z, o], [o, z]], [[z, -i], [i, z]], [[o, z], [z, -o]]]
}

/// Coordinate swap taking the Pauli adjoint frame to the embedding's frame.
fn relabel() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0])
}

/// Basis `A1 = diag(i, -i)/2`, `A2 = [[0, 1], [-1, 0]]/2`, `A3 = [[0, i], [i, 0]]/2`.
pub fn su2_basis() -> [C2; 3] {
    let z = c(0.0, 0.0);
    [
        [[c(0.0, 0.5), z], [z, c(0.0, -0.5)]],
        [[z, c(0.5, 0.0)], [c(-0.5, 0.0), z]],
        [[z, c(0.0, 0.5)], [c(0.0, 0.5), z]],
    ]
}

pub fn description() -> ModelDescription {
    ModelDescription {
        name: "riemann_sphere".into(),
        j_signs: vec![1.0, 1.0, 1.0],
        group_signs: Some(vec![1.0; 4]),
        basis: su2_basis().iter().map(|m| matrix_to_rows(&realize(m))).collect(),
        h_indices: vec![0],
        p_indices: vec![1, 2],
        base_point: BasePoint::Vector(vec![0.0, 0.0]),
        embedding: "builtin:riemann_sphere".into(),
    }
}

/// `iota(z) = (-2x, |z|^2 - 1, -2y) / (1 + |z|^2)` for `z = x + i y`.
pub fn embed_sphere(z: C64) -> Result<DVector<f64>> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidInput("point at infinity has no affine chart".into()));
    }
    let r2 = z.norm_sqr();
    let n = 1.0 + r2;
    Ok(DVector::from_vec(vec![-2.0 * z.re / n, (r2 - 1.0) / n, -2.0 * z.im / n]))
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RiemannSphere;

impl Geometry for RiemannSphere {
    fn id(&self) -> &'static str {
        "riemann_sphere"
    }

    fn chart_dim(&self) -> usize {
        2
    }

    fn ambient_form(&self) -> SignatureForm {
        SignatureForm::euclidean(3)
    }

    fn group_form(&self) -> SignatureForm {
        SignatureForm::euclidean(4)
    }

    fn action(&self, q: &DMatrix<f64>, m: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(complex_chart(moebius(q, chart_complex(m))?))
    }

    fn action_jacobian(&self, q: &DMatrix<f64>, m: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(complex_mult(moebius_derivative(q, chart_complex(m))?))
    }

    fn infinitesimal_action(&self, x: &DMatrix<f64>, m: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(complex_chart(moebius_field(x, chart_complex(m))))
    }

    fn metric(&self, m: &DVector<f64>) -> Result<DMatrix<f64>> {
        let f = 2.0 / (1.0 + m.norm_squared());
        Ok(DMatrix::identity(2, 2) * (f * f))
    }

    fn embed(&self, m: &DVector<f64>) -> Result<DVector<f64>> {
        embed_sphere(chart_complex(m))
    }

    fn embed_jacobian(&self, m: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (x, y) = (m[0], m[1]);
        let n = 1.0 + x * x + y * y;
        let n2 = n * n;
        Ok(DMatrix::from_row_slice(
            3,
            2,
            &[
                (-2.0 * n + 4.0 * x * x) / n2,
                4.0 * x * y / n2,
                4.0 * x / n2,
                4.0 * y / n2,
                4.0 * x * y / n2,
                (-2.0 * n + 4.0 * y * y) / n2,
            ],
        ))
    }

    fn chart_point(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let den = 1.0 - x[1];
        if den <= 1e-14 {
            return Err(Error::Constraint("the point (0, 1, 0) is outside the affine chart".into()));
        }
        Ok(DVector::from_vec(vec![-x[0] / den, -x[2] / den]))
    }

    fn representation(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let g = complex_entries(q);
        let s = pauli();
        let ad = DMatrix::from_fn(3, 3, |i, j| 0.5 * ctrace(&cmul(&cmul(&s[i], &g), &cmul(&s[j], &cadj(&g)))).re);
        let cm = relabel();
        &cm * ad * &cm
    }

    fn algebra_representation(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let xc = complex_entries(x);
        let s = pauli();
        let d = DMatrix::from_fn(3, 3, |i, j| {
            0.5 * ctrace(&cadd(&cmul(&cmul(&s[i], &xc), &s[j]), &cmul(&cmul(&s[i], &s[j]), &cadj(&xc)))).re
        });
        let cm = relabel();
        &cm * d * &cm
    }

    fn tangent_frame(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(nullspace(&DMatrix::from_row_slice(1, 3, x.as_slice())))
    }

    fn normal_frame(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_column_slice(3, 1, x.as_slice()))
    }

    fn closed_form_normal(&self) -> bool {
        true
    }
}

/// Tangent frame `[f1 f2]` at `base`: the images of `-e1, e2` under the
/// smallest rotation taking `-e3` to `base`. At `(0, -1, 0)` this makes
/// `U_bar` equal to `d rho(u1 A2 + u2 A3)`.
pub fn sphere_frame(base: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_dim(3, base.len())?;
    let norm = base.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("base point must be a unit vector (norm {norm})")));
    }
    let from = -Vector3::z();
    let to = Vector3::new(base[0], base[1], base[2]);
    let rot = nalgebra::Rotation3::rotation_between(&from, &to)
        .unwrap_or_else(|| nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI));
    let f1 = rot * -Vector3::x();
    let f2 = rot * Vector3::y();
    Ok(DMatrix::from_column_slice(3, 2, &[f1.x, f1.y, f1.z, f2.x, f2.y, f2.z]))
}

/// `U_bar = sum_i u_i (f_i o^T - o f_i^T)`.
pub fn sphere_generator(frame: &DMatrix<f64>, base: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
    let w = frame * u;
    &w * base.transpose() - base * w.transpose()
}

/// Rolling of the unit sphere on its affine tangent plane at `base`:
/// `R' = -U_bar R`, `s' = U_bar o`, `alpha = R^T o`.
pub fn roll_sphere(u: &ControlCurve, base: &DVector<f64>) -> Result<FramedRolling> {
    check_dim(2, u.dim())?;
    let frame = sphere_frame(base)?;
    let form = SignatureForm::euclidean(3);
    let grid = u.grid;
    let gen = |t: f64| sphere_generator(&frame, base, &u.at(t));
    let rot = flow_matrix_ode(|t| -gen(t), &DMatrix::identity(3, 3), &grid, Side::Left, Some(&form))?;
    let s = integrate_vector(|t| gen(t) * base, &DVector::zeros(3), &grid)?;
    let mut motions = Vec::with_capacity(grid.len());
    let mut alpha = Vec::with_capacity(grid.len());
    let mut alpha_hat = Vec::with_capacity(grid.len());
    for (r, sk) in rot.samples.iter().zip(&s) {
        let a = r.transpose() * base;
        let ah = base + sk;
        motions.push(RigidMotion::from_parts(r.clone(), &ah - r * &a)?);
        alpha.push(a);
        alpha_hat.push(ah);
    }
    let geometry = RiemannSphere;
    let tangent_m = TangentFramePath::new(grid, alpha.iter().map(|x| geometry.tangent_frame(x)).collect::<Result<_>>()?)?;
    let tangent_mhat = TangentFramePath::new(grid, vec![frame.clone(); grid.len()])?;
    let normal_mhat = TangentFramePath::new(grid, vec![geometry.normal_frame(base)?; grid.len()])?;
    let path = RollingMapPath::new(grid, form, motions, alpha, alpha_hat)?;
    Ok(FramedRolling { path, tangent_m, tangent_mhat, normal_mhat })
}

/// Base point `iota(0) = (0, -1, 0)` of the bundled sphere model.
pub fn model_base() -> DVector<f64> {
    -unit(3, 1)
}
