//! Concrete geometries: the hyperbolic disc and hyperboloid, the Riemann
//! sphere, pseudo-orthogonal groups and Stiefel manifolds.
//!
//! Complex 2x2 groups (SU(1,1), SU(2)) are realized as real 4x4 matrices by
//! replacing each entry `x + iy` with the block `[[x, -y], [y, x]]`.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::homogeneous::{Geometry, ModelDescription};

pub mod hyperbolic;
pub mod pseudo_orth;
pub mod sphere;
pub mod stiefel;

pub use hyperbolic::{ad_su11, embed_hyperbolic, hyperbolic_lift, roll_hyperboloid, HyperbolicLift, MoebiusBranch, MoebiusElement};
pub use pseudo_orth::{roll_pseudo_orthogonal, PseudoOrthParams, PseudoOrthRolling};
pub use sphere::{embed_sphere, roll_sphere, sphere_frame, sphere_generator};
pub use stiefel::{roll_stiefel, stiefel_omega, stiefel_subspaces, StiefelOperator, StiefelRolling, StiefelShape, StiefelSubspaces};

pub type C64 = Complex<f64>;

/// Names of the bundled model files.
pub const BUNDLED_MODELS: [&str; 8] = [
    "hyperbolic_disc",
    "riemann_sphere",
    "so_1_2",
    "so_2_1",
    "so_3_0",
    "so_2_2",
    "stiefel_3_1",
    "stiefel_4_2",
];

fn bundled_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "hyperbolic_disc" => include_str!("../../models/hyperbolic_disc.json"),
        "riemann_sphere" => include_str!("../../models/riemann_sphere.json"),
        "so_1_2" => include_str!("../../models/so_1_2.json"),
        "so_2_1" => include_str!("../../models/so_2_1.json"),
        "so_3_0" => include_str!("../../models/so_3_0.json"),
        "so_2_2" => include_str!("../../models/so_2_2.json"),
        "stiefel_3_1" => include_str!("../../models/stiefel_3_1.json"),
        "stiefel_4_2" => include_str!("../../models/stiefel_4_2.json"),
        _ => return None,
    })
}

/// Parsed bundled model file, or `None` for unknown names.
pub fn bundled_description(name: &str) -> Option<Result<ModelDescription>> {
    bundled_text(name).map(|text| serde_json::from_str(text).map_err(Error::from))
}

/// Raw JSON of a bundled model file.
pub fn bundled_json(name: &str) -> Option<&'static str> {
    bundled_text(name)
}

/// Programmatic description matching each bundled file.
pub fn builtin_description(name: &str) -> Option<ModelDescription> {
    Some(match name {
        "hyperbolic_disc" => hyperbolic::description(),
        "riemann_sphere" => sphere::description(),
        "so_1_2" => PseudoOrthParams::identity(1, 2).ok()?.description(name),
        "so_2_1" => PseudoOrthParams::identity(2, 1).ok()?.description(name),
        "so_3_0" => PseudoOrthParams::identity(3, 0).ok()?.description(name),
        "so_2_2" => PseudoOrthParams::identity(2, 2).ok()?.description(name),
        "stiefel_3_1" => StiefelShape::new(3, 1).ok()?.description(name),
        "stiefel_4_2" => StiefelShape::new(4, 2).ok()?.description(name),
        _ => return None,
    })
}

/// Geometry implementation for a description's `builtin:<id>` embedding.
pub fn geometry_for(desc: &ModelDescription) -> Result<Arc<dyn Geometry>> {
    let id = desc.builtin_id()?;
    let expect_signs = |signs: &[f64]| -> Result<()> {
        if desc.j_signs != signs {
            return Err(Error::InvalidInput(format!("builtin:{id} needs J_signs {signs:?}, got {:?}", desc.j_signs)));
        }
        Ok(())
    };
    let geometry: Arc<dyn Geometry> = match id {
        "hyperboloid12" => {
            expect_signs(&[-1.0, 1.0, 1.0])?;
            Arc::new(hyperbolic::HyperbolicDisc)
        }
        "riemann_sphere" => {
            expect_signs(&[1.0, 1.0, 1.0])?;
            Arc::new(sphere::RiemannSphere)
        }
        "pseudo_orth" => {
            let p0 = desc.base_point.to_matrix()?;
            Arc::new(pseudo_orth::PseudoOrthGeometry::new(PseudoOrthParams::from_signs(&desc.j_signs, p0)?))
        }
        "stiefel" => {
            let e = desc.base_point.to_matrix()?;
            if desc.j_signs.len() != e.nrows() || desc.j_signs.iter().any(|s| *s != 1.0) {
                return Err(Error::InvalidInput("builtin:stiefel needs J_signs of n ones".into()));
            }
            Arc::new(stiefel::StiefelGeometry::new(StiefelShape::with_base(e)?))
        }
        other => return Err(Error::InvalidInput(format!("unknown builtin embedding {other}"))),
    };
    if let Some(gs) = &desc.group_signs {
        if gs.as_slice() != geometry.group_form().signs() {
            return Err(Error::InvalidInput(format!(
                "group_signs {gs:?} do not match builtin:{id} ({:?})",
                geometry.group_form().signs()
            )));
        }
    }
    Ok(geometry)
}

/// Real 4x4 realization of a complex 2x2 matrix.
pub fn realize(m: &[[C64; 2]; 2]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(4, 4);
    for r in 0..2 {
        for c in 0..2 {
            let z = m[r][c];
            out[(2 * r, 2 * c)] = z.re;
            out[(2 * r, 2 * c + 1)] = -z.im;
            out[(2 * r + 1, 2 * c)] = z.im;
            out[(2 * r + 1, 2 * c + 1)] = z.re;
        }
    }
    out
}

/// Complex entries read back from a 4x4 realization.
pub fn complex_entries(q: &DMatrix<f64>) -> [[C64; 2]; 2] {
    let at = |r: usize, c: usize| C64::new(q[(2 * r, 2 * c)], q[(2 * r + 1, 2 * c)]);
    [[at(0, 0), at(0, 1)], [at(1, 0), at(1, 1)]]
}

pub(crate) fn chart_complex(m: &DVector<f64>) -> C64 {
    C64::new(m[0], m[1])
}

pub(crate) fn complex_chart(z: C64) -> DVector<f64> {
    DVector::from_vec(vec![z.re, z.im])
}

/// Matrix of multiplication by `w` on `R^2 = C`.
pub(crate) fn complex_mult(w: C64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[w.re, -w.im, w.im, w.re])
}

/// Fractional linear action `z -> (a z + b) / (c z + d)` read from a 4x4
/// realization.
pub(crate) fn moebius(q: &DMatrix<f64>, z: C64) -> Result<C64> {
    let [[a, b], [c, d]] = complex_entries(q);
    let den = c * z + d;
    if den.norm() < 1e-300 {
        return Err(Error::Constraint("point mapped to infinity".into()));
    }
    Ok((a * z + b) / den)
}

pub(crate) fn moebius_derivative(q: &DMatrix<f64>, z: C64) -> Result<C64> {
    let [[a, b], [c, d]] = complex_entries(q);
    let den = c * z + d;
    if den.norm() < 1e-300 {
        return Err(Error::Constraint("point mapped to infinity".into()));
    }
    Ok((a * d - b * c) / (den * den))
}

/// Velocity of `z` under the flow of `X`: `x01 + (x00 - x11) z - x10 z^2`.
pub(crate) fn moebius_field(x: &DMatrix<f64>, z: C64) -> C64 {
    let [[x00, x01], [x10, x11]] = complex_entries(x);
    x01 + (x00 - x11) * z - x10 * z * z
}

/// Unit vector `e_i` in `R^n`.
pub(crate) fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

/// `E_ij` of size `rows x cols`.
pub(crate) fn elementary(rows: usize, cols: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    m[(i, j)] = 1.0;
    m
}
