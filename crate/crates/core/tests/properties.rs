//! Property tests on the public API: SE(V) algebra, reprojection,
//! quadrature helpers, rolling-map inversion and composition, model files.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use symroll::integrate::{differentiate, interpolate, reproject};
use symroll::linalg_semi::{indefinite_ip, is_oriented_isometry, se_act, se_compose, se_inverse};
use symroll::models::{bundled_json, roll_hyperboloid, roll_sphere, sphere::model_base, BUNDLED_MODELS};
use symroll::rolling::{compose_rolling, invert_rolling};
use symroll::{CartanModel, ControlCurve, Error, RigidMotion, SignatureForm, TimeGrid};

/// `exp` of a J-skew matrix built from `coeffs`: an element of `SO(V)`.
fn isometry(form: &SignatureForm, coeffs: &[f64]) -> DMatrix<f64> {
    let n = form.dim();
    let mut a = DMatrix::zeros(n, n);
    let mut c = coeffs.iter().cycle();
    for i in 0..n {
        for j in (i + 1)..n {
            a[(i, j)] = *c.next().unwrap();
        }
    }
    // X = J (A - A^T) satisfies X^T J + J X = 0
    let skew = &a - a.transpose();
    form.apply_rows(&skew).exp()
}

fn motion_strategy() -> impl Strategy<Value = (SignatureForm, Vec<RigidMotion>)> {
    (3usize..=8)
        .prop_flat_map(|n| {
            (
                Just(n),
                0usize..n,
                prop::collection::vec(prop::collection::vec(-0.8f64..0.8, 36), 3),
                prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), 3),
            )
        })
        .prop_map(|(n, q, coeffs, shifts)| {
            let form = SignatureForm::from_pq(n - q, q);
            let motions = coeffs
                .iter()
                .zip(shifts)
                .map(|(c, s)| RigidMotion::from_parts(isometry(&form, c), DVector::from_vec(s)).unwrap())
                .collect();
            (form, motions)
        })
}

fn scale(g: &RigidMotion) -> f64 {
    1.0 + g.r().amax() + g.s().amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    #[test]
    fn composition_is_associative((_form, g) in motion_strategy()) {
        let left = se_compose(&se_compose(&g[0], &g[1]).unwrap(), &g[2]).unwrap();
        let right = se_compose(&g[0], &se_compose(&g[1], &g[2]).unwrap()).unwrap();
        let s = scale(&g[0]) * scale(&g[1]) * scale(&g[2]);
        prop_assert!(left.max_abs_diff(&right) <= 1e-14 * s, "{}", left.max_abs_diff(&right));
    }

    #[test]
    fn inverse_cancels_on_both_sides((_form, g) in motion_strategy()) {
        let n = g[0].dim();
        let inv = se_inverse(&g[0]).unwrap();
        let id = RigidMotion::identity(n);
        let s = scale(&g[0]) * scale(&inv);
        prop_assert!(se_compose(&inv, &g[0]).unwrap().max_abs_diff(&id) <= 1e-13 * s);
        prop_assert!(se_compose(&g[0], &inv).unwrap().max_abs_diff(&id) <= 1e-13 * s);
        let twice = se_inverse(&inv).unwrap();
        prop_assert!(twice.max_abs_diff(&g[0]) <= 1e-13 * s);
    }

    #[test]
    fn action_respects_composition((_form, g) in motion_strategy(), v in prop::collection::vec(-2.0f64..2.0, 8)) {
        let n = g[0].dim();
        let v = DVector::from_column_slice(&v[..n]);
        let lhs = se_act(&se_compose(&g[0], &g[1]).unwrap(), &v).unwrap();
        let rhs = se_act(&g[0], &se_act(&g[1], &v).unwrap()).unwrap();
        prop_assert!((lhs - rhs).amax() <= 1e-13 * scale(&g[0]) * scale(&g[1]) * 3.0);
    }

    #[test]
    fn products_stay_in_the_identity_component((form, g) in motion_strategy()) {
        let r = se_compose(&g[0], &g[1]).unwrap().r().clone();
        let check = is_oriented_isometry(&r, &form, 1e-10 * r.amax().powi(2));
        prop_assert!(check.accepted, "{check:?}");
    }

    #[test]
    fn isometries_preserve_the_scalar_product(
        (form, g) in motion_strategy(),
        x in prop::collection::vec(-1.0f64..1.0, 8),
        y in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let n = form.dim();
        let (x, y) = (DVector::from_column_slice(&x[..n]), DVector::from_column_slice(&y[..n]));
        let r = g[0].r();
        let before = indefinite_ip(&form, &x, &y).unwrap();
        let after = indefinite_ip(&form, &(r * &x), &(r * &y)).unwrap();
        prop_assert!((before - after).abs() <= 1e-12 * r.amax().powi(2) * 8.0);
    }

    #[test]
    fn reprojection_is_idempotent_and_lands_on_the_group(
        (form, g) in motion_strategy(),
        noise in prop::collection::vec(-1e-6f64..1e-6, 64),
    ) {
        let n = form.dim();
        let r = g[0].r();
        let noisy = r + DMatrix::from_column_slice(n, n, &noise[..n * n]);
        let once = reproject(&noisy, &form).unwrap();
        let twice = reproject(&once, &form).unwrap();
        let size = r.amax().powi(2);
        prop_assert!(form.isometry_residual(&once) <= 1e-11 * size);
        prop_assert!((&twice - &once).amax() <= 1e-12 * size);
        // the correction is of the size of the perturbation
        prop_assert!((&once - r).amax() <= 1e-4 * size);
    }

    #[test]
    fn five_point_differences_are_exact_on_quartics(c in prop::collection::vec(-2.0f64..2.0, 5), n in 6usize..40) {
        let grid = TimeGrid::new(-1.0, 1.5, n).unwrap();
        let p = |t: f64| c[0] + c[1] * t + c[2] * t * t + c[3] * t.powi(3) + c[4] * t.powi(4);
        let dp = |t: f64| c[1] + 2.0 * c[2] * t + 3.0 * c[3] * t * t + 4.0 * c[4] * t.powi(3);
        let samples: Vec<f64> = grid.nodes().map(p).collect();
        let d = differentiate(&samples, grid.h()).unwrap();
        for (k, t) in grid.nodes().enumerate() {
            prop_assert!((d[k] - dp(t)).abs() <= 1e-9 / grid.h(), "node {k}");
        }
    }

    #[test]
    fn cubic_interpolation_is_exact_on_cubics(c in prop::collection::vec(-2.0f64..2.0, 4), t in 0.0f64..2.0) {
        let grid = TimeGrid::new(0.0, 2.0, 9).unwrap();
        let p = |t: f64| c[0] + c[1] * t + c[2] * t * t + c[3] * t.powi(3);
        let samples: Vec<f64> = grid.nodes().map(p).collect();
        prop_assert!((interpolate(&grid, &samples, t) - p(t)).abs() <= 1e-12);
    }
}

fn smooth_control(grid: TimeGrid, phase: f64) -> ControlCurve {
    ControlCurve::from_fn(grid, move |t| DVector::from_vec(vec![(t + phase).cos(), 0.5 * (2.0 * t - phase).sin()]))
}

#[test]
fn inverting_a_rolling_twice_returns_it() {
    let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
    for phase in [0.0, 0.7, 2.1] {
        let path = roll_sphere(&smooth_control(grid, phase), &model_base()).unwrap().path;
        let back = invert_rolling(&invert_rolling(&path).unwrap()).unwrap();
        assert_eq!(back.alpha, path.alpha);
        assert_eq!(back.alpha_hat, path.alpha_hat);
        let gap = back.motions.iter().zip(&path.motions).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max);
        assert!(gap < 1e-13, "{gap}");
    }
}

#[test]
fn a_rolling_composed_with_its_inverse_is_trivial() {
    let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
    let path = roll_hyperboloid(&smooth_control(grid, 0.3)).unwrap().path;
    let loop_back = compose_rolling(&path, &invert_rolling(&path).unwrap()).unwrap();
    assert_eq!(loop_back.alpha_hat, path.alpha);
    let id = RigidMotion::identity(3);
    let gap = loop_back.motions.iter().map(|g| g.max_abs_diff(&id)).fold(0.0, f64::max);
    assert!(gap < 1e-12, "{gap}");
}

#[test]
fn composing_mismatched_rollings_is_rejected() {
    let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
    let a = roll_sphere(&smooth_control(grid, 0.0), &model_base()).unwrap().path;
    let b = roll_sphere(&smooth_control(grid, 1.0), &model_base()).unwrap().path;
    assert!(matches!(compose_rolling(&a, &b), Err(Error::InvalidInput(_))));
    let coarse = roll_sphere(&smooth_control(TimeGrid::new(0.0, 1.0, 25).unwrap(), 0.0), &model_base()).unwrap().path;
    assert!(matches!(compose_rolling(&a, &coarse), Err(Error::InvalidGrid(_))));
}

#[test]
fn model_files_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    for name in BUNDLED_MODELS {
        let path = dir.path().join(format!("{name}.json"));
        std::fs::write(&path, bundled_json(name).unwrap()).unwrap();
        let from_file = CartanModel::load(&path).unwrap();
        let bundled = CartanModel::resolve(name).unwrap();
        assert_eq!(from_file.description, bundled.description, "{name}");
        let by_path = CartanModel::resolve(path.to_str().unwrap()).unwrap();
        assert_eq!(by_path.manifold_dim(), bundled.manifold_dim());
    }
}

#[test]
fn broken_model_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = bundled_json("riemann_sphere").unwrap();

    let truncated = dir.path().join("truncated.json");
    std::fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert!(CartanModel::load(&truncated).is_err());

    // a basis that is no longer closed under brackets
    let mut desc: serde_json::Value = serde_json::from_str(text).unwrap();
    desc["basis"][0][0][1] = serde_json::json!(0.3);
    let skewed = dir.path().join("skewed.json");
    std::fs::write(&skewed, desc.to_string()).unwrap();
    assert!(CartanModel::load(&skewed).is_err());

    let mut desc: serde_json::Value = serde_json::from_str(text).unwrap();
    desc["embedding"] = serde_json::json!("builtin:klein_bottle");
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, desc.to_string()).unwrap();
    assert!(CartanModel::load(&unknown).is_err());

    assert!(matches!(CartanModel::resolve("banana"), Err(Error::UnknownModel(name)) if name == "banana"));
}

#[test]
fn every_bundled_model_is_equivariant() {
    for name in BUNDLED_MODELS {
        let model = CartanModel::resolve(name).unwrap();
        let defect = model.equivariance_defect(6).unwrap();
        assert!(defect < 1e-9, "{name}: {defect}");
    }
}

#[test]
fn sphere_geodesic_returns_after_a_full_turn() {
    // a great circle of length 2 pi: the ball is back at its start and has
    // turned by 2 pi about the axis, so R(T) = I
    let grid = TimeGrid::new(0.0, 2.0 * PI, 2000).unwrap();
    let out = roll_sphere(&ControlCurve::constant(grid, DVector::from_vec(vec![1.0, 0.0])), &model_base()).unwrap();
    let last = out.path.motions.last().unwrap();
    assert!((last.r() - DMatrix::identity(3, 3)).amax() < 1e-9);
    assert!((out.path.alpha.last().unwrap() - &out.path.alpha[0]).amax() < 1e-9);
    let travelled = (out.path.alpha_hat.last().unwrap() - &out.path.alpha_hat[0]).norm();
    assert!((travelled - 2.0 * PI).abs() < 1e-9);
}
