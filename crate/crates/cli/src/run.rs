//! Computing rollings for a model and re-checking stored trajectories.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use symroll::homogeneous::{extrinsic_roll, intrinsic_roll};
use symroll::models::{roll_stiefel, StiefelShape};
use symroll::rolling::{residual_suite, RollingTriple};
use symroll::util::{lstsq, pinv_full_rank};
use symroll::{CartanModel, CurveInput, NormalStrategy, TangentFramePath};

use crate::config::Mode;
use crate::error::{CliError, CliResult};
use crate::trajectory::{Header, Trajectory};

/// Rolls `model` along `input` and packs the result as trajectory rows.
///
/// Extrinsic rows hold the rolling map in the ambient space. Intrinsic rows
/// hold chart coordinates, `R = A(t)` in chart coordinates and
/// `s = alpha_hat - A alpha`.
pub fn compute(model: &CartanModel, model_ref: &str, input: &CurveInput, mode: Mode) -> CliResult<Trajectory> {
    let grid = input.grid();
    match mode {
        Mode::Extrinsic => {
            let g = model.geometry();
            let path = if g.closed_form_normal() {
                extrinsic_roll(model, input, NormalStrategy::ClosedForm)?.rolling.path
            } else if g.id() == "stiefel" {
                let shape = StiefelShape::with_base(model.description.base_point.to_matrix()?)?;
                roll_stiefel(&shape, input)?.rolling.path
            } else {
                extrinsic_roll(model, input, NormalStrategy::FrameMatching)?.rolling.path
            };
            let header = Header::new(model_ref.into(), mode, grid, path.dim());
            Ok(Trajectory::from_path(header, &path))
        }
        Mode::Intrinsic => {
            let out = intrinsic_roll(model, input)?;
            let alpha = &out.triple.alpha;
            let alpha_hat = &out.triple.alpha_hat;
            let s: Vec<DVector<f64>> = out.a_chart.iter().zip(alpha.iter().zip(alpha_hat)).map(|(a, (x, y))| y - a * x).collect();
            let header = Header::new(model_ref.into(), mode, grid, model.chart_dim());
            Ok(Trajectory::from_parts(header, grid, alpha, alpha_hat, &out.a_chart, &s))
        }
    }
}

/// Named residual maxima for a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub model: String,
    pub mode: Mode,
    pub n_steps: usize,
    pub residuals: Vec<(String, f64)>,
    /// Intrinsic only: nodes where `det A <= 0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientation_failures: Option<usize>,
    pub max: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Summary {
    pub fn to_json(&self) -> serde_json::Value {
        let residuals: serde_json::Map<String, serde_json::Value> =
            self.residuals.iter().map(|(k, v)| (k.clone(), serde_json::json!(v))).collect();
        let mut out = serde_json::json!({
            "model": self.model,
            "mode": self.mode,
            "n_steps": self.n_steps,
            "residuals": residuals,
            "max": self.max,
            "tolerance": self.tolerance,
            "pass": self.pass,
        });
        if let Some(n) = self.orientation_failures {
            out["orientation_failures"] = serde_json::json!(n);
        }
        out
    }
}

/// Reruns the residuals on stored rows, rebuilding frames from the model.
pub fn evaluate(model: &CartanModel, traj: &Trajectory, tolerance: f64) -> CliResult<Summary> {
    traj.validate()?;
    let (residuals, orientation_failures) = match traj.header.mode {
        Mode::Extrinsic => (extrinsic_residuals(model, traj)?, None),
        Mode::Intrinsic => {
            let (r, failures) = intrinsic_residuals(model, traj)?;
            (r, Some(failures))
        }
    };
    let max = residuals.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let pass = max <= tolerance && orientation_failures.unwrap_or(0) == 0;
    Ok(Summary {
        model: traj.header.model.clone(),
        mode: traj.header.mode,
        n_steps: traj.header.grid.n_steps,
        residuals,
        orientation_failures,
        max,
        tolerance,
        pass,
    })
}

fn check_dim(what: &str, expected: usize, found: usize) -> CliResult<()> {
    if expected != found {
        return Err(CliError::Malformed(format!("{what} dimension {found} does not match the model ({expected})")));
    }
    Ok(())
}

fn extrinsic_residuals(model: &CartanModel, traj: &Trajectory) -> CliResult<Vec<(String, f64)>> {
    check_dim("ambient", model.ambient_form.dim(), traj.header.dim)?;
    let g = model.geometry();
    let path = traj.rolling_path(model.ambient_form.clone())?;
    let grid = path.grid;
    let tangent_m = TangentFramePath::new(grid, path.alpha.iter().map(|x| g.tangent_frame(x)).collect::<symroll::Result<_>>()?)?;
    let t_hat = g.tangent_frame(&model.embedded_base)?;
    let n_hat = g.normal_frame(&model.embedded_base)?;
    let tangent_mhat = TangentFramePath::new(grid, vec![t_hat; grid.len()])?;
    let normal_mhat = TangentFramePath::new(grid, vec![n_hat; grid.len()])?;
    let report = residual_suite(&path, &tangent_m, &tangent_mhat, &normal_mhat)?;
    Ok(report.entries().iter().map(|(k, v)| (k.to_string(), *v)).collect())
}

/// Projects `prev` onto `T_m M` in chart coordinates (the tangent space
/// pulled back through the embedding). Carrying a frame along the curve this
/// way keeps its orientation continuous.
fn carried_tangent_frame(model: &CartanModel, m: &DVector<f64>, prev: &DMatrix<f64>) -> CliResult<DMatrix<f64>> {
    let g = model.geometry();
    let jac = g.embed_jacobian(m)?;
    let ambient = g.tangent_frame(&g.embed(m)?)?;
    let basis = lstsq(&jac, &ambient, 1e-12, "embedding Jacobian")?;
    let coeffs = lstsq(&basis, prev, 1e-12, "tangent basis")?;
    Ok(basis * coeffs)
}

fn intrinsic_residuals(model: &CartanModel, traj: &Trajectory) -> CliResult<(Vec<(String, f64)>, usize)> {
    let m = model.chart_dim();
    check_dim("chart", m, traj.header.dim)?;
    let g = model.geometry();
    let grid = traj.grid()?;
    let alpha = traj.alpha_vectors();
    let alpha_hat = traj.alpha_hat_vectors();
    let a_chart = traj.r_matrices();
    let s = traj.s_vectors();
    let square = m == model.manifold_dim();
    let d_pinv = pinv_full_rank(&model.d_e_pi, 1e-12, "d_e pi")?;
    let mut a = Vec::with_capacity(alpha.len());
    let mut frame = Vec::with_capacity(alpha.len());
    let mut metric = Vec::with_capacity(alpha.len());
    let mut consistency: f64 = 0.0;
    let mut carried = model.d_e_pi.clone();
    for k in 0..alpha.len() {
        metric.push(g.metric(&alpha[k])?);
        consistency = consistency.max((&alpha_hat[k] - &a_chart[k] * &alpha[k] - &s[k]).amax());
        if square {
            a.push(a_chart[k].clone());
            frame.push(DMatrix::identity(m, m));
        } else {
            carried = carried_tangent_frame(model, &alpha[k], &carried)?;
            a.push(&d_pinv * &a_chart[k] * &carried);
            frame.push(carried.clone());
        }
    }
    let frame_hat = if square { DMatrix::identity(m, m) } else { model.d_e_pi.clone() };
    let metric_hat = g.metric(&model.base_point)?;
    let n = alpha.len();
    // alpha starts at o, its development at the origin of T_o M
    let start = (&alpha[0] - &model.base_point).amax().max(alpha_hat[0].amax());
    let triple = RollingTriple::new(grid, alpha, alpha_hat, a, frame, vec![frame_hat; n], metric, vec![metric_hat; n])?;
    let r = triple.residuals()?;
    let residuals = vec![
        ("rolling_point".to_string(), consistency),
        ("start_point".to_string(), start),
        ("no_slip".to_string(), r.velocity),
        ("isometry".to_string(), r.isometry),
    ];
    Ok((residuals, r.orientation_failures))
}
