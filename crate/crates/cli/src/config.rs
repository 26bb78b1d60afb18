//! Run configuration files.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use symroll::{ControlCurve, CurveInput, TimeGrid};

use crate::error::{CliError, CliResult};

/// Residual threshold used when a config or `verify` does not set one.
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Intrinsic,
    #[default]
    Extrinsic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guess from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t0: f64,
    pub t1: f64,
    pub n_steps: usize,
}

impl GridSpec {
    pub fn grid(&self) -> CliResult<TimeGrid> {
        if self.n_steps < 2 {
            return Err(CliError::Usage(format!("n_steps must be at least 2, got {}", self.n_steps)));
        }
        Ok(TimeGrid::new(self.t0, self.t1, self.n_steps)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    /// Coefficients of `U(t)` in the model's `p` basis.
    Control,
    /// Chart coordinates of the curve at the grid nodes.
    Samples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub kind: CurveKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub parameters: serde_json::Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantParams {
    u: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HarmonicParams {
    a: Vec<f64>,
    b: Vec<f64>,
    omega: f64,
}

fn params<T: for<'de> Deserialize<'de>>(generator: &str, value: &serde_json::Value) -> CliResult<T> {
    serde_json::from_value(value.clone()).map_err(|e| CliError::Usage(format!("parameters of generator {generator}: {e}")))
}

fn check_len(what: &str, found: usize, expected: usize) -> CliResult<()> {
    if found != expected {
        return Err(CliError::Usage(format!("{what} has {found} components, the model needs {expected}")));
    }
    Ok(())
}

fn rows_to_vectors(rows: &[Vec<f64>], grid: TimeGrid, dim: usize) -> CliResult<Vec<DVector<f64>>> {
    if rows.len() != grid.len() {
        return Err(CliError::Usage(format!("curve data has {} rows, the grid has {} nodes", rows.len(), grid.len())));
    }
    rows.iter()
        .map(|r| {
            check_len("curve data row", r.len(), dim)?;
            Ok(DVector::from_column_slice(r))
        })
        .collect()
}

impl CurveSpec {
    /// Curve input on `grid`. Controls have `control_dim` components,
    /// samples `chart_dim`.
    pub fn input(&self, grid: TimeGrid, control_dim: usize, chart_dim: usize) -> CliResult<CurveInput> {
        match (self.kind, &self.data, &self.generator) {
            (_, Some(_), Some(_)) => Err(CliError::Usage("curve takes either data or a generator, not both".into())),
            (_, None, None) => Err(CliError::Usage("curve needs data or a generator".into())),
            (CurveKind::Control, Some(rows), None) => {
                Ok(CurveInput::Control(ControlCurve::from_samples(grid, rows_to_vectors(rows, grid, control_dim)?)?))
            }
            (CurveKind::Samples, Some(rows), None) => {
                Ok(CurveInput::Samples { grid, points: rows_to_vectors(rows, grid, chart_dim)? })
            }
            (CurveKind::Control, None, Some(name)) => Ok(CurveInput::Control(control_generator(name, &self.parameters, grid, control_dim)?)),
            (CurveKind::Samples, None, Some(name)) => {
                Err(CliError::Usage(format!("no sample generator {name}; sampled curves take explicit data")))
            }
        }
    }
}

/// Built-in controls: `zero`, `constant {u}`, and
/// `harmonic {a, b, omega}` for `a cos(omega t) + b sin(omega t)`.
fn control_generator(name: &str, value: &serde_json::Value, grid: TimeGrid, dim: usize) -> CliResult<ControlCurve> {
    match name {
        "zero" => Ok(ControlCurve::zero(grid, dim)),
        "constant" => {
            let p: ConstantParams = params(name, value)?;
            check_len("u", p.u.len(), dim)?;
            Ok(ControlCurve::constant(grid, DVector::from_vec(p.u)))
        }
        "harmonic" => {
            let p: HarmonicParams = params(name, value)?;
            check_len("a", p.a.len(), dim)?;
            check_len("b", p.b.len(), dim)?;
            let (a, b, w) = (DVector::from_vec(p.a), DVector::from_vec(p.b), p.omega);
            Ok(ControlCurve::from_fn(grid, move |t| &a * (w * t).cos() + &b * (w * t).sin()))
        }
        other => Err(CliError::Usage(format!("unknown control generator {other} (expected zero, constant or harmonic)"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Bundled model name or model file path.
    pub model: String,
    pub curve: CurveSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Residual threshold for the exit status.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config { path: path.to_path_buf(), reason: e.to_string() })
    }

    /// Reads a config. Relative model and output paths are taken relative
    /// to the config's directory when that file exists there.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read config {}", path.display()), e))?;
        let mut config = Self::parse(&text, path)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        if symroll::models::bundled_json(&config.model).is_none() {
            let rel = dir.join(&config.model);
            if Path::new(&config.model).is_relative() && rel.is_file() {
                config.model = rel.to_string_lossy().into_owned();
            }
        }
        if let Some(out) = &config.output {
            if out.is_relative() {
                config.output = Some(dir.join(out));
            }
        }
        Ok(config)
    }
}
