//! Trajectory files: one row per grid node with `t`, `alpha`, `alpha_hat`,
//! `R` (row-major) and `s`.
//!
//! CSV files start with the column line, followed by a `# ` line holding the
//! header as JSON. Numbers are written with 17 significant digits, which
//! round-trips every `f64` exactly, so CSV and JSON decode to the same bits.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use symroll::{RigidMotion, RollingMapPath, TimeGrid};

use crate::config::{Format, GridSpec, Mode};
use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "symroll-trajectory";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub model: String,
    pub mode: Mode,
    pub grid: GridSpec,
    /// Length of `alpha`, `alpha_hat` and `s`; `R` is `dim x dim`.
    pub dim: usize,
}

impl Header {
    pub fn new(model: String, mode: Mode, grid: TimeGrid, dim: usize) -> Self {
        Self {
            format: MAGIC.into(),
            version: FORMAT_VERSION,
            model,
            mode,
            grid: GridSpec { t0: grid.t0, t1: grid.t1, n_steps: grid.n_steps },
            dim,
        }
    }

    pub fn columns(&self) -> Vec<String> {
        let d = self.dim;
        // two-digit R indices stay unambiguous only below ten
        let r_name = |i: usize, j: usize| if d <= 10 { format!("R_{i}{j}") } else { format!("R_{i}_{j}") };
        std::iter::once("t".to_string())
            .chain((0..d).map(|i| format!("alpha_{i}")))
            .chain((0..d).map(|i| format!("alphahat_{i}")))
            .chain((0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| r_name(i, j)))
            .chain((0..d).map(|i| format!("s_{i}")))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub header: Header,
    pub t: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub alpha_hat: Vec<Vec<f64>>,
    /// `R` flattened row-major.
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl Trajectory {
    /// Rows from per-node `alpha`, `alpha_hat` and motions `(R, s)`.
    pub fn from_parts(
        header: Header,
        grid: TimeGrid,
        alpha: &[DVector<f64>],
        alpha_hat: &[DVector<f64>],
        r: &[DMatrix<f64>],
        s: &[DVector<f64>],
    ) -> Self {
        let vecs = |v: &[DVector<f64>]| v.iter().map(|x| x.as_slice().to_vec()).collect();
        Self {
            header,
            t: grid.nodes().collect(),
            alpha: vecs(alpha),
            alpha_hat: vecs(alpha_hat),
            r: r.iter().map(row_major).collect(),
            s: vecs(s),
        }
    }

    pub fn from_path(header: Header, path: &RollingMapPath) -> Self {
        let r: Vec<DMatrix<f64>> = path.motions.iter().map(|g| g.r().clone()).collect();
        let s: Vec<DVector<f64>> = path.motions.iter().map(|g| g.s().clone()).collect();
        Self::from_parts(header, path.grid, &path.alpha, &path.alpha_hat, &r, &s)
    }

    pub fn grid(&self) -> CliResult<TimeGrid> {
        self.header.grid.grid()
    }

    pub fn alpha_vectors(&self) -> Vec<DVector<f64>> {
        self.alpha.iter().map(|v| DVector::from_column_slice(v)).collect()
    }

    pub fn alpha_hat_vectors(&self) -> Vec<DVector<f64>> {
        self.alpha_hat.iter().map(|v| DVector::from_column_slice(v)).collect()
    }

    pub fn r_matrices(&self) -> Vec<DMatrix<f64>> {
        let d = self.header.dim;
        self.r.iter().map(|v| DMatrix::from_row_slice(d, d, v)).collect()
    }

    pub fn s_vectors(&self) -> Vec<DVector<f64>> {
        self.s.iter().map(|v| DVector::from_column_slice(v)).collect()
    }

    /// Rebuilds the rolling map for the given ambient form.
    pub fn rolling_path(&self, form: symroll::SignatureForm) -> CliResult<RollingMapPath> {
        let motions = self
            .r_matrices()
            .into_iter()
            .zip(self.s_vectors())
            .map(|(r, s)| RigidMotion::from_parts(r, s))
            .collect::<symroll::Result<Vec<_>>>()?;
        Ok(RollingMapPath::new(self.grid()?, form, motions, self.alpha_vectors(), self.alpha_hat_vectors())?)
    }

    /// Checks the header against the rows.
    pub fn validate(&self) -> CliResult<()> {
        let h = &self.header;
        if h.format != MAGIC {
            return Err(CliError::Malformed(format!("format tag {:?}, expected {MAGIC:?}", h.format)));
        }
        if h.version != FORMAT_VERSION {
            return Err(CliError::Malformed(format!("unsupported version {}", h.version)));
        }
        if h.dim == 0 {
            return Err(CliError::Malformed("dim must be positive".into()));
        }
        let grid = self.grid().map_err(|e| CliError::Malformed(format!("grid: {e}")))?;
        let rows = grid.len();
        let d = h.dim;
        let columns: [(&str, &Vec<Vec<f64>>, usize); 4] =
            [("alpha", &self.alpha, d), ("alpha_hat", &self.alpha_hat, d), ("R", &self.r, d * d), ("s", &self.s, d)];
        if self.t.len() != rows {
            return Err(CliError::Malformed(format!("{} rows, header declares {rows}", self.t.len())));
        }
        for (name, data, width) in columns {
            if data.len() != rows {
                return Err(CliError::Malformed(format!("{name} has {} rows, header declares {rows}", data.len())));
            }
            if let Some(k) = data.iter().position(|r| r.len() != width) {
                return Err(CliError::Malformed(format!("{name} row {k} has {} entries, expected {width}", data[k].len())));
            }
        }
        let scale = grid.t0.abs().max(grid.t1.abs()).max(1.0);
        for (k, (t, node)) in self.t.iter().zip(grid.nodes()).enumerate() {
            if (t - node).abs() > 1e-12 * scale {
                return Err(CliError::Malformed(format!("t at row {k} is {t}, grid node is {node}")));
            }
        }
        let finite = |v: &Vec<Vec<f64>>| v.iter().flatten().all(|x| x.is_finite());
        if !columns.iter().all(|(_, data, _)| finite(data)) {
            return Err(CliError::Malformed("non-finite values".into()));
        }
        Ok(())
    }

    fn row(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.t[k])
            .chain(self.alpha[k].iter().copied())
            .chain(self.alpha_hat[k].iter().copied())
            .chain(self.r[k].iter().copied())
            .chain(self.s[k].iter().copied())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.columns().join(",");
        out.push('\n');
        out.push_str("# ");
        out.push_str(&serde_json::to_string(&self.header).expect("header serializes"));
        out.push('\n');
        for k in 0..self.t.len() {
            let mut first = true;
            for x in self.row(k) {
                if !first {
                    out.push(',');
                }
                first = false;
                write!(out, "{x:.16e}").expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> CliResult<Self> {
        // a cut inside the last number would still parse
        if !text.ends_with('\n') {
            return Err(CliError::Malformed("truncated: no final newline".into()));
        }
        let mut lines = text.lines();
        let columns_line = lines.next().ok_or_else(|| CliError::Malformed("empty file".into()))?;
        let header_line = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| CliError::Malformed("missing '# ' header line".into()))?;
        let header: Header = serde_json::from_str(header_line).map_err(|e| CliError::Malformed(format!("header: {e}")))?;
        let expected = header.columns();
        if columns_line.split(',').map(str::trim).ne(expected.iter().map(String::as_str)) {
            return Err(CliError::Malformed(format!("column line does not match dim {}", header.dim)));
        }
        let d = header.dim;
        let mut traj = Trajectory { header, t: Vec::new(), alpha: Vec::new(), alpha_hat: Vec::new(), r: Vec::new(), s: Vec::new() };
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let values = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Malformed(format!("row {k}: {e}")))?;
            if values.len() != expected.len() {
                return Err(CliError::Malformed(format!("row {k} has {} fields, expected {}", values.len(), expected.len())));
            }
            let (t, rest) = values.split_first().expect("non-empty row");
            let (alpha, rest) = rest.split_at(d);
            let (alpha_hat, rest) = rest.split_at(d);
            let (r, s) = rest.split_at(d * d);
            traj.t.push(*t);
            traj.alpha.push(alpha.to_vec());
            traj.alpha_hat.push(alpha_hat.to_vec());
            traj.r.push(r.to_vec());
            traj.s.push(s.to_vec());
        }
        traj.validate()?;
        Ok(traj)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trajectory serializes")
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let traj: Trajectory = serde_json::from_str(text).map_err(|e| CliError::Malformed(e.to_string()))?;
        traj.validate()?;
        Ok(traj)
    }

    /// Decodes either format, telling them apart by the first character.
    pub fn decode(text: &str) -> CliResult<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_csv(text)
        }
    }

    pub fn encode(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))?;
        Self::decode(&text)
    }

    pub fn write(&self, path: &Path, format: Format) -> CliResult<()> {
        std::fs::write(path, self.encode(format)).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
    }
}
