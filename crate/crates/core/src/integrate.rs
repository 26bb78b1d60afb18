//! Fixed-step integration on uniform grids.
//!
//! Matrix flows use the classical fourth-order Runge-Kutta step, optionally
//! followed by reprojection onto the J-orthogonal group. Vector quadrature
//! uses Simpson's rule per step. Grid-aligned derivatives use fourth-order
//! finite-difference stencils, and off-grid evaluation of sampled data uses
//! local cubic Lagrange interpolation.

use std::ops::{Add, Mul};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg_semi::SignatureForm;

/// Uniform grid on `[t0, t1]` with `n_steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) || t1 <= t0 {
            return Err(Error::InvalidGrid(format!("need t1 > t0, got [{t0}, {t1}]")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        Ok(Self { t0, t1, n_steps })
    }

    pub fn h(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps as f64
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t1
        } else {
            self.t0 + k as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |k| self.node(k))
    }

    /// Grid with half as many steps on the same interval.
    pub fn coarsened(&self) -> Result<Self> {
        if self.n_steps % 2 != 0 || self.n_steps < 2 {
            return Err(Error::InvalidGrid(format!("cannot halve {} steps", self.n_steps)));
        }
        Self::new(self.t0, self.t1, self.n_steps / 2)
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.n_steps == other.n_steps
            && (self.t0 - other.t0).abs() <= 1e-12 * (1.0 + self.t0.abs())
            && (self.t1 - other.t1).abs() <= 1e-12 * (1.0 + self.t1.abs())
    }

    pub(crate) fn check_samples(&self, count: usize) -> Result<()> {
        check_dim(self.len(), count)
    }
}

/// Matrix samples, one per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPath {
    pub grid: TimeGrid,
    pub samples: Vec<DMatrix<f64>>,
}

impl OperatorPath {
    pub fn new(grid: TimeGrid, samples: Vec<DMatrix<f64>>) -> Result<Self> {
        grid.check_samples(samples.len())?;
        Ok(Self { grid, samples })
    }

    pub fn last(&self) -> &DMatrix<f64> {
        self.samples.last().expect("paths have at least two nodes")
    }

    /// Cubic interpolation between nodes.
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        interpolate(&self.grid, &self.samples, t)
    }
}

/// Which side the generator multiplies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `X' = L(t) X`
    Left,
    /// `X' = X L(t)`
    Right,
}

const REPROJECT_MAX_ITER: usize = 50;
const REPROJECT_TOL: f64 = 1e-12;

/// Pulls `x` onto the J-orthogonal group by the iteration
/// `X <- (X + J X^{-T} J) / 2`.
///
/// Converges quadratically from inputs near the group. The stopping rule is a
/// residual `|X^T J X - J|` of at most `1e-12` (scaled by `|X|^2` for large
/// boosts) or an update at the roundoff level.
pub fn reproject(x: &DMatrix<f64>, form: &SignatureForm) -> Result<DMatrix<f64>> {
    reproject_counted(x, form).map(|(m, _)| m)
}

/// [`reproject`], also returning the number of iterations performed.
pub fn reproject_counted(x: &DMatrix<f64>, form: &SignatureForm) -> Result<(DMatrix<f64>, usize)> {
    check_dim(form.dim(), x.nrows())?;
    check_dim(form.dim(), x.ncols())?;
    let mut current = x.clone();
    let mut residual = form.isometry_residual(&current);
    for iter in 0..REPROJECT_MAX_ITER {
        let scale = current.amax().max(1.0);
        if residual <= REPROJECT_TOL * scale * scale {
            return Ok((current, iter));
        }
        let inv_t = current
            .transpose()
            .try_inverse()
            .ok_or(Error::Singular("reproject"))?;
        let mirrored = form.apply_rows(&form.apply_rows(&inv_t).transpose()).transpose();
        let next = (&current + mirrored) * 0.5;
        let step = (&next - &current).amax();
        current = next;
        residual = form.isometry_residual(&current);
        if !residual.is_finite() {
            break;
        }
        if step <= 8.0 * f64::EPSILON * scale && residual <= 1e3 * REPROJECT_TOL * scale * scale {
            return Ok((current, iter + 1));
        }
    }
    Err(Error::ReprojectionFailed { iterations: REPROJECT_MAX_ITER, residual })
}

fn rk4_matrix_step<F>(f: &F, t: f64, h: f64, x: &DMatrix<f64>) -> DMatrix<f64>
where
    F: Fn(f64, &DMatrix<f64>) -> DMatrix<f64>,
{
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// RK4 for a general matrix ODE `X' = f(t, X)`.
pub fn integrate_matrix_ode<F>(
    f: F,
    x0: &DMatrix<f64>,
    grid: &TimeGrid,
    reproject_form: Option<&SignatureForm>,
) -> Result<OperatorPath>
where
    F: Fn(f64, &DMatrix<f64>) -> DMatrix<f64>,
{
    if let Some(form) = reproject_form {
        check_dim(form.dim(), x0.nrows())?;
    }
    let h = grid.h();
    let mut samples = Vec::with_capacity(grid.len());
    samples.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..grid.n_steps {
        let t = grid.node(k);
        let probe = f(t, &x);
        if probe.shape() != x.shape() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), found: probe.nrows() });
        }
        x = rk4_matrix_step(&f, t, h, &x);
        if let Some(form) = reproject_form {
            x = reproject(&x, form)?;
        }
        samples.push(x.clone());
    }
    OperatorPath::new(*grid, samples)
}

/// Integrates `X' = L(t) X` (left) or `X' = X L(t)` (right) from `x0`.
pub fn flow_matrix_ode<F>(
    generator: F,
    x0: &DMatrix<f64>,
    grid: &TimeGrid,
    side: Side,
    reproject_form: Option<&SignatureForm>,
) -> Result<OperatorPath>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let g0 = generator(grid.t0);
    let compatible = match side {
        Side::Left => g0.is_square() && g0.ncols() == x0.nrows(),
        Side::Right => g0.is_square() && g0.nrows() == x0.ncols(),
    };
    if !compatible {
        return Err(Error::DimensionMismatch { expected: x0.nrows(), found: g0.nrows() });
    }
    match side {
        Side::Left => integrate_matrix_ode(|t, x| generator(t) * x, x0, grid, reproject_form),
        Side::Right => integrate_matrix_ode(|t, x| x * generator(t), x0, grid, reproject_form),
    }
}

/// Quadrature `x(t) = x0 + int_{t0}^t rhs`, Simpson's rule per step.
///
/// Exact for polynomial right-hand sides of degree at most three.
pub fn integrate_vector<F>(rhs: F, x0: &DVector<f64>, grid: &TimeGrid) -> Result<Vec<DVector<f64>>>
where
    F: Fn(f64) -> DVector<f64>,
{
    let h = grid.h();
    let mut out = Vec::with_capacity(grid.len());
    let mut x = x0.clone();
    out.push(x.clone());
    let mut f_left = rhs(grid.t0);
    check_dim(x0.len(), f_left.len())?;
    for k in 0..grid.n_steps {
        let t = grid.node(k);
        let f_mid = rhs(t + 0.5 * h);
        let f_right = rhs(grid.node(k + 1));
        check_dim(x0.len(), f_mid.len())?;
        check_dim(x0.len(), f_right.len())?;
        x += (&f_left + &f_mid * 4.0 + &f_right) * (h / 6.0);
        out.push(x.clone());
        f_left = f_right;
    }
    Ok(out)
}

/// RK4 for a vector ODE `x' = f(t, x)`.
pub fn integrate_ode<F>(f: F, x0: &DVector<f64>, grid: &TimeGrid) -> Result<Vec<DVector<f64>>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let h = grid.h();
    let mut out = Vec::with_capacity(grid.len());
    let mut x = x0.clone();
    out.push(x.clone());
    for k in 0..grid.n_steps {
        let t = grid.node(k);
        let k1 = f(t, &x);
        check_dim(x.len(), k1.len())?;
        let k2 = f(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let k4 = f(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push(x.clone());
    }
    Ok(out)
}

fn combine<T>(terms: &[(f64, &T)]) -> T
where
    T: Clone + Add<Output = T> + Mul<f64, Output = T>,
{
    let mut iter = terms.iter();
    let (c0, x0) = iter.next().expect("at least one term");
    iter.fold((*x0).clone() * *c0, |acc, (c, x)| acc + (*x).clone() * *c)
}

/// Derivative of node samples: fourth-order stencils when at least five
/// nodes are available (one-sided at the two nodes nearest each end),
/// second-order three-point stencils otherwise.
pub fn differentiate<T>(samples: &[T], h: f64) -> Result<Vec<T>>
where
    T: Clone + Add<Output = T> + Mul<f64, Output = T>,
{
    let m = samples.len();
    if m < 3 {
        return Err(Error::GridTooShort { needed: 2, have: m.saturating_sub(1) });
    }
    let f = samples;
    let mut out = Vec::with_capacity(m);
    if m < 5 {
        let c = 1.0 / (2.0 * h);
        out.push(combine(&[(-3.0 * c, &f[0]), (4.0 * c, &f[1]), (-c, &f[2])]));
        for k in 1..m - 1 {
            out.push(combine(&[(-c, &f[k - 1]), (c, &f[k + 1])]));
        }
        out.push(combine(&[(3.0 * c, &f[m - 1]), (-4.0 * c, &f[m - 2]), (c, &f[m - 3])]));
        return Ok(out);
    }
    let c = 1.0 / (12.0 * h);
    out.push(combine(&[
        (-25.0 * c, &f[0]),
        (48.0 * c, &f[1]),
        (-36.0 * c, &f[2]),
        (16.0 * c, &f[3]),
        (-3.0 * c, &f[4]),
    ]));
    out.push(combine(&[
        (-3.0 * c, &f[0]),
        (-10.0 * c, &f[1]),
        (18.0 * c, &f[2]),
        (-6.0 * c, &f[3]),
        (c, &f[4]),
    ]));
    for k in 2..m - 2 {
        out.push(combine(&[
            (c, &f[k - 2]),
            (-8.0 * c, &f[k - 1]),
            (8.0 * c, &f[k + 1]),
            (-c, &f[k + 2]),
        ]));
    }
    let n = m - 1;
    out.push(combine(&[
        (-c, &f[n - 4]),
        (6.0 * c, &f[n - 3]),
        (-18.0 * c, &f[n - 2]),
        (10.0 * c, &f[n - 1]),
        (3.0 * c, &f[n]),
    ]));
    out.push(combine(&[
        (3.0 * c, &f[n - 4]),
        (-16.0 * c, &f[n - 3]),
        (36.0 * c, &f[n - 2]),
        (-48.0 * c, &f[n - 1]),
        (25.0 * c, &f[n]),
    ]));
    Ok(out)
}

/// Local cubic Lagrange interpolation of node samples at time `t`
/// (clamped to the grid interval).
pub fn interpolate<T>(grid: &TimeGrid, samples: &[T], t: f64) -> T
where
    T: Clone + Add<Output = T> + Mul<f64, Output = T>,
{
    let m = samples.len();
    let h = grid.h();
    let x = ((t - grid.t0) / h).clamp(0.0, grid.n_steps as f64);
    let cell = (x.floor() as usize).min(grid.n_steps.saturating_sub(1));
    if (x - x.round()).abs() < 1e-12 {
        return samples[(x.round() as usize).min(m - 1)].clone();
    }
    let width = m.min(4);
    let start = cell.saturating_sub(1).min(m - width);
    let nodes: Vec<f64> = (start..start + width).map(|i| i as f64).collect();
    let weights: Vec<f64> = (0..width)
        .map(|i| {
            (0..width)
                .filter(|&j| j != i)
                .map(|j| (x - nodes[j]) / (nodes[i] - nodes[j]))
                .product()
        })
        .collect();
    let terms: Vec<(f64, &T)> = weights.iter().zip(&samples[start..start + width]).map(|(w, s)| (*w, s)).collect();
    combine(&terms)
}
