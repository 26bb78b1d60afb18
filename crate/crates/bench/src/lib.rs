//! Workloads shared by the benchmarks and their smoke tests.

use nalgebra::DVector;
use symroll::models::{roll_sphere, roll_stiefel, sphere::model_base, StiefelShape};
use symroll::rolling::FramedRolling;
use symroll::{ControlCurve, CurveInput, TimeGrid};

/// Smooth control with `dim` components on `[0, 1]`.
pub fn control(dim: usize, n_steps: usize) -> ControlCurve {
    let grid = TimeGrid::new(0.0, 1.0, n_steps).expect("valid grid");
    ControlCurve::from_fn(grid, move |t| DVector::from_fn(dim, |i, _| 0.8 * ((i as f64 + 1.0) * t + 0.3).cos() / (i as f64 + 1.0)))
}

pub fn sphere_rolling(n_steps: usize) -> FramedRolling {
    roll_sphere(&control(2, n_steps), &model_base()).expect("sphere rolling")
}

pub fn stiefel_rolling(n: usize, k: usize, n_steps: usize) -> FramedRolling {
    let shape = StiefelShape::new(n, k).expect("shape");
    roll_stiefel(&shape, &CurveInput::Control(control(shape.manifold_dim(), n_steps))).expect("stiefel rolling").rolling
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workloads_produce_valid_rollings() {
        let sphere = sphere_rolling(64);
        assert!(sphere.residuals().unwrap().max() < 1e-4);
        let st = stiefel_rolling(4, 2, 64);
        assert_eq!(st.path.dim(), 8);
        assert!(st.residuals().unwrap().max() < 1e-4);
    }
}
