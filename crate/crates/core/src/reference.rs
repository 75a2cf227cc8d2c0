//! Bounded reference signals with bounded derivatives.

use std::sync::Arc;

use nalgebra::DVector;

use crate::funnel::{check_grid, FunnelError, NUMERIC_DERIVATIVE_STEP};

pub(crate) type VectorFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// Validation report for a reference signal over a time grid.
#[derive(Debug, Clone)]
pub struct ReferenceValidation {
    pub valid: bool,
    pub y_r_sup: f64,
    pub y_r_dot_sup: f64,
    /// Worst deviation of the supplied derivative from a central finite
    /// difference of the signal.
    pub max_derivative_mismatch: f64,
}

/// A reference trajectory `y_r` with derivative and cached sup norms.
#[derive(Clone)]
pub struct ReferenceSignal {
    y_r: VectorFn,
    y_r_dot: VectorFn,
    dim: usize,
    y_r_sup: f64,
    y_r_dot_sup: f64,
}

impl std::fmt::Debug for ReferenceSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReferenceSignal")
            .field("dim", &self.dim)
            .field("y_r_sup", &self.y_r_sup)
            .field("y_r_dot_sup", &self.y_r_dot_sup)
            .finish()
    }
}

impl ReferenceSignal {
    /// Build from analytic signal and derivative, caching sup norms on `grid`.
    pub fn new<Y, D>(y_r: Y, y_r_dot: D, dim: usize, grid: &[f64]) -> Result<Self, FunnelError>
    where
        Y: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
        D: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    {
        check_grid(grid)?;
        let y_r: VectorFn = Arc::new(y_r);
        let y_r_dot: VectorFn = Arc::new(y_r_dot);
        let mut y_sup = 0.0f64;
        let mut dy_sup = 0.0f64;
        for &t in grid {
            let y = y_r(t);
            let dy = y_r_dot(t);
            if !(y.iter().all(|v| v.is_finite()) && dy.iter().all(|v| v.is_finite())) {
                return Err(FunnelError::NonFiniteValue(t));
            }
            y_sup = y_sup.max(y.norm());
            dy_sup = dy_sup.max(dy.norm());
        }
        Ok(Self {
            y_r,
            y_r_dot,
            dim,
            y_r_sup: y_sup,
            y_r_dot_sup: dy_sup,
        })
    }

    /// Build with the derivative synthesized by central differences.
    pub fn with_numeric_derivative<Y>(y_r: Y, dim: usize, grid: &[f64]) -> Result<Self, FunnelError>
    where
        Y: Fn(f64) -> DVector<f64> + Send + Sync + Clone + 'static,
    {
        let h = NUMERIC_DERIVATIVE_STEP;
        let y = y_r.clone();
        Self::new(y_r, move |t| (y(t + h) - y(t - h)) / (2.0 * h), dim, grid)
    }

    /// Constant reference.
    pub fn constant(value: Vec<f64>, grid: &[f64]) -> Result<Self, FunnelError> {
        let dim = value.len();
        let v = DVector::from_vec(value);
        let z = DVector::zeros(dim);
        Self::new(move |_| v.clone(), move |_| z.clone(), dim, grid)
    }

    /// Planar circular reference `[A sin(ωt), A cos(ωt)]`.
    pub fn circle(amplitude: f64, omega: f64, grid: &[f64]) -> Result<Self, FunnelError> {
        Self::new(
            move |t| {
                DVector::from_vec(vec![
                    amplitude * (omega * t).sin(),
                    amplitude * (omega * t).cos(),
                ])
            },
            move |t| {
                DVector::from_vec(vec![
                    amplitude * omega * (omega * t).cos(),
                    -amplitude * omega * (omega * t).sin(),
                ])
            },
            2,
            grid,
        )
    }

    pub fn y_r(&self, t: f64) -> DVector<f64> {
        (self.y_r)(t)
    }

    pub fn y_r_dot(&self, t: f64) -> DVector<f64> {
        (self.y_r_dot)(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cached `sup ‖y_r‖` over the construction grid.
    pub fn y_r_sup(&self) -> f64 {
        self.y_r_sup
    }

    /// Cached `sup ‖ẏ_r‖` over the construction grid.
    pub fn y_r_dot_sup(&self) -> f64 {
        self.y_r_dot_sup
    }

    /// Check boundedness and derivative consistency on `grid`.
    ///
    /// The supplied derivative must match a central finite difference of the
    /// signal within `fd_tol` at every grid point.
    pub fn validate(&self, grid: &[f64], fd_tol: f64) -> Result<ReferenceValidation, FunnelError> {
        check_grid(grid)?;
        let h = NUMERIC_DERIVATIVE_STEP;
        let mut y_sup = 0.0f64;
        let mut dy_sup = 0.0f64;
        let mut mismatch = 0.0f64;
        for &t in grid {
            y_sup = y_sup.max(self.y_r(t).norm());
            dy_sup = dy_sup.max(self.y_r_dot(t).norm());
            let fd = (self.y_r(t + h) - self.y_r(t - h)) / (2.0 * h);
            mismatch = mismatch.max((fd - self.y_r_dot(t)).norm());
        }
        Ok(ReferenceValidation {
            valid: y_sup.is_finite() && dy_sup.is_finite() && mismatch <= fd_tol,
            y_r_sup: y_sup,
            y_r_dot_sup: dy_sup,
            max_derivative_mismatch: mismatch,
        })
    }
}
