//! Time-varying funnel boundaries ψ.
//!
//! A funnel boundary is a positive, bounded, continuously differentiable
//! function whose logarithmic slope is limited by a growth constant:
//! `|ψ̇(t)| ≤ c·ψ(t)`. Membership is certified numerically on a finite time
//! grid; the extremal values found there (`psi_inf`, `psi_sup` and the worst
//! slope ratio) are cached on the boundary for later use by bound and
//! containment computations.

use std::sync::Arc;

use thiserror::Error;

/// Step used when a derivative is synthesized by central differences.
pub const NUMERIC_DERIVATIVE_STEP: f64 = 1e-5;

pub(crate) type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum FunnelError {
    #[error("time grid must be non-empty and strictly increasing")]
    InvalidGrid,
    #[error("growth constant must be positive, got {0}")]
    NonPositiveGrowthConstant(f64),
    #[error("boundary evaluates to a non-finite value at t = {0}")]
    NonFiniteValue(f64),
}

/// Validation report for a funnel boundary over a time grid.
#[derive(Debug, Clone)]
pub struct FunnelValidation {
    /// True iff `min ψ > 0` and `max |ψ̇|/ψ ≤ c` over the grid.
    pub valid: bool,
    pub min_psi: f64,
    pub min_psi_time: f64,
    pub max_psi: f64,
    /// Worst observed `|ψ̇(t)|/ψ(t)`; infinite if ψ is not positive.
    pub worst_ratio: f64,
    pub worst_ratio_time: f64,
    pub growth_constant: f64,
}

/// A funnel boundary ψ with derivative, growth constant, and cached extrema.
#[derive(Clone)]
pub struct FunnelBoundary {
    psi: ScalarFn,
    psi_dot: ScalarFn,
    c: f64,
    psi_inf: f64,
    psi_sup: f64,
    slope_ratio_sup: f64,
}

impl std::fmt::Debug for FunnelBoundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunnelBoundary")
            .field("c", &self.c)
            .field("psi_inf", &self.psi_inf)
            .field("psi_sup", &self.psi_sup)
            .finish()
    }
}

impl FunnelBoundary {
    /// Build a boundary from analytic ψ and ψ̇, caching extrema over `grid`.
    ///
    /// The grid is typically the scenario horizon at step 1e-2. Construction
    /// refuses non-finite boundaries and nonpositive `c`; it does not decide
    /// class membership, which is [`FunnelBoundary::validate`]'s job.
    pub fn new<P, D>(psi: P, psi_dot: D, c: f64, grid: &[f64]) -> Result<Self, FunnelError>
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if c.is_nan() || c <= 0.0 {
            return Err(FunnelError::NonPositiveGrowthConstant(c));
        }
        check_grid(grid)?;
        let psi: ScalarFn = Arc::new(psi);
        let psi_dot: ScalarFn = Arc::new(psi_dot);

        let mut psi_inf = f64::INFINITY;
        let mut psi_sup = f64::NEG_INFINITY;
        let mut ratio_sup = 0.0f64;
        for &t in grid {
            let v = psi(t);
            let d = psi_dot(t);
            if !v.is_finite() || !d.is_finite() {
                return Err(FunnelError::NonFiniteValue(t));
            }
            psi_inf = psi_inf.min(v);
            psi_sup = psi_sup.max(v);
            if v > 0.0 {
                ratio_sup = ratio_sup.max(d.abs() / v);
            } else {
                ratio_sup = f64::INFINITY;
            }
        }

        Ok(Self {
            psi,
            psi_dot,
            c,
            psi_inf,
            psi_sup,
            slope_ratio_sup: ratio_sup,
        })
    }

    /// Build a boundary with ψ̇ synthesized by central differences.
    ///
    /// Prefer analytic derivatives where available; derivative-sensitive
    /// computations (e.g. input references) lose accuracy otherwise.
    pub fn with_numeric_derivative<P>(psi: P, c: f64, grid: &[f64]) -> Result<Self, FunnelError>
    where
        P: Fn(f64) -> f64 + Send + Sync + Clone + 'static,
    {
        let h = NUMERIC_DERIVATIVE_STEP;
        let psi_d = psi.clone();
        Self::new(
            psi,
            move |t| (psi_d(t + h) - psi_d(t - h)) / (2.0 * h),
            c,
            grid,
        )
    }

    /// `ψ(t) = a·e^(−λt) + offset`, the usual shrinking funnel.
    pub fn exponential(
        a: f64,
        lambda: f64,
        offset: f64,
        c: f64,
        grid: &[f64],
    ) -> Result<Self, FunnelError> {
        Self::new(
            move |t| a * (-lambda * t).exp() + offset,
            move |t| -a * lambda * (-lambda * t).exp(),
            c,
            grid,
        )
    }

    /// Constant boundary `ψ ≡ value`.
    pub fn constant(value: f64, c: f64, grid: &[f64]) -> Result<Self, FunnelError> {
        Self::new(move |_| value, |_| 0.0, c, grid)
    }

    pub fn psi(&self, t: f64) -> f64 {
        (self.psi)(t)
    }

    pub fn psi_dot(&self, t: f64) -> f64 {
        (self.psi_dot)(t)
    }

    /// Growth constant `c` limiting `|ψ̇|/ψ`.
    pub fn growth_constant(&self) -> f64 {
        self.c
    }

    /// Cached infimum of ψ over the construction grid.
    pub fn psi_inf(&self) -> f64 {
        self.psi_inf
    }

    /// Cached supremum of ψ over the construction grid.
    pub fn psi_sup(&self) -> f64 {
        self.psi_sup
    }

    /// Cached supremum of `|ψ̇|/ψ` over the construction grid.
    pub fn slope_ratio_sup(&self) -> f64 {
        self.slope_ratio_sup
    }

    /// Certify funnel-class membership on `grid`.
    ///
    /// Valid iff ψ stays positive and the slope ratio never exceeds `c`.
    /// The report carries the extremal values and the times at which they
    /// occur.
    pub fn validate(&self, grid: &[f64]) -> Result<FunnelValidation, FunnelError> {
        check_grid(grid)?;
        let mut min_psi = f64::INFINITY;
        let mut min_psi_time = grid[0];
        let mut max_psi = f64::NEG_INFINITY;
        let mut worst_ratio = 0.0f64;
        let mut worst_ratio_time = grid[0];
        let mut positive = true;

        for &t in grid {
            let v = self.psi(t);
            if v < min_psi {
                min_psi = v;
                min_psi_time = t;
            }
            max_psi = max_psi.max(v);
            if v > 0.0 {
                let ratio = self.psi_dot(t).abs() / v;
                if ratio > worst_ratio {
                    worst_ratio = ratio;
                    worst_ratio_time = t;
                }
            } else {
                positive = false;
            }
        }
        if !positive {
            worst_ratio = f64::INFINITY;
        }

        Ok(FunnelValidation {
            valid: positive && min_psi > 0.0 && worst_ratio <= self.c,
            min_psi,
            min_psi_time,
            max_psi,
            worst_ratio,
            worst_ratio_time,
            growth_constant: self.c,
        })
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<(), FunnelError> {
    if grid.is_empty() {
        return Err(FunnelError::InvalidGrid);
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FunnelError::InvalidGrid);
    }
    Ok(())
}
