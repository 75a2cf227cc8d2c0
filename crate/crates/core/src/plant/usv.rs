//! Unmanned-surface-vessel benchmark.
//!
//! State `x = [p_x, p_y, φ]` equals the output. The drift is a unit-norm
//! position-dependent current `[−sin θ, cos θ, 0]` with `θ = atan2(p_y, p_x)`
//! (undefined at the origin); the input enters through a planar rotation by
//! the heading `φ`, whose symmetric part is positive definite for
//! `|φ| < π/2`. The shipped reference trajectory and funnel keep the heading
//! in that range along the whole tube.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::funnel::{FunnelBoundary, FunnelError};
use crate::plant::{FullPlant, NormalFormPlant, PlantError};
use crate::reference::ReferenceSignal;

/// Heading-angle amplitude of the reference, `arctan(a·sin(ωt))`.
const HEADING_GAIN: f64 = 1.5 * PI;
/// Angular rate of the reference oscillation.
const OMEGA: f64 = 0.15 * PI;

fn drift(x: &DVector<f64>) -> Result<DVector<f64>, PlantError> {
    if x[0] == 0.0 && x[1] == 0.0 {
        return Err(PlantError::UndefinedDriftAngle);
    }
    let theta = x[1].atan2(x[0]);
    Ok(DVector::from_row_slice(&[-theta.sin(), theta.cos(), 0.0]))
}

fn rotation(phi: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[
            phi.cos(),
            -phi.sin(),
            0.0,
            phi.sin(),
            phi.cos(),
            0.0,
            0.0,
            0.0,
            1.0,
        ],
    )
}

/// The vessel in state-space form; `H` is the identity.
pub fn plant() -> FullPlant {
    FullPlant::new(
        "usv",
        3,
        3,
        drift,
        |x| rotation(x[2]),
        |x| x.clone(),
        |_| DMatrix::identity(3, 3),
    )
}

/// Normal-form view: no internal state (`n = m`), `f = F`, `g = G`.
pub fn normal_form() -> NormalFormPlant {
    NormalFormPlant::new(
        "usv",
        3,
        0,
        |y, _| drift(y).unwrap_or_else(|_| DVector::from_row_slice(&[0.0, 1.0, 0.0])),
        |y, _| rotation(y[2]),
        |_, _| DVector::zeros(0),
    )
}

fn y_r(t: f64) -> DVector<f64> {
    DVector::from_row_slice(&[
        -0.8 * t + 8.0,
        4.0 * (OMEGA * t).cos(),
        (HEADING_GAIN * (OMEGA * t).sin()).atan(),
    ])
}

fn y_r_dot(t: f64) -> DVector<f64> {
    let s = (OMEGA * t).sin();
    let c = (OMEGA * t).cos();
    DVector::from_row_slice(&[
        -0.8,
        -4.0 * OMEGA * s,
        HEADING_GAIN * OMEGA * c / (1.0 + HEADING_GAIN * HEADING_GAIN * s * s),
    ])
}

/// The benchmark reference trajectory with analytic derivative.
pub fn reference(grid: &[f64]) -> Result<ReferenceSignal, FunnelError> {
    ReferenceSignal::new(y_r, y_r_dot, 3, grid)
}

/// The benchmark funnel `ψ(t) = 1.3·e^(−2t) + 0.2` with growth constant 2.
pub fn funnel(grid: &[f64]) -> Result<FunnelBoundary, FunnelError> {
    FunnelBoundary::exponential(1.3, 2.0, 0.2, 2.0, grid)
}

/// Model-based input reference `u_r(t) = G(y_r(t))⁻¹·ẏ_r(t)`.
///
/// Only the known kinematic rotation is inverted; the unknown drift is
/// deliberately excluded, so following `u_r` exactly does not track the
/// reference.
pub fn input_reference(t: f64) -> DVector<f64> {
    let phi = y_r(t)[2];
    let dy = y_r_dot(t);
    // Rotation inverse = transpose, applied to the planar part.
    DVector::from_row_slice(&[
        phi.cos() * dy[0] + phi.sin() * dy[1],
        -phi.sin() * dy[0] + phi.cos() * dy[1],
        dy[2],
    ])
}
