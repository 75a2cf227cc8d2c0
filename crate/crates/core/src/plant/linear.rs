//! Two-output linear demo plant with one internal state.
//!
//! `f(y,η) = −y + [η/2, η/2]`, `g = I`, `q(y,η) = −η + (y₁+y₂)/2`. The
//! internal dynamics have pole −1 and input gain at most one, so
//! `|η(t)| ≤ max{|η⁰|, ‖y‖_∞}`: bounded outputs keep the internal state
//! bounded, which is what the verification-side bound estimation needs.

use nalgebra::{DMatrix, DVector};

use crate::plant::NormalFormPlant;

pub fn plant() -> NormalFormPlant {
    NormalFormPlant::new(
        "linear-demo",
        2,
        1,
        |y, eta| {
            let half = 0.5 * eta[0];
            DVector::from_row_slice(&[-y[0] + half, -y[1] + half])
        },
        |_, _| DMatrix::identity(2, 2),
        |y, eta| DVector::from_row_slice(&[-eta[0] + 0.5 * (y[0] + y[1])]),
    )
}

/// Analytic internal-state bound from the variation-of-constants estimate:
/// `|η(t)| ≤ max{|η⁰|, sup‖y‖}`.
pub fn internal_bound(eta0: f64, output_sup: f64) -> f64 {
    eta0.abs().max(output_sup)
}
