//! The output-space barrier `b(t,y) = ½(ψ(t)² − ‖y − y_r(t)‖²)`.
//!
//! The barrier is positive inside the tube `‖y − y_r(t)‖ < ψ(t)`, zero on its
//! boundary and negative outside. Everything here is computable from the
//! measured output alone; no model data enters.

use nalgebra::DVector;

use crate::funnel::FunnelBoundary;
use crate::reference::ReferenceSignal;

/// Default absolute tolerance for boundary classification. Barrier values
/// near the boundary drive unbounded gains downstream, so detection is
/// strict.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-12;

/// Position of an output point relative to the safe set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetLocation {
    Interior,
    Boundary,
    Exterior,
}

/// `b(t,y) = ½(ψ(t)² − ‖y − y_r(t)‖²)`.
pub fn barrier_value(
    t: f64,
    y: &DVector<f64>,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
) -> f64 {
    let e = y - reference.y_r(t);
    let psi = boundary.psi(t);
    0.5 * (psi * psi - e.norm_squared())
}

/// Output-space gradient `∇_y b(t,y) = −(y − y_r(t))`.
pub fn barrier_gradient(t: f64, y: &DVector<f64>, reference: &ReferenceSignal) -> DVector<f64> {
    reference.y_r(t) - y
}

/// Partial time derivative `∂_t b = ψψ̇ + ⟨y − y_r, ẏ_r⟩`.
pub fn barrier_time_derivative(
    t: f64,
    y: &DVector<f64>,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
) -> f64 {
    let e = y - reference.y_r(t);
    boundary.psi(t) * boundary.psi_dot(t) + e.dot(&reference.y_r_dot(t))
}

/// Classify `(t,y)` against the tube with absolute tolerance `tol` on the
/// error norm.
pub fn safe_set_location(
    t: f64,
    y: &DVector<f64>,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
    tol: f64,
) -> SetLocation {
    let e_norm = (y - reference.y_r(t)).norm();
    let psi = boundary.psi(t);
    if (e_norm - psi).abs() <= tol {
        SetLocation::Boundary
    } else if e_norm < psi {
        SetLocation::Interior
    } else {
        SetLocation::Exterior
    }
}

/// Snapshot of all barrier quantities at one point.
#[derive(Debug, Clone)]
pub struct BarrierPoint {
    pub t: f64,
    pub y: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub time_derivative: f64,
    /// `‖y − y_r(t)‖ / ψ(t)`.
    pub error_ratio: f64,
}

impl BarrierPoint {
    pub fn evaluate(
        t: f64,
        y: &DVector<f64>,
        boundary: &FunnelBoundary,
        reference: &ReferenceSignal,
    ) -> Self {
        let e = y - reference.y_r(t);
        let psi = boundary.psi(t);
        Self {
            t,
            y: y.clone(),
            value: 0.5 * (psi * psi - e.norm_squared()),
            gradient: -&e,
            time_derivative: boundary.psi(t) * boundary.psi_dot(t) + e.dot(&reference.y_r_dot(t)),
            error_ratio: e.norm() / psi,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::usv;
    use crate::sampling::uniform_grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixtures() -> (FunnelBoundary, ReferenceSignal) {
        let grid = uniform_grid(0.0, 10.0, 1e-2);
        (usv::funnel(&grid).unwrap(), usv::reference(&grid).unwrap())
    }

    fn offset(reference: &ReferenceSignal, t: f64, d: &[f64]) -> DVector<f64> {
        reference.y_r(t) + DVector::from_row_slice(d)
    }

    #[test]
    fn barrier_at_reference_is_half_psi_squared() {
        let (f, r) = fixtures();
        let y = r.y_r(0.0);
        assert_relative_eq!(barrier_value(0.0, &y, &f, &r), 1.125, max_relative = 1e-12);
    }

    #[test]
    fn barrier_with_offset_error() {
        let (f, r) = fixtures();
        let y = offset(&r, 0.0, &[0.9, 0.0, 0.0]);
        assert_relative_eq!(barrier_value(0.0, &y, &f, &r), 0.72, max_relative = 1e-12);
        let y = offset(&r, 0.0, &[1.5, 0.0, 0.0]);
        assert_relative_eq!(barrier_value(0.0, &y, &f, &r), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_is_negative_error() {
        let (_, r) = fixtures();
        let y = r.y_r(1.3);
        assert_eq!(barrier_gradient(1.3, &y, &r), DVector::zeros(3));
        let y = offset(&r, 0.0, &[0.9, 0.0, 0.0]);
        let grad = barrier_gradient(0.0, &y, &r);
        assert!((grad - DVector::from_row_slice(&[-0.9, 0.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn time_derivative_on_usv_scenario() {
        let (f, r) = fixtures();
        let y = offset(&r, 0.0, &[0.9, 0.0, 0.0]);
        // psi(0)*psi_dot(0) + <e, y_r_dot(0)> = 1.5*(-2.6) + 0.9*(-0.8)
        assert_relative_eq!(
            barrier_time_derivative(0.0, &y, &f, &r),
            -4.62,
            max_relative = 1e-12
        );
    }

    #[test]
    fn time_derivative_vanishes_for_static_problem() {
        let grid = uniform_grid(0.0, 1.0, 0.1);
        let f = FunnelBoundary::constant(1.0, 0.5, &grid).unwrap();
        let r = ReferenceSignal::constant(vec![0.3, -0.2], &grid).unwrap();
        let y = DVector::from_row_slice(&[5.0, 2.0]);
        assert_eq!(barrier_time_derivative(0.7, &y, &f, &r), 0.0);
    }

    #[test]
    fn classification_matches_examples() {
        let (f, r) = fixtures();
        let y = r.y_r(0.0);
        assert_eq!(
            safe_set_location(0.0, &y, &f, &r, DEFAULT_BOUNDARY_TOL),
            SetLocation::Interior
        );
        let y = offset(&r, 0.0, &[1.5, 0.0, 0.0]);
        assert_eq!(
            safe_set_location(0.0, &y, &f, &r, DEFAULT_BOUNDARY_TOL),
            SetLocation::Boundary
        );
        let y = offset(&r, 0.0, &[2.0, 0.0, 0.0]);
        assert_eq!(
            safe_set_location(0.0, &y, &f, &r, DEFAULT_BOUNDARY_TOL),
            SetLocation::Exterior
        );
    }

    #[test]
    fn derivatives_match_central_finite_differences() {
        // 1e3 random points, step 1e-5, tolerance 1e-6.
        let (f, r) = fixtures();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-5;
        for _ in 0..1000 {
            let t = rng.random_range(0.1..9.9);
            let y = r.y_r(t) + DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));

            let grad = barrier_gradient(t, &y, &r);
            for i in 0..3 {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[i] += h;
                ym[i] -= h;
                let fd =
                    (barrier_value(t, &yp, &f, &r) - barrier_value(t, &ym, &f, &r)) / (2.0 * h);
                assert!(
                    (grad[i] - fd).abs() < 1e-6,
                    "grad mismatch {}",
                    grad[i] - fd
                );
            }

            let dt = barrier_time_derivative(t, &y, &f, &r);
            let fd =
                (barrier_value(t + h, &y, &f, &r) - barrier_value(t - h, &y, &f, &r)) / (2.0 * h);
            assert!((dt - fd).abs() < 1e-6, "dt mismatch {}", dt - fd);
        }
    }

    proptest! {
        #[test]
        fn positive_barrier_iff_interior(
            t in 0.0..10.0f64,
            e1 in -3.0..3.0f64,
            e2 in -3.0..3.0f64,
            e3 in -3.0..3.0f64,
        ) {
            let (f, r) = fixtures();
            let y = offset(&r, t, &[e1, e2, e3]);
            let b = barrier_value(t, &y, &f, &r);
            let loc = safe_set_location(t, &y, &f, &r, 0.0);
            prop_assert_eq!(b > 0.0, loc == SetLocation::Interior);
        }

        #[test]
        fn barrier_point_is_consistent(
            t in 0.0..10.0f64,
            e1 in -2.0..2.0f64,
            e2 in -2.0..2.0f64,
        ) {
            let (f, r) = fixtures();
            let y = offset(&r, t, &[e1, e2, 0.0]);
            let p = BarrierPoint::evaluate(t, &y, &f, &r);
            prop_assert_eq!(p.gradient, barrier_gradient(t, &y, &r));
            prop_assert!((p.value - barrier_value(t, &y, &f, &r)).abs() < 1e-15);
            prop_assert_eq!(p.value > 0.0, p.error_ratio < 1.0);
        }
    }
}
