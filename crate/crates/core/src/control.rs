//! Model-free candidate control sets and the minimally invasive safety
//! filter.
//!
//! At an interior point the admissible inputs form the segment
//! `{ k·∇_y b(t,y)/b(t,y) : k ∈ [k_min, k_max] }`; the saturated variant
//! replaces the denominator by `max{b, δ}` and is defined everywhere, which
//! lets a controller steer back into the tube from outside. The safety
//! filter minimizes `‖u − u_ref‖²` over the segment in closed form.

use nalgebra::DVector;
use thiserror::Error;

use crate::barrier::{barrier_gradient, barrier_value};
use crate::funnel::FunnelBoundary;
use crate::reference::ReferenceSignal;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("gain interval requires 0 < k_min <= k_max, got [{0}, {1}]")]
    InvalidGainInterval(f64, f64),
    #[error("candidate set undefined outside int(C): barrier value {0}")]
    OutsideInterior(f64),
    #[error("gain {k} outside admissible interval [{k_min}, {k_max}]")]
    GainOutOfRange { k: f64, k_min: f64, k_max: f64 },
    #[error("saturation parameter must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("denominator must be positive, got {0}")]
    NonPositiveDenominator(f64),
}

/// Admissible gain range `[k_min, k_max]`, `0 < k_min <= k_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainInterval {
    k_min: f64,
    k_max: f64,
}

impl GainInterval {
    pub fn new(k_min: f64, k_max: f64) -> Result<Self, ControlError> {
        if !(k_min > 0.0 && k_min <= k_max && k_max.is_finite()) {
            return Err(ControlError::InvalidGainInterval(k_min, k_max));
        }
        Ok(Self { k_min, k_max })
    }

    pub fn k_min(&self) -> f64 {
        self.k_min
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn contains(&self, k: f64) -> bool {
        k >= self.k_min && k <= self.k_max
    }

    fn clamp(&self, k: f64) -> f64 {
        k.clamp(self.k_min, self.k_max)
    }
}

/// Saturation parameter δ for the set defined outside the tube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationParam {
    delta: f64,
}

impl SaturationParam {
    pub fn new(delta: f64) -> Result<Self, ControlError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(ControlError::NonPositiveDelta(delta));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Which construction produced a candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOrigin {
    /// Interior set with denominator `b(t,y)`.
    Interior,
    /// Saturated set with denominator `max{b(t,y), δ}`.
    Saturated,
}

/// The segment `{ k·direction/denominator : k ∈ gains }`.
///
/// Degenerates to `{0}` when the direction vanishes (zero tracking error).
#[derive(Debug, Clone)]
pub struct CandidateControlSet {
    direction: DVector<f64>,
    denominator: f64,
    gains: GainInterval,
    origin: SetOrigin,
}

impl CandidateControlSet {
    /// Assemble a set from raw parts; the denominator must be positive.
    pub fn from_parts(
        direction: DVector<f64>,
        denominator: f64,
        gains: GainInterval,
        origin: SetOrigin,
    ) -> Result<Self, ControlError> {
        if !(denominator > 0.0 && denominator.is_finite()) {
            return Err(ControlError::NonPositiveDenominator(denominator));
        }
        Ok(Self {
            direction,
            denominator,
            gains,
            origin,
        })
    }

    /// Segment direction, equal to `∇_y b(t,y)`.
    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn denominator(&self) -> f64 {
        self.denominator
    }

    pub fn gains(&self) -> GainInterval {
        self.gains
    }

    pub fn origin(&self) -> SetOrigin {
        self.origin
    }

    /// `direction / denominator`, the per-unit-gain element.
    pub fn unit_element(&self) -> DVector<f64> {
        &self.direction / self.denominator
    }

    pub fn is_degenerate(&self) -> bool {
        self.direction.iter().all(|v| *v == 0.0)
    }

    /// Segment endpoints at `k_min` and `k_max`.
    pub fn endpoints(&self) -> (DVector<f64>, DVector<f64>) {
        let d = self.unit_element();
        (&d * self.gains.k_min, &d * self.gains.k_max)
    }
}

/// Candidate set at an interior point: denominator `b(t,y)`.
pub fn candidate_set(
    t: f64,
    y: &DVector<f64>,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
    gains: GainInterval,
) -> Result<CandidateControlSet, ControlError> {
    let b = barrier_value(t, y, boundary, reference);
    if b.is_nan() || b <= 0.0 {
        return Err(ControlError::OutsideInterior(b));
    }
    Ok(CandidateControlSet {
        direction: barrier_gradient(t, y, reference),
        denominator: b,
        gains,
        origin: SetOrigin::Interior,
    })
}

/// Saturated candidate set: denominator `max{b(t,y), δ}`, defined everywhere.
///
/// Coincides with [`candidate_set`] whenever `b(t,y) >= δ`.
pub fn saturated_candidate_set(
    t: f64,
    y: &DVector<f64>,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
    gains: GainInterval,
    saturation: SaturationParam,
) -> CandidateControlSet {
    let b = barrier_value(t, y, boundary, reference);
    CandidateControlSet {
        direction: barrier_gradient(t, y, reference),
        denominator: b.max(saturation.delta()),
        gains,
        origin: SetOrigin::Saturated,
    }
}

/// The fixed-gain element `k·direction/denominator`.
pub fn funnel_feedback(set: &CandidateControlSet, k: f64) -> Result<DVector<f64>, ControlError> {
    if !set.gains.contains(k) {
        return Err(ControlError::GainOutOfRange {
            k,
            k_min: set.gains.k_min,
            k_max: set.gains.k_max,
        });
    }
    Ok(set.unit_element() * k)
}

/// Which side of the gain interval the filter solution landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveClamp {
    None,
    Lower,
    Upper,
    /// The segment is the single point 0 (zero direction).
    Degenerate,
}

/// Safety-filter result: chosen input, gain, and clamp diagnostics.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub input: DVector<f64>,
    pub gain: f64,
    pub clamp: ActiveClamp,
}

/// Minimally invasive filter: `argmin_{u ∈ set} ‖u − u_ref‖²` in closed form.
///
/// With `d = direction/denominator` the unconstrained optimum is
/// `⟨u_ref, d⟩/⟨d, d⟩`, clamped to the gain interval; the objective is
/// strictly convex along the segment so the minimizer is unique. Landing
/// exactly on an interval endpoint is reported as a clamp.
pub fn safety_filter(set: &CandidateControlSet, u_ref: &DVector<f64>) -> FilterOutput {
    if set.is_degenerate() {
        return FilterOutput {
            input: DVector::zeros(set.direction.len()),
            gain: set.gains.k_min,
            clamp: ActiveClamp::Degenerate,
        };
    }
    let d = set.unit_element();
    let k_unconstrained = u_ref.dot(&d) / d.norm_squared();
    let gain = set.gains.clamp(k_unconstrained);
    let clamp = if k_unconstrained <= set.gains.k_min {
        ActiveClamp::Lower
    } else if k_unconstrained >= set.gains.k_max {
        ActiveClamp::Upper
    } else {
        ActiveClamp::None
    };
    FilterOutput {
        input: d * gain,
        gain,
        clamp,
    }
}

/// Membership test: does some `k ∈ gains` put `k·direction/denominator`
/// within `tol` of `u`? Implemented by projecting `u` onto the segment.
pub fn set_contains(set: &CandidateControlSet, u: &DVector<f64>, tol: f64) -> bool {
    debug_assert!(tol >= 0.0);
    if set.is_degenerate() {
        return u.norm() <= tol;
    }
    let d = set.unit_element();
    let k = set.gains.clamp(u.dot(&d) / d.norm_squared());
    (u - d * k).norm() <= tol
}
