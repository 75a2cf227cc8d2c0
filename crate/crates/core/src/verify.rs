//! Sampled numerical verification that the model-free candidate sets are
//! barrier-admissible.
//!
//! The admissibility inequality is affine in the input and the candidate set
//! is a segment, so checking its two endpoints decides membership of the
//! whole set at a sample point. All checks draw from seeded streams and are
//! deterministic given `(seed, sample_count)`; outputs carry margins rather
//! than bare pass flags, with the near-boundary regime stressed on purpose
//! (error radii are drawn up to `1 − 1e-6` of the funnel).

use std::io::{self, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::barrier::barrier_value;
use crate::control::{candidate_set, funnel_feedback, GainInterval};
use crate::funnel::FunnelBoundary;
use crate::plant::{witness_input, ModelBounds, NormalFormPlant, PlantError};
use crate::reference::ReferenceSignal;
use crate::sampling::{in_ball, unit_vector};
use crate::sim::Trajectory;

/// Error radii are sampled with `‖e‖/ψ` strictly below this.
const MAX_SAMPLED_RATIO: f64 = 1.0 - 1e-6;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("initial error ratio must lie in [0, 1), got {0}")]
    InvalidInitialRatio(f64),
    #[error("slope of a linear class-K function must be positive, got {0}")]
    NonPositiveSlope(f64),
}

/// Linear class-K∞ function `α(s) = slope·s` (odd extension through zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassKeLinear {
    slope: f64,
}

impl ClassKeLinear {
    pub fn new(slope: f64) -> Result<Self, VerifyError> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(VerifyError::NonPositiveSlope(slope));
        }
        Ok(Self { slope })
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.slope * s
    }
}

/// The linear decay rate under which the whole candidate set is admissible,
/// built from sampled model bounds.
///
/// With `a = k_min·g_underbar·psi_inf²` and
/// `M = c·psi_sup² + psi_sup·f_bar + 2·k_min·g_underbar`, the admissibility
/// expression is at least `a/b − M`, whose tangent at `b = 2a/M` gives the
/// linear function with slope `M²/(4a)`.
pub fn alpha_from_bounds(
    bounds: &ModelBounds,
    boundary: &FunnelBoundary,
    gains: GainInterval,
) -> ClassKeLinear {
    let a = gains.k_min() * bounds.g_underbar * boundary.psi_inf() * boundary.psi_inf();
    let m = boundary.growth_constant() * boundary.psi_sup() * boundary.psi_sup()
        + boundary.psi_sup() * bounds.f_bar
        + 2.0 * gains.k_min() * bounds.g_underbar;
    debug_assert!(a > 0.0 && m > 0.0);
    ClassKeLinear {
        slope: m * m / (4.0 * a),
    }
}

/// Margin of the admissibility inequality at `(t, y, η)` for input `u`:
/// `ψψ̇ + ⟨e, ẏ_r⟩ − ⟨e, f + g·u⟩ + α(b)`. Membership means margin ≥ 0.
#[allow(clippy::too_many_arguments)]
pub fn admissibility_margin(
    t: f64,
    y: &DVector<f64>,
    eta: &DVector<f64>,
    u: &DVector<f64>,
    alpha: ClassKeLinear,
    plant: &NormalFormPlant,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
) -> (bool, f64) {
    let e = y - reference.y_r(t);
    let b = barrier_value(t, y, boundary, reference);
    let closed_loop = plant.f(y, eta) + plant.g(y, eta) * u;
    let margin = boundary.psi(t) * boundary.psi_dot(t) + e.dot(&reference.y_r_dot(t))
        - e.dot(&closed_loop)
        + alpha.eval(b);
    (margin >= 0.0, margin)
}

/// One recorded admissibility evaluation.
#[derive(Debug, Clone)]
pub struct MarginSample {
    pub t: f64,
    pub y: DVector<f64>,
    pub eta: DVector<f64>,
    pub gain: f64,
    pub barrier: f64,
    pub margin: f64,
}

/// Aggregate of an inclusion run over sampled interior points.
#[derive(Debug, Clone)]
pub struct InclusionReport {
    pub samples: usize,
    pub violations: usize,
    /// Minimum margin over all endpoint evaluations; `+∞` when vacuous.
    pub worst_margin: f64,
    /// The evaluation attaining the worst margin.
    pub witness: Option<MarginSample>,
    /// All endpoint evaluations, for CSV audit.
    pub records: Vec<MarginSample>,
}

impl InclusionReport {
    /// Audit rows: one line per endpoint evaluation.
    pub fn write_samples_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (m, n_eta) = self
            .records
            .first()
            .map(|s| (s.y.len(), s.eta.len()))
            .unwrap_or((0, 0));
        let mut header = String::from("index,t");
        for i in 1..=m {
            header.push_str(&format!(",y{i}"));
        }
        for i in 1..=n_eta {
            header.push_str(&format!(",eta{i}"));
        }
        header.push_str(",k,b,margin");
        writeln!(w, "{header}")?;
        for (i, s) in self.records.iter().enumerate() {
            write!(w, "{i},{:.16e}", s.t)?;
            for v in s.y.iter() {
                write!(w, ",{v:.16e}")?;
            }
            for v in s.eta.iter() {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w, ",{:.16e},{:.16e},{:.16e}", s.gain, s.barrier, s.margin)?;
        }
        Ok(())
    }
}

/// Sampling plan shared by the stochastic checks.
#[derive(Debug, Clone, Copy)]
pub struct SamplePlan {
    /// Times are drawn uniformly from `[0, horizon]`.
    pub horizon: f64,
    /// Internal states are drawn from `‖η‖ ≤ q_bar`.
    pub q_bar: f64,
    pub sample_count: usize,
    pub seed: u64,
}

fn sample_point<R: Rng + ?Sized>(
    rng: &mut R,
    plant: &NormalFormPlant,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
    plan: &SamplePlan,
) -> (f64, DVector<f64>, DVector<f64>) {
    let t = rng.random::<f64>() * plan.horizon;
    let ratio = rng.random::<f64>() * MAX_SAMPLED_RATIO;
    let dir = unit_vector(rng, plant.output_dim());
    let y = reference.y_r(t) + dir * (ratio * boundary.psi(t));
    let eta = in_ball(rng, plant.internal_dim(), plan.q_bar);
    (t, y, eta)
}

/// Check `{k·∇_y b/b : k ∈ gains} ⊆ {u : admissibility margin ≥ 0}` at
/// sampled interior points.
///
/// Membership is evaluated at the two segment endpoints only: the
/// inequality is affine in `u`, so endpoint membership implies membership
/// of the whole segment.
pub fn inclusion_check(
    plant: &NormalFormPlant,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
    gains: GainInterval,
    alpha: ClassKeLinear,
    plan: &SamplePlan,
) -> InclusionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut report = InclusionReport {
        samples: plan.sample_count,
        violations: 0,
        worst_margin: f64::INFINITY,
        witness: None,
        records: Vec::with_capacity(2 * plan.sample_count),
    };

    for _ in 0..plan.sample_count {
        let (t, y, eta) = sample_point(&mut rng, plant, boundary, reference, plan);
        let set = match candidate_set(t, &y, boundary, reference, gains) {
            Ok(set) => set,
            // Sampled radii stay strictly inside, so this cannot fire; skip
            // defensively if rounding ever pushes a point out.
            Err(_) => continue,
        };
        let mut violated = false;
        for k in [gains.k_min(), gains.k_max()] {
            let u = funnel_feedback(&set, k).expect("endpoint gain inside interval");
            let (member, margin) =
                admissibility_margin(t, &y, &eta, &u, alpha, plant, boundary, reference);
            let sample = MarginSample {
                t,
                y: y.clone(),
                eta: eta.clone(),
                gain: k,
                barrier: set.denominator(),
                margin,
            };
            if margin < report.worst_margin {
                report.worst_margin = margin;
                report.witness = Some(sample.clone());
            }
            report.records.push(sample);
            violated |= !member;
        }
        if violated {
            report.violations += 1;
        }
    }
    report
}

/// Count samples where both endpoints are admissible but some interior gain
/// is not. Affinity of the inequality says this must never happen; the check
/// guards the endpoint shortcut used by [`inclusion_check`].
pub fn endpoint_consistency_check(
    plant: &NormalFormPlant,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
    gains: GainInterval,
    alpha: ClassKeLinear,
    plan: &SamplePlan,
    interior_gains: usize,
) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut discrepancies = 0usize;
    for _ in 0..plan.sample_count {
        let (t, y, eta) = sample_point(&mut rng, plant, boundary, reference, plan);
        let Ok(set) = candidate_set(t, &y, boundary, reference, gains) else {
            continue;
        };
        let admissible = |k: f64| {
            let u = funnel_feedback(&set, k).expect("gain inside interval");
            admissibility_margin(t, &y, &eta, &u, alpha, plant, boundary, reference).0
        };
        if !(admissible(gains.k_min()) && admissible(gains.k_max())) {
            continue;
        }
        // Geometric spread of interior gains.
        let log_lo = gains.k_min().ln();
        let log_hi = gains.k_max().ln();
        for i in 1..=interior_gains {
            let f = i as f64 / (interior_gains as f64 + 1.0);
            let k = (log_lo + f * (log_hi - log_lo)).exp();
            if !admissible(k.clamp(gains.k_min(), gains.k_max())) {
                discrepancies += 1;
                break;
            }
        }
    }
    discrepancies
}

/// Result of the constructive-witness margin check.
#[derive(Debug, Clone)]
pub struct WitnessReport {
    pub samples: usize,
    pub min_margin: f64,
    /// `c·psi_inf²`, the additive constant surviving the margin estimate.
    pub threshold: f64,
    pub pass: bool,
    pub worst: Option<MarginSample>,
}

/// Evaluate the model-based witness input at sampled interior points and
/// check its margin against `α(s) = 2·max{2c,1}·s` stays above
/// `c·psi_inf²` (up to 1e-9 rounding slack).
///
/// A singular coupling matrix at a sample is a structural violation and is
/// reported as the underlying plant error.
pub fn witness_check(
    plant: &NormalFormPlant,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
    plan: &SamplePlan,
) -> Result<WitnessReport, PlantError> {
    let c = boundary.growth_constant();
    let alpha = ClassKeLinear {
        slope: 2.0 * (2.0 * c).max(1.0),
    };
    let threshold = c * boundary.psi_inf() * boundary.psi_inf();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut min_margin = f64::INFINITY;
    let mut worst = None;

    for _ in 0..plan.sample_count {
        let (t, y, eta) = sample_point(&mut rng, plant, boundary, reference, plan);
        let u = witness_input(plant, t, &y, &eta, c, reference)?;
        let (_, margin) = admissibility_margin(t, &y, &eta, &u, alpha, plant, boundary, reference);
        if margin < min_margin {
            min_margin = margin;
            worst = Some(MarginSample {
                t,
                y: y.clone(),
                eta: eta.clone(),
                gain: f64::NAN,
                barrier: barrier_value(t, &y, boundary, reference),
                margin,
            });
        }
    }
    Ok(WitnessReport {
        samples: plan.sample_count,
        min_margin,
        threshold,
        pass: min_margin >= threshold - 1e-9,
        worst,
    })
}

/// Guaranteed containment ratio: the closed loop keeps `‖e(t)‖ ≤ ε·ψ(t)`.
///
/// `R = (sup|ψ̇/ψ| + (f_bar + ẏ_r_sup)/psi_inf) / (2·g_underbar·k_min/psi_sup)`
/// and `ε̂ = √(R/(1+R))` is the smallest value with `ε̂²/(1−ε̂²) ≥ R`; the
/// initial ratio is folded in with a max.
pub fn error_ratio_bound(
    bounds: &ModelBounds,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
    gains: GainInterval,
    e0_ratio: f64,
) -> Result<f64, VerifyError> {
    if !(0.0..1.0).contains(&e0_ratio) {
        return Err(VerifyError::InvalidInitialRatio(e0_ratio));
    }
    let numerator =
        boundary.slope_ratio_sup() + (bounds.f_bar + reference.y_r_dot_sup()) / boundary.psi_inf();
    let denominator = 2.0 * bounds.g_underbar * gains.k_min() / boundary.psi_sup();
    let r = numerator / denominator;
    let eps_hat = (r / (1.0 + r)).sqrt();
    Ok(e0_ratio.max(eps_hat))
}

/// Invariance verdict for a recorded trajectory.
#[derive(Debug, Clone, Copy)]
pub struct InvarianceReport {
    pub holds: bool,
    pub max_ratio: f64,
    pub epsilon: f64,
}

/// Check `‖e(t)‖/ψ(t) ≤ ε + 1e-6` along a recorded trajectory.
pub fn invariance_check(trajectory: &Trajectory, epsilon: f64) -> InvarianceReport {
    let max_ratio = trajectory
        .ratios
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    InvarianceReport {
        holds: max_ratio <= epsilon + 1e-6,
        max_ratio,
        epsilon,
    }
}
