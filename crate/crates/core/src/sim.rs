//! Fixed-step closed-loop simulation with trajectory logging.
//!
//! Integration is classical RK4 with the feedback evaluated inside the stage
//! derivatives (continuous-feedback semantics). Interior controllers halt
//! the run when the barrier value drops to the violation guard; a halt is
//! reported in the trajectory status, never clipped away. The saturated
//! filter is defined everywhere and keeps integrating outside the tube.

use std::io::{self, Write};

use nalgebra::DVector;
use thiserror::Error;

use crate::barrier::barrier_value;
use crate::control::{
    candidate_set, funnel_feedback, safety_filter, saturated_candidate_set, ControlError,
    GainInterval, SaturationParam,
};
use crate::funnel::FunnelBoundary;
use crate::plant::{usv, PlantModel};
use crate::reference::ReferenceSignal;

/// Barrier level at which an interior-controller run halts, before the
/// `1/b` gain overflows.
pub const VIOLATION_GUARD: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("initial output outside the tube (error ratio {0}) for an interior controller")]
    ExteriorInitialOutput(f64),
    #[error("initial state has dimension {got}, plant expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step must be positive and no larger than the horizon")]
    InvalidStep,
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("metrics require a completed trajectory, got {0:?}")]
    IncompleteTrajectory(TrajectoryStatus),
    #[error("reduction undefined: baseline input MSE is zero")]
    ZeroBaselineMse,
    #[error("recovery analysis requires the saturated-filter controller")]
    NotSaturatedController,
}

/// Source of the desired input used by the filter cost and by metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputRef {
    Zero,
    /// `u_r(t) = G(y_r(t))⁻¹·ẏ_r(t)` for the surface vessel.
    UsvKinematic,
}

impl InputRef {
    pub fn eval(&self, t: f64, dim: usize) -> DVector<f64> {
        match self {
            InputRef::Zero => DVector::zeros(dim),
            InputRef::UsvKinematic => {
                debug_assert_eq!(dim, 3, "kinematic input reference is three-dimensional");
                usv::input_reference(t)
            }
        }
    }
}

/// Output-feedback policy run in the loop.
#[derive(Debug, Clone)]
pub enum Controller {
    /// Fixed-gain element `k·∇_y b/b` of the candidate set.
    Funnel {
        k: f64,
        gains: GainInterval,
        u_ref: InputRef,
    },
    /// Minimally invasive filter over the interior candidate set.
    SafetyFilter {
        gains: GainInterval,
        u_ref: InputRef,
    },
    /// Filter over the saturated set; defined outside the tube as well.
    SaturatedFilter {
        gains: GainInterval,
        saturation: SaturationParam,
        u_ref: InputRef,
    },
}

impl Controller {
    /// Interior controllers are undefined on and outside the tube boundary.
    pub fn requires_interior(&self) -> bool {
        !matches!(self, Controller::SaturatedFilter { .. })
    }

    pub fn gains(&self) -> GainInterval {
        match self {
            Controller::Funnel { gains, .. }
            | Controller::SafetyFilter { gains, .. }
            | Controller::SaturatedFilter { gains, .. } => *gains,
        }
    }

    pub fn input_ref(&self) -> InputRef {
        match self {
            Controller::Funnel { u_ref, .. }
            | Controller::SafetyFilter { u_ref, .. }
            | Controller::SaturatedFilter { u_ref, .. } => *u_ref,
        }
    }

    /// Feedback value at `(t, y)`.
    pub fn compute(
        &self,
        t: f64,
        y: &DVector<f64>,
        boundary: &FunnelBoundary,
        reference: &ReferenceSignal,
    ) -> Result<DVector<f64>, ControlError> {
        match self {
            Controller::Funnel { k, gains, .. } => {
                let set = candidate_set(t, y, boundary, reference, *gains)?;
                funnel_feedback(&set, *k)
            }
            Controller::SafetyFilter { gains, u_ref } => {
                let set = candidate_set(t, y, boundary, reference, *gains)?;
                Ok(safety_filter(&set, &u_ref.eval(t, y.len())).input)
            }
            Controller::SaturatedFilter {
                gains,
                saturation,
                u_ref,
            } => {
                let set = saturated_candidate_set(t, y, boundary, reference, *gains, *saturation);
                Ok(safety_filter(&set, &u_ref.eval(t, y.len())).input)
            }
        }
    }
}

/// Configuration of one closed-loop run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub t0: f64,
    pub horizon: f64,
    /// Logging grid step; states, inputs and barrier values are recorded at
    /// every multiple of this.
    pub step: f64,
    /// Fixed number of RK4 sub-intervals per grid step (≥ 1). Barrier-riding
    /// feedbacks concentrate their stiffness in a thin layer at the tube
    /// boundary; substepping resolves it without touching the logging grid.
    pub substeps: usize,
    pub initial_state: DVector<f64>,
    pub controller: Controller,
    /// Barrier guard for interior controllers.
    pub guard: f64,
}

impl SimConfig {
    pub fn new(
        t0: f64,
        horizon: f64,
        step: f64,
        initial_state: Vec<f64>,
        controller: Controller,
    ) -> Self {
        Self {
            t0,
            horizon,
            step,
            substeps: 1,
            initial_state: DVector::from_vec(initial_state),
            controller,
            guard: VIOLATION_GUARD,
        }
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps.max(1);
        self
    }
}

/// How a run ended. The payload is the grid time where integration stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryStatus {
    Completed,
    Violated(f64),
    Diverged(f64),
}

/// Sampled closed-loop record. All arrays share one length.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub barriers: Vec<f64>,
    /// `‖e(t)‖/ψ(t)` per grid point.
    pub ratios: Vec<f64>,
    pub status: TrajectoryStatus,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_barrier(&self) -> f64 {
        self.barriers.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV export: header `t,x1..xn,y1..ym,u1..um,b,ratio`, one row per grid
    /// point at full double precision.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map(|x| x.len()).unwrap_or(0);
        let m = self.outputs.first().map(|y| y.len()).unwrap_or(0);
        let mut header = String::from("t");
        for i in 1..=n {
            header.push_str(&format!(",x{i}"));
        }
        for i in 1..=m {
            header.push_str(&format!(",y{i}"));
        }
        for i in 1..=m {
            header.push_str(&format!(",u{i}"));
        }
        header.push_str(",b,ratio");
        writeln!(w, "{header}")?;
        for i in 0..self.len() {
            write!(w, "{:.16e}", self.times[i])?;
            for v in self.states[i].iter() {
                write!(w, ",{v:.16e}")?;
            }
            for v in self.outputs[i].iter() {
                write!(w, ",{v:.16e}")?;
            }
            for v in self.inputs[i].iter() {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w, ",{:.16e},{:.16e}", self.barriers[i], self.ratios[i])?;
        }
        Ok(())
    }
}

/// Classical fourth-order Runge–Kutta update.
///
/// The derivative closure may refuse a stage (controller undefined, plant
/// domain error) by returning `None`; the step then aborts. A non-finite
/// stage value aborts likewise, which callers treat as a diverged signal.
pub fn rk4_step<F>(mut derivative: F, t: f64, x: &DVector<f64>, h: f64) -> Option<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Option<DVector<f64>>,
{
    debug_assert!(h > 0.0);
    let finite = |v: DVector<f64>| v.iter().all(|a| a.is_finite()).then_some(v);
    let k1 = finite(derivative(t, x)?)?;
    let k2 = finite(derivative(t + 0.5 * h, &(x + &k1 * (0.5 * h)))?)?;
    let k3 = finite(derivative(t + 0.5 * h, &(x + &k2 * (0.5 * h)))?)?;
    let k4 = finite(derivative(t + h, &(x + &k3 * h))?)?;
    Some(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Integrate the closed loop on a uniform grid.
///
/// The controller sees only `(t, y)`. Interior controllers require an
/// interior initial output and halt with `Violated` when the barrier falls
/// to the guard; any non-finite state or stage halts with `Diverged`.
pub fn simulate_closed_loop(
    plant: &PlantModel,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
    config: &SimConfig,
) -> Result<Trajectory, SimError> {
    if config.step.is_nan() || config.step <= 0.0 || config.step > config.horizon {
        return Err(SimError::InvalidStep);
    }
    if config.initial_state.len() != plant.state_dim() {
        return Err(SimError::DimensionMismatch {
            expected: plant.state_dim(),
            got: config.initial_state.len(),
        });
    }
    if let Controller::Funnel { k, gains, .. } = &config.controller {
        if !gains.contains(*k) {
            return Err(SimError::Control(ControlError::GainOutOfRange {
                k: *k,
                k_min: gains.k_min(),
                k_max: gains.k_max(),
            }));
        }
    }

    let interior = config.controller.requires_interior();
    let y0 = plant.output(&config.initial_state);
    let b0 = barrier_value(config.t0, &y0, boundary, reference);
    if interior && b0 <= config.guard {
        let e0 = (&y0 - reference.y_r(config.t0)).norm();
        return Err(SimError::ExteriorInitialOutput(
            e0 / boundary.psi(config.t0),
        ));
    }

    let steps = (config.horizon / config.step).round() as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        outputs: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps + 1),
        barriers: Vec::with_capacity(steps + 1),
        ratios: Vec::with_capacity(steps + 1),
        status: TrajectoryStatus::Completed,
    };

    let mut x = config.initial_state.clone();
    for i in 0..=steps {
        let t = config.t0 + i as f64 * config.step;
        let y = plant.output(&x);
        let b = barrier_value(t, &y, boundary, reference);
        let ratio = (&y - reference.y_r(t)).norm() / boundary.psi(t);

        if interior && b <= config.guard {
            traj.status = TrajectoryStatus::Violated(t);
            break;
        }
        let u = match config.controller.compute(t, &y, boundary, reference) {
            Ok(u) => u,
            Err(_) => {
                traj.status = TrajectoryStatus::Violated(t);
                break;
            }
        };

        traj.times.push(t);
        traj.states.push(x.clone());
        traj.outputs.push(y);
        traj.inputs.push(u);
        traj.barriers.push(b);
        traj.ratios.push(ratio);

        if i == steps {
            break;
        }

        // Stage derivative: feedback recomputed at every stage point.
        let mut violated_stage = false;
        let mut derivative = |ts: f64, xs: &DVector<f64>| {
            let ys = plant.output(xs);
            if interior && barrier_value(ts, &ys, boundary, reference) <= config.guard {
                violated_stage = true;
                return None;
            }
            let us = match config.controller.compute(ts, &ys, boundary, reference) {
                Ok(us) => us,
                Err(_) => {
                    violated_stage = true;
                    return None;
                }
            };
            plant.dynamics(xs, &us).ok()
        };

        let substeps = config.substeps.max(1);
        let h = config.step / substeps as f64;
        let mut failed = false;
        for j in 0..substeps {
            let ts = t + j as f64 * h;
            match rk4_step(&mut derivative, ts, &x, h) {
                Some(x_next) if x_next.iter().all(|v| v.is_finite()) => x = x_next,
                _ => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            traj.status = if violated_stage {
                TrajectoryStatus::Violated(t)
            } else {
                TrajectoryStatus::Diverged(t)
            };
            break;
        }
    }
    Ok(traj)
}

/// Summary statistics of a completed run.
#[derive(Debug, Clone, Copy)]
pub struct Metrics {
    pub min_barrier: f64,
    pub max_ratio: f64,
    /// Mean of `‖u(t) − u_r(t)‖²` over the grid.
    pub input_mse: f64,
    pub sup_input_norm: f64,
}

/// Compute metrics against a desired-input source.
pub fn compute_metrics(trajectory: &Trajectory, u_ref: InputRef) -> Result<Metrics, SimError> {
    if trajectory.status != TrajectoryStatus::Completed {
        return Err(SimError::IncompleteTrajectory(trajectory.status));
    }
    let m = trajectory.outputs.first().map(|y| y.len()).unwrap_or(0);
    let mut mse = 0.0;
    let mut sup_u = 0.0f64;
    for (t, u) in trajectory.times.iter().zip(&trajectory.inputs) {
        mse += (u - u_ref.eval(*t, m)).norm_squared();
        sup_u = sup_u.max(u.norm());
    }
    mse /= trajectory.len() as f64;
    Ok(Metrics {
        min_barrier: trajectory.min_barrier(),
        max_ratio: trajectory.max_ratio(),
        input_mse: mse,
        sup_input_norm: sup_u,
    })
}

/// Relative input-MSE reduction of `b` against baseline `a`:
/// `1 − b.input_mse / a.input_mse`.
pub fn compare_runs(a: &Metrics, b: &Metrics) -> Result<f64, SimError> {
    if a.input_mse <= 0.0 {
        return Err(SimError::ZeroBaselineMse);
    }
    Ok(1.0 - b.input_mse / a.input_mse)
}

/// Outcome of a return-to-tube run under the saturated filter.
#[derive(Debug, Clone)]
pub struct RecoveryOutcome {
    pub trajectory: Trajectory,
    /// First grid time with positive barrier value, if any.
    pub entered_at: Option<f64>,
    /// Whether the barrier stayed positive from entry to the end of the run.
    pub remains_interior: bool,
}

/// Run the saturated filter from an arbitrary (possibly exterior) state and
/// report when the tube is entered and whether the run stays inside.
pub fn recovery_run(
    plant: &PlantModel,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
    config: &SimConfig,
) -> Result<RecoveryOutcome, SimError> {
    if !matches!(config.controller, Controller::SaturatedFilter { .. }) {
        return Err(SimError::NotSaturatedController);
    }
    let trajectory = simulate_closed_loop(plant, boundary, reference, config)?;
    let entered_idx = trajectory.barriers.iter().position(|b| *b > 0.0);
    let remains_interior = match entered_idx {
        Some(i) => trajectory.barriers[i..].iter().all(|b| *b > 0.0),
        None => false,
    };
    Ok(RecoveryOutcome {
        entered_at: entered_idx.map(|i| trajectory.times[i]),
        remains_interior,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funnel::FunnelBoundary;
    use crate::plant::NormalFormPlant;
    use crate::sampling::uniform_grid;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn integrator(m: usize) -> PlantModel {
        PlantModel::NormalForm(NormalFormPlant::new(
            "integrator",
            m,
            0,
            |_, _| DVector::zeros(2),
            |_, _| DMatrix::identity(2, 2),
            |_, _| DVector::zeros(0),
        ))
    }

    fn static_problem() -> (FunnelBoundary, ReferenceSignal) {
        let grid = uniform_grid(0.0, 5.0, 1e-2);
        (
            FunnelBoundary::constant(1.0, 0.5, &grid).unwrap(),
            ReferenceSignal::constant(vec![0.0, 0.0], &grid).unwrap(),
        )
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        let x0 = DVector::from_row_slice(&[1.0]);
        let x1 = rk4_step(|_, x| Some(-x.clone()), 0.0, &x0, 0.1).unwrap();
        assert_relative_eq!(x1[0], 0.90483750, max_relative = 1e-8);
        assert!((x1[0] - (-0.1f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn rk4_trivial_fields() {
        let x0 = DVector::from_row_slice(&[2.0]);
        let fixed = rk4_step(|_, _| Some(DVector::zeros(1)), 0.0, &x0, 0.5).unwrap();
        assert_eq!(fixed[0], 2.0);
        let constant =
            rk4_step(|_, _| Some(DVector::from_row_slice(&[1.0])), 0.0, &x0, 0.5).unwrap();
        assert_eq!(constant[0], 2.5);
        // RK4 integrates cubic-in-time fields exactly.
        let cubic = rk4_step(
            |t, _| Some(DVector::from_row_slice(&[3.0 * t * t])),
            0.0,
            &x0,
            0.5,
        )
        .unwrap();
        assert_relative_eq!(cubic[0], 2.0 + 0.125, max_relative = 1e-14);
    }

    #[test]
    fn rk4_signals_nonfinite_stage() {
        let x0 = DVector::from_row_slice(&[1.0]);
        assert!(rk4_step(
            |_, _| Some(DVector::from_row_slice(&[f64::NAN])),
            0.0,
            &x0,
            0.1
        )
        .is_none());
        assert!(rk4_step(|_, _| None::<DVector<f64>>, 0.0, &x0, 0.1).is_none());
    }

    fn funnel_config(k: f64, y0: Vec<f64>, horizon: f64, step: f64) -> SimConfig {
        SimConfig::new(
            0.0,
            horizon,
            step,
            y0,
            Controller::Funnel {
                k,
                gains: GainInterval::new(1e-3, 1e3).unwrap(),
                u_ref: InputRef::Zero,
            },
        )
    }

    #[test]
    fn integrator_error_decays_inside_tube() {
        let (boundary, reference) = static_problem();
        let plant = integrator(2);
        let config = funnel_config(1.0, vec![0.5, 0.0], 5.0, 1e-3);
        let traj = simulate_closed_loop(&plant, &boundary, &reference, &config).unwrap();
        assert_eq!(traj.status, TrajectoryStatus::Completed);
        assert!(traj.max_ratio() <= 0.5 + 1e-12);
        assert!(traj.ratios.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(*traj.ratios.last().unwrap() < 0.05);
    }

    #[test]
    fn integrator_run_matches_fine_step_oracle() {
        let (boundary, reference) = static_problem();
        let plant = integrator(2);
        let coarse = simulate_closed_loop(
            &plant,
            &boundary,
            &reference,
            &funnel_config(1.0, vec![0.5, 0.0], 1.0, 1e-3),
        )
        .unwrap();
        let fine = simulate_closed_loop(
            &plant,
            &boundary,
            &reference,
            &funnel_config(1.0, vec![0.5, 0.0], 1.0, 1e-5),
        )
        .unwrap();
        let xc = coarse.states.last().unwrap();
        let xf = fine.states.last().unwrap();
        assert!((xc - xf).norm() < 1e-6, "gap {}", (xc - xf).norm());
    }

    #[test]
    fn perfect_start_stays_on_the_reference() {
        // Zero initial error on a driftless plant: the candidate set is the
        // degenerate segment {0} and the error stays zero.
        let (boundary, reference) = static_problem();
        let plant = integrator(2);
        let traj = simulate_closed_loop(
            &plant,
            &boundary,
            &reference,
            &funnel_config(1.0, vec![0.0, 0.0], 1.0, 1e-3),
        )
        .unwrap();
        assert_eq!(traj.status, TrajectoryStatus::Completed);
        assert!(traj.max_ratio() < 1e-12);
        let m = compute_metrics(&traj, InputRef::Zero).unwrap();
        // Inputs identically equal to the (zero) reference input: zero MSE.
        assert_eq!(m.input_mse, 0.0);
    }

    #[test]
    fn exterior_start_is_a_config_error_for_interior_controllers() {
        let (boundary, reference) = static_problem();
        let plant = integrator(2);
        let config = funnel_config(1.0, vec![1.5, 0.0], 1.0, 1e-3);
        assert!(matches!(
            simulate_closed_loop(&plant, &boundary, &reference, &config),
            Err(SimError::ExteriorInitialOutput(_))
        ));
    }

    #[test]
    fn funnel_gain_outside_interval_rejected() {
        let (boundary, reference) = static_problem();
        let plant = integrator(2);
        let config = funnel_config(1e4, vec![0.5, 0.0], 1.0, 1e-3);
        assert!(matches!(
            simulate_closed_loop(&plant, &boundary, &reference, &config),
            Err(SimError::Control(ControlError::GainOutOfRange { .. }))
        ));
    }

    #[test]
    fn overpowering_drift_halts_as_violated() {
        let grid = uniform_grid(0.0, 2.0, 1e-2);
        let boundary = FunnelBoundary::constant(0.5, 0.5, &grid).unwrap();
        let reference = ReferenceSignal::constant(vec![0.0, 0.0], &grid).unwrap();
        let plant = PlantModel::NormalForm(NormalFormPlant::new(
            "runaway",
            2,
            0,
            |_, _| DVector::from_row_slice(&[10.0, 0.0]),
            |_, _| DMatrix::identity(2, 2),
            |_, _| DVector::zeros(0),
        ));
        let config = SimConfig::new(
            0.0,
            2.0,
            1e-2,
            vec![0.0, 0.0],
            Controller::Funnel {
                k: 1e-3,
                gains: GainInterval::new(1e-3, 1e-2).unwrap(),
                u_ref: InputRef::Zero,
            },
        );
        let traj = simulate_closed_loop(&plant, &boundary, &reference, &config).unwrap();
        assert!(matches!(traj.status, TrajectoryStatus::Violated(_)));
        assert!(compute_metrics(&traj, InputRef::Zero).is_err());
    }

    #[test]
    fn finite_time_blowup_reports_diverged() {
        let grid = uniform_grid(0.0, 1.0, 1e-2);
        let boundary = FunnelBoundary::constant(100.0, 0.5, &grid).unwrap();
        let reference = ReferenceSignal::constant(vec![0.0, 0.0], &grid).unwrap();
        let plant = PlantModel::NormalForm(NormalFormPlant::new(
            "cubic",
            2,
            0,
            |y, _| DVector::from_row_slice(&[y[0].powi(3), 0.0]),
            |_, _| DMatrix::identity(2, 2),
            |_, _| DVector::zeros(0),
        ));
        let config = SimConfig::new(
            0.0,
            1.0,
            1e-2,
            vec![3.0, 0.0],
            Controller::SaturatedFilter {
                gains: GainInterval::new(1e-9, 1e-8).unwrap(),
                saturation: SaturationParam::new(1.0).unwrap(),
                u_ref: InputRef::Zero,
            },
        );
        let traj = simulate_closed_loop(&plant, &boundary, &reference, &config).unwrap();
        assert!(matches!(traj.status, TrajectoryStatus::Diverged(_)));
    }

    #[test]
    fn metrics_identities() {
        let (boundary, reference) = static_problem();
        let plant = integrator(2);
        let traj = simulate_closed_loop(
            &plant,
            &boundary,
            &reference,
            &funnel_config(1.0, vec![0.4, 0.1], 2.0, 1e-3),
        )
        .unwrap();
        let m = compute_metrics(&traj, InputRef::Zero).unwrap();
        // u_ref = 0: MSE is the mean squared input norm.
        let mean: f64 =
            traj.inputs.iter().map(|u| u.norm_squared()).sum::<f64>() / traj.len() as f64;
        assert_relative_eq!(m.input_mse, mean, max_relative = 1e-12);
        assert!(m.max_ratio < 1.0 && m.min_barrier > 0.0);
        assert!(m.sup_input_norm >= traj.inputs.last().unwrap().norm());
    }

    #[test]
    fn constant_offset_input_gives_unit_mse() {
        // Hand-built trajectory: u - u_ref = [1, 0] at every grid point.
        let traj = Trajectory {
            times: vec![0.0, 0.1, 0.2],
            states: vec![DVector::zeros(2); 3],
            outputs: vec![DVector::zeros(2); 3],
            inputs: vec![DVector::from_row_slice(&[1.0, 0.0]); 3],
            barriers: vec![0.5; 3],
            ratios: vec![0.0; 3],
            status: TrajectoryStatus::Completed,
        };
        let m = compute_metrics(&traj, InputRef::Zero).unwrap();
        assert_relative_eq!(m.input_mse, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn reduction_arithmetic() {
        let a = Metrics {
            min_barrier: 0.1,
            max_ratio: 0.5,
            input_mse: 1.0,
            sup_input_norm: 1.0,
        };
        let mut b = a;
        assert_eq!(compare_runs(&a, &b).unwrap(), 0.0);
        b.input_mse = 0.16;
        assert_relative_eq!(compare_runs(&a, &b).unwrap(), 0.84, max_relative = 1e-12);
        b.input_mse = 2.0;
        assert!(compare_runs(&a, &b).unwrap() < 0.0);
        let zero = Metrics {
            input_mse: 0.0,
            ..a
        };
        assert!(matches!(
            compare_runs(&zero, &b),
            Err(SimError::ZeroBaselineMse)
        ));
    }

    #[test]
    fn recovery_from_interior_start_enters_immediately() {
        let (boundary, reference) = static_problem();
        let plant = integrator(2);
        let config = SimConfig::new(
            0.0,
            1.0,
            1e-3,
            vec![0.3, 0.0],
            Controller::SaturatedFilter {
                gains: GainInterval::new(10.0, 1e3).unwrap(),
                saturation: SaturationParam::new(0.05).unwrap(),
                u_ref: InputRef::Zero,
            },
        );
        let out = recovery_run(&plant, &boundary, &reference, &config).unwrap();
        assert_eq!(out.entered_at, Some(0.0));
        assert!(out.remains_interior);
    }

    #[test]
    fn recovery_requires_saturated_controller() {
        let (boundary, reference) = static_problem();
        let plant = integrator(2);
        let config = funnel_config(1.0, vec![0.3, 0.0], 1.0, 1e-3);
        assert!(matches!(
            recovery_run(&plant, &boundary, &reference, &config),
            Err(SimError::NotSaturatedController)
        ));
    }

    #[test]
    fn csv_export_is_deterministic_and_well_formed() {
        let (boundary, reference) = static_problem();
        let plant = integrator(2);
        let config = funnel_config(1.0, vec![0.5, 0.0], 0.1, 1e-2);
        let traj = simulate_closed_loop(&plant, &boundary, &reference, &config).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        traj.write_csv(&mut a).unwrap();
        traj.write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,x2,y1,y2,u1,u2,b,ratio");
        assert_eq!(lines.count(), traj.len());
    }
}
