//! Scenario files: schema, loading, and resolution into toolkit values.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use funnel_cbf::plant::linear;
use funnel_cbf::sampling::uniform_grid;
use funnel_cbf::{
    Controller, FunnelBoundary, GainInterval, InputRef, PlantModel, ReferenceSignal, SampleBox,
    SaturationParam, SimConfig,
};

/// Grid step used to certify funnel and reference class membership.
pub const VALIDATION_GRID_STEP: f64 = 1e-2;
/// Tolerance for the reference-derivative finite-difference check.
pub const REFERENCE_FD_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CliError {
    /// Scenario or usage problem: exit code 2.
    #[error("{0}")]
    Invalid(String),
    /// A run or check failed: exit code 1.
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Run(_) => 1,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn run(msg: impl Into<String>) -> Self {
        CliError::Run(msg.into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunnelSpec {
    /// `ψ(t) = a·e^(−rate·t) + offset`.
    Exponential {
        a: f64,
        rate: f64,
        offset: f64,
        c: f64,
    },
    Constant {
        value: f64,
        c: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// The surface-vessel benchmark trajectory.
    Usv,
    /// `[A·sin(ωt), A·cos(ωt)]`.
    Circle {
        amplitude: f64,
        omega: f64,
    },
    Constant {
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum InputRefSpec {
    Zero,
    Usv,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControllerSpec {
    Funnel {
        k: f64,
        k_min: f64,
        k_max: f64,
        u_ref: InputRefSpec,
    },
    CbfFilter {
        k_min: f64,
        k_max: f64,
        u_ref: InputRefSpec,
    },
    SaturatedFilter {
        k_min: f64,
        k_max: f64,
        delta: f64,
        u_ref: InputRefSpec,
    },
}

impl ControllerSpec {
    pub fn u_ref(&self) -> InputRefSpec {
        match self {
            ControllerSpec::Funnel { u_ref, .. }
            | ControllerSpec::CbfFilter { u_ref, .. }
            | ControllerSpec::SaturatedFilter { u_ref, .. } => *u_ref,
        }
    }
}

fn default_t0() -> f64 {
    0.0
}

fn default_substeps() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default = "default_t0")]
    pub t0: f64,
    pub horizon: f64,
    pub step: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    pub initial_state: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

fn default_sample_count() -> usize {
    10_000
}

fn default_witness_samples() -> usize {
    1_000
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default = "default_witness_samples")]
    pub witness_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Internal-state ball radius; derived from the built-in plant's
    /// analytic bound when absent.
    #[serde(default)]
    pub q_bar: Option<f64>,
    /// State box for the definiteness check (and, via its output part, the
    /// clipping region for bound estimation).
    #[serde(default)]
    pub state_box: Option<BoxSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub plant: String,
    pub funnel: FunnelSpec,
    pub reference: ReferenceSpec,
    pub controller: ControllerSpec,
    pub sim: SimSpec,
    #[serde(default)]
    pub verify: Option<VerifySpec>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub out_dir: Option<String>,
    pub no_plot: bool,
}

/// A scenario resolved into toolkit values, ready to run.
#[derive(Debug)]
pub struct LoadedScenario {
    pub spec: ScenarioSpec,
    pub plant: PlantModel,
    pub boundary: FunnelBoundary,
    pub reference: ReferenceSignal,
    pub sim: SimConfig,
    pub output_dir: String,
    pub no_plot: bool,
}

impl LoadedScenario {
    pub fn input_ref(&self) -> InputRef {
        match self.spec.controller.u_ref() {
            InputRefSpec::Zero => InputRef::Zero,
            InputRefSpec::Usv => InputRef::UsvKinematic,
        }
    }

    /// Error ratio of the initial output, `‖y⁰ − y_r(t0)‖/ψ(t0)`.
    pub fn initial_ratio(&self) -> f64 {
        let y0 = self.plant.output(&self.sim.initial_state);
        let e0 = (y0 - self.reference.y_r(self.sim.t0)).norm();
        e0 / self.boundary.psi(self.sim.t0)
    }
}

fn build_funnel(spec: &FunnelSpec, grid: &[f64]) -> Result<FunnelBoundary, CliError> {
    let built = match spec {
        FunnelSpec::Exponential { a, rate, offset, c } => {
            FunnelBoundary::exponential(*a, *rate, *offset, *c, grid)
        }
        FunnelSpec::Constant { value, c } => FunnelBoundary::constant(*value, *c, grid),
    };
    built.map_err(|e| CliError::invalid(format!("funnel spec rejected: {e}")))
}

fn build_reference(spec: &ReferenceSpec, grid: &[f64]) -> Result<ReferenceSignal, CliError> {
    let built = match spec {
        ReferenceSpec::Usv => funnel_cbf::usv::reference(grid),
        ReferenceSpec::Circle { amplitude, omega } => {
            ReferenceSignal::circle(*amplitude, *omega, grid)
        }
        ReferenceSpec::Constant { value } => ReferenceSignal::constant(value.clone(), grid),
    };
    built.map_err(|e| CliError::invalid(format!("reference spec rejected: {e}")))
}

fn build_controller(spec: &ControllerSpec) -> Result<Controller, CliError> {
    let gains = |k_min: f64, k_max: f64| {
        GainInterval::new(k_min, k_max)
            .map_err(|e| CliError::invalid(format!("controller gains rejected: {e}")))
    };
    let u_ref = |s: InputRefSpec| match s {
        InputRefSpec::Zero => InputRef::Zero,
        InputRefSpec::Usv => InputRef::UsvKinematic,
    };
    Ok(match spec {
        ControllerSpec::Funnel {
            k,
            k_min,
            k_max,
            u_ref: ur,
        } => Controller::Funnel {
            k: *k,
            gains: gains(*k_min, *k_max)?,
            u_ref: u_ref(*ur),
        },
        ControllerSpec::CbfFilter {
            k_min,
            k_max,
            u_ref: ur,
        } => Controller::SafetyFilter {
            gains: gains(*k_min, *k_max)?,
            u_ref: u_ref(*ur),
        },
        ControllerSpec::SaturatedFilter {
            k_min,
            k_max,
            delta,
            u_ref: ur,
        } => Controller::SaturatedFilter {
            gains: gains(*k_min, *k_max)?,
            saturation: SaturationParam::new(*delta)
                .map_err(|e| CliError::invalid(format!("saturation rejected: {e}")))?,
            u_ref: u_ref(*ur),
        },
    })
}

/// Parse a scenario file and resolve it, applying overrides.
///
/// Refuses unknown plant labels, funnels failing class validation,
/// references failing the derivative consistency check, and dimension
/// mismatches, all before anything runs.
pub fn load_scenario(path: &Path, overrides: &Overrides) -> Result<LoadedScenario, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read scenario {}: {e}", path.display())))?;
    let mut spec: ScenarioSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::invalid(format!("cannot parse scenario {}: {e}", path.display())))?;

    if let Some(step) = overrides.step {
        spec.sim.step = step;
    }
    if let Some(horizon) = overrides.horizon {
        spec.sim.horizon = horizon;
    }
    if let Some(verify) = spec.verify.as_mut() {
        if let Some(seed) = overrides.seed {
            verify.seed = seed;
        }
    }

    let plant = PlantModel::by_label(&spec.plant)
        .map_err(|e| CliError::invalid(format!("unknown plant label: {e}")))?;

    if !(spec.sim.step > 0.0 && spec.sim.step <= spec.sim.horizon) {
        return Err(CliError::invalid(format!(
            "sim step {} must be positive and at most the horizon {}",
            spec.sim.step, spec.sim.horizon
        )));
    }
    let grid = uniform_grid(spec.sim.t0, spec.sim.horizon, VALIDATION_GRID_STEP);

    let boundary = build_funnel(&spec.funnel, &grid)?;
    let report = boundary
        .validate(&grid)
        .map_err(|e| CliError::invalid(format!("funnel validation failed: {e}")))?;
    if !report.valid {
        return Err(CliError::invalid(format!(
            "funnel fails class validation: min psi {} at t={}, worst slope ratio {} at t={} exceeds c={}",
            report.min_psi,
            report.min_psi_time,
            report.worst_ratio,
            report.worst_ratio_time,
            report.growth_constant
        )));
    }

    let reference = build_reference(&spec.reference, &grid)?;
    if reference.dim() != plant.output_dim() {
        return Err(CliError::invalid(format!(
            "reference dimension {} does not match plant output dimension {}",
            reference.dim(),
            plant.output_dim()
        )));
    }
    let ref_report = reference
        .validate(&grid, REFERENCE_FD_TOL)
        .map_err(|e| CliError::invalid(format!("reference validation failed: {e}")))?;
    if !ref_report.valid {
        return Err(CliError::invalid(format!(
            "reference fails class validation: derivative mismatch {}",
            ref_report.max_derivative_mismatch
        )));
    }

    if spec.controller.u_ref() == InputRefSpec::Usv && plant.output_dim() != 3 {
        return Err(CliError::invalid(
            "usv input reference requires a three-output plant".to_string(),
        ));
    }
    if spec.sim.initial_state.len() != plant.state_dim() {
        return Err(CliError::invalid(format!(
            "initial state has dimension {}, plant '{}' expects {}",
            spec.sim.initial_state.len(),
            spec.plant,
            plant.state_dim()
        )));
    }
    if let Some(v) = &spec.verify {
        if let Some(bx) = &v.state_box {
            if bx.lower.len() != plant.state_dim() || bx.upper.len() != plant.state_dim() {
                return Err(CliError::invalid(format!(
                    "verify state_box must have dimension {}",
                    plant.state_dim()
                )));
            }
            if bx.lower.iter().zip(&bx.upper).any(|(l, u)| l > u) {
                return Err(CliError::invalid("verify state_box has inverted bounds"));
            }
        }
    }

    let controller = build_controller(&spec.controller)?;
    if let Controller::Funnel { k, gains, .. } = &controller {
        if !gains.contains(*k) {
            return Err(CliError::invalid(format!(
                "funnel gain {k} outside [{}, {}]",
                gains.k_min(),
                gains.k_max()
            )));
        }
    }

    let sim = SimConfig {
        t0: spec.sim.t0,
        horizon: spec.sim.horizon,
        step: spec.sim.step,
        substeps: spec.sim.substeps.max(1),
        initial_state: DVector::from_vec(spec.sim.initial_state.clone()),
        controller,
        guard: funnel_cbf::sim::VIOLATION_GUARD,
    };

    let output_dir = overrides
        .out_dir
        .clone()
        .or_else(|| spec.output_dir.clone())
        .unwrap_or_else(|| format!("out/{}", spec.name));

    Ok(LoadedScenario {
        spec,
        plant,
        boundary,
        reference,
        sim,
        output_dir,
        no_plot: overrides.no_plot,
    })
}

/// Resolve the internal-state ball radius for verification.
pub fn resolve_q_bar(loaded: &LoadedScenario) -> f64 {
    if let Some(v) = &loaded.spec.verify {
        if let Some(q) = v.q_bar {
            return q;
        }
    }
    match loaded.spec.plant.as_str() {
        "linear-demo" => {
            let m = loaded.plant.output_dim();
            let eta0 = loaded
                .sim
                .initial_state
                .rows(m, loaded.sim.initial_state.len() - m);
            linear::internal_bound(
                eta0.norm(),
                loaded.boundary.psi_sup() + loaded.reference.y_r_sup(),
            )
        }
        _ => 0.0,
    }
}

/// State box from the verify section, if present.
pub fn resolve_state_box(loaded: &LoadedScenario) -> Option<SampleBox> {
    loaded
        .spec
        .verify
        .as_ref()
        .and_then(|v| v.state_box.as_ref())
        .map(|b| SampleBox::new(b.lower.clone(), b.upper.clone()))
}

/// Output-coordinate part of the verify state box (bound-estimation clip).
pub fn resolve_output_box(loaded: &LoadedScenario) -> Option<SampleBox> {
    let m = loaded.plant.output_dim();
    loaded
        .spec
        .verify
        .as_ref()
        .and_then(|v| v.state_box.as_ref())
        .map(|b| SampleBox::new(b.lower[..m].to_vec(), b.upper[..m].to_vec()))
}
