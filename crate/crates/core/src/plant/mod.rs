//! Benchmark plants and the model-side quantities used only by
//! verification and by cost references, never by the model-free
//! controllers.
//!
//! Plants come in two flavors: the state-space form `ẋ = F(x) + G(x)u`,
//! `y = H(x)`, and the normal form `ẏ = f(y,η) + g(y,η)u`, `η̇ = q(y,η)`.
//! Where nontrivial internal dynamics exist the plant is authored directly
//! in normal-form coordinates; the coordinate change is never constructed.

pub mod linear;
pub mod usv;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::funnel::FunnelBoundary;
use crate::reference::ReferenceSignal;
use crate::sampling::{lattice_in_ball_product, lattice_in_box, SampleBox};

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("drift angle undefined at the origin (p_x = p_y = 0)")]
    UndefinedDriftAngle,
    #[error("input matrix g(y, eta) is singular")]
    SingularInputMatrix,
    #[error("structural assumption violated: minimal symmetric eigenvalue {0} is not positive")]
    StructuralAssumptionViolated(f64),
    #[error("unknown plant label '{0}'")]
    UnknownPlant(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample count must be at least {0}")]
    TooFewSamples(usize),
}

type StateVecFn = Arc<dyn Fn(&DVector<f64>) -> Result<DVector<f64>, PlantError> + Send + Sync>;
type StateMatFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
type OutputFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type NfVecFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;
type NfMatFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Plant in original coordinates: `ẋ = F(x) + G(x)u`, `y = H(x)`.
#[derive(Clone)]
pub struct FullPlant {
    n: usize,
    m: usize,
    label: String,
    drift: StateVecFn,
    input_map: StateMatFn,
    output: OutputFn,
    output_jacobian: StateMatFn,
}

impl std::fmt::Debug for FullPlant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FullPlant")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}

impl FullPlant {
    pub fn new<F, G, H, J>(
        label: impl Into<String>,
        n: usize,
        m: usize,
        drift: F,
        input_map: G,
        output: H,
        output_jacobian: J,
    ) -> Self
    where
        F: Fn(&DVector<f64>) -> Result<DVector<f64>, PlantError> + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        H: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            n,
            m,
            label: label.into(),
            drift: Arc::new(drift),
            input_map: Arc::new(input_map),
            output: Arc::new(output),
            output_jacobian: Arc::new(output_jacobian),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn output_dim(&self) -> usize {
        self.m
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>, PlantError> {
        (self.drift)(x)
    }

    pub fn input_map(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.input_map)(x)
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.output)(x)
    }

    pub fn output_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.output_jacobian)(x)
    }

    /// `ẋ = F(x) + G(x)·u`.
    pub fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, PlantError> {
        Ok(self.drift(x)? + self.input_map(x) * u)
    }
}

/// Plant in normal form: `ẏ = f(y,η) + g(y,η)u`, `η̇ = q(y,η)`.
#[derive(Clone)]
pub struct NormalFormPlant {
    m: usize,
    n_eta: usize,
    label: String,
    f: NfVecFn,
    g: NfMatFn,
    q: NfVecFn,
}

impl std::fmt::Debug for NormalFormPlant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NormalFormPlant")
            .field("label", &self.label)
            .field("m", &self.m)
            .field("n_eta", &self.n_eta)
            .finish()
    }
}

impl NormalFormPlant {
    pub fn new<F, G, Q>(label: impl Into<String>, m: usize, n_eta: usize, f: F, g: G, q: Q) -> Self
    where
        F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        G: Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        Q: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            m,
            n_eta,
            label: label.into(),
            f: Arc::new(f),
            g: Arc::new(g),
            q: Arc::new(q),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.m
    }

    pub fn internal_dim(&self) -> usize {
        self.n_eta
    }

    pub fn state_dim(&self) -> usize {
        self.m + self.n_eta
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn f(&self, y: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        (self.f)(y, eta)
    }

    pub fn g(&self, y: &DVector<f64>, eta: &DVector<f64>) -> DMatrix<f64> {
        (self.g)(y, eta)
    }

    pub fn q(&self, y: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        (self.q)(y, eta)
    }

    /// Split a stacked state `[y; η]`.
    pub fn split_state(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (
            x.rows(0, self.m).into_owned(),
            x.rows(self.m, self.n_eta).into_owned(),
        )
    }
}

/// Either plant representation behind one simulation-facing interface.
#[derive(Debug, Clone)]
pub enum PlantModel {
    Full(FullPlant),
    NormalForm(NormalFormPlant),
}

impl PlantModel {
    pub fn by_label(label: &str) -> Result<Self, PlantError> {
        match label {
            "usv" => Ok(PlantModel::Full(usv::plant())),
            "linear-demo" => Ok(PlantModel::NormalForm(linear::plant())),
            other => Err(PlantError::UnknownPlant(other.to_string())),
        }
    }

    /// Normal-form view of a built-in plant, used by the verification side.
    pub fn normal_form_by_label(label: &str) -> Result<NormalFormPlant, PlantError> {
        match label {
            "usv" => Ok(usv::normal_form()),
            "linear-demo" => Ok(linear::plant()),
            other => Err(PlantError::UnknownPlant(other.to_string())),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            PlantModel::Full(p) => p.label(),
            PlantModel::NormalForm(p) => p.label(),
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            PlantModel::Full(p) => p.state_dim(),
            PlantModel::NormalForm(p) => p.state_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            PlantModel::Full(p) => p.output_dim(),
            PlantModel::NormalForm(p) => p.output_dim(),
        }
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            PlantModel::Full(p) => p.output(x),
            PlantModel::NormalForm(p) => x.rows(0, p.output_dim()).into_owned(),
        }
    }

    pub fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, PlantError> {
        match self {
            PlantModel::Full(p) => p.dynamics(x, u),
            PlantModel::NormalForm(p) => {
                let (y, eta) = p.split_state(x);
                let y_dot = p.f(&y, &eta) + p.g(&y, &eta) * u;
                let eta_dot = p.q(&y, &eta);
                let mut x_dot = DVector::zeros(x.len());
                x_dot.rows_mut(0, p.output_dim()).copy_from(&y_dot);
                x_dot
                    .rows_mut(p.output_dim(), p.internal_dim())
                    .copy_from(&eta_dot);
                Ok(x_dot)
            }
        }
    }
}

/// Convenience re-export of the two-output demo plant with internal dynamics.
pub fn linear_demo_plant() -> NormalFormPlant {
    linear::plant()
}

/// Result of sampling the definiteness of the input-output coupling.
#[derive(Debug, Clone)]
pub struct DefinitenessReport {
    /// Minimum over samples of `λ_min(½(M + Mᵀ))` with `M` the coupling
    /// matrix (`H_jac·G` in state coordinates, `g` in normal form).
    pub min_eigenvalue: f64,
    pub samples: usize,
    pub pass: bool,
}

fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Sample-check the relative-degree-one condition over a state box.
///
/// Passes iff the symmetric part of the coupling matrix stays positive
/// definite at every sampled point (box corners included).
pub fn check_relative_degree_one(
    plant: &PlantModel,
    sample_box: &SampleBox,
    sample_count: usize,
) -> Result<DefinitenessReport, PlantError> {
    if sample_count < 1 {
        return Err(PlantError::TooFewSamples(1));
    }
    if sample_box.dim() != plant.state_dim() {
        return Err(PlantError::DimensionMismatch {
            expected: plant.state_dim(),
            got: sample_box.dim(),
        });
    }
    let points = lattice_in_box(sample_box, sample_count);
    let mut min_eig = f64::INFINITY;
    for x in &points {
        let coupling = match plant {
            PlantModel::Full(p) => p.output_jacobian(x) * p.input_map(x),
            PlantModel::NormalForm(p) => {
                let (y, eta) = p.split_state(x);
                p.g(&y, &eta)
            }
        };
        min_eig = min_eig.min(min_symmetric_eigenvalue(&coupling));
    }
    Ok(DefinitenessReport {
        min_eigenvalue: min_eig,
        samples: points.len(),
        pass: min_eig > 0.0,
    })
}

/// Sampled model bounds over the verification region.
#[derive(Debug, Clone)]
pub struct ModelBounds {
    /// Upper bound on `‖f‖` over the region plus the reference-derivative
    /// sup, inflated by 1.05 against sampling optimism.
    pub f_bar: f64,
    /// Lower bound on the symmetric-part eigenvalues of `g`, deflated by
    /// 0.95.
    pub g_underbar: f64,
    /// Internal-state ball radius used for the sampling.
    pub q_bar: f64,
    /// Output ball radius `ψ_sup + y_r_sup`.
    pub output_radius: f64,
    pub samples: usize,
}

/// Estimate `f_bar` and `g_underbar` by sampling `‖z‖ ≤ ψ_sup + y_r_sup`,
/// `‖q‖ ≤ q_bar`.
///
/// `output_box` optionally clips the output ball: useful when the
/// definiteness assumption only holds on part of the ball (the surface
/// vessel needs `|φ| < π/2`) and the scenario keeps outputs there.
pub fn estimate_bounds(
    plant: &NormalFormPlant,
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
    q_bar: f64,
    sample_count: usize,
    output_box: Option<&SampleBox>,
) -> Result<ModelBounds, PlantError> {
    if sample_count < 1000 {
        return Err(PlantError::TooFewSamples(1000));
    }
    let radius = boundary.psi_sup() + reference.y_r_sup();
    let points = lattice_in_ball_product(
        plant.output_dim(),
        radius,
        output_box,
        plant.internal_dim(),
        q_bar,
        sample_count,
    );

    let mut f_max = 0.0f64;
    let mut g_min = f64::INFINITY;
    for (z, q) in &points {
        f_max = f_max.max(plant.f(z, q).norm());
        g_min = g_min.min(min_symmetric_eigenvalue(&plant.g(z, q)));
    }

    let g_underbar = 0.95 * g_min;
    if g_underbar.is_nan() || g_underbar <= 0.0 {
        return Err(PlantError::StructuralAssumptionViolated(g_min));
    }
    Ok(ModelBounds {
        f_bar: 1.05 * (f_max + reference.y_r_dot_sup()),
        g_underbar,
        q_bar,
        output_radius: radius,
        samples: points.len(),
    })
}

/// Model-based input that certifies the barrier condition:
/// `u = g(y,η)⁻¹·(−max{2c,1}·e − f(y,η) + ẏ_r(t))` with `e = y − y_r(t)`.
///
/// Test-side only: it uses full model knowledge and is the constructive
/// witness that barrier-admissible inputs exist everywhere.
pub fn witness_input(
    plant: &NormalFormPlant,
    t: f64,
    y: &DVector<f64>,
    eta: &DVector<f64>,
    c: f64,
    reference: &ReferenceSignal,
) -> Result<DVector<f64>, PlantError> {
    let e = y - reference.y_r(t);
    let rhs = -&e * (2.0 * c).max(1.0) - plant.f(y, eta) + reference.y_r_dot(t);
    plant
        .g(y, eta)
        .lu()
        .solve(&rhs)
        .ok_or(PlantError::SingularInputMatrix)
}
