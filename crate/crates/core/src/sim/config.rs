//! Experiment configuration schema.
//!
//! Every section rejects unknown keys. Textual formats are handled by the
//! front end; this module only defines the typed document.

use serde::{Deserialize, Serialize};

use crate::energy::EnergyKind;
use crate::geometry::GeometryKind;
use crate::linalg::DEFAULT_COND_CAP;
use crate::sim::ConvergenceCriterion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub tree: TreeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<ForcingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_control: Option<SpeedControlSection>,
    pub integration: IntegrationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PathConsistency,
    CommutationPolar,
    PointMass,
    Arm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Energized fabric without forcing or damping.
    #[default]
    Unforced,
    /// Forced, damped and speed controlled.
    Forced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub variant: Variant,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConditions>,
    /// Random states for the pointwise commutation check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_states: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConditions {
    /// `count` particles at `position` moving radially outward with `speed`,
    /// headings evenly spread over `[0, 2π)`.
    Ring { position: Vec<f64>, speed: f64, count: usize },
    /// Unit headings from each start; speeds come from the generator.
    Headings { starts: Vec<Vec<f64>>, heading: Vec<f64> },
    List { states: Vec<InitialState> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSection {
    pub link_lengths: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub default_config: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSection {
    /// Root configuration dimension.
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<ArmSection>,
    #[serde(default)]
    pub components: Vec<Component>,
}

/// Building blocks of a fabric. Task-space components (attractor, floor
/// lift, goal attractor) live on the goal or end-effector space of the
/// experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Component {
    /// `h₂ = 0` with `L = (λ/2)‖q̇‖²`.
    Baseline { lambda: f64 },
    /// `2n` limit geometries `λẋ²∂ψ(x)` with barrier-scaled energies.
    /// Limits default to the arm's joint limits.
    CoordinateLimits {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<Vec<f64>>,
        lambda: f64,
        alpha1: f64,
        alpha2: f64,
        alpha3: f64,
        alpha4: f64,
    },
    /// Same construction on `x = ‖q − c‖/r − 1`.
    CircleObstacle {
        center: Vec<f64>,
        radius: f64,
        lambda: f64,
        alpha1: f64,
        alpha2: f64,
        alpha3: f64,
        alpha4: f64,
    },
    /// Vortex geometries with zone energies; strengths and directions are
    /// drawn from the experiment seed.
    Vortices {
        centers: Vec<[f64; 2]>,
        radius: f64,
        mass: f64,
        strength_min: f64,
        strength_max: f64,
    },
    /// `λ_a‖ẋ‖²∂ψ₁(x)` on the goal task space with a radially switched energy.
    AttractorGeometry {
        lambda: f64,
        k: f64,
        alpha_psi: f64,
        m_hi: f64,
        m_lo: f64,
        alpha_s: f64,
        radius: f64,
    },
    /// Pull toward the arm's default configuration, energy `λ q̇ᵀq̇`.
    DefaultConfig { lambda: f64 },
    /// End-effector lift away from the floor line `y = floor`.
    FloorLift { lambda: f64, sigma: f64, floor: f64 },
    /// End-effector pull toward the goal, active near it horizontally.
    GoalAttractor { lambda: f64, sigma: f64 },
    /// Raw generator integrated at two speeds in path-consistency runs.
    Generator {
        label: String,
        geometry: GeometryKind,
        speeds: [f64; 2],
    },
    /// Generic leaf: a map, a generator and its energy.
    Leaf {
        label: String,
        map: MapKind,
        geometry: GeometryKind,
        energy: EnergyKind,
    },
}

impl Component {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Baseline { .. } => "baseline",
            Self::CoordinateLimits { .. } => "coordinate_limits",
            Self::CircleObstacle { .. } => "circle_obstacle",
            Self::Vortices { .. } => "vortices",
            Self::AttractorGeometry { .. } => "attractor_geometry",
            Self::DefaultConfig { .. } => "default_config",
            Self::FloorLift { .. } => "floor_lift",
            Self::GoalAttractor { .. } => "goal_attractor",
            Self::Generator { .. } => "generator",
            Self::Leaf { .. } => "leaf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapKind {
    Identity { dim: usize },
    Translation { target: Vec<f64> },
    /// `(r, θ) ↦ (r cos θ, r sin θ)`.
    Polar,
    /// `(x, y) ↦ (r, θ)`.
    CartesianToPolar,
    Circle { center: Vec<f64>, radius: f64 },
    EndEffector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GoalSpec {
    List { points: Vec<[f64; 2]> },
    /// Uniform draws in the box from the experiment seed; with
    /// `alternate_sides` the sign of x alternates starting negative.
    Random {
        count: usize,
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        #[serde(default)]
        alternate_sides: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    /// Point-mass target `q_d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    /// End-effector goals visited in sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goals: Option<GoalSpec>,
    pub k: f64,
    pub alpha_psi: f64,
    pub m_hi: f64,
    pub m_lo: f64,
    pub alpha_m: f64,
    /// Adds `L_ψ = ẋᵀM_ψẋ` to the system energy.
    #[serde(default = "yes")]
    pub register_priority_energy: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionEnergy {
    /// `½‖q̇‖²`.
    Euclidean,
    /// The system energy itself.
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedControlSection {
    pub execution: ExecutionEnergy,
    /// Desired speed; the target level is `½v_d²`.
    pub v_d: f64,
    pub alpha_eta: f64,
    pub alpha_shift: f64,
    /// Fixes `η` instead of switching on the execution energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub b: f64,
    pub b_min: f64,
    pub alpha_beta: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "yes")]
    pub stop_on_convergence: bool,
    #[serde(default)]
    pub convergence: ConvergenceCriterion,
    #[serde(default = "default_cap")]
    pub cond_cap: f64,
}

fn default_cap() -> f64 {
    DEFAULT_COND_CAP
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotStyle {
    Paths,
    ArmFrames,
    EnergyTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default)]
    pub plots: Vec<PlotStyle>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { csv: true, plots: Vec::new() }
    }
}
