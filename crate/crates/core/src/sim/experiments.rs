//! Experiment registry: builds fabrics from an [`ExperimentConfig`] and runs
//! the rollouts each experiment kind calls for.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{
    Component, ExecutionEnergy, ExperimentConfig, ExperimentKind, GoalSpec, InitialConditions, MapKind,
    SpeedControlSection, Variant,
};
use super::{
    frechet_distance, integrate, Dynamics, EnergySample, EventKind, RateSample, RolloutOptions, RolloutRecord,
    Sample,
};
use crate::energization::{commutation_check, energize_then_pullback, pullback_then_energize};
use crate::energy::{hamiltonian_rate, make_builtin_energy, EnergyKind, EnergyLagrangian, EnergyRef, PulledBackEnergy};
use crate::field::Barrier1D;
use crate::forcing::{
    energized_fabric_step, speed_controlled_step, DampingParams, ForcingPotential, PotentialParams, SpeedController,
    StepReport,
};
use crate::geometry::{
    combine_weighted, make_builtin_geometry, AttractGeometry, Fabric, GeometryRef, GeometryKind, GradientGeometry,
    LiftGeometry, PotentialKind, VortexGeometry, WeightedGeometry, ZeroGeometry,
};
use crate::kinematics::{CartesianToPolar, DistanceMap1D, PlanarArm, PolarMap};
use crate::taskmap::{AffineMap, ComposedMap, IdentityMap, MapRef, TaskMap};
use crate::{FabricError, Result, Vector};

/// One frozen vortex draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexDraw {
    pub center: [f64; 2],
    pub radius: f64,
    pub strength: f64,
    pub clockwise: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleOverlay {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxOverlay {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

/// Scene elements drawn under the trajectories.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub circles: Vec<CircleOverlay>,
    pub boxes: Vec<BoxOverlay>,
    pub targets: Vec<[f64; 2]>,
    pub vortices: Vec<VortexDraw>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    /// Link lengths when positions are joint angles of a planar arm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arm: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub name: String,
    pub kind: ExperimentKind,
    pub variant: Variant,
    pub seed: u64,
    pub rollouts: Vec<RolloutRecord>,
    pub summary: BTreeMap<String, f64>,
    pub overlay: Overlay,
}

impl ExperimentRun {
    pub fn barrier_violations(&self) -> usize {
        count_events(&self.rollouts, EventKind::BarrierViolation)
    }
}

const VORTEX_STREAM: u64 = 1;
const GOAL_STREAM: u64 = 2;
const STATE_STREAM: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(FabricError::InvalidParameter(msg.into()))
}

fn vec_of(a: &[f64]) -> Vector {
    Vector::from_column_slice(a)
}

/// Draws vortex strengths `f ~ U(min, max)` and rotation signs.
pub fn draw_vortices(centers: &[[f64; 2]], radius: f64, min: f64, max: f64, seed: u64) -> Vec<VortexDraw> {
    let mut rng = stream(seed, VORTEX_STREAM);
    centers
        .iter()
        .map(|c| {
            let clockwise = rng.random_bool(0.5);
            let strength = rng.random_range(min..max);
            VortexDraw { center: *c, radius, strength, clockwise }
        })
        .collect()
}

/// Resolves the goal list of an arm experiment.
pub fn resolve_goals(spec: &GoalSpec, seed: u64) -> Vec<[f64; 2]> {
    match spec {
        GoalSpec::List { points } => points.clone(),
        GoalSpec::Random { count, x_min, x_max, y_min, y_max, alternate_sides } => {
            let mut rng = stream(seed, GOAL_STREAM);
            (0..*count)
                .map(|i| {
                    let mut x = rng.random_range(*x_min..=*x_max);
                    let y = rng.random_range(*y_min..=*y_max);
                    if *alternate_sides {
                        x = if i % 2 == 0 { -x.abs() } else { x.abs() };
                    }
                    [x, y]
                })
                .collect()
        }
    }
}

/// Initial states `(q₀, q̇₀)` of a ring or list; headings scale by `speed`.
fn initial_states(init: &InitialConditions, speed: Option<f64>) -> Result<Vec<(Vector, Vector)>> {
    Ok(match init {
        InitialConditions::Ring { position, speed, count } => {
            if position.len() != 2 || *count == 0 {
                return bad("experiment.initial: ring needs a 2-D position and a positive count");
            }
            (0..*count)
                .map(|i| {
                    let a = TAU * i as f64 / *count as f64;
                    (vec_of(position), vec_of(&[speed * a.cos(), speed * a.sin()]))
                })
                .collect()
        }
        InitialConditions::Headings { starts, heading } => {
            let d = vec_of(heading);
            let n = d.norm();
            if !(n > 0.0) || starts.iter().any(|s| s.len() != heading.len()) {
                return bad("experiment.initial: headings need a non-zero heading matching each start");
            }
            let s = speed.unwrap_or(1.0);
            starts.iter().map(|p| (vec_of(p), &d * (s / n))).collect()
        }
        InitialConditions::List { states } => states
            .iter()
            .map(|s| {
                if s.position.len() != s.velocity.len() {
                    return bad("experiment.initial: position and velocity lengths differ");
                }
                Ok((vec_of(&s.position), vec_of(&s.velocity)))
            })
            .collect::<Result<_>>()?,
    })
}

fn limit_barrier(alpha1: f64, alpha2: f64, alpha3: f64, alpha4: f64) -> Result<Arc<Barrier1D>> {
    if [alpha1, alpha2, alpha3, alpha4].iter().any(|a| !(*a > 0.0)) {
        return bad("barrier coefficients must be positive");
    }
    Ok(Arc::new(Barrier1D { alpha1, alpha2, alpha3, alpha4 }))
}

fn weighted(generator: GeometryRef, energy: EnergyRef) -> Result<WeightedGeometry> {
    WeightedGeometry::new(generator, energy)
}

/// Resolved scene shared by the builders.
pub struct Scene<'a> {
    cfg: &'a ExperimentConfig,
    arm: Option<Arc<PlanarArm>>,
    vortices: Vec<VortexDraw>,
}

impl<'a> Scene<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let dim = cfg.tree.dim;
        if dim == 0 {
            return bad("tree.dim must be positive");
        }
        let arm = match &cfg.tree.arm {
            Some(a) => {
                let limits = a.lower.iter().copied().zip(a.upper.iter().copied()).collect();
                if a.lower.len() != a.upper.len() {
                    return bad("tree.arm: lower and upper limits differ in length");
                }
                let arm = PlanarArm::new(a.link_lengths.clone(), limits, a.default_config.clone())?;
                if arm.dof() != dim {
                    return bad(format!("tree.dim is {dim} but the arm has {} joints", arm.dof()));
                }
                Some(Arc::new(arm))
            }
            None => None,
        };
        let mut vortices = Vec::new();
        for c in &cfg.tree.components {
            if let Component::Vortices { centers, radius, strength_min, strength_max, mass } = c {
                if dim != 2 {
                    return bad("tree.components: vortices need a 2-D root");
                }
                if !(*radius > 0.0 && *mass > 0.0 && *strength_min > 0.0 && strength_max > strength_min) {
                    return bad("tree.components: vortices need positive radius and mass and 0 < strength_min < strength_max");
                }
                vortices.extend(draw_vortices(centers, *radius, *strength_min, *strength_max, cfg.experiment.seed));
            }
        }
        Ok(Self { cfg, arm, vortices })
    }

    pub fn root_dim(&self) -> usize {
        self.cfg.tree.dim
    }

    pub fn arm(&self) -> Option<&Arc<PlanarArm>> {
        self.arm.as_ref()
    }

    pub fn vortices(&self) -> &[VortexDraw] {
        &self.vortices
    }

    /// End-effector map for an arm, the identity otherwise.
    pub fn ee_map(&self) -> MapRef {
        match &self.arm {
            Some(a) => a.clone(),
            None => Arc::new(IdentityMap::new(self.root_dim())),
        }
    }

    /// `x = ee(q) − goal`.
    pub fn goal_map(&self, goal: &Vector) -> Result<MapRef> {
        let shift: MapRef = Arc::new(AffineMap::translation(goal));
        match &self.arm {
            Some(a) => Ok(Arc::new(ComposedMap::new(a.clone(), shift)?)),
            None => Ok(shift),
        }
    }

    fn map(&self, kind: &MapKind) -> Result<MapRef> {
        Ok(match kind {
            MapKind::Identity { dim } => Arc::new(IdentityMap::new(*dim)),
            MapKind::Translation { target } => Arc::new(AffineMap::translation(&vec_of(target))),
            MapKind::Polar => Arc::new(PolarMap),
            MapKind::CartesianToPolar => Arc::new(CartesianToPolar),
            MapKind::Circle { center, radius } => Arc::new(DistanceMap1D::circle(vec_of(center), *radius)?),
            MapKind::EndEffector => match &self.arm {
                Some(a) => a.clone(),
                None => return bad("end_effector map needs tree.arm"),
            },
        })
    }

    /// Weighted leaves of the configured fabric for one goal.
    pub fn components(&self, goal: Option<&Vector>) -> Result<Vec<(MapRef, WeightedGeometry)>> {
        let dim = self.root_dim();
        let root: MapRef = Arc::new(IdentityMap::new(dim));
        let mut out: Vec<(MapRef, WeightedGeometry)> = Vec::new();
        let mut vortex = self.vortices.iter();
        let need_goal = |what: &str| -> Result<&Vector> {
            goal.ok_or_else(|| FabricError::InvalidParameter(format!("{what} needs a goal (forcing.target or forcing.goals)")))
        };
        for (i, c) in self.cfg.tree.components.iter().enumerate() {
            let ctx = |e: FabricError| FabricError::InvalidParameter(format!("tree.components[{i}] ({}): {e}", c.kind_name()));
            let built: Result<()> = (|| {
                match c {
                    Component::Baseline { lambda } => {
                        let e = make_builtin_energy(&EnergyKind::Euclidean { dim, lambda: *lambda })?;
                        out.push((root.clone(), weighted(Arc::new(ZeroGeometry { dim }), e)?));
                    }
                    Component::CoordinateLimits { lower, upper, lambda, alpha1, alpha2, alpha3, alpha4 } => {
                        let (lo, hi) = match (lower, upper, &self.arm) {
                            (Some(l), Some(u), _) => (l.clone(), u.clone()),
                            (None, None, Some(a)) => a.joint_limits.iter().map(|l| (l.0, l.1)).unzip(),
                            _ => return bad("coordinate limits need both lower and upper, or an arm"),
                        };
                        if lo.len() != dim || lo.iter().zip(&hi).any(|(l, u)| !(l < u)) {
                            return bad("coordinate limits must match tree.dim with lower < upper");
                        }
                        let psi = limit_barrier(*alpha1, *alpha2, *alpha3, *alpha4)?;
                        for m in DistanceMap1D::box_limits(&lo, &hi)? {
                            let g = Arc::new(GradientGeometry { lambda: *lambda, potential: psi.clone() });
                            let e = make_builtin_energy(&EnergyKind::BarrierScaled { lambda: *lambda })?;
                            out.push((Arc::new(m), weighted(g, e)?));
                        }
                    }
                    Component::CircleObstacle { center, radius, lambda, alpha1, alpha2, alpha3, alpha4 } => {
                        if center.len() != dim {
                            return bad("obstacle center must match tree.dim");
                        }
                        let psi = limit_barrier(*alpha1, *alpha2, *alpha3, *alpha4)?;
                        let m = DistanceMap1D::circle(vec_of(center), *radius)?;
                        let g = Arc::new(GradientGeometry { lambda: *lambda, potential: psi });
                        let e = make_builtin_energy(&EnergyKind::BarrierScaled { lambda: *lambda })?;
                        out.push((Arc::new(m), weighted(g, e)?));
                    }
                    Component::Vortices { centers, mass, .. } => {
                        for _ in centers {
                            let d = vortex.next().expect("one draw per center");
                            let g = Arc::new(VortexGeometry {
                                strength: d.strength,
                                sign: if d.clockwise { -1.0 } else { 1.0 },
                            });
                            let e = make_builtin_energy(&EnergyKind::VortexZone {
                                center: d.center.to_vec(),
                                radius: d.radius,
                                mass: *mass,
                            })?;
                            out.push((root.clone(), weighted(g, e)?));
                        }
                    }
                    Component::AttractorGeometry { lambda, k, alpha_psi, m_hi, m_lo, alpha_s, radius } => {
                        let goal = need_goal("attractor geometry")?;
                        let task = self.goal_map(goal)?;
                        let tdim = task.codomain_dim();
                        let g = make_builtin_geometry(&GeometryKind::PotentialGradient {
                            lambda: *lambda,
                            potential: PotentialKind::SmoothNorm { dim: tdim, k: *k, alpha: *alpha_psi },
                        })?;
                        let e = make_builtin_energy(&EnergyKind::RadialSwitch {
                            center: vec![0.0; tdim],
                            m_hi: *m_hi,
                            m_lo: *m_lo,
                            alpha_s: *alpha_s,
                            radius: *radius,
                        })?;
                        out.push((task, weighted(g, e)?));
                    }
                    Component::DefaultConfig { lambda } => {
                        let Some(arm) = &self.arm else {
                            return bad("default_config needs tree.arm");
                        };
                        let g = Arc::new(AttractGeometry { target: vec_of(&arm.default_config) });
                        let e = make_builtin_energy(&EnergyKind::Isotropic { dim, lambda: *lambda })?;
                        out.push((root.clone(), weighted(g, e)?));
                    }
                    Component::FloorLift { lambda, sigma, floor } => {
                        let ee = self.ee_map();
                        if ee.codomain_dim() != 2 {
                            return bad("floor lift needs a planar task space");
                        }
                        let g = Arc::new(LiftGeometry { normal: vec_of(&[0.0, 1.0]) });
                        let e = make_builtin_energy(&EnergyKind::FloorLift {
                            lambda: *lambda,
                            sigma: *sigma,
                            floor: *floor,
                        })?;
                        out.push((ee, weighted(g, e)?));
                    }
                    Component::GoalAttractor { lambda, sigma } => {
                        let goal = need_goal("goal attractor")?;
                        let ee = self.ee_map();
                        if ee.codomain_dim() != 2 || goal.len() != 2 {
                            return bad("goal attractor needs a planar task space");
                        }
                        let g = Arc::new(AttractGeometry { target: goal.clone() });
                        let e = make_builtin_energy(&EnergyKind::HorizontalGaussian {
                            lambda: *lambda,
                            sigma: *sigma,
                            goal_x: goal[0],
                        })?;
                        out.push((ee, weighted(g, e)?));
                    }
                    Component::Generator { .. } => {
                        return bad("generator components are only used by path_consistency");
                    }
                    Component::Leaf { map, geometry, energy, .. } => {
                        let m = self.map(map)?;
                        if m.domain_dim() != dim {
                            return bad("leaf map domain must match tree.dim");
                        }
                        let g = make_builtin_geometry(geometry)?;
                        let e = make_builtin_energy(energy)?;
                        if g.dim() != m.codomain_dim() {
                            return bad("leaf geometry dimension must match the map codomain");
                        }
                        out.push((m, weighted(g, e)?));
                    }
                }
                Ok(())
            })();
            built.map_err(ctx)?;
        }
        Ok(out)
    }

    /// Full fabric for one goal, including the potential's priority energy
    /// when forced and registered.
    pub fn fabric(&self, goal: Option<&Vector>, potential: Option<&ForcingPotential>) -> Result<Fabric> {
        let mut parts = self.components(goal)?;
        if let (Some(p), Some(f)) = (potential, &self.cfg.forcing) {
            if f.register_priority_energy {
                let task = p.task_map().clone();
                let zero = Arc::new(ZeroGeometry { dim: task.codomain_dim() });
                parts.push((task, weighted(zero, p.leaf_priority_energy())?));
            }
        }
        Ok(combine_weighted(parts, self.root_dim())?.with_cond_cap(self.cfg.integration.cond_cap))
    }

    pub fn potential(&self, goal: &Vector) -> Result<ForcingPotential> {
        let Some(f) = &self.cfg.forcing else {
            return bad("forced experiments need a forcing section");
        };
        let params = PotentialParams {
            k: f.k,
            alpha_psi: f.alpha_psi,
            m_hi: f.m_hi,
            m_lo: f.m_lo,
            alpha_m: f.alpha_m,
        };
        ForcingPotential::new(self.goal_map(goal)?, params)
    }

    pub fn controller(&self) -> Result<SpeedController> {
        let Some(s) = &self.cfg.speed_control else {
            return bad("forced experiments need a speed_control section");
        };
        speed_controller(s, self.root_dim())
    }

    /// Target of a point-mass experiment.
    pub fn target(&self) -> Result<Option<Vector>> {
        match self.cfg.forcing.as_ref().and_then(|f| f.target.as_ref()) {
            Some(t) if t.len() != self.root_dim() => bad("forcing.target must match tree.dim"),
            Some(t) => Ok(Some(vec_of(t))),
            None => Ok(None),
        }
    }

    pub fn overlay(&self, goals: &[[f64; 2]]) -> Overlay {
        let mut o = Overlay {
            targets: goals.to_vec(),
            vortices: self.vortices.clone(),
            arm: self.arm.as_ref().map(|a| a.link_lengths.clone()),
            ..Overlay::default()
        };
        for c in &self.cfg.tree.components {
            match c {
                Component::CircleObstacle { center, radius, .. } if center.len() == 2 => {
                    o.circles.push(CircleOverlay { center: [center[0], center[1]], radius: *radius })
                }
                Component::CoordinateLimits { lower: Some(l), upper: Some(u), .. } if l.len() == 2 && u.len() == 2 => {
                    o.boxes.push(BoxOverlay { lower: [l[0], l[1]], upper: [u[0], u[1]] })
                }
                Component::FloorLift { floor, .. } => o.floor = Some(*floor),
                _ => {}
            }
        }
        o
    }
}

pub fn speed_controller(s: &SpeedControlSection, dim: usize) -> Result<SpeedController> {
    if !(s.v_d > 0.0) || s.b < 0.0 || s.b_min < 0.0 || !(s.alpha_eta >= 0.0) {
        return bad("speed_control: v_d must be positive and gains non-negative");
    }
    if let Some(eta) = s.eta {
        if !(0.0..=1.0).contains(&eta) {
            return bad("speed_control.eta must lie in [0, 1]");
        }
    }
    let execution_energy = match s.execution {
        ExecutionEnergy::Euclidean => Some(make_builtin_energy(&EnergyKind::Euclidean { dim, lambda: 1.0 })?),
        ExecutionEnergy::System => None,
    };
    Ok(SpeedController {
        execution_energy,
        target_level: 0.5 * s.v_d * s.v_d,
        alpha_eta: s.alpha_eta,
        alpha_shift: s.alpha_shift,
        eta_override: s.eta,
        damping: DampingParams {
            b: s.b,
            b_min: s.b_min,
            alpha_beta: s.alpha_beta,
            radius: s.radius,
        },
    })
}

/// Root dynamics of a fabric, either energized and unforced or forced,
/// damped and speed controlled.
pub struct FabricDynamics {
    pub fabric: Fabric,
    pub forcing: Option<(ForcingPotential, SpeedController)>,
}

impl FabricDynamics {
    pub fn step(&self, q: &Vector, qd: &Vector) -> Result<StepReport> {
        match &self.forcing {
            Some((p, ctl)) => speed_controlled_step(&self.fabric, Some(p), ctl, q, qd),
            None => energized_fabric_step(&self.fabric, q, qd),
        }
    }
}

impl Dynamics for FabricDynamics {
    fn dim(&self) -> usize {
        self.fabric.root_dim()
    }

    fn acceleration(&self, _t: f64, q: &Vector, qd: &Vector) -> Result<Vector> {
        Ok(self.step(q, qd)?.acceleration)
    }

    fn observe(&self, _t: f64, q: &Vector, qd: &Vector) -> Result<Sample> {
        let r = self.step(q, qd)?;
        let potential = match &self.forcing {
            Some((p, _)) => p.value(q)?,
            None => 0.0,
        };
        Ok(Sample {
            energy: EnergySample {
                system: r.system_hamiltonian,
                execution: r.execution_energy,
                potential,
            },
            diagnostics: r.diagnostics,
            rates: RateSample {
                system: r.system_rate,
                potential: r.potential_rate,
                kinetic: r.kinetic_metric,
            },
            metric_asymmetry: r.metric_asymmetry,
            acceleration: r.acceleration,
        })
    }

    fn goal_distance(&self, q: &Vector) -> Option<f64> {
        self.forcing.as_ref().and_then(|(p, _)| p.task_distance(q).ok())
    }
}

/// Raw generator `q̈ = −h₂(q, q̇)`.
pub struct GeneratorDynamics(pub GeometryRef);

impl Dynamics for GeneratorDynamics {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn acceleration(&self, _t: f64, q: &Vector, qd: &Vector) -> Result<Vector> {
        Ok(-self.0.h2(q, qd)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Energize in the leaf, then pull back.
    EnergizeThenPullback,
    /// Pull back, then energize with the pulled-back energy.
    PullbackThenEnergize,
}

/// One leaf energized by either route and integrated at the root.
pub struct CommutationDynamics {
    pub map: MapRef,
    pub geometry: GeometryRef,
    pub energy: EnergyRef,
    pub root_energy: PulledBackEnergy,
    pub route: Route,
    pub cond_cap: f64,
}

impl Dynamics for CommutationDynamics {
    fn dim(&self) -> usize {
        self.map.domain_dim()
    }

    fn acceleration(&self, _t: f64, q: &Vector, qd: &Vector) -> Result<Vector> {
        let f = match self.route {
            Route::EnergizeThenPullback => energize_then_pullback,
            Route::PullbackThenEnergize => pullback_then_energize,
        };
        f(&*self.energy, &*self.geometry, &*self.map, q, qd, self.cond_cap)
    }

    fn observe(&self, t: f64, q: &Vector, qd: &Vector) -> Result<Sample> {
        let a = self.acceleration(t, q, qd)?;
        let h = self.root_energy.hamiltonian(q, qd)?;
        let rate = hamiltonian_rate(&self.root_energy, q, qd, &a)?;
        let mut s = Sample::bare(a);
        s.energy = EnergySample { system: h, execution: self.root_energy.value(q, qd)?, potential: 0.0 };
        s.rates = RateSample { system: rate, potential: 0.0, kinetic: 0.0 };
        Ok(s)
    }
}

fn options(cfg: &ExperimentConfig, horizon: f64, converge: bool) -> RolloutOptions {
    RolloutOptions {
        dt: cfg.integration.dt,
        horizon,
        convergence: (converge && cfg.integration.stop_on_convergence).then_some(cfg.integration.convergence),
        seed: cfg.experiment.seed,
    }
}

fn count_events(rollouts: &[RolloutRecord], kind: EventKind) -> usize {
    rollouts.iter().filter(|r| r.terminal().kind == kind).count()
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

/// `max_k |ṙ_k| / (1 + |H_k|)` of the instrumented system-energy rate.
pub fn max_rate_residual(r: &RolloutRecord) -> f64 {
    max_of(r.rates.iter().zip(&r.energies).map(|(q, e)| q.system.abs() / (1.0 + e.system.abs())))
}

/// Per-step `|d/dt(H_e + ψ) + β q̇ᵀq̇| / |β q̇ᵀq̇|`.
pub fn max_dissipation_residual(r: &RolloutRecord) -> f64 {
    max_of(r.rates.iter().zip(&r.diagnostics).zip(&r.velocities).map(|((rate, d), v)| {
        let k: f64 = v.iter().map(|x| x * x).sum();
        let predicted = -d.beta * k;
        relative(rate.system + rate.potential, predicted)
    }))
}

/// Per-step residual of `d/dt(H_e + ψ) = (α_ex − α_Le − β) q̇ᵀM_e q̇`.
pub fn max_dissipation_identity_residual(r: &RolloutRecord) -> f64 {
    max_of(r.rates.iter().zip(&r.diagnostics).map(|(rate, d)| {
        let predicted = (d.alpha_ex - d.alpha_le - d.beta) * rate.kinetic;
        relative(rate.system + rate.potential, predicted)
    }))
}

fn relative(measured: f64, predicted: f64) -> f64 {
    (measured - predicted).abs() / predicted.abs().max(1e-300)
}

fn insert_common(summary: &mut BTreeMap<String, f64>, rollouts: &[RolloutRecord]) {
    summary.insert("rollouts".into(), rollouts.len() as f64);
    summary.insert("barrier_violations".into(), count_events(rollouts, EventKind::BarrierViolation) as f64);
    summary.insert("converged".into(), count_events(rollouts, EventKind::Converged) as f64);
    summary.insert("max_time".into(), count_events(rollouts, EventKind::MaxTime) as f64);
}

fn insert_conservation(summary: &mut BTreeMap<String, f64>, rollouts: &[RolloutRecord]) {
    summary.insert("max_energy_drift".into(), max_of(rollouts.iter().map(|r| r.relative_energy_drift())));
    summary.insert("max_rate_residual".into(), max_of(rollouts.iter().map(max_rate_residual)));
}

/// Runs every rollout the experiment calls for.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    if !(cfg.integration.dt > 0.0) || !(cfg.integration.horizon > 0.0) {
        return bad("integration.dt and integration.horizon must be positive");
    }
    let scene = Scene::new(cfg)?;
    let (rollouts, summary, goals) = match cfg.experiment.kind {
        ExperimentKind::PathConsistency => run_path_consistency(cfg, &scene)?,
        ExperimentKind::CommutationPolar => run_commutation(cfg, &scene)?,
        ExperimentKind::PointMass => run_point_mass(cfg, &scene)?,
        ExperimentKind::Arm => run_arm(cfg, &scene)?,
    };
    Ok(ExperimentRun {
        name: cfg.experiment.name.clone(),
        kind: cfg.experiment.kind,
        variant: cfg.experiment.variant,
        seed: cfg.experiment.seed,
        overlay: scene.overlay(&goals),
        rollouts,
        summary,
    })
}

type KindOutput = (Vec<RolloutRecord>, BTreeMap<String, f64>, Vec<[f64; 2]>);

fn require_initial(cfg: &ExperimentConfig) -> Result<&InitialConditions> {
    cfg.experiment
        .initial
        .as_ref()
        .ok_or_else(|| FabricError::InvalidParameter("experiment.initial is required".into()))
}

fn run_path_consistency(cfg: &ExperimentConfig, scene: &Scene) -> Result<KindOutput> {
    let init = require_initial(cfg)?;
    let mut jobs = Vec::new();
    let mut pairs = Vec::new();
    for c in &cfg.tree.components {
        let Component::Generator { label, geometry, speeds } = c else {
            return bad("path_consistency accepts only generator components");
        };
        if !(speeds[0] > 0.0 && speeds[1] > 0.0) {
            return bad(format!("generator {label}: speeds must be positive"));
        }
        let h = make_builtin_geometry(geometry)?;
        if h.dim() != scene.root_dim() {
            return bad(format!("generator {label}: dimension must match tree.dim"));
        }
        let unit = initial_states(init, Some(1.0))?;
        for (i, (q0, d)) in unit.iter().enumerate() {
            let first = jobs.len();
            for (j, s) in speeds.iter().enumerate() {
                let horizon = cfg.integration.horizon * speeds[0] / s;
                jobs.push((format!("{label}_start{i}_speed{j}"), h.clone(), q0.clone(), d * *s, horizon));
            }
            pairs.push((label.clone(), first));
        }
    }
    let rollouts: Vec<RolloutRecord> = jobs
        .into_par_iter()
        .map(|(label, h, q0, qd0, horizon)| integrate(&GeneratorDynamics(h), label, &q0, &qd0, &options(cfg, horizon, false)))
        .collect::<Result<_>>()?;
    let mut summary = BTreeMap::new();
    insert_common(&mut summary, &rollouts);
    let mut overall: f64 = 0.0;
    for (label, first) in pairs {
        let path = |r: &RolloutRecord| r.positions.iter().map(|p| vec_of(p)).collect::<Vec<_>>();
        let d = frechet_distance(&path(&rollouts[first]), &path(&rollouts[first + 1]));
        let key = format!("frechet_{label}");
        let e = summary.entry(key).or_insert(0.0);
        *e = e.max(d);
        overall = overall.max(d);
    }
    summary.insert("frechet_max".into(), overall);
    Ok((rollouts, summary, Vec::new()))
}

fn run_commutation(cfg: &ExperimentConfig, scene: &Scene) -> Result<KindOutput> {
    let init = require_initial(cfg)?;
    let [Component::Leaf { map, geometry, energy, .. }] = cfg.tree.components.as_slice() else {
        return bad("commutation_polar needs exactly one leaf component");
    };
    let map = scene.map(map)?;
    let geometry = make_builtin_geometry(geometry)?;
    let energy = make_builtin_energy(energy)?;
    if map.domain_dim() != scene.root_dim() || map.codomain_dim() != geometry.dim() || geometry.dim() != energy.dim() {
        return bad("commutation leaf dimensions do not line up with tree.dim");
    }
    let root_energy = PulledBackEnergy::new(map.clone(), energy.clone())?;
    let dynamics = |route| CommutationDynamics {
        map: map.clone(),
        geometry: geometry.clone(),
        energy: energy.clone(),
        root_energy: root_energy.clone(),
        route,
        cond_cap: cfg.integration.cond_cap,
    };
    let states = initial_states(init, None)?;
    let jobs: Vec<_> = states
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            [
                (format!("leaf_energized_{i}"), Route::EnergizeThenPullback, s.clone()),
                (format!("root_energized_{i}"), Route::PullbackThenEnergize, s.clone()),
            ]
        })
        .collect();
    let rollouts: Vec<RolloutRecord> = jobs
        .into_par_iter()
        .map(|(label, route, (q0, qd0))| {
            integrate(&dynamics(route), label, &q0, &qd0, &options(cfg, cfg.integration.horizon, false))
        })
        .collect::<Result<_>>()?;

    let mut summary = BTreeMap::new();
    insert_common(&mut summary, &rollouts);
    insert_conservation(&mut summary, &rollouts);

    let n = cfg.experiment.check_states.unwrap_or(100);
    let random = random_states(&*map, scene.root_dim(), n, cfg.experiment.seed);
    let rep = commutation_check(&*energy, &*geometry, &*map, &random)?;
    summary.insert("random_states_checked".into(), rep.checked as f64);
    summary.insert("random_states_rank_deficient".into(), rep.rank_deficient.len() as f64);
    let mut worst = rep.max_relative;
    let mut worst_route: f64 = 0.0;
    let mut checked = rep.checked;
    for pair in rollouts.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let states: Vec<_> = a.positions.iter().zip(&a.velocities).map(|(q, v)| (vec_of(q), vec_of(v))).collect();
        let rep = commutation_check(&*energy, &*geometry, &*map, &states)?;
        worst = worst.max(rep.max_relative);
        checked += rep.checked;
        let len = a.len().min(b.len());
        for k in 0..len {
            let d = (vec_of(&a.positions[k]) - vec_of(&b.positions[k])).norm();
            worst_route = worst_route.max(d);
        }
        if a.len() != b.len() {
            worst_route = f64::INFINITY;
        }
    }
    summary.insert("max_commutation_deviation".into(), worst);
    summary.insert("commutation_states_checked".into(), checked as f64);
    summary.insert("max_route_deviation".into(), worst_route);
    Ok((rollouts, summary, Vec::new()))
}

/// Seeded states with `q ∈ [−3, 3]ⁿ`, `q̇ ∈ [−2, 2]ⁿ` at which `map` evaluates.
pub fn random_states(map: &dyn TaskMap, dim: usize, count: usize, seed: u64) -> Vec<(Vector, Vector)> {
    let mut rng = stream(seed, STATE_STREAM);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let q = Vector::from_fn(dim, |_, _| rng.random_range(-3.0..3.0));
        let qd = Vector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
        if q.norm() > 0.3 && map.evaluate(&q, &qd).is_ok() {
            out.push((q, qd));
        }
    }
    out
}

fn run_point_mass(cfg: &ExperimentConfig, scene: &Scene) -> Result<KindOutput> {
    let init = require_initial(cfg)?;
    let target = scene.target()?;
    let forced = cfg.experiment.variant == Variant::Forced;
    let dynamics = if forced {
        let Some(t) = &target else {
            return bad("forced point-mass experiments need forcing.target");
        };
        let p = scene.potential(t)?;
        FabricDynamics {
            fabric: scene.fabric(target.as_ref(), Some(&p))?,
            forcing: Some((p, scene.controller()?)),
        }
    } else {
        FabricDynamics {
            fabric: scene.fabric(target.as_ref(), None)?,
            forcing: None,
        }
    };
    let states = initial_states(init, None)?;
    for (q, _) in &states {
        if q.len() != scene.root_dim() {
            return bad("experiment.initial states must match tree.dim");
        }
    }
    let rollouts: Vec<RolloutRecord> = states
        .into_par_iter()
        .enumerate()
        .map(|(i, (q0, qd0))| {
            integrate(&dynamics, format!("particle_{i:02}"), &q0, &qd0, &options(cfg, cfg.integration.horizon, forced))
        })
        .collect::<Result<_>>()?;

    let mut summary = BTreeMap::new();
    insert_common(&mut summary, &rollouts);
    let all_positions = || rollouts.iter().flat_map(|r| r.positions.iter());
    summary.insert(
        "max_abs_coordinate".into(),
        max_of(all_positions().flat_map(|p| p.iter().map(|x| x.abs()))),
    );
    for c in &cfg.tree.components {
        if let Component::CircleObstacle { center, radius, .. } = c {
            let c = vec_of(center);
            let min = all_positions()
                .map(|p| (vec_of(p) - &c).norm() / radius - 1.0)
                .fold(f64::INFINITY, f64::min);
            let e = summary.entry("min_obstacle_distance".into()).or_insert(f64::INFINITY);
            *e = e.min(min);
        }
    }
    if let Some(t) = &target {
        summary.insert(
            "max_final_distance".into(),
            max_of(rollouts.iter().map(|r| (r.final_position() - t).norm())),
        );
    }
    summary.insert(
        "max_final_speed".into(),
        max_of(rollouts.iter().map(|r| r.final_velocity().norm())),
    );
    if forced {
        summary.insert("max_dissipation_residual".into(), max_of(rollouts.iter().map(max_dissipation_residual)));
        summary.insert(
            "max_dissipation_identity_residual".into(),
            max_of(rollouts.iter().map(max_dissipation_identity_residual)),
        );
        summary.insert(
            "max_convergence_time".into(),
            max_of(rollouts.iter().map(|r| r.terminal().time)),
        );
    } else {
        insert_conservation(&mut summary, &rollouts);
    }
    Ok((rollouts, summary, target.filter(|t| t.len() == 2).map(|t| vec![[t[0], t[1]]]).unwrap_or_default()))
}

fn run_arm(cfg: &ExperimentConfig, scene: &Scene) -> Result<KindOutput> {
    let Some(arm) = scene.arm().cloned() else {
        return bad("arm experiments need tree.arm");
    };
    if cfg.experiment.variant != Variant::Forced {
        return bad("arm experiments are forced; set experiment.variant = \"forced\"");
    }
    let Some(spec) = cfg.forcing.as_ref().and_then(|f| f.goals.as_ref()) else {
        return bad("arm experiments need forcing.goals");
    };
    let goals = resolve_goals(spec, cfg.experiment.seed);
    if goals.is_empty() {
        return bad("forcing.goals must name at least one goal");
    }
    let (mut q, mut qd) = match &cfg.experiment.initial {
        None => (vec_of(&arm.default_config), Vector::zeros(arm.dof())),
        Some(init) => match initial_states(init, None)?.as_slice() {
            [(q, qd)] if q.len() == arm.dof() => (q.clone(), qd.clone()),
            _ => return bad("experiment.initial must hold exactly one arm state"),
        },
    };
    let ctl = scene.controller()?;
    let q_ready = vec_of(&arm.default_config);
    let mut rollouts = Vec::with_capacity(goals.len());
    let mut summary = BTreeMap::new();
    let mut rest_distance = 0.0;
    let mut reached = 0usize;
    let mut worst_final: f64 = 0.0;
    let lift = cfg.tree.components.iter().find_map(|c| match c {
        Component::FloorLift { sigma, floor, .. } => Some((*sigma, *floor)),
        _ => None,
    });
    let mut min_mid_height = f64::INFINITY;
    let mut limit_margin = f64::INFINITY;
    for (i, g) in goals.iter().enumerate() {
        let goal = vec_of(g);
        let p = scene.potential(&goal)?;
        let dynamics = FabricDynamics {
            fabric: scene.fabric(Some(&goal), Some(&p))?,
            forcing: Some((p, ctl.clone())),
        };
        let start_ee = arm.fk(&q)?.ee;
        let rec = integrate(&dynamics, format!("segment_{}", i + 1), &q, &qd, &options(cfg, cfg.integration.horizon, true))?;
        q = rec.final_position();
        qd = rec.final_velocity();
        let final_ee = arm.fk(&q)?.ee;
        let dist = (&final_ee - &goal).norm();
        worst_final = worst_final.max(dist);
        if dist < cfg.integration.convergence.distance_tol {
            reached += 1;
        }
        rest_distance += (&q - &q_ready).norm();
        for p in &rec.positions {
            for (j, (lo, hi)) in arm.joint_limits.iter().enumerate() {
                limit_margin = limit_margin.min(p[j] - lo).min(hi - p[j]);
            }
        }
        if let Some((_, floor)) = lift {
            let span = goal[0] - start_ee[0];
            for p in &rec.positions {
                let ee = arm.fk(&vec_of(p))?.ee;
                let progress = (ee[0] - start_ee[0]) / span;
                if (1.0 / 3.0..=2.0 / 3.0).contains(&progress) {
                    min_mid_height = min_mid_height.min(ee[1] - floor);
                }
            }
        }
        summary.insert(format!("segment_{}_final_distance", i + 1), dist);
        summary.insert(format!("segment_{}_rest_config_distance", i + 1), (&q - &q_ready).norm());
        rollouts.push(rec);
    }
    insert_common(&mut summary, &rollouts);
    summary.insert("goals_reached".into(), reached as f64);
    summary.insert("max_final_distance".into(), worst_final);
    summary.insert("mean_rest_config_distance".into(), rest_distance / goals.len() as f64);
    summary.insert("min_joint_limit_margin".into(), limit_margin);
    if let Some((sigma, _)) = lift {
        summary.insert("min_mid_transit_height".into(), min_mid_height);
        summary.insert("lift_threshold".into(), 0.5 * sigma);
    }
    Ok((rollouts, summary, goals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vortex_draws_are_seeded() {
        let c = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        let a = draw_vortices(&c, 1.0, 2.0, 10.0, 7);
        assert_eq!(a, draw_vortices(&c, 1.0, 2.0, 10.0, 7));
        assert_ne!(a, draw_vortices(&c, 1.0, 2.0, 10.0, 8));
        assert!(a.iter().all(|d| (2.0..10.0).contains(&d.strength)));
    }

    #[test]
    fn random_goals_alternate() {
        let g = resolve_goals(
            &GoalSpec::Random { count: 5, x_min: 1.0, x_max: 2.0, y_min: 0.0, y_max: 0.0, alternate_sides: true },
            3,
        );
        assert_eq!(g.len(), 5);
        for (i, p) in g.iter().enumerate() {
            assert_eq!(p[0] < 0.0, i % 2 == 0);
            assert!((1.0..=2.0).contains(&p[0].abs()));
        }
    }

    #[test]
    fn ring_points_outward() {
        let s = initial_states(&InitialConditions::Ring { position: vec![2.0, 3.0], speed: 1.5, count: 14 }, None).unwrap();
        assert_eq!(s.len(), 14);
        for (q, qd) in &s {
            assert_eq!(q, &vec_of(&[2.0, 3.0]));
            assert!((qd.norm() - 1.5).abs() < 1e-14);
        }
        assert!((s[0].1[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn energized_fabric_energy_is_hamiltonian() {
        let e = make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).unwrap();
        let f = combine_weighted(
            vec![(Arc::new(IdentityMap::new(2)) as MapRef, WeightedGeometry::new(Arc::new(ZeroGeometry { dim: 2 }), e).unwrap())],
            2,
        )
        .unwrap();
        let d = FabricDynamics { fabric: f, forcing: None };
        let s = d.observe(0.0, &vec_of(&[0.0, 0.0]), &vec_of(&[3.0, 4.0])).unwrap();
        assert!((s.energy.system - 12.5).abs() < 1e-12);
        assert!(s.acceleration.norm() < 1e-12);
    }
}
