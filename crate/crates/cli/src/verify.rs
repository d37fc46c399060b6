//! Property suites run by `fabric verify`.
//!
//! Each property samples seeded states, records the largest deviation it
//! observes and compares it against a fixed tolerance.

use std::fmt::Write as _;
use std::sync::Arc;

use fabric::energization::{commutation_check, energize, projector_from_metric};
use fabric::energy::{
    catalogue, el_terms_fd_oracle, fd_momentum, hamiltonian_rate, make_builtin_energy, EnergyKind,
    EnergyRef, EnergySpec, PulledBackEnergy,
};
use fabric::forcing::alpha_projection;
use fabric::geometry::{make_builtin_geometry, Geometry, GeometryKind, PotentialKind};
use fabric::kinematics::{CartesianToPolar, DistanceMap1D, PlanarArm, PolarMap};
use fabric::sim::config::{Component, ExperimentConfig, MapKind, Variant};
use fabric::sim::experiments::{max_dissipation_residual, random_states, resolve_goals, run_experiment, Scene};
use fabric::sim::{frechet_distance, rk4_rollout, RolloutRecord};
use fabric::spec::{pullback, spec_sum, to_canonical, FnSpec, Spec, SpecRef, SpecSum, SpecTerms, TransformTree};
use fabric::taskmap::{check_map_derivatives, AffineMap, ComposedMap, MapRef};
use fabric::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::parse_config;

pub const DEFAULT_SEED: u64 = 20;
const STATES: usize = 100;
const ALPHAS: [f64; 3] = [0.5, 2.0, 3.7];
const COND_CAP: f64 = 1e12;

/// Shipped configs, embedded so the suites run from any directory.
pub const CONFIGS: &[(&str, &str)] = &[
    ("layered_A", include_str!("../../../configs/layered_A.cfg")),
    ("layered_B", include_str!("../../../configs/layered_B.cfg")),
    ("layered_C", include_str!("../../../configs/layered_C.cfg")),
    ("layered_D", include_str!("../../../configs/layered_D.cfg")),
    ("layered_E", include_str!("../../../configs/layered_E.cfg")),
    ("layered_A_fabric", include_str!("../../../configs/layered_A_fabric.cfg")),
    ("layered_B_fabric", include_str!("../../../configs/layered_B_fabric.cfg")),
    ("layered_C_fabric", include_str!("../../../configs/layered_C_fabric.cfg")),
    ("layered_D_fabric", include_str!("../../../configs/layered_D_fabric.cfg")),
    ("layered_E_fabric", include_str!("../../../configs/layered_E_fabric.cfg")),
    ("arm_goal_reaching", include_str!("../../../configs/arm_goal_reaching.cfg")),
    (
        "arm_goal_reaching_no_redundancy",
        include_str!("../../../configs/arm_goal_reaching_no_redundancy.cfg"),
    ),
    ("arm_behavior_shaping", include_str!("../../../configs/arm_behavior_shaping.cfg")),
    ("commutation_polar", include_str!("../../../configs/commutation_polar.cfg")),
    ("path_consistency", include_str!("../../../configs/path_consistency.cfg")),
];

pub fn shipped_config(name: &str, overrides: &[String]) -> Result<ExperimentConfig, String> {
    let text = CONFIGS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| format!("no shipped config named {name}"))?;
    parse_config(text, overrides).map(|(c, _)| c).map_err(|e| format!("{name}: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Algebra,
    Energies,
    Energization,
    Speed,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Energies => "energies",
            Suite::Energization => "energization",
            Suite::Speed => "speed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub suite: &'static str,
    pub property: String,
    pub samples: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// State of the largest deviation, or the first evaluation error.
    pub detail: String,
}

/// Running maximum of one property's deviation.
struct Probe {
    property: String,
    tolerance: f64,
    max: f64,
    samples: usize,
    worst: String,
    error: Option<String>,
}

impl Probe {
    fn new(property: impl Into<String>, tolerance: f64) -> Self {
        Self {
            property: property.into(),
            tolerance,
            max: 0.0,
            samples: 0,
            worst: String::new(),
            error: None,
        }
    }

    fn record(&mut self, dev: f64, at: impl FnOnce() -> String) {
        let dev = if dev.is_nan() { f64::INFINITY } else { dev };
        if self.samples == 0 || dev > self.max {
            self.max = dev;
            self.worst = at();
        }
        self.samples += 1;
    }

    fn check<T, E: std::fmt::Display>(&mut self, r: Result<T, E>, at: impl FnOnce() -> String) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail(format!("{e} at {}", at()));
                None
            }
        }
    }

    fn fail(&mut self, msg: String) {
        if self.error.is_none() {
            self.error = Some(msg);
        }
    }

    fn row(self, suite: Suite) -> Row {
        let passed = self.error.is_none() && self.samples > 0 && self.max < self.tolerance;
        let detail = match (self.error, self.samples) {
            (Some(e), _) => e,
            (None, 0) => "no samples".into(),
            (None, _) => self.worst,
        };
        Row {
            suite: suite.name(),
            property: self.property,
            samples: self.samples,
            max_deviation: self.max,
            tolerance: self.tolerance,
            passed,
            detail,
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Vec<Row> {
    let probes = match suite {
        Suite::Algebra => algebra(seed),
        Suite::Energies => energies(seed),
        Suite::Energization => energization(seed),
        Suite::Speed => speed(seed),
    };
    probes.into_iter().map(|p| p.row(suite)).collect()
}

pub fn format_table(rows: &[Row]) -> String {
    let width = rows.iter().map(|r| r.property.len()).max().unwrap_or(8).max(8);
    let mut out = String::new();
    writeln!(out, "{:<6}{:<width$}  {:>7}  {:>11}  {:>9}", "", "property", "samples", "max dev", "tol").unwrap();
    for r in rows {
        let status = if r.passed { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{status:<6}{:<width$}  {:>7}  {:>11.3e}  {:>9.1e}",
            r.property, r.samples, r.max_deviation, r.tolerance
        )
        .unwrap();
        if !r.passed {
            writeln!(out, "{:<6}at {}", "", r.detail).unwrap();
        }
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    writeln!(out, "{} properties, {} failed", rows.len(), failed).unwrap();
    out
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + Matrix::identity(n, n) * 0.1
}

fn fmt_vec(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn state(x: &Vector, xd: &Vector) -> String {
    format!("x = {}, xd = {}", fmt_vec(x), fmt_vec(xd))
}

fn rel(diff: f64, scale: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(f64::MIN_POSITIVE)
    }
}

fn vec_rel(a: &Vector, b: &Vector) -> f64 {
    rel((a - b).amax(), b.amax())
}

fn terms_rel(a: &SpecTerms, b: &SpecTerms) -> f64 {
    let diff = (&a.metric - &b.metric).amax().max((&a.force - &b.force).amax());
    rel(diff, b.metric.amax().max(b.force.amax()))
}

/// `max |a − o| / max(abs, rel·|o|)` over all entries.
fn oracle_ratio(a: &SpecTerms, o: &SpecTerms, abs: f64, rel_tol: f64) -> f64 {
    a.metric
        .iter()
        .zip(o.metric.iter())
        .chain(a.force.iter().zip(o.force.iter()))
        .map(|(p, q)| (p - q).abs() / abs.max(rel_tol * q.abs()))
        .fold(0.0, f64::max)
}

fn energy(kind: EnergyKind) -> EnergyRef {
    make_builtin_energy(&kind).expect("suite parameters are valid")
}

fn chomp() -> EnergyKind {
    EnergyKind::ChompLike { center: vec![0.0, 0.0], radius: 1.0, k: 0.5 }
}

fn circle_barrier() -> PotentialKind {
    PotentialKind::CircleBarrier { center: vec![0.0, 0.0], radius: 1.0, k: 0.5 }
}

/// Points with `1.3 ≤ ‖x‖ ≤ 4`.
fn annulus(rng: &mut ChaCha8Rng) -> Vector {
    let r = rng.random_range(1.3..4.0);
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    Vector::from_column_slice(&[r * a.cos(), r * a.sin()])
}

/// Steps of a rollout flattened into `(q, q̇)` pairs.
fn states_of(r: &RolloutRecord) -> impl Iterator<Item = (Vector, Vector)> + '_ {
    r.positions
        .iter()
        .zip(&r.velocities)
        .map(|(q, v)| (Vector::from_column_slice(q), Vector::from_column_slice(v)))
}

// ---------------------------------------------------------------- algebra

fn algebra(seed: u64) -> Vec<Probe> {
    let mut rng_a = rng(seed, 1);
    let specs: Vec<SpecRef> = vec![
        Arc::new(EnergySpec(energy(chomp()))),
        Arc::new(EnergySpec(energy(EnergyKind::PriorityRadial { dim: 2, m_hi: 2.0, m_lo: 0.3, alpha_m: 0.75 }))),
        Arc::new(EnergySpec(energy(EnergyKind::HorizontalGaussian { lambda: 1.0, sigma: 0.5, goal_x: 1.2 }))),
    ];
    let sum = |a: &SpecRef, b: &SpecRef| -> SpecRef { Arc::new(spec_sum(a.clone(), b.clone()).expect("same dim")) };
    let ab = sum(&specs[0], &specs[1]);
    let ba = sum(&specs[1], &specs[0]);
    let ab_c = sum(&ab, &specs[2]);
    let a_bc = sum(&specs[0], &sum(&specs[1], &specs[2]));

    let mut commutative = Probe::new("spec sum commutes", 1e-12);
    let mut associative = Probe::new("spec sum associates", 1e-12);
    let mut symmetric = Probe::new("metric symmetry", 1e-10);
    for _ in 0..STATES {
        let (x, xd) = (annulus(&mut rng_a), uniform(&mut rng_a, 2, -2.0, 2.0));
        let at = || state(&x, &xd);
        let (Some(t1), Some(t2)) = (commutative.check(ab.eval(&x, &xd), at), commutative.check(ba.eval(&x, &xd), at))
        else {
            continue;
        };
        commutative.record(terms_rel(&t1, &t2), at);
        let (Some(t3), Some(t4)) =
            (associative.check(ab_c.eval(&x, &xd), at), associative.check(a_bc.eval(&x, &xd), at))
        else {
            continue;
        };
        associative.record(terms_rel(&t3, &t4), at);
        symmetric.record(rel((&t3.metric - t3.metric.transpose()).amax(), t3.metric.amax()), at);
    }
    for entry in catalogue() {
        let mut r = rng(seed, 2);
        for _ in 0..STATES {
            let (x, xd) = (entry.sampler)(&mut r);
            let at = || format!("{}: {}", entry.name, state(&x, &xd));
            if let Some(t) = symmetric.check(entry.energy.el_terms(&x, &xd), at) {
                symmetric.record(rel((&t.metric - t.metric.transpose()).amax(), t.metric.amax()), at);
            }
        }
    }

    let mut sum_view = Probe::new("canonical view of a sum", 1e-9);
    let mut residual = Probe::new("canonical solve residual", 1e-9);
    let mut round_trip = Probe::new("canonical round trip", 1e-9);
    let mut r = rng(seed, 3);
    for _ in 0..STATES {
        let n = r.random_range(2..5);
        let (m1, m2) = (random_spd(&mut r, n), random_spd(&mut r, n));
        let (a1, a2) = (uniform(&mut r, n, -2.0, 2.0), uniform(&mut r, n, -2.0, 2.0));
        let (f1, f2) = (-(&m1 * &a1), -(&m2 * &a2));
        let s1: SpecRef = {
            let (m, f) = (m1.clone(), f1.clone());
            Arc::new(FnSpec::new(n, move |_, _| m.clone(), move |_, _| f.clone()))
        };
        let s2: SpecRef = {
            let (m, f) = (m2.clone(), f2.clone());
            Arc::new(FnSpec::new(n, move |_, _| m.clone(), move |_, _| f.clone()))
        };
        let (x, xd) = (Vector::zeros(n), Vector::zeros(n));
        let at = || format!("n = {n}, a1 = {}, a2 = {}", fmt_vec(&a1), fmt_vec(&a2));
        let expected = (&m1 + &m2).lu().solve(&(&m1 * &a1 + &m2 * &a2));
        let summed: SpecRef = Arc::new(SpecSum::new(n, vec![s1.clone(), s2]).expect("same dim"));
        if let (Some(a), Some(e)) = (
            sum_view.check(to_canonical(summed, COND_CAP).acceleration(&x, &xd), at),
            expected,
        ) {
            sum_view.record(vec_rel(&a, &e), at);
        }
        let canon = to_canonical(s1.clone(), COND_CAP);
        if let Some(a) = residual.check(canon.acceleration(&x, &xd), at) {
            residual.record(rel((&m1 * a + &f1).norm(), f1.norm()), at);
        }
        let back = canon.to_spec();
        if let (Some(t), Some(o)) = (round_trip.check(back.eval(&x, &xd), at), round_trip.check(s1.eval(&x, &xd), at)) {
            round_trip.record(terms_rel(&t, &o), at);
        }
    }
    for entry in catalogue() {
        let spec: SpecRef = Arc::new(EnergySpec(entry.energy.clone()));
        let canon = to_canonical(spec.clone(), COND_CAP);
        let back = canon.to_spec();
        let mut r = rng(seed, 4);
        for _ in 0..STATES {
            let (x, xd) = (entry.sampler)(&mut r);
            let Ok(o) = spec.eval(&x, &xd) else { continue };
            let sym = (&o.metric + o.metric.transpose()) * 0.5;
            if fabric::linalg::condition_number(&sym) > 1e8 {
                continue;
            }
            let at = || format!("{}: {}", entry.name, state(&x, &xd));
            if let Some(t) = round_trip.check(back.eval(&x, &xd), at) {
                round_trip.record(terms_rel(&t, &o), at);
            }
        }
    }

    let arm: MapRef = Arc::new(PlanarArm::default());
    let leaf_a: SpecRef = specs[1].clone();
    let leaf_b: SpecRef = specs[2].clone();
    let whole = pullback(arm.clone(), sum(&leaf_a, &leaf_b)).expect("dims");
    let pa = pullback(arm.clone(), leaf_a).expect("dims");
    let pb = pullback(arm.clone(), leaf_b).expect("dims");
    let mut linear = Probe::new("pullback distributes over sums", 1e-10);
    let mut r = rng(seed, 5);
    for _ in 0..STATES {
        let (q, qd) = (uniform(&mut r, 3, -3.0, 3.0), uniform(&mut r, 3, -2.0, 2.0));
        let at = || state(&q, &qd);
        let (Some(w), Some(a), Some(b)) = (
            linear.check(whole.eval(&q, &qd), at),
            linear.check(pa.eval(&q, &qd), at),
            linear.check(pb.eval(&q, &qd), at),
        ) else {
            continue;
        };
        let parts = SpecTerms { metric: a.metric + b.metric, force: a.force + b.force };
        linear.record(terms_rel(&parts, &w), at);
    }

    let polar: MapRef = Arc::new(PolarMap);
    let leaf = energy(chomp());
    let pulled = pullback(polar.clone(), Arc::new(EnergySpec(leaf.clone()))).expect("dims");
    let root_energy = PulledBackEnergy::new(polar.clone(), leaf).expect("dims");
    let mut polar_oracle = Probe::new("polar pullback vs root EL oracle (ratio)", 1.0 + 1e-12);
    let mut r = rng(seed, 6);
    for _ in 0..STATES {
        let q = Vector::from_column_slice(&[r.random_range(1.5..3.5), r.random_range(-3.0..3.0)]);
        let qd = uniform(&mut r, 2, -1.0, 1.0);
        let at = || state(&q, &qd);
        if let (Some(a), Some(o)) =
            (polar_oracle.check(pulled.eval(&q, &qd), at), polar_oracle.check(el_terms_fd_oracle(&root_energy, &q, &qd), at))
        {
            polar_oracle.record(oracle_ratio(&a, &o, 1e-5, 1e-4), at);
        }
    }

    let maps = task_maps();
    let mut derivatives = Probe::new("task map derivatives vs finite differences (ratio)", 1.0 + 1e-12);
    let mut r = rng(seed, 7);
    for (name, map, lo, hi) in &maps {
        let n = map.domain_dim();
        let mut drawn = 0;
        while drawn < STATES / 4 {
            let (q, qd) = (uniform(&mut r, n, *lo, *hi), uniform(&mut r, n, -2.0, 2.0));
            if map.evaluate(&q, &qd).is_err() {
                continue;
            }
            drawn += 1;
            let at = || format!("{name}: {}", state(&q, &qd));
            if let Some(c) = derivatives.check(check_map_derivatives(&**map, &q, &qd), at) {
                let ratio = (c.jacobian_error / 1e-5f64.max(1e-4 * c.jacobian_scale))
                    .max(c.curvature_error / 1e-5f64.max(1e-4 * c.curvature_scale));
                derivatives.record(ratio, at);
            }
        }
    }

    let mut tree = Probe::new("transform tree equals monolithic fabric", 1e-9);
    for name in ["layered_E", "layered_E_fabric", "arm_behavior_shaping"] {
        let cfg = match shipped_config(name, &[]) {
            Ok(c) => c,
            Err(e) => {
                tree.fail(e);
                continue;
            }
        };
        let Some(fabric) = tree.check(root_fabric(&cfg), || name.to_string()) else {
            continue;
        };
        let mut t = TransformTree::new(fabric.root_dim());
        for (map, wg) in fabric.components() {
            t.add_leaf(map.clone(), Arc::new(wg.induced_spec())).expect("dims");
        }
        let resolved = t.resolve().expect("non-empty");
        for (q, qd) in root_states(&cfg, STATES, seed) {
            let at = || format!("{name}: {}", state(&q, &qd));
            if let (Some(a), Some(b)) = (tree.check(resolved.eval(&q, &qd), at), tree.check(fabric.eval(&q, &qd), at)) {
                tree.record(terms_rel(&a, &b), at);
            }
        }
    }

    let mut covariance = Probe::new("polar rollout maps onto Cartesian rollout", 1e-4);
    let cart: SpecRef = Arc::new(EnergySpec(energy(chomp())));
    let cart_c = to_canonical(cart.clone(), COND_CAP);
    let polar_c = to_canonical(Arc::new(pullback(polar.clone(), cart).expect("dims")), COND_CAP);
    let mut r = rng(seed, 8);
    for _ in 0..8 {
        let rad = r.random_range(2.0..3.0);
        let th: f64 = r.random_range(-3.0..3.0);
        let x0 = Vector::from_column_slice(&[rad * th.cos(), rad * th.sin()]);
        let xd0 = uniform(&mut r, 2, -0.7, 0.7);
        let q0 = Vector::from_column_slice(&[rad, th]);
        let qd0 = Vector::from_column_slice(&[
            x0.dot(&xd0) / rad,
            (x0[0] * xd0[1] - x0[1] * xd0[0]) / (rad * rad),
        ]);
        let at = || state(&x0, &xd0);
        let a = covariance.check(rk4_rollout(|x, xd, _| cart_c.acceleration(x, xd), &x0, &xd0, 0.01, 1.0), at);
        let b = covariance.check(rk4_rollout(|q, qd, _| polar_c.acceleration(q, qd), &q0, &qd0, 0.01, 1.0), at);
        let (Some(a), Some(b)) = (a, b) else { continue };
        if a.len() != b.len() {
            covariance.fail(format!("rollouts ended early at {}", at()));
            continue;
        }
        let dev = a
            .positions
            .iter()
            .zip(&b.positions)
            .map(|(x, q)| (Vector::from_column_slice(x) - polar.map(&Vector::from_column_slice(q)).expect("polar")).norm())
            .fold(0.0, f64::max);
        covariance.record(dev, at);
    }

    vec![
        commutative,
        associative,
        symmetric,
        sum_view,
        residual,
        round_trip,
        linear,
        polar_oracle,
        derivatives,
        tree,
        covariance,
    ]
}

/// Every shipped task map with the coordinate box it is sampled from.
fn task_maps() -> Vec<(&'static str, MapRef, f64, f64)> {
    let arm: MapRef = Arc::new(PlanarArm::default());
    let shift: MapRef = Arc::new(AffineMap::translation(&Vector::from_column_slice(&[1.0, -0.5])));
    let mut out: Vec<(&'static str, MapRef, f64, f64)> = vec![
        ("planar_arm", arm.clone(), -3.0, 3.0),
        ("polar", Arc::new(PolarMap), 0.5, 3.0),
        ("cartesian_to_polar", Arc::new(CartesianToPolar), -3.0, 3.0),
        ("circle_distance", Arc::new(DistanceMap1D::circle(Vector::zeros(2), 1.0).expect("radius")), -3.0, 3.0),
        ("floor_height", Arc::new(DistanceMap1D::floor(0.0)), -3.0, 3.0),
        ("translation", shift.clone(), -3.0, 3.0),
        ("arm_then_translation", Arc::new(ComposedMap::new(arm, shift).expect("dims")), -3.0, 3.0),
    ];
    for m in DistanceMap1D::box_limits(&[-4.0, -4.0], &[4.0, 4.0]).expect("box") {
        out.push(("box_limit", Arc::new(m), -3.5, 3.5));
    }
    out
}

/// The configured fabric at its first goal, including the forcing priority
/// energy when forced.
fn root_fabric(cfg: &ExperimentConfig) -> fabric::Result<fabric::geometry::Fabric> {
    let scene = Scene::new(cfg)?;
    let goal = first_goal(cfg, &scene)?;
    match (&goal, cfg.experiment.variant) {
        (Some(g), Variant::Forced) => {
            let p = scene.potential(g)?;
            scene.fabric(goal.as_ref(), Some(&p))
        }
        _ => scene.fabric(goal.as_ref(), None),
    }
}

fn first_goal(cfg: &ExperimentConfig, scene: &Scene) -> fabric::Result<Option<Vector>> {
    if let Some(t) = scene.target()? {
        return Ok(Some(t));
    }
    Ok(cfg
        .forcing
        .as_ref()
        .and_then(|f| f.goals.as_ref())
        .and_then(|g| resolve_goals(g, cfg.experiment.seed).first().copied())
        .map(|g| Vector::from_column_slice(&g)))
}

/// Seeded root states inside the configured limits, clear of obstacles and
/// with a well-conditioned root metric.
fn root_states(cfg: &ExperimentConfig, count: usize, seed: u64) -> Vec<(Vector, Vector)> {
    let dim = cfg.tree.dim;
    let (mut lo, mut hi) = (vec![-3.0; dim], vec![3.0; dim]);
    if let Some(a) = &cfg.tree.arm {
        lo.clone_from(&a.lower);
        hi.clone_from(&a.upper);
    }
    let mut circles = Vec::new();
    for c in &cfg.tree.components {
        match c {
            Component::CoordinateLimits { lower: Some(l), upper: Some(u), .. } => {
                lo.clone_from(l);
                hi.clone_from(u);
            }
            Component::CircleObstacle { center, radius, .. } => circles.push((Vector::from_column_slice(center), *radius)),
            _ => {}
        }
    }
    let fabric = root_fabric(cfg).ok();
    let mut r = rng(seed, 9);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 100 * count {
        tries += 1;
        let q = Vector::from_fn(dim, |i, _| {
            let m = 0.1 * (hi[i] - lo[i]);
            r.random_range(lo[i] + m..hi[i] - m)
        });
        let qd = uniform(&mut r, dim, -2.0, 2.0);
        if circles.iter().any(|(c, rad)| (&q - c).norm() / rad - 1.0 < 0.1) {
            continue;
        }
        if let Some(f) = &fabric {
            match f.root_h2(&q, &qd) {
                Ok(s) if !s.regularized && s.condition < 1e8 => {}
                _ => continue,
            }
        }
        out.push((q, qd));
    }
    out
}

// ---------------------------------------------------------------- energies

fn energies(seed: u64) -> Vec<Probe> {
    let mut oracle = Probe::new("EL terms vs finite-difference oracle (ratio)", 1.0 + 1e-12);
    let mut euler = Probe::new("momentum vs finite differences", 1e-5);
    let mut finsler = Probe::new("Finsler H_e = L_e", 1e-8);
    let mut value_hd = Probe::new("Finsler L_e degree-2 homogeneity", 1e-8);
    let mut metric_hd = Probe::new("Finsler M_e degree-0 homogeneity", 1e-8);
    let mut force_hd = Probe::new("Finsler f_e degree-2 homogeneity", 1e-8);
    let mut conserve = Probe::new("EL flow conserves H_e (rate)", 1e-10);
    let mut entries = catalogue();
    let mut systems: Vec<(&'static str, EnergyRef, Vec<(Vector, Vector)>)> = Vec::new();
    for name in ["layered_E_fabric", "arm_behavior_shaping"] {
        match shipped_config(name, &[]).and_then(|c| {
            let f = root_fabric(&c).map_err(|e| e.to_string())?;
            Ok((f, root_states(&c, STATES, seed)))
        }) {
            Ok((f, states)) => systems.push((name, Arc::new(f.system_energy()), states)),
            Err(e) => finsler.fail(e),
        }
    }
    let mut r = rng(seed, 10);
    let drawn: Vec<(&'static str, EnergyRef, Vec<(Vector, Vector)>)> = entries
        .drain(..)
        .map(|e| {
            let states = (0..STATES).map(|_| (e.sampler)(&mut r)).collect();
            (e.name, e.energy, states)
        })
        .chain(systems)
        .collect();

    for (name, e, states) in &drawn {
        for (x, xd) in states {
            let at = || format!("{name}: {}", state(x, xd));
            let Some(t) = oracle.check(e.el_terms(x, xd), at) else { continue };
            if let Some(o) = oracle.check(el_terms_fd_oracle(&**e, x, xd), at) {
                oracle.record(oracle_ratio(&t, &o, 1e-5, 1e-4), at);
            }
            if let (Some(m), Some(mo)) = (euler.check(e.momentum(x, xd), at), euler.check(fd_momentum(&**e, x, xd), at)) {
                euler.record((&m - &mo).amax() / (1.0 + mo.amax()), at);
            }
            let Some(h) = conserve.check(e.hamiltonian(x, xd), at) else { continue };
            let sym = (&t.metric + t.metric.transpose()) * 0.5;
            if fabric::linalg::condition_number(&sym) < 1e8 {
                if let Some(a) = sym.clone().lu().solve(&(-&t.force)) {
                    if let Some(rate) = conserve.check(hamiltonian_rate(&**e, x, xd, &a), at) {
                        conserve.record(rate.abs() / (1.0 + h.abs()), at);
                    }
                }
            }
            let Some(f) = e.as_finsler() else { continue };
            let Some(l) = finsler.check(f.value(x, xd), at) else { continue };
            finsler.record(rel((h - l).abs(), l.abs()), at);
            for a in ALPHAS {
                let xa = xd * a;
                let at = || format!("{name}: alpha = {a}, {}", state(x, xd));
                if let Some(la) = value_hd.check(f.value(x, &xa), at) {
                    value_hd.record(rel((la - a * a * l).abs(), (a * a * l).abs()), at);
                }
                if let Some(ta) = metric_hd.check(f.el_terms(x, &xa), at) {
                    metric_hd.record(rel((&ta.metric - &t.metric).amax(), t.metric.amax()), at);
                    force_hd.record(vec_rel(&ta.force, &(&t.force * (a * a))), at);
                }
            }
        }
    }
    vec![oracle, euler, finsler, value_hd, metric_hd, force_hd, conserve]
}

// ---------------------------------------------------------------- energization

fn builtin_geometries() -> Vec<(&'static str, GeometryKind, usize)> {
    let barrier = PotentialKind::Barrier1d { alpha1: 0.4, alpha2: 0.2, alpha3: 20.0, alpha4: 5.0 };
    vec![
        ("zero_baseline", GeometryKind::ZeroBaseline { dim: 2 }, 2),
        ("limit_gradient", GeometryKind::PotentialGradient { lambda: 0.25, potential: barrier }, 1),
        ("circle_gradient", GeometryKind::PotentialGradient { lambda: 0.5, potential: circle_barrier() }, 2),
        (
            "quadratic_gradient",
            GeometryKind::PotentialGradient {
                lambda: 1.0,
                potential: PotentialKind::Quadratic { center: vec![1.0, -1.0], scale: 2.0 },
            },
            2,
        ),
        (
            "smooth_norm_gradient",
            GeometryKind::PotentialGradient {
                lambda: 7.0,
                potential: PotentialKind::SmoothNorm { dim: 2, k: 1.0, alpha: 10.0 },
            },
            2,
        ),
        ("chomp_derived", GeometryKind::EnergyDerived { energy: chomp() }, 2),
        (
            "floor_energy_derived",
            GeometryKind::EnergyDerived { energy: EnergyKind::FloorLift { lambda: 1.0, sigma: 0.3, floor: 0.0 } },
            2,
        ),
        (
            "energy_scaled",
            GeometryKind::EnergyScaled { lambda: 1.0, energy: chomp(), potential: circle_barrier() },
            2,
        ),
        ("vortex_cw", GeometryKind::Vortex { strength: 2.0, clockwise: true }, 2),
        ("vortex_ccw", GeometryKind::Vortex { strength: 0.7, clockwise: false }, 2),
        ("attract", GeometryKind::Attract { target: vec![1.0, 2.0] }, 2),
        ("lift", GeometryKind::Lift { normal: vec![0.0, 1.0] }, 2),
    ]
}

fn hd2(p: &mut Probe, name: &str, h: &dyn Geometry, x: &Vector, xd: &Vector) {
    let Some(base) = p.check(h.h2(x, xd), || format!("{name}: {}", state(x, xd))) else {
        return;
    };
    for a in ALPHAS {
        let at = || format!("{name}: alpha = {a}, {}", state(x, xd));
        if let Some(ha) = p.check(h.h2(x, &(xd * a)), at) {
            p.record(vec_rel(&ha, &(&base * (a * a))), at);
        }
    }
}

/// Truncates a polyline to arc length `len`.
fn truncate(path: &[Vector], len: f64) -> Vec<Vector> {
    let mut out = vec![path[0].clone()];
    let mut s = 0.0;
    for w in path.windows(2) {
        let d = (&w[1] - &w[0]).norm();
        if s + d >= len {
            let t = if d > 0.0 { (len - s) / d } else { 0.0 };
            out.push(&w[0] + (&w[1] - &w[0]) * t);
            return out;
        }
        s += d;
        out.push(w[1].clone());
    }
    out
}

fn arc_length(path: &[Vector]) -> f64 {
    path.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

fn energization(seed: u64) -> Vec<Probe> {
    let mut idempotent = Probe::new("P_e idempotence (Frobenius)", 1e-10);
    let mut no_work = Probe::new("xd^T P_e r = 0", 1e-10);
    let mut r = rng(seed, 11);
    for _ in 0..STATES {
        let n = r.random_range(2..5);
        let m = random_spd(&mut r, n);
        let (xd, f) = (uniform(&mut r, n, -2.0, 2.0), uniform(&mut r, n, -2.0, 2.0));
        let at = || format!("n = {n}, xd = {}, r = {}", fmt_vec(&xd), fmt_vec(&f));
        let Some(p) = idempotent.check(projector_from_metric(&m, &xd), at) else { continue };
        idempotent.record((&p * &p - &p).norm(), at);
        no_work.record(xd.dot(&(&p * &f)).abs(), at);
    }

    let mut builtin = Probe::new("HD2 of built-in generators", 1e-8);
    let mut energized_hd = Probe::new("HD2 of energized generators", 1e-8);
    let mut zero_work = Probe::new("zero-work form matches h + alpha xd", 1e-9);
    let mut conserving = Probe::new("energized flow conserves H_e (rate)", 1e-10);
    let finsler: Vec<(&'static str, EnergyRef)> = vec![
        ("chomp_like", energy(chomp())),
        ("euclidean", energy(EnergyKind::Euclidean { dim: 2, lambda: 1.0 })),
        ("priority_radial", energy(EnergyKind::PriorityRadial { dim: 2, m_hi: 2.0, m_lo: 0.3, alpha_m: 0.75 })),
    ];
    let mut r = rng(seed, 12);
    for (name, kind, dim) in builtin_geometries() {
        let h = make_builtin_geometry(&kind).expect("suite parameters are valid");
        for _ in 0..STATES {
            let (x, xd) = if dim == 1 {
                (Vector::from_element(1, r.random_range(0.05..5.0)), Vector::from_element(1, r.random_range(-2.0..2.0)))
            } else {
                (annulus(&mut r), uniform(&mut r, 2, -2.0, 2.0))
            };
            hd2(&mut builtin, name, &*h, &x, &xd);
        }
        if dim != 2 {
            continue;
        }
        for (ename, e) in &finsler {
            let sys = energize(e.clone(), h.clone()).expect("dims");
            let g = sys.as_geometry();
            for _ in 0..STATES / 4 {
                let (x, xd) = (annulus(&mut r), uniform(&mut r, 2, -2.0, 2.0));
                let label = format!("{name} with {ename}");
                hd2(&mut energized_hd, &label, &g, &x, &xd);
                let at = || format!("{label}: {}", state(&x, &xd));
                let (Some(a), Some(z)) =
                    (zero_work.check(sys.acceleration(&x, &xd), at), zero_work.check(sys.zero_work_acceleration(&x, &xd), at))
                else {
                    continue;
                };
                zero_work.record(vec_rel(&z, &a), at);
                let (Some(rate), Some(he)) =
                    (conserving.check(hamiltonian_rate(&**e, &x, &xd, &a), at), conserving.check(e.hamiltonian(&x, &xd), at))
                else {
                    continue;
                };
                conserving.record(rate.abs() / (1.0 + he.abs()), at);
            }
        }
    }

    let mut roots = Probe::new("HD2 of resolved root generators", 1e-8);
    let mut root_energized = Probe::new("HD2 of energized root generators", 1e-8);
    for (name, _) in CONFIGS.iter().filter(|(n, _)| n.starts_with("layered") || n.starts_with("arm")) {
        let cfg = match shipped_config(name, &[]) {
            Ok(c) => c,
            Err(e) => {
                roots.fail(e);
                continue;
            }
        };
        let Some(f) = roots.check(root_fabric(&cfg), || name.to_string()) else { continue };
        let g = f.root_geometry();
        let sys = energize(Arc::new(f.system_energy()), Arc::new(g.clone())).expect("dims");
        let eg = sys.as_geometry();
        for (q, qd) in root_states(&cfg, STATES, seed) {
            hd2(&mut roots, name, &g, &q, &qd);
            hd2(&mut root_energized, name, &eg, &q, &qd);
        }
    }

    let mut paths = Probe::new("energization preserves paths (Frechet)", 1e-3);
    let h = make_builtin_geometry(&GeometryKind::PotentialGradient { lambda: 0.5, potential: circle_barrier() })
        .expect("valid");
    let mut r = rng(seed, 13);
    for (ename, e) in &finsler {
        let sys = energize(e.clone(), h.clone()).expect("dims");
        for _ in 0..4 {
            let x0 = Vector::from_column_slice(&[-3.0, r.random_range(-1.5..1.5)]);
            let xd0 = Vector::from_column_slice(&[1.0, r.random_range(-0.2..0.2)]);
            let at = || format!("{ename}: {}", state(&x0, &xd0));
            let raw = paths.check(rk4_rollout(|x, xd, _| Ok(-h.h2(x, xd)?), &x0, &xd0, 0.005, 5.0), at);
            let en = paths.check(rk4_rollout(|x, xd, _| sys.acceleration(x, xd), &x0, &xd0, 0.005, 5.0), at);
            let (Some(a), Some(b)) = (raw, en) else { continue };
            let pa: Vec<Vector> = a.positions.iter().map(|p| Vector::from_column_slice(p)).collect();
            let pb: Vec<Vector> = b.positions.iter().map(|p| Vector::from_column_slice(p)).collect();
            let len = arc_length(&pa).min(arc_length(&pb));
            paths.record(frechet_distance(&truncate(&pa, len), &truncate(&pb, len)), at);
        }
    }

    let mut commutation = Probe::new("polar energize/pullback commutation", 1e-8);
    match shipped_config("commutation_polar", &[]) {
        Ok(cfg) => match cfg.tree.components.as_slice() {
            [Component::Leaf { map, geometry, energy, .. }] => {
                let map: MapRef = match map {
                    MapKind::Polar => Arc::new(PolarMap),
                    MapKind::CartesianToPolar => Arc::new(CartesianToPolar),
                    _ => Arc::new(PolarMap),
                };
                let h = make_builtin_geometry(geometry).expect("shipped config is valid");
                let e = make_builtin_energy(energy).expect("shipped config is valid");
                let states = random_states(&*map, 2, STATES, seed);
                if let Some(rep) = commutation.check(commutation_check(&*e, &*h, &*map, &states), || "polar".into()) {
                    if !rep.rank_deficient.is_empty() {
                        commutation.fail(format!("{} rank-deficient states", rep.rank_deficient.len()));
                    }
                    commutation.samples = rep.checked;
                    commutation.max = rep.max_relative;
                    commutation.worst = "random polar states".into();
                }
            }
            _ => commutation.fail("commutation_polar has no single leaf".into()),
        },
        Err(e) => commutation.fail(e),
    }

    vec![
        idempotent,
        no_work,
        builtin,
        energized_hd,
        zero_work,
        conserving,
        roots,
        root_energized,
        paths,
        commutation,
    ]
}

// ---------------------------------------------------------------- speed

const FORCED: [&str; 8] = [
    "layered_A",
    "layered_B",
    "layered_C",
    "layered_D",
    "layered_E",
    "arm_goal_reaching",
    "arm_goal_reaching_no_redundancy",
    "arm_behavior_shaping",
];

fn run_shipped(p: &mut Probe, name: &str, overrides: &[&str]) -> Option<(ExperimentConfig, Vec<RolloutRecord>)> {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let cfg = match shipped_config(name, &overrides) {
        Ok(c) => c,
        Err(e) => {
            p.fail(e);
            return None;
        }
    };
    let run = p.check(run_experiment(&cfg), || name.to_string())?;
    Some((cfg, run.rollouts))
}

fn speed(seed: u64) -> Vec<Probe> {
    let mut dissipation = Probe::new("d/dt(H_e + psi) = -beta |qd|^2 with eta = 1", 1e-6);
    if let Some((_, rs)) = run_shipped(
        &mut dissipation,
        "layered_A",
        &["forcing.register_priority_energy=false", "speed_control.eta=1"],
    ) {
        for r in &rs {
            dissipation.record(max_dissipation_residual(r), || r.label.clone());
        }
    }

    let mut decrease = Probe::new("d/dt(H_e + psi) <= 0 with B = B_min = 0", 1e-9);
    for name in ["layered_A", "layered_E"] {
        if let Some((_, rs)) = run_shipped(&mut decrease, name, &["speed_control.b=0", "speed_control.b_min=0"]) {
            for r in &rs {
                for (k, (rate, e)) in r.rates.iter().zip(&r.energies).enumerate() {
                    let up = (rate.system + rate.potential).max(0.0) / (1.0 + e.system.abs() + e.potential.abs());
                    decrease.record(up, || format!("{name} {} step {k}", r.label));
                }
            }
        }
    }

    let mut floor = Probe::new("beta >= B_min at every step", 1e-12);
    let mut eta_range = Probe::new("eta within [0, 1] at every step", 1e-12);
    for name in FORCED {
        let Some((cfg, rs)) = run_shipped(&mut floor, name, &[]) else { continue };
        let b_min = cfg.speed_control.as_ref().map_or(0.0, |s| s.b_min);
        for r in &rs {
            for (k, d) in r.diagnostics.iter().enumerate() {
                let at = || format!("{name} {} step {k}", r.label);
                floor.record((b_min - d.beta).max(0.0), at);
                eta_range.record((-d.eta).max(d.eta - 1.0).max(0.0), at);
            }
        }
    }

    let mut regulated = Probe::new("peak speed before the damping radius matches v_d (relative)", 0.05);
    let mut rest = Probe::new("|d psi| at rest points", 1e-3);
    let mut bounds = Probe::new("potential gradient and priority bounds", 1e-12);
    if let Some((cfg, rs)) =
        run_shipped(&mut rest, "layered_A", &["integration.stop_on_convergence=false", "integration.horizon=24"])
    {
        let scene = Scene::new(&cfg).expect("shipped config is valid");
        let target = scene.target().ok().flatten().expect("layered_A has a target");
        let p = scene.potential(&target).expect("valid");
        let ctl = cfg.speed_control.as_ref().expect("forced");
        for r in &rs {
            let mut peak: f64 = 0.0;
            for (q, qd) in states_of(r) {
                if (&q - &target).norm() < ctl.radius {
                    break;
                }
                peak = peak.max(qd.norm());
            }
            regulated.record((peak - ctl.v_d).abs() / ctl.v_d, || format!("{} peak {peak:.4}", r.label));
            let (q, qd) = (r.final_position(), r.final_velocity());
            if qd.norm() >= 1e-3 {
                rest.fail(format!("{} not at rest: |qd| = {:.3e}", r.label, qd.norm()));
                continue;
            }
            if let Some(g) = rest.check(p.potential_force(&q), || r.label.clone()) {
                rest.record(g.norm(), || format!("{} at {}", r.label, fmt_vec(&q)));
            }
        }
        let params = p.params();
        let mut rr = rng(seed, 14);
        for _ in 0..STATES {
            let x = uniform(&mut rr, 2, -6.0, 6.0);
            let at = || fmt_vec(&x);
            let (Some(g), Some(m)) = (bounds.check(p.base_gradient(&x), at), bounds.check(p.priority_metric(&x), at)) else {
                continue;
            };
            let w = m[(0, 0)];
            let off = (&m - Matrix::identity(2, 2) * w).amax();
            let out_of_range = (params.m_lo - w).max(w - params.m_hi).max(0.0);
            bounds.record(((g.norm() - params.k) / params.k).max(0.0).max(off).max(out_of_range), at);
        }
    }

    let mut projection = Probe::new("alpha projection conserves Finsler energies (rate)", 1e-10);
    for entry in catalogue().into_iter().filter(|e| e.energy.as_finsler().is_some()) {
        let mut r = rng(seed, 15);
        for _ in 0..STATES / 4 {
            let (x, xd) = (entry.sampler)(&mut r);
            let target = uniform(&mut r, x.len(), -3.0, 3.0);
            let at = || format!("{}: {}", entry.name, state(&x, &xd));
            let Some(t) = projection.check(entry.energy.el_terms(&x, &xd), at) else { continue };
            if !(xd.dot(&(&t.metric * &xd)) > 1e-12 * xd.norm_squared()) {
                continue;
            }
            let Some(a) = projection.check(alpha_projection(&*entry.energy, &target, &x, &xd), at) else { continue };
            let xdd = &target + &xd * a;
            let (Some(rate), Some(h)) = (
                projection.check(hamiltonian_rate(&*entry.energy, &x, &xd, &xdd), at),
                projection.check(entry.energy.hamiltonian(&x, &xd), at),
            ) else {
                continue;
            };
            projection.record(rate.abs() / (1.0 + h.abs()), at);
        }
    }

    vec![dissipation, decrease, floor, eta_range, regulated, rest, bounds, projection]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_tracks_worst_state() {
        let mut p = Probe::new("p", 1.0);
        p.record(0.2, || "a".into());
        p.record(0.5, || "b".into());
        p.record(0.1, || "c".into());
        let row = p.row(Suite::Algebra);
        assert!(row.passed);
        assert_eq!(row.detail, "b");
        assert_eq!(row.samples, 3);
    }

    #[test]
    fn nan_and_errors_fail() {
        let mut p = Probe::new("p", 1.0);
        p.record(f64::NAN, || "n".into());
        assert!(!p.row(Suite::Algebra).passed);
        let mut q = Probe::new("q", 1.0);
        q.record(0.0, String::new);
        q.fail("boom".into());
        let row = q.row(Suite::Algebra);
        assert!(!row.passed);
        assert_eq!(row.detail, "boom");
        assert!(!Probe::new("empty", 1.0).row(Suite::Algebra).passed);
    }

    #[test]
    fn truncation_keeps_length() {
        let path: Vec<Vector> = (0..5).map(|i| Vector::from_column_slice(&[i as f64, 0.0])).collect();
        let t = truncate(&path, 2.5);
        assert!((arc_length(&t) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn shipped_configs_parse() {
        for (name, _) in CONFIGS {
            shipped_config(name, &[]).unwrap();
        }
    }

    #[test]
    fn table_lists_failures_with_detail() {
        let mut p = Probe::new("bad", 1e-3);
        p.record(1.0, || "x = [1]".into());
        let table = format_table(&[p.row(Suite::Speed)]);
        assert!(table.contains("FAIL"));
        assert!(table.contains("at x = [1]"));
        assert!(table.contains("1 failed"));
    }
}
