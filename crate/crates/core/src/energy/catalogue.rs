//! Every built-in energy with a sampler of interior states, shared by the
//! property suites.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{make_builtin_energy, EnergyKind, EnergyRef, EnergySum, PulledBackEnergy};
use crate::kinematics::PlanarArm;
use crate::Vector;

pub type StateSampler = Box<dyn Fn(&mut ChaCha8Rng) -> (Vector, Vector) + Send + Sync>;

pub struct CatalogueEntry {
    pub name: &'static str,
    pub energy: EnergyRef,
    /// Draws states away from switches and singular points.
    pub sampler: StateSampler,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

fn annulus(rng: &mut ChaCha8Rng, center: [f64; 2], r_lo: f64, r_hi: f64) -> Vector {
    let r = rng.random_range(r_lo..r_hi);
    let a = rng.random_range(0.0..TAU);
    Vector::from_column_slice(&[center[0] + r * a.cos(), center[1] + r * a.sin()])
}

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let m = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

fn entry(name: &'static str, kind: EnergyKind, sampler: StateSampler) -> CatalogueEntry {
    CatalogueEntry {
        name,
        energy: make_builtin_energy(&kind).expect("catalogue parameters are valid"),
        sampler,
    }
}

pub fn catalogue() -> Vec<CatalogueEntry> {
    let plane = |rng: &mut ChaCha8Rng| (uniform(rng, 2, -3.0, 3.0), uniform(rng, 2, -2.0, 2.0));
    let mut out = vec![
        entry("euclidean", EnergyKind::Euclidean { dim: 2, lambda: 1.0 }, Box::new(plane)),
        entry(
            "isotropic",
            EnergyKind::Isotropic { dim: 3, lambda: 0.5 },
            Box::new(|rng| (uniform(rng, 3, -3.0, 3.0), uniform(rng, 3, -2.0, 2.0))),
        ),
        entry(
            "barrier_scaled",
            EnergyKind::BarrierScaled { lambda: 0.25 },
            Box::new(|rng| {
                let x = Vector::from_element(1, rng.random_range(0.05..5.0));
                (x, Vector::from_element(1, signed(rng, 0.1, 2.0)))
            }),
        ),
        entry(
            "chomp_like",
            EnergyKind::ChompLike { center: vec![0.0, 0.0], radius: 1.0, k: 0.5 },
            Box::new(|rng| (annulus(rng, [0.0, 0.0], 1.3, 4.0), uniform(rng, 2, -2.0, 2.0))),
        ),
        entry(
            "directional",
            EnergyKind::Directional { center: vec![0.0, 0.0], radius: 1.0 },
            Box::new(|rng| (annulus(rng, [0.0, 0.0], 1.3, 4.0), uniform(rng, 2, -2.0, 2.0))),
        ),
        entry(
            "radial_switch",
            EnergyKind::RadialSwitch { center: vec![0.0, 0.0], m_hi: 1.0, m_lo: 0.0, alpha_s: 25.0, radius: 5.0 },
            Box::new(|rng| (annulus(rng, [0.0, 0.0], 0.1, 8.0), uniform(rng, 2, -2.0, 2.0))),
        ),
        entry(
            "vortex_zone",
            EnergyKind::VortexZone { center: vec![0.5, -0.5], radius: 1.0, mass: 1.0 },
            Box::new(|rng| {
                let inside = rng.random_bool(0.8);
                let (lo, hi) = if inside { (0.1, 0.95) } else { (1.05, 2.0) };
                (annulus(rng, [0.5, -0.5], lo, hi), uniform(rng, 2, -2.0, 2.0))
            }),
        ),
        entry(
            "priority_radial",
            EnergyKind::PriorityRadial { dim: 2, m_hi: 2.0, m_lo: 0.3, alpha_m: 0.75 },
            Box::new(plane),
        ),
        entry(
            "floor_lift",
            EnergyKind::FloorLift { lambda: 1.0, sigma: 0.3, floor: 0.0 },
            Box::new(|rng| {
                let x = Vector::from_column_slice(&[rng.random_range(-3.0..3.0), rng.random_range(-0.5..3.0)]);
                (x, uniform(rng, 2, -2.0, 2.0))
            }),
        ),
        entry(
            "horizontal_gaussian",
            EnergyKind::HorizontalGaussian { lambda: 1.0, sigma: 0.5, goal_x: 1.2 },
            Box::new(plane),
        ),
    ];

    let arm: Arc<PlanarArm> = Arc::new(PlanarArm::default());
    let ee_energy = make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).expect("valid");
    let arm_sampler = |rng: &mut ChaCha8Rng| (uniform(rng, 3, -3.0, 3.0), uniform(rng, 3, -2.0, 2.0));
    out.push(CatalogueEntry {
        name: "arm_pullback",
        energy: Arc::new(PulledBackEnergy::new(arm.clone(), ee_energy).expect("dimensions agree")),
        sampler: Box::new(arm_sampler),
    });
    let parts: Vec<EnergyRef> = vec![
        make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).expect("valid"),
        make_builtin_energy(&EnergyKind::ChompLike { center: vec![0.0, 0.0], radius: 1.0, k: 0.5 }).expect("valid"),
        make_builtin_energy(&EnergyKind::VortexZone { center: vec![2.0, 0.0], radius: 1.0, mass: 1.0 }).expect("valid"),
    ];
    out.push(CatalogueEntry {
        name: "sum",
        energy: Arc::new(EnergySum::new(2, parts).expect("dimensions agree")),
        sampler: Box::new(|rng| {
            let mut x = annulus(rng, [0.0, 0.0], 1.3, 4.0);
            while ((x[0] - 2.0).hypot(x[1]) - 1.0).abs() < 0.05 {
                x = annulus(rng, [0.0, 0.0], 1.3, 4.0);
            }
            (x, uniform(rng, 2, -2.0, 2.0))
        }),
    });
    out
}

