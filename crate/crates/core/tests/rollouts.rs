//! Integrator order, determinism and the layered fabric structure.

use std::sync::Arc;

use fabric::energy::{make_builtin_energy, EnergyKind, EnergySpec};
use fabric::forcing::{
    speed_controlled_step, DampingParams, ForcingPotential, PotentialParams, SpeedController,
};
use fabric::geometry::{combine_weighted, make_builtin_geometry, GeometryKind, WeightedGeometry};
use fabric::kinematics::DistanceMap1D;
use fabric::sim::{integrate, rk4_rollout, FnDynamics, RolloutOptions};
use fabric::spec::{to_canonical, Spec, TransformTree};
use fabric::taskmap::{IdentityMap, MapRef};
use fabric::Vector;

fn v(a: &[f64]) -> Vector {
    Vector::from_column_slice(a)
}

fn oscillator_error(dt: f64) -> f64 {
    let r = rk4_rollout(|q, _, _| Ok(-q), &v(&[1.0]), &v(&[0.0]), dt, 2.0).unwrap();
    (r.final_position()[0] - 2.0f64.cos()).abs()
}

#[test]
fn rk4_is_fourth_order() {
    let ratio = oscillator_error(0.02) / oscillator_error(0.01);
    assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
}

#[test]
fn rollouts_are_deterministic() {
    let e = make_builtin_energy(&EnergyKind::ChompLike { center: vec![0.0, 0.0], radius: 1.0, k: 0.5 }).unwrap();
    let c = to_canonical(Arc::new(EnergySpec(e)), 1e12);
    let run = || rk4_rollout(|q, qd, _| c.acceleration(q, qd), &v(&[-3.0, 0.2]), &v(&[1.0, 0.0]), 0.01, 3.0).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.positions, b.positions);
    assert_eq!(a.velocities, b.velocities);
}

#[test]
fn conservative_flow_keeps_its_energy() {
    let e = make_builtin_energy(&EnergyKind::ChompLike { center: vec![0.0, 0.0], radius: 1.0, k: 0.5 }).unwrap();
    let c = to_canonical(Arc::new(EnergySpec(e.clone())), 1e12);
    let r = rk4_rollout(|q, qd, _| c.acceleration(q, qd), &v(&[-3.0, 1.5]), &v(&[1.0, 0.0]), 0.01, 4.0).unwrap();
    let h = |k: usize| e.hamiltonian(&v(&r.positions[k]), &v(&r.velocities[k])).unwrap();
    let h0 = h(0);
    assert!((0..r.len()).all(|k| (h(k) - h0).abs() < 1e-6 * h0));
}

fn layered() -> fabric::geometry::Fabric {
    let root: MapRef = Arc::new(IdentityMap::new(2));
    let base = WeightedGeometry::new(
        make_builtin_geometry(&GeometryKind::ZeroBaseline { dim: 2 }).unwrap(),
        make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).unwrap(),
    )
    .unwrap();
    let mut parts = vec![(root, base)];
    let barrier = GeometryKind::PotentialGradient {
        lambda: 0.25,
        potential: fabric::geometry::PotentialKind::Barrier1d { alpha1: 0.4, alpha2: 0.2, alpha3: 20.0, alpha4: 5.0 },
    };
    for m in DistanceMap1D::box_limits(&[-4.0, -4.0], &[4.0, 4.0]).unwrap() {
        let wg = WeightedGeometry::new(
            make_builtin_geometry(&barrier).unwrap(),
            make_builtin_energy(&EnergyKind::BarrierScaled { lambda: 0.25 }).unwrap(),
        )
        .unwrap();
        parts.push((Arc::new(m) as MapRef, wg));
    }
    combine_weighted(parts, 2).unwrap()
}

#[test]
fn layered_fabric_equals_its_transform_tree() {
    let f = layered();
    let mut tree = TransformTree::new(2);
    for (m, wg) in f.components() {
        tree.add_leaf(m.clone(), Arc::new(wg.induced_spec())).unwrap();
    }
    let s = tree.resolve().unwrap();
    for (q, qd) in [([0.5, -1.0], [1.0, -0.3]), ([3.5, 3.0], [-0.2, 0.8]), ([-3.9, 0.0], [-1.0, 0.1])] {
        let (q, qd) = (v(&q), v(&qd));
        let a = s.eval(&q, &qd).unwrap();
        let b = f.eval(&q, &qd).unwrap();
        assert!((&a.metric - &b.metric).amax() <= 1e-12 * b.metric.amax());
        assert!((&a.force - &b.force).amax() <= 1e-12 * b.force.amax().max(1e-300));
    }
}

#[test]
fn forced_fabric_keeps_damping_floor_and_converges() {
    let target = v(&[-2.5, -3.75]);
    let p = ForcingPotential::toward(
        &target,
        PotentialParams { k: 10.0, alpha_psi: 10.0, m_hi: 2.0, m_lo: 0.3, alpha_m: 0.75 },
    )
    .unwrap();
    let fabric = layered();
    let ctl = SpeedController {
        execution_energy: Some(make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).unwrap()),
        target_level: 2.0,
        alpha_eta: 10.0,
        alpha_shift: 0.0,
        eta_override: None,
        damping: DampingParams { b: 6.5, b_min: 0.01, alpha_beta: 0.5, radius: 1.5 },
    };
    let dynamics = FnDynamics::new(2, |q: &Vector, qd: &Vector, _| {
        let r = speed_controlled_step(&fabric, Some(&p), &ctl, q, qd)?;
        assert!(r.diagnostics.beta >= 0.01);
        Ok(r.acceleration)
    });
    let opts = RolloutOptions { dt: 0.01, horizon: 16.0, convergence: None, seed: 0 };
    let r = integrate(&dynamics, "forced", &v(&[2.0, 2.0]), &v(&[0.0, 1.0]), &opts).unwrap();
    assert!((r.final_position() - &target).norm() < 0.1);
    assert!(r.final_velocity().norm() < 1e-3);
}
