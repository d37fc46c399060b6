//! Randomized invariants of the spec algebra, energies and generators.

use std::sync::Arc;

use approx::assert_relative_eq;
use fabric::energization::{energize, projector_from_metric};
use fabric::energy::{make_builtin_energy, EnergyKind, EnergySpec};
use fabric::geometry::{make_builtin_geometry, GeometryKind};
use fabric::kinematics::{PlanarArm, PolarMap};
use fabric::spec::{pullback, spec_sum, Spec, SpecRef};
use fabric::taskmap::{check_map_derivatives, TaskMap};
use fabric::{Matrix, Vector};
use proptest::prelude::*;

fn v2() -> impl Strategy<Value = Vector> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| Vector::from_column_slice(&[a, b]))
}

fn velocity() -> impl Strategy<Value = Vector> {
    (-2.0..2.0f64, -2.0..2.0f64)
        .prop_filter("non-zero", |(a, b)| a.hypot(*b) > 1e-3)
        .prop_map(|(a, b)| Vector::from_column_slice(&[a, b]))
}

fn spd(n: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(-1.0..1.0f64, n * n).prop_map(move |e| {
        let a = Matrix::from_vec(n, n, e);
        &a * a.transpose() + Matrix::identity(n, n) * 0.1
    })
}

proptest! {
    #[test]
    fn projector_is_idempotent_and_workless(m in spd(3), xd in proptest::collection::vec(-2.0..2.0f64, 3), r in proptest::collection::vec(-2.0..2.0f64, 3)) {
        let xd = Vector::from_vec(xd);
        prop_assume!(xd.norm() > 1e-3);
        let r = Vector::from_vec(r);
        let p = projector_from_metric(&m, &xd).unwrap();
        prop_assert!((&p * &p - &p).norm() < 1e-10);
        prop_assert!(xd.dot(&(&p * r)).abs() < 1e-10);
    }

    #[test]
    fn spec_sum_is_commutative(x in v2(), xd in velocity()) {
        let a: SpecRef = Arc::new(EnergySpec(make_builtin_energy(&EnergyKind::PriorityRadial { dim: 2, m_hi: 2.0, m_lo: 0.3, alpha_m: 0.75 }).unwrap()));
        let b: SpecRef = Arc::new(EnergySpec(make_builtin_energy(&EnergyKind::HorizontalGaussian { lambda: 1.0, sigma: 0.5, goal_x: 1.2 }).unwrap()));
        let ab = spec_sum(a.clone(), b.clone()).unwrap().eval(&x, &xd).unwrap();
        let ba = spec_sum(b, a).unwrap().eval(&x, &xd).unwrap();
        prop_assert!((&ab.metric - &ba.metric).amax() <= 1e-12 * ab.metric.amax());
        prop_assert!((&ab.force - &ba.force).amax() <= 1e-12 * ab.force.amax().max(1e-300));
    }

    #[test]
    fn generators_are_hd2(x in v2(), xd in velocity(), a in 0.1..5.0f64) {
        for kind in [
            GeometryKind::Vortex { strength: 2.0, clockwise: true },
            GeometryKind::Attract { target: vec![1.0, 2.0] },
            GeometryKind::Lift { normal: vec![0.0, 1.0] },
        ] {
            let h = make_builtin_geometry(&kind).unwrap();
            let h1 = h.h2(&x, &xd).unwrap() * (a * a);
            let ha = h.h2(&x, &(&xd * a)).unwrap();
            prop_assert!((&ha - &h1).amax() <= 1e-8 * h1.amax().max(1e-300));
        }
    }

    #[test]
    fn energized_generator_conserves_energy(x in v2(), xd in velocity()) {
        prop_assume!(x.norm() > 1.3);
        let e = make_builtin_energy(&EnergyKind::ChompLike { center: vec![0.0, 0.0], radius: 1.0, k: 0.5 }).unwrap();
        let h = make_builtin_geometry(&GeometryKind::Vortex { strength: 1.5, clockwise: false }).unwrap();
        let sys = energize(e.clone(), h).unwrap();
        let a = sys.acceleration(&x, &xd).unwrap();
        let rate = fabric::energy::hamiltonian_rate(&*e, &x, &xd, &a).unwrap();
        prop_assert!(rate.abs() < 1e-10 * (1.0 + e.hamiltonian(&x, &xd).unwrap()));
    }

    #[test]
    fn arm_derivatives_match_differences(q in proptest::collection::vec(-3.0..3.0f64, 3), qd in proptest::collection::vec(-2.0..2.0f64, 3)) {
        let arm = PlanarArm::default();
        let c = check_map_derivatives(&arm, &Vector::from_vec(q), &Vector::from_vec(qd)).unwrap();
        prop_assert!(c.within(1e-5, 1e-4), "{c:?}");
    }
}

#[test]
fn polar_pullback_of_euclidean_is_the_polar_metric() {
    let leaf: SpecRef = Arc::new(EnergySpec(make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).unwrap()));
    let p = pullback(Arc::new(PolarMap), leaf).unwrap();
    let (r, rd, thd) = (2.0, 0.3, -0.4);
    let t = p.eval(&Vector::from_column_slice(&[r, 0.7]), &Vector::from_column_slice(&[rd, thd])).unwrap();
    assert_relative_eq!(t.metric[(0, 0)], 1.0, epsilon = 1e-12);
    assert_relative_eq!(t.metric[(1, 1)], r * r, epsilon = 1e-12);
    assert_relative_eq!(t.metric[(0, 1)], 0.0, epsilon = 1e-12);
    // Geodesic terms of ds² = dr² + r²dθ²: f = (−r θ̇², 2 r ṙ θ̇).
    assert_relative_eq!(t.force[0], -r * thd * thd, epsilon = 1e-12);
    assert_relative_eq!(t.force[1], 2.0 * r * rd * thd, epsilon = 1e-12);
    assert_eq!(PolarMap.domain_dim(), 2);
}
