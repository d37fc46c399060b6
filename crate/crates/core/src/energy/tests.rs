use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::{FabricError, Matrix};

fn v(a: &[f64]) -> Vector {
    Vector::from_row_slice(a)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-5_f64.max(1e-4 * b.abs())
}

#[test]
fn euclidean_example() {
    let e = make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).unwrap();
    let (x, xd) = (v(&[4.0, -1.0]), v(&[1.0, 0.0]));
    assert_eq!(e.value(&x, &xd).unwrap(), 0.5);
    let t = e.el_terms(&x, &xd).unwrap();
    assert_eq!(t.metric, Matrix::identity(2, 2));
    assert_eq!(t.force, Vector::zeros(2));
    let o = el_terms_fd_oracle(&*e, &x, &xd).unwrap();
    assert!((o.metric - Matrix::identity(2, 2)).amax() < 1e-6);
    assert!(o.force.amax() < 1e-6);
}

#[test]
fn barrier_scaled_example() {
    let e = make_builtin_energy(&EnergyKind::BarrierScaled { lambda: 0.25 }).unwrap();
    let t = e.el_terms(&v(&[0.5]), &v(&[-1.0])).unwrap();
    assert!((t.metric[(0, 0)] - 0.5).abs() < 1e-15);
    let away = e.el_terms(&v(&[0.5]), &v(&[1.0])).unwrap();
    assert_eq!(away.metric[(0, 0)], 0.0);
    assert!(matches!(e.value(&v(&[0.0]), &v(&[-1.0])), Err(FabricError::BoundaryViolation { .. })));
}

#[test]
fn attractor_metric_vanishes_far_away() {
    let e = make_builtin_energy(&EnergyKind::RadialSwitch {
        center: vec![0.0, 0.0],
        m_hi: 1.0,
        m_lo: 0.0,
        alpha_s: 25.0,
        radius: 5.0,
    })
    .unwrap();
    let far = e.el_terms(&v(&[8.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
    assert!(far.metric.amax() < 1e-30);
    let near = e.el_terms(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
    assert!((near.metric[(0, 0)] - 2.0).abs() < 1e-12);
}

#[test]
fn energy_system_conserves_hamiltonian() {
    for entry in catalogue() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (x, xd) = (entry.sampler)(&mut rng);
            let t = entry.energy.el_terms(&x, &xd).unwrap();
            let Ok(xdd) = crate::linalg::solve_symmetric(&t.metric, &(-&t.force), 1e12) else {
                continue;
            };
            if xdd.regularized {
                continue;
            }
            let rate = hamiltonian_rate(&*entry.energy, &x, &xd, &xdd.solution).unwrap();
            let scale = 1.0 + xd.dot(&t.force).abs() + (&t.metric * &xd).norm() * xdd.solution.norm();
            assert!(rate.abs() < 1e-12 * scale, "{}: {rate}", entry.name);
        }
    }
}

#[test]
fn damped_rate_is_negative_quadratic() {
    let e = make_builtin_energy(&EnergyKind::ChompLike { center: vec![0.0, 0.0], radius: 1.0, k: 0.5 }).unwrap();
    let (x, xd) = (v(&[2.0, 0.5]), v(&[0.3, -0.7]));
    let b = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
    let t = e.el_terms(&x, &xd).unwrap();
    let xdd = t.metric.clone().lu().solve(&(-(&t.force + &b * &xd))).unwrap();
    let rate = hamiltonian_rate(&*e, &x, &xd, &xdd).unwrap();
    let expect = -xd.dot(&(&b * &xd));
    assert!((rate - expect).abs() < 1e-12 * (1.0 + expect.abs()));
    assert_eq!(hamiltonian_rate(&*e, &x, &Vector::zeros(2), &xdd).unwrap(), 0.0);
}

#[test]
fn analytic_terms_match_oracle() {
    for entry in catalogue() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (x, xd) = (entry.sampler)(&mut rng);
            let a = entry.energy.el_terms(&x, &xd).unwrap();
            let o = el_terms_fd_oracle(&*entry.energy, &x, &xd).unwrap();
            for (p, q) in a.metric.iter().zip(o.metric.iter()).chain(a.force.iter().zip(o.force.iter())) {
                assert!(close(*p, *q), "{} at {x} {xd}: analytic {p} vs oracle {q}", entry.name);
            }
            let m = entry.energy.momentum(&x, &xd).unwrap();
            let mo = fd_momentum(&*entry.energy, &x, &xd).unwrap();
            assert!((m - &mo).amax() < 1e-5 * (1.0 + mo.amax()), "{} momentum", entry.name);
        }
    }
}

#[test]
fn finsler_energies_are_homogeneous() {
    for entry in catalogue() {
        let Some(f) = entry.energy.as_finsler() else {
            continue;
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (x, xd) = (entry.sampler)(&mut rng);
            let l = f.value(&x, &xd).unwrap();
            let h = f.hamiltonian(&x, &xd).unwrap();
            assert!((h - l).abs() <= 1e-8 * l.abs().max(1e-12), "{}: H {h} vs L {l}", entry.name);
            let m = f.el_terms(&x, &xd).unwrap().metric;
            for a in [0.5, 2.0, 3.7] {
                let la = f.value(&x, &(&xd * a)).unwrap();
                assert!((la - a * a * l).abs() <= 1e-8 * (a * a * l).abs().max(1e-12), "{}", entry.name);
                let ma = f.el_terms(&x, &(&xd * a)).unwrap().metric;
                assert!((&ma - &m).amax() <= 1e-8 * m.amax().max(1e-12), "{}", entry.name);
                let lg = f.structure_value(&x, &(&xd * a)).unwrap();
                assert!((lg - a * f.structure_value(&x, &xd).unwrap()).abs() <= 1e-8 * lg.max(1e-12));
            }
        }
    }
}

#[test]
fn pulled_back_energy_matches_leaf_value() {
    let map: crate::taskmap::MapRef = std::sync::Arc::new(crate::kinematics::CartesianToPolar);
    let leaf = make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).unwrap();
    let e = PulledBackEnergy::new(map.clone(), leaf.clone()).unwrap();
    let (q, qd) = (v(&[1.0, 1.0]), v(&[0.5, -0.2]));
    let ev = map.evaluate(&q, &qd).unwrap();
    assert_eq!(e.value(&q, &qd).unwrap(), leaf.value(&ev.x, &ev.xd).unwrap());
}

#[test]
fn sum_rejects_mismatched_parts() {
    let a = make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).unwrap();
    let b = make_builtin_energy(&EnergyKind::Euclidean { dim: 3, lambda: 1.0 }).unwrap();
    assert!(matches!(EnergySum::new(2, vec![a, b]), Err(FabricError::DimensionMismatch { .. })));
}

#[test]
fn invalid_parameters_are_rejected() {
    for kind in [
        EnergyKind::Euclidean { dim: 0, lambda: 1.0 },
        EnergyKind::BarrierScaled { lambda: -1.0 },
        EnergyKind::ChompLike { center: vec![], radius: 1.0, k: 1.0 },
        EnergyKind::RadialSwitch { center: vec![0.0], m_hi: 1.0, m_lo: 2.0, alpha_s: 1.0, radius: 1.0 },
    ] {
        assert!(matches!(make_builtin_energy(&kind), Err(FabricError::InvalidParameter(_))), "{kind:?}");
    }
}
