//! Energy projectors and the energization transform.
//!
//! Energizing `ẍ + h = 0` against an energy `L_e` adds the along-velocity term
//! `α ẋ` that makes the result conserve `H_e`:
//! `ẍ = −h − αẋ` with `α = −ẋᵀ(M_e h − f_e) / ẋᵀM_eẋ`.

use crate::energy::{EnergyLagrangian, EnergyRef};
use crate::error::{check_dim, check_state};
use crate::geometry::{Geometry, GeometryRef};
use crate::linalg::{condition_number, solve_symmetric, symmetrize, DEFAULT_COND_CAP};
use crate::spec::{Spec, SpecTerms};
use crate::taskmap::TaskMap;
use crate::{FabricError, Matrix, Result, State, Vector};

/// Below this speed `α` is defined as 0.
pub const VELOCITY_FLOOR: f64 = 1e-9;

/// `P_e = M_e R_pe` with `R_pe = M_e⁻¹ − ẋẋᵀ/(ẋᵀM_eẋ)`, expanded as
/// `I − M_eẋẋᵀ/(ẋᵀM_eẋ)`.
pub fn projector_from_metric(metric: &Matrix, xd: &Vector) -> Result<Matrix> {
    let n = xd.len();
    check_dim("energy projector", n, metric.nrows())?;
    if xd.norm() == 0.0 {
        return Err(FabricError::ZeroVelocity("energy projector"));
    }
    let mv = metric * xd;
    let c = xd.dot(&mv);
    if !(c > 0.0) {
        return Err(FabricError::RankDeficient {
            state: State::position_only(xd),
        });
    }
    Ok(Matrix::identity(n, n) - mv * xd.transpose() / c)
}

pub fn projector_pe(energy: &dyn EnergyLagrangian, x: &Vector, xd: &Vector) -> Result<Matrix> {
    if xd.norm() == 0.0 {
        return Err(FabricError::ZeroVelocity("energy projector"));
    }
    let t = energy.el_terms(x, xd)?;
    projector_from_metric(&t.metric, xd).map_err(|e| match e {
        FabricError::RankDeficient { .. } => FabricError::RankDeficient {
            state: State::new(x, xd),
        },
        other => other,
    })
}

/// `α = −ẋᵀ(M h − f)/(ẋᵀMẋ)`, zero below the velocity floor.
pub fn energization_alpha(metric: &Matrix, force: &Vector, h: &Vector, xd: &Vector) -> Result<f64> {
    if xd.norm() < VELOCITY_FLOOR {
        return Ok(0.0);
    }
    let c = xd.dot(&(metric * xd));
    if !(c > 0.0) {
        return Err(FabricError::RankDeficient {
            state: State::position_only(xd),
        });
    }
    Ok(-xd.dot(&(metric * h - force)) / c)
}

/// `ẍ + h = 0` energized against `energy`.
#[derive(Clone)]
pub struct EnergizedSystem {
    energy: EnergyRef,
    base: GeometryRef,
    cond_cap: f64,
}

impl EnergizedSystem {
    pub fn energy(&self) -> &EnergyRef {
        &self.energy
    }

    pub fn base(&self) -> &GeometryRef {
        &self.base
    }

    pub fn alpha(&self, x: &Vector, xd: &Vector) -> Result<f64> {
        let t = self.energy.el_terms(x, xd)?;
        energization_alpha(&t.metric, &t.force, &self.base.h2(x, xd)?, xd)
    }

    /// `ẍ = −h − αẋ`.
    pub fn acceleration(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        let h = self.base.h2(x, xd)?;
        let t = self.energy.el_terms(x, xd)?;
        let a = energization_alpha(&t.metric, &t.force, &h, xd)?;
        Ok(-h - xd * a)
    }

    /// Zero-work form `(M_e, f_e + P_e(M_e h − f_e))`.
    pub fn zero_work_terms(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms> {
        let h = self.base.h2(x, xd)?;
        let t = self.energy.el_terms(x, xd)?;
        let mh = &t.metric * &h;
        if xd.norm() < VELOCITY_FLOOR {
            return Ok(SpecTerms { metric: t.metric, force: mh });
        }
        let p = projector_from_metric(&t.metric, xd)?;
        let force = &t.force + p * (mh - &t.force);
        Ok(SpecTerms { metric: t.metric, force })
    }

    /// Acceleration of the zero-work form, `−M_e⁻¹(f_e + P_e(M_e h − f_e))`.
    pub fn zero_work_acceleration(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        let t = self.zero_work_terms(x, xd)?;
        Ok(-solve_symmetric(&t.metric, &t.force, self.cond_cap)?.solution)
    }

    /// The energized system as a field `h + αẋ`.
    pub fn as_geometry(&self) -> EnergizedGeometry {
        EnergizedGeometry(self.clone())
    }
}

impl Spec for EnergizedSystem {
    fn dim(&self) -> usize {
        self.energy.dim()
    }
    fn eval(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms> {
        self.zero_work_terms(x, xd)
    }
}

#[derive(Clone)]
pub struct EnergizedGeometry(EnergizedSystem);

impl Geometry for EnergizedGeometry {
    fn dim(&self) -> usize {
        self.0.energy.dim()
    }
    fn h2(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        Ok(-self.0.acceleration(x, xd)?)
    }
}

pub fn energize(energy: EnergyRef, h: GeometryRef) -> Result<EnergizedSystem> {
    check_dim("energize", energy.dim(), h.dim())?;
    Ok(EnergizedSystem {
        energy,
        base: h,
        cond_cap: DEFAULT_COND_CAP,
    })
}

#[derive(Debug, Clone, Default)]
pub struct CommutationReport {
    /// `max ‖a − b‖` over the full-rank states.
    pub max_deviation: f64,
    /// `max ‖a − b‖ / (1 + ‖a‖)`.
    pub max_relative: f64,
    pub checked: usize,
    pub rank_deficient: Vec<State>,
}

impl CommutationReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.rank_deficient.is_empty() && self.max_relative < tol
    }
}

/// Root acceleration by route (a): energize in the leaf, then pull back.
pub fn energize_then_pullback(
    energy: &dyn EnergyLagrangian,
    h: &dyn Geometry,
    map: &dyn TaskMap,
    q: &Vector,
    qd: &Vector,
    cond_cap: f64,
) -> Result<Vector> {
    let ev = map.evaluate(q, qd)?;
    let t = energy.el_terms(&ev.x, &ev.xd)?;
    let hx = h.h2(&ev.x, &ev.xd)?;
    let alpha = energization_alpha(&t.metric, &t.force, &hx, &ev.xd)?;
    let jt = ev.jacobian.transpose();
    let metric = &jt * &t.metric * &ev.jacobian;
    let force = jt * (&t.metric * (hx + &ev.xd * alpha + &ev.curvature));
    Ok(-solve_symmetric(&metric, &force, cond_cap)?.solution)
}

/// Root acceleration by route (b): metric-weighted pullback of the geometry,
/// then energization with the pulled-back energy.
pub fn pullback_then_energize(
    energy: &dyn EnergyLagrangian,
    h: &dyn Geometry,
    map: &dyn TaskMap,
    q: &Vector,
    qd: &Vector,
    cond_cap: f64,
) -> Result<Vector> {
    let ev = map.evaluate(q, qd)?;
    let t = energy.el_terms(&ev.x, &ev.xd)?;
    let hx = h.h2(&ev.x, &ev.xd)?;
    let jt = ev.jacobian.transpose();
    let m_curv = &t.metric * &ev.curvature;
    let metric = &jt * &t.metric * &ev.jacobian;
    let h_root = solve_symmetric(&metric, &(&jt * (&t.metric * hx + &m_curv)), cond_cap)?.solution;
    let f_root = jt * (t.force + m_curv);
    let alpha = energization_alpha(&metric, &f_root, &h_root, qd)?;
    Ok(-h_root - qd * alpha)
}

/// Compares the two routes over `states`, reporting states whose pulled-back
/// metric is rank deficient instead of skipping them.
pub fn commutation_check(
    energy: &dyn EnergyLagrangian,
    h: &dyn Geometry,
    map: &dyn TaskMap,
    states: &[(Vector, Vector)],
) -> Result<CommutationReport> {
    check_dim("commutation check", map.codomain_dim(), energy.dim())?;
    check_dim("commutation check", map.codomain_dim(), h.dim())?;
    let cap = DEFAULT_COND_CAP;
    let mut report = CommutationReport::default();
    for (q, qd) in states {
        check_state("commutation check", map.domain_dim(), q, qd)?;
        let ev = map.evaluate(q, qd)?;
        let t = energy.el_terms(&ev.x, &ev.xd)?;
        let metric = ev.jacobian.transpose() * &t.metric * &ev.jacobian;
        let (sym, _) = symmetrize(&metric);
        let eig_min = nalgebra::SymmetricEigen::new(sym.clone()).eigenvalues.min();
        if !(eig_min > 0.0) || condition_number(&sym) > cap {
            report.rank_deficient.push(State::new(q, qd));
            continue;
        }
        let a = energize_then_pullback(energy, h, map, q, qd, cap)?;
        let b = pullback_then_energize(energy, h, map, q, qd, cap)?;
        let dev = (&a - &b).norm();
        report.max_deviation = report.max_deviation.max(dev);
        report.max_relative = report.max_relative.max(dev / (1.0 + a.norm()));
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{make_builtin_energy, EnergyKind};
    use crate::geometry::FnGeometry;
    use crate::taskmap::IdentityMap;
    use std::sync::Arc;

    fn v(a: &[f64]) -> Vector {
        Vector::from_row_slice(a)
    }

    fn euclid() -> EnergyRef {
        make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).unwrap()
    }

    #[test]
    fn euclidean_projector_example() {
        let p = projector_pe(&*euclid(), &v(&[0.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert_eq!(p, Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        assert!(matches!(
            projector_pe(&*euclid(), &v(&[0.0, 0.0]), &v(&[0.0, 0.0])),
            Err(FabricError::ZeroVelocity(_))
        ));
    }

    #[test]
    fn orthogonal_h_needs_no_energization() {
        let h: GeometryRef = Arc::new(FnGeometry::new(2, |_, xd| v(&[-xd[1], xd[0]])));
        let sys = energize(euclid(), h.clone()).unwrap();
        let (x, xd) = (v(&[0.4, 0.1]), v(&[1.0, 2.0]));
        assert_eq!(sys.alpha(&x, &xd).unwrap(), 0.0);
        assert_eq!(sys.acceleration(&x, &xd).unwrap(), -h.h2(&x, &xd).unwrap());
    }

    #[test]
    fn along_velocity_h_is_cancelled() {
        let c = 3.0;
        let h: GeometryRef = Arc::new(FnGeometry::new(2, move |_, xd| xd * c));
        let sys = energize(euclid(), h).unwrap();
        let (x, xd) = (v(&[0.4, 0.1]), v(&[1.0, 2.0]));
        assert!((sys.alpha(&x, &xd).unwrap() + c).abs() < 1e-15);
        assert!(sys.acceleration(&x, &xd).unwrap().norm() < 1e-14);
    }

    #[test]
    fn velocity_floor_gives_zero_alpha() {
        let h: GeometryRef = Arc::new(FnGeometry::new(2, |_, _| v(&[1.0, 1.0])));
        let sys = energize(euclid(), h).unwrap();
        assert_eq!(sys.alpha(&v(&[0.0, 0.0]), &v(&[1e-10, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn identity_map_commutes_exactly() {
        let h: GeometryRef = Arc::new(FnGeometry::new(2, |x, xd| x * xd.norm_squared()));
        let states = vec![(v(&[0.3, -0.2]), v(&[1.0, 0.5])), (v(&[1.3, 2.0]), v(&[-0.1, 0.7]))];
        let r = commutation_check(&*euclid(), &*h, &IdentityMap::new(2), &states).unwrap();
        assert!(r.max_deviation < 1e-12);
        assert_eq!(r.checked, 2);
    }
}
