//! Differentiable task maps `x = φ(q)` with Jacobian `J` and curvature `J̇q̇`.

use std::sync::Arc;

use crate::error::{check_dim, check_state};
use crate::linalg::{is_finite_matrix, is_finite_vector};
use crate::{FabricError, Matrix, Result, State, Vector};

/// Everything a pullback needs from a task map at one state.
#[derive(Debug, Clone)]
pub struct MapEval {
    pub x: Vector,
    pub xd: Vector,
    pub jacobian: Matrix,
    pub curvature: Vector,
}

pub trait TaskMap: Send + Sync {
    fn domain_dim(&self) -> usize;
    fn codomain_dim(&self) -> usize;
    fn map(&self, q: &Vector) -> Result<Vector>;
    fn jacobian(&self, q: &Vector) -> Result<Matrix>;
    /// The term `J̇(q, q̇)·q̇`.
    fn curvature(&self, q: &Vector, qd: &Vector) -> Result<Vector>;

    fn evaluate(&self, q: &Vector, qd: &Vector) -> Result<MapEval> {
        check_state("task map", self.domain_dim(), q, qd)?;
        let x = self.map(q)?;
        let jacobian = self.jacobian(q)?;
        let curvature = self.curvature(q, qd)?;
        let xd = &jacobian * qd;
        if !is_finite_vector(&x) || !is_finite_matrix(&jacobian) || !is_finite_vector(&curvature) {
            return Err(FabricError::NonFinite {
                what: "task map output",
                state: State::new(q, qd),
            });
        }
        Ok(MapEval {
            x,
            xd,
            jacobian,
            curvature,
        })
    }
}

pub type MapRef = Arc<dyn TaskMap>;

#[derive(Debug, Clone, Copy)]
pub struct IdentityMap {
    pub dim: usize,
}

impl IdentityMap {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl TaskMap for IdentityMap {
    fn domain_dim(&self) -> usize {
        self.dim
    }
    fn codomain_dim(&self) -> usize {
        self.dim
    }
    fn map(&self, q: &Vector) -> Result<Vector> {
        check_dim("identity map", self.dim, q.len())?;
        Ok(q.clone())
    }
    fn jacobian(&self, _q: &Vector) -> Result<Matrix> {
        Ok(Matrix::identity(self.dim, self.dim))
    }
    fn curvature(&self, _q: &Vector, _qd: &Vector) -> Result<Vector> {
        Ok(Vector::zeros(self.dim))
    }
}

/// `x = A q + b` with constant `A`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub a: Matrix,
    pub b: Vector,
}

impl AffineMap {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        check_dim("affine map offset", a.nrows(), b.len())?;
        Ok(Self { a, b })
    }

    pub fn linear(a: Matrix) -> Self {
        let b = Vector::zeros(a.nrows());
        Self { a, b }
    }

    /// `x = q − target`.
    pub fn translation(target: &Vector) -> Self {
        let n = target.len();
        Self {
            a: Matrix::identity(n, n),
            b: -target,
        }
    }
}

impl TaskMap for AffineMap {
    fn domain_dim(&self) -> usize {
        self.a.ncols()
    }
    fn codomain_dim(&self) -> usize {
        self.a.nrows()
    }
    fn map(&self, q: &Vector) -> Result<Vector> {
        check_dim("affine map", self.a.ncols(), q.len())?;
        Ok(&self.a * q + &self.b)
    }
    fn jacobian(&self, _q: &Vector) -> Result<Matrix> {
        Ok(self.a.clone())
    }
    fn curvature(&self, _q: &Vector, _qd: &Vector) -> Result<Vector> {
        Ok(Vector::zeros(self.a.nrows()))
    }
}

/// `x = outer(inner(q))`.
#[derive(Clone)]
pub struct ComposedMap {
    inner: MapRef,
    outer: MapRef,
}

impl ComposedMap {
    pub fn new(inner: MapRef, outer: MapRef) -> Result<Self> {
        check_dim("composed map", inner.codomain_dim(), outer.domain_dim())?;
        Ok(Self { inner, outer })
    }
}

impl TaskMap for ComposedMap {
    fn domain_dim(&self) -> usize {
        self.inner.domain_dim()
    }
    fn codomain_dim(&self) -> usize {
        self.outer.codomain_dim()
    }
    fn map(&self, q: &Vector) -> Result<Vector> {
        self.outer.map(&self.inner.map(q)?)
    }
    fn jacobian(&self, q: &Vector) -> Result<Matrix> {
        let y = self.inner.map(q)?;
        Ok(self.outer.jacobian(&y)? * self.inner.jacobian(q)?)
    }
    fn curvature(&self, q: &Vector, qd: &Vector) -> Result<Vector> {
        let y = self.inner.map(q)?;
        let ji = self.inner.jacobian(q)?;
        let yd = &ji * qd;
        let jo = self.outer.jacobian(&y)?;
        Ok(jo * self.inner.curvature(q, qd)? + self.outer.curvature(&y, &yd)?)
    }
}

type MapFn = dyn Fn(&Vector) -> Vector + Send + Sync;

/// Task map defined only by its value; Jacobian and curvature come from
/// central finite differences with step `1e-6·(1+‖q‖)`.
pub struct FiniteDifferenceMap {
    domain: usize,
    codomain: usize,
    f: Box<MapFn>,
}

impl FiniteDifferenceMap {
    pub fn new(
        domain: usize,
        codomain: usize,
        f: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            domain,
            codomain,
            f: Box::new(f),
        }
    }
}

impl TaskMap for FiniteDifferenceMap {
    fn domain_dim(&self) -> usize {
        self.domain
    }
    fn codomain_dim(&self) -> usize {
        self.codomain
    }
    fn map(&self, q: &Vector) -> Result<Vector> {
        check_dim("finite-difference map", self.domain, q.len())?;
        let x = (self.f)(q);
        check_dim("finite-difference map output", self.codomain, x.len())?;
        Ok(x)
    }
    fn jacobian(&self, q: &Vector) -> Result<Matrix> {
        check_dim("finite-difference map", self.domain, q.len())?;
        Ok(fd_jacobian(&*self.f, q, 1e-6 * (1.0 + q.norm())))
    }
    fn curvature(&self, q: &Vector, qd: &Vector) -> Result<Vector> {
        check_state("finite-difference map", self.domain, q, qd)?;
        Ok(fd_curvature(&*self.f, q, qd))
    }
}

/// Central-difference Jacobian of `f` at `q` with step `h`.
pub fn fd_jacobian(f: &dyn Fn(&Vector) -> Vector, q: &Vector, h: f64) -> Matrix {
    let n = q.len();
    let f0 = f(q);
    let mut jac = Matrix::zeros(f0.len(), n);
    for j in 0..n {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[j] += h;
        qm[j] -= h;
        jac.set_column(j, &((f(&qp) - f(&qm)) / (2.0 * h)));
    }
    jac
}

/// `J̇q̇ = d²/ds² φ(q + s q̇)` at `s = 0`, by a central second difference.
pub fn fd_curvature(f: &dyn Fn(&Vector) -> Vector, q: &Vector, qd: &Vector) -> Vector {
    let speed = qd.norm();
    if speed == 0.0 {
        return Vector::zeros(f(q).len());
    }
    let s = 1e-4 * (1.0 + q.norm()) / speed;
    let fp = f(&(q + qd * s));
    let fm = f(&(q - qd * s));
    (fp - f(q) * 2.0 + fm) / (s * s)
}

/// Largest deviation of a map's analytic Jacobian and curvature from finite
/// differences, each measured in the `max(abs, rel)` sense used by tests.
#[derive(Debug, Clone, Copy)]
pub struct MapCheck {
    pub jacobian_error: f64,
    pub jacobian_scale: f64,
    pub curvature_error: f64,
    pub curvature_scale: f64,
}

impl MapCheck {
    /// True when both deviations are within `max(abs, rel·scale)`.
    pub fn within(&self, abs: f64, rel: f64) -> bool {
        self.jacobian_error <= abs.max(rel * self.jacobian_scale)
            && self.curvature_error <= abs.max(rel * self.curvature_scale)
    }
}

/// Compares `map.jacobian` against differences of `map.map`, and
/// `map.curvature` against differences of `map.jacobian` along `q̇`.
pub fn check_map_derivatives(map: &dyn TaskMap, q: &Vector, qd: &Vector) -> Result<MapCheck> {
    let h = 1e-6 * (1.0 + q.norm());
    let jac = map.jacobian(q)?;
    let mut fd_jac = Matrix::zeros(jac.nrows(), jac.ncols());
    for j in 0..q.len() {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[j] += h;
        qm[j] -= h;
        fd_jac.set_column(j, &((map.map(&qp)? - map.map(&qm)?) / (2.0 * h)));
    }
    let curv = map.curvature(q, qd)?;
    let speed = qd.norm();
    let fd_curv = if speed == 0.0 {
        Vector::zeros(curv.len())
    } else {
        let s = h / speed;
        (map.jacobian(&(q + qd * s))? - map.jacobian(&(q - qd * s))?) / (2.0 * s) * qd
    };
    Ok(MapCheck {
        jacobian_error: (&jac - &fd_jac).abs().max(),
        jacobian_scale: jac.abs().max(),
        curvature_error: (&curv - &fd_curv).abs().max(),
        curvature_scale: curv.abs().max(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy() -> FiniteDifferenceMap {
        FiniteDifferenceMap::new(2, 2, |q| {
            Vector::from_vec(vec![q[0].sin() * q[1], q[0] * q[0] + q[1].cos()])
        })
    }

    #[test]
    fn affine_translation() {
        let m = AffineMap::translation(&Vector::from_vec(vec![1.0, -2.0]));
        assert_eq!(m.map(&Vector::from_vec(vec![0.0, 0.0])).unwrap(), Vector::from_vec(vec![-1.0, 2.0]));
        assert_eq!(m.curvature(&Vector::zeros(2), &Vector::from_vec(vec![1.0, 1.0])).unwrap(), Vector::zeros(2));
    }

    #[test]
    fn finite_difference_map_matches_analytic_derivatives() {
        let m = wavy();
        let q = Vector::from_vec(vec![0.3, -0.7]);
        let qd = Vector::from_vec(vec![1.1, 0.4]);
        let jac = m.jacobian(&q).unwrap();
        let exact = Matrix::from_row_slice(2, 2, &[q[0].cos() * q[1], q[0].sin(), 2.0 * q[0], -q[1].sin()]);
        assert!((jac - exact).abs().max() < 1e-8);
        let curv = m.curvature(&q, &qd).unwrap();
        let exact_curv = Vector::from_vec(vec![
            -q[0].sin() * q[1] * qd[0] * qd[0] + 2.0 * q[0].cos() * qd[0] * qd[1],
            2.0 * qd[0] * qd[0] - q[1].cos() * qd[1] * qd[1],
        ]);
        assert!((curv - exact_curv).abs().max() < 1e-5);
    }

    #[test]
    fn composed_map_chain_rule() {
        let inner: MapRef = Arc::new(wavy());
        let outer: MapRef = Arc::new(FiniteDifferenceMap::new(2, 1, |y| Vector::from_vec(vec![y[0] * y[1]])));
        let c = ComposedMap::new(inner, outer).unwrap();
        let q = Vector::from_vec(vec![0.5, 0.2]);
        let qd = Vector::from_vec(vec![-0.3, 0.9]);
        let check = check_map_derivatives(&c, &q, &qd).unwrap();
        assert!(check.within(1e-5, 1e-4), "{check:?}");
    }

    #[test]
    fn composed_map_rejects_mismatch() {
        let inner: MapRef = Arc::new(IdentityMap::new(3));
        let outer: MapRef = Arc::new(IdentityMap::new(2));
        assert!(matches!(ComposedMap::new(inner, outer), Err(FabricError::DimensionMismatch { .. })));
    }
}
