//! Scalar fields used as potentials and as conformal energy profiles.

use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::{FabricError, Result, State, Vector};

/// A differentiable scalar function of position.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> Result<f64>;
    fn gradient(&self, x: &Vector) -> Result<Vector>;
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Constant field `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub dim: usize,
    pub value: f64,
}

impl ScalarField for Constant {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim("constant field", self.dim, x.len())?;
        Ok(self.value)
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim("constant field", self.dim, x.len())?;
        Ok(Vector::zeros(self.dim))
    }
}

/// One-dimensional barrier `α₁/x² + α₂·log(e^{−α₃(x−α₄)} + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Barrier1D {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
}

impl Barrier1D {
    pub const MIN_DISTANCE: f64 = 1e-9;

    fn check(&self, x: &Vector) -> Result<f64> {
        check_dim("barrier potential", 1, x.len())?;
        if !(x[0] > Self::MIN_DISTANCE) {
            return Err(FabricError::BoundaryViolation {
                what: "barrier potential",
                state: State::position_only(x),
            });
        }
        Ok(x[0])
    }
}

impl ScalarField for Barrier1D {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        let d = self.check(x)?;
        Ok(self.alpha1 / (d * d) + self.alpha2 * softplus(-self.alpha3 * (d - self.alpha4)))
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let d = self.check(x)?;
        let g = -2.0 * self.alpha1 / (d * d * d) - self.alpha2 * self.alpha3 * logistic(-self.alpha3 * (d - self.alpha4));
        Ok(Vector::from_element(1, g))
    }
}

/// `k/φ²` with `φ = (‖x − c‖ − r)/r`, the normalized distance to a circle.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleBarrier {
    pub center: Vector,
    pub radius: f64,
    pub k: f64,
}

impl CircleBarrier {
    fn distance(&self, x: &Vector) -> Result<(f64, Vector)> {
        check_dim("circle barrier", self.center.len(), x.len())?;
        let delta = x - &self.center;
        let d = delta.norm();
        let phi = (d - self.radius) / self.radius;
        if !(phi > Barrier1D::MIN_DISTANCE) {
            return Err(FabricError::BoundaryViolation {
                what: "circle barrier",
                state: State::position_only(x),
            });
        }
        Ok((phi, delta / d))
    }
}

impl ScalarField for CircleBarrier {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        let (phi, _) = self.distance(x)?;
        Ok(self.k / (phi * phi))
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let (phi, n) = self.distance(x)?;
        Ok(n * (-2.0 * self.k / (phi * phi * phi * self.radius)))
    }
}

/// `½·s·‖x − c‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub center: Vector,
    pub scale: f64,
}

impl ScalarField for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim("quadratic field", self.center.len(), x.len())?;
        Ok(0.5 * self.scale * (x - &self.center).norm_squared())
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim("quadratic field", self.center.len(), x.len())?;
        Ok((x - &self.center) * self.scale)
    }
}

/// Smooth norm `k(‖x‖ + (1/α)·log(1 + e^{−2α‖x‖}))`, with gradient
/// `k·tanh(α‖x‖)·x̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothNorm {
    pub dim: usize,
    pub k: f64,
    pub alpha: f64,
}

impl ScalarField for SmoothNorm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim("smooth norm", self.dim, x.len())?;
        let r = x.norm();
        Ok(self.k * (r + (-2.0 * self.alpha * r).exp().ln_1p() / self.alpha))
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim("smooth norm", self.dim, x.len())?;
        let r = x.norm();
        if r == 0.0 {
            return Ok(Vector::zeros(self.dim));
        }
        Ok(x * (self.k * (self.alpha * r).tanh() / r))
    }
}

/// Isotropic switch `m̲ + (m̄ − m̲)·½(tanh(−α(‖x − c‖ − r)) + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSwitch {
    pub center: Vector,
    pub m_hi: f64,
    pub m_lo: f64,
    pub alpha: f64,
    pub radius: f64,
}

impl ScalarField for RadialSwitch {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim("radial switch", self.center.len(), x.len())?;
        let d = (x - &self.center).norm();
        let s = 0.5 * ((-self.alpha * (d - self.radius)).tanh() + 1.0);
        Ok(s * (self.m_hi - self.m_lo) + self.m_lo)
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim("radial switch", self.center.len(), x.len())?;
        let delta = x - &self.center;
        let d = delta.norm();
        if d == 0.0 {
            return Ok(Vector::zeros(delta.len()));
        }
        let t = (-self.alpha * (d - self.radius)).tanh();
        let ds = -0.5 * self.alpha * (1.0 - t * t);
        Ok(delta * ((self.m_hi - self.m_lo) * ds / d))
    }
}

/// Radial priority weight `w(‖x‖²) = (m̄ − m̲)·e^{−(α‖x‖)²} + m̲`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPriority {
    pub dim: usize,
    pub m_hi: f64,
    pub m_lo: f64,
    pub alpha: f64,
}

impl RadialPriority {
    pub fn weight_sq(&self, r2: f64) -> f64 {
        (self.m_hi - self.m_lo) * (-(self.alpha * self.alpha) * r2).exp() + self.m_lo
    }
}

impl ScalarField for RadialPriority {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim("radial priority", self.dim, x.len())?;
        Ok(self.weight_sq(x.norm_squared()))
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim("radial priority", self.dim, x.len())?;
        let a2 = self.alpha * self.alpha;
        let e = (-a2 * x.norm_squared()).exp();
        Ok(x * (-2.0 * a2 * (self.m_hi - self.m_lo) * e))
    }
}

/// Vortex zone weight `s = (d − r)²/r²` inside the disc `d < r`, else 0.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexZone {
    pub center: Vector,
    pub radius: f64,
}

impl VortexZone {
    pub fn contains(&self, x: &Vector) -> bool {
        (x - &self.center).norm() < self.radius
    }
}

impl ScalarField for VortexZone {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim("vortex zone", self.center.len(), x.len())?;
        let d = (x - &self.center).norm();
        if d >= self.radius {
            return Ok(0.0);
        }
        let u = (d - self.radius) / self.radius;
        Ok(u * u)
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim("vortex zone", self.center.len(), x.len())?;
        let delta = x - &self.center;
        let d = delta.norm();
        if d >= self.radius || d == 0.0 {
            return Ok(Vector::zeros(delta.len()));
        }
        let r2 = self.radius * self.radius;
        Ok(delta * (2.0 * (d - self.radius) / (r2 * d)))
    }
}

/// `λ·exp(−h/σ)` where `h = n̂·x − offset` is the height above a plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpHeight {
    pub normal: Vector,
    pub offset: f64,
    pub lambda: f64,
    pub sigma: f64,
}

impl ScalarField for ExpHeight {
    fn dim(&self) -> usize {
        self.normal.len()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim("height field", self.normal.len(), x.len())?;
        let h = self.normal.dot(x) - self.offset;
        Ok(self.lambda * (-h / self.sigma).exp())
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let v = self.value(x)?;
        Ok(&self.normal * (-v / self.sigma))
    }
}

/// `λ·exp(−s²/(2σ²))` with `s` the distance to `goal` along `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisGaussian {
    pub axis: Vector,
    pub goal: f64,
    pub lambda: f64,
    pub sigma: f64,
}

impl ScalarField for AxisGaussian {
    fn dim(&self) -> usize {
        self.axis.len()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim("axis gaussian", self.axis.len(), x.len())?;
        let s = self.axis.dot(x) - self.goal;
        Ok(self.lambda * (-s * s / (2.0 * self.sigma * self.sigma)).exp())
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let v = self.value(x)?;
        let s = self.axis.dot(x) - self.goal;
        Ok(&self.axis * (-v * s / (self.sigma * self.sigma)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(f: &dyn ScalarField, x: &Vector) -> Vector {
        let h = 1e-6 * (1.0 + x.norm());
        Vector::from_fn(x.len(), |i, _| {
            let mut p = x.clone();
            let mut m = x.clone();
            p[i] += h;
            m[i] -= h;
            (f.value(&p).unwrap() - f.value(&m).unwrap()) / (2.0 * h)
        })
    }

    fn assert_gradient(f: &dyn ScalarField, x: &[f64]) {
        let x = Vector::from_row_slice(x);
        let g = f.gradient(&x).unwrap();
        let fd = fd_gradient(f, &x);
        let err = (&g - &fd).abs().max();
        assert!(err <= 1e-6_f64.max(1e-6 * g.abs().max()), "{g} vs {fd}");
    }

    #[test]
    fn gradients_match_differences() {
        let c = |v: &[f64]| Vector::from_row_slice(v);
        assert_gradient(&Barrier1D { alpha1: 0.4, alpha2: 0.2, alpha3: 20.0, alpha4: 5.0 }, &[4.7]);
        assert_gradient(&Barrier1D { alpha1: 0.4, alpha2: 0.2, alpha3: 20.0, alpha4: 5.0 }, &[1.3]);
        assert_gradient(&CircleBarrier { center: c(&[0.5, -0.2]), radius: 1.0, k: 0.5 }, &[2.0, 1.0]);
        assert_gradient(&Quadratic { center: c(&[0.0, 0.0]), scale: -1.0 }, &[2.0, 1.0]);
        assert_gradient(&SmoothNorm { dim: 2, k: 5.0, alpha: 10.0 }, &[0.05, -0.02]);
        assert_gradient(&RadialSwitch { center: c(&[0.0, 0.0]), m_hi: 1.0, m_lo: 0.0, alpha: 25.0, radius: 5.0 }, &[3.0, 3.9]);
        assert_gradient(&RadialPriority { dim: 2, m_hi: 2.0, m_lo: 0.3, alpha: 0.75 }, &[0.7, -1.1]);
        assert_gradient(&VortexZone { center: c(&[1.0, 1.0]), radius: 1.0 }, &[1.3, 1.4]);
        assert_gradient(&ExpHeight { normal: c(&[0.0, 1.0]), offset: 0.0, lambda: 2.0, sigma: 0.3 }, &[0.4, 0.5]);
        assert_gradient(&AxisGaussian { axis: c(&[1.0, 0.0]), goal: 1.5, lambda: 3.0, sigma: 0.4 }, &[1.2, 0.5]);
    }

    #[test]
    fn smooth_norm_gradient_is_bounded_by_k() {
        let f = SmoothNorm { dim: 2, k: 5.0, alpha: 10.0 };
        for r in [0.0, 1e-3, 0.1, 1.0, 100.0] {
            let g = f.gradient(&Vector::from_row_slice(&[r, 0.0])).unwrap();
            assert!(g.norm() <= 5.0);
        }
        assert_eq!(f.gradient(&Vector::zeros(2)).unwrap(), Vector::zeros(2));
    }

    #[test]
    fn barrier_rejects_boundary() {
        let b = Barrier1D { alpha1: 0.4, alpha2: 0.2, alpha3: 20.0, alpha4: 5.0 };
        assert!(matches!(b.value(&Vector::from_element(1, 0.0)), Err(FabricError::BoundaryViolation { .. })));
    }

    #[test]
    fn vortex_zone_in_unit_interval() {
        let z = VortexZone { center: Vector::zeros(2), radius: 1.0 };
        assert_eq!(z.value(&Vector::zeros(2)).unwrap(), 1.0);
        assert_eq!(z.value(&Vector::from_row_slice(&[2.0, 0.0])).unwrap(), 0.0);
        assert!((z.value(&Vector::from_row_slice(&[0.5, 0.0])).unwrap() - 0.25).abs() < 1e-15);
    }
}
