use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EnergyLagrangian, EnergyRef, FinslerEnergy, PulledBackEnergy};
use crate::error::check_state;
use crate::field::{AxisGaussian, CircleBarrier, Constant, ExpHeight, RadialPriority, RadialSwitch, ScalarField, VortexZone};
use crate::kinematics::DistanceMap1D;
use crate::spec::SpecTerms;
use crate::{FabricError, Matrix, Result, State, Vector};

/// `L = c·g(x)·‖ẋ‖²` for a scalar profile `g ≥ 0`.
#[derive(Clone)]
pub struct ConformalEnergy {
    scale: f64,
    profile: Arc<dyn ScalarField>,
}

impl ConformalEnergy {
    pub fn new(scale: f64, profile: Arc<dyn ScalarField>) -> Self {
        Self { scale, profile }
    }

    pub fn profile(&self) -> &Arc<dyn ScalarField> {
        &self.profile
    }

    /// Scalar `2c·g(x)` of the isotropic energy tensor.
    pub fn tensor_weight(&self, x: &Vector) -> Result<f64> {
        Ok(2.0 * self.scale * self.profile.value(x)?)
    }
}

impl EnergyLagrangian for ConformalEnergy {
    fn dim(&self) -> usize {
        self.profile.dim()
    }
    fn value(&self, x: &Vector, xd: &Vector) -> Result<f64> {
        check_state("conformal energy", self.dim(), x, xd)?;
        Ok(self.scale * self.profile.value(x)? * xd.norm_squared())
    }
    fn momentum(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        check_state("conformal energy", self.dim(), x, xd)?;
        Ok(xd * (2.0 * self.scale * self.profile.value(x)?))
    }
    fn el_terms(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms> {
        check_state("conformal energy", self.dim(), x, xd)?;
        let n = self.dim();
        let g = self.profile.value(x)?;
        let grad = self.profile.gradient(x)?;
        let c2 = 2.0 * self.scale;
        Ok(SpecTerms {
            metric: Matrix::identity(n, n) * (c2 * g),
            force: (xd * grad.dot(xd) - &grad * (0.5 * xd.norm_squared())) * c2,
        })
    }
    fn as_finsler(&self) -> Option<&dyn FinslerEnergy> {
        Some(self)
    }
}

impl FinslerEnergy for ConformalEnergy {}

/// One-dimensional `L = ½·s(ẋ)·(λ/x)·ẋ²` with `s = 1` when moving toward the
/// boundary (`ẋ < 0`) and `0` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierScaled {
    pub lambda: f64,
}

impl BarrierScaled {
    pub const MIN_DISTANCE: f64 = 1e-9;

    fn gain(&self, x: &Vector, xd: &Vector) -> Result<f64> {
        check_state("barrier-scaled energy", 1, x, xd)?;
        if !(x[0] > Self::MIN_DISTANCE) {
            return Err(FabricError::BoundaryViolation {
                what: "barrier-scaled energy",
                state: State::new(x, xd),
            });
        }
        let s = if xd[0] < 0.0 { 1.0 } else { 0.0 };
        Ok(s * self.lambda / x[0])
    }
}

impl EnergyLagrangian for BarrierScaled {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &Vector, xd: &Vector) -> Result<f64> {
        Ok(0.5 * self.gain(x, xd)? * xd[0] * xd[0])
    }
    fn momentum(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        Ok(xd * self.gain(x, xd)?)
    }
    fn el_terms(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms> {
        let g = self.gain(x, xd)?;
        Ok(SpecTerms {
            metric: Matrix::from_element(1, 1, g),
            force: Vector::from_element(1, -0.5 * g * xd[0] * xd[0] / x[0]),
        })
    }
    fn as_finsler(&self) -> Option<&dyn FinslerEnergy> {
        Some(self)
    }
}

impl FinslerEnergy for BarrierScaled {}

/// One-dimensional `L = ẋ²/(2x²)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InverseSquare1D;

impl InverseSquare1D {
    fn check(&self, x: &Vector, xd: &Vector) -> Result<f64> {
        check_state("inverse-square energy", 1, x, xd)?;
        if !(x[0] > BarrierScaled::MIN_DISTANCE) {
            return Err(FabricError::BoundaryViolation {
                what: "inverse-square energy",
                state: State::new(x, xd),
            });
        }
        Ok(x[0])
    }
}

impl EnergyLagrangian for InverseSquare1D {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &Vector, xd: &Vector) -> Result<f64> {
        let d = self.check(x, xd)?;
        Ok(0.5 * xd[0] * xd[0] / (d * d))
    }
    fn momentum(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        let d = self.check(x, xd)?;
        Ok(xd / (d * d))
    }
    fn el_terms(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms> {
        let d = self.check(x, xd)?;
        let v2 = xd[0] * xd[0];
        Ok(SpecTerms {
            metric: Matrix::from_element(1, 1, 1.0 / (d * d)),
            force: Vector::from_element(1, -v2 / (d * d * d)),
        })
    }
    fn as_finsler(&self) -> Option<&dyn FinslerEnergy> {
        Some(self)
    }
}

impl FinslerEnergy for InverseSquare1D {}

/// `L = (Jq̇)²/(2φ²)` with `φ = (‖q − c‖ − r)/r`.
pub fn directional_energy(center: Vector, radius: f64) -> Result<PulledBackEnergy> {
    let map = DistanceMap1D::circle(center, radius)?;
    PulledBackEnergy::new(Arc::new(map), Arc::new(InverseSquare1D))
}

/// Catalogue of built-in energies, as named in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergyKind {
    /// `(λ/2)‖ẋ‖²`.
    Euclidean { dim: usize, lambda: f64 },
    /// `λ·ẋᵀẋ`.
    Isotropic { dim: usize, lambda: f64 },
    /// `½·s(ẋ)·(λ/x)·ẋ²`.
    BarrierScaled { lambda: f64 },
    /// `½·(k/φ²)·‖ẋ‖²` around a circle.
    ChompLike { center: Vec<f64>, radius: f64, k: f64 },
    /// `(Jq̇)²/(2φ²)` around a circle.
    Directional { center: Vec<f64>, radius: f64 },
    /// `ẋᵀG_a ẋ` with `G_a` switching from `m̲` far away to `m̄` inside `radius`.
    RadialSwitch {
        center: Vec<f64>,
        m_hi: f64,
        m_lo: f64,
        alpha_s: f64,
        radius: f64,
    },
    /// `m·s(x)·ẋᵀẋ` with `s = (d − r)²/r²` inside the zone.
    VortexZone { center: Vec<f64>, radius: f64, mass: f64 },
    /// `ẋᵀ w(‖x‖²) ẋ`.
    PriorityRadial { dim: usize, m_hi: f64, m_lo: f64, alpha_m: f64 },
    /// `ẋᵀ λ e^{−h/σ} ẋ` with `h` the height above the floor line `y = floor`.
    FloorLift { lambda: f64, sigma: f64, floor: f64 },
    /// `ẋᵀ λ e^{−s²/2σ²} ẋ` with `s` the horizontal distance to `goal_x`.
    HorizontalGaussian { lambda: f64, sigma: f64, goal_x: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(FabricError::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn nonempty(name: &str, v: &[f64]) -> Result<Vector> {
    if v.is_empty() || v.iter().any(|c| !c.is_finite()) {
        return Err(FabricError::InvalidParameter(format!("{name} must be a non-empty finite vector")));
    }
    Ok(Vector::from_column_slice(v))
}

fn priority_range(m_hi: f64, m_lo: f64) -> Result<()> {
    positive("m_hi", m_hi)?;
    if !(m_lo >= 0.0 && m_lo <= m_hi) {
        return Err(FabricError::InvalidParameter(format!(
            "m_lo must lie in [0, m_hi], got {m_lo}"
        )));
    }
    Ok(())
}

fn dimension(dim: usize) -> Result<usize> {
    if dim == 0 {
        Err(FabricError::InvalidParameter("dim must be positive".into()))
    } else {
        Ok(dim)
    }
}

pub fn make_builtin_energy(kind: &EnergyKind) -> Result<EnergyRef> {
    let up = || Vector::from_column_slice(&[0.0, 1.0]);
    Ok(match kind {
        EnergyKind::Euclidean { dim, lambda } => {
            positive("lambda", *lambda)?;
            let f = Constant { dim: dimension(*dim)?, value: *lambda };
            Arc::new(ConformalEnergy::new(0.5, Arc::new(f)))
        }
        EnergyKind::Isotropic { dim, lambda } => {
            positive("lambda", *lambda)?;
            let f = Constant { dim: dimension(*dim)?, value: *lambda };
            Arc::new(ConformalEnergy::new(1.0, Arc::new(f)))
        }
        EnergyKind::BarrierScaled { lambda } => {
            positive("lambda", *lambda)?;
            Arc::new(BarrierScaled { lambda: *lambda })
        }
        EnergyKind::ChompLike { center, radius, k } => {
            positive("radius", *radius)?;
            positive("k", *k)?;
            let f = CircleBarrier { center: nonempty("center", center)?, radius: *radius, k: *k };
            Arc::new(ConformalEnergy::new(0.5, Arc::new(f)))
        }
        EnergyKind::Directional { center, radius } => {
            positive("radius", *radius)?;
            Arc::new(directional_energy(nonempty("center", center)?, *radius)?)
        }
        EnergyKind::RadialSwitch { center, m_hi, m_lo, alpha_s, radius } => {
            priority_range(*m_hi, *m_lo)?;
            positive("alpha_s", *alpha_s)?;
            positive("radius", *radius)?;
            let f = RadialSwitch {
                center: nonempty("center", center)?,
                m_hi: *m_hi,
                m_lo: *m_lo,
                alpha: *alpha_s,
                radius: *radius,
            };
            Arc::new(ConformalEnergy::new(1.0, Arc::new(f)))
        }
        EnergyKind::VortexZone { center, radius, mass } => {
            positive("radius", *radius)?;
            positive("mass", *mass)?;
            let f = VortexZone { center: nonempty("center", center)?, radius: *radius };
            Arc::new(ConformalEnergy::new(*mass, Arc::new(f)))
        }
        EnergyKind::PriorityRadial { dim, m_hi, m_lo, alpha_m } => {
            priority_range(*m_hi, *m_lo)?;
            positive("alpha_m", *alpha_m)?;
            let f = RadialPriority { dim: dimension(*dim)?, m_hi: *m_hi, m_lo: *m_lo, alpha: *alpha_m };
            Arc::new(ConformalEnergy::new(1.0, Arc::new(f)))
        }
        EnergyKind::FloorLift { lambda, sigma, floor } => {
            positive("lambda", *lambda)?;
            positive("sigma", *sigma)?;
            let f = ExpHeight { normal: up(), offset: *floor, lambda: *lambda, sigma: *sigma };
            Arc::new(ConformalEnergy::new(1.0, Arc::new(f)))
        }
        EnergyKind::HorizontalGaussian { lambda, sigma, goal_x } => {
            positive("lambda", *lambda)?;
            positive("sigma", *sigma)?;
            let f = AxisGaussian {
                axis: Vector::from_column_slice(&[1.0, 0.0]),
                goal: *goal_x,
                lambda: *lambda,
                sigma: *sigma,
            };
            Arc::new(ConformalEnergy::new(1.0, Arc::new(f)))
        }
    })
}
