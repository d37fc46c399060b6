//! Acceleration-based forcing potentials, damping and execution-energy speed
//! control.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energization::VELOCITY_FLOOR;
use crate::energy::{ConformalEnergy, EnergyLagrangian, EnergyRef, PulledBackEnergy};
use crate::error::check_dim;
use crate::field::{RadialPriority, ScalarField, SmoothNorm};
use crate::geometry::Fabric;
use crate::linalg::solve_symmetric;
use crate::taskmap::{AffineMap, MapRef};
use crate::{FabricError, Matrix, Result, State, Vector};

/// Parameters of `ψ₁` and of the priority `M_ψ = w(‖x‖²)·I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialParams {
    pub k: f64,
    pub alpha_psi: f64,
    pub m_hi: f64,
    pub m_lo: f64,
    pub alpha_m: f64,
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.k, self.alpha_psi, self.m_hi, self.m_lo, self.alpha_m];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.m_lo > self.m_hi {
            return Err(FabricError::InvalidParameter(
                "forcing parameters must be positive with m_lo <= m_hi".into(),
            ));
        }
        Ok(())
    }
}

/// `∂_qψ = Jᵀ M_ψ(x) ∂ψ₁(x)` with `x = φ(q)`.
#[derive(Clone)]
pub struct ForcingPotential {
    task_map: MapRef,
    base: SmoothNorm,
    priority: RadialPriority,
}

impl ForcingPotential {
    pub fn new(task_map: MapRef, params: PotentialParams) -> Result<Self> {
        params.validate()?;
        let dim = task_map.codomain_dim();
        Ok(Self {
            task_map,
            base: SmoothNorm { dim, k: params.k, alpha: params.alpha_psi },
            priority: RadialPriority { dim, m_hi: params.m_hi, m_lo: params.m_lo, alpha: params.alpha_m },
        })
    }

    /// Attractor toward `target` in root coordinates, `x = q − target`.
    pub fn toward(target: &Vector, params: PotentialParams) -> Result<Self> {
        Self::new(Arc::new(AffineMap::translation(target)), params)
    }

    pub fn task_map(&self) -> &MapRef {
        &self.task_map
    }

    pub fn params(&self) -> PotentialParams {
        PotentialParams {
            k: self.base.k,
            alpha_psi: self.base.alpha,
            m_hi: self.priority.m_hi,
            m_lo: self.priority.m_lo,
            alpha_m: self.priority.alpha,
        }
    }

    /// `∂ψ₁(x) = k·tanh(α_ψ‖x‖)·x̂`.
    pub fn base_gradient(&self, x: &Vector) -> Result<Vector> {
        self.base.gradient(x)
    }

    /// `M_ψ(x) = w(‖x‖²)·I`.
    pub fn priority_metric(&self, x: &Vector) -> Result<Matrix> {
        check_dim("potential priority", self.base.dim, x.len())?;
        let n = x.len();
        Ok(Matrix::identity(n, n) * self.priority.weight_sq(x.norm_squared()))
    }

    /// Task-space gradient `M_ψ ∂ψ₁`.
    pub fn leaf_gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(self.base_gradient(x)? * self.priority.weight_sq(x.norm_squared()))
    }

    /// Root-space gradient `Jᵀ M_ψ ∂ψ₁`.
    pub fn potential_force(&self, q: &Vector) -> Result<Vector> {
        let x = self.task_map.map(q)?;
        Ok(self.task_map.jacobian(q)?.transpose() * self.leaf_gradient(&x)?)
    }

    /// `‖φ(q)‖`.
    pub fn task_distance(&self, q: &Vector) -> Result<f64> {
        Ok(self.task_map.map(q)?.norm())
    }

    /// The scalar potential `ψ(q) = ∫₀^‖x‖ w(s²)·k·tanh(α_ψ s) ds`, by
    /// composite five-point Gauss–Legendre quadrature.
    pub fn value(&self, q: &Vector) -> Result<f64> {
        let rho = self.task_distance(q)?;
        Ok(self.radial_integral(rho))
    }

    fn radial_integral(&self, rho: f64) -> f64 {
        const NODES: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        if rho <= 0.0 {
            return 0.0;
        }
        let panels = (rho / 0.02).ceil().max(1.0) as usize;
        let h = rho / panels as f64;
        let integrand = |s: f64| self.priority.weight_sq(s * s) * self.base.k * (self.base.alpha * s).tanh();
        let mut total = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            let half = 0.5 * h;
            total += NODES
                .iter()
                .zip(WEIGHTS)
                .map(|(n, w)| w * integrand(mid + half * n))
                .sum::<f64>()
                * half;
        }
        total
    }

    /// The priority energy `ẋᵀ M_ψ(x) ẋ` on the task space.
    pub fn leaf_priority_energy(&self) -> EnergyRef {
        Arc::new(ConformalEnergy::new(1.0, Arc::new(self.priority)))
    }

    /// The priority energy pulled back to the root.
    pub fn priority_energy(&self) -> Result<PulledBackEnergy> {
        PulledBackEnergy::new(self.task_map.clone(), self.leaf_priority_energy())
    }
}

/// Free-function form of [`ForcingPotential::potential_force`].
pub fn potential_force(p: &ForcingPotential, q: &Vector) -> Result<Vector> {
    p.potential_force(q)
}

/// `β = s_β(x)·B + B̲ + max{0, α_ex − α_Le}`, `s_β = ½(tanh(−α_β(‖x‖ − r)) + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingParams {
    pub b: f64,
    pub b_min: f64,
    pub alpha_beta: f64,
    pub radius: f64,
}

impl DampingParams {
    pub fn switch(&self, task_distance: f64) -> f64 {
        0.5 * ((-self.alpha_beta * (task_distance - self.radius)).tanh() + 1.0)
    }
}

/// Execution-energy regulation.
#[derive(Clone)]
pub struct SpeedController {
    /// `None` regulates the system energy itself.
    pub execution_energy: Option<EnergyRef>,
    /// Desired execution energy level `L_ex,d`.
    pub target_level: f64,
    pub alpha_eta: f64,
    pub alpha_shift: f64,
    /// Fixes `η` instead of evaluating its switch.
    pub eta_override: Option<f64>,
    pub damping: DampingParams,
}

impl SpeedController {
    /// `η = ½(tanh(−α_η(L_ex − L_ex,d) − α_shift) + 1)`.
    pub fn eta(&self, l_ex: f64) -> f64 {
        match self.eta_override {
            Some(eta) => eta.clamp(0.0, 1.0),
            None => 0.5 * ((-self.alpha_eta * (l_ex - self.target_level) - self.alpha_shift).tanh() + 1.0),
        }
    }

    pub fn beta(&self, task_distance: f64, alpha_ex: f64, alpha_le: f64) -> f64 {
        self.damping.switch(task_distance) * self.damping.b + self.damping.b_min + (alpha_ex - alpha_le).max(0.0)
    }
}

/// `α` making `ẍ = ẍ_d + αẋ` conserve the energy with terms `(M, f)`:
/// `α = −ẋᵀ(M ẍ_d + f)/(ẋᵀMẋ)`, zero below the velocity floor.
pub fn alpha_projection_terms(metric: &Matrix, force: &Vector, xdd_d: &Vector, xd: &Vector) -> Result<f64> {
    if xd.norm() < VELOCITY_FLOOR {
        return Ok(0.0);
    }
    let c = xd.dot(&(metric * xd));
    if !(c > 0.0) {
        return Err(FabricError::RankDeficient {
            state: State::position_only(xd),
        });
    }
    Ok(-xd.dot(&(metric * xdd_d + force)) / c)
}

pub fn alpha_projection(energy: &dyn EnergyLagrangian, xdd_d: &Vector, x: &Vector, xd: &Vector) -> Result<f64> {
    if xd.norm() < VELOCITY_FLOOR {
        return Ok(0.0);
    }
    let t = energy.el_terms(x, xd)?;
    alpha_projection_terms(&t.metric, &t.force, xdd_d, xd)
}

/// Per-step scalars of the speed controller.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub alpha_ex0: f64,
    pub alpha_ex_psi: f64,
    pub alpha_ex: f64,
    pub alpha_le: f64,
    pub eta: f64,
    pub beta: f64,
}

/// Evaluated quantities at one step, beyond the acceleration itself.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub acceleration: Vector,
    pub diagnostics: StepDiagnostics,
    /// System energy `L_e` and Hamiltonian `H_e`.
    pub system_energy: f64,
    pub system_hamiltonian: f64,
    pub execution_energy: f64,
    /// `ẋᵀ(M_e ẍ + f_e)` at the returned acceleration.
    pub system_rate: f64,
    /// `∂ψᵀ q̇`.
    pub potential_rate: f64,
    /// `q̇ᵀ M_e q̇`.
    pub kinetic_metric: f64,
    pub metric_asymmetry: f64,
    pub regularized: bool,
}

/// `ẍ = −h₂ − M_e⁻¹∂ψ + α_ex q̇ − β q̇`.
pub fn speed_controlled_step(
    fabric: &Fabric,
    potential: Option<&ForcingPotential>,
    ctl: &SpeedController,
    q: &Vector,
    qd: &Vector,
) -> Result<StepReport> {
    let t = fabric.terms(q, qd)?;
    let cap = fabric.cond_cap();
    let h = solve_symmetric(&t.metric, &t.geometry_force, cap)?;
    let grad = match potential {
        Some(p) => p.potential_force(q)?,
        None => Vector::zeros(q.len()),
    };
    let a_psi = solve_symmetric(&t.metric, &grad, cap)?.solution;
    let minus_h = -&h.solution;

    let (l_ex, alpha_ex0, alpha_ex_psi) = match &ctl.execution_energy {
        Some(e) => {
            let et = e.el_terms(q, qd)?;
            (
                e.value(q, qd)?,
                alpha_projection_terms(&et.metric, &et.force, &minus_h, qd)?,
                alpha_projection_terms(&et.metric, &et.force, &(&minus_h - &a_psi), qd)?,
            )
        }
        None => (
            t.energy,
            alpha_projection_terms(&t.metric, &t.energy_force, &minus_h, qd)?,
            alpha_projection_terms(&t.metric, &t.energy_force, &(&minus_h - &a_psi), qd)?,
        ),
    };
    let alpha_le = alpha_projection_terms(&t.metric, &t.energy_force, &minus_h, qd)?;
    let eta = ctl.eta(l_ex);
    let alpha_ex = eta * alpha_ex0 + (1.0 - eta) * alpha_ex_psi;
    let distance = match potential {
        Some(p) => p.task_distance(q)?,
        None => f64::INFINITY,
    };
    let beta = ctl.beta(distance, alpha_ex, alpha_le);
    let acceleration = minus_h - a_psi + qd * (alpha_ex - beta);
    if !crate::linalg::is_finite_vector(&acceleration) {
        return Err(FabricError::NonFinite {
            what: "acceleration",
            state: State::new(q, qd),
        });
    }
    let system_rate = qd.dot(&(&t.metric * &acceleration + &t.energy_force));
    Ok(StepReport {
        diagnostics: StepDiagnostics {
            alpha_ex0,
            alpha_ex_psi,
            alpha_ex,
            alpha_le,
            eta,
            beta,
        },
        system_energy: t.energy,
        system_hamiltonian: t.hamiltonian,
        execution_energy: l_ex,
        system_rate,
        potential_rate: grad.dot(qd),
        kinetic_metric: qd.dot(&(&t.metric * qd)),
        metric_asymmetry: h.asymmetry,
        regularized: h.regularized,
        acceleration,
    })
}

/// The unforced, undamped energized fabric `ẍ = −h₂ + α_Le q̇`.
pub fn energized_fabric_step(fabric: &Fabric, q: &Vector, qd: &Vector) -> Result<StepReport> {
    let t = fabric.terms(q, qd)?;
    let h = solve_symmetric(&t.metric, &t.geometry_force, fabric.cond_cap())?;
    let minus_h = -&h.solution;
    let alpha_le = alpha_projection_terms(&t.metric, &t.energy_force, &minus_h, qd)?;
    let acceleration = minus_h + qd * alpha_le;
    if !crate::linalg::is_finite_vector(&acceleration) {
        return Err(FabricError::NonFinite {
            what: "acceleration",
            state: State::new(q, qd),
        });
    }
    let system_rate = qd.dot(&(&t.metric * &acceleration + &t.energy_force));
    Ok(StepReport {
        diagnostics: StepDiagnostics {
            alpha_le,
            eta: 1.0,
            ..StepDiagnostics::default()
        },
        system_energy: t.energy,
        system_hamiltonian: t.hamiltonian,
        execution_energy: t.energy,
        system_rate,
        potential_rate: 0.0,
        kinetic_metric: qd.dot(&(&t.metric * qd)),
        metric_asymmetry: h.asymmetry,
        regularized: h.regularized,
        acceleration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{make_builtin_energy, EnergyKind};

    fn v(a: &[f64]) -> Vector {
        Vector::from_row_slice(a)
    }

    fn published() -> PotentialParams {
        PotentialParams { k: 5.0, alpha_psi: 10.0, m_hi: 2.0, m_lo: 0.3, alpha_m: 0.75 }
    }

    #[test]
    fn gradient_vanishes_at_target() {
        let p = ForcingPotential::toward(&v(&[-2.5, -3.75]), published()).unwrap();
        assert_eq!(p.potential_force(&v(&[-2.5, -3.75])).unwrap(), Vector::zeros(2));
    }

    #[test]
    fn far_field_gradient_is_m_lo_times_k() {
        let p = ForcingPotential::toward(&v(&[0.0, 0.0]), published()).unwrap();
        let g = p.potential_force(&v(&[60.0, 80.0])).unwrap();
        assert!((g.norm() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn priority_at_target_is_m_hi() {
        let p = ForcingPotential::toward(&v(&[0.0, 0.0]), published()).unwrap();
        assert_eq!(p.priority_metric(&v(&[0.0, 0.0])).unwrap(), Matrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn potential_value_differentiates_to_gradient() {
        let p = ForcingPotential::toward(&v(&[0.5, -0.5]), published()).unwrap();
        let q = v(&[1.1, 0.7]);
        let h = 1e-5;
        let fd = Vector::from_fn(2, |i, _| {
            let mut a = q.clone();
            let mut b = q.clone();
            a[i] += h;
            b[i] -= h;
            (p.value(&a).unwrap() - p.value(&b).unwrap()) / (2.0 * h)
        });
        assert!((fd - p.potential_force(&q).unwrap()).norm() < 1e-8);
    }

    #[test]
    fn alpha_projection_examples() {
        let e = make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).unwrap();
        let (x, xd) = (v(&[0.0, 0.0]), v(&[1.0, 0.0]));
        assert_eq!(alpha_projection(&*e, &v(&[2.0, 0.0]), &x, &xd).unwrap(), -2.0);
        assert_eq!(alpha_projection(&*e, &v(&[0.0, 3.0]), &x, &xd).unwrap(), 0.0);
        assert_eq!(alpha_projection(&*e, &v(&[1.0, 3.0]), &x, &v(&[0.0, 1e-12])).unwrap(), 0.0);
    }

    #[test]
    fn eta_stays_in_unit_interval() {
        let ctl = SpeedController {
            execution_energy: None,
            target_level: 2.0,
            alpha_eta: 10.0,
            alpha_shift: 0.0,
            eta_override: None,
            damping: DampingParams { b: 6.5, b_min: 0.01, alpha_beta: 0.5, radius: 1.5 },
        };
        for l in [-1e6, -3.0, 0.0, 2.0, 4.0, 1e6] {
            let eta = ctl.eta(l);
            assert!((0.0..=1.0).contains(&eta));
        }
        assert!((ctl.eta(2.0) - 0.5).abs() < 1e-15);
        assert!(ctl.beta(100.0, 0.0, 1.0) >= 0.01);
    }
}
