//! Energy Lagrangians `L(x, ẋ)`, their Euler–Lagrange terms and Hamiltonians.
//!
//! For an energy `L` the Euler–Lagrange equation reads `M_e ẍ + f_e = 0` with
//! `M_e = ∂²L/∂ẋ²` and `f_e = ∂²L/∂ẋ∂x · ẋ − ∂L/∂x`. The Hamiltonian is
//! `H = ∂L/∂ẋ·ẋ − L`; for Finsler energies it coincides with `L`.

mod builtin;
mod catalogue;
mod oracle;

use std::sync::Arc;

pub use builtin::{
    directional_energy, make_builtin_energy, BarrierScaled, ConformalEnergy, EnergyKind, InverseSquare1D,
};
pub use catalogue::{catalogue, CatalogueEntry, StateSampler};
pub use oracle::{el_terms_fd_oracle, fd_momentum};

use crate::error::{check_dim, check_state};
use crate::spec::{Spec, SpecTerms};
use crate::taskmap::MapRef;
use crate::{Result, Vector};

pub trait EnergyLagrangian: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector, xd: &Vector) -> Result<f64>;
    /// Generalized momentum `∂L/∂ẋ`.
    fn momentum(&self, x: &Vector, xd: &Vector) -> Result<Vector>;
    /// `(M_e, f_e)`.
    fn el_terms(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms>;

    fn hamiltonian(&self, x: &Vector, xd: &Vector) -> Result<f64> {
        Ok(self.momentum(x, xd)?.dot(xd) - self.value(x, xd)?)
    }

    /// `Some` when the energy is the energy form of a Finsler structure.
    fn as_finsler(&self) -> Option<&dyn FinslerEnergy> {
        None
    }
}

/// Energy `L_e = ½L_g²` of a Finsler structure `L_g`, degree-2 homogeneous in `ẋ`.
pub trait FinslerEnergy: EnergyLagrangian {
    /// `L_g = √(2 L_e)`.
    fn structure_value(&self, x: &Vector, xd: &Vector) -> Result<f64> {
        Ok((2.0 * self.value(x, xd)?).max(0.0).sqrt())
    }
}

pub type EnergyRef = Arc<dyn EnergyLagrangian>;

/// `Ḣ = ẋᵀ(M_e ẍ + f_e)`.
pub fn hamiltonian_rate(energy: &dyn EnergyLagrangian, x: &Vector, xd: &Vector, xdd: &Vector) -> Result<f64> {
    check_dim("hamiltonian rate", energy.dim(), xdd.len())?;
    let t = energy.el_terms(x, xd)?;
    Ok(xd.dot(&(t.metric * xdd + t.force)))
}

/// The Euler–Lagrange equation of an energy seen as a spec.
#[derive(Clone)]
pub struct EnergySpec(pub EnergyRef);

impl Spec for EnergySpec {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms> {
        self.0.el_terms(x, xd)?.ensure_finite(x, xd)
    }
}

/// `L̃(q, q̇) = L(φ(q), J q̇)`.
#[derive(Clone)]
pub struct PulledBackEnergy {
    map: MapRef,
    energy: EnergyRef,
}

impl PulledBackEnergy {
    pub fn new(map: MapRef, energy: EnergyRef) -> Result<Self> {
        check_dim("energy pullback", map.codomain_dim(), energy.dim())?;
        Ok(Self { map, energy })
    }

    pub fn map(&self) -> &MapRef {
        &self.map
    }

    pub fn leaf(&self) -> &EnergyRef {
        &self.energy
    }
}

impl EnergyLagrangian for PulledBackEnergy {
    fn dim(&self) -> usize {
        self.map.domain_dim()
    }
    fn value(&self, q: &Vector, qd: &Vector) -> Result<f64> {
        check_state("pulled-back energy", self.dim(), q, qd)?;
        let x = self.map.map(q)?;
        let xd = self.map.jacobian(q)? * qd;
        self.energy.value(&x, &xd)
    }
    fn momentum(&self, q: &Vector, qd: &Vector) -> Result<Vector> {
        check_state("pulled-back energy", self.dim(), q, qd)?;
        let x = self.map.map(q)?;
        let j = self.map.jacobian(q)?;
        let xd = &j * qd;
        Ok(j.transpose() * self.energy.momentum(&x, &xd)?)
    }
    fn el_terms(&self, q: &Vector, qd: &Vector) -> Result<SpecTerms> {
        let eval = self.map.evaluate(q, qd)?;
        Ok(self.energy.el_terms(&eval.x, &eval.xd)?.pulled_back(&eval))
    }
    fn as_finsler(&self) -> Option<&dyn FinslerEnergy> {
        self.energy.as_finsler().map(|_| self as &dyn FinslerEnergy)
    }
}

impl FinslerEnergy for PulledBackEnergy {}

/// Sum of energies on one space.
#[derive(Clone)]
pub struct EnergySum {
    dim: usize,
    parts: Vec<EnergyRef>,
}

impl EnergySum {
    pub fn new(dim: usize, parts: Vec<EnergyRef>) -> Result<Self> {
        for p in &parts {
            check_dim("energy sum", dim, p.dim())?;
        }
        Ok(Self { dim, parts })
    }

    pub fn parts(&self) -> &[EnergyRef] {
        &self.parts
    }

    pub fn push(&mut self, part: EnergyRef) -> Result<()> {
        check_dim("energy sum", self.dim, part.dim())?;
        self.parts.push(part);
        Ok(())
    }
}

impl EnergyLagrangian for EnergySum {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector, xd: &Vector) -> Result<f64> {
        self.parts.iter().try_fold(0.0, |acc, p| Ok(acc + p.value(x, xd)?))
    }
    fn momentum(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        self.parts
            .iter()
            .try_fold(Vector::zeros(self.dim), |acc, p| Ok(acc + p.momentum(x, xd)?))
    }
    fn el_terms(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms> {
        check_state("energy sum", self.dim, x, xd)?;
        let mut acc = SpecTerms::zeros(self.dim);
        for p in &self.parts {
            let t = p.el_terms(x, xd)?;
            acc.metric += t.metric;
            acc.force += t.force;
        }
        Ok(acc)
    }
    fn hamiltonian(&self, x: &Vector, xd: &Vector) -> Result<f64> {
        self.parts.iter().try_fold(0.0, |acc, p| Ok(acc + p.hamiltonian(x, xd)?))
    }
    fn as_finsler(&self) -> Option<&dyn FinslerEnergy> {
        if self.parts.iter().all(|p| p.as_finsler().is_some()) {
            Some(self)
        } else {
            None
        }
    }
}

impl FinslerEnergy for EnergySum {}

#[cfg(test)]
mod tests;
