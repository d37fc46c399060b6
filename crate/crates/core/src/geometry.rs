//! Geometry generators `ẍ + h₂(x, ẋ) = 0` and their metric-weighted combination.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{make_builtin_energy, EnergyKind, EnergyRef, EnergySum, PulledBackEnergy};
use crate::error::{check_dim, check_state};
use crate::field::{Barrier1D, CircleBarrier, Quadratic, ScalarField, SmoothNorm};
use crate::linalg::{solve_symmetric, SolveReport, DEFAULT_COND_CAP};
use crate::spec::{Spec, SpecTerms};
use crate::taskmap::MapRef;
use crate::{FabricError, Matrix, Result, Vector};

/// Velocity below which generators that normalize `ẋ` return zero.
pub const GENERATOR_VELOCITY_FLOOR: f64 = 1e-12;

/// An acceleration field `h(x, ẋ)` entering `ẍ + h = 0`. Generators are the
/// fields that are positively homogeneous of degree 2 in `ẋ`.
pub trait Geometry: Send + Sync {
    fn dim(&self) -> usize;
    fn h2(&self, x: &Vector, xd: &Vector) -> Result<Vector>;
}

pub type GeometryRef = Arc<dyn Geometry>;

/// `h₂ ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroGeometry {
    pub dim: usize,
}

impl Geometry for ZeroGeometry {
    fn dim(&self) -> usize {
        self.dim
    }
    fn h2(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        check_state("zero geometry", self.dim, x, xd)?;
        Ok(Vector::zeros(self.dim))
    }
}

/// `h₂ = λ‖ẋ‖²∇ψ(x)`.
#[derive(Clone)]
pub struct GradientGeometry {
    pub lambda: f64,
    pub potential: Arc<dyn ScalarField>,
}

impl Geometry for GradientGeometry {
    fn dim(&self) -> usize {
        self.potential.dim()
    }
    fn h2(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        check_state("gradient geometry", self.dim(), x, xd)?;
        Ok(self.potential.gradient(x)? * (self.lambda * xd.norm_squared()))
    }
}

/// `h₂ = −M_e⁻¹f_e` from an energy's Euler–Lagrange terms.
#[derive(Clone)]
pub struct EnergyDerivedGeometry {
    pub energy: EnergyRef,
}

impl Geometry for EnergyDerivedGeometry {
    fn dim(&self) -> usize {
        self.energy.dim()
    }
    fn h2(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        let t = self.energy.el_terms(x, xd)?;
        Ok(-solve_symmetric(&t.metric, &t.force, DEFAULT_COND_CAP)?.solution)
    }
}

/// `h₂ = λ·L_e(x, ẋ)·∇ψ(x)` with a Finsler energy `L_e`.
#[derive(Clone)]
pub struct EnergyScaledGeometry {
    pub lambda: f64,
    pub energy: EnergyRef,
    pub potential: Arc<dyn ScalarField>,
}

impl Geometry for EnergyScaledGeometry {
    fn dim(&self) -> usize {
        self.potential.dim()
    }
    fn h2(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        let l = self.energy.value(x, xd)?;
        Ok(self.potential.gradient(x)? * (self.lambda * l))
    }
}

/// `h₂ = f‖ẋ‖²·R·ẋ/‖ẋ‖` with `R = ±[[0, −1], [1, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexGeometry {
    pub strength: f64,
    /// `+1` for the counter-clockwise rotation `[[0, −1], [1, 0]]`, `−1` for its negation.
    pub sign: f64,
}

impl Geometry for VortexGeometry {
    fn dim(&self) -> usize {
        2
    }
    fn h2(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        check_state("vortex geometry", 2, x, xd)?;
        let speed = xd.norm();
        if speed < GENERATOR_VELOCITY_FLOOR {
            return Ok(Vector::zeros(2));
        }
        let rotated = Vector::from_column_slice(&[-xd[1], xd[0]]) * self.sign;
        Ok(rotated * (self.strength * speed))
    }
}

/// `h₂ = ‖ẋ‖²(x − target)`, i.e. the desired acceleration `‖ẋ‖²(target − x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractGeometry {
    pub target: Vector,
}

impl Geometry for AttractGeometry {
    fn dim(&self) -> usize {
        self.target.len()
    }
    fn h2(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        check_state("attract geometry", self.dim(), x, xd)?;
        Ok((x - &self.target) * xd.norm_squared())
    }
}

/// `h₂ = −‖ẋ‖²n̂`, i.e. the desired acceleration `‖ẋ‖²n̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftGeometry {
    pub normal: Vector,
}

impl Geometry for LiftGeometry {
    fn dim(&self) -> usize {
        self.normal.len()
    }
    fn h2(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        check_state("lift geometry", self.dim(), x, xd)?;
        Ok(&self.normal * (-xd.norm_squared()))
    }
}

type FieldFn = dyn Fn(&Vector, &Vector) -> Vector + Send + Sync;

/// Geometry given by a closure.
pub struct FnGeometry {
    dim: usize,
    f: Box<FieldFn>,
}

impl FnGeometry {
    pub fn new(dim: usize, f: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static) -> Self {
        Self { dim, f: Box::new(f) }
    }
}

impl Geometry for FnGeometry {
    fn dim(&self) -> usize {
        self.dim
    }
    fn h2(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        check_state("geometry", self.dim, x, xd)?;
        let h = (self.f)(x, xd);
        check_dim("geometry output", self.dim, h.len())?;
        Ok(h)
    }
}

/// Scalar potentials nameable in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialKind {
    /// `α₁/x² + α₂·log(e^{−α₃(x−α₄)} + 1)` on a 1-D distance.
    Barrier1d {
        alpha1: f64,
        alpha2: f64,
        alpha3: f64,
        alpha4: f64,
    },
    /// `k/φ²` with `φ = (‖x − c‖ − r)/r`.
    CircleBarrier { center: Vec<f64>, radius: f64, k: f64 },
    /// `½·scale·‖x − center‖²`.
    Quadratic { center: Vec<f64>, scale: f64 },
    /// `k(‖x‖ + (1/α)·log(1 + e^{−2α‖x‖}))`.
    SmoothNorm { dim: usize, k: f64, alpha: f64 },
}

pub fn make_potential(kind: &PotentialKind) -> Result<Arc<dyn ScalarField>> {
    let bad = |m: String| Err(FabricError::InvalidParameter(m));
    Ok(match kind {
        PotentialKind::Barrier1d { alpha1, alpha2, alpha3, alpha4 } => {
            if [alpha1, alpha2, alpha3, alpha4].iter().any(|a| !(**a > 0.0)) {
                return bad("barrier coefficients must be positive".into());
            }
            Arc::new(Barrier1D { alpha1: *alpha1, alpha2: *alpha2, alpha3: *alpha3, alpha4: *alpha4 })
        }
        PotentialKind::CircleBarrier { center, radius, k } => {
            if !(*radius > 0.0 && *k > 0.0) || center.is_empty() {
                return bad("circle barrier needs a center and positive radius and k".into());
            }
            Arc::new(CircleBarrier { center: Vector::from_column_slice(center), radius: *radius, k: *k })
        }
        PotentialKind::Quadratic { center, scale } => {
            if center.is_empty() || !scale.is_finite() {
                return bad("quadratic potential needs a center and finite scale".into());
            }
            Arc::new(Quadratic { center: Vector::from_column_slice(center), scale: *scale })
        }
        PotentialKind::SmoothNorm { dim, k, alpha } => {
            if *dim == 0 || !(*k > 0.0 && *alpha > 0.0) {
                return bad("smooth norm needs positive dim, k and alpha".into());
            }
            Arc::new(SmoothNorm { dim: *dim, k: *k, alpha: *alpha })
        }
    })
}

/// Catalogue of built-in generators, as named in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryKind {
    ZeroBaseline { dim: usize },
    /// `λ‖ẋ‖²∇ψ`.
    PotentialGradient { lambda: f64, potential: PotentialKind },
    /// `−M_e⁻¹f_e`.
    EnergyDerived { energy: EnergyKind },
    /// `λ·L_e·∇ψ`.
    EnergyScaled {
        lambda: f64,
        energy: EnergyKind,
        potential: PotentialKind,
    },
    /// `f‖ẋ‖²Rx̂̇`; `clockwise` selects `R = −[[0, −1], [1, 0]]`.
    Vortex { strength: f64, clockwise: bool },
    /// Desired acceleration `‖ẋ‖²(target − x)`.
    Attract { target: Vec<f64> },
    /// Desired acceleration `‖ẋ‖²n̂`.
    Lift { normal: Vec<f64> },
}

pub fn make_builtin_geometry(kind: &GeometryKind) -> Result<GeometryRef> {
    Ok(match kind {
        GeometryKind::ZeroBaseline { dim } => {
            if *dim == 0 {
                return Err(FabricError::InvalidParameter("dim must be positive".into()));
            }
            Arc::new(ZeroGeometry { dim: *dim })
        }
        GeometryKind::PotentialGradient { lambda, potential } => Arc::new(GradientGeometry {
            lambda: *lambda,
            potential: make_potential(potential)?,
        }),
        GeometryKind::EnergyDerived { energy } => Arc::new(EnergyDerivedGeometry {
            energy: make_builtin_energy(energy)?,
        }),
        GeometryKind::EnergyScaled { lambda, energy, potential } => {
            let energy = make_builtin_energy(energy)?;
            let potential = make_potential(potential)?;
            check_dim("energy-scaled geometry", potential.dim(), energy.dim())?;
            Arc::new(EnergyScaledGeometry { lambda: *lambda, energy, potential })
        }
        GeometryKind::Vortex { strength, clockwise } => Arc::new(VortexGeometry {
            strength: *strength,
            sign: if *clockwise { -1.0 } else { 1.0 },
        }),
        GeometryKind::Attract { target } => Arc::new(AttractGeometry {
            target: Vector::from_column_slice(target),
        }),
        GeometryKind::Lift { normal } => {
            let n = Vector::from_column_slice(normal);
            let norm = n.norm();
            if !(norm > 0.0) {
                return Err(FabricError::InvalidParameter("lift normal must be non-zero".into()));
            }
            Arc::new(LiftGeometry { normal: n / norm })
        }
    })
}

/// `(I − x̂̇x̂̇ᵀ)h`, the part of `h` that shapes paths.
pub fn geometric_projection(h: &Vector, xd: &Vector) -> Result<Vector> {
    check_dim("geometric projection", h.len(), xd.len())?;
    let n2 = xd.norm_squared();
    if n2 == 0.0 {
        return Err(FabricError::ZeroVelocity("geometric projection"));
    }
    Ok(h - xd * (xd.dot(h) / n2))
}

/// A generator together with the energy whose tensor prioritizes it.
#[derive(Clone)]
pub struct WeightedGeometry {
    pub generator: GeometryRef,
    pub priority: EnergyRef,
}

impl WeightedGeometry {
    pub fn new(generator: GeometryRef, priority: EnergyRef) -> Result<Self> {
        check_dim("weighted geometry", generator.dim(), priority.dim())?;
        Ok(Self { generator, priority })
    }

    /// The leaf spec `(M_e, M_e h₂)`.
    pub fn induced_spec(&self) -> InducedSpec {
        InducedSpec(self.clone())
    }
}

#[derive(Clone)]
pub struct InducedSpec(WeightedGeometry);

impl Spec for InducedSpec {
    fn dim(&self) -> usize {
        self.0.generator.dim()
    }
    fn eval(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms> {
        let metric = self.0.priority.el_terms(x, xd)?.metric;
        let force = &metric * self.0.generator.h2(x, xd)?;
        SpecTerms { metric, force }.ensure_finite(x, xd)
    }
}

/// Everything speed control needs from a fabric at one root state.
#[derive(Debug, Clone)]
pub struct FabricTerms {
    /// `M = Σ JᵀM_eJ`.
    pub metric: Matrix,
    /// `Σ JᵀM_e(h₂ + J̇q̇)`.
    pub geometry_force: Vector,
    /// `f_e = Σ Jᵀ(f_e + M_e J̇q̇)` of the system energy.
    pub energy_force: Vector,
    /// System energy `L_e`.
    pub energy: f64,
    /// System Hamiltonian `H_e`.
    pub hamiltonian: f64,
}

/// Metric-weighted combination of leaf geometries on a star-shaped tree.
#[derive(Clone)]
pub struct Fabric {
    root_dim: usize,
    components: Vec<(MapRef, WeightedGeometry)>,
    cond_cap: f64,
}

impl Fabric {
    pub fn root_dim(&self) -> usize {
        self.root_dim
    }

    pub fn components(&self) -> &[(MapRef, WeightedGeometry)] {
        &self.components
    }

    pub fn with_cond_cap(mut self, cond_cap: f64) -> Self {
        self.cond_cap = cond_cap;
        self
    }

    pub fn cond_cap(&self) -> f64 {
        self.cond_cap
    }

    pub fn terms(&self, q: &Vector, qd: &Vector) -> Result<FabricTerms> {
        check_state("fabric", self.root_dim, q, qd)?;
        let n = self.root_dim;
        let mut out = FabricTerms {
            metric: Matrix::zeros(n, n),
            geometry_force: Vector::zeros(n),
            energy_force: Vector::zeros(n),
            energy: 0.0,
            hamiltonian: 0.0,
        };
        for (map, wg) in &self.components {
            let ev = map.evaluate(q, qd)?;
            let t = wg.priority.el_terms(&ev.x, &ev.xd)?;
            let h = wg.generator.h2(&ev.x, &ev.xd)?;
            let jt = ev.jacobian.transpose();
            let mj = &t.metric * &ev.jacobian;
            let m_curv = &t.metric * &ev.curvature;
            out.metric += &jt * mj;
            out.geometry_force += &jt * (&t.metric * h + &m_curv);
            out.energy_force += &jt * (t.force + m_curv);
            out.energy += wg.priority.value(&ev.x, &ev.xd)?;
            out.hamiltonian += wg.priority.hamiltonian(&ev.x, &ev.xd)?;
        }
        SpecTerms {
            metric: out.metric.clone(),
            force: out.geometry_force.clone(),
        }
        .ensure_finite(q, qd)?;
        Ok(out)
    }

    /// Root generator `h̃₂ = M⁻¹ Σ JᵀM_e(h₂ + J̇q̇)` with solve diagnostics.
    pub fn root_h2(&self, q: &Vector, qd: &Vector) -> Result<SolveReport> {
        let t = self.terms(q, qd)?;
        solve_symmetric(&t.metric, &t.geometry_force, self.cond_cap)
    }

    /// The system energy `Σ L_e(φᵢ(q), Jᵢq̇)`.
    pub fn system_energy(&self) -> EnergySum {
        let parts = self
            .components
            .iter()
            .map(|(m, wg)| {
                Arc::new(PulledBackEnergy::new(m.clone(), wg.priority.clone()).expect("checked at construction"))
                    as EnergyRef
            })
            .collect();
        EnergySum::new(self.root_dim, parts).expect("checked at construction")
    }

    /// The root generator as a [`Geometry`].
    pub fn root_geometry(&self) -> RootGeometry {
        RootGeometry(self.clone())
    }
}

impl Spec for Fabric {
    fn dim(&self) -> usize {
        self.root_dim
    }
    fn eval(&self, q: &Vector, qd: &Vector) -> Result<SpecTerms> {
        let t = self.terms(q, qd)?;
        Ok(SpecTerms {
            metric: t.metric,
            force: t.geometry_force,
        })
    }
}

#[derive(Clone)]
pub struct RootGeometry(Fabric);

impl Geometry for RootGeometry {
    fn dim(&self) -> usize {
        self.0.root_dim
    }
    fn h2(&self, q: &Vector, qd: &Vector) -> Result<Vector> {
        Ok(self.0.root_h2(q, qd)?.solution)
    }
}

/// Combines leaf geometries into the root spec `Σ(JᵀM_eJ, JᵀM_e(h₂ + J̇q̇))`.
/// The returned [`Fabric`] also describes the system energy.
pub fn combine_weighted(components: Vec<(MapRef, WeightedGeometry)>, root_dim: usize) -> Result<Fabric> {
    if components.is_empty() {
        return Err(FabricError::Empty("combine_weighted needs at least one geometry"));
    }
    for (map, wg) in &components {
        check_dim("combine_weighted root", root_dim, map.domain_dim())?;
        check_dim("combine_weighted leaf", map.codomain_dim(), wg.generator.dim())?;
        check_dim("combine_weighted leaf", map.codomain_dim(), wg.priority.dim())?;
    }
    Ok(Fabric {
        root_dim,
        components,
        cond_cap: DEFAULT_COND_CAP,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskmap::IdentityMap;

    fn v(a: &[f64]) -> Vector {
        Vector::from_row_slice(a)
    }

    #[test]
    fn zero_baseline() {
        let g = make_builtin_geometry(&GeometryKind::ZeroBaseline { dim: 2 }).unwrap();
        assert_eq!(g.h2(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), Vector::zeros(2));
    }

    #[test]
    fn vortex_example() {
        let g = make_builtin_geometry(&GeometryKind::Vortex { strength: 1.0, clockwise: false }).unwrap();
        let h = g.h2(&v(&[0.0, 0.0]), &v(&[2.0, 0.0])).unwrap();
        assert!((h - v(&[0.0, 4.0])).norm() < 1e-15);
        assert_eq!(g.h2(&v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap(), Vector::zeros(2));
    }

    #[test]
    fn projection_examples() {
        let xd = v(&[1.0, 0.0]);
        assert_eq!(geometric_projection(&v(&[3.0, 0.0]), &xd).unwrap(), Vector::zeros(2));
        assert_eq!(geometric_projection(&v(&[0.0, 2.0]), &xd).unwrap(), v(&[0.0, 2.0]));
        assert_eq!(geometric_projection(&v(&[1.0, 1.0]), &xd).unwrap(), v(&[0.0, 1.0]));
        assert!(matches!(
            geometric_projection(&v(&[1.0, 1.0]), &v(&[0.0, 0.0])),
            Err(FabricError::ZeroVelocity(_))
        ));
    }

    #[test]
    fn single_identity_leaf_gives_minus_h2() {
        let g: GeometryRef = Arc::new(FnGeometry::new(2, |_, xd| v(&[xd[0] * xd[1], xd[0] * xd[0]])));
        let e = make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).unwrap();
        let fabric = combine_weighted(vec![(Arc::new(IdentityMap::new(2)), WeightedGeometry::new(g.clone(), e).unwrap())], 2).unwrap();
        let (q, qd) = (v(&[0.3, 0.2]), v(&[1.0, -2.0]));
        let h = fabric.root_h2(&q, &qd).unwrap().solution;
        assert!((h - g.h2(&q, &qd).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn two_leaves_average_by_priority() {
        let (a, b) = (2.0, 0.5);
        let ga: GeometryRef = Arc::new(FnGeometry::new(2, |_, xd| v(&[xd.norm_squared(), 0.0])));
        let gb: GeometryRef = Arc::new(FnGeometry::new(2, |_, xd| v(&[0.0, -xd.norm_squared()])));
        let ea = make_builtin_energy(&EnergyKind::Isotropic { dim: 2, lambda: a / 2.0 }).unwrap();
        let eb = make_builtin_energy(&EnergyKind::Isotropic { dim: 2, lambda: b / 2.0 }).unwrap();
        let id: MapRef = Arc::new(IdentityMap::new(2));
        let fabric = combine_weighted(
            vec![
                (id.clone(), WeightedGeometry::new(ga.clone(), ea).unwrap()),
                (id, WeightedGeometry::new(gb.clone(), eb).unwrap()),
            ],
            2,
        )
        .unwrap();
        let (q, qd) = (v(&[0.0, 0.0]), v(&[1.0, 1.0]));
        let acc = -fabric.root_h2(&q, &qd).unwrap().solution;
        let expect = -(ga.h2(&q, &qd).unwrap() * a + gb.h2(&q, &qd).unwrap() * b) / (a + b);
        assert!((acc - expect).norm() < 1e-14);
    }

    #[test]
    fn combine_rejects_empty_and_mismatch() {
        assert!(combine_weighted(vec![], 2).is_err());
        let g: GeometryRef = Arc::new(ZeroGeometry { dim: 2 });
        let e = make_builtin_energy(&EnergyKind::Euclidean { dim: 2, lambda: 1.0 }).unwrap();
        let r = combine_weighted(vec![(Arc::new(IdentityMap::new(2)), WeightedGeometry::new(g, e).unwrap())], 3);
        assert!(matches!(r, Err(FabricError::DimensionMismatch { .. })));
    }
}
