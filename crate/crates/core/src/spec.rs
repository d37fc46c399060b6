//! Specs `(M, f)`, their algebra and star-shaped transform trees.

use std::sync::Arc;

use crate::error::{check_dim, check_state};
use crate::linalg::{is_finite_matrix, is_finite_vector, solve_symmetric, SolveReport, DEFAULT_COND_CAP};
use crate::taskmap::{MapEval, MapRef};
use crate::{FabricError, Matrix, Result, State, Vector};

/// Metric and force of a spec evaluated at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecTerms {
    pub metric: Matrix,
    pub force: Vector,
}

impl SpecTerms {
    pub fn zeros(dim: usize) -> Self {
        Self {
            metric: Matrix::zeros(dim, dim),
            force: Vector::zeros(dim),
        }
    }

    pub(crate) fn ensure_finite(self, x: &Vector, xd: &Vector) -> Result<Self> {
        if !is_finite_matrix(&self.metric) {
            return Err(FabricError::NonFinite {
                what: "metric",
                state: State::new(x, xd),
            });
        }
        if !is_finite_vector(&self.force) {
            return Err(FabricError::NonFinite {
                what: "force",
                state: State::new(x, xd),
            });
        }
        Ok(self)
    }

    /// Pulls these leaf terms back through a map evaluation:
    /// `(JᵀMJ, Jᵀ(f + M J̇q̇))`.
    pub fn pulled_back(&self, eval: &MapEval) -> Self {
        let jt = eval.jacobian.transpose();
        Self {
            metric: &jt * &self.metric * &eval.jacobian,
            force: jt * (&self.force + &self.metric * &eval.curvature),
        }
    }
}

/// A second-order system `M(x, ẋ) ẍ + f(x, ẋ) = 0`.
pub trait Spec: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms>;

    fn metric(&self, x: &Vector, xd: &Vector) -> Result<Matrix> {
        Ok(self.eval(x, xd)?.metric)
    }

    fn force(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        Ok(self.eval(x, xd)?.force)
    }
}

pub type SpecRef = Arc<dyn Spec>;

type TermFn<T> = dyn Fn(&Vector, &Vector) -> T + Send + Sync;

/// Spec given by a pair of closures.
pub struct FnSpec {
    dim: usize,
    metric: Box<TermFn<Matrix>>,
    force: Box<TermFn<Vector>>,
}

impl FnSpec {
    pub fn new(
        dim: usize,
        metric: impl Fn(&Vector, &Vector) -> Matrix + Send + Sync + 'static,
        force: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            metric: Box::new(metric),
            force: Box::new(force),
        }
    }

    /// Constant metric with zero force.
    pub fn constant(metric: Matrix) -> Self {
        let dim = metric.nrows();
        Self::new(dim, move |_, _| metric.clone(), move |_, _| Vector::zeros(dim))
    }
}

impl Spec for FnSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms> {
        check_state("spec", self.dim, x, xd)?;
        let metric = (self.metric)(x, xd);
        let force = (self.force)(x, xd);
        check_dim("spec metric", self.dim, metric.nrows())?;
        check_dim("spec metric", self.dim, metric.ncols())?;
        check_dim("spec force", self.dim, force.len())?;
        SpecTerms { metric, force }.ensure_finite(x, xd)
    }
}

/// Pointwise sum of specs on one space.
#[derive(Clone)]
pub struct SpecSum {
    dim: usize,
    parts: Vec<SpecRef>,
}

impl SpecSum {
    pub fn new(dim: usize, parts: Vec<SpecRef>) -> Result<Self> {
        for p in &parts {
            check_dim("spec sum", dim, p.dim())?;
        }
        Ok(Self { dim, parts })
    }

    pub fn parts(&self) -> &[SpecRef] {
        &self.parts
    }
}

impl Spec for SpecSum {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms> {
        check_state("spec sum", self.dim, x, xd)?;
        let mut acc = SpecTerms::zeros(self.dim);
        for p in &self.parts {
            let t = p.eval(x, xd)?;
            acc.metric += t.metric;
            acc.force += t.force;
        }
        Ok(acc)
    }
}

/// `a + b`.
pub fn spec_sum(a: SpecRef, b: SpecRef) -> Result<SpecSum> {
    check_dim("spec sum", a.dim(), b.dim())?;
    SpecSum::new(a.dim(), vec![a, b])
}

/// Covariant pullback of a spec through a task map.
#[derive(Clone)]
pub struct Pullback {
    map: MapRef,
    spec: SpecRef,
}

impl Pullback {
    pub fn map(&self) -> &MapRef {
        &self.map
    }

    pub fn leaf(&self) -> &SpecRef {
        &self.spec
    }
}

impl Spec for Pullback {
    fn dim(&self) -> usize {
        self.map.domain_dim()
    }

    fn eval(&self, q: &Vector, qd: &Vector) -> Result<SpecTerms> {
        let eval = self.map.evaluate(q, qd)?;
        let leaf = self.spec.eval(&eval.x, &eval.xd)?;
        Ok(leaf.pulled_back(&eval))
    }
}

/// `(JᵀMJ, Jᵀ(f + M J̇q̇))` with `M, f` evaluated at `(φ(q), Jq̇)`.
pub fn pullback(map: MapRef, spec: SpecRef) -> Result<Pullback> {
    check_dim("pullback", map.codomain_dim(), spec.dim())?;
    Ok(Pullback { map, spec })
}

/// Star-shaped transform tree: every leaf hangs directly off the root.
#[derive(Clone)]
pub struct TransformTree {
    root_dim: usize,
    leaves: Vec<(MapRef, SpecRef)>,
}

impl TransformTree {
    pub fn new(root_dim: usize) -> Self {
        Self {
            root_dim,
            leaves: Vec::new(),
        }
    }

    pub fn root_dim(&self) -> usize {
        self.root_dim
    }

    pub fn leaves(&self) -> &[(MapRef, SpecRef)] {
        &self.leaves
    }

    pub fn add_leaf(&mut self, map: MapRef, spec: SpecRef) -> Result<()> {
        check_dim("transform tree leaf", self.root_dim, map.domain_dim())?;
        check_dim("transform tree leaf", map.codomain_dim(), spec.dim())?;
        self.leaves.push((map, spec));
        Ok(())
    }

    pub fn with_leaf(mut self, map: MapRef, spec: SpecRef) -> Result<Self> {
        self.add_leaf(map, spec)?;
        Ok(self)
    }

    /// Root spec `Σᵢ pullback(φᵢ, specᵢ)`.
    pub fn resolve(&self) -> Result<SpecSum> {
        if self.leaves.is_empty() {
            return Err(FabricError::EmptyTree);
        }
        let parts = self
            .leaves
            .iter()
            .map(|(m, s)| pullback(m.clone(), s.clone()).map(|p| Arc::new(p) as SpecRef))
            .collect::<Result<Vec<_>>>()?;
        SpecSum::new(self.root_dim, parts)
    }
}

/// Free-function form of [`TransformTree::resolve`].
pub fn tree_resolve(tree: &TransformTree) -> Result<SpecSum> {
    tree.resolve()
}

/// A spec viewed through its acceleration `a = −M⁻¹f`.
#[derive(Clone)]
pub struct CanonicalSpec {
    spec: SpecRef,
    cond_cap: f64,
}

impl CanonicalSpec {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn cond_cap(&self) -> f64 {
        self.cond_cap
    }

    pub fn metric(&self, x: &Vector, xd: &Vector) -> Result<Matrix> {
        self.spec.metric(x, xd)
    }

    pub fn acceleration(&self, x: &Vector, xd: &Vector) -> Result<Vector> {
        Ok(self.solve(x, xd)?.solution)
    }

    /// Acceleration together with the linear solve diagnostics.
    pub fn solve(&self, x: &Vector, xd: &Vector) -> Result<SolveReport> {
        let t = self.spec.eval(x, xd)?.ensure_finite(x, xd)?;
        solve_symmetric(&t.metric, &(-t.force), self.cond_cap).map_err(|e| match e {
            FabricError::RankDeficient { .. } => FabricError::RankDeficient {
                state: State::new(x, xd),
            },
            other => other,
        })
    }

    /// Back to force form `(M, −M a)`.
    pub fn to_spec(&self) -> NaturalForm {
        NaturalForm(self.clone())
    }
}

/// Force form reconstructed from a [`CanonicalSpec`].
#[derive(Clone)]
pub struct NaturalForm(CanonicalSpec);

impl Spec for NaturalForm {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: &Vector, xd: &Vector) -> Result<SpecTerms> {
        let metric = self.0.metric(x, xd)?;
        let a = self.0.acceleration(x, xd)?;
        let force = -(&metric * a);
        Ok(SpecTerms { metric, force })
    }
}

pub fn to_canonical(spec: SpecRef, cond_cap: f64) -> CanonicalSpec {
    CanonicalSpec { spec, cond_cap }
}

pub fn to_canonical_default(spec: SpecRef) -> CanonicalSpec {
    to_canonical(spec, DEFAULT_COND_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskmap::{AffineMap, IdentityMap};

    fn v(a: &[f64]) -> Vector {
        Vector::from_row_slice(a)
    }

    fn diag_spec(d: &[f64], f: &[f64]) -> SpecRef {
        let m = Matrix::from_diagonal(&v(d));
        let f = v(f);
        Arc::new(FnSpec::new(d.len(), move |_, _| m.clone(), move |_, _| f.clone()))
    }

    #[test]
    fn sum_of_identities() {
        let s = spec_sum(diag_spec(&[1.0, 1.0], &[0.0, 0.0]), diag_spec(&[1.0, 1.0], &[0.0, 0.0])).unwrap();
        let t = s.eval(&v(&[0.3, 0.1]), &v(&[1.0, 2.0])).unwrap();
        assert_eq!(t.metric, Matrix::identity(2, 2) * 2.0);
        assert_eq!(t.force, Vector::zeros(2));
    }

    #[test]
    fn sum_is_elementwise() {
        let s = spec_sum(diag_spec(&[1.0, 2.0], &[1.0, 0.0]), diag_spec(&[3.0, 1.0], &[0.0, 2.0])).unwrap();
        let t = s.eval(&v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap();
        assert_eq!(t.metric, Matrix::from_diagonal(&v(&[4.0, 3.0])));
        assert_eq!(t.force, v(&[1.0, 2.0]));
    }

    #[test]
    fn sum_rejects_dimension_mismatch() {
        let r = spec_sum(diag_spec(&[1.0], &[0.0]), diag_spec(&[1.0, 1.0], &[0.0, 0.0]));
        assert!(matches!(r, Err(FabricError::DimensionMismatch { .. })));
    }

    #[test]
    fn canonical_examples() {
        let c = to_canonical_default(diag_spec(&[1.0, 1.0], &[0.5, -2.0]));
        assert_eq!(c.acceleration(&v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap(), v(&[-0.5, 2.0]));
        let c = to_canonical_default(diag_spec(&[2.0, 2.0], &[2.0, 0.0]));
        assert_eq!(c.acceleration(&v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap(), v(&[-1.0, 0.0]));
    }

    #[test]
    fn canonical_reports_non_finite_with_state() {
        let c = to_canonical_default(diag_spec(&[1.0, f64::NAN], &[0.0, 0.0]));
        match c.acceleration(&v(&[1.0, 2.0]), &v(&[0.0, 0.0])) {
            Err(FabricError::NonFinite { state, .. }) => assert_eq!(state.position, vec![1.0, 2.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_pullback_is_unchanged() {
        let s = diag_spec(&[2.0, 3.0], &[1.0, -1.0]);
        let p = pullback(Arc::new(IdentityMap::new(2)), s.clone()).unwrap();
        let x = v(&[0.2, 0.4]);
        let xd = v(&[1.0, 0.5]);
        assert_eq!(p.eval(&x, &xd).unwrap(), s.eval(&x, &xd).unwrap());
    }

    #[test]
    fn linear_pullback() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let s = diag_spec(&[2.0, 3.0], &[1.0, -1.0]);
        let p = pullback(Arc::new(AffineMap::linear(a.clone())), s).unwrap();
        let t = p.eval(&v(&[0.2, 0.4]), &v(&[1.0, 0.5])).unwrap();
        let m = Matrix::from_diagonal(&v(&[2.0, 3.0]));
        assert_eq!(t.metric, a.transpose() * &m * &a);
        assert_eq!(t.force, a.transpose() * v(&[1.0, -1.0]));
    }

    #[test]
    fn empty_tree_is_rejected() {
        assert!(matches!(TransformTree::new(2).resolve(), Err(FabricError::EmptyTree)));
    }

    #[test]
    fn tree_with_two_identical_leaves_doubles_metric() {
        let s = diag_spec(&[1.0, 2.0], &[0.5, 0.5]);
        let id: MapRef = Arc::new(IdentityMap::new(2));
        let tree = TransformTree::new(2)
            .with_leaf(id.clone(), s.clone())
            .unwrap()
            .with_leaf(id, s)
            .unwrap();
        let t = tree.resolve().unwrap().eval(&v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap();
        assert_eq!(t.metric, Matrix::from_diagonal(&v(&[2.0, 4.0])));
        assert_eq!(t.force, v(&[1.0, 1.0]));
    }

    #[test]
    fn tree_rejects_wrong_domain() {
        let mut tree = TransformTree::new(3);
        let r = tree.add_leaf(Arc::new(IdentityMap::new(2)), diag_spec(&[1.0, 1.0], &[0.0, 0.0]));
        assert!(r.is_err());
    }
}
