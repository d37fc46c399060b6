//! Small dense linear algebra helpers shared by the spec and energy code.

use nalgebra::SymmetricEigen;

use crate::{FabricError, Matrix, Result, State, Vector};

/// Default condition-number cap above which a ridge is added before solving.
pub const DEFAULT_COND_CAP: f64 = 1e12;

/// Asymmetry above which rollouts record a diagnostic warning.
pub const ASYMMETRY_WARNING: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vector,
    pub condition: f64,
    pub regularized: bool,
    /// Max absolute element asymmetry of the matrix before symmetrization.
    pub asymmetry: f64,
}

/// Returns `(M + Mᵀ)/2` together with the max absolute asymmetry of `M`.
pub fn symmetrize(m: &Matrix) -> (Matrix, f64) {
    let asym = (m - m.transpose()).abs().max() * 0.5;
    ((m + m.transpose()) * 0.5, asym)
}

/// Spectral condition number `|λ|max / |λ|min` of a symmetric matrix.
pub fn condition_number(sym: &Matrix) -> f64 {
    if sym.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(sym.clone());
    let abs = eig.eigenvalues.abs();
    let max = abs.max();
    let min = abs.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn is_finite_matrix(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn is_finite_vector(v: &Vector) -> bool {
    v.iter().all(|v| v.is_finite())
}

/// Solves `M x = b` for a (nominally) symmetric `M`.
///
/// The matrix is symmetrized first. When its condition number exceeds
/// `cond_cap`, the ridge `ε = 1e-10 · tr(M) / n` is added to the diagonal.
pub fn solve_symmetric(m: &Matrix, b: &Vector, cond_cap: f64) -> Result<SolveReport> {
    let n = m.nrows();
    crate::error::check_dim("solve_symmetric", n, m.ncols())?;
    crate::error::check_dim("solve_symmetric", n, b.len())?;
    if !is_finite_matrix(m) || !is_finite_vector(b) {
        return Err(FabricError::NonFinite {
            what: "linear system",
            state: State::position_only(b),
        });
    }
    let (sym, asymmetry) = symmetrize(m);
    let condition = condition_number(&sym);
    let (mat, regularized) = if condition > cond_cap {
        let eps = 1e-10 * sym.trace() / n as f64;
        (&sym + Matrix::identity(n, n) * eps, true)
    } else {
        (sym, false)
    };
    let solution = mat
        .clone()
        .lu()
        .solve(b)
        .filter(is_finite_vector)
        .ok_or_else(|| FabricError::RankDeficient {
            state: State::position_only(b),
        })?;
    Ok(SolveReport {
        solution,
        condition,
        regularized,
        asymmetry,
    })
}

/// Inverse of a symmetric matrix under the same regularization rule.
pub fn inverse_symmetric(m: &Matrix, cond_cap: f64) -> Result<Matrix> {
    let n = m.nrows();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = Vector::zeros(n);
        e[j] = 1.0;
        inv.set_column(j, &solve_symmetric(m, &e, cond_cap)?.solution);
    }
    Ok(inv)
}
