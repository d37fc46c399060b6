use super::EnergyLagrangian;
use crate::spec::SpecTerms;
use crate::{FabricError, Matrix, Result, State, Vector};

/// `(M_e, f_e)` from central differences of `L` alone.
///
/// Steps in `x` are `1e-6·(1+‖x‖)`, steps in `ẋ` for second derivatives are
/// `1e-4·(1+‖ẋ‖)`.
pub fn el_terms_fd_oracle(energy: &dyn EnergyLagrangian, x: &Vector, xd: &Vector) -> Result<SpecTerms> {
    let n = energy.dim();
    crate::error::check_state("finite-difference oracle", n, x, xd)?;
    let eval = |a: &Vector, b: &Vector| -> Result<f64> {
        match energy.value(a, b) {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(FabricError::OracleEvaluation { state: State::new(a, b) }),
        }
    };
    let hx1 = 1e-6 * (1.0 + x.norm());
    let hv2 = 1e-4 * (1.0 + xd.norm());
    let unit = |i: usize, h: f64| {
        let mut e = Vector::zeros(n);
        e[i] = h;
        e
    };

    let l0 = eval(x, xd)?;
    let mut metric = Matrix::zeros(n, n);
    for i in 0..n {
        let ei = unit(i, hv2);
        let lp = eval(x, &(xd + &ei))?;
        let lm = eval(x, &(xd - &ei))?;
        metric[(i, i)] = (lp - 2.0 * l0 + lm) / (hv2 * hv2);
        for j in 0..i {
            let ej = unit(j, hv2);
            let pp = eval(x, &(xd + &ei + &ej))?;
            let pm = eval(x, &(xd + &ei - &ej))?;
            let mp = eval(x, &(xd - &ei + &ej))?;
            let mm = eval(x, &(xd - &ei - &ej))?;
            let v = (pp - pm - mp + mm) / (4.0 * hv2 * hv2);
            metric[(i, j)] = v;
            metric[(j, i)] = v;
        }
    }

    // mixed[i][j] = ∂²L / ∂ẋ_i ∂x_j
    let mut mixed = Matrix::zeros(n, n);
    for i in 0..n {
        let vi = unit(i, hv2);
        for j in 0..n {
            let xj = unit(j, hx1);
            let pp = eval(&(x + &xj), &(xd + &vi))?;
            let pm = eval(&(x - &xj), &(xd + &vi))?;
            let mp = eval(&(x + &xj), &(xd - &vi))?;
            let mm = eval(&(x - &xj), &(xd - &vi))?;
            mixed[(i, j)] = (pp - pm - mp + mm) / (4.0 * hv2 * hx1);
        }
    }

    let mut grad_x = Vector::zeros(n);
    for j in 0..n {
        let xj = unit(j, hx1);
        grad_x[j] = (eval(&(x + &xj), xd)? - eval(&(x - &xj), xd)?) / (2.0 * hx1);
    }

    Ok(SpecTerms {
        metric,
        force: mixed * xd - grad_x,
    })
}

/// `∂L/∂ẋ` by central differences with step `1e-6·(1+‖ẋ‖)`.
pub fn fd_momentum(energy: &dyn EnergyLagrangian, x: &Vector, xd: &Vector) -> Result<Vector> {
    let n = energy.dim();
    let h = 1e-6 * (1.0 + xd.norm());
    let mut p = Vector::zeros(n);
    for i in 0..n {
        let mut a = xd.clone();
        let mut b = xd.clone();
        a[i] += h;
        b[i] -= h;
        p[i] = (energy.value(x, &a)? - energy.value(x, &b)?) / (2.0 * h);
    }
    Ok(p)
}
