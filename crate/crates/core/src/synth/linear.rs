//! Local linear design around the origin: Jacobians, an LQR-type gain, the
//! closed-loop quadratic Lyapunov matrix and the input-feasible level `c₁`.

use nalgebra::DMatrix;

use crate::dynamics::{HyperRectangle, SystemSpec};
use crate::error::{Error, Result};
use crate::value::quad_form;

const FD_STEP: f64 = 1e-6;
const MAX_ITERS: usize = 100_000;

/// Central-difference Jacobians `(A, B)` of `f` at `(0, 0)`.
pub fn linearize(sys: &SystemSpec) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, m) = (sys.n(), sys.m());
    let zero_x = vec![0.0; n];
    let zero_u = vec![0.0; m];
    let mut out = vec![0.0; n];
    sys.step_into(&zero_x, &zero_u, &mut out);
    if out.iter().any(|v| v.abs() > 1e-9) {
        return Err(Error::usage(format!("origin is not an equilibrium under u = 0: f(0, 0) = {out:?}")));
    }
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut x = zero_x.clone();
        x[j] = FD_STEP;
        sys.step_into(&x, &zero_u, &mut plus);
        x[j] = -FD_STEP;
        sys.step_into(&x, &zero_u, &mut minus);
        for i in 0..n {
            a[(i, j)] = (plus[i] - minus[i]) / (2.0 * FD_STEP);
        }
    }
    let mut b = DMatrix::zeros(n, m);
    for j in 0..m {
        let mut u = zero_u.clone();
        u[j] = FD_STEP;
        sys.step_into(&zero_x, &u, &mut plus);
        u[j] = -FD_STEP;
        sys.step_into(&zero_x, &u, &mut minus);
        for i in 0..n {
            b[(i, j)] = (plus[i] - minus[i]) / (2.0 * FD_STEP);
        }
    }
    Ok((a, b))
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// State feedback `u = Kx` from the discrete Riccati recursion with
/// identity state cost and unit input cost.
pub fn design_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::usage("A must be square and B must have as many rows as A"));
    }
    let m = b.ncols();
    let q = DMatrix::<f64>::identity(n, n);
    let r = DMatrix::<f64>::identity(m, m);
    let (at, bt) = (a.transpose(), b.transpose());
    let mut p = q.clone();
    let mut converged = false;
    for _ in 0..MAX_ITERS {
        let s = &r + &bt * &p * b;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Stabilizability("R + BᵀPB became singular".into()))?;
        let next = &at * &p * a - &at * &p * b * &s_inv * &bt * &p * a + &q;
        let change = max_abs(&(&next - &p)) / max_abs(&p).max(1e-300);
        if !next.iter().all(|v| v.is_finite()) || max_abs(&next) > 1e15 {
            return Err(Error::Stabilizability("Riccati recursion diverged".into()));
        }
        p = next;
        if change < 1e-10 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Stabilizability("Riccati recursion did not converge".into()));
    }
    let s_inv = (&r + &bt * &p * b)
        .try_inverse()
        .ok_or_else(|| Error::Stabilizability("R + BᵀPB is singular".into()))?;
    let k = -(s_inv * &bt * &p * a);
    let rho = spectral_radius(&(a + b * &k));
    if rho >= 1.0 {
        return Err(Error::Stabilizability(format!("closed loop spectral radius {rho} ≥ 1")));
    }
    Ok(k)
}

/// `P = Σ_k (Aᵀ)ᵏ Q Aᵏ` by fixed-point iteration `P ← AᵀPA + Q`.
pub fn solve_discrete_lyapunov(a_cl: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rho = spectral_radius(a_cl);
    if rho >= 1.0 {
        return Err(Error::Numeric(format!("Lyapunov solve needs a Schur-stable matrix, ρ = {rho}")));
    }
    let at = a_cl.transpose();
    let mut p = q.clone();
    for _ in 0..MAX_ITERS {
        let next = &at * &p * a_cl + q;
        p = next;
        let residual = max_abs(&(&at * &p * a_cl - &p + q));
        if residual < 1e-10 {
            let sym = (&p + p.transpose()) * 0.5;
            if sym.clone().cholesky().is_none() {
                return Err(Error::Numeric("Lyapunov solution is not positive definite".into()));
            }
            return Ok(sym);
        }
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(Error::Numeric(format!("Lyapunov iteration did not converge in {MAX_ITERS} steps")))
}

/// Largest `ν = xᵀPx` over the corners of a box (attained at a vertex).
pub fn max_quadratic_on_box(p: &DMatrix<f64>, domain: &HyperRectangle) -> f64 {
    let flat = row_major(p);
    domain.vertices().iter().map(|v| quad_form(&flat, v)).fold(0.0, f64::max)
}

/// Largest level `c` with `|K_i x| ≤ u_i^max` on `{xᵀPx ≤ c}`:
/// `c₁ = min_i (u_i^max)² / (K_i P⁻¹ K_iᵀ)`, capped at the largest `ν` on
/// `𝕏` (which also covers `K = 0`).
pub fn compute_c1(
    p: &DMatrix<f64>,
    k: &DMatrix<f64>,
    input_box: &HyperRectangle,
    domain: &HyperRectangle,
) -> Result<f64> {
    let p_inv = p
        .clone()
        .cholesky()
        .ok_or_else(|| Error::usage("P is not positive definite"))?
        .inverse();
    let mut c1 = f64::INFINITY;
    for i in 0..k.nrows() {
        let (lo, hi) = (input_box.lo()[i], input_box.hi()[i]);
        if lo > 0.0 || hi < 0.0 {
            return Err(Error::usage(format!("input box axis {i} does not contain 0")));
        }
        let u_max = hi.min(-lo);
        let row = k.row(i);
        let gain = (&row * &p_inv * row.transpose())[(0, 0)];
        if gain > 0.0 {
            c1 = c1.min(u_max * u_max / gain);
        }
    }
    Ok(c1.min(max_quadratic_on_box(p, domain)))
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}
