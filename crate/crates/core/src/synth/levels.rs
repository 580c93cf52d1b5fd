//! Grid-based level searches: the ellipsoid enlargement `c₁ → c₂`, the
//! value-function levels `ω₁ < ω₂`, and re-validation of a certificate.
//!
//! All checks are evaluated at grid nodes only; nothing is claimed between
//! nodes.

use rayon::prelude::*;

use super::grid::TensorGrid;
use crate::dynamics::SystemSpec;
use crate::error::{Error, Result};
use crate::pinn::{omega_nn, MlpModel};
use crate::value::quad_form;

/// Levels and matrices everything downstream of certification needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    n: usize,
    m: usize,
    /// `m × n`, row-major.
    k: Vec<f64>,
    /// `n × n`, row-major, symmetric positive definite.
    p: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub grid_resolution: usize,
    pub u_grid_resolution: usize,
}

impl Certificate {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        m: usize,
        k: Vec<f64>,
        p: Vec<f64>,
        c1: f64,
        c2: f64,
        omega1: f64,
        omega2: f64,
        grid_resolution: usize,
        u_grid_resolution: usize,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::Format(format!("invalid certificate: {msg}")));
        if k.len() != m * n {
            return bad(format!("K has {} entries, expected {m}×{n}", k.len()));
        }
        if p.len() != n * n {
            return bad(format!("P has {} entries, expected {n}×{n}", p.len()));
        }
        if !(c1 > 0.0 && c1 <= c2 && c2.is_finite()) {
            return bad(format!("levels must satisfy 0 < c1 ≤ c2 (c1={c1}, c2={c2})"));
        }
        if !(0.0 < omega1 && omega1 < omega2 && omega2 < 1.0) {
            return bad(format!("levels must satisfy 0 < ω1 < ω2 < 1 (ω1={omega1}, ω2={omega2})"));
        }
        if grid_resolution < 2 || u_grid_resolution < 1 {
            return bad("grid resolutions must be positive (state grid ≥ 2)".into());
        }
        let scale = p.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (p[i * n + j] - p[j * n + i]).abs() > 1e-9 * scale {
                    return bad("P is not symmetric".into());
                }
            }
        }
        if nalgebra::DMatrix::from_row_slice(n, n, &p).cholesky().is_none() {
            return bad("P is not positive definite".into());
        }
        Ok(Self { n, m, k, p, c1, c2, omega1, omega2, grid_resolution, u_grid_resolution })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// `ν(x) = xᵀPx`.
    pub fn nu(&self, x: &[f64]) -> f64 {
        quad_form(&self.p, x)
    }

    /// `Kx`.
    pub fn linear_input(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| self.k[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// `true` if some grid input strictly decreases `cost` and keeps the
/// successor inside `𝕏`.
pub(crate) fn exists_decrease(
    sys: &SystemSpec,
    x: &[f64],
    inputs: &TensorGrid,
    current: f64,
    cost: impl Fn(&[f64]) -> f64,
) -> bool {
    let mut u = vec![0.0; sys.m()];
    let mut next = vec![0.0; sys.n()];
    (0..inputs.len()).any(|j| {
        inputs.node_into(j, &mut u);
        sys.step_into(x, &u, &mut next);
        sys.domain_box().contains(&next) && cost(&next) < current
    })
}

/// Number of log-spaced candidate levels for `c₂`.
pub const C2_LADDER: usize = 200;
/// Number of linear candidate levels for `ω₁`, `ω₂`.
pub const OMEGA_LADDER: usize = 100;

/// `levels` log-spaced values from `lo` to `hi` inclusive.
pub fn log_ladder(lo: f64, hi: f64, levels: usize) -> Vec<f64> {
    if levels < 2 || hi <= lo {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    (0..levels).map(|i| lo * (ratio * i as f64 / (levels - 1) as f64).exp()).collect()
}

/// `k/(levels+1)` for `k = 1..=levels`.
pub fn omega_ladder(levels: usize) -> Vec<f64> {
    (1..=levels).map(|k| k as f64 / (levels + 1) as f64).collect()
}

/// Largest ladder level `c₂ ≥ c₁` such that every grid node with
/// `c₁ ≤ ν ≤ c₂` has a grid input decreasing `ν` while staying in `𝕏`.
pub fn enlarge_c2(
    sys: &SystemSpec,
    p: &[f64],
    c1: f64,
    states: &TensorGrid,
    inputs: &TensorGrid,
    levels: usize,
) -> Result<f64> {
    if !(c1 > 0.0) {
        return Err(Error::usage(format!("c1 must be positive, got {c1}")));
    }
    let nu_max = sys.domain_box().vertices().iter().map(|v| quad_form(p, v)).fold(0.0, f64::max);
    let ladder = log_ladder(c1, nu_max, levels);
    // Smallest ν among nodes of the band that fail the decrease check.
    let first_failure = (0..states.len())
        .into_par_iter()
        .filter_map(|i| {
            let x = states.node(i);
            let nu = quad_form(p, &x);
            if nu < c1 || exists_decrease(sys, &x, inputs, nu, |y| quad_form(p, y)) {
                None
            } else {
                Some(nu)
            }
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(ladder.into_iter().take_while(|&c| c < first_failure).last().unwrap_or(c1).max(c1))
}

/// `ω_nn` at every node of `grid`, in node order.
pub fn grid_values(model: &MlpModel, grid: &TensorGrid) -> Vec<f64> {
    (0..grid.len()).into_par_iter().map(|i| omega_nn(model, &grid.node(i))).collect()
}

/// Grid search for `ω₁ < ω₂`:
/// (i) every node with `ω_nn ≤ ω₁` has `ν ≤ c₂`;
/// (ii) every node with `ω₁ ≤ ω_nn ≤ ω₂` has a grid input that strictly
/// decreases `ω_nn` and keeps the successor in `𝕏`.
pub fn find_omega_levels(
    model: &MlpModel,
    sys: &SystemSpec,
    p: &[f64],
    c2: f64,
    states: &TensorGrid,
    inputs: &TensorGrid,
    levels: usize,
) -> Result<(f64, f64)> {
    let values = grid_values(model, states);
    let ladder = omega_ladder(levels);

    let outside_min = (0..states.len())
        .into_par_iter()
        .filter(|&i| quad_form(p, &states.node(i)) > c2)
        .map(|i| values[i])
        .reduce(|| f64::INFINITY, f64::min);
    let omega1 = ladder[..ladder.len().saturating_sub(1)]
        .iter()
        .copied()
        .take_while(|&w| w < outside_min)
        .last()
        .ok_or_else(|| {
            Error::Certification(format!(
                "condition (i): a node outside E_c2 already has ω_nn = {outside_min:.4}, below every candidate ω1"
            ))
        })?;
    let global_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(global_min <= omega1) {
        return Err(Error::Certification(format!(
            "condition (i): no grid node has ω_nn ≤ ω1 = {omega1:.4} (smallest value {global_min:.4}), so the ω1 sublevel set is empty"
        )));
    }

    let band_failure = (0..states.len())
        .into_par_iter()
        .filter(|&i| values[i] >= omega1)
        .filter_map(|i| {
            let x = states.node(i);
            let decreasing = exists_decrease(sys, &x, inputs, values[i], |y| omega_nn(model, y));
            (!decreasing).then_some(values[i])
        })
        .reduce(|| f64::INFINITY, f64::min);
    let omega2 = ladder
        .iter()
        .copied()
        .filter(|&w| w > omega1)
        .take_while(|&w| w < band_failure)
        .last()
        .ok_or_else(|| {
            Error::Certification(format!(
                "condition (ii): no ω_nn-decreasing input at a node with ω_nn = {band_failure:.4}, \
                 leaving no level above ω1 = {omega1:.4}"
            ))
        })?;
    Ok((omega1, omega2))
}

/// `ω_nn` on the state grid and the `D_nn` mask `ω_nn ≤ ω₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct DosGrid {
    pub grid: TensorGrid,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub omega2: f64,
}

impl DosGrid {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn area(&self) -> f64 {
        self.count() as f64 * self.grid.cell_measure()
    }
}

pub fn dos_grid(model: &MlpModel, sys: &SystemSpec, omega2: f64, resolution: usize) -> DosGrid {
    let grid = TensorGrid::new(sys.domain_box(), resolution);
    let values = grid_values(model, &grid);
    let mask = values.iter().map(|v| *v <= omega2).collect();
    DosGrid { grid, values, mask, omega2 }
}

/// Outcome of re-checking every grid condition of a certificate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub nodes: usize,
    /// Nodes in `E_c₁` where `Kx ∉ U`.
    pub c1_violations: usize,
    /// Nodes with `c₁ ≤ ν ≤ c₂` lacking a `ν`-decreasing input.
    pub c2_violations: usize,
    /// Nodes with `ω_nn ≤ ω₁` but `ν > c₂`.
    pub omega1_violations: usize,
    /// Nodes with `ω₁ ≤ ω_nn ≤ ω₂` lacking an `ω_nn`-decreasing input.
    pub omega2_violations: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.c1_violations + self.c2_violations + self.omega1_violations + self.omega2_violations == 0
    }
}

/// Re-evaluates all four grid conditions on the certificate's own grids.
pub fn validate_certificate(sys: &SystemSpec, model: &MlpModel, cert: &Certificate) -> Result<ValidationReport> {
    if cert.n() != sys.n() || cert.m() != sys.m() {
        return Err(Error::usage("certificate dimensions do not match the system"));
    }
    if model.input_dim() != 2 * sys.n() {
        return Err(Error::usage("model input dimension does not match the system"));
    }
    let states = TensorGrid::new(sys.domain_box(), cert.grid_resolution);
    let inputs = TensorGrid::new(sys.input_box(), cert.u_grid_resolution);
    let counts = (0..states.len())
        .into_par_iter()
        .map(|i| {
            let x = states.node(i);
            let nu = cert.nu(&x);
            let w = omega_nn(model, &x);
            let mut r = [0usize; 4];
            if nu <= cert.c1 && !sys.input_box().contains_tol(&cert.linear_input(&x), 1e-9) {
                r[0] = 1;
            }
            if nu >= cert.c1 && nu <= cert.c2 && !exists_decrease(sys, &x, &inputs, nu, |y| cert.nu(y)) {
                r[1] = 1;
            }
            if w <= cert.omega1 && nu > cert.c2 {
                r[2] = 1;
            }
            if w >= cert.omega1
                && w <= cert.omega2
                && !exists_decrease(sys, &x, &inputs, w, |y| omega_nn(model, y))
            {
                r[3] = 1;
            }
            r
        })
        .reduce(|| [0; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
    Ok(ValidationReport {
        nodes: states.len(),
        c1_violations: counts[0],
        c2_violations: counts[1],
        omega1_violations: counts[2],
        omega2_violations: counts[3],
    })
}
