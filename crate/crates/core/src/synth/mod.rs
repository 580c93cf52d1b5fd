//! Certification chain and controller synthesis.
//!
//! 1. Linearise at the origin, design `K`, solve for the closed-loop
//!    Lyapunov matrix `P` (with `Q = I`) and take the input-feasible level `c₁`.
//! 2. Enlarge to `c₂` on a state grid.
//! 3. With a trained `ω_nn`, search `ω₁ < ω₂` on the same grid.
//! 4. Run the piecewise controller on `D_nn = {ω_nn ≤ ω₂}`.

mod controller;
mod grid;
mod levels;
mod linear;

use nalgebra::DMatrix;

pub use controller::{
    controller_pi, norm2, simulate_closed_loop, Branch, ClosedLoopRun, ControlAction, Controller,
    SimulationFailure, DEFAULT_STOP_TOL,
};
pub use grid::TensorGrid;
pub use levels::{
    dos_grid, enlarge_c2, find_omega_levels, grid_values, log_ladder, omega_ladder, validate_certificate,
    Certificate, DosGrid, ValidationReport, C2_LADDER, OMEGA_LADDER,
};
pub use linear::{compute_c1, design_gain, linearize, max_quadratic_on_box, solve_discrete_lyapunov, spectral_radius};

use crate::dynamics::SystemSpec;
use crate::error::Result;
use crate::pinn::MlpModel;
use crate::value::AlphaFn;

/// Grid resolutions and ladder sizes for the level searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSettings {
    pub grid_resolution: usize,
    pub u_grid_resolution: usize,
    pub c2_levels: usize,
    pub omega_levels: usize,
}

impl SynthSettings {
    /// 201 nodes per axis in 2D, 41 in 3D and above; 21 per input axis.
    pub fn for_dim(n: usize) -> Self {
        Self {
            grid_resolution: if n <= 2 { 201 } else { 41 },
            u_grid_resolution: 21,
            c2_levels: C2_LADDER,
            omega_levels: OMEGA_LADDER,
        }
    }
}

/// Output of the model-independent part of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidDesign {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub closed_loop_radius: f64,
    pub c1: f64,
    pub c2: f64,
}

impl EllipsoidDesign {
    pub fn p_row_major(&self) -> Vec<f64> {
        linear::row_major(&self.p)
    }

    pub fn k_row_major(&self) -> Vec<f64> {
        linear::row_major(&self.k)
    }

    /// Running cost `α = c·ν`.
    pub fn alpha(&self, scale: f64) -> Result<AlphaFn> {
        AlphaFn::new(self.p_row_major(), self.p.nrows(), scale)
    }
}

pub fn design_ellipsoid(sys: &SystemSpec, settings: &SynthSettings) -> Result<EllipsoidDesign> {
    let (a, b) = linearize(sys)?;
    let k = design_gain(&a, &b)?;
    let a_cl = &a + &b * &k;
    let closed_loop_radius = spectral_radius(&a_cl);
    let p = solve_discrete_lyapunov(&a_cl, &DMatrix::identity(sys.n(), sys.n()))?;
    let c1 = compute_c1(&p, &k, sys.input_box(), sys.domain_box())?;
    let states = TensorGrid::new(sys.domain_box(), settings.grid_resolution);
    let inputs = TensorGrid::new(sys.input_box(), settings.u_grid_resolution);
    let c2 = enlarge_c2(sys, &linear::row_major(&p), c1, &states, &inputs, settings.c2_levels)?;
    Ok(EllipsoidDesign { a, b, k, p, closed_loop_radius, c1, c2 })
}

/// Searches `ω₁, ω₂` for a trained model and assembles the certificate.
pub fn certify(
    sys: &SystemSpec,
    model: &MlpModel,
    design: &EllipsoidDesign,
    settings: &SynthSettings,
) -> Result<Certificate> {
    let states = TensorGrid::new(sys.domain_box(), settings.grid_resolution);
    let inputs = TensorGrid::new(sys.input_box(), settings.u_grid_resolution);
    let p = design.p_row_major();
    let (omega1, omega2) = find_omega_levels(model, sys, &p, design.c2, &states, &inputs, settings.omega_levels)?;
    Certificate::new(
        sys.n(),
        sys.m(),
        design.k_row_major(),
        p,
        design.c1,
        design.c2,
        omega1,
        omega2,
        settings.grid_resolution,
        settings.u_grid_resolution,
    )
}
