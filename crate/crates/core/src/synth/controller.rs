//! The piecewise controller `Π` on `D_nn` and closed-loop simulation.

use std::fmt;

use super::grid::TensorGrid;
use super::levels::Certificate;
use crate::dynamics::{SystemSpec, Trajectory};
use crate::error::{Error, Result};
use crate::pinn::{omega_nn, MlpModel};

/// Which piece of `Π` produced an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// `ω_nn ≤ ω₁` and `ν ≤ c₁`: `u = Kx`.
    Linear,
    /// `ω_nn ≤ ω₁` and `c₁ < ν ≤ c₂`: greedy in `ν`.
    Ellipsoid,
    /// `ω₁ < ω_nn ≤ ω₂`: greedy in `ω_nn`.
    ValueDescent,
}

impl Branch {
    pub fn index(self) -> u8 {
        match self {
            Branch::Linear => 1,
            Branch::Ellipsoid => 2,
            Branch::ValueDescent => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlAction {
    pub u: Vec<f64>,
    pub branch: Branch,
}

pub struct Controller<'a> {
    sys: &'a SystemSpec,
    model: &'a MlpModel,
    cert: &'a Certificate,
    inputs: TensorGrid,
}

impl<'a> Controller<'a> {
    pub fn new(sys: &'a SystemSpec, model: &'a MlpModel, cert: &'a Certificate) -> Result<Self> {
        if cert.n() != sys.n() || cert.m() != sys.m() {
            return Err(Error::usage("certificate dimensions do not match the system"));
        }
        if model.input_dim() != 2 * sys.n() {
            return Err(Error::usage("model input dimension does not match the system"));
        }
        let inputs = TensorGrid::new(sys.input_box(), cert.u_grid_resolution);
        Ok(Self { sys, model, cert, inputs })
    }

    pub fn certificate(&self) -> &Certificate {
        self.cert
    }

    pub fn omega(&self, x: &[f64]) -> f64 {
        omega_nn(self.model, x)
    }

    pub fn in_dos(&self, x: &[f64]) -> bool {
        self.sys.domain_box().contains(x) && self.omega(x) <= self.cert.omega2
    }

    /// Grid input minimising `cost(f(x, u))` among those with
    /// `cost(f(x, u)) < current` and `f(x, u) ∈ 𝕏`. Ties go to the smallest
    /// `|u|`, then to the lowest grid index.
    fn greedy(&self, x: &[f64], current: f64, cost: impl Fn(&[f64]) -> f64) -> Option<Vec<f64>> {
        let mut u = vec![0.0; self.sys.m()];
        let mut next = vec![0.0; self.sys.n()];
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        for j in 0..self.inputs.len() {
            self.inputs.node_into(j, &mut u);
            self.sys.step_into(x, &u, &mut next);
            if !self.sys.domain_box().contains(&next) {
                continue;
            }
            let c = cost(&next);
            if !(c < current) {
                continue;
            }
            let mag = u.iter().map(|v| v * v).sum::<f64>();
            let better = match &best {
                None => true,
                Some((bc, bm, _)) => c < *bc || (c == *bc && mag < *bm),
            };
            if better {
                best = Some((c, mag, u.clone()));
            }
        }
        best.map(|(_, _, u)| u)
    }

    /// Evaluates `Π(x)`; `x` must lie in `D_nn`.
    pub fn control(&self, x: &[f64]) -> Result<ControlAction> {
        if x.len() != self.sys.n() {
            return Err(Error::usage("state dimension mismatch"));
        }
        let w = self.omega(x);
        if !self.sys.domain_box().contains(x) || w > self.cert.omega2 {
            return Err(Error::usage(format!("x = {x:?} lies outside D_nn (ω_nn = {w:.6})")));
        }
        let nu = self.cert.nu(x);
        if w <= self.cert.omega1 {
            if nu <= self.cert.c1 {
                let ub = self.sys.input_box();
                let u = self
                    .cert
                    .linear_input(x)
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v.clamp(ub.lo()[i], ub.hi()[i]))
                    .collect();
                return Ok(ControlAction { u, branch: Branch::Linear });
            }
            if nu <= self.cert.c2 {
                let u = self.greedy(x, nu, |y| self.cert.nu(y)).ok_or_else(|| {
                    Error::CertificateViolation(format!("no ν-decreasing grid input at x = {x:?} (ν = {nu:.6})"))
                })?;
                return Ok(ControlAction { u, branch: Branch::Ellipsoid });
            }
            return Err(Error::CertificateViolation(format!(
                "x = {x:?} has ω_nn = {w:.6} ≤ ω1 but ν = {nu:.6} > c2"
            )));
        }
        let u = self.greedy(x, w, |y| self.omega(y)).ok_or_else(|| {
            Error::CertificateViolation(format!("no ω_nn-decreasing grid input at x = {x:?} (ω_nn = {w:.6})"))
        })?;
        Ok(ControlAction { u, branch: Branch::ValueDescent })
    }
}

/// One-shot `Π(x)`; builds the input grid on every call.
pub fn controller_pi(cert: &Certificate, model: &MlpModel, sys: &SystemSpec, x: &[f64]) -> Result<ControlAction> {
    Controller::new(sys, model, cert)?.control(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun {
    pub trajectory: Trajectory,
    /// Branch used for `inputs[k]`.
    pub branches: Vec<Branch>,
}

impl ClosedLoopRun {
    pub fn final_norm(&self) -> f64 {
        norm2(self.trajectory.last_state())
    }
}

/// A simulation that stopped on a controller error, with the steps taken so far.
#[derive(Debug)]
pub struct SimulationFailure {
    pub step: usize,
    pub source: Error,
    pub partial: ClosedLoopRun,
}

impl fmt::Display for SimulationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "closed loop failed at step {}: {}", self.step, self.source)
    }
}

impl std::error::Error for SimulationFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub const DEFAULT_STOP_TOL: f64 = 1e-3;

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Iterates `x⁺ = f(x, Π(x))` until `‖x‖₂ ≤ stop_tol` or `max_steps`.
///
/// Leaving `D_nn` after the first step is reported as a certificate
/// violation.
pub fn simulate_closed_loop(
    ctrl: &Controller<'_>,
    x0: &[f64],
    max_steps: usize,
    stop_tol: f64,
) -> Result<ClosedLoopRun, Box<SimulationFailure>> {
    let sys = ctrl.sys;
    let mut run = ClosedLoopRun {
        trajectory: Trajectory { states: vec![x0.to_vec()], inputs: Vec::new() },
        branches: Vec::new(),
    };
    let mut x = x0.to_vec();
    for step in 0..max_steps {
        if norm2(&x) <= stop_tol {
            break;
        }
        let action = match ctrl.control(&x) {
            Ok(a) => a,
            Err(Error::Usage(msg)) if step > 0 => {
                let source = Error::CertificateViolation(format!("trajectory left D_nn: {msg}"));
                return Err(Box::new(SimulationFailure { step, source, partial: run }));
            }
            Err(source) => return Err(Box::new(SimulationFailure { step, source, partial: run })),
        };
        let mut next = vec![0.0; sys.n()];
        sys.step_into(&x, &action.u, &mut next);
        run.trajectory.inputs.push(action.u);
        run.trajectory.states.push(next.clone());
        run.branches.push(action.branch);
        x = next;
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::HyperRectangle;
    use crate::pinn::Activation;

    fn scalar_sys() -> SystemSpec {
        SystemSpec::input_affine(
            "half",
            HyperRectangle::cube(1, -1.0, 1.0).unwrap(),
            HyperRectangle::cube(1, -1.0, 1.0).unwrap(),
            |x, o| o[0] = 0.5 * x[0],
            vec![0.1],
        )
        .unwrap()
    }

    /// `ω = σ(2 − 4·(tanh(x + ½) − tanh(x − ½)))`: even, increasing in `|x|`.
    fn bowl() -> MlpModel {
        MlpModel::from_params(
            vec![2, 2, 1],
            Activation::Tanh,
            Activation::Logistic,
            vec![1.0, 0.0, 1.0, 0.0, 0.5, -0.5, -4.0, 4.0, 2.0],
        )
        .unwrap()
    }

    fn cert(c2: f64) -> Certificate {
        Certificate::new(1, 1, vec![-1.0], vec![1.0], 0.04, c2, 0.2, 0.5, 11, 21).unwrap()
    }

    #[test]
    fn origin_uses_the_linear_branch() {
        let (sys, m, c) = (scalar_sys(), bowl(), cert(0.16));
        let a = controller_pi(&c, &m, &sys, &[0.0]).unwrap();
        assert_eq!(a.branch, Branch::Linear);
        assert_eq!(a.u, vec![0.0]);
        let a = controller_pi(&c, &m, &sys, &[0.15]).unwrap();
        assert_eq!(a.branch, Branch::Linear);
        assert!((a.u[0] + 0.15).abs() < 1e-15);
    }

    #[test]
    fn ellipsoid_branch_decreases_nu() {
        let (sys, m, c) = (scalar_sys(), bowl(), cert(0.16));
        let x = [0.3];
        assert!(omega_nn(&m, &x) <= c.omega1);
        let a = controller_pi(&c, &m, &sys, &x).unwrap();
        assert_eq!(a.branch, Branch::Ellipsoid);
        let next = crate::dynamics::step(&sys, &x, &a.u).unwrap();
        assert!(c.nu(&next) < c.nu(&x));
    }

    #[test]
    fn value_descent_branch_decreases_omega() {
        let (sys, m, c) = (scalar_sys(), bowl(), cert(0.16));
        for x in [0.5, -0.6, 0.75] {
            let w = omega_nn(&m, &[x]);
            assert!(w > c.omega1 && w <= c.omega2, "{x}: {w}");
            let a = controller_pi(&c, &m, &sys, &[x]).unwrap();
            assert_eq!(a.branch, Branch::ValueDescent);
            let next = crate::dynamics::step(&sys, &[x], &a.u).unwrap();
            assert!(omega_nn(&m, &next) < w);
            assert!((-1.0..=1.0).contains(&a.u[0]));
        }
    }

    #[test]
    fn outside_dos_is_a_usage_error() {
        let (sys, m, c) = (scalar_sys(), bowl(), cert(0.16));
        assert!(omega_nn(&m, &[0.99]) > c.omega2);
        assert!(matches!(controller_pi(&c, &m, &sys, &[0.99]), Err(Error::Usage(_))));
        assert!(matches!(controller_pi(&c, &m, &sys, &[1.5]), Err(Error::Usage(_))));
    }

    #[test]
    fn low_value_outside_the_ellipsoid_is_a_violation() {
        let (sys, m) = (scalar_sys(), bowl());
        let c = cert(0.05);
        assert!(matches!(controller_pi(&c, &m, &sys, &[0.3]), Err(Error::CertificateViolation(_))));
    }

    #[test]
    fn closed_loop_converges_and_labels_branches() {
        let (sys, m, c) = (scalar_sys(), bowl(), cert(0.16));
        let ctrl = Controller::new(&sys, &m, &c).unwrap();
        let run = simulate_closed_loop(&ctrl, &[0.75], 200, DEFAULT_STOP_TOL).unwrap();
        assert!(run.final_norm() <= DEFAULT_STOP_TOL);
        assert_eq!(run.branches.len(), run.trajectory.inputs.len());
        assert_eq!(run.trajectory.states.len(), run.trajectory.inputs.len() + 1);
        assert_eq!(run.branches[0], Branch::ValueDescent);
        assert_eq!(*run.branches.last().unwrap(), Branch::Linear);
        for u in &run.trajectory.inputs {
            assert!(sys.input_box().contains(u));
        }
    }

    #[test]
    fn origin_start_stops_immediately() {
        let (sys, m, c) = (scalar_sys(), bowl(), cert(0.16));
        let ctrl = Controller::new(&sys, &m, &c).unwrap();
        let run = simulate_closed_loop(&ctrl, &[0.0], 50, DEFAULT_STOP_TOL).unwrap();
        assert_eq!(run.trajectory.states, vec![vec![0.0]]);
        assert!(run.branches.is_empty());
    }

    #[test]
    fn ties_prefer_the_smallest_input() {
        let sys = scalar_sys();
        let flat = MlpModel::zeros(vec![2, 1], Activation::Tanh, Activation::Logistic).unwrap();
        let c = Certificate::new(1, 1, vec![-1.0], vec![1.0], 0.01, 0.02, 0.6, 0.7, 11, 21).unwrap();
        let ctrl = Controller::new(&sys, &flat, &c).unwrap();
        assert!(ctrl.greedy(&[0.0], 1.0, |_| 0.0).unwrap()[0].abs() < 1e-12);
    }
}
