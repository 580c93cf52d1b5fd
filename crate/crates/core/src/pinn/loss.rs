use super::dataset::{CollocationPoint, DataPoint};
use super::embed::embed_singleton_into;
use super::mlp::{MlpModel, Tape};
use crate::value::zubov_residual;

/// `(target − ω_nn(x))²`.
pub fn loss_data(m: &MlpModel, x: &[f64], target: f64) -> f64 {
    let r = target - super::omega_nn(m, x);
    r * r
}

/// Squared Zubov residual `(w_x − w_Fx − ξ(1 − w_Fx))²`.
pub fn loss_pi(m: &MlpModel, z_x: &[f64], z_fx: &[f64], xi_x: f64) -> f64 {
    let r = zubov_residual(m.forward_unchecked(z_x), m.forward_unchecked(z_fx), xi_x);
    r * r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_d: f64,
    pub lambda_pi: f64,
}

/// Batch means of both terms and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub data: f64,
    pub physics: f64,
    pub total: f64,
}

fn mean_or_zero(sum: f64, count: usize) -> f64 {
    if count == 0 { 0.0 } else { sum / count as f64 }
}

/// Composite loss over the given points, without gradients.
pub fn composite_loss(
    m: &MlpModel,
    data: &[&DataPoint],
    colloc: &[&CollocationPoint],
    w: LossWeights,
) -> LossBreakdown {
    let d: f64 = data.iter().map(|p| loss_data(m, &p.x, p.target)).sum();
    let pi: f64 = colloc.iter().map(|p| loss_pi(m, &p.z_x, &p.z_fx, p.xi)).sum();
    let (data, physics) = (mean_or_zero(d, data.len()), mean_or_zero(pi, colloc.len()));
    LossBreakdown { data, physics, total: w.lambda_d * data + w.lambda_pi * physics }
}

/// Composite loss and its gradient, accumulated into `grads` (zeroed here).
pub fn composite_loss_grad(
    m: &MlpModel,
    data: &[&DataPoint],
    colloc: &[&CollocationPoint],
    w: LossWeights,
    grads: &mut [f64],
) -> LossBreakdown {
    grads.iter_mut().for_each(|g| *g = 0.0);
    let mut tape = Tape::default();
    let mut tape_f = Tape::default();
    let mut z = vec![0.0; m.input_dim()];

    let mut d_sum = 0.0;
    if !data.is_empty() {
        let scale = w.lambda_d / data.len() as f64;
        for p in data {
            embed_singleton_into(&p.x, &mut z);
            let y = m.forward_tape(&z, &mut tape);
            let r = y - p.target;
            d_sum += r * r;
            m.backward(&tape, scale * 2.0 * r, grads);
        }
    }

    let mut pi_sum = 0.0;
    if !colloc.is_empty() {
        let scale = w.lambda_pi / colloc.len() as f64;
        for p in colloc {
            let wx = m.forward_tape(&p.z_x, &mut tape);
            let wf = m.forward_tape(&p.z_fx, &mut tape_f);
            let r = zubov_residual(wx, wf, p.xi);
            pi_sum += r * r;
            m.backward(&tape, scale * 2.0 * r, grads);
            m.backward(&tape_f, -scale * 2.0 * r * (1.0 - p.xi), grads);
        }
    }

    let (data, physics) = (mean_or_zero(d_sum, data.len()), mean_or_zero(pi_sum, colloc.len()));
    LossBreakdown { data, physics, total: w.lambda_d * data + w.lambda_pi * physics }
}
