//! Fixed-architecture feed-forward network with a scalar output.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (`out × in`, row-major) followed by the bias. The optimiser, the
//! checkpoint format and the gradient checks all work on that flat view.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Logistic,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Tanh => v.tanh(),
            Activation::Logistic => logistic(v),
        }
    }

    /// Derivative expressed through the activation's output `a`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - a * a,
            Activation::Logistic => a * (1.0 - a),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Logistic => "logistic",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Activation::Identity),
            "tanh" => Some(Activation::Tanh),
            "logistic" => Some(Activation::Logistic),
            _ => None,
        }
    }
}

#[inline]
fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    params: Vec<f64>,
}

/// Cached layer outputs of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    acts: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Zero-initialised network. `sizes = [L, h₁, …, 1]`.
    pub fn zeros(sizes: Vec<usize>, hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::usage("network needs at least an input and an output layer"));
        }
        if sizes.contains(&0) {
            return Err(Error::usage("layer sizes must be positive"));
        }
        if *sizes.last().unwrap() != 1 {
            return Err(Error::usage("network output must be scalar"));
        }
        let count = param_count(&sizes);
        Ok(Self { sizes, hidden, output, params: vec![0.0; count] })
    }

    /// Value-function network: tanh hidden layers, logistic output,
    /// Glorot-uniform weights and zero biases.
    pub fn value_net(input_dim: usize, hidden_widths: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden_widths);
        sizes.push(1);
        let mut m = Self::zeros(sizes, Activation::Tanh, Activation::Logistic)?;
        let mut offset = 0;
        for l in 0..m.num_layers() {
            let (fan_in, fan_out) = (m.sizes[l], m.sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut m.params[offset..offset + fan_in * fan_out] {
                *w = rng.random_range(-limit..limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(m)
    }

    pub fn from_params(
        sizes: Vec<usize>,
        hidden: Activation,
        output: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut m = Self::zeros(sizes, hidden, output)?;
        if params.len() != m.params.len() {
            return Err(Error::usage(format!(
                "parameter vector has {} entries, layer sizes {:?} need {}",
                params.len(),
                m.sizes,
                m.params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::usage("parameters must be finite"));
        }
        m.params = params;
        Ok(m)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.input_dim() {
            return Err(Error::usage(format!(
                "network input has dimension {}, expected {}",
                z.len(),
                self.input_dim()
            )));
        }
        Ok(self.forward_unchecked(z))
    }

    /// Forward pass without caching; panics on a shape mismatch.
    pub fn forward_unchecked(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.input_dim(), "network input dimension");
        let widest = *self.sizes.iter().max().unwrap();
        let mut cur = Vec::with_capacity(widest);
        cur.extend_from_slice(z);
        let mut next = Vec::with_capacity(widest);
        let mut offset = 0;
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let act = if l == last { self.output } else { self.hidden };
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            next.clear();
            for o in 0..fan_out {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let s: f64 = row.iter().zip(&cur).map(|(a, x)| a * x).sum::<f64>() + b[o];
                next.push(act.apply(s));
            }
            std::mem::swap(&mut cur, &mut next);
            offset += fan_in * fan_out + fan_out;
        }
        cur[0]
    }

    /// Forward pass recording every layer output in `tape`.
    pub fn forward_tape(&self, z: &[f64], tape: &mut Tape) -> f64 {
        assert_eq!(z.len(), self.input_dim(), "network input dimension");
        tape.acts.resize_with(self.sizes.len(), Vec::new);
        tape.acts[0].clear();
        tape.acts[0].extend_from_slice(z);
        let mut offset = 0;
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let act = if l == last { self.output } else { self.hidden };
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let (before, after) = tape.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            out.clear();
            for o in 0..fan_out {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let s: f64 = row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>() + b[o];
                out.push(act.apply(s));
            }
            offset += fan_in * fan_out + fan_out;
        }
        tape.acts[self.num_layers()][0]
    }

    /// Accumulates `d_out · ∂ output / ∂ θ` into `grads`, using the pass
    /// recorded in `tape`.
    pub fn backward(&self, tape: &Tape, d_out: f64, grads: &mut [f64]) {
        assert_eq!(grads.len(), self.params.len(), "gradient buffer length");
        assert_eq!(tape.acts.len(), self.sizes.len(), "tape is not from this model");
        let layers = self.num_layers();
        let offsets = layer_offsets(&self.sizes);
        let out_a = tape.acts[layers][0];
        let mut delta = vec![d_out * self.output.derivative_from_output(out_a)];
        let mut prev_delta = Vec::new();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let offset = offsets[l];
            let input = &tape.acts[l];
            {
                let (gw, gb) = grads[offset..offset + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for o in 0..fan_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, x) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[offset..offset + fan_in * fan_out];
            prev_delta.clear();
            prev_delta.resize(fan_in, 0.0);
            for o in 0..fan_out {
                let d = delta[o];
                for (p, wv) in prev_delta.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                    *p += d * wv;
                }
            }
            for (p, a) in prev_delta.iter_mut().zip(input) {
                *p *= self.hidden.derivative_from_output(*a);
            }
            std::mem::swap(&mut delta, &mut prev_delta);
        }
    }
}

pub(crate) fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn layer_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(sizes.len() - 1);
    let mut acc = 0;
    for w in sizes.windows(2) {
        offsets.push(acc);
        acc += w[0] * w[1] + w[1];
    }
    offsets
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_half() {
        let m = MlpModel::zeros(vec![4, 20, 20, 1], Activation::Tanh, Activation::Logistic).unwrap();
        assert_eq!(m.forward(&[0.3, -1.0, 2.0, 5.0]).unwrap(), 0.5);
    }

    #[test]
    fn single_layer_closed_form() {
        let m = MlpModel::from_params(vec![1, 1], Activation::Identity, Activation::Logistic, vec![2.0, -2.0])
            .unwrap();
        assert_eq!(m.forward(&[1.0]).unwrap(), 0.5);
        let expected = 1.0 / (1.0 + (-(2.0 * 0.3 - 2.0f64)).exp());
        assert!((m.forward(&[0.3]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn output_in_open_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = MlpModel::value_net(4, &[20, 20], &mut rng).unwrap();
        for _ in 0..1000 {
            let z: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y = m.forward(&z).unwrap();
            assert!(y > 0.0 && y < 1.0);
        }
    }

    #[test]
    fn shape_errors() {
        let m = MlpModel::zeros(vec![2, 3, 1], Activation::Tanh, Activation::Logistic).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(Error::Usage(_))));
        assert!(MlpModel::zeros(vec![2, 3, 2], Activation::Tanh, Activation::Logistic).is_err());
        assert!(MlpModel::zeros(vec![2], Activation::Tanh, Activation::Logistic).is_err());
        assert!(MlpModel::from_params(vec![1, 1], Activation::Tanh, Activation::Logistic, vec![0.0]).is_err());
        assert!(
            MlpModel::from_params(vec![1, 1], Activation::Tanh, Activation::Logistic, vec![f64::NAN, 0.0]).is_err()
        );
    }

    #[test]
    fn tape_forward_matches_plain_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = MlpModel::value_net(6, &[30, 30], &mut rng).unwrap();
        let mut tape = Tape::default();
        for _ in 0..20 {
            let z: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert_eq!(m.forward_tape(&z, &mut tape), m.forward_unchecked(&z));
        }
    }

    #[test]
    fn backward_matches_finite_differences_on_tiny_net() {
        // 1 → 1 → 1 network: three parameters are exercised (w₁, b₁, w₂) plus b₂.
        let m = MlpModel::from_params(
            vec![1, 1, 1],
            Activation::Tanh,
            Activation::Logistic,
            vec![0.7, -0.2, 1.3, 0.1],
        )
        .unwrap();
        let z = [0.4];
        let mut tape = Tape::default();
        m.forward_tape(&z, &mut tape);
        let mut g = vec![0.0; 4];
        m.backward(&tape, 1.0, &mut g);
        let h = 1e-5;
        for i in 0..4 {
            let mut p = m.clone();
            p.params_mut()[i] += h;
            let up = p.forward_unchecked(&z);
            p.params_mut()[i] -= 2.0 * h;
            let down = p.forward_unchecked(&z);
            let fd = (up - down) / (2.0 * h);
            assert!(((g[i] - fd) / fd.abs().max(1e-12)).abs() < 1e-4, "param {i}: {} vs {fd}", g[i]);
        }
    }
}
