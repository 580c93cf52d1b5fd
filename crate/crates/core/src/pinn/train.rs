use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{CollocationPoint, DataPoint, ValueDataset};
use super::loss::{composite_loss, composite_loss_grad, LossBreakdown, LossWeights};
use super::mlp::MlpModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lambda_d: f64,
    pub lambda_pi: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lambda_d: 0.1, lambda_pi: 1.0, epochs: 300, batch_size: 256, learning_rate: 1e-3, seed: 0 }
    }
}

impl TrainConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights { lambda_d: self.lambda_d, lambda_pi: self.lambda_pi }
    }

    fn validate(&self, ds: &ValueDataset) -> Result<()> {
        if !(self.lambda_d > 0.0 && self.lambda_pi > 0.0) {
            return Err(Error::usage("loss weights must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::usage("learning rate must be positive"));
        }
        let largest = ds.data.len().max(ds.colloc.len());
        if self.batch_size == 0 || self.batch_size > largest {
            return Err(Error::usage(format!(
                "batch size {} must be in 1..={largest}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Losses over the full dataset after one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub data: f64,
    pub physics: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Full-dataset loss before the first update.
    pub initial: LossBreakdown,
    pub epochs: Vec<EpochLoss>,
}

impl TrainHistory {
    pub fn final_total(&self) -> f64 {
        self.epochs.last().map_or(self.initial.total, |e| e.total)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(len: usize, lr: f64) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0, lr }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Mini-batch Adam on `λ_d·L_d + λ_pi·L_pi`.
///
/// Each epoch visits every data and collocation point once: both sets are
/// shuffled and split into the same number of batches,
/// `⌈max(N_d, N_pi) / batch_size⌉`. Single-threaded, so a fixed seed gives
/// bit-identical parameters.
pub fn train(model: &MlpModel, ds: &ValueDataset, cfg: &TrainConfig) -> Result<(MlpModel, TrainHistory)> {
    if ds.data.is_empty() && ds.colloc.is_empty() {
        return Err(Error::usage("training dataset is empty"));
    }
    if model.input_dim() != 2 * ds.n {
        return Err(Error::usage(format!(
            "network input dimension {} does not match embedding dimension {}",
            model.input_dim(),
            2 * ds.n
        )));
    }
    cfg.validate(ds)?;
    let w = cfg.weights();
    let all_data: Vec<&DataPoint> = ds.data.iter().collect();
    let all_colloc: Vec<&CollocationPoint> = ds.colloc.iter().collect();
    let initial = composite_loss(model, &all_data, &all_colloc, w);
    if !initial.total.is_finite() {
        return Err(Error::Training { epoch: 0, reason: "initial loss is not finite".into() });
    }

    let mut model = model.clone();
    let mut opt = Adam::new(model.params().len(), cfg.learning_rate);
    let mut grads = vec![0.0; model.params().len()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut data_order: Vec<usize> = (0..ds.data.len()).collect();
    let mut colloc_order: Vec<usize> = (0..ds.colloc.len()).collect();
    let batches = ds.data.len().max(ds.colloc.len()).div_ceil(cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut data_batch = Vec::new();
    let mut colloc_batch = Vec::new();

    for epoch in 1..=cfg.epochs {
        data_order.shuffle(&mut rng);
        colloc_order.shuffle(&mut rng);
        for b in 0..batches {
            let span = |len: usize| (b * len / batches)..((b + 1) * len / batches);
            data_batch.clear();
            data_batch.extend(data_order[span(ds.data.len())].iter().map(|&i| &ds.data[i]));
            colloc_batch.clear();
            colloc_batch.extend(colloc_order[span(ds.colloc.len())].iter().map(|&i| &ds.colloc[i]));
            let l = composite_loss_grad(&model, &data_batch, &colloc_batch, w, &mut grads);
            if !l.total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training { epoch, reason: format!("non-finite loss in batch {b}") });
            }
            opt.step(model.params_mut(), &grads);
        }
        let l = composite_loss(&model, &all_data, &all_colloc, w);
        if !l.total.is_finite() {
            return Err(Error::Training { epoch, reason: "non-finite epoch loss".into() });
        }
        history.push(EpochLoss { epoch, data: l.data, physics: l.physics, total: l.total });
    }
    Ok((model, TrainHistory { initial, epochs: history }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::make_system_2d;
    use crate::pinn::generate_dataset;
    use crate::value::{AlphaFn, ValueParams};

    fn small() -> (MlpModel, ValueDataset) {
        let sys = make_system_2d();
        let a = AlphaFn::identity(2, 1.0).unwrap();
        let vp = ValueParams::new(10, 20, 1).unwrap();
        let ds = generate_dataset(&sys, &a, &vp, 64, 128, 2).unwrap();
        let m = MlpModel::value_net(4, &[8, 8], &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        (m, ds)
    }

    #[test]
    fn zero_epochs_is_identity() {
        let (m, ds) = small();
        let cfg = TrainConfig { epochs: 0, batch_size: 32, ..Default::default() };
        let (out, hist) = train(&m, &ds, &cfg).unwrap();
        assert_eq!(out, m);
        assert!(hist.epochs.is_empty());
    }

    #[test]
    fn deterministic_and_decreasing() {
        let (m, ds) = small();
        let cfg = TrainConfig { epochs: 30, batch_size: 32, learning_rate: 1e-2, ..Default::default() };
        let (a, ha) = train(&m, &ds, &cfg).unwrap();
        let (b, _) = train(&m, &ds, &cfg).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(ha.epochs.len(), 30);
        assert!(ha.final_total() <= ha.initial.total);
    }

    #[test]
    fn rejects_bad_config() {
        let (m, ds) = small();
        for cfg in [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { batch_size: 1000, ..Default::default() },
            TrainConfig { lambda_d: 0.0, batch_size: 32, ..Default::default() },
            TrainConfig { learning_rate: -1.0, batch_size: 32, ..Default::default() },
        ] {
            assert!(matches!(train(&m, &ds, &cfg), Err(Error::Usage(_))));
        }
    }

    #[test]
    fn reports_divergence_with_epoch() {
        let (m, ds) = small();
        let cfg = TrainConfig { epochs: 3, batch_size: 32, learning_rate: f64::MAX, ..Default::default() };
        match train(&m, &ds, &cfg) {
            Err(Error::Training { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected a training error, got {other:?}"),
        }
    }
}
