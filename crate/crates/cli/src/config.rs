//! Run configuration: a flat TOML table with a fixed schema.

use std::path::{Path, PathBuf};

use doskit::dynamics::{make_system_2d, make_system_3d};
use doskit::pinn::TrainConfig;
use doskit::synth::{SynthSettings, C2_LADDER, OMEGA_LADDER};
use doskit::value::{SignalModel, ValueParams};
use doskit::SystemSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemChoice {
    #[serde(rename = "builtin-2d")]
    Builtin2d,
    #[serde(rename = "builtin-3d")]
    Builtin3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalChoice {
    Uniform,
    Piecewise,
}

/// Every key is optional; omitted keys take the 2D defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemChoice,
    pub n_s: usize,
    pub n_traj: usize,
    pub n_d: usize,
    pub n_pi: usize,
    /// 0 picks 0.1 (2D) or 0.03 (3D).
    pub alpha_scale: f64,
    pub signal: SignalChoice,
    pub switch_prob: f64,
    pub seed: u64,

    /// Hidden-layer widths; empty picks two layers of 20 (2D) or 30 (3D).
    pub hidden: Vec<usize>,
    pub lambda_d: f64,
    pub lambda_pi: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,

    /// 0 picks the per-dimension default.
    pub grid_resolution: usize,
    pub u_grid_resolution: usize,
    pub c2_levels: usize,
    pub omega_levels: usize,

    pub num_trajectories: usize,
    pub max_steps: usize,
    pub stop_tol: f64,
    pub sim_seed: u64,

    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemChoice::Builtin2d,
            n_s: 30,
            n_traj: 5000,
            n_d: 5000,
            n_pi: 10000,
            alpha_scale: 0.0,
            signal: SignalChoice::Piecewise,
            switch_prob: 0.7,
            seed: 0,
            hidden: Vec::new(),
            lambda_d: 0.1,
            lambda_pi: 1.0,
            epochs: 1000,
            batch_size: 256,
            learning_rate: 3e-3,
            grid_resolution: 0,
            u_grid_resolution: 21,
            c2_levels: C2_LADDER,
            omega_levels: OMEGA_LADDER,
            num_trajectories: 100,
            max_steps: 300,
            stop_tol: 1e-3,
            sim_seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn field(name: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{name}: {msg}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("n_s", self.n_s),
            ("n_traj", self.n_traj),
            ("n_d", self.n_d),
            ("n_pi", self.n_pi),
            ("batch_size", self.batch_size),
            ("u_grid_resolution", self.u_grid_resolution),
            ("c2_levels", self.c2_levels),
            ("omega_levels", self.omega_levels),
            ("num_trajectories", self.num_trajectories),
            ("max_steps", self.max_steps),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(field(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("lambda_d", self.lambda_d),
            ("lambda_pi", self.lambda_pi),
            ("learning_rate", self.learning_rate),
            ("stop_tol", self.stop_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(field(name, format!("must be a positive number, got {v}")));
            }
        }
        if !(self.alpha_scale >= 0.0 && self.alpha_scale.is_finite()) {
            return Err(field("alpha_scale", format!("must be positive (or 0 for the default), got {}", self.alpha_scale)));
        }
        if self.signal == SignalChoice::Piecewise && !(self.switch_prob > 0.0 && self.switch_prob <= 1.0) {
            return Err(field("switch_prob", format!("must lie in (0, 1], got {}", self.switch_prob)));
        }
        if self.hidden.contains(&0) {
            return Err(field("hidden", "layer widths must be positive"));
        }
        if self.grid_resolution == 1 {
            return Err(field("grid_resolution", "needs at least 2 nodes per axis"));
        }
        if self.batch_size > self.n_d.max(self.n_pi) {
            return Err(field("batch_size", format!("must not exceed max(n_d, n_pi) = {}", self.n_d.max(self.n_pi))));
        }
        Ok(())
    }

    pub fn system(&self) -> SystemSpec {
        match self.system {
            SystemChoice::Builtin2d => make_system_2d(),
            SystemChoice::Builtin3d => make_system_3d(),
        }
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        if !self.hidden.is_empty() {
            return self.hidden.clone();
        }
        match self.system {
            SystemChoice::Builtin2d => vec![20, 20],
            SystemChoice::Builtin3d => vec![30, 30],
        }
    }

    pub fn alpha_scale(&self) -> f64 {
        if self.alpha_scale > 0.0 {
            return self.alpha_scale;
        }
        match self.system {
            SystemChoice::Builtin2d => 0.1,
            SystemChoice::Builtin3d => 0.03,
        }
    }

    pub fn value_params(&self) -> Result<ValueParams, CliError> {
        let signal = match self.signal {
            SignalChoice::Uniform => SignalModel::Uniform,
            SignalChoice::Piecewise => SignalModel::PiecewiseConstant { switch_prob: self.switch_prob },
        };
        Ok(ValueParams::new(self.n_s, self.n_traj, self.seed.wrapping_add(1))?.with_signal(signal)?)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda_d: self.lambda_d,
            lambda_pi: self.lambda_pi,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: self.seed.wrapping_add(2),
        }
    }

    pub fn init_seed(&self) -> u64 {
        self.seed.wrapping_add(3)
    }

    pub fn synth_settings(&self, n: usize) -> SynthSettings {
        let mut s = SynthSettings::for_dim(n);
        if self.grid_resolution > 0 {
            s.grid_resolution = self.grid_resolution;
        }
        s.u_grid_resolution = self.u_grid_resolution;
        s.c2_levels = self.c2_levels;
        s.omega_levels = self.omega_levels;
        s
    }

    /// SHA-256 over the keys that determine the learning problem: system,
    /// value parameters, dataset sizes, running cost, signal model and seed.
    pub fn config_hash(&self) -> String {
        let canon = format!(
            "system={:?};n_s={};n_traj={};n_d={};n_pi={};alpha_scale={:e};signal={:?};switch_prob={:e};seed={}",
            self.system,
            self.n_s,
            self.n_traj,
            self.n_d,
            self.n_pi,
            self.alpha_scale(),
            self.signal,
            self.switch_prob,
            self.seed
        );
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}
