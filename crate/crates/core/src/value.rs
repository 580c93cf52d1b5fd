//! Set-valued running cost and finite-horizon value approximations.
//!
//! For a finite point set `S`, `Ψ(S) = min_{y ∈ S} α(y)` with the quadratic
//! cost `α(x) = c·xᵀPx`. The sampled reachable set at step `k` is the cloud
//! of `k`-th states of `N_traj` random input signals, so
//! `Ṽ(x) = Σ_{k=0}^{N_s} Ψ(cloud_k)` and `W̃ = 1 − exp(−Ṽ)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::SystemSpec;
use crate::error::{Error, Result};

/// Largest `Ψ` fed to `exp`.
pub const PSI_EXP_CAP: f64 = 700.0;
/// Upper saturation for `ξ` and `W̃` at finite arguments.
pub const SATURATION: f64 = 1.0 - 1e-16;

/// Quadratic running cost `α(x) = c·xᵀPx`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaFn {
    n: usize,
    p: Vec<f64>,
    c: f64,
}

impl AlphaFn {
    /// `p` is row-major `n × n`; it must be symmetric positive definite.
    pub fn new(p: Vec<f64>, n: usize, c: f64) -> Result<Self> {
        if p.len() != n * n {
            return Err(Error::usage(format!("P has {} entries, expected {n}×{n}", p.len())));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::usage(format!("alpha scale must be positive, got {c}")));
        }
        let scale = p.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (p[i * n + j] - p[j * n + i]).abs() > 1e-12 * scale {
                    return Err(Error::usage("P is not symmetric"));
                }
            }
        }
        if DMatrix::from_row_slice(n, n, &p).cholesky().is_none() {
            return Err(Error::usage("P is not positive definite"));
        }
        Ok(Self { n, p, c })
    }

    pub fn identity(n: usize, c: f64) -> Result<Self> {
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            p[i * n + i] = 1.0;
        }
        Self::new(p, n, c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn scale(&self) -> f64 {
        self.c
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.c * quad_form(&self.p, x)
    }
}

/// `xᵀPx` for row-major `P`.
#[inline]
pub fn quad_form(p: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let row = &p[i * n..(i + 1) * n];
        let px: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        acc += x[i] * px;
    }
    acc
}

pub fn alpha(a: &AlphaFn, x: &[f64]) -> f64 {
    a.eval(x)
}

/// Finite set of points in `ℝⁿ`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn from_points<'a>(dim: usize, points: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut cloud = Self::new(dim);
        for p in points {
            cloud.push(p);
        }
        cloud
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        self.data.extend_from_slice(x);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Treats a NaN cost (from a diverged trajectory) as `+∞`.
#[inline]
fn sanitize(v: f64) -> f64 {
    if v.is_nan() { f64::INFINITY } else { v }
}

/// `Ψ(S) = min_{y ∈ S} α(y)`.
pub fn psi(points: &PointCloud, a: &AlphaFn) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::usage("Ψ of an empty point set"));
    }
    Ok(points.iter().map(|y| sanitize(a.eval(y))).fold(f64::INFINITY, f64::min))
}

/// How random input signals are generated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SignalModel {
    /// Every entry i.i.d. uniform over `U`.
    #[default]
    Uniform,
    /// Uniform first entry; afterwards each step redraws with probability
    /// `switch_prob` and otherwise holds the previous input.
    PiecewiseConstant { switch_prob: f64 },
}

impl SignalModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SignalModel::Uniform => Ok(()),
            SignalModel::PiecewiseConstant { switch_prob } => {
                if switch_prob > 0.0 && switch_prob <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::usage(format!("switch probability must lie in (0, 1], got {switch_prob}")))
                }
            }
        }
    }
}

/// Truncation horizon, sample count, RNG seed and signal model for `Ṽ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueParams {
    pub horizon: usize,
    pub n_traj: usize,
    pub seed: u64,
    pub signal: SignalModel,
}

impl ValueParams {
    pub fn new(horizon: usize, n_traj: usize, seed: u64) -> Result<Self> {
        if horizon < 1 {
            return Err(Error::usage("truncation horizon N_s must be at least 1"));
        }
        if n_traj < 1 {
            return Err(Error::usage("N_traj must be at least 1"));
        }
        Ok(Self { horizon, n_traj, seed, signal: SignalModel::Uniform })
    }

    pub fn with_signal(mut self, signal: SignalModel) -> Result<Self> {
        signal.validate()?;
        self.signal = signal;
        Ok(self)
    }
}

/// Independent stream for point `index` of a batch: seeded with
/// `base_seed ⊕ index`, with `stream` separating batches that share indices.
pub fn point_rng(base_seed: u64, index: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed ^ index);
    rng.set_stream(stream);
    rng
}

#[inline]
fn draw_input(sys: &SystemSpec, rng: &mut impl Rng, out: &mut [f64]) {
    let ub = sys.input_box();
    for (j, o) in out.iter_mut().enumerate() {
        *o = ub.lo()[j] + ub.width(j) * rng.random::<f64>();
    }
}

/// Next entry of a signal under `model`; `step` counts from 0.
#[inline]
fn next_input(sys: &SystemSpec, model: SignalModel, step: usize, rng: &mut impl Rng, u: &mut [f64]) {
    match model {
        SignalModel::Uniform => draw_input(sys, rng, u),
        SignalModel::PiecewiseConstant { switch_prob } => {
            if step == 0 || rng.random::<f64>() < switch_prob {
                draw_input(sys, rng, u);
            }
        }
    }
}

/// One input signal of length `horizon`, i.i.d. uniform over `U`.
pub fn sample_signal(sys: &SystemSpec, horizon: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    sample_signal_with(sys, SignalModel::Uniform, horizon, rng)
}

pub fn sample_signal_with(sys: &SystemSpec, model: SignalModel, horizon: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut u = vec![0.0; sys.m()];
    (0..horizon)
        .map(|k| {
            next_input(sys, model, k, rng, &mut u);
            u.clone()
        })
        .collect()
}

/// Per-step clouds of sampled trajectory states; `clouds[0] = {x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledReach {
    pub clouds: Vec<PointCloud>,
}

/// Rolls out `N_traj` random signals from `x` and collects states per step.
///
/// Signals are drawn one after another from `rng`, so the first `m`
/// trajectories of a run with `N_traj ≥ m` coincide with a run of `N_traj = m`.
pub fn sampled_reach(sys: &SystemSpec, x: &[f64], vp: &ValueParams, rng: &mut impl Rng) -> SampledReach {
    let n = sys.n();
    let mut clouds: Vec<PointCloud> = (0..=vp.horizon).map(|_| PointCloud::new(n)).collect();
    clouds[0].push(x);
    let mut state = x.to_vec();
    let mut next = vec![0.0; n];
    let mut u = vec![0.0; sys.m()];
    for _ in 0..vp.n_traj {
        state.copy_from_slice(x);
        for (k, cloud) in clouds.iter_mut().skip(1).enumerate() {
            next_input(sys, vp.signal, k, rng, &mut u);
            sys.step_into(&state, &u, &mut next);
            std::mem::swap(&mut state, &mut next);
            cloud.push(&state);
        }
    }
    SampledReach { clouds }
}

/// `Ψ` of every sampled cloud, computed without storing the clouds.
///
/// Consumes `rng` in exactly the same order as [`sampled_reach`].
pub fn sampled_level_costs(
    sys: &SystemSpec,
    x: &[f64],
    a: &AlphaFn,
    vp: &ValueParams,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let n = sys.n();
    let mut mins = vec![f64::INFINITY; vp.horizon + 1];
    mins[0] = sanitize(a.eval(x));
    let mut state = x.to_vec();
    let mut next = vec![0.0; n];
    let mut u = vec![0.0; sys.m()];
    for _ in 0..vp.n_traj {
        state.copy_from_slice(x);
        for (k, slot) in mins.iter_mut().skip(1).enumerate() {
            next_input(sys, vp.signal, k, rng, &mut u);
            sys.step_into(&state, &u, &mut next);
            std::mem::swap(&mut state, &mut next);
            *slot = slot.min(sanitize(a.eval(&state)));
        }
    }
    mins
}

/// `Ṽ_{N_s}({x}) = Σ_k Ψ(cloud_k)`.
pub fn v_tilde(sys: &SystemSpec, x: &[f64], a: &AlphaFn, vp: &ValueParams, rng: &mut impl Rng) -> f64 {
    sampled_level_costs(sys, x, a, vp, rng).iter().sum()
}

/// `Ṽ` from already materialised clouds.
pub fn v_tilde_from_reach(reach: &SampledReach, a: &AlphaFn) -> Result<f64> {
    reach.clouds.iter().map(|c| psi(c, a)).sum()
}

/// `W̃ = 1 − exp(−Ṽ)`; `+∞ ↦ 1`, finite values saturate below 1.
pub fn w_tilde(v: f64) -> Result<f64> {
    if v.is_nan() || v < 0.0 {
        return Err(Error::usage(format!("value must be non-negative, got {v}")));
    }
    if v == f64::INFINITY {
        return Ok(1.0);
    }
    Ok((-(-v).exp_m1()).min(SATURATION))
}

/// `ξ = 1 − exp(−Ψ)`.
pub fn xi(psi_val: f64) -> f64 {
    let p = psi_val.max(0.0).min(PSI_EXP_CAP);
    (-(-p).exp_m1()).min(SATURATION)
}

/// `β = exp(Ψ) − 1`.
///
/// On `[1, 30]` it is formed as `1/(1 − ξ) − 1`: there `1 − ξ` is exact in
/// floating point, so `(1 − ξ)(1 + β) = 1` holds to a few ulps.
pub fn beta(psi_val: f64) -> f64 {
    let p = psi_val.max(0.0).min(PSI_EXP_CAP);
    if (1.0..=30.0).contains(&p) {
        1.0 / (1.0 - xi(p)) - 1.0
    } else {
        p.exp_m1()
    }
}

/// `v(X) − Ψ(X) − v(F(X))`; zero for the exact value function.
pub fn bellman_residual_v(v_of_x: f64, v_of_fx: f64, psi_x: f64) -> f64 {
    v_of_x - psi_x - v_of_fx
}

/// `w(X) − w(F(X)) − ξ(X)(1 − w(F(X)))`; zero for the exact `W`.
pub fn zubov_residual(w_of_x: f64, w_of_fx: f64, xi_x: f64) -> f64 {
    w_of_x - w_of_fx - xi_x * (1.0 - w_of_fx)
}

/// Budget on the number of successor evaluations in one oracle level.
pub const ORACLE_BUDGET: usize = 10_000_000;
/// Per-coordinate tolerance used to merge coincident lattice successors.
pub const ORACLE_DEDUP_TOL: f64 = 1e-12;

/// Exact reachable levels of a finite input lattice.
///
/// `levels[0] = start`, `levels[k] = {f(y, u) : y ∈ levels[k−1], u ∈ lattice}`
/// with near-duplicates merged.
pub fn lattice_levels(
    sys: &SystemSpec,
    start: &PointCloud,
    u_lattice: &[Vec<f64>],
    horizon: usize,
) -> Result<Vec<PointCloud>> {
    if u_lattice.is_empty() {
        return Err(Error::usage("input lattice is empty"));
    }
    if let Some(u) = u_lattice.iter().find(|u| u.len() != sys.m()) {
        return Err(Error::usage(format!("lattice input {u:?} has wrong dimension")));
    }
    let n = sys.n();
    let mut levels = vec![dedup(start)];
    let mut next = vec![0.0; n];
    for k in 1..=horizon {
        let prev = &levels[k - 1];
        let work = prev.len().saturating_mul(u_lattice.len());
        if work > ORACLE_BUDGET {
            return Err(Error::Resource(format!(
                "oracle level {k} needs {work} successor evaluations (budget {ORACLE_BUDGET})"
            )));
        }
        let mut cloud = PointCloud::new(n);
        for y in prev.iter() {
            for u in u_lattice {
                sys.step_into(y, u, &mut next);
                cloud.push(&next);
            }
        }
        levels.push(dedup(&cloud));
    }
    Ok(levels)
}

fn dedup(cloud: &PointCloud) -> PointCloud {
    let mut pts: Vec<&[f64]> = cloud.iter().collect();
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = PointCloud::new(cloud.dim());
    let mut last: Option<&[f64]> = None;
    for p in pts {
        let duplicate = last.is_some_and(|q| {
            p.iter().zip(q).all(|(a, b)| (a - b).abs() <= ORACLE_DEDUP_TOL)
        });
        if !duplicate {
            out.push(p);
            last = Some(p);
        }
    }
    out
}

/// Exact `V_N(S) = Σ_{k=0}^{N} Ψ(R_k)` for a finite input lattice.
pub fn oracle_value_from_set(
    sys: &SystemSpec,
    start: &PointCloud,
    a: &AlphaFn,
    u_lattice: &[Vec<f64>],
    horizon: usize,
) -> Result<f64> {
    lattice_levels(sys, start, u_lattice, horizon)?.iter().map(|l| psi(l, a)).sum()
}

/// Exact `V_N({x})` for a finite input lattice.
pub fn oracle_value(
    sys: &SystemSpec,
    x: &[f64],
    a: &AlphaFn,
    u_lattice: &[Vec<f64>],
    horizon: usize,
) -> Result<f64> {
    oracle_value_from_set(sys, &PointCloud::from_points(sys.n(), [x]), a, u_lattice, horizon)
}

/// One-step lattice image `{f(x, u) : u ∈ lattice}`.
pub fn lattice_image(sys: &SystemSpec, x: &[f64], u_lattice: &[Vec<f64>]) -> PointCloud {
    let mut out = PointCloud::new(sys.n());
    let mut next = vec![0.0; sys.n()];
    for u in u_lattice {
        sys.step_into(x, u, &mut next);
        out.push(&next);
    }
    out
}
