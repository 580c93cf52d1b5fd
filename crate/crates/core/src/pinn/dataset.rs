use rand::Rng;
use rayon::prelude::*;

use super::embed::{embed_rect, embed_singleton};
use crate::dynamics::{f_image, SystemSpec};
use crate::error::{Error, Result};
use crate::value::{point_rng, v_tilde, w_tilde, xi, AlphaFn, ValueParams};

const STREAM_DATA: u64 = 0;
const STREAM_COLLOC: u64 = 1;
const STREAM_SIGNALS: u64 = 2;

/// Regression sample: `x` and its `W̃` target.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub x: Vec<f64>,
    pub target: f64,
}

/// Residual sample: embeddings of `{x}` and `F({x})` plus `ξ({x})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationPoint {
    pub x: Vec<f64>,
    pub z_x: Vec<f64>,
    pub z_fx: Vec<f64>,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueDataset {
    pub n: usize,
    pub data: Vec<DataPoint>,
    pub colloc: Vec<CollocationPoint>,
}

fn uniform_in_domain(sys: &SystemSpec, rng: &mut impl Rng) -> Vec<f64> {
    let d = sys.domain_box();
    (0..sys.n()).map(|i| d.lo()[i] + d.width(i) * rng.random::<f64>()).collect()
}

/// Target for the data point with batch index `index` located at `x`.
pub fn data_point_at(sys: &SystemSpec, a: &AlphaFn, vp: &ValueParams, x: &[f64], index: u64) -> DataPoint {
    let mut rng = point_rng(vp.seed, index, STREAM_SIGNALS);
    let v = v_tilde(sys, x, a, vp, &mut rng);
    DataPoint { x: x.to_vec(), target: w_tilde(v).expect("Ṽ is non-negative") }
}

/// `ξ` uses `Ψ({x}) = α(x)` exactly.
pub fn collocation_point_at(sys: &SystemSpec, a: &AlphaFn, x: &[f64]) -> CollocationPoint {
    CollocationPoint {
        x: x.to_vec(),
        z_x: embed_singleton(x),
        z_fx: embed_rect(&f_image(sys, x)),
        xi: xi(a.eval(x)),
    }
}

/// Samples `n_d` data points and `n_pi` collocation points uniformly over `𝕏`.
///
/// Each point owns an RNG stream derived from `seed` (positions) or
/// `vp.seed` (input signals) and its index, so the result is identical
/// whatever the rayon pool size.
pub fn generate_dataset(
    sys: &SystemSpec,
    a: &AlphaFn,
    vp: &ValueParams,
    n_d: usize,
    n_pi: usize,
    seed: u64,
) -> Result<ValueDataset> {
    if n_d == 0 || n_pi == 0 {
        return Err(Error::usage(format!("dataset sizes must be positive (N_d={n_d}, N_pi={n_pi})")));
    }
    if a.n() != sys.n() {
        return Err(Error::usage("alpha dimension does not match the system"));
    }
    let data = (0..n_d as u64)
        .into_par_iter()
        .map(|i| {
            let x = uniform_in_domain(sys, &mut point_rng(seed, i, STREAM_DATA));
            data_point_at(sys, a, vp, &x, i)
        })
        .collect();
    let colloc = (0..n_pi as u64)
        .into_par_iter()
        .map(|j| {
            let x = uniform_in_domain(sys, &mut point_rng(seed, j, STREAM_COLLOC));
            collocation_point_at(sys, a, &x)
        })
        .collect();
    Ok(ValueDataset { n: sys.n(), data, colloc })
}

impl ValueDataset {
    fn data_stride(&self) -> usize {
        self.n + 1
    }

    fn colloc_stride(&self) -> usize {
        5 * self.n + 1
    }

    /// Flat little-endian `f64` block: every data row `(x, target)`, then
    /// every collocation row `(x, z_x, z_fx, ξ)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let count = self.data.len() * self.data_stride() + self.colloc.len() * self.colloc_stride();
        let mut out = Vec::with_capacity(8 * count);
        let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
        for p in &self.data {
            p.x.iter().for_each(|v| put(*v));
            put(p.target);
        }
        for p in &self.colloc {
            p.x.iter().chain(&p.z_x).chain(&p.z_fx).for_each(|v| put(*v));
            put(p.xi);
        }
        out
    }

    pub fn from_bytes(n: usize, n_d: usize, n_pi: usize, bytes: &[u8]) -> Result<Self> {
        let expected = 8 * (n_d * (n + 1) + n_pi * (5 * n + 1));
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "dataset block has {} bytes, expected {expected} for n={n}, N_d={n_d}, N_pi={n_pi}",
                bytes.len()
            )));
        }
        let mut vals = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut take = |k: usize| -> Vec<f64> { vals.by_ref().take(k).collect() };
        let data = (0..n_d)
            .map(|_| {
                let x = take(n);
                let target = take(1)[0];
                DataPoint { x, target }
            })
            .collect();
        let colloc = (0..n_pi)
            .map(|_| {
                let x = take(n);
                let z_x = take(2 * n);
                let z_fx = take(2 * n);
                let xi = take(1)[0];
                CollocationPoint { x, z_x, z_fx, xi }
            })
            .collect();
        Ok(Self { n, data, colloc })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::make_system_2d;

    fn setup() -> (SystemSpec, AlphaFn, ValueParams) {
        let sys = make_system_2d();
        let a = AlphaFn::identity(2, 1.0).unwrap();
        let vp = ValueParams::new(10, 30, 4).unwrap();
        (sys, a, vp)
    }

    #[test]
    fn data_point_at_origin_has_zero_target() {
        let (sys, a, vp) = setup();
        let p = data_point_at(&sys, &a, &vp, &[0.0, 0.0], 0);
        // k = 0 term vanishes exactly; later terms are min over clouds near 0.
        assert!(p.target >= 0.0 && p.target < 1e-2);
    }

    #[test]
    fn points_inside_domain_and_targets_in_range() {
        let (sys, a, vp) = setup();
        let ds = generate_dataset(&sys, &a, &vp, 50, 80, 9).unwrap();
        assert_eq!(ds.data.len(), 50);
        assert_eq!(ds.colloc.len(), 80);
        for p in &ds.data {
            assert!(sys.domain_box().contains(&p.x));
            assert!((0.0..=1.0).contains(&p.target));
        }
        for c in &ds.colloc {
            assert!(sys.domain_box().contains(&c.x));
            assert!((0.0..1.0).contains(&c.xi));
            assert_eq!(c.z_x, embed_singleton(&c.x));
            assert_eq!(c.xi, xi(a.eval(&c.x)));
        }
    }

    #[test]
    fn deterministic_and_round_trips() {
        let (sys, a, vp) = setup();
        let d1 = generate_dataset(&sys, &a, &vp, 20, 30, 5).unwrap();
        let d2 = generate_dataset(&sys, &a, &vp, 20, 30, 5).unwrap();
        assert_eq!(d1.to_bytes(), d2.to_bytes());
        let back = ValueDataset::from_bytes(2, 20, 30, &d1.to_bytes()).unwrap();
        assert_eq!(back, d1);
        assert!(ValueDataset::from_bytes(2, 21, 30, &d1.to_bytes()).is_err());
    }

    #[test]
    fn rejects_empty_sizes() {
        let (sys, a, vp) = setup();
        assert!(generate_dataset(&sys, &a, &vp, 0, 10, 0).is_err());
        assert!(generate_dataset(&sys, &a, &vp, 10, 0, 0).is_err());
    }
}
