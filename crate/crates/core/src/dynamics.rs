//! Discrete-time systems `x⁺ = f(x, u)` with an axis-aligned input box.
//!
//! Every [`SystemSpec`] carries two closed-form maps: the step function and
//! the exact one-step image `F({x}) = f(x, U)`. For systems whose input
//! enters affinely through a constant matrix the image is a box, which is
//! what [`SystemSpec::input_affine`] builds.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Axis-aligned box `[lo, hi]`. Zero-width dimensions are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperRectangle {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl HyperRectangle {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::usage(format!(
                "box bounds have different lengths ({} vs {})",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite()) || l > h {
                return Err(Error::usage(format!(
                    "invalid box bounds in dimension {i}: [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// Zero-width box `{x}`.
    pub fn point(x: &[f64]) -> Result<Self> {
        Self::new(x.to_vec(), x.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_tol(x, 0.0)
    }

    pub fn contains_tol(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    /// All `2^d` corners, enumerated with dimension 0 varying fastest.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                    .collect()
            })
            .collect()
    }
}

pub type StepFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
pub type ImageFn = dyn Fn(&[f64], &mut [f64], &mut [f64]) + Send + Sync;

/// A discrete-time control system with input box `U` and learning domain `𝕏`.
///
/// Immutable after construction; clones share the underlying closures.
#[derive(Clone)]
pub struct SystemSpec {
    name: String,
    n: usize,
    m: usize,
    step_fn: Arc<StepFn>,
    image_fn: Arc<ImageFn>,
    input_box: HyperRectangle,
    domain_box: HyperRectangle,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("input_box", &self.input_box)
            .field("domain_box", &self.domain_box)
            .finish_non_exhaustive()
    }
}

impl SystemSpec {
    /// General constructor. `step(x, u, out)` writes `f(x, u)`;
    /// `image(x, lo, hi)` writes the box `f(x, U)`.
    pub fn new(
        name: impl Into<String>,
        input_box: HyperRectangle,
        domain_box: HyperRectangle,
        step: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        image: impl Fn(&[f64], &mut [f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            n: domain_box.dim(),
            m: input_box.dim(),
            step_fn: Arc::new(step),
            image_fn: Arc::new(image),
            input_box,
            domain_box,
        }
    }

    /// `f(x, u) = g(x) + B u` with constant `B` (row-major, `n × m`).
    ///
    /// The image `g(x) + B·U` is computed with interval arithmetic, which is
    /// exact for a constant input matrix and a box `U`.
    pub fn input_affine(
        name: impl Into<String>,
        input_box: HyperRectangle,
        domain_box: HyperRectangle,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        input_matrix: Vec<f64>,
    ) -> Result<Self> {
        let n = domain_box.dim();
        let m = input_box.dim();
        if input_matrix.len() != n * m {
            return Err(Error::usage(format!(
                "input matrix has {} entries, expected {n}×{m}",
                input_matrix.len()
            )));
        }
        let drift = Arc::new(drift);
        let b = Arc::new(input_matrix);
        let (drift_s, b_s) = (Arc::clone(&drift), Arc::clone(&b));
        let step = move |x: &[f64], u: &[f64], out: &mut [f64]| {
            drift_s(x, out);
            for (i, o) in out.iter_mut().enumerate() {
                let row = &b_s[i * m..(i + 1) * m];
                *o += row.iter().zip(u).map(|(bij, uj)| bij * uj).sum::<f64>();
            }
        };
        let (ulo, uhi) = (input_box.lo().to_vec(), input_box.hi().to_vec());
        let image = move |x: &[f64], lo: &mut [f64], hi: &mut [f64]| {
            drift(x, lo);
            for i in 0..n {
                let center = lo[i];
                let (mut a, mut c) = (center, center);
                for j in 0..m {
                    let bij = b[i * m + j];
                    if bij == 0.0 {
                        continue;
                    }
                    let (p, q) = (bij * ulo[j], bij * uhi[j]);
                    a += p.min(q);
                    c += p.max(q);
                }
                lo[i] = a;
                hi[i] = c;
            }
        };
        Ok(Self::new(name, input_box, domain_box, step, image))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn input_box(&self) -> &HyperRectangle {
        &self.input_box
    }

    pub fn domain_box(&self) -> &HyperRectangle {
        &self.domain_box
    }

    /// Unchecked step into a caller-owned buffer. Hot loops use this.
    #[inline]
    pub fn step_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(u.len(), self.m);
        (self.step_fn)(x, u, out)
    }

    /// Unchecked image into caller-owned bound buffers.
    #[inline]
    pub fn image_into(&self, x: &[f64], lo: &mut [f64], hi: &mut [f64]) {
        (self.image_fn)(x, lo, hi)
    }
}

/// `f(x, u)` for one step.
pub fn step(sys: &SystemSpec, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    if x.len() != sys.n {
        return Err(Error::usage(format!("state has dimension {}, system expects {}", x.len(), sys.n)));
    }
    if u.len() != sys.m {
        return Err(Error::usage(format!("input has dimension {}, system expects {}", u.len(), sys.m)));
    }
    let mut out = vec![0.0; sys.n];
    sys.step_into(x, u, &mut out);
    Ok(out)
}

/// States `x_0..x_K` and the inputs `u_0..u_{K-1}` that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory always holds x0")
    }
}

/// Rolls `x0` forward under an admissible input sequence.
pub fn rollout(sys: &SystemSpec, x0: &[f64], inputs: &[Vec<f64>]) -> Result<Trajectory> {
    if x0.len() != sys.n {
        return Err(Error::usage(format!("x0 has dimension {}, system expects {}", x0.len(), sys.n)));
    }
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(x0.to_vec());
    for (k, u) in inputs.iter().enumerate() {
        if !sys.input_box.contains(u) {
            return Err(Error::usage(format!("input {k} = {u:?} lies outside U")));
        }
        let next = step(sys, &states[k], u)?;
        states.push(next);
    }
    Ok(Trajectory { states, inputs: inputs.to_vec() })
}

/// The exact one-step image `F({x}) = f(x, U)`.
pub fn f_image(sys: &SystemSpec, x: &[f64]) -> HyperRectangle {
    let mut lo = vec![0.0; sys.n];
    let mut hi = vec![0.0; sys.n];
    sys.image_into(x, &mut lo, &mut hi);
    HyperRectangle { lo, hi }
}

/// Planar benchmark:
/// `x₁⁺ = x₁ + 0.1x₂`, `x₂⁺ = x₂ + 0.1(x₁ + x₁³ + x₂ + u)`,
/// with `U = [-0.5, 0.5]` and `𝕏 = [-1, 1]²`.
pub fn make_system_2d() -> SystemSpec {
    let drift = |x: &[f64], out: &mut [f64]| {
        out[0] = x[0] + 0.1 * x[1];
        out[1] = x[1] + 0.1 * (x[0] + x[0] * x[0] * x[0] + x[1]);
    };
    SystemSpec::input_affine(
        "builtin-2d",
        HyperRectangle::cube(1, -0.5, 0.5).expect("valid box"),
        HyperRectangle::cube(2, -1.0, 1.0).expect("valid box"),
        drift,
        vec![0.0, 0.1],
    )
    .expect("consistent dimensions")
}

/// Three-state chain with cubic feedback:
/// `x₁⁺ = x₁ + 0.1x₂`, `x₂⁺ = x₂ + 0.1x₃`,
/// `x₃⁺ = x₃ + 0.1(x₁ + x₁³ − x₂ + u)`, with `U = [-1, 1]`, `𝕏 = [-1, 1]³`.
pub fn make_system_3d() -> SystemSpec {
    let drift = |x: &[f64], out: &mut [f64]| {
        out[0] = x[0] + 0.1 * x[1];
        out[1] = x[1] + 0.1 * x[2];
        out[2] = x[2] + 0.1 * (x[0] + x[0] * x[0] * x[0] - x[1]);
    };
    SystemSpec::input_affine(
        "builtin-3d",
        HyperRectangle::cube(1, -1.0, 1.0).expect("valid box"),
        HyperRectangle::cube(3, -1.0, 1.0).expect("valid box"),
        drift,
        vec![0.0, 0.0, 0.1],
    )
    .expect("consistent dimensions")
}
