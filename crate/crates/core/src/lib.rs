//! Domain-of-stabilization estimation for input-constrained discrete-time
//! systems.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynamics`]: systems `x⁺ = f(x, u)`, trajectories and the exact
//!   one-step image `F({x}) = f(x, U)` as a [`HyperRectangle`].
//! - [`value`]: the set-based running cost `Ψ`, trajectory-sampled
//!   finite-horizon values `Ṽ`/`W̃`, the `ξ`/`β` transforms and an exact
//!   finite-input-lattice oracle.
//! - [`pinn`]: hyper-interval embedding, a small multilayer perceptron with
//!   hand-written backpropagation, the composite data + Zubov-residual loss
//!   and the training loop.
//! - [`synth`]: the certification chain (gain, quadratic Lyapunov levels,
//!   value-function levels) and the piecewise controller built on top of it.

pub mod dynamics;
pub mod error;
pub mod pinn;
pub mod synth;
pub mod value;

pub use dynamics::{HyperRectangle, SystemSpec, Trajectory};
pub use error::{Error, Result};
