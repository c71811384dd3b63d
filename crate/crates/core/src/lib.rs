//! Workbench for self-supervised reward shaping in multi-agent gridworlds.
//!
//! The crate is organized around six subsystems:
//!
//! - [`diffcore`] — dense networks with exact analytic gradients, an
//!   adaptive-moment optimizer, and finite-difference gradient checking.
//!   Generic over the scalar type; the rest of the crate instantiates it
//!   at [`Real`].
//! - [`gridworld`] — a lifelong multi-agent pathfinding environment with
//!   waypoint observations, blocked-move collision handling, a dense
//!   waypoint reward, and a reward-sparsification wrapper.
//! - [`marl`] — parameter-shared actor–critic agents trained with clipped
//!   surrogate policy optimization (IPPO, and MAPPO via a centralized
//!   critic), plus generalized advantage estimation.
//! - [`arms`] — automatic reward shaping from trajectory ranking: segment
//!   buffering, preference labels from sparse returns, the pairwise
//!   ranking loss, the learned per-action reward, and a potential-based
//!   shaping baseline.
//! - [`theory`] — brute-force verification of best-response and Nash-set
//!   invariance under order-preserving reward transforms on tiny
//!   deterministic games, and an exact dynamic-programming check of
//!   potential-based shaping.
//! - [`harness`] — experiment configuration, training/evaluation
//!   orchestration, metrics, CSV and SVG emission.

pub mod arms;
pub mod diffcore;
pub mod gridworld;
pub mod harness;
pub mod marl;
pub mod seed;
pub mod theory;

/// Scalar type used by every subsystem outside the generic math core.
///
/// Desk-scale networks are tiny, so 64-bit floats are used throughout:
/// determinism and gradient-check precision outweigh speed.
pub type Real = f64;

/// Flat row-major tensor over [`Real`].
pub type Tensor = diffcore::Tensor<Real>;
/// Network parameters over [`Real`].
pub type ParamStore = diffcore::ParamStore<Real>;
/// Optimizer state over [`Real`].
pub type AdamState = diffcore::AdamState<Real>;
