//! Material-point engine and model-discovery toolkit for an inelastic
//! constitutive framework of growth and remodeling with homeostatic surfaces.
//!
//! The crate simulates stress--time trajectories of living tissue under
//! prescribed deformation histories and recovers interpretable constitutive
//! weights from measured stress data by gradient-based training:
//!
//! - [`tensor`]: exact spectral algebra on symmetric 3x3 tensors,
//! - [`scalar`]: forward-mode dual numbers so every formula differentiates,
//! - [`energy`]: compressible Ogden-type Helmholtz energy with trainable
//!   volumetric/isochoric exponents and the linearized moduli,
//! - [`potential`]: homeostatic surface built from principal-stress and
//!   principal-shear activation neurons,
//! - [`point`]: the material-point integrator (exponential update, local
//!   Newton solve, zero-stress directions),
//! - [`discover`]: full-batch Adam training of the thirteen weights with
//!   forward-mode or finite-difference gradients,
//! - [`io`]: CSV/TOML file formats for experiments, weights and run configs,
//! - [`verify`]: a seeded invariant suite runnable from the CLI.
//!
//! Units follow the experimental convention: time in hours, stress in
//! microNewton per square millimetre.

pub mod discover;
pub mod energy;
pub mod error;
pub mod io;
pub mod point;
pub mod potential;
pub mod scalar;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::SymTensor3;
