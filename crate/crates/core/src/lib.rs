//! Constructive ill-posedness certificates for neural discretizations of variational problems.
//!
//! Losses that only see finitely many linear measurements of the trial function
//! (point values, partial derivatives, boundary traces) are invariant along every
//! nonzero network `Φ` with `M(Φ) = 0`. This crate builds such networks explicitly
//! and checks the consequences numerically for Deep Ritz losses, pointwise and
//! finite-difference regularization losses, and weak PINN residuals.

pub mod activation;
pub mod deep_ritz;
pub mod domain;
pub mod error;
pub mod field;
pub mod forge;
pub mod jet;
pub mod linalg;
pub mod measurement;
pub mod multi_index;
pub mod network;
pub mod quadrature;
pub mod regularization;
pub mod train;
pub mod wpinn;

pub use activation::Activation;
pub use domain::BoxDomain;
pub use error::{Error, Result};
pub use forge::{Family, Forge};
pub use jet::{jet_forward, DerivativeBundle};
pub use measurement::{measure, MeasurementSpec, MeasurementVector, Probe, ProbeKind};
pub use multi_index::MultiIndex;
pub use network::MlpNetwork;
