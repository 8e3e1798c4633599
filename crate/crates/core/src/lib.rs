//! Minimizing-movement (JKO) solver for fourth-order Wasserstein gradient
//! flows on a bounded interval, together with numerical certificates for the
//! discrete a priori estimates that drive the existence theory.
//!
//! The crate is organised in four layers:
//!
//! * [`transport`]: grid densities, monotone transport maps, the quadratic
//!   Wasserstein distance and the perturbation flow used for first variations.
//! * [`lagrangian`]: energy densities `F(x, u, u')`, mobility energies
//!   `1/2 |f(u)'|^2`, test functions and the assumption validators.
//! * [`jko`]: the implicit time stepping and refinement studies.
//! * [`diagnostics`]: heat flow, flow interchange and all certificate checks.

pub mod certificate;
pub mod diagnostics;
pub mod error;
pub mod jko;
pub mod lagrangian;
pub mod stencil;
pub mod transport;

pub use certificate::CertificateReport;
pub use error::{Error, Result};
pub use transport::{GridDensity, Interval, TransportMap};
