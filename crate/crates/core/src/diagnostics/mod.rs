//! Heat flow, flow interchange and the certificate checks.
//!
//! Every check returns [`CertificateReport`]s for an inequality `lhs <= rhs`.
//! Per-step checks produce one report per step; the tolerance of each report
//! states what allowance was granted (relative slack, inexact minimization,
//! rounding floors).
//!
//! [`CertificateReport`]: crate::certificate::CertificateReport

mod heat;
mod lemmas;
mod norms;
mod trajectory;
mod weak;

pub use heat::{
    check_heat_dissipation, default_probe, dissipation_rate, flow_interchange_dissipation,
    heat_flow,
};
pub use lemmas::{
    boundary_sign_check, traceless_equality_case, traceless_lemma_check, traceless_sweep,
    TracelessSweep, LEMMA_TOLERANCE,
};
pub use norms::{hessian_roundoff_floor, poincare_constant, SobolevNorms};
pub use trajectory::{
    apriori_bounds, check_energy_monotone, check_entropy_dissipation_a,
    check_entropy_dissipation_f, check_holder, check_minimality, check_total_square_distance,
    DISSIPATION_SLACK,
};
pub use weak::{
    check_discrete_weak_a, check_discrete_weak_f, check_weak_scaling, hessian_bound, weak_residual,
    weak_sandwich_f, WeakSandwich, WEAK_SLACK_FACTOR,
};
