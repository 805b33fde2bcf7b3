//! Numerical laboratory for the one-dimensional Anderson orthogonality
//! catastrophe.
//!
//! A box `[-L, L]` with Dirichlet walls holds `N` free fermions. A compactly
//! supported potential `V` is switched on and the overlap between the free and
//! perturbed Slater determinants is measured through the Anderson integral
//! `I = N - sum |(phi_j, psi_k)|^2`, the transition probability
//! `D = det(A)^2` and the asymptotic exponent `gamma(nu)`, which is computed by
//! three independent routes (transmission coefficient, S-matrix trace and a
//! Nystrom discretisation of the resolvent calculus).
//!
//! Units are natural: the free operator is `-d^2/dx^2`.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod free;
pub mod metrics;
pub mod model;
pub mod ode;
pub mod operators;
pub mod perturbed;
pub mod quadrature;
pub mod roots;
pub mod scattering;
pub mod sweep;

pub use error::{Error, Result};

/// Real scalar used throughout the crate.
pub type Real = f64;
/// Complex scalar used throughout the crate.
pub type Complex = num_complex::Complex64;

pub use free::{
    commutator_kernel, delta_term_kernel, fermi_energy, free_eigenfunction, free_eigenvalue, green_kernel, kappa_n,
    kappa_tilde_n, tau, truncated_resolvent_decomposed, truncated_resolvent_direct, FermiContourPoint, FreeEigenpair,
    TruncatedResolventParts,
};
pub use metrics::{
    anderson_integral, det_bounds, overlap_matrix, transition_probability, AndersonResult, DetBoundReport,
    OverlapMatrix,
};
pub use model::{
    build_grid, inner_product, potential_norms, v_transform, Grid, GridParams, Interval, Potential, PotentialNorms,
    PotentialSpec, SystemConfig,
};
pub use operators::{
    birman_schwinger, bounds_audit, contour_anderson, gamma_matrix, omega_operator, phi_hat, AuditReport,
    NystromOperator, PhiHat, SignOperator, SmallnessReport,
};
pub use perturbed::{
    bargmann_upper_bound, count_below, counting_lower_bound, perturbed_eigenfunction, perturbed_eigenvalue,
    prufer_phase, PerturbedEigenpair, PruferOptions, PruferTrajectory,
};
pub use scattering::{gamma_gkm, gamma_scattering, scattering_coefficients, ScatteringData};
pub use sweep::{run_sweep, GammaReport, SweepConfig, SweepResult};
