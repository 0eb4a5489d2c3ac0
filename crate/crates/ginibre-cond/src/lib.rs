//! Numerical library for conditional measures and multiplicative
//! functionals of generalized Ginibre point processes.
//!
//! The object of study is the determinantal point process on the complex
//! plane induced by the reproducing kernel of the weighted Fock space
//! L^2_hol(e^{-2 phi(|z|)} dlambda): radial weights and their moment
//! coefficients ([`weights`]), truncated kernels and Palm reductions
//! ([`kernels`]), plane quadrature with Nyström operators and regularized
//! Fredholm determinants ([`quadrature`]), the multiplicative-functional
//! scalar machinery ([`functionals`]), exact finite ensembles with
//! determinantal sampling ([`ensembles`]), and conditional-measure checks on
//! bounded windows ([`conditional`]).
//!
//! Everything is desk-scale and deterministic: integrals refine until two
//! successive rules agree, randomness flows from a single seed through
//! named streams, and each identity the library claims is checkable by an
//! exact or statistical test in this crate's test suite.

pub mod conditional;
pub mod ensembles;
pub mod error;
pub mod functionals;
pub mod gauss;
pub mod rng;
pub mod weights;
pub mod kernels;
pub mod quadrature;

pub use conditional::{
    conditional_factorization_check, conditional_histogram_test, conditional_log_density,
    exterior_weight, log_exterior_weight, ConditionalHistogram, Window,
};
pub use ensembles::{
    gram_matrix, mc_expectation_gamma, ope_log_density, partition_function,
    partition_identity_check, sample_dpp_grid, Configuration, DiscreteSampler,
};
pub use error::{Error, Result};
pub use functionals::{
    circle_sweep_sup, compensator, expected_gamma_closed, expected_gamma_fredholm, h_func,
    i1_i2_radial, kappa, kappa_residual, kappa_tuple, partial_gamma, partial_psi, r_pq,
    regularization_report, regularization_terms, rho_ratio, vandermonde_sq, ClaimsValues,
    RegularizationReport, RegularizationTerms, TuplePair,
};
pub use kernels::{christ_sup, palm_reduce, Kernel, KernelModel, PalmedKernel};
pub use rng::derived_stream;
pub use quadrature::{
    build_polar_annulus_grid, build_polar_grid, det3, det3_log, fredholm_det, fredholm_log_det,
    hs_norm, kernel_trace, nystrom, nystrom_plain, schatten_norm, trace, trace_power,
    DiscreteOperator, Grid,
};
pub use weights::{
    ginibre_closed_coefficients, moment_coefficients, radial_moment, weighted_power_integral,
    QuadratureSpec, RadialWeight,
};
