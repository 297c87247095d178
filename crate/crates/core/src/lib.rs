//! Diagonal correlations and the diagonal susceptibility of the isotropic
//! 2D Ising model below `T_c`.
//!
//! Two independent routes are implemented:
//!
//! * Toeplitz and Fredholm determinants ([`toeplitz`], [`fredholm`]), which
//!   give `<s_00 s_NN>` and the sum `S = sum_N [det(I - K_N) - 1]`;
//! * the form-factor expansion `S = sum_n S_n` ([`integral`]), where each
//!   `S_n` is a `2n`-dimensional integral over `[0, 1]^{2n}` in `kappa = k^2`.
//!
//! [`probe`] scans the singular integrals toward roots of unity on
//! `|kappa| = 1`, and [`chi`] assembles `beta^-1 chi_d = 1 + M^2 (2S - 1)`.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the double-precision instantiation used by the CLI.

// `!(a < b)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `Real` does not require the assign operators.
#![allow(clippy::assign_op_pattern)]

pub mod chi;
pub mod coupling;
pub mod error;
pub mod fredholm;
pub mod integral;
pub mod jet;
pub mod linalg;
pub mod probe;
pub mod quadrature;
pub mod scalar;
pub mod series;
pub mod toeplitz;

pub use chi::{chi_d, chi_d_with, sweep, ChiOptions, ChiResult, Route, SweepRow};
pub use coupling::{k_from_temperature, magnetization, magnetization_squared, CouplingK, Mode};
pub use error::{Error, Flag, Result};
pub use fredholm::{fredholm_det, hankel_matrix, s_via_fredholm, FredholmResult, FredholmSum};
pub use integral::{
    d_ell_s_n, lambda1, lint_integral, s_n, s_n_derivatives, s_n_form, s_total,
    sn_integrand_cauchy, sn_integrand_vandermonde, Form, SnResult,
};
pub use jet::{Jet, KappaAlgebra};
pub use probe::{
    classify, log_fit, radial_scan, smoothness_probe, Growth, LogFit, Proxy, RadialScan,
    RootOfUnity,
};
pub use quadrature::{Method, QuadratureSpec};
pub use scalar::Real;
pub use series::{
    binomial_half_series, lambda_series, phi_m, HalfExponent, SeriesCoeffs, SeriesKind,
};
pub use toeplitz::{correlation_deviation, diagonal_correlation, CorrelationResult};

/// Complex double.
pub type C64 = num_complex::Complex<f64>;
pub type Coupling = CouplingK<f64>;
pub type Series = SeriesCoeffs<f64>;
pub type Correlation = CorrelationResult<f64>;
pub type Fredholm = FredholmResult<f64>;
pub type Spec = QuadratureSpec<f64>;
pub type Sn = SnResult<f64>;
pub type Chi = ChiResult<f64>;
pub type Scan = RadialScan<f64>;
pub type Root = RootOfUnity<f64>;
