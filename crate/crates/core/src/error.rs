use thiserror::Error;

/// Errors raised by the library. Magnitudes are reported as `f64`
/// regardless of the scalar type used for the computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("|k| = {modulus} is not inside the open unit disc")]
    OutsideDisc { modulus: f64 },

    #[error("betaJ = {beta_j} gives k = {k}, which is not below T_c (need k < 1)")]
    PhaseViolation { beta_j: f64, k: f64 },

    #[error("{what} = {value} must lie in the open interval (0, 1)")]
    OutsideUnitInterval { what: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series reaches degree {available}, but degree {required} is needed")]
    SeriesTooShort { required: usize, available: usize },

    #[error(
        "Fredholm cutoff reached the cap {cap} without meeting tol; \
         best value {best_re:+e}{best_im:+e}i, last doubling gap {gap:e}"
    )]
    CutoffExhausted {
        cap: usize,
        best_re: f64,
        best_im: f64,
        gap: f64,
    },

    #[error("terms of the sum over N stopped decaying near N = {n} (|term| = {term:e})")]
    DivergenceSuspected { n: usize, term: f64 },

    #[error("contour of radius {radius} about |kappa| = {center_modulus} leaves the unit disc")]
    ContourOutsideDisc { radius: f64, center_modulus: f64 },

    #[error("degenerate least-squares fit: {0}")]
    DegenerateFit(String),
}

impl Error {
    /// True for failures to converge, as opposed to bad input.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::CutoffExhausted { .. } | Error::DivergenceSuspected { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Non-fatal diagnostics attached to otherwise usable results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// Determinant conditioning estimate above 1e12.
    IllConditioned,
    /// Series truncation bound exceeds the requested target.
    TruncationAboveTarget,
    /// Quadrature or sampling error estimate above the requested target.
    TargetNotMet,
    /// Evaluation point within 1e-6 of the singular set on the boundary.
    NearBoundary,
    /// Contour radius so small that sample noise dominates the derivative.
    AmplifiedNoise,
    /// A truncated infinite sum did not reach its tolerance before its cap.
    TailNotConverged,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::IllConditioned => "ill_conditioned",
            Flag::TruncationAboveTarget => "truncation_above_target",
            Flag::TargetNotMet => "target_not_met",
            Flag::NearBoundary => "near_boundary",
            Flag::AmplifiedNoise => "amplified_noise",
            Flag::TailNotConverged => "tail_not_converged",
        }
    }

    /// Flags that mean a requested accuracy was not delivered.
    pub fn is_convergence(self) -> bool {
        matches!(
            self,
            Flag::TargetNotMet | Flag::TailNotConverged | Flag::TruncationAboveTarget
        )
    }
}
