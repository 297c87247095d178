//! Diagonal spin-spin correlation `<s_00 s_NN>` as an `N x N` Toeplitz
//! determinant of the Fourier coefficients of `phi`.

use num_complex::Complex;
use serde::Serialize;

use crate::coupling::{magnetization_squared, CouplingK};
use crate::error::Flag;
use crate::linalg::{determinant_with_condition, Matrix};
use crate::scalar::Real;
use crate::series::{phi_full, SeriesCoeffs};

/// Condition estimates above this flag the determinant as unreliable.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationResult<T: Real> {
    /// Diagonal separation `N`.
    pub n: usize,
    pub value: Complex<T>,
    pub cond_estimate: T,
    pub flags: Vec<Flag>,
}

impl<T: Real> CorrelationResult<T> {
    pub fn is_reliable(&self) -> bool {
        !self.flags.contains(&Flag::IllConditioned)
    }
}

/// Caches the Fourier coefficients `phi_d` for `|d| < max_n` so a sweep over
/// separations builds every Toeplitz matrix from one coefficient table.
#[derive(Debug, Clone)]
pub struct ToeplitzSymbol<T: Real> {
    coupling: CouplingK<T>,
    phi: SeriesCoeffs<T>,
}

impl<T: Real> ToeplitzSymbol<T> {
    pub fn new(k: &CouplingK<T>, max_n: usize) -> Self {
        Self {
            coupling: *k,
            phi: phi_full(k, max_n.saturating_sub(1)),
        }
    }

    pub fn coupling(&self) -> &CouplingK<T> {
        &self.coupling
    }

    pub fn max_n(&self) -> usize {
        self.phi.max_degree() as usize + 1
    }

    pub fn correlation(&self, n: usize) -> CorrelationResult<T> {
        assert!(n <= self.max_n(), "separation {n} beyond cached symbol");
        if n == 0 {
            return CorrelationResult {
                n,
                value: Complex::new(T::one(), T::zero()),
                cond_estimate: T::one(),
                flags: Vec::new(),
            };
        }
        let matrix = Matrix::from_fn(n, |row, col| self.phi.coeff(row as i64 - col as i64));
        let (det, cond) = determinant_with_condition(matrix);
        let mut value = det.value();
        if self.coupling.is_real() {
            // real symbol, real matrix: drop the rounding residue of the phase
            value.im = T::zero();
        }
        let mut flags = Vec::new();
        if !(cond <= T::lit(CONDITION_LIMIT)) {
            flags.push(Flag::IllConditioned);
        }
        CorrelationResult {
            n,
            value,
            cond_estimate: cond,
            flags,
        }
    }
}

/// `<s_00 s_NN> = det(phi_{m-n})_{1<=m,n<=N}`; `N = 0` gives exactly 1.
pub fn diagonal_correlation<T: Real>(k: &CouplingK<T>, n: usize) -> CorrelationResult<T> {
    ToeplitzSymbol::new(k, n.max(1)).correlation(n)
}

/// `<s_00 s_NN> - M^2`.
pub fn correlation_deviation<T: Real>(k: &CouplingK<T>, n: usize) -> Complex<T> {
    diagonal_correlation(k, n).value - magnetization_squared(k)
}
