//! Model parameters: the coupling `k`, its square `kappa`, and the
//! spontaneous magnetization.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `k` real in `[0, 1)`: an actual temperature below `T_c`.
    Physical,
    /// Complex `k` in the open unit disc.
    Analytic,
}

/// The coupling `k = sinh(2 beta J)^-2` together with `kappa = k^2`.
///
/// Always satisfies `|k| < 1`. In physical mode `k` is real and non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingK<T: Real> {
    k: Complex<T>,
    kappa: Complex<T>,
    mode: Mode,
}

impl<T: Real> CouplingK<T> {
    /// Physical coupling `0 <= k < 1`.
    pub fn physical(k: T) -> Result<Self> {
        if !(k >= T::zero() && k < T::one()) {
            return Err(Error::OutsideUnitInterval {
                what: "physical k",
                value: k.as_f64(),
            });
        }
        Ok(Self::build(real(k), Mode::Physical))
    }

    /// Complex coupling in the open unit disc. A real non-negative value is
    /// still reported in analytic mode; use [`CouplingK::physical`] for that.
    pub fn analytic(k: Complex<T>) -> Result<Self> {
        let modulus = k.norm();
        if !(modulus < T::one()) {
            return Err(Error::OutsideDisc {
                modulus: modulus.as_f64(),
            });
        }
        Ok(Self::build(k, Mode::Analytic))
    }

    /// Picks physical mode whenever `k` is real and in `[0, 1)`.
    pub fn new(k: Complex<T>) -> Result<Self> {
        if k.im == T::zero() && k.re >= T::zero() {
            Self::physical(k.re)
        } else {
            Self::analytic(k)
        }
    }

    /// Recovers `k` as the principal square root of `kappa`.
    pub fn from_kappa(kappa: Complex<T>) -> Result<Self> {
        let k = if kappa.im == T::zero() && kappa.re >= T::zero() {
            real(kappa.re.sqrt())
        } else {
            kappa.sqrt()
        };
        Self::new(k)
    }

    fn build(k: Complex<T>, mode: Mode) -> Self {
        Self {
            k,
            kappa: k * k,
            mode,
        }
    }

    pub fn k(&self) -> Complex<T> {
        self.k
    }

    pub fn kappa(&self) -> Complex<T> {
        self.kappa
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn modulus(&self) -> T {
        self.k.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.k.re == T::zero() && self.k.im == T::zero()
    }

    /// True when every symbol coefficient is real (k has zero imaginary part).
    pub fn is_real(&self) -> bool {
        self.k.im == T::zero()
    }

    /// Complex conjugate coupling (stays in the same mode class).
    pub fn conj(&self) -> Self {
        Self::build(self.k.conj(), self.mode)
    }
}

/// `k = sinh(2 betaJ)^-2`, rejecting inputs on the high-temperature side.
pub fn k_from_temperature<T: Real>(beta_j: T) -> Result<CouplingK<T>> {
    if !(beta_j >= T::zero()) || !beta_j.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "betaJ must be a positive finite number, got {beta_j}"
        )));
    }
    let s = (T::lit(2.0) * beta_j).sinh();
    let k = (s * s).recip();
    if !(k < T::one()) {
        return Err(Error::PhaseViolation {
            beta_j: beta_j.as_f64(),
            k: k.as_f64(),
        });
    }
    CouplingK::physical(k)
}

/// Spontaneous magnetization `M = (1 - k^2)^(1/8)`, principal branch.
pub fn magnetization<T: Real>(k: &CouplingK<T>) -> Complex<T> {
    principal_pow(Complex::new(T::one(), T::zero()) - k.kappa(), T::lit(0.125))
}

/// `M^2 = (1 - k^2)^(1/4)`, computed directly rather than by squaring.
pub fn magnetization_squared<T: Real>(k: &CouplingK<T>) -> Complex<T> {
    principal_pow(Complex::new(T::one(), T::zero()) - k.kappa(), T::lit(0.25))
}

fn principal_pow<T: Real>(z: Complex<T>, p: T) -> Complex<T> {
    if z.im == T::zero() && z.re > T::zero() {
        real(z.re.powf(p))
    } else {
        z.powf(p)
    }
}
