//! The diagonal susceptibility `beta^-1 chi_d = 1 + M^2 (2S - 1)
//! = 1 - M^2 + 2 sum_{N>=1} (D(N) - M^2)` by three independent routes.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::{magnetization_squared, CouplingK};
use crate::error::{Error, Flag, Result};
use crate::fredholm::s_via_fredholm;
use crate::integral::s_total;
use crate::quadrature::QuadratureSpec;
use crate::scalar::Real;
use crate::toeplitz::ToeplitzSymbol;

/// Default largest separation summed by the direct Toeplitz route.
pub const TOEPLITZ_N_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// `S` from Fredholm determinants.
    Fredholm,
    /// Correlation deviations summed directly from Toeplitz determinants.
    ToeplitzDirect,
    /// `S` from the form-factor integrals.
    Integral,
}

impl Route {
    pub const ALL: [Route; 3] = [Route::Fredholm, Route::ToeplitzDirect, Route::Integral];

    pub fn as_str(self) -> &'static str {
        match self {
            Route::Fredholm => "fredholm",
            Route::ToeplitzDirect => "toeplitz_direct",
            Route::Integral => "integral",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "fredholm" => Ok(Route::Fredholm),
            "toeplitz_direct" | "toeplitz" => Ok(Route::ToeplitzDirect),
            "integral" => Ok(Route::Integral),
            _ => Err(Error::InvalidArgument(format!(
                "unknown route {s:?} (expected fredholm, toeplitz_direct or integral)"
            ))),
        }
    }
}

/// Route parameters beyond the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiOptions<T: Real> {
    pub toeplitz_n_max: usize,
    pub integral_n_max: usize,
    pub spec: QuadratureSpec<T>,
}

impl<T: Real> Default for ChiOptions<T> {
    fn default() -> Self {
        Self {
            toeplitz_n_max: TOEPLITZ_N_MAX,
            integral_n_max: 2,
            spec: QuadratureSpec::tensor(48),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiResult<T: Real> {
    pub k: Complex<T>,
    pub beta_inv_chi_d: Complex<T>,
    pub route: Route,
    pub terms_used: usize,
    pub est_error: T,
    pub flags: Vec<Flag>,
}

pub fn chi_d<T: Real>(k: &CouplingK<T>, tol: T, route: Route) -> Result<ChiResult<T>> {
    chi_d_with(k, tol, route, &ChiOptions::default())
}

pub fn chi_d_with<T: Real>(
    k: &CouplingK<T>,
    tol: T,
    route: Route,
    opts: &ChiOptions<T>,
) -> Result<ChiResult<T>> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let m2 = magnetization_squared(k);
    let one = Complex::new(T::one(), T::zero());
    let two = T::lit(2.0);
    let (mut value, terms_used, est_error, flags) = match route {
        Route::Fredholm => {
            let s = s_via_fredholm(k, tol)?;
            let v = one + m2 * (s.value * two - one);
            (v, s.terms_used, two * m2.norm() * s.est_error, Vec::new())
        }
        Route::ToeplitzDirect => toeplitz_direct(k, tol, opts.toeplitz_n_max)?,
        Route::Integral => {
            let total = s_total(k.kappa(), opts.integral_n_max, &opts.spec)?;
            let mut flags: Vec<Flag> = total
                .flags
                .iter()
                .copied()
                .filter(|f| *f != Flag::TailNotConverged)
                .collect();
            if total.tail_estimate > tol {
                flags.push(Flag::TailNotConverged);
            }
            let v = one + m2 * (total.value * two - one);
            (
                v,
                opts.integral_n_max,
                two * m2.norm() * total.est_error,
                flags,
            )
        }
    };
    if k.is_real() {
        value.im = T::zero();
    }
    Ok(ChiResult {
        k: k.k(),
        beta_inv_chi_d: value,
        route,
        terms_used,
        est_error,
        flags,
    })
}

type Assembled<T> = (Complex<T>, usize, T, Vec<Flag>);

/// `1 - M^2 + 2 sum_{N=1}^{N_max} (D(N) - M^2)`; the `N` and `-N` terms of
/// the two-sided sum coincide.
fn toeplitz_direct<T: Real>(k: &CouplingK<T>, tol: T, n_max: usize) -> Result<Assembled<T>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument(
            "toeplitz N_max must be positive".into(),
        ));
    }
    let m2 = magnetization_squared(k);
    let two = T::lit(2.0);
    let symbol = ToeplitzSymbol::new(k, n_max);
    let mut sum = Complex::new(T::zero(), T::zero());
    let mut flags = Vec::new();
    let mut prev: Option<T> = None;
    let mut tail = T::infinity();
    let mut used = 0usize;
    for n in 1..=n_max {
        let r = symbol.correlation(n);
        if !r.is_reliable() && !flags.contains(&Flag::IllConditioned) {
            flags.push(Flag::IllConditioned);
        }
        let dev = r.value - m2;
        sum += dev;
        used = n;
        let a = dev.norm();
        if a == T::zero() {
            tail = T::zero();
            break;
        }
        if let Some(p) = prev {
            let q = a / p;
            tail = if q < T::one() {
                a * q / (T::one() - q)
            } else {
                a * T::from_usize_lossy(n_max)
            };
            if q < T::one() && a < tol && tail < tol {
                break;
            }
        }
        prev = Some(a);
    }
    if !tail.is_finite() || (used == n_max && tail >= tol) {
        flags.push(Flag::TailNotConverged);
    }
    let one = Complex::new(T::one(), T::zero());
    let value = one - m2 + sum * two;
    let err = if tail.is_finite() {
        two * tail
    } else {
        T::infinity()
    };
    Ok((value, used, err, flags))
}

/// One row of a sweep: the requested `k` and its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T: Real> {
    pub k: Complex<T>,
    pub outcome: Result<ChiResult<T>>,
}

/// Evaluates every grid point concurrently; rows come back in grid order and
/// a failing point never stops the others.
pub fn sweep<T: Real>(
    grid: &[Complex<T>],
    route: Route,
    tol: T,
    opts: &ChiOptions<T>,
) -> Vec<SweepRow<T>> {
    grid.par_iter()
        .map(|k| SweepRow {
            k: *k,
            outcome: CouplingK::new(*k).and_then(|c| chi_d_with(&c, tol, route, opts)),
        })
        .collect()
}
