//! Taylor and Laurent coefficients of the symbols `phi`, `phi_+`, `phi_-`,
//! `Lambda` and `Lambda^-1`.
//!
//! Every symbol is a product of two half-integer powers of `1 - k z`, so all
//! coefficients come from the binomial recurrence and discrete convolution.
//! For the exponents used here `|c_{m+1} / c_m| <= |k|`, hence `|c_m| <= |k|^m`
//! and every tail below is bounded by a geometric series.

use num_complex::Complex;
use serde::Serialize;

use crate::coupling::CouplingK;
use crate::scalar::Real;

/// Default bound on the dropped tail of a one-sided binomial series.
pub const DEFAULT_TAIL_TARGET: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfExponent {
    /// Exponent `+1/2`.
    PlusHalf,
    /// Exponent `-1/2`.
    MinusHalf,
}

impl HalfExponent {
    fn value<T: Real>(self) -> T {
        match self {
            HalfExponent::PlusHalf => T::lit(0.5),
            HalfExponent::MinusHalf => T::lit(-0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// `(1 - k x)^e`, a plain one-sided binomial series.
    Binomial(HalfExponent),
    /// `phi_+(xi) = (1 - k xi)^(-1/2)`, nonnegative degrees.
    PhiPlus,
    /// `phi_-(xi) = (1 - k / xi)^(1/2)`, nonpositive degrees.
    PhiMinus,
    /// `phi = phi_+ phi_-`, Laurent.
    PhiFull,
    /// `Lambda = phi_- / phi_+`, Laurent and symmetric in degree.
    Lambda,
    /// `Lambda^-1`, Laurent and symmetric in degree.
    LambdaInv,
}

/// Coefficients on the contiguous degree range
/// `min_degree ..= min_degree + coeffs.len() - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesCoeffs<T: Real> {
    pub kind: SeriesKind,
    pub min_degree: i64,
    pub coeffs: Vec<Complex<T>>,
    /// Bound on the sup-norm (on the unit circle) of everything dropped.
    pub truncation_error: T,
}

impl<T: Real> SeriesCoeffs<T> {
    pub fn max_degree(&self) -> i64 {
        self.min_degree + self.coeffs.len() as i64 - 1
    }

    /// Coefficient at `degree`, zero outside the stored range.
    pub fn coeff(&self, degree: i64) -> Complex<T> {
        let idx = degree - self.min_degree;
        if idx < 0 {
            return Complex::new(T::zero(), T::zero());
        }
        self.coeffs
            .get(idx as usize)
            .copied()
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    /// Sums the stored coefficients at `xi`.
    pub fn evaluate(&self, xi: Complex<T>) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (i, c) in self.coeffs.iter().enumerate() {
            let deg = self.min_degree + i as i64;
            acc += *c * xi.powi(deg as i32);
        }
        acc
    }

    pub fn meets(&self, target: T) -> bool {
        self.truncation_error <= target
    }

    /// Smallest `C` with `|c_m| <= C |k|^m` over the stored positive degrees.
    pub fn decay_constant(&self, k_abs: T) -> T {
        let mut c = T::zero();
        for m in 1..=self.max_degree() {
            let a = self.coeff(m).norm();
            if a == T::zero() {
                continue;
            }
            c = c.max(a / k_abs.powi(m as i32));
        }
        c
    }
}

/// Length `len` such that `|k|^len / (1 - |k|) < target`.
pub fn required_len<T: Real>(k_abs: T, target: T) -> usize {
    if k_abs == T::zero() {
        return 1;
    }
    let one = T::one();
    let mut len = 1usize;
    let mut p = k_abs;
    while p / (one - k_abs) >= target && len < 1_000_000 {
        p *= k_abs;
        len += 1;
    }
    len
}

fn binomial_raw<T: Real>(exponent: HalfExponent, k: Complex<T>, len: usize) -> Vec<Complex<T>> {
    let e: T = exponent.value();
    let mut out = Vec::with_capacity(len);
    let mut c = Complex::new(T::one(), T::zero());
    for m in 0..len {
        out.push(c);
        let mf = T::from_usize_lossy(m);
        c = c * k * ((mf - e) / (mf + T::one()));
    }
    out
}

/// Taylor coefficients of `(1 - k x)^e` for degrees `0..len`.
///
/// Uses `c_0 = 1`, `c_{m+1} = c_m k (m - e) / (m + 1)`; the tail bound is
/// `|c_len| / (1 - |k|)`.
pub fn binomial_half_series<T: Real>(
    exponent: HalfExponent,
    k: Complex<T>,
    len: usize,
) -> SeriesCoeffs<T> {
    let len = len.max(1);
    let mut coeffs = binomial_raw(exponent, k, len + 1);
    let next = coeffs.pop().expect("len + 1 >= 1").norm();
    let k_abs = k.norm();
    let truncation_error = if k_abs == T::zero() {
        T::zero()
    } else {
        next / (T::one() - k_abs)
    };
    SeriesCoeffs {
        kind: SeriesKind::Binomial(exponent),
        min_degree: 0,
        coeffs,
        truncation_error,
    }
}

/// `phi_+(xi) = (1 - k xi)^(-1/2)` with `phi_+(0) = 1`.
pub fn phi_plus<T: Real>(k: &CouplingK<T>, len: usize) -> SeriesCoeffs<T> {
    let mut s = binomial_half_series(HalfExponent::MinusHalf, k.k(), len);
    s.kind = SeriesKind::PhiPlus;
    s
}

/// `phi_-(xi) = (1 - k / xi)^(1/2)` with `phi_-(inf) = 1`.
pub fn phi_minus<T: Real>(k: &CouplingK<T>, len: usize) -> SeriesCoeffs<T> {
    let s = binomial_half_series(HalfExponent::PlusHalf, k.k(), len);
    let n = s.coeffs.len();
    SeriesCoeffs {
        kind: SeriesKind::PhiMinus,
        min_degree: -(n as i64 - 1),
        coeffs: s.coeffs.into_iter().rev().collect(),
        truncation_error: s.truncation_error,
    }
}

/// Laurent coefficient at `degree` of `u(xi) w(1/xi)` for one-sided `u`, `w`.
fn laurent_product_coeff<T: Real>(u: &[Complex<T>], w: &[Complex<T>], degree: i64) -> Complex<T> {
    let (a, b, shift) = if degree >= 0 {
        (u, w, degree as usize)
    } else {
        (w, u, (-degree) as usize)
    };
    let mut acc = Complex::new(T::zero(), T::zero());
    if shift >= a.len() {
        return acc;
    }
    let terms = (a.len() - shift).min(b.len());
    // smallest terms first
    for j in (0..terms).rev() {
        acc += a[shift + j] * b[j];
    }
    acc
}

/// Symmetric Laurent product `u(xi) u(1/xi)` on degrees `-max_degree..=max_degree`.
fn symmetric_laurent<T: Real>(
    kind: SeriesKind,
    exponent: HalfExponent,
    k: &CouplingK<T>,
    max_degree: usize,
    tail_target: T,
) -> SeriesCoeffs<T> {
    let k_abs = k.modulus();
    let extra = required_len(k_abs, tail_target);
    let u = binomial_raw(exponent, k.k(), max_degree + extra);
    let positive: Vec<Complex<T>> = (0..=max_degree)
        .map(|m| laurent_product_coeff(&u, &u, m as i64))
        .collect();
    let mut coeffs = Vec::with_capacity(2 * max_degree + 1);
    coeffs.extend(positive.iter().skip(1).rev().copied());
    coeffs.extend(positive.iter().copied());
    SeriesCoeffs {
        kind,
        min_degree: -(max_degree as i64),
        coeffs,
        truncation_error: laurent_tail(k_abs, max_degree, extra),
    }
}

/// Bound on what a truncated Laurent product drops: the per-coefficient
/// dropped convolution terms plus the coefficients beyond `max_degree`.
fn laurent_tail<T: Real>(k_abs: T, max_degree: usize, extra: usize) -> T {
    if k_abs == T::zero() {
        return T::zero();
    }
    let one = T::one();
    let k2 = k_abs * k_abs;
    // |coeff_m| <= |k|^m / (1 - |k|^2); two-sided geometric tail past max_degree
    let beyond = T::lit(2.0) * k_abs.powi(max_degree as i32 + 1) / ((one - k2) * (one - k_abs));
    let dropped =
        T::from_usize_lossy(2 * max_degree + 1) * k_abs.powi(2 * extra as i32) / (one - k2);
    beyond + dropped
}

/// Fourier coefficients of `phi = [(1 - k/xi) / (1 - k xi)]^(1/2)` on
/// degrees `-max_degree..=max_degree`.
pub fn phi_full<T: Real>(k: &CouplingK<T>, max_degree: usize) -> SeriesCoeffs<T> {
    let k_abs = k.modulus();
    let extra = required_len(k_abs, T::lit(DEFAULT_TAIL_TARGET));
    let len = max_degree + extra;
    let plus = binomial_raw(HalfExponent::MinusHalf, k.k(), len);
    let minus = binomial_raw(HalfExponent::PlusHalf, k.k(), len);
    let d = max_degree as i64;
    let coeffs = (-d..=d)
        .map(|m| laurent_product_coeff(&plus, &minus, m))
        .collect();
    SeriesCoeffs {
        kind: SeriesKind::PhiFull,
        min_degree: -d,
        coeffs,
        truncation_error: laurent_tail(k_abs, max_degree, extra),
    }
}

/// The `m`-th Fourier coefficient `phi_m`, using one-sided series of length
/// `|m| + len`.
pub fn phi_m<T: Real>(k: &CouplingK<T>, m: i64, len: usize) -> Complex<T> {
    let n = m.unsigned_abs() as usize + len.max(1);
    let plus = binomial_raw(HalfExponent::MinusHalf, k.k(), n);
    let minus = binomial_raw(HalfExponent::PlusHalf, k.k(), n);
    laurent_product_coeff(&plus, &minus, m)
}

/// Laurent coefficients of `Lambda = sqrt((1 - k xi)(1 - k/xi))` and of its
/// reciprocal on degrees `-max_degree..=max_degree`.
pub fn lambda_series<T: Real>(
    k: &CouplingK<T>,
    max_degree: usize,
) -> (SeriesCoeffs<T>, SeriesCoeffs<T>) {
    let target = T::lit(DEFAULT_TAIL_TARGET);
    (
        symmetric_laurent(
            SeriesKind::Lambda,
            HalfExponent::PlusHalf,
            k,
            max_degree,
            target,
        ),
        symmetric_laurent(
            SeriesKind::LambdaInv,
            HalfExponent::MinusHalf,
            k,
            max_degree,
            target,
        ),
    )
}
