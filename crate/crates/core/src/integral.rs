//! Form-factor terms `S_n` as `2n`-dimensional integrals over `[0, 1]^{2n}`:
//!
//! ```text
//! S_n = kappa^{n(n+1)} / ((n!)^2 pi^{2n}) * int  P / (1 - kappa^n P)
//!         * D(x)^2 D(y)^2 / prod_{i,j} (1 - kappa x_i y_j)^2
//!         * prod_i L(x_i) / L(y_i)
//! ```
//!
//! with `P = prod_i x_i y_i`, `D` the Vandermonde product and
//! `L(x) = sqrt((1 - x)(1 - kappa x) / x)`. The equivalent Cauchy form
//! replaces `kappa^{n(n-1)} D(x)^2 D(y)^2 / prod (...)^2` by
//! `det(1 / (1 - kappa x_i y_j))^2`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Flag, Result};
use crate::jet::{Jet, KappaAlgebra};
use crate::linalg::{determinant, Matrix};
use crate::quadrature::{AxisRule, Method, QuadratureSpec};
use crate::scalar::{factorial, Real};

/// `1 - |kappa|^n` below this attaches [`Flag::NearBoundary`].
pub const NEAR_BOUNDARY: f64 = 1e-6;

const MC_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Form {
    /// Squared Cauchy determinant, prefactor `kappa^{2n}`.
    #[serde(rename = "Sn1")]
    Cauchy,
    /// Vandermonde products, prefactor `kappa^{n(n+1)}`.
    #[serde(rename = "Sn2")]
    Vandermonde,
}

impl Form {
    pub fn as_str(self) -> &'static str {
        match self {
            Form::Cauchy => "Sn1",
            Form::Vandermonde => "Sn2",
        }
    }

    /// Power of `kappa` in front of the integral.
    pub fn prefactor_power(self, n: usize) -> u32 {
        match self {
            Form::Cauchy => 2 * n as u32,
            Form::Vandermonde => (n * (n + 1)) as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnResult<T: Real> {
    pub n: usize,
    pub kappa: Complex<T>,
    pub value: Complex<T>,
    pub rel_error_est: T,
    pub abs_error_est: T,
    /// Monte Carlo standard error; `None` for tensor rules.
    pub std_error: Option<T>,
    pub form: Form,
    pub method: Method,
    pub flags: Vec<Flag>,
}

/// A raw integral (no prefactor) with its error estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralEstimate<T: Real> {
    pub value: Complex<T>,
    pub abs_error_est: T,
    pub std_error: Option<T>,
    pub flags: Vec<Flag>,
}

/// Partial sum of the form-factor series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalResult<T: Real> {
    pub value: Complex<T>,
    pub terms: Vec<SnResult<T>>,
    /// `|S_{n_max}| |kappa|^{2 n_max + 2}`.
    pub tail_estimate: T,
    pub est_error: T,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeResult<T: Real> {
    pub value: Complex<T>,
    pub est_error: T,
    pub points: usize,
    pub flags: Vec<Flag>,
}

/// Derivatives `S_n^{(j)}(kappa)` for `j < D`, differentiated under the integral.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorResult<T: Real> {
    pub n: usize,
    pub kappa: Complex<T>,
    pub derivatives: Vec<Complex<T>>,
    pub abs_errors: Vec<T>,
    pub flags: Vec<Flag>,
}

/// `sqrt((1 - x)(1 - kappa x) / x)`, principal branch.
pub fn lambda1<T: Real>(x: T, kappa: Complex<T>) -> Result<Complex<T>> {
    if !(x > T::zero() && x < T::one()) {
        return Err(Error::OutsideUnitInterval {
            what: "x",
            value: x.as_f64(),
        });
    }
    Ok(lambda1_unchecked(x, kappa))
}

fn lambda1_unchecked<T: Real>(x: T, kappa: Complex<T>) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    ((one - x) / x).sqrt() * (one - kappa * x).sqrt()
}

fn check_point<T: Real>(x: &[T], y: &[T], n: usize) {
    assert!(
        x.len() == n && y.len() == n,
        "need n coordinates per variable set"
    );
    debug_assert!(x.iter().chain(y).all(|v| *v > T::zero() && *v < T::one()));
}

fn vandermonde_sq<T: Real>(v: &[T]) -> T {
    let mut p = T::one();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let d = v[j] - v[i];
            p *= d * d;
        }
    }
    p
}

fn first_factor<T: Real>(x: &[T], y: &[T], kappa: Complex<T>, n: usize, power: u32) -> Complex<T> {
    let p = x.iter().chain(y).fold(T::one(), |a, v| a * *v);
    let one = Complex::new(T::one(), T::zero());
    let den = one - kappa.powu(n as u32) * p;
    Complex::new(p, T::zero()) / KappaAlgebra::powu(den, power)
}

/// `D(x)^2 D(y)^2 / prod_{i,j} (1 - kappa x_i y_j)^2`.
fn vandermonde_part<T: Real>(x: &[T], y: &[T], kappa: Complex<T>) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let den = x
        .iter()
        .flat_map(|xi| y.iter().map(move |yj| one - kappa * (*xi * *yj)))
        .fold(one, |a, b| a * b);
    Complex::new(vandermonde_sq(x) * vandermonde_sq(y), T::zero()) / (den * den)
}

/// `det(1 / (1 - kappa x_i y_j))^2`.
fn cauchy_part<T: Real>(x: &[T], y: &[T], kappa: Complex<T>) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let n = x.len();
    let det = match n {
        1 => one / (one - kappa * (x[0] * y[0])),
        _ => determinant(Matrix::from_fn(n, |i, j| {
            one / (one - kappa * (x[i] * y[j]))
        }))
        .value(),
    };
    det * det
}

/// Integrand of the Vandermonde form without `kappa^{n(n+1)} / ((n!)^2 pi^{2n})`.
pub fn sn_integrand_vandermonde<T: Real>(
    x: &[T],
    y: &[T],
    kappa: Complex<T>,
    n: usize,
) -> Complex<T> {
    check_point(x, y, n);
    let lam = x
        .iter()
        .zip(y)
        .fold(Complex::new(T::one(), T::zero()), |a, (xi, yi)| {
            a * lambda1_unchecked(*xi, kappa) / lambda1_unchecked(*yi, kappa)
        });
    first_factor(x, y, kappa, n, 1) * vandermonde_part(x, y, kappa) * lam
}

/// Integrand of the Cauchy form without `kappa^{2n} / ((n!)^2 pi^{2n})`.
pub fn sn_integrand_cauchy<T: Real>(x: &[T], y: &[T], kappa: Complex<T>, n: usize) -> Complex<T> {
    check_point(x, y, n);
    let lam = x
        .iter()
        .zip(y)
        .fold(Complex::new(T::one(), T::zero()), |a, (xi, yi)| {
            a * lambda1_unchecked(*xi, kappa) / lambda1_unchecked(*yi, kappa)
        });
    first_factor(x, y, kappa, n, 1) * cauchy_part(x, y, kappa) * lam
}

/// Integrand in the substituted variables `x = sin^2(pi t / 2)`, Jacobian
/// included, for a point `t` of the full cube `[0, 1]^{2n}` (x first, then y).
/// Finite everywhere on the closed cube.
fn kernel_t<T: Real>(t: &[T], kappa: Complex<T>, n: usize, power: u32, form: Form) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let half_pi = T::FRAC_PI_2();
    let mut x = [T::zero(); 16];
    let mut y = [T::zero(); 16];
    let mut weight = one;
    for i in 0..n {
        let (s, c) = (half_pi * t[i]).sin_cos();
        let xi = s * s;
        x[i] = xi;
        weight = weight * (one - kappa * xi).sqrt() * (T::PI() * xi * c * c);
        let (s, _) = (half_pi * t[n + i]).sin_cos();
        let yi = s * s;
        y[i] = yi;
        weight = weight / (one - kappa * yi).sqrt() * (T::PI() * yi * yi);
    }
    let (x, y) = (&x[..n], &y[..n]);
    let p = x.iter().chain(y).fold(T::one(), |a, v| a * *v);
    let first = KappaAlgebra::powu(one - kappa.powu(n as u32) * p, power);
    let pair = match form {
        Form::Vandermonde => vandermonde_part(x, y, kappa),
        Form::Cauchy => cauchy_part(x, y, kappa),
    };
    // the factor P itself is already inside the Jacobian weights
    weight * pair / first
}

/// Per-axis factors for a fixed `kappa` in algebra `A`.
struct Axes<T: Real, A> {
    x: Vec<T>,
    fx: Vec<A>,
    fy: Vec<A>,
    /// `1 - kappa x_i x_j`, row-major.
    pair: Vec<A>,
}

impl<T: Real, A: KappaAlgebra<T>> Axes<T, A> {
    fn new(rule: &AxisRule<T>, kappa: A) -> Self {
        let m = rule.len();
        let mut fx = Vec::with_capacity(m);
        let mut fy = Vec::with_capacity(m);
        for i in 0..m {
            let root = kappa.one_minus_scaled(rule.x[i]).powr(T::lit(0.5));
            fx.push(root.scale(rule.wx[i]));
            fy.push(root.inv().scale(rule.wy[i]));
        }
        let mut pair = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                pair.push(kappa.one_minus_scaled(rule.x[i] * rule.x[j]));
            }
        }
        Self {
            x: rule.x.clone(),
            fx,
            fy,
            pair,
        }
    }
}

/// Tensor-rule value of the raw integral summed over the ordered simplex
/// `i_1 < i_2`, `j_1 < j_2` (for `n = 2`); equals the full integral divided
/// by `(n!)^2`. Partial sums are combined in a fixed order.
fn tensor_reduced<T: Real, A: KappaAlgebra<T>>(
    kappa: A,
    n: usize,
    power: u32,
    form: Form,
    rule: &AxisRule<T>,
) -> A {
    let ax = Axes::new(rule, kappa);
    let m = rule.len();
    let partials: Vec<A> = match n {
        1 => (0..m)
            .into_par_iter()
            .map(|i| {
                let mut acc = A::zero();
                for j in 0..m {
                    let a = ax.pair[i * m + j];
                    acc += (ax.fx[i] * ax.fy[j]) * a.powu(2 + power).inv();
                }
                acc
            })
            .collect(),
        2 => {
            let kappa2 = kappa * kappa;
            (0..m)
                .into_par_iter()
                .map(|i1| {
                    let mut acc = A::zero();
                    let x1 = ax.x[i1];
                    for i2 in i1 + 1..m {
                        let x2 = ax.x[i2];
                        let dx = x2 - x1;
                        let fxx = match form {
                            Form::Vandermonde => (ax.fx[i1] * ax.fx[i2]).scale(dx * dx),
                            Form::Cauchy => ax.fx[i1] * ax.fx[i2],
                        };
                        let row1 = &ax.pair[i1 * m..(i1 + 1) * m];
                        let row2 = &ax.pair[i2 * m..(i2 + 1) * m];
                        for j1 in 0..m {
                            let y1 = ax.x[j1];
                            let (a11, a21) = (row1[j1], row2[j1]);
                            let f1 = fxx * ax.fy[j1];
                            for j2 in j1 + 1..m {
                                let y2 = ax.x[j2];
                                let (a12, a22) = (row1[j2], row2[j2]);
                                let den = a11 * a12 * a21 * a22;
                                let num = match form {
                                    Form::Vandermonde => {
                                        let dy = y2 - y1;
                                        (f1 * ax.fy[j2]).scale(dy * dy)
                                    }
                                    Form::Cauchy => {
                                        let c = a12 * a21 - a11 * a22;
                                        f1 * ax.fy[j2] * c * c
                                    }
                                };
                                let first = kappa2.one_minus_scaled(x1 * x2 * y1 * y2).powu(power);
                                acc += num * (den * den * first).inv();
                            }
                        }
                    }
                    acc
                })
                .collect()
        }
        _ => unreachable!("tensor rule is limited to n <= 2"),
    };
    let mut total = A::zero();
    for p in partials {
        total += p;
    }
    total
}

/// `(n!)^2` as a scalar.
fn sym_factor<T: Real>(n: usize) -> T {
    let f = factorial::<T>(n);
    f * f
}

fn check_kappa<T: Real>(kappa: Complex<T>) -> Result<()> {
    let m = kappa.norm();
    if !(m < T::one()) {
        return Err(Error::OutsideDisc {
            modulus: m.as_f64(),
        });
    }
    Ok(())
}

fn boundary_gap<T: Real>(kappa: Complex<T>, n: usize) -> T {
    T::one() - kappa.norm().powi(n as i32)
}

fn near_boundary_flags<T: Real>(kappa: Complex<T>, n: usize) -> Vec<Flag> {
    if boundary_gap(kappa, n) < T::lit(NEAR_BOUNDARY) {
        vec![Flag::NearBoundary]
    } else {
        Vec::new()
    }
}

/// Raw integral `int F` over the full cube for `n <= 2` by the tensor rule.
fn tensor_full<T: Real>(
    kappa: Complex<T>,
    n: usize,
    power: u32,
    form: Form,
    spec: &QuadratureSpec<T>,
) -> (Complex<T>, T) {
    let levels = spec.levels_for(T::one() - kappa.norm());
    let (fine, coarse) = AxisRule::pair_for(spec, levels);
    let f = tensor_reduced(kappa, n, power, form, &fine);
    let c = tensor_reduced(kappa, n, power, form, &coarse);
    let s = sym_factor::<T>(n);
    (f * s, (f - c).norm() * s)
}

/// Monte Carlo mean of the substituted integrand over the full cube, and its
/// standard error. Sample `i` of chunk `c` comes from the ChaCha stream `c`
/// under `seed`, so the result does not depend on scheduling.
fn monte_carlo_full<T: Real>(
    kappa: Complex<T>,
    n: usize,
    power: u32,
    form: Form,
    spec: &QuadratureSpec<T>,
) -> (Complex<T>, T) {
    assert!(n <= 16, "Monte Carlo kernel supports n <= 16");
    let samples = spec.mc_samples;
    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<(Complex<T>, T)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut t = [T::zero(); 32];
            let mut sum = Complex::new(T::zero(), T::zero());
            let mut sum_sq = T::zero();
            for _ in 0..count {
                for v in t[..2 * n].iter_mut() {
                    *v = T::lit(rng.gen::<f64>());
                }
                let f = kernel_t(&t[..2 * n], kappa, n, power, form);
                sum += f;
                sum_sq += f.norm_sqr();
            }
            (sum, sum_sq)
        })
        .collect();
    let (mut sum, mut sum_sq) = (Complex::new(T::zero(), T::zero()), T::zero());
    for (s, q) in partials {
        sum += s;
        sum_sq += q;
    }
    let nf = T::from_usize_lossy(samples);
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean.norm_sqr()) / (nf - T::one())).max(T::zero());
    (mean, (var / nf).sqrt())
}

fn raw_integral<T: Real>(
    kappa: Complex<T>,
    n: usize,
    power: u32,
    form: Form,
    spec: &QuadratureSpec<T>,
) -> Result<IntegralEstimate<T>> {
    spec.validate(n)?;
    check_kappa(kappa)?;
    let flags = near_boundary_flags(kappa, n);
    let (value, abs_error_est, std_error) = match spec.method {
        Method::TensorGauss => {
            let (v, e) = tensor_full(kappa, n, power, form, spec);
            (v, e, None)
        }
        Method::MonteCarlo => {
            let (v, se) = monte_carlo_full(kappa, n, power, form, spec);
            (v, se, Some(se))
        }
    };
    let mut value = value;
    if kappa.im == T::zero() {
        value.im = T::zero();
    }
    Ok(IntegralEstimate {
        value,
        abs_error_est,
        std_error,
        flags,
    })
}

/// `S_n(kappa)` in the Vandermonde form.
pub fn s_n<T: Real>(kappa: Complex<T>, n: usize, spec: &QuadratureSpec<T>) -> Result<SnResult<T>> {
    s_n_form(kappa, n, Form::Vandermonde, spec)
}

pub fn s_n_form<T: Real>(
    kappa: Complex<T>,
    n: usize,
    form: Form,
    spec: &QuadratureSpec<T>,
) -> Result<SnResult<T>> {
    spec.validate(n)?;
    check_kappa(kappa)?;
    if kappa.re == T::zero() && kappa.im == T::zero() {
        return Ok(SnResult {
            n,
            kappa,
            value: Complex::new(T::zero(), T::zero()),
            rel_error_est: T::zero(),
            abs_error_est: T::zero(),
            std_error: spec.method.eq(&Method::MonteCarlo).then_some(T::zero()),
            form,
            method: spec.method,
            flags: Vec::new(),
        });
    }
    let raw = raw_integral(kappa, n, 1, form, spec)?;
    let pref =
        kappa.powu(form.prefactor_power(n)) / (sym_factor::<T>(n) * T::PI().powi(2 * n as i32));
    let mut value = raw.value * pref;
    if kappa.im == T::zero() {
        value.im = T::zero();
    }
    let scale = pref.norm();
    let abs_error_est = raw.abs_error_est * scale;
    let rel_error_est = if value.norm() > T::zero() {
        abs_error_est / value.norm()
    } else {
        abs_error_est
    };
    let mut flags = raw.flags;
    if rel_error_est > spec.target_rel_error {
        flags.push(Flag::TargetNotMet);
    }
    Ok(SnResult {
        n,
        kappa,
        value,
        rel_error_est,
        abs_error_est,
        std_error: raw.std_error.map(|s| s * scale),
        form,
        method: spec.method,
        flags,
    })
}

/// `sum_{n <= n_max} S_n`. Terms with `n > 2` switch to Monte Carlo when the
/// spec asks for a tensor rule.
pub fn s_total<T: Real>(
    kappa: Complex<T>,
    n_max: usize,
    spec: &QuadratureSpec<T>,
) -> Result<TotalResult<T>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    check_kappa(kappa)?;
    let mut terms = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let term_spec = if n > 2 && spec.method == Method::TensorGauss {
            QuadratureSpec {
                method: Method::MonteCarlo,
                ..*spec
            }
        } else {
            *spec
        };
        terms.push(s_n(kappa, n, &term_spec)?);
    }
    let value = terms
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |a, t| a + t.value);
    let last = terms.last().expect("n_max >= 1");
    let tail_estimate = last.value.norm() * kappa.norm().powi(2 * n_max as i32 + 2);
    let quad_err = terms.iter().fold(T::zero(), |a, t| a + t.abs_error_est);
    let mut flags: Vec<Flag> = Vec::new();
    for t in &terms {
        for f in &t.flags {
            if !flags.contains(f) {
                flags.push(*f);
            }
        }
    }
    if tail_estimate > spec.target_rel_error * value.norm()
        && !flags.contains(&Flag::TailNotConverged)
    {
        flags.push(Flag::TailNotConverged);
    }
    Ok(TotalResult {
        value,
        est_error: quad_err + tail_estimate,
        terms,
        tail_estimate,
        flags,
    })
}

/// The singular integral with the first factor raised to `ell + 1` and no
/// prefactor; the leading contribution to `d^ell S_n / d kappa^ell`.
pub fn lint_integral<T: Real>(
    kappa: Complex<T>,
    n: usize,
    ell: u32,
    spec: &QuadratureSpec<T>,
) -> Result<IntegralEstimate<T>> {
    raw_integral(kappa, n, ell + 1, Form::Vandermonde, spec)
}

/// `S_n^{(ell)}(kappa)` by the Cauchy integral formula on a circle of the
/// given radius, sampled with the trapezoidal rule.
pub fn d_ell_s_n<T: Real>(
    kappa: Complex<T>,
    n: usize,
    ell: u32,
    radius: T,
    spec: &QuadratureSpec<T>,
) -> Result<DerivativeResult<T>> {
    check_kappa(kappa)?;
    if !(radius > T::zero()) {
        return Err(Error::InvalidArgument(
            "contour radius must be positive".into(),
        ));
    }
    if !(kappa.norm() + radius < T::one()) {
        return Err(Error::ContourOutsideDisc {
            radius: radius.as_f64(),
            center_modulus: kappa.norm().as_f64(),
        });
    }
    let points = (32usize).max(2 * ell as usize + 2).next_multiple_of(2);
    let mut samples = Vec::with_capacity(points);
    let mut max_abs = T::zero();
    let mut max_err = T::zero();
    for j in 0..points {
        let theta = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(points);
        let z = kappa + Complex::from_polar(radius, theta);
        let r = s_n(z, n, spec)?;
        max_abs = max_abs.max(r.value.norm());
        max_err = max_err.max(r.abs_error_est);
        samples.push((theta, r.value));
    }
    let amp = factorial::<T>(ell as usize) / radius.powi(ell as i32);
    let ell_t = T::from_usize_lossy(ell as usize);
    let mean = |step: usize| {
        let mut acc = Complex::new(T::zero(), T::zero());
        let mut count = 0usize;
        for (theta, f) in samples.iter().step_by(step) {
            acc += f * Complex::from_polar(T::one(), -ell_t * *theta);
            count += 1;
        }
        acc / T::from_usize_lossy(count)
    };
    let mut value = mean(1) * amp;
    let half = mean(2) * amp;
    if kappa.im == T::zero() {
        value.im = T::zero();
    }
    let noise = amp * (max_err + T::epsilon() * max_abs * T::lit(8.0));
    let alias = (value - half).norm();
    let mut flags = Vec::new();
    if noise > T::lit(1e-6) * value.norm() && ell > 0 {
        flags.push(Flag::AmplifiedNoise);
    }
    Ok(DerivativeResult {
        value,
        est_error: noise + alias,
        points,
        flags,
    })
}

/// Exact `kappa`-derivatives of `S_n` of orders `0..D` by Taylor-mode
/// arithmetic under the integral (tensor rule, `n <= 2`, Vandermonde form).
pub fn s_n_derivatives<T: Real, const D: usize>(
    kappa: Complex<T>,
    n: usize,
    spec: &QuadratureSpec<T>,
) -> Result<TaylorResult<T>> {
    let (jet, errs, flags) = taylor_integral::<T, D>(kappa, n, 1, spec, true)?;
    Ok(TaylorResult {
        n,
        kappa,
        derivatives: jet.derivatives(),
        abs_errors: errs,
        flags,
    })
}

/// Exact `kappa`-derivatives of the singular integral with first-factor
/// power `ell + 1`, for orders `0..D`.
pub fn lint_derivatives<T: Real, const D: usize>(
    kappa: Complex<T>,
    n: usize,
    ell: u32,
    spec: &QuadratureSpec<T>,
) -> Result<TaylorResult<T>> {
    let (jet, errs, flags) = taylor_integral::<T, D>(kappa, n, ell + 1, spec, false)?;
    Ok(TaylorResult {
        n,
        kappa,
        derivatives: jet.derivatives(),
        abs_errors: errs,
        flags,
    })
}

type TaylorParts<T, const D: usize> = (Jet<T, D>, Vec<T>, Vec<Flag>);

fn taylor_integral<T: Real, const D: usize>(
    kappa: Complex<T>,
    n: usize,
    power: u32,
    spec: &QuadratureSpec<T>,
    with_prefactor: bool,
) -> Result<TaylorParts<T, D>> {
    if D == 0 {
        return Err(Error::InvalidArgument(
            "jet order must be at least 1".into(),
        ));
    }
    spec.validate(n)?;
    if spec.method != Method::TensorGauss {
        return Err(Error::InvalidArgument(
            "exact derivatives need the tensor rule".into(),
        ));
    }
    check_kappa(kappa)?;
    let var = Jet::<T, D>::variable(kappa);
    let levels = spec.levels_for(T::one() - kappa.norm());
    let (fine, coarse) = AxisRule::pair_for(spec, levels);
    let f = tensor_reduced(var, n, power, Form::Vandermonde, &fine);
    let c = tensor_reduced(var, n, power, Form::Vandermonde, &coarse);
    let (mut f, mut c) = if with_prefactor {
        let pref = var
            .powu(Form::Vandermonde.prefactor_power(n))
            .scale(T::one() / T::PI().powi(2 * n as i32));
        (f * pref, c * pref)
    } else {
        let s = sym_factor::<T>(n);
        (f.scale(s), c.scale(s))
    };
    if kappa.im == T::zero() {
        for v in f.c.iter_mut().chain(c.c.iter_mut()) {
            v.im = T::zero();
        }
    }
    let errs = (0..D)
        .map(|j| (f.c[j] - c.c[j]).norm() * factorial::<T>(j))
        .collect();
    Ok((f, errs, near_boundary_flags(kappa, n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::CouplingK;
    use crate::fredholm::HankelSymbols;
    use crate::scalar::cplx;
    use proptest::prelude::*;

    fn spec(nodes: usize) -> QuadratureSpec<f64> {
        QuadratureSpec::tensor(nodes)
    }

    /// Power-series oracle for `S_1`: expand every `kappa`-dependent factor
    /// and integrate monomials against the endpoint weights with Beta
    /// functions.
    fn s1_series(kappa: f64) -> f64 {
        let terms = 160usize;
        // (1 - kx)^{1/2} and (1 - ky)^{-1/2} coefficients
        let mut c = vec![1.0f64; terms];
        let mut d = vec![1.0f64; terms];
        for m in 1..terms {
            let mf = m as f64;
            c[m] = c[m - 1] * (mf - 1.5) / mf;
            d[m] = d[m - 1] * (mf - 0.5) / mf;
        }
        // bx[p] = int x^p sqrt(x (1 - x)) dx = B(p + 3/2, 3/2)
        // by[p] = int y^{p+1} sqrt(y / (1 - y)) dy = B(p + 5/2, 1/2)
        let pi = std::f64::consts::PI;
        let mut bx = vec![pi / 8.0; 3 * terms];
        let mut by = vec![3.0 * pi / 8.0; 3 * terms];
        for p in 1..3 * terms {
            let a = p as f64 + 0.5;
            bx[p] = bx[p - 1] * a / (a + 1.5);
            let a = p as f64 + 1.5;
            by[p] = by[p - 1] * a / (a + 0.5);
        }
        let mut total = 0.0;
        for m in 0..terms {
            let w = (m as f64 + 1.0) * (m as f64 + 2.0) / 2.0 * kappa.powi(m as i32);
            if w.abs() < 1e-30 {
                break;
            }
            let sx: f64 = (0..terms - m)
                .map(|a| c[a] * kappa.powi(a as i32) * bx[m + a])
                .sum();
            let sy: f64 = (0..terms - m)
                .map(|b| d[b] * kappa.powi(b as i32) * by[m + b])
                .sum();
            total += w * sx * sy;
        }
        kappa * kappa / (pi * pi) * total
    }

    /// `S_1 = -sum_N tr K_N` and `S_2 = 1/2 sum_N [(tr K_N)^2 - tr K_N^2]`,
    /// the first two orders of the Fredholm expansion summed over `N`.
    fn fredholm_orders(k: f64) -> (f64, f64) {
        let syms = HankelSymbols::new(&CouplingK::physical(k).unwrap());
        let (mut s1, mut s2) = (0.0, 0.0);
        for n in 1..200 {
            let kn = syms.kernel(n, 40).unwrap();
            let tr = kn.trace().re;
            let tr2 = kn.matmul(&kn).trace().re;
            s1 -= tr;
            s2 += 0.5 * (tr * tr - tr2);
            if tr.abs() < 1e-30 {
                break;
            }
        }
        (s1, s2)
    }

    #[test]
    fn lambda1_basics() {
        assert_eq!(lambda1(0.5, cplx(0.0, 0.0)).unwrap(), cplx(1.0, 0.0));
        assert!(lambda1(0.0, cplx(0.1, 0.0)).is_err());
        assert!(lambda1(1.0, cplx(0.1, 0.0)).is_err());
        let direct = ((1.0 - 0.9) * (1.0 - 0.25 * 0.9) / 0.9f64).sqrt();
        assert!((lambda1(0.9, cplx(0.25, 0.0)).unwrap().re - direct).abs() < 1e-15);
        for (x, k) in [
            (0.1, cplx(0.3, 0.4)),
            (0.77, cplx(-0.9, 0.0)),
            (0.5, cplx(0.0, -0.6)),
        ] {
            let l = lambda1(x, k).unwrap();
            let rhs = cplx(1.0 - x, 0.0) * (cplx(1.0, 0.0) - k * x);
            assert!((l * l * x - rhs).norm() < 1e-15);
        }
    }

    #[test]
    fn n1_integrand_reduces() {
        let (x, y, k) = (0.3, 0.8, cplx(0.5, 0.2));
        let one = cplx(1.0, 0.0);
        let a = one - k * (x * y);
        let expected =
            cplx(x * y, 0.0) / a / (a * a) * lambda1(x, k).unwrap() / lambda1(y, k).unwrap();
        let got = sn_integrand_vandermonde(&[x], &[y], k, 1);
        assert!((got - expected).norm() < 1e-14 * expected.norm());
    }

    #[test]
    fn coincident_coordinates_vanish() {
        let k = cplx(0.4, 0.0);
        assert_eq!(
            sn_integrand_vandermonde(&[0.3, 0.3], &[0.2, 0.7], k, 2).norm(),
            0.0
        );
        assert!(sn_integrand_cauchy(&[0.3, 0.3], &[0.2, 0.7], k, 2).norm() < 1e-14);
    }

    proptest! {
        #[test]
        fn cauchy_and_vandermonde_integrands_agree(
            n in 1usize..=3,
            coords in proptest::collection::vec(0.01f64..0.99, 6),
            re in -0.9f64..0.9, im in -0.4f64..0.4,
        ) {
            let k = cplx(re, im);
            prop_assume!(k.norm() < 0.95);
            let (x, y) = (&coords[..n], &coords[3..3 + n]);
            let v = sn_integrand_vandermonde(x, y, k, n) * k.powu((n * (n - 1)) as u32);
            let c = sn_integrand_cauchy(x, y, k, n);
            // the determinant cancels down from entries of size 1/|1 - k x y|
            let one = cplx(1.0, 0.0);
            let entry = x.iter()
                .flat_map(|a| y.iter().map(move |b| (one - k * (a * b)).norm().recip()))
                .fold(0.0f64, f64::max);
            let lam: f64 = x.iter().zip(y)
                .map(|(a, b)| (lambda1(*a, k).unwrap() / lambda1(*b, k).unwrap()).norm())
                .product();
            let scale = lam * entry.powi(2 * n as i32) * 36.0;
            prop_assert!((v - c).norm() <= 1e-13 * scale, "{v} vs {c}");
        }

        #[test]
        fn substituted_kernel_matches_integrand(
            n in 1usize..=3,
            ts in proptest::collection::vec(0.02f64..0.98, 6),
            re in -0.9f64..0.9,
        ) {
            let k = cplx(re, 0.1);
            let t: Vec<f64> = ts[..n].iter().chain(&ts[3..3 + n]).copied().collect();
            let map = |t: f64| (std::f64::consts::FRAC_PI_2 * t).sin().powi(2);
            let jac = |t: f64| std::f64::consts::PI / 2.0 * (std::f64::consts::PI * t).sin();
            let x: Vec<f64> = t[..n].iter().map(|v| map(*v)).collect();
            let y: Vec<f64> = t[n..].iter().map(|v| map(*v)).collect();
            let j: f64 = t.iter().map(|v| jac(*v)).product();
            let direct = sn_integrand_vandermonde(&x, &y, k, n) * j;
            let sub = kernel_t(&t, k, n, 1, Form::Vandermonde);
            prop_assert!((direct - sub).norm() <= 1e-11 * direct.norm().max(1e-300));
        }
    }

    #[test]
    fn zero_kappa_is_exactly_zero() {
        for n in 1..=4 {
            let s = if n <= 2 {
                spec(16)
            } else {
                QuadratureSpec::monte_carlo(100, 1)
            };
            let r = s_n(cplx(0.0, 0.0), n, &s).unwrap();
            assert_eq!(r.value, cplx(0.0, 0.0));
            assert_eq!(r.abs_error_est, 0.0);
        }
        assert_eq!(
            s_total(cplx(0.0, 0.0), 2, &spec(16)).unwrap().value,
            cplx(0.0, 0.0)
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            s_n(cplx(1.0, 0.0), 1, &spec(16)),
            Err(Error::OutsideDisc { .. })
        ));
        assert!(s_n(cplx(0.1, 0.0), 3, &spec(16)).is_err());
        assert!(s_n(cplx(0.1, 0.0), 0, &spec(16)).is_err());
    }

    #[test]
    fn s1_matches_power_series() {
        for kappa in [0.01, 0.09, 0.25, 0.5, -0.4] {
            let r = s_n(cplx(kappa, 0.0), 1, &spec(64)).unwrap();
            let exact = s1_series(kappa);
            assert!(
                (r.value.re - exact).abs() <= 1e-12 * exact.abs(),
                "kappa={kappa}: {} vs {exact}",
                r.value.re
            );
            assert_eq!(r.value.im, 0.0);
        }
        // leading order 3 kappa^2 / 64
        let s = s_n(cplx(1e-4, 0.0), 1, &spec(32)).unwrap().value.re;
        assert!((s / 1e-8 - 3.0 / 64.0).abs() < 1e-5);
    }

    #[test]
    fn terms_match_fredholm_expansion_orders() {
        for k in [0.3, 0.5, 0.7] {
            let (f1, f2) = fredholm_orders(k);
            let kappa = cplx(k * k, 0.0);
            let s1 = s_n(kappa, 1, &spec(64)).unwrap().value.re;
            let s2 = s_n(kappa, 2, &spec(48)).unwrap().value.re;
            assert!((s1 - f1).abs() <= 1e-11 * f1.abs(), "k={k} S1 {s1} vs {f1}");
            assert!((s2 - f2).abs() <= 1e-8 * f2.abs(), "k={k} S2 {s2} vs {f2}");
        }
    }

    #[test]
    fn node_refinement_converges() {
        let k = cplx(0.5, 0.0);
        let a = s_n(k, 1, &spec(64)).unwrap();
        let b = s_n(k, 1, &spec(96)).unwrap();
        assert!((a.value - b.value).norm() <= 1e-9 * b.value.norm());
        assert!(b.rel_error_est <= 1e-9);
        let c = s_n(k, 2, &spec(24)).unwrap();
        let d = s_n(k, 2, &spec(48)).unwrap();
        assert!(d.abs_error_est < c.abs_error_est);
        assert!((c.value - d.value).norm() <= c.abs_error_est.max(1e-15));
    }

    #[test]
    fn forms_agree_within_error() {
        for kappa in [
            cplx(0.2, 0.0),
            cplx(0.5, 0.0),
            cplx(0.7, 0.0),
            cplx(0.0, 0.5),
        ] {
            for n in 1..=2 {
                let a = s_n_form(kappa, n, Form::Cauchy, &spec(40)).unwrap();
                let b = s_n_form(kappa, n, Form::Vandermonde, &spec(40)).unwrap();
                let tol = a.abs_error_est + b.abs_error_est + 1e-14 * b.value.norm();
                assert!(
                    (a.value - b.value).norm() <= tol,
                    "kappa={kappa} n={n}: {} vs {} (errs {:e} {:e})",
                    a.value,
                    b.value,
                    a.abs_error_est,
                    b.abs_error_est
                );
            }
        }
    }

    #[test]
    fn conjugate_kappa_gives_conjugate_value() {
        let k = cplx(0.3, 0.45);
        for n in 1..=2 {
            let a = s_n(k, n, &spec(32)).unwrap().value;
            let b = s_n(k.conj(), n, &spec(32)).unwrap().value;
            assert!((a.conj() - b).norm() <= 1e-14 * a.norm());
        }
    }

    #[test]
    fn monte_carlo_is_deterministic_and_consistent() {
        let k = cplx(0.4, 0.1);
        let mc = QuadratureSpec::monte_carlo(20_000, 7);
        let a = s_n(k, 1, &mc).unwrap();
        let b = s_n(k, 1, &mc).unwrap();
        assert_eq!(a.value, b.value);
        let se = a.std_error.unwrap();
        assert!(se > 0.0);
        let exact = s_n(k, 1, &spec(48)).unwrap().value;
        assert!((a.value - exact).norm() < 5.0 * se);
        let c = s_n(k, 1, &QuadratureSpec::monte_carlo(20_000, 8)).unwrap();
        assert_ne!(a.value, c.value);
        // n = 2 by both methods
        let mc2 = s_n(k, 2, &QuadratureSpec::monte_carlo(40_000, 3)).unwrap();
        let t2 = s_n(k, 2, &spec(32)).unwrap();
        assert!((mc2.value - t2.value).norm() < 5.0 * mc2.std_error.unwrap());
    }

    #[test]
    fn monte_carlo_three_term_is_tiny_and_finite() {
        let r = s_n(
            cplx(0.25f64, 0.0),
            3,
            &QuadratureSpec::monte_carlo(8192, 11),
        )
        .unwrap();
        assert!(r.value.re.is_finite() && r.value.re.abs() < 1e-6);
        assert_eq!(r.value.im, 0.0);
    }

    #[test]
    fn successive_terms_shrink_like_the_prefactor() {
        let k = cplx(0.25, 0.0);
        let s1 = s_n(k, 1, &spec(48)).unwrap().value.norm();
        let s2 = s_n(k, 2, &spec(32)).unwrap().value.norm();
        let ratio = s2 / s1;
        let scale = 0.25f64.powi(4);
        assert!(ratio > 0.0 && ratio < scale, "{ratio} vs {scale}");
    }

    #[test]
    fn total_matches_fredholm_sum() {
        use crate::fredholm::s_via_fredholm;
        for (k, tol) in [(0.3, 1e-6), (0.2, 1e-8)] {
            let s = s_via_fredholm(&CouplingK::physical(k).unwrap(), 1e-15)
                .unwrap()
                .value
                .re;
            let t = s_total(cplx(k * k, 0.0), 2, &spec(48)).unwrap();
            assert!((t.value.re - s).abs() <= tol, "k={k}");
            assert!(!t.flags.contains(&Flag::TailNotConverged));
        }
    }

    #[test]
    fn lint_with_unit_power_is_the_unscaled_integral() {
        let k = cplx(0.35, -0.2);
        for n in 1..=2 {
            let l = lint_integral(k, n, 0, &spec(32)).unwrap().value;
            let s = s_n(k, n, &spec(32)).unwrap().value;
            let pref = k.powu((n * (n + 1)) as u32)
                / (sym_factor::<f64>(n) * std::f64::consts::PI.powi(2 * n as i32));
            assert!((l * pref - s).norm() <= 1e-13 * s.norm());
        }
        let near = lint_integral(cplx(-(1.0 - 1e-7), 0.0), 1, 0, &spec(16)).unwrap();
        assert!(near.flags.contains(&Flag::NearBoundary));
    }

    #[test]
    fn contour_derivative_checks() {
        let s = spec(48);
        // S_1 = O(kappa^2)
        for ell in [0, 1] {
            let d = d_ell_s_n(cplx(0.0, 0.0), 1, ell, 0.3, &s).unwrap();
            assert!(d.value.norm() < 1e-15, "ell={ell}");
        }
        let d2 = d_ell_s_n(cplx(0.0, 0.0), 1, 2, 0.3, &s).unwrap();
        assert!((d2.value.re - 6.0 / 64.0).abs() < 1e-12);
        // finite-difference oracle
        let k = 0.2;
        let h = 1e-4;
        let f = |x: f64| s_n(cplx(x, 0.0), 1, &s).unwrap().value.re;
        let fd = (f(k + h) - f(k - h)) / (2.0 * h);
        let d1 = d_ell_s_n(cplx(k, 0.0), 1, 1, 0.1, &s).unwrap();
        assert!((d1.value.re - fd).abs() <= 1e-6 * fd.abs());
        // radius independence
        for ell in [1, 2, 3] {
            let a = d_ell_s_n(cplx(0.3, 0.0), 1, ell, 0.1, &s).unwrap().value;
            let b = d_ell_s_n(cplx(0.3, 0.0), 1, ell, 0.2, &s).unwrap().value;
            assert!((a - b).norm() <= 1e-7 * a.norm(), "ell={ell}");
        }
        // conjugation
        let z = cplx(0.2, 0.3);
        let a = d_ell_s_n(z, 1, 2, 0.1, &s).unwrap().value;
        let b = d_ell_s_n(z.conj(), 1, 2, 0.1, &s).unwrap().value;
        assert!((a.conj() - b).norm() <= 1e-10 * a.norm());
        assert!(matches!(
            d_ell_s_n(cplx(0.8, 0.0), 1, 1, 0.25, &s),
            Err(Error::ContourOutsideDisc { .. })
        ));
        let tiny = d_ell_s_n(cplx(0.3, 0.0), 1, 4, 1e-4, &s).unwrap();
        assert!(tiny.flags.contains(&Flag::AmplifiedNoise));
    }

    #[test]
    fn jet_derivatives_match_contour_derivatives() {
        let s = spec(48);
        let z = cplx(0.3, 0.1);
        for n in 1..=2 {
            let t = s_n_derivatives::<f64, 5>(z, n, &s).unwrap();
            let v = s_n(z, n, &s).unwrap().value;
            assert!((t.derivatives[0] - v).norm() <= 1e-13 * v.norm());
            for ell in 1..5u32 {
                let c = d_ell_s_n(z, n, ell, 0.15, &s).unwrap().value;
                let j = t.derivatives[ell as usize];
                assert!(
                    (c - j).norm() <= 1e-8 * j.norm(),
                    "n={n} ell={ell}: {c} vs {j}"
                );
            }
        }
    }

    #[test]
    fn single_precision_smoke() {
        let r = s_n(Complex::new(0.25f32, 0.0), 1, &QuadratureSpec::tensor(24)).unwrap();
        let exact = s1_series(0.25);
        assert!(((r.value.re as f64) - exact).abs() < 1e-5 * exact);
    }
}
