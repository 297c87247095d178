//! Radial scans toward roots of unity on `|kappa| = 1`.
//!
//! The singular integral with first-factor power `ell + 1` stays bounded as
//! `kappa -> eps` radially when `ell < 2n^2 - 1` and grows like
//! `log 1/(1 - |kappa|)` at `ell = 2n^2 - 1`, for `eps` a primitive `n`-th
//! root of unity. Scans fit `Re(value)` against `L = ln(1/(1 - r))` and
//! classify the growth.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Flag, Result};
use crate::integral::{lint_integral, s_n_derivatives};
use crate::quadrature::QuadratureSpec;
use crate::scalar::Real;

/// Primitive root of unity `exp(2 pi i p / q)`, `q >= 2`, `gcd(p, q) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootOfUnity<T: Real> {
    pub p: i64,
    pub q: u64,
    pub value: Complex<T>,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl<T: Real> RootOfUnity<T> {
    /// `p` is reduced modulo `q`.
    pub fn new(p: i64, q: u64) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidArgument(format!(
                "root of unity needs q >= 2 (eps = 1 is excluded), got q = {q}"
            )));
        }
        let pr = p.rem_euclid(q as i64) as u64;
        if gcd(pr, q) != 1 {
            return Err(Error::InvalidArgument(format!(
                "{p}/{q} is not in lowest terms"
            )));
        }
        let value = match (4 * pr).is_multiple_of(q) {
            // quarter turns are exact
            true => match 4 * pr / q {
                1 => Complex::new(T::zero(), T::one()),
                2 => Complex::new(-T::one(), T::zero()),
                _ => Complex::new(T::zero(), -T::one()),
            },
            false => Complex::from_polar(
                T::one(),
                T::TAU() * T::from_u64(pr).expect("p fits") / T::from_u64(q).expect("q fits"),
            ),
        };
        Ok(Self { p, q, value })
    }

    /// Parses `"p/q"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected p/q for a root of unity, got {s:?}"));
        let (p, q) = s.split_once('/').ok_or_else(bad)?;
        let p = p.trim().parse::<i64>().map_err(|_| bad())?;
        let q = q.trim().parse::<u64>().map_err(|_| bad())?;
        Self::new(p, q)
    }

    /// Order of the root.
    pub fn order(&self) -> u64 {
        self.q
    }
}

/// Ordinary least squares of `Re(value)` on `L = ln(1/(1 - r))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogFit<T: Real> {
    pub slope: T,
    pub intercept: T,
    pub r2: T,
    pub slope_se: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Bounded,
    Diverging,
}

impl Growth {
    pub fn as_str(self) -> &'static str {
        match self {
            Growth::Bounded => "bounded",
            Growth::Diverging => "diverging",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialScan<T: Real> {
    pub epsilon: RootOfUnity<T>,
    pub n: usize,
    pub ell: u32,
    pub radii: Vec<T>,
    pub values: Vec<Complex<T>>,
    pub errors: Vec<T>,
    pub fit_slope: T,
    pub fit_intercept: T,
    pub fit_r2: T,
    pub fit_slope_se: T,
    pub growth: Growth,
    pub flags: Vec<Flag>,
}

impl<T: Real> RadialScan<T> {
    pub fn fit(&self) -> LogFit<T> {
        LogFit {
            slope: self.fit_slope,
            intercept: self.fit_intercept,
            r2: self.fit_r2,
            slope_se: self.fit_slope_se,
        }
    }

    /// `max |value| / min |value|` over the grid.
    pub fn range_ratio(&self) -> T {
        range_ratio(&self.values)
    }
}

fn range_ratio<T: Real>(values: &[Complex<T>]) -> T {
    let (lo, hi) = values
        .iter()
        .fold((T::infinity(), T::zero()), |(lo, hi), v| {
            (lo.min(v.norm()), hi.max(v.norm()))
        });
    hi / lo
}

/// Radii `1 - 2^-j` for `j = j0..=j1`.
pub fn radii_grid<T: Real>(j0: u32, j1: u32) -> Vec<T> {
    (j0..=j1)
        .map(|j| T::one() - T::lit(2f64.powi(-(j as i32))))
        .collect()
}

/// The standard grid `j = 4..=10`.
pub fn default_radii<T: Real>() -> Vec<T> {
    radii_grid(4, 10)
}

fn check_radii<T: Real>(radii: &[T]) -> Result<()> {
    if radii.iter().any(|r| !(*r > T::zero() && *r < T::one())) {
        return Err(Error::InvalidArgument("radii must lie in (0, 1)".into()));
    }
    if radii.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "radii must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn abscissa<T: Real>(r: T) -> T {
    -(T::one() - r).ln()
}

/// Least-squares fit of `Re(values)` on `ln(1/(1 - r))`; needs four points.
pub fn log_fit<T: Real>(radii: &[T], values: &[Complex<T>]) -> Result<LogFit<T>> {
    if radii.len() != values.len() {
        return Err(Error::InvalidArgument(
            "radii and values differ in length".into(),
        ));
    }
    if radii.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "need at least 4 points, got {}",
            radii.len()
        )));
    }
    let l: Vec<T> = radii.iter().map(|r| abscissa(*r)).collect();
    let v: Vec<T> = values.iter().map(|z| z.re).collect();
    ols(&l, &v)
}

fn ols<T: Real>(l: &[T], v: &[T]) -> Result<LogFit<T>> {
    let m = T::from_usize_lossy(l.len());
    let lbar = l.iter().fold(T::zero(), |a, x| a + *x) / m;
    let vbar = v.iter().fold(T::zero(), |a, x| a + *x) / m;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut sst = T::zero();
    for (x, y) in l.iter().zip(v) {
        sxx += (*x - lbar) * (*x - lbar);
        sxy += (*x - lbar) * (*y - vbar);
        sst += (*y - vbar) * (*y - vbar);
    }
    if !(sxx > T::epsilon() * lbar.abs().max(T::one())) {
        return Err(Error::DegenerateFit(
            "abscissas are (nearly) identical".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = vbar - slope * lbar;
    let ssr = l.iter().zip(v).fold(T::zero(), |a, (x, y)| {
        let r = *y - intercept - slope * *x;
        a + r * r
    });
    let r2 = if sst > T::zero() {
        (T::one() - ssr / sst).max(T::zero()).min(T::one())
    } else if ssr == T::zero() {
        T::one()
    } else {
        T::zero()
    };
    let dof = m - T::lit(2.0);
    let slope_se = if dof > T::zero() {
        (ssr / dof / sxx).sqrt()
    } else {
        T::zero()
    };
    Ok(LogFit {
        slope,
        intercept,
        r2,
        slope_se,
    })
}

/// Diverging iff the slope is more than five standard errors from zero, the
/// values move by more than three times the largest error estimate, and the
/// slope over the last four points keeps at least 3/4 of the full slope
/// (a convergent approach flattens out there, a logarithm does not).
pub fn classify<T: Real>(radii: &[T], values: &[Complex<T>], errors: &[T]) -> Result<Growth> {
    let fit = log_fit(radii, values)?;
    Ok(classify_with(&fit, radii, values, errors))
}

fn classify_with<T: Real>(
    fit: &LogFit<T>,
    radii: &[T],
    values: &[Complex<T>],
    errors: &[T],
) -> Growth {
    let significant = fit.slope.abs() > T::lit(5.0) * fit.slope_se;
    let (lo, hi) = values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| {
            (lo.min(v.re), hi.max(v.re))
        });
    let noise = errors.iter().fold(T::zero(), |a, e| a.max(*e));
    let moves = hi - lo > T::lit(3.0) * noise;
    let tail = values.len() - 4;
    let persistent = match log_fit(&radii[tail..], &values[tail..]) {
        Ok(last) if fit.slope != T::zero() => last.slope / fit.slope >= T::lit(0.75),
        _ => false,
    };
    if significant && moves && persistent {
        Growth::Diverging
    } else {
        Growth::Bounded
    }
}

fn merge_flags(into: &mut Vec<Flag>, from: &[Flag]) {
    for f in from {
        if !into.contains(f) {
            into.push(*f);
        }
    }
}

/// Scans the singular integral at `r eps` for each radius. `eps` must be an
/// `n`-th root of unity.
pub fn radial_scan<T: Real>(
    epsilon: RootOfUnity<T>,
    n: usize,
    ell: u32,
    radii: &[T],
    spec: &QuadratureSpec<T>,
) -> Result<RadialScan<T>> {
    if epsilon.q != n as u64 {
        return Err(Error::InvalidArgument(format!(
            "scan of S_{n} needs a primitive {n}-th root of unity, got order {}",
            epsilon.q
        )));
    }
    scan_main_term(epsilon, n, ell, radii, spec)
}

fn scan_main_term<T: Real>(
    epsilon: RootOfUnity<T>,
    n: usize,
    ell: u32,
    radii: &[T],
    spec: &QuadratureSpec<T>,
) -> Result<RadialScan<T>> {
    check_radii(radii)?;
    let points: Vec<_> = radii
        .par_iter()
        .map(|r| lint_integral(epsilon.value * *r, n, ell, spec))
        .collect::<Result<_>>()?;
    let values: Vec<_> = points.iter().map(|p| p.value).collect();
    let errors: Vec<_> = points.iter().map(|p| p.abs_error_est).collect();
    let mut flags = Vec::new();
    for p in &points {
        merge_flags(&mut flags, &p.flags);
    }
    build_scan(epsilon, n, ell, radii, values, errors, flags)
}

fn build_scan<T: Real>(
    epsilon: RootOfUnity<T>,
    n: usize,
    ell: u32,
    radii: &[T],
    values: Vec<Complex<T>>,
    errors: Vec<T>,
    flags: Vec<Flag>,
) -> Result<RadialScan<T>> {
    let fit = log_fit(radii, &values)?;
    let growth = classify_with(&fit, radii, &values, &errors);
    Ok(RadialScan {
        epsilon,
        n,
        ell,
        radii: radii.to_vec(),
        values,
        errors,
        fit_slope: fit.slope,
        fit_intercept: fit.intercept,
        fit_r2: fit.r2,
        fit_slope_se: fit.slope_se,
        growth,
        flags,
    })
}

/// Derivative-order threshold `2q^2 - 1` at a primitive `q`-th root.
pub fn divergence_order(q: u64) -> u64 {
    2 * q * q - 1
}

/// Largest root order `m` at which `S` can fail to be `C^ell` on the
/// boundary: `m <= sqrt((ell + 1) / 2)`.
pub fn max_exceptional_order(ell: u64) -> u64 {
    let mut m = 0u64;
    while 2 * (m + 1) * (m + 1) <= ell + 1 {
        m += 1;
    }
    m
}

/// How each `S_n` is probed in [`smoothness_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Proxy {
    /// The singular integral with power `ell + 1`, the leading part of
    /// `S_n^{(ell)}`.
    MainTerm,
    /// `S_n^{(ell)}` itself, differentiated under the integral sign.
    Exact,
}

impl Proxy {
    pub fn as_str(self) -> &'static str {
        match self {
            Proxy::MainTerm => "main_term",
            Proxy::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessRow<T: Real> {
    pub ell: u32,
    /// One scan per `S_n`, `n = 1, 2`.
    pub components: Vec<RadialScan<T>>,
    /// Sum of the component values at each radius.
    pub total: Vec<Complex<T>>,
    pub growth: Growth,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessReport<T: Real> {
    pub epsilon: RootOfUnity<T>,
    pub proxy: Proxy,
    pub radii: Vec<T>,
    pub rows: Vec<SmoothnessRow<T>>,
}

/// Orders `ell = 0..=ell_max` of `S_1 + S_2` scanned toward `eps`; a row
/// diverges when any component does.
pub fn smoothness_probe<T: Real>(
    ell_max: u32,
    epsilon: RootOfUnity<T>,
    spec: &QuadratureSpec<T>,
    proxy: Proxy,
    radii: &[T],
) -> Result<SmoothnessReport<T>> {
    check_radii(radii)?;
    let mut per_n: Vec<Vec<RadialScan<T>>> = Vec::new();
    for n in 1..=2usize {
        let scans = match proxy {
            Proxy::MainTerm => (0..=ell_max)
                .map(|ell| scan_main_term(epsilon, n, ell, radii, spec))
                .collect::<Result<Vec<_>>>()?,
            Proxy::Exact => exact_scans(epsilon, n, ell_max, radii, spec)?,
        };
        per_n.push(scans);
    }
    let rows = (0..=ell_max)
        .map(|ell| {
            let components: Vec<RadialScan<T>> =
                per_n.iter().map(|s| s[ell as usize].clone()).collect();
            let total = (0..radii.len())
                .map(|i| {
                    components
                        .iter()
                        .fold(Complex::new(T::zero(), T::zero()), |a, c| a + c.values[i])
                })
                .collect();
            let growth = if components.iter().any(|c| c.growth == Growth::Diverging) {
                Growth::Diverging
            } else {
                Growth::Bounded
            };
            SmoothnessRow {
                ell,
                components,
                total,
                growth,
            }
        })
        .collect();
    Ok(SmoothnessReport {
        epsilon,
        proxy,
        radii: radii.to_vec(),
        rows,
    })
}

/// Derivatives, their error estimates and flags at one radius.
type PointJets<T> = (Vec<Complex<T>>, Vec<T>, Vec<Flag>);

/// Scans of `S_n^{(ell)}` for `ell = 0..=ell_max`, from one Taylor-mode
/// integration per radius.
pub fn exact_scans<T: Real>(
    epsilon: RootOfUnity<T>,
    n: usize,
    ell_max: u32,
    radii: &[T],
    spec: &QuadratureSpec<T>,
) -> Result<Vec<RadialScan<T>>> {
    check_radii(radii)?;
    let eval = |r: &T| -> Result<PointJets<T>> {
        let kappa = epsilon.value * *r;
        let t = match ell_max {
            0..=7 => s_n_derivatives::<T, 8>(kappa, n, spec)?,
            8..=15 => s_n_derivatives::<T, 16>(kappa, n, spec)?,
            _ => {
                return Err(Error::InvalidArgument(
                    "exact derivatives are available up to order 15".into(),
                ))
            }
        };
        Ok((t.derivatives, t.abs_errors, t.flags))
    };
    let points = radii.par_iter().map(eval).collect::<Result<Vec<_>>>()?;
    (0..=ell_max)
        .map(|ell| {
            let e = ell as usize;
            let values = points.iter().map(|p| p.0[e]).collect();
            let errors = points.iter().map(|p| p.1[e]).collect();
            let mut flags = Vec::new();
            for p in &points {
                merge_flags(&mut flags, &p.2);
            }
            build_scan(epsilon, n, ell, radii, values, errors, flags)
        })
        .collect()
}
