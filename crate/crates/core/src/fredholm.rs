//! Truncated Hankel operators `H_N(Lambda)`, `H_N(Lambda^-1)`, the Fredholm
//! determinant `det(I - K_N)` with `K_N = H_N(Lambda) H_N(Lambda^-1)`, and the
//! sum `S = sum_{N>=1} [det(I - K_N) - 1]`.
//!
//! Multiplying `det(I - K_N)` by `M^2` reproduces the Toeplitz determinant of
//! [`crate::toeplitz`]; the two modules check each other.

use std::sync::RwLock;

use num_complex::Complex;
use serde::Serialize;

use crate::coupling::CouplingK;
use crate::error::{Error, Result};
use crate::linalg::{determinant, Matrix};
use crate::scalar::Real;
use crate::series::{lambda_series, SeriesCoeffs};

/// Hard cap on the Hankel truncation size.
pub const MAX_CUTOFF: usize = 4096;

/// Cap on the number of `N` terms summed for `S`.
pub const MAX_TERMS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct HankelTruncation<T: Real> {
    pub n: usize,
    pub cutoff: usize,
    /// `cutoff x cutoff`, entry `(i, j)` is the coefficient of degree `N + i + j + 1`.
    pub entries: Matrix<T>,
    /// Bound on the absolute sum of the coefficients beyond the truncation.
    pub tail_bound: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FredholmResult<T: Real> {
    pub n: usize,
    pub det_value: Complex<T>,
    pub cutoff_used: usize,
    pub est_error: T,
}

/// `S` with its bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FredholmSum<T: Real> {
    pub value: Complex<T>,
    pub terms_used: usize,
    pub est_error: T,
}

/// The matrix of `H_N(psi)` restricted to `0 <= i, j < cutoff`.
pub fn hankel_matrix<T: Real>(
    coeffs: &SeriesCoeffs<T>,
    n: usize,
    cutoff: usize,
    k_abs: T,
) -> Result<HankelTruncation<T>> {
    if n == 0 || cutoff == 0 {
        return Err(Error::InvalidArgument(
            "Hankel shift and cutoff must be positive".into(),
        ));
    }
    let required = n + 2 * cutoff - 1;
    let available = coeffs.max_degree().max(0) as usize;
    if available < required {
        return Err(Error::SeriesTooShort {
            required,
            available,
        });
    }
    let entries = Matrix::from_fn(cutoff, |i, j| coeffs.coeff((n + i + j + 1) as i64));
    let c = coeffs.decay_constant(k_abs);
    let tail_bound = if k_abs == T::zero() {
        T::zero()
    } else {
        c * k_abs.powi(required as i32 + 1) / (T::one() - k_abs)
    };
    Ok(HankelTruncation {
        n,
        cutoff,
        entries,
        tail_bound,
    })
}

/// Coefficient tables of `Lambda` and `Lambda^-1` that grow on demand and are
/// shared read-mostly between the determinants of a sweep.
#[derive(Debug)]
pub struct HankelSymbols<T: Real> {
    coupling: CouplingK<T>,
    tables: RwLock<(SeriesCoeffs<T>, SeriesCoeffs<T>)>,
}

impl<T: Real> HankelSymbols<T> {
    pub fn new(k: &CouplingK<T>) -> Self {
        Self {
            coupling: *k,
            tables: RwLock::new(lambda_series(k, 64)),
        }
    }

    pub fn coupling(&self) -> &CouplingK<T> {
        &self.coupling
    }

    fn ensure(&self, degree: usize) {
        let have = self.tables.read().expect("poisoned").0.max_degree() as usize;
        if have >= degree {
            return;
        }
        let mut w = self.tables.write().expect("poisoned");
        if (w.0.max_degree() as usize) < degree {
            *w = lambda_series(&self.coupling, degree.max(2 * have));
        }
    }

    /// `K_N` truncated to `cutoff`.
    pub fn kernel(&self, n: usize, cutoff: usize) -> Result<Matrix<T>> {
        self.ensure(n + 2 * cutoff - 1);
        let tables = self.tables.read().expect("poisoned");
        let k_abs = self.coupling.modulus();
        let a = hankel_matrix(&tables.0, n, cutoff, k_abs)?;
        let b = hankel_matrix(&tables.1, n, cutoff, k_abs)?;
        Ok(a.entries.matmul(&b.entries))
    }

    /// `det(I - K_N)` at a fixed truncation.
    pub fn det_at(&self, n: usize, cutoff: usize) -> Result<Complex<T>> {
        let k = self.kernel(n, cutoff)?;
        let mut v = determinant(k.identity_minus()).value();
        if self.coupling.is_real() {
            v.im = T::zero();
        }
        Ok(v)
    }

    /// `det(I - K_N)`, doubling the cutoff until two successive values differ
    /// by less than `tol`.
    pub fn fredholm_det(&self, n: usize, tol: T) -> Result<FredholmResult<T>> {
        if n == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        let mut cutoff = initial_cutoff(self.coupling.modulus(), n, tol);
        let mut prev = self.det_at(n, cutoff)?;
        loop {
            let next_cutoff = 2 * cutoff;
            if next_cutoff > MAX_CUTOFF {
                return Err(Error::CutoffExhausted {
                    cap: MAX_CUTOFF,
                    best_re: prev.re.as_f64(),
                    best_im: prev.im.as_f64(),
                    gap: f64::NAN,
                });
            }
            let next = self.det_at(n, next_cutoff)?;
            let gap = (next - prev).norm();
            // below rounding level the doubling test cannot improve further
            let floor = T::lit(16.0) * T::epsilon() * next.norm().max(T::one());
            if gap <= tol.max(floor) {
                return Ok(FredholmResult {
                    n,
                    det_value: next,
                    cutoff_used: next_cutoff,
                    est_error: gap,
                });
            }
            if 2 * next_cutoff > MAX_CUTOFF {
                return Err(Error::CutoffExhausted {
                    cap: MAX_CUTOFF,
                    best_re: next.re.as_f64(),
                    best_im: next.im.as_f64(),
                    gap: gap.as_f64(),
                });
            }
            prev = next;
            cutoff = next_cutoff;
        }
    }
}

/// Smallest `c >= 1` with `|k|^(N + 2c) < tol (1 - |k|)`.
pub fn initial_cutoff<T: Real>(k_abs: T, n: usize, tol: T) -> usize {
    if k_abs == T::zero() {
        return 1;
    }
    let target = tol * (T::one() - k_abs);
    let mut c = 1usize;
    while k_abs.powi((n + 2 * c) as i32) >= target && c < MAX_CUTOFF {
        c += 1;
    }
    c
}

/// `det(I - K_N)` with an adaptively chosen truncation.
pub fn fredholm_det<T: Real>(k: &CouplingK<T>, n: usize, tol: T) -> Result<FredholmResult<T>> {
    HankelSymbols::new(k).fredholm_det(n, tol)
}

/// `S = sum_{N>=1} [det(I - K_N) - 1]`.
///
/// Stops once the current term and the geometric tail estimate built from
/// the ratio of the last two terms are both below `tol`.
pub fn s_via_fredholm<T: Real>(k: &CouplingK<T>, tol: T) -> Result<FredholmSum<T>> {
    let symbols = HankelSymbols::new(k);
    let det_tol = tol * T::lit(1e-2);
    let one = Complex::new(T::one(), T::zero());
    let mut sum = Complex::new(T::zero(), T::zero());
    let mut err = T::zero();
    let mut prev_abs: Option<T> = None;
    let mut growing = 0usize;
    for n in 1..=MAX_TERMS {
        let r = symbols.fredholm_det(n, det_tol)?;
        let term = r.det_value - one;
        sum += term;
        err += r.est_error;
        let a = term.norm();
        if a == T::zero() {
            return Ok(FredholmSum {
                value: sum,
                terms_used: n,
                est_error: err,
            });
        }
        if let Some(p) = prev_abs {
            let q = a / p;
            if q < T::one() {
                growing = 0;
                let tail = a * q / (T::one() - q);
                if a < tol && tail < tol {
                    return Ok(FredholmSum {
                        value: sum,
                        terms_used: n,
                        est_error: err + tail,
                    });
                }
            } else if a < tol * T::lit(1e-3) {
                // rounding-level terms no longer decay monotonically
                return Ok(FredholmSum {
                    value: sum,
                    terms_used: n,
                    est_error: err + a,
                });
            } else {
                growing += 1;
                if growing >= 3 && n >= 8 {
                    return Err(Error::DivergenceSuspected {
                        n,
                        term: a.as_f64(),
                    });
                }
            }
        }
        prev_abs = Some(a);
    }
    Err(Error::DivergenceSuspected {
        n: MAX_TERMS,
        term: prev_abs.unwrap_or(T::nan()).as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::magnetization_squared;
    use crate::scalar::cplx;
    use crate::series::lambda_series;
    use crate::toeplitz::diagonal_correlation;

    fn ck(k: f64) -> CouplingK<f64> {
        CouplingK::physical(k).unwrap()
    }

    #[test]
    fn zero_coupling_is_trivial() {
        let (l, _) = lambda_series(&ck(0.0), 10);
        let h = hankel_matrix(&l, 1, 3, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h.entries[(i, j)], cplx(0.0, 0.0));
            }
        }
        let r = fredholm_det(&ck(0.0), 3, 1e-14).unwrap();
        assert_eq!(r.det_value, cplx(1.0, 0.0));
        let s = s_via_fredholm(&ck(0.0), 1e-14).unwrap();
        assert_eq!(s.value, cplx(0.0, 0.0));
    }

    #[test]
    fn hankel_structure_and_indexing() {
        let (l, _) = lambda_series(&ck(0.6), 40);
        let h = hankel_matrix(&l, 1, 6, 0.6).unwrap();
        assert_eq!(h.entries[(2, 3)], h.entries[(1, 4)]);
        assert_eq!(h.entries[(1, 4)], h.entries[(0, 5)]);
        assert_eq!(h.entries[(0, 0)], l.coeff(2));
        assert!(h.tail_bound > 0.0);
    }

    #[test]
    fn short_series_is_a_hard_error() {
        let (l, _) = lambda_series(&ck(0.6), 10);
        match hankel_matrix(&l, 3, 5, 0.6) {
            Err(Error::SeriesTooShort {
                required,
                available,
            }) => {
                assert_eq!(required, 12);
                assert_eq!(available, 10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn leading_small_k_behaviour_is_minus_trace() {
        // det(I - K_1) = 1 - tr K_1 + O(k^8); trace from coefficients directly
        for k in [0.05, 0.1] {
            let c = ck(k);
            let (l, li) = lambda_series(&c, 80);
            let mut trace = cplx(0.0, 0.0);
            for i in 0..30i64 {
                for j in 0..30i64 {
                    trace += l.coeff(1 + i + j + 1) * li.coeff(1 + j + i + 1);
                }
            }
            let det = fredholm_det(&c, 1, 1e-16).unwrap().det_value;
            let remainder = (det - (cplx(1.0, 0.0) - trace)).norm();
            assert!(remainder < 10.0 * k.powi(8), "k={k}: {remainder}");
            // leading term of tr K_1 is Lambda_2 Lambda^-1_2 = -3k^4/64
            assert!((trace.re + 3.0 * k.powi(4) / 64.0).abs() < 2.0 * k.powi(6));
        }
    }

    #[test]
    fn second_order_fredholm_expansion() {
        // det(I - K) = 1 - sum_p K(p,p) + 1/2 sum_{p1,p2} det[K(p_i,p_j)] - ...
        // over the box p_i < 40, kernel entries built from the coefficients
        let c = ck(0.3);
        let (l, li) = lambda_series(&c, 200);
        for n in 1..=3i64 {
            let kern = |p: i64, q: i64| {
                (0..60i64).fold(cplx(0.0, 0.0), |a, r| {
                    a + l.coeff(n + p + r + 1) * li.coeff(n + r + q + 1)
                })
            };
            let k: Vec<Vec<_>> = (0..40)
                .map(|p| (0..40).map(|q| kern(p, q)).collect())
                .collect();
            let first: Complex<f64> = (0..40).map(|p| k[p][p]).sum();
            let mut second = cplx(0.0, 0.0);
            for p1 in 0..40 {
                for p2 in 0..40 {
                    second += k[p1][p1] * k[p2][p2] - k[p1][p2] * k[p2][p1];
                }
            }
            let expansion = cplx(1.0, 0.0) - first + second * 0.5;
            let det = fredholm_det(&c, n as usize, 1e-16).unwrap().det_value;
            // the third-order term is of size |tr K|^3
            assert!(
                (det - expansion).norm() < first.norm().powi(3).max(1e-15),
                "N={n}"
            );
            if n == 1 {
                assert!((det - expansion).norm() < 1e-3 * (det - (cplx(1.0, 0.0) - first)).norm());
            }
        }
    }

    #[test]
    fn gcbo_identity_against_toeplitz() {
        for k in [0.1, 0.3, 0.5, 0.7] {
            let c = ck(k);
            let m2 = magnetization_squared(&c);
            for n in 1..=8 {
                let d = diagonal_correlation(&c, n).value;
                let f = fredholm_det(&c, n, 1e-15).unwrap().det_value;
                let residual = (d - m2 * f).norm() / d.norm();
                assert!(residual <= 1e-9, "k={k} N={n}: {residual}");
            }
        }
    }

    #[test]
    fn gcbo_identity_for_complex_coupling() {
        let c = CouplingK::analytic(cplx(0.3, 0.4)).unwrap();
        let m2 = magnetization_squared(&c);
        for n in 1..=6 {
            let d = diagonal_correlation(&c, n).value;
            let f = fredholm_det(&c, n, 1e-15).unwrap().det_value;
            assert!((d - m2 * f).norm() / d.norm() <= 1e-9);
        }
    }

    #[test]
    fn conjugation_symmetry() {
        let c = CouplingK::analytic(cplx(0.4, 0.35)).unwrap();
        for n in 1..=4 {
            let a = fredholm_det(&c, n, 1e-15).unwrap().det_value;
            let b = fredholm_det(&c.conj(), n, 1e-15).unwrap().det_value;
            assert!((a.conj() - b).norm() < 1e-15);
        }
    }

    #[test]
    fn terms_decay_monotonically() {
        let symbols = HankelSymbols::new(&ck(0.5));
        let terms: Vec<f64> = (1..=14)
            .map(|n| (symbols.fredholm_det(n, 1e-17).unwrap().det_value - cplx(1.0, 0.0)).norm())
            .collect();
        for w in terms.windows(2).skip(1) {
            assert!(w[1] < w[0], "{terms:?}");
        }
        // |det - 1| at least halves every step for k <= 0.7
        let symbols = HankelSymbols::new(&ck(0.7));
        let terms: Vec<f64> = (1..=10)
            .map(|n| (symbols.fredholm_det(n, 1e-17).unwrap().det_value - cplx(1.0, 0.0)).norm())
            .collect();
        for w in terms.windows(2) {
            assert!(w[1] < 0.5 * w[0], "{terms:?}");
        }
    }

    #[test]
    fn cutoff_doubling_error_shrinks() {
        let symbols = HankelSymbols::new(&ck(0.7));
        let reference = symbols.det_at(2, 64).unwrap();
        let errs: Vec<f64> = [2usize, 4, 8]
            .iter()
            .map(|&c| (symbols.det_at(2, c).unwrap() - reference).norm())
            .collect();
        assert!(
            errs[1] < 0.5 * errs[0] && errs[2] < 0.5 * errs[1],
            "{errs:?}"
        );
    }

    #[test]
    fn s_is_positive_and_small_for_small_k() {
        // S ~ 3 k^4 / 64 to leading order
        let s = s_via_fredholm(&ck(0.1), 1e-16).unwrap();
        assert!((s.value.re / (3e-4 / 64.0) - 1.0).abs() < 0.05, "{:?}", s);
        assert!(s.est_error < 1e-15);
    }
}
