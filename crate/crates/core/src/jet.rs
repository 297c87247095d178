//! Truncated Taylor series in `kappa` ("jets"), used to differentiate the
//! form-factor integrands exactly under the integral sign.
//!
//! [`KappaAlgebra`] is the small set of operations the integrand kernels
//! need. It is implemented for plain complex numbers (value only) and for
//! [`Jet`] (value plus the first `D - 1` derivatives), so one kernel serves
//! both.

use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex;

use crate::scalar::{factorial, Real};

pub trait KappaAlgebra<T: Real>:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + AddAssign
{
    fn constant(c: Complex<T>) -> Self;

    fn zero() -> Self {
        Self::constant(Complex::new(T::zero(), T::zero()))
    }

    fn one() -> Self {
        Self::constant(Complex::new(T::one(), T::zero()))
    }

    fn scale(self, s: T) -> Self;

    fn inv(self) -> Self;

    /// Principal branch of `self^alpha`.
    fn powr(self, alpha: T) -> Self;

    fn powu(self, e: u32) -> Self {
        let mut base = self;
        let mut acc = Self::one();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }

    /// `1 - self * z` for real `z`.
    fn one_minus_scaled(self, z: T) -> Self {
        Self::one() - self.scale(z)
    }
}

impl<T: Real> KappaAlgebra<T> for Complex<T> {
    fn constant(c: Complex<T>) -> Self {
        c
    }

    fn scale(self, s: T) -> Self {
        self * s
    }

    fn inv(self) -> Self {
        Complex::new(T::one(), T::zero()) / self
    }

    fn powr(self, alpha: T) -> Self {
        let half = T::lit(0.5);
        if alpha == half {
            self.sqrt()
        } else if alpha == -half {
            self.sqrt().inv()
        } else if alpha == alpha.round() && alpha.abs() <= T::lit(64.0) {
            let p = KappaAlgebra::powu(self, alpha.abs().to_u32().unwrap_or(0));
            if alpha < T::zero() {
                KappaAlgebra::inv(p)
            } else {
                p
            }
        } else {
            self.powf(alpha)
        }
    }
}

/// Taylor coefficients `c[j] = f^(j)(kappa_0) / j!` for `j < D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<T: Real, const D: usize> {
    pub c: [Complex<T>; D],
}

impl<T: Real, const D: usize> Jet<T, D> {
    /// The independent variable `kappa` expanded about `kappa_0`.
    pub fn variable(kappa0: Complex<T>) -> Self {
        let mut j = <Self as KappaAlgebra<T>>::constant(kappa0);
        if D > 1 {
            j.c[1] = Complex::new(T::one(), T::zero());
        }
        j
    }

    pub fn value(&self) -> Complex<T> {
        self.c[0]
    }

    /// `f^(order)(kappa_0)`.
    pub fn derivative(&self, order: usize) -> Complex<T> {
        self.c[order] * factorial::<T>(order)
    }

    pub fn derivatives(&self) -> Vec<Complex<T>> {
        (0..D).map(|j| self.derivative(j)).collect()
    }
}

impl<T: Real, const D: usize> Add for Jet<T, D> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<T: Real, const D: usize> AddAssign for Jet<T, D> {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a += b;
        }
    }
}

impl<T: Real, const D: usize> Sub for Jet<T, D> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a -= b;
        }
        self
    }
}

impl<T: Real, const D: usize> Mul for Jet<T, D> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = [Complex::new(T::zero(), T::zero()); D];
        for (i, a) in self.c.iter().enumerate() {
            if a.re == T::zero() && a.im == T::zero() {
                continue;
            }
            for (o, b) in out[i..].iter_mut().zip(rhs.c.iter()) {
                *o += a * b;
            }
        }
        Self { c: out }
    }
}

impl<T: Real, const D: usize> KappaAlgebra<T> for Jet<T, D> {
    fn constant(c0: Complex<T>) -> Self {
        let mut c = [Complex::new(T::zero(), T::zero()); D];
        c[0] = c0;
        Self { c }
    }

    fn scale(mut self, s: T) -> Self {
        for a in self.c.iter_mut() {
            *a = *a * s;
        }
        self
    }

    fn inv(self) -> Self {
        let mut v = [Complex::new(T::zero(), T::zero()); D];
        let v0 = Complex::new(T::one(), T::zero()) / self.c[0];
        v[0] = v0;
        for k in 1..D {
            let mut s = Complex::new(T::zero(), T::zero());
            for j in 1..=k {
                s += self.c[j] * v[k - j];
            }
            v[k] = -(s * v0);
        }
        Self { c: v }
    }

    // w v' = alpha w' v, solved order by order.
    fn powr(self, alpha: T) -> Self {
        let w0 = self.c[0];
        let mut v = [Complex::new(T::zero(), T::zero()); D];
        v[0] = KappaAlgebra::powr(w0, alpha);
        let inv_w0 = Complex::new(T::one(), T::zero()) / w0;
        for k in 1..D {
            let kf = T::from_usize_lossy(k);
            let mut s = Complex::new(T::zero(), T::zero());
            for j in 1..=k {
                let coef = alpha * T::from_usize_lossy(j) - T::from_usize_lossy(k - j);
                s += self.c[j] * v[k - j] * coef;
            }
            v[k] = s * inv_w0 / kf;
        }
        Self { c: v }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;
    use proptest::prelude::*;

    type J = Jet<f64, 8>;

    fn binom(alpha: f64, j: usize) -> f64 {
        (0..j).fold(1.0, |acc, i| acc * (alpha - i as f64) / (i as f64 + 1.0))
    }

    /// Taylor coefficients of `(1 - kappa z)^alpha` about `kappa_0`, closed form.
    fn closed_form(kappa0: Complex<f64>, z: f64, alpha: f64, j: usize) -> Complex<f64> {
        let base = cplx(1.0, 0.0) - kappa0 * z;
        let ratio = cplx(-z, 0.0) / base;
        base.powf(alpha) * ratio.powi(j as i32) * binom(alpha, j)
    }

    #[test]
    fn power_of_linear_factor_matches_closed_form() {
        let k0 = cplx(0.4, -0.3);
        for (z, alpha) in [
            (0.7, 0.5),
            (0.9, -0.5),
            (0.3, -2.0),
            (0.95, -8.0),
            (0.5, 1.5),
        ] {
            let jet = J::variable(k0).one_minus_scaled(z).powr(alpha);
            for j in 0..8 {
                let exact = closed_form(k0, z, alpha, j);
                assert!(
                    (jet.c[j] - exact).norm() <= 1e-12 * exact.norm().max(1.0),
                    "z={z} alpha={alpha} j={j}: {:?} vs {exact:?}",
                    jet.c[j]
                );
            }
        }
    }

    #[test]
    fn inverse_and_integer_powers() {
        let k0 = cplx(-0.6, 0.1);
        let w = J::variable(k0).one_minus_scaled(0.8);
        let prod = w * w.inv();
        assert!((prod.c[0] - cplx(1.0, 0.0)).norm() < 1e-14);
        assert!(prod.c[1..].iter().all(|c| c.norm() < 1e-13));
        let p5 = w.powu(5);
        let r5 = w.powr(5.0);
        for j in 0..8 {
            assert!((p5.c[j] - r5.c[j]).norm() < 1e-12);
        }
        // kappa^3 has derivatives 3 k^2, 6 k, 6, 0...
        let k3 = J::variable(k0).powu(3);
        assert!((k3.derivative(1) - k0 * k0 * 3.0).norm() < 1e-14);
        assert!((k3.derivative(3) - cplx(6.0, 0.0)).norm() < 1e-13);
        assert!(k3.derivative(4).norm() == 0.0);
    }

    #[test]
    fn complex_algebra_agrees_with_jet_value() {
        let k0 = cplx(0.25, 0.5);
        for alpha in [0.5, -0.5, -3.0, 2.0, 0.3] {
            let z = cplx(1.0, 0.0) - k0 * 0.6;
            let a = KappaAlgebra::powr(z, alpha);
            let b = J::variable(k0).one_minus_scaled(0.6).powr(alpha).value();
            assert!((a - b).norm() < 1e-14, "alpha={alpha}");
            assert!((a - z.powf(alpha)).norm() < 1e-14, "alpha={alpha}");
        }
    }

    proptest! {
        #[test]
        fn product_rule_holds(re in -0.8f64..0.8, im in -0.5f64..0.5,
                              z1 in 0.0f64..1.0, z2 in 0.0f64..1.0) {
            let k0 = cplx(re, im);
            let f = J::variable(k0).one_minus_scaled(z1).powr(-0.5);
            let g = J::variable(k0).one_minus_scaled(z2).powr(-2.0);
            let fg = f * g;
            let gf = g * f;
            // Leibniz on the second derivative
            let d2 = f.derivative(2) * g.derivative(0)
                + f.derivative(1) * g.derivative(1) * 2.0
                + f.derivative(0) * g.derivative(2);
            prop_assert!((fg.derivative(2) - d2).norm() <= 1e-11 * d2.norm().max(1.0));
            prop_assert!((fg.c[7] - gf.c[7]).norm() <= 1e-12 * fg.c[7].norm().max(1.0));
            // direct fused power agrees with the product of the factors
            let h = J::variable(k0).one_minus_scaled(z1);
            let fused = h.powr(-2.5);
            let split = h.powr(-0.5) * h.inv().powu(2);
            for j in 0..8 {
                prop_assert!((fused.c[j] - split.c[j]).norm() <= 1e-10 * fused.c[j].norm().max(1.0));
            }
        }
    }
}
