//! Small dense complex matrices: row-pivoted LU, determinants and a
//! 1-norm condition estimate.

use num_complex::Complex;

use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T: Real> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex::new(T::zero(), T::zero()); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self.data[i * n + l];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let row = &other.data[l * n..(l + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * *b;
                }
            }
        }
        out
    }

    /// `I - self`.
    pub fn identity_minus(&self) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = -*v;
        }
        for i in 0..self.n {
            out.data[i * self.n + i] += Complex::new(T::one(), T::zero());
        }
        out
    }

    pub fn norm_1(&self) -> T {
        (0..self.n)
            .map(|j| (0..self.n).fold(T::zero(), |s, i| s + self.data[i * self.n + j].norm()))
            .fold(T::zero(), T::max)
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.n).fold(Complex::new(T::zero(), T::zero()), |s, i| {
            s + self.data[i * self.n + i]
        })
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.n + j]
    }
}

/// Determinant stored as `phase * exp(log_abs)`; `log_abs = -inf` when singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Determinant<T: Real> {
    pub log_abs: T,
    pub phase: Complex<T>,
}

impl<T: Real> Determinant<T> {
    pub fn value(&self) -> Complex<T> {
        if self.log_abs == T::neg_infinity() {
            return Complex::new(T::zero(), T::zero());
        }
        self.phase * self.log_abs.exp()
    }

    pub fn is_singular(&self) -> bool {
        self.log_abs == T::neg_infinity()
    }
}

/// In-place LU factorization with partial (row) pivoting.
#[derive(Debug, Clone)]
pub struct Lu<T: Real> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    det: Determinant<T>,
}

impl<T: Real> Lu<T> {
    pub fn new(mut a: Matrix<T>) -> Self {
        let n = a.n;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut log_abs = T::zero();
        let mut phase = Complex::new(T::one(), T::zero());
        for col in 0..n {
            let (pivot_row, pivot_abs) = (col..n).map(|r| (r, a.data[r * n + col].norm())).fold(
                (col, T::neg_infinity()),
                |best, cur| {
                    if cur.1 > best.1 {
                        cur
                    } else {
                        best
                    }
                },
            );
            if pivot_abs == T::zero() {
                log_abs = T::neg_infinity();
                continue;
            }
            if pivot_row != col {
                for j in 0..n {
                    a.data.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
                phase = -phase;
            }
            let pivot = a.data[col * n + col];
            log_abs += pivot_abs.ln();
            phase = phase * (pivot / pivot_abs);
            // keep the accumulated phase on the unit circle
            phase = phase / phase.norm();
            for r in col + 1..n {
                let factor = a.data[r * n + col] / pivot;
                a.data[r * n + col] = factor;
                if factor.re == T::zero() && factor.im == T::zero() {
                    continue;
                }
                for j in col + 1..n {
                    let u = a.data[col * n + j];
                    a.data[r * n + j] -= factor * u;
                }
            }
        }
        Self {
            lu: a,
            perm,
            det: Determinant { log_abs, phase },
        }
    }

    pub fn determinant(&self) -> Determinant<T> {
        self.det
    }

    /// Solves `A x = b`. Only meaningful for nonsingular `A`.
    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.lu.n;
        let mut x: Vec<Complex<T>> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu.data[i * n + j];
                let xj = x[j];
                x[i] -= l * xj;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.lu.data[i * n + j];
                let xj = x[j];
                x[i] -= u * xj;
            }
            x[i] = x[i] / self.lu.data[i * n + i];
        }
        x
    }

    /// `||A^-1||_1` from explicit column solves (fine at the sizes used here).
    pub fn inverse_norm_1(&self) -> T {
        let n = self.lu.n;
        let mut best = T::zero();
        let mut e = vec![Complex::new(T::zero(), T::zero()); n];
        for j in 0..n {
            e[j] = Complex::new(T::one(), T::zero());
            let col = self.solve(&e);
            e[j] = Complex::new(T::zero(), T::zero());
            best = best.max(col.iter().fold(T::zero(), |s, v| s + v.norm()));
        }
        best
    }
}

/// Determinant together with the 1-norm condition number `||A|| ||A^-1||`.
pub fn determinant_with_condition<T: Real>(a: Matrix<T>) -> (Determinant<T>, T) {
    let norm = a.norm_1();
    let lu = Lu::new(a);
    let det = lu.determinant();
    let cond = if det.is_singular() {
        T::infinity()
    } else {
        norm * lu.inverse_norm_1()
    };
    (det, cond)
}

pub fn determinant<T: Real>(a: Matrix<T>) -> Determinant<T> {
    Lu::new(a).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    /// Permutation expansion, the textbook definition.
    fn leibniz(a: &Matrix<f64>) -> Complex<f64> {
        fn perms(n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == n {
                out.push(cur.clone());
                return;
            }
            for c in 0..n {
                if !cur.contains(&c) {
                    cur.push(c);
                    perms(n, cur, out);
                    cur.pop();
                }
            }
        }
        let n = a.dim();
        let mut all = Vec::new();
        perms(n, &mut Vec::new(), &mut all);
        all.iter()
            .map(|p| {
                let inversions = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| p[i] > p[j])
                    .count();
                let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
                (0..n).fold(cplx(sign, 0.0), |acc, i| acc * a[(i, p[i])])
            })
            .sum()
    }

    #[test]
    fn matches_permutation_expansion() {
        let a = Matrix::from_fn(4, |i, j| {
            cplx(
                ((i * 7 + j * 3) % 5) as f64 - 1.5,
                (i as f64 - j as f64) * 0.25,
            )
        });
        let lu = determinant(a.clone()).value();
        let exact = leibniz(&a);
        assert!((lu - exact).norm() < 1e-12 * exact.norm().max(1.0));
    }

    #[test]
    fn singular_and_identity() {
        let a = Matrix::from_fn(3, |i, _| cplx(i as f64, 0.0));
        assert!(determinant(a).is_singular());
        let (d, cond) = determinant_with_condition(Matrix::<f64>::identity(5));
        assert_eq!(d.value(), cplx(1.0, 0.0));
        assert_eq!(cond, 1.0);
    }

    #[test]
    fn solve_recovers_rhs() {
        let a = Matrix::from_fn(3, |i, j| {
            cplx(1.0 / (1.0 + i as f64 + j as f64), (i * j) as f64 * 0.1)
        });
        let lu = Lu::new(a.clone());
        let b = vec![cplx(1.0, 0.0), cplx(0.0, 1.0), cplx(2.0, -1.0)];
        let x = lu.solve(&b);
        for i in 0..3 {
            let mut r = cplx(0.0, 0.0);
            for j in 0..3 {
                r += a[(i, j)] * x[j];
            }
            assert!((r - b[i]).norm() < 1e-12);
        }
    }
}
