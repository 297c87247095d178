//! Quadrature rules for the form-factor integrals over `[0, 1]^{2n}`.
//!
//! Every axis is mapped through `x = sin^2(pi t / 2)`, which absorbs the
//! `x^{-1/2}` and `(1 - y)^{-1/2}` endpoint singularities, and then integrated
//! with a composite Gauss-Legendre rule in `t` whose panels are graded
//! geometrically toward `t = 1`, where the factors `1 - kappa x y` and
//! `1 - kappa^n prod x y` come close to zero as `|kappa| -> 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Integration strategy for `S_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Tensor product of graded Gauss-Legendre axis rules; `n <= 2` only.
    TensorGauss,
    /// Plain Monte Carlo in the substituted variables; any `n`.
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::TensorGauss => "tensor_gauss",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec<T: Real> {
    pub method: Method,
    /// Target node count per axis; split evenly over the graded panels.
    pub nodes_per_dim: usize,
    /// Number of geometric panels toward `t = 1`; `None` picks it from `|kappa|`.
    pub grading: Option<u32>,
    pub mc_samples: usize,
    pub seed: u64,
    pub target_rel_error: T,
}

impl<T: Real> Default for QuadratureSpec<T> {
    fn default() -> Self {
        Self {
            method: Method::TensorGauss,
            nodes_per_dim: 64,
            grading: None,
            mc_samples: 1 << 18,
            seed: 0x1513_D1A6,
            target_rel_error: T::lit(1e-9),
        }
    }
}

impl<T: Real> QuadratureSpec<T> {
    pub fn tensor(nodes_per_dim: usize) -> Self {
        Self {
            nodes_per_dim,
            ..Self::default()
        }
    }

    pub fn monte_carlo(mc_samples: usize, seed: u64) -> Self {
        Self {
            method: Method::MonteCarlo,
            mc_samples,
            seed,
            target_rel_error: T::lit(1e-2),
            ..Self::default()
        }
    }

    pub fn with_grading(mut self, levels: u32) -> Self {
        self.grading = Some(levels);
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if !(self.target_rel_error > T::zero()) {
            return Err(Error::InvalidArgument(
                "target_rel_error must be positive".into(),
            ));
        }
        match self.method {
            Method::TensorGauss => {
                if n > 2 {
                    return Err(Error::InvalidArgument(format!(
                        "tensor Gauss is limited to n <= 2 (dimension 2n <= 4), got n = {n}"
                    )));
                }
                if self.nodes_per_dim < 2 {
                    return Err(Error::InvalidArgument(
                        "nodes_per_dim must be at least 2".into(),
                    ));
                }
                if matches!(self.grading, Some(0) | Some(31..)) {
                    return Err(Error::InvalidArgument("grading must lie in 1..=30".into()));
                }
            }
            Method::MonteCarlo => {
                if self.mc_samples < 2 {
                    return Err(Error::InvalidArgument(
                        "mc_samples must be at least 2".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Grading depth actually used for a point at distance `gap` from the
    /// nearest zero of the integrand's denominators.
    pub fn levels_for(&self, gap: T) -> u32 {
        self.grading.unwrap_or_else(|| auto_levels(gap))
    }
}

/// `ceil(log2(4 / sqrt(gap)))`, clamped to `2..=30`.
pub fn auto_levels<T: Real>(gap: T) -> u32 {
    let gap = gap.as_f64();
    if !(gap > 0.0) {
        return 30;
    }
    let l = (4.0 / gap.sqrt()).log2().ceil();
    l.clamp(2.0, 30.0) as u32
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre<T: Real>(m: usize) -> (Vec<T>, Vec<T>) {
    assert!(m >= 1, "Gauss-Legendre needs at least one node");
    let mut nodes = vec![T::zero(); m];
    let mut weights = vec![T::zero(); m];
    let mf = T::from_usize_lossy(m);
    let half = T::lit(0.5);
    for i in 0..m.div_ceil(2) {
        let guess = T::PI() * (T::from_usize_lossy(i) + T::lit(0.75)) / (mf + half);
        let mut z = guess.cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= T::epsilon() * T::lit(4.0) {
                let (_, d) = legendre_with_derivative(m, z);
                dp = d;
                break;
            }
        }
        let w = T::lit(2.0) / ((T::one() - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[m - 1 - i] = z;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = T::zero();
    }
    (nodes, weights)
}

/// `(P_m(z), P_m'(z))` by the three-term recurrence.
fn legendre_with_derivative<T: Real>(m: usize, z: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = z;
    for j in 2..=m {
        let jf = T::from_usize_lossy(j);
        let p2 = ((T::lit(2.0) * jf - T::one()) * z * p1 - (jf - T::one()) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (T::one(), T::zero());
    }
    let mf = T::from_usize_lossy(m);
    (p1, mf * (z * p1 - p0) / (z * z - T::one()))
}

/// Panel edges `0, 1/2, 1 - 2^-2, ..., 1 - 2^-levels, 1`.
pub fn graded_edges<T: Real>(levels: u32) -> Vec<T> {
    let mut edges = vec![T::zero(), T::lit(0.5)];
    for l in 2..=levels {
        edges.push(T::one() - T::lit(2f64.powi(-(l as i32))));
    }
    edges.push(T::one());
    edges
}

/// One axis of the substituted rule: nodes `x_i = sin^2(pi t_i / 2)` with
/// the Jacobian and the `kappa`-independent parts of the weight folded in.
#[derive(Debug, Clone)]
pub struct AxisRule<T: Real> {
    pub x: Vec<T>,
    /// `w pi sin^2 cos^2`: `x * sqrt((1 - x)/x) * dx/dt` times the weight.
    pub wx: Vec<T>,
    /// `w pi sin^4`: `y * sqrt(y/(1 - y)) * dy/dt` times the weight.
    pub wy: Vec<T>,
}

impl<T: Real> AxisRule<T> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Composite rule with `per_panel` Gauss nodes on each graded panel.
    pub fn graded(per_panel: usize, levels: u32) -> Self {
        let (g, w) = gauss_legendre::<T>(per_panel);
        let edges = graded_edges::<T>(levels);
        let half = T::lit(0.5);
        let half_pi = T::FRAC_PI_2();
        let total = per_panel * (edges.len() - 1);
        let mut rule = Self {
            x: Vec::with_capacity(total),
            wx: Vec::with_capacity(total),
            wy: Vec::with_capacity(total),
        };
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let mid = (a + b) * half;
            let rad = (b - a) * half;
            for (gi, wi) in g.iter().zip(&w) {
                let t = mid + rad * *gi;
                let weight = rad * *wi * T::PI();
                let (s, c) = (half_pi * t).sin_cos();
                let s2 = s * s;
                rule.x.push(s2);
                rule.wx.push(weight * s2 * c * c);
                rule.wy.push(weight * s2 * s2);
            }
        }
        rule
    }

    /// Fine rule for a spec and the coarse companion (about 3/4 of the
    /// nodes) used for the error estimate.
    pub fn pair_for(spec: &QuadratureSpec<T>, levels: u32) -> (Self, Self) {
        let panels = levels as usize + 1;
        let per_panel = spec.nodes_per_dim.div_ceil(panels).max(2);
        let coarse = (3 * per_panel).div_ceil(4).max(1).min(per_panel - 1).max(1);
        (
            Self::graded(per_panel, levels),
            Self::graded(coarse, levels),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for m in [1usize, 2, 5, 8, 13, 24] {
            let (x, w) = gauss_legendre::<f64>(m);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            for deg in 0..2 * m {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-14, "m={m} deg={deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn gauss_legendre_in_single_precision() {
        let (x, w) = gauss_legendre::<f32>(6);
        let q: f32 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((q - 0.4).abs() < 1e-6);
    }

    #[test]
    fn graded_edges_tile_the_unit_interval() {
        let e = graded_edges::<f64>(4);
        assert_eq!(e, vec![0.0, 0.5, 0.75, 0.875, 0.9375, 1.0]);
        assert_eq!(graded_edges::<f64>(1), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn axis_rule_reproduces_beta_integrals() {
        // int sqrt(x (1 - x)) dx = pi/8,  int y^{3/2} (1 - y)^{-1/2} dy = 3 pi/8
        let rule = AxisRule::<f64>::graded(10, 3);
        let ix: f64 = rule.wx.iter().sum();
        let iy: f64 = rule.wy.iter().sum();
        assert!((ix - std::f64::consts::PI / 8.0).abs() < 1e-14);
        assert!((iy - 3.0 * std::f64::consts::PI / 8.0).abs() < 1e-14);
    }

    #[test]
    fn auto_levels_grows_toward_the_boundary() {
        assert_eq!(auto_levels(1.0), 2);
        assert_eq!(auto_levels(2f64.powi(-10)), 7);
        assert!(auto_levels(1e-12) > auto_levels(1e-6));
        assert_eq!(auto_levels(0.0), 30);
    }

    #[test]
    fn validation() {
        let s = QuadratureSpec::<f64>::default();
        assert!(s.validate(2).is_ok());
        assert!(s.validate(3).is_err());
        assert!(s.validate(0).is_err());
        assert!(QuadratureSpec::<f64>::monte_carlo(1000, 1)
            .validate(5)
            .is_ok());
        assert!(QuadratureSpec::<f64>::tensor(1).validate(1).is_err());
        assert!(s.with_grading(0).validate(1).is_err());
    }

    #[test]
    fn pair_has_fewer_coarse_nodes() {
        let s = QuadratureSpec::<f64>::tensor(64);
        let (fine, coarse) = AxisRule::pair_for(&s, 3);
        assert_eq!(fine.len(), 64);
        assert_eq!(coarse.len(), 48);
    }
}
