//! Uniform 1D grids on `(0, L)`, sampled coefficient fields and the discrete
//! norm family (L², H¹₀, H¹, spectral H⁻¹ and the heat weak norm).
//!
//! Fields live on interior nodes only; the zero Dirichlet values at `0` and
//! `L` are implicit in every stencil and quadrature below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

/// Interior nodes `x_j = j h`, `j = 1..=n`, with `h = L / (n + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    length: f64,
    n_interior: usize,
}

impl Grid1D {
    pub fn new(length: f64, n_interior: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid(format!("domain length must be positive, got {length}")));
        }
        if n_interior < 3 {
            return Err(Error::invalid(format!("need at least 3 interior nodes, got {n_interior}")));
        }
        Ok(Self { length, n_interior })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n_interior
    }

    pub fn h(&self) -> f64 {
        self.length / (self.n_interior as f64 + 1.0)
    }

    /// Coordinate of interior node `j` (0-based, so node 0 sits at `h`).
    pub fn x(&self, j: usize) -> f64 {
        (j as f64 + 1.0) * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_interior).map(|j| self.x(j)).collect()
    }

    pub fn check_same(&self, other: &Grid1D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(L = {}, n = {}) vs (L = {}, n = {})",
                self.length, self.n_interior, other.length, other.n_interior
            )))
        }
    }
}

/// Uniform time grid on `[0, tau]` with `n_steps + 1` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    tau: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(tau: f64, n_steps: usize) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid(format!("final time must be positive, got {tau}")));
        }
        if n_steps < 8 {
            return Err(Error::invalid(format!("need at least 8 time steps, got {n_steps}")));
        }
        Ok(Self { tau, n_steps })
    }

    /// Grid with step as close as possible to (and not larger than) `dt`.
    pub fn with_step(tau: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        Self::new(tau, ((tau / dt).ceil() as usize).max(8))
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.tau / self.n_steps as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.t(i)).collect()
    }

    pub fn check_same(&self, other: &TimeGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "time grids (tau = {}, steps = {}) vs (tau = {}, steps = {})",
                self.tau, self.n_steps, other.tau, other.n_steps
            )))
        }
    }

    /// Trapezoid quadrature weights on the sample points.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut w = vec![dt; self.n_samples()];
        w[0] = 0.5 * dt;
        w[self.n_steps] = 0.5 * dt;
        w
    }
}

/// Samples of a real coefficient (q, a, a source shape, a mode) at the
/// interior nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "field has {} samples, grid has {} interior nodes",
                values.len(),
                grid.n()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite field value at node {j}")));
        }
        Ok(Self { grid, values })
    }

    /// Like [`CoefficientField::new`] but additionally rejects negative samples.
    pub fn nonneg(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        let f = Self::new(grid, values)?;
        if let Some(j) = f.values.iter().position(|&v| v < 0.0) {
            return Err(Error::invalid(format!(
                "field flagged nonnegative has value {} at node {j}",
                f.values[j]
            )));
        }
        Ok(f)
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: vec![0.0; grid.n()] }
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self { grid, values: vec![c; grid.n()] }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self { grid, values: grid.nodes().into_iter().map(f).collect() }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_nonneg(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a * b)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + s * b)
    }

    fn zip(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect(),
        })
    }

    /// `∫ f dx` with the trapezoid rule and zero boundary values.
    pub fn integral(&self) -> f64 {
        self.grid.h() * self.values.iter().sum::<f64>()
    }

    /// Synthesize `Σ c_k φ_k` from coefficients against a list of modes.
    pub fn synthesize(grid: Grid1D, coefficients: &[f64], modes: &[CoefficientField]) -> Result<Self> {
        if coefficients.len() > modes.len() {
            return Err(Error::TooManyModes { requested: coefficients.len(), available: modes.len() });
        }
        let mut out = vec![0.0; grid.n()];
        for (c, m) in coefficients.iter().zip(modes) {
            grid.check_same(m.grid())?;
            for (o, v) in out.iter_mut().zip(m.values()) {
                *o += c * v;
            }
        }
        Ok(Self { grid, values: out })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L2,
    H1,
    H01,
    /// Spectral dual norm `(Σ λ_k⁻¹ |(f, φ_k)|²)^{1/2}`; needs a basis.
    Hminus,
}

/// Discrete L² pairing `h Σ f_j g_j`.
pub fn inner_l2(f: &CoefficientField, g: &CoefficientField) -> Result<f64> {
    f.grid.check_same(&g.grid)?;
    Ok(f.grid.h() * dot(&f.values, &g.values))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_{j=0}^{n} h ((f_{j+1} - f_j) / h)²` with zero padding at both ends.
pub(crate) fn h01_sq(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    let mut s = 0.0;
    let mut prev = 0.0;
    for &v in values {
        s += (v - prev) * (v - prev);
        prev = v;
    }
    s += prev * prev;
    debug_assert!(n > 0);
    s / h
}

pub fn norm(f: &CoefficientField, kind: NormKind, basis: Option<&SpectralBasis>) -> Result<f64> {
    let h = f.grid.h();
    let l2_sq = h * dot(&f.values, &f.values);
    match kind {
        NormKind::L2 => Ok(l2_sq.sqrt()),
        NormKind::H01 => Ok(h01_sq(&f.values, h).sqrt()),
        NormKind::H1 => Ok((l2_sq + h01_sq(&f.values, h)).sqrt()),
        NormKind::Hminus => {
            let basis = basis.ok_or_else(|| Error::invalid("H^-1 norm requires a spectral basis"))?;
            let mut s = 0.0;
            for (lambda, mode) in basis.eigenvalues().iter().zip(basis.modes()) {
                let c = inner_l2(f, mode)?;
                s += c * c / lambda;
            }
            Ok(s.sqrt())
        }
    }
}

/// Heat weak norm `(Σ_k e^{-3 τ² λ_k²} |(f, φ_k)|²)^{1/2}` truncated at the
/// basis size.
pub fn weak_norm_star(f: &CoefficientField, basis: &SpectralBasis, tau: f64) -> Result<f64> {
    if basis.is_empty() {
        return Err(Error::invalid("weak norm needs a nonempty basis"));
    }
    let mut s = 0.0;
    for (lambda, mode) in basis.eigenvalues().iter().zip(basis.modes()) {
        let c = inner_l2(f, mode)?;
        s += (-3.0 * tau * tau * lambda * lambda).exp() * c * c;
    }
    Ok(s.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pi_grid(n: usize) -> Grid1D {
        Grid1D::new(PI, n).unwrap()
    }

    #[test]
    fn grid_rejects_tiny() {
        assert!(Grid1D::new(1.0, 2).is_err());
        assert!(Grid1D::new(-1.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 7).is_err());
        let g = Grid1D::new(1.0, 9).unwrap();
        assert!((g.h() - 0.1).abs() < 1e-15);
        assert!((g.x(0) - 0.1).abs() < 1e-15 && (g.x(8) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn sine_is_normalized() {
        let g = pi_grid(2000);
        let s = (2.0 / PI).sqrt();
        let f = CoefficientField::from_fn(g, |x| s * x.sin());
        assert!((inner_l2(&f, &f).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sines_are_orthogonal() {
        let g = pi_grid(2000);
        let f = CoefficientField::from_fn(g, f64::sin);
        let k = CoefficientField::from_fn(g, |x| (2.0 * x).sin());
        assert!(inner_l2(&f, &k).unwrap().abs() < 1e-8);
    }

    #[test]
    fn parabola_square_integral() {
        let g = pi_grid(2000);
        let f = CoefficientField::from_fn(g, |x| x * (PI - x));
        // ∫₀^π x²(π−x)² dx = π⁵/30
        let exact = PI.powi(5) / 30.0;
        assert!((inner_l2(&f, &f).unwrap() - exact).abs() < 1e-3);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let f = CoefficientField::zeros(pi_grid(10));
        let g = CoefficientField::zeros(pi_grid(11));
        assert!(matches!(inner_l2(&f, &g), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn norms_of_zero_and_sines() {
        let g = pi_grid(2000);
        let z = CoefficientField::zeros(g);
        for kind in [NormKind::L2, NormKind::H01, NormKind::H1] {
            assert_eq!(norm(&z, kind, None).unwrap(), 0.0);
        }
        let f = CoefficientField::from_fn(g, f64::sin);
        let half_pi = (PI / 2.0).sqrt();
        assert!((norm(&f, NormKind::L2, None).unwrap() - half_pi).abs() < 1e-6);
        assert!((norm(&f, NormKind::H01, None).unwrap() - half_pi).abs() < 1e-6);
        let f3 = CoefficientField::from_fn(g, |x| (3.0 * x).sin());
        let ratio = norm(&f3, NormKind::H01, None).unwrap() / norm(&f3, NormKind::L2, None).unwrap();
        assert!((ratio - 3.0).abs() < 1e-4);
    }

    #[test]
    fn hminus_needs_basis() {
        let f = CoefficientField::zeros(pi_grid(10));
        assert!(norm(&f, NormKind::Hminus, None).is_err());
    }

    #[test]
    fn nonneg_flag_is_checked() {
        let g = pi_grid(5);
        assert!(CoefficientField::nonneg(g, vec![0.0, 1.0, 2.0, 0.0, 0.5]).is_ok());
        assert!(CoefficientField::nonneg(g, vec![0.0, -1.0, 2.0, 0.0, 0.5]).is_err());
        assert!(CoefficientField::new(g, vec![0.0, f64::NAN, 2.0, 0.0, 0.5]).is_err());
    }
}
