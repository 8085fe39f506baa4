//! Time convolution `S`, its inversion through a Volterra equation of the
//! second kind, and least-squares recovery of separable sources
//! `λ(t) f(x)` from boundary traces.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::banded::SymBand;
use crate::error::{Error, Result};
use crate::forward::{solve, time_h1_inner_stacked, time_l2_inner_stacked, Forcing, ObservationConfig, SolveOptions, TraceSignal};
use crate::grid::{CoefficientField, TimeGrid};
use crate::operators::Equation;
use crate::spectral::SpectralBasis;

/// Samples of a (possibly complex) time modulation `λ(t)` and its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSignal {
    time: TimeGrid,
    values: Vec<Complex64>,
    derivative: Vec<Complex64>,
}

/// Second-order differences, one-sided at both ends.
fn differentiate<T>(v: &[T], dt: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let m = v.len();
    let inv = 0.5 / dt;
    (0..m)
        .map(|i| {
            if i == 0 {
                (v[1] * 4.0 - v[0] * 3.0 - v[2]) * inv
            } else if i == m - 1 {
                (v[m - 1] * 3.0 - v[m - 2] * 4.0 + v[m - 3]) * inv
            } else {
                (v[i + 1] - v[i - 1]) * inv
            }
        })
        .collect()
}

impl ModulationSignal {
    /// Samples with a finite-difference derivative.
    pub fn from_samples(time: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != time.n_samples() {
            return Err(Error::invalid("modulation sample count does not match the time grid"));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("modulation contains non-finite samples"));
        }
        let derivative = differentiate(&values, time.dt());
        Ok(Self { time, values, derivative })
    }

    pub fn from_real_samples(time: TimeGrid, values: &[f64]) -> Result<Self> {
        Self::from_samples(time, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_fn(time: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_real_samples(time, &time.times().into_iter().map(f).collect::<Vec<_>>())
    }

    /// `λ` and `λ'` given in closed form.
    pub fn analytic(time: TimeGrid, f: impl Fn(f64) -> Complex64, df: impl Fn(f64) -> Complex64) -> Result<Self> {
        let t = time.times();
        let out = Self {
            time,
            values: t.iter().map(|&s| f(s)).collect(),
            derivative: t.iter().map(|&s| df(s)).collect(),
        };
        if out.values.iter().chain(&out.derivative).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("modulation contains non-finite samples"));
        }
        Ok(out)
    }

    pub fn constant(time: TimeGrid, c: f64) -> Result<Self> {
        Self::analytic(time, |_| Complex64::new(c, 0.0), |_| Complex64::default())
    }

    /// `cos(ω t)`
    pub fn cosine(time: TimeGrid, omega: f64) -> Result<Self> {
        Self::analytic(time, |t| Complex64::new((omega * t).cos(), 0.0), |t| Complex64::new(-omega * (omega * t).sin(), 0.0))
    }

    /// `e^{s t}` for complex `s`.
    pub fn exponential(time: TimeGrid, s: Complex64) -> Result<Self> {
        Self::analytic(time, |t| (s * t).exp(), |t| s * (s * t).exp())
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn derivative(&self) -> &[Complex64] {
        &self.derivative
    }

    pub fn lambda0(&self) -> Complex64 {
        self.values[0]
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().chain(&self.derivative).all(|z| z.im == 0.0)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn imag_parts(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.im).collect()
    }

    /// `‖λ'‖_{L²(0,τ)}`
    pub fn derivative_l2(&self) -> f64 {
        let w = self.time.trapezoid_weights();
        self.derivative.iter().zip(&w).map(|(d, w)| w * d.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `(Sh)(t_i) = Σ_{j ≤ i} w_ij λ(t_i − t_j) h(t_j)` with trapezoid weights.
pub fn apply_s_samples(lambda: &[Complex64], h: &[Complex64], dt: f64) -> Vec<Complex64> {
    let m = h.len();
    let mut out = vec![Complex64::default(); m];
    for i in 1..m {
        let mut s = (lambda[i] * h[0] + lambda[0] * h[i]) * 0.5;
        for j in 1..i {
            s += lambda[i - j] * h[j];
        }
        out[i] = s * dt;
    }
    out
}

pub fn apply_s(lambda: &ModulationSignal, h: &TraceSignal) -> Result<TraceSignal> {
    lambda.time.check_same(h.time())?;
    if !lambda.is_real() {
        return Err(Error::invalid("complex modulation needs apply_s_complex"));
    }
    let channels = h
        .channels()
        .iter()
        .map(|c| {
            let hc: Vec<Complex64> = c.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            apply_s_samples(&lambda.values, &hc, lambda.time.dt()).into_iter().map(|z| z.re).collect()
        })
        .collect();
    TraceSignal::new(*h.time(), h.boundaries().to_vec(), channels)
}

/// Channel-wise `S` for complex modulations and data.
pub fn apply_s_complex(lambda: &ModulationSignal, h: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    h.iter().map(|c| apply_s_samples(&lambda.values, c, lambda.time.dt())).collect()
}

/// Regularization applied to `ψ` before differentiation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum Smoothing {
    #[default]
    Off,
    /// Fixed Tikhonov weight on the second difference.
    Fixed(f64),
    /// Weight chosen so the RMS change equals the given noise level.
    Discrepancy(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deconvolved {
    pub channels: Vec<Vec<Complex64>>,
    pub warnings: Vec<String>,
    pub smoothing_weights: Vec<f64>,
}

impl Deconvolved {
    pub fn real_signal(&self, time: TimeGrid, boundaries: Vec<crate::forward::Boundary>) -> Result<TraceSignal> {
        TraceSignal::new(time, boundaries, self.channels.iter().map(|c| c.iter().map(|z| z.re).collect()).collect())
    }
}

/// Tikhonov smoothing `min ‖y − ψ‖² + α ‖D₂ y‖²` of real samples.
fn tikhonov(psi: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let m = psi.len();
    if alpha <= 0.0 {
        return Ok(psi.to_vec());
    }
    // D₂ᵀD₂ for interior second differences
    let mut a = SymBand::zeros(m, 2);
    for r in 1..m - 1 {
        let idx = [r - 1, r, r + 1];
        let c = [1.0, -2.0, 1.0];
        for x in 0..3 {
            for y in x..3 {
                let (i, j) = (idx[x], idx[y]);
                a.set(i, j - i, a.get(i, j) + alpha * c[x] * c[y]);
            }
        }
    }
    a.add_diag(&vec![1.0; m]);
    Ok(a.lu()?.solve(psi))
}

fn smooth_channel(psi: &[f64], smoothing: Smoothing) -> Result<(Vec<f64>, f64)> {
    match smoothing {
        Smoothing::Off => Ok((psi.to_vec(), 0.0)),
        Smoothing::Fixed(alpha) => Ok((tikhonov(psi, alpha)?, alpha)),
        Smoothing::Discrepancy(sigma) => {
            if sigma <= 0.0 {
                return Ok((psi.to_vec(), 0.0));
            }
            let rms = |y: &[f64]| (y.iter().zip(psi).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / psi.len() as f64).sqrt();
            let (mut lo, mut hi) = (-12.0_f64, 16.0_f64);
            if rms(&tikhonov(psi, 10f64.powf(hi))?) < sigma {
                let y = tikhonov(psi, 10f64.powf(hi))?;
                return Ok((y, 10f64.powf(hi)));
            }
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if rms(&tikhonov(psi, 10f64.powf(mid))?) > sigma {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let alpha = 10f64.powf(lo);
            Ok((tikhonov(psi, alpha)?, alpha))
        }
    }
}

/// Solves `λ(0) φ(t) + ∫₀ᵗ λ'(t − s) φ(s) ds = ψ'(t)` by product-trapezoid
/// forward substitution, channel by channel.
pub fn deconvolve_complex(lambda: &ModulationSignal, psi: &[Vec<Complex64>], smoothing: Smoothing) -> Result<Deconvolved> {
    let l0 = lambda.lambda0();
    if l0.norm() == 0.0 {
        return Err(Error::NotInvertible);
    }
    let dt = lambda.time.dt();
    let m = lambda.time.n_samples();
    let dl = &lambda.derivative;
    let mut warnings = Vec::new();
    let mut weights = Vec::new();
    let mut out = Vec::with_capacity(psi.len());
    for (c, raw) in psi.iter().enumerate() {
        if raw.len() != m {
            return Err(Error::GridMismatch("trace and modulation have different sample counts".into()));
        }
        let scale = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if raw[0].norm() > 1e-8 * scale + 1e-14 {
            warnings.push(format!("channel {c}: psi(0) = {:.3e} is not zero", raw[0].norm()));
        }
        let (re, wr) = smooth_channel(&raw.iter().map(|z| z.re).collect::<Vec<_>>(), smoothing)?;
        let (im, wi) = smooth_channel(&raw.iter().map(|z| z.im).collect::<Vec<_>>(), smoothing)?;
        weights.push(wr.max(wi));
        let smooth: Vec<Complex64> = re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect();
        let dpsi = differentiate(&smooth, dt);
        let diag = l0 + dl[0] * (0.5 * dt);
        let mut phi = vec![Complex64::default(); m];
        phi[0] = dpsi[0] / l0;
        for i in 1..m {
            let mut s = dl[i] * phi[0] * 0.5;
            for j in 1..i {
                s += dl[i - j] * phi[j];
            }
            phi[i] = (dpsi[i] - s * dt) / diag;
        }
        out.push(phi);
    }
    Ok(Deconvolved { channels: out, warnings, smoothing_weights: weights })
}

/// Real-valued deconvolution; any `ψ(0) ≠ 0` warning is returned alongside.
pub fn deconvolve(lambda: &ModulationSignal, psi: &TraceSignal, smoothing: Smoothing) -> Result<(TraceSignal, Vec<String>)> {
    lambda.time.check_same(psi.time())?;
    if !lambda.is_real() {
        return Err(Error::invalid("complex modulation needs deconvolve_complex"));
    }
    let channels: Vec<Vec<Complex64>> =
        psi.channels().iter().map(|c| c.iter().map(|&v| Complex64::new(v, 0.0)).collect()).collect();
    let d = deconvolve_complex(lambda, &channels, smoothing)?;
    Ok((d.real_signal(*psi.time(), psi.boundaries().to_vec())?, d.warnings))
}

/// `(κ|λ(0)|/√2) exp(−τ‖λ'‖²/|λ(0)|²)`, halved for perturbed generators.
pub fn theoretical_lower_bound(kappa: f64, lambda: &ModulationSignal, tau: f64, perturbed: bool) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::invalid(format!("kappa must be positive, got {kappa}")));
    }
    let l0 = lambda.lambda0().norm();
    if l0 == 0.0 {
        return Err(Error::NotInvertible);
    }
    let d = lambda.derivative_l2();
    let base = kappa * l0 / std::f64::consts::SQRT_2 * (-tau * d * d / (l0 * l0)).exp();
    Ok(if perturbed { 0.5 * base } else { base })
}

/// `(√2/|λ(0)|) exp(τ‖λ'‖²/|λ(0)|²)`, the bound on the second-kind solution
/// operator.
pub fn gronwall_bound(lambda: &ModulationSignal, tau: f64) -> Result<f64> {
    let l0 = lambda.lambda0().norm();
    if l0 == 0.0 {
        return Err(Error::NotInvertible);
    }
    let d = lambda.derivative_l2();
    Ok(std::f64::consts::SQRT_2 / l0 * (tau * d * d / (l0 * l0)).exp())
}

/// Time metric of the source fit: `H¹(0,τ)` for the hyperbolic equations,
/// `L²(0,τ)` for heat, whose traces carry an initial layer.
fn fit_inner(equation: Equation) -> fn(&TimeGrid, &[f64], &[f64]) -> f64 {
    if equation.is_parabolic() {
        time_l2_inner_stacked
    } else {
        time_h1_inner_stacked
    }
}

/// Trace responses of a fixed dictionary of source shapes in a fixed
/// system, reusable across many observations.
#[derive(Debug, Clone)]
pub struct SourceModel {
    config: ObservationConfig,
    shapes: Vec<CoefficientField>,
    columns: Vec<Vec<f64>>,
    normal: DMatrix<f64>,
    condition: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceRecovery {
    pub coefficients: Vec<Complex64>,
    /// Relative misfit of the deconvolved trace in the fit metric.
    pub residual: f64,
    pub condition: f64,
    pub warnings: Vec<String>,
}

impl SourceModel {
    /// Homogeneous responses: `u₀ = 0, u₁ = f` for wave and beam,
    /// `u₀ = f` for heat.
    pub fn new(
        q: &CoefficientField,
        a: &CoefficientField,
        shapes: Vec<CoefficientField>,
        config: &ObservationConfig,
    ) -> Result<Self> {
        if shapes.is_empty() {
            return Err(Error::invalid("source dictionary is empty"));
        }
        let n = q.grid().n();
        let zero = vec![0.0; n];
        let columns: Vec<Vec<f64>> = shapes
            .par_iter()
            .map(|f| {
                let (u0, u1) = match config.equation {
                    Equation::Heat => (f.values(), zero.as_slice()),
                    _ => (zero.as_slice(), f.values()),
                };
                solve(q, a, u0, u1, config, &Forcing::None, SolveOptions::default()).map(|s| s.trace.stacked())
            })
            .collect::<Result<_>>()?;
        let k = columns.len();
        let time = config.time;
        let inner = fit_inner(config.equation);
        let mut normal = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = inner(&time, &columns[i], &columns[j]);
                normal[(i, j)] = v;
                normal[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(normal.clone()).eigenvalues;
        let lmax = eig.iter().copied().fold(0.0, f64::max);
        let lmin = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
        Ok(Self { config: config.clone(), shapes, columns, normal, condition })
    }

    pub fn shapes(&self) -> &[CoefficientField] {
        &self.shapes
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn config(&self) -> &ObservationConfig {
        &self.config
    }

    /// Least squares fit of already-deconvolved homogeneous traces.
    pub fn fit(&self, homogeneous: &[Vec<Complex64>]) -> Result<SourceRecovery> {
        if !(self.condition.is_finite() && self.condition <= 1e12) {
            return Err(Error::RankDeficient { condition: self.condition });
        }
        let time = self.config.time;
        let re: Vec<f64> = homogeneous.iter().flat_map(|c| c.iter().map(|z| z.re)).collect();
        let im: Vec<f64> = homogeneous.iter().flat_map(|c| c.iter().map(|z| z.im)).collect();
        if re.len() != self.columns[0].len() {
            return Err(Error::GridMismatch("observation does not match the dictionary traces".into()));
        }
        let chol = Cholesky::new(self.normal.clone()).ok_or(Error::RankDeficient { condition: self.condition })?;
        let inner = fit_inner(self.config.equation);
        let solve_part = |y: &[f64]| -> DVector<f64> {
            let rhs = DVector::from_iterator(self.columns.len(), self.columns.iter().map(|c| inner(&time, c, y)));
            chol.solve(&rhs)
        };
        let cr = solve_part(&re);
        let ci = solve_part(&im);
        let mut num = 0.0;
        let mut den = 0.0;
        for (y, c) in [(&re, &cr), (&im, &ci)] {
            let mut fit = vec![0.0; y.len()];
            for (col, w) in self.columns.iter().zip(c.iter()) {
                fit.iter_mut().zip(col).for_each(|(f, v)| *f += w * v);
            }
            let r: Vec<f64> = fit.iter().zip(y.iter()).map(|(f, v)| f - v).collect();
            num += inner(&time, &r, &r);
            den += inner(&time, y, y);
        }
        let residual = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
        Ok(SourceRecovery {
            coefficients: cr.iter().zip(ci.iter()).map(|(r, i)| Complex64::new(*r, *i)).collect(),
            residual,
            condition: self.condition,
            warnings: vec![],
        })
    }

    /// Deconvolves the observed source-driven trace and fits the dictionary.
    pub fn recover(&self, lambda: &ModulationSignal, observed: &[Vec<Complex64>], smoothing: Smoothing) -> Result<SourceRecovery> {
        lambda.time().check_same(&self.config.time)?;
        let d = deconvolve_complex(lambda, observed, smoothing)?;
        let mut rec = self.fit(&d.channels)?;
        rec.warnings = d.warnings;
        Ok(rec)
    }

    /// Real part of `Σ c_j f_j`.
    pub fn synthesize(&self, coefficients: &[Complex64]) -> Result<(CoefficientField, CoefficientField)> {
        let grid = *self.shapes[0].grid();
        let re: Vec<f64> = coefficients.iter().map(|c| c.re).collect();
        let im: Vec<f64> = coefficients.iter().map(|c| c.im).collect();
        Ok((CoefficientField::synthesize(grid, &re, &self.shapes)?, CoefficientField::synthesize(grid, &im, &self.shapes)?))
    }
}

/// Recovers `f ∈ span{φ₁..φ_K}` from the trace of the source problem
/// driven by `λ(t) f(x)` in the system `(q, a)`.
pub fn recover_source(
    q: &CoefficientField,
    a: &CoefficientField,
    lambda: &ModulationSignal,
    observed: &TraceSignal,
    basis: &SpectralBasis,
    count: usize,
    config: &ObservationConfig,
) -> Result<(CoefficientField, SourceRecovery)> {
    if count > basis.len() {
        return Err(Error::TooManyModes { requested: count, available: basis.len() });
    }
    let model = SourceModel::new(q, a, basis.modes()[..count].to_vec(), config)?;
    let channels: Vec<Vec<Complex64>> =
        observed.channels().iter().map(|c| c.iter().map(|&v| Complex64::new(v, 0.0)).collect()).collect();
    let rec = model.recover(lambda, &channels, Smoothing::Off)?;
    let (field, _) = model.synthesize(&rec.coefficients)?;
    Ok((field, rec))
}

/// Trace of the source problem `λ(t) f(x)` with zero initial data; complex
/// modulations are split into two real solves.
pub fn source_trace(
    q: &CoefficientField,
    a: &CoefficientField,
    lambda: &ModulationSignal,
    shape: &[f64],
    config: &ObservationConfig,
) -> Result<Vec<Vec<Complex64>>> {
    let n = q.grid().n();
    let zero = vec![0.0; n];
    let run = |m: Vec<f64>| -> Result<Vec<Vec<f64>>> {
        let forcing = Forcing::Separable { modulation: m, shape: shape.to_vec() };
        Ok(solve(q, a, &zero, &zero, config, &forcing, SolveOptions::default())?.trace.channels().to_vec())
    };
    let re = run(lambda.real_parts())?;
    let im = if lambda.values().iter().any(|z| z.im != 0.0) {
        run(lambda.imag_parts())?
    } else {
        vec![vec![0.0; config.time.n_samples()]; re.len()]
    };
    Ok(re
        .into_iter()
        .zip(im)
        .map(|(r, i)| r.into_iter().zip(i).map(|(x, y)| Complex64::new(x, y)).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::with_step(1.0, 1e-3).unwrap()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let n: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let d: f64 = b.iter().map(|y| y * y).sum();
        (n / d).sqrt()
    }

    #[test]
    fn s_of_constants_is_time() {
        let t = grid();
        let l = ModulationSignal::constant(t, 1.0).unwrap();
        let h = TraceSignal::scalar(t, vec![1.0; t.n_samples()]).unwrap();
        let s = apply_s(&l, &h).unwrap();
        for (i, v) in s.channel(0).iter().enumerate() {
            assert!((v - t.t(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn s_of_exponential_kernel() {
        let t = grid();
        let l = ModulationSignal::from_fn(t, |s| (-s).exp()).unwrap();
        let h = TraceSignal::scalar(t, vec![1.0; t.n_samples()]).unwrap();
        let s = apply_s(&l, &h).unwrap();
        for (i, v) in s.channel(0).iter().enumerate() {
            assert!((v - (1.0 - (-t.t(i)).exp())).abs() < 1e-6);
        }
    }

    #[test]
    fn derivative_of_ramp() {
        let t = grid();
        let l = ModulationSignal::constant(t, 1.0).unwrap();
        let psi = TraceSignal::scalar(t, t.times()).unwrap();
        let (phi, warn) = deconvolve(&l, &psi, Smoothing::Off).unwrap();
        assert!(warn.is_empty());
        assert!(phi.channel(0).iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn round_trip_cosine_kernel() {
        let t = grid();
        let l = ModulationSignal::from_fn(t, |s| (3.0 * s).cos()).unwrap();
        let h: Vec<f64> = t.times().iter().map(|s| (5.0 * s).sin()).collect();
        let psi = apply_s(&l, &TraceSignal::scalar(t, h.clone()).unwrap()).unwrap();
        let (back, _) = deconvolve(&l, &psi, Smoothing::Off).unwrap();
        assert!(rel(back.channel(0), &h) < 1e-4);
    }

    #[test]
    fn zero_lambda0_is_rejected() {
        let t = grid();
        let l = ModulationSignal::from_fn(t, |s| s).unwrap();
        let psi = TraceSignal::scalar(t, vec![0.0; t.n_samples()]).unwrap();
        assert!(matches!(deconvolve(&l, &psi, Smoothing::Off), Err(Error::NotInvertible)));
    }

    #[test]
    fn nonzero_psi0_warns() {
        let t = grid();
        let l = ModulationSignal::constant(t, 1.0).unwrap();
        let psi = TraceSignal::scalar(t, vec![1.0; t.n_samples()]).unwrap();
        let (_, warn) = deconvolve(&l, &psi, Smoothing::Off).unwrap();
        assert_eq!(warn.len(), 1);
    }

    #[test]
    fn lower_bound_values() {
        let t = grid();
        let one = ModulationSignal::constant(t, 1.0).unwrap();
        assert!((theoretical_lower_bound(1.0, &one, 1.0, false).unwrap() - 0.5_f64.sqrt()).abs() < 1e-12);
        let ramp = ModulationSignal::from_fn(t, |s| 1.0 + s).unwrap();
        let v = theoretical_lower_bound(1.0, &ramp, 1.0, false).unwrap();
        assert!((v - 0.5_f64.sqrt() * (-1.0_f64).exp()).abs() < 1e-9);
        assert_eq!(theoretical_lower_bound(1.0, &ramp, 1.0, true).unwrap(), 0.5 * v);
        assert!(theoretical_lower_bound(0.0, &one, 1.0, false).is_err());
    }

    #[test]
    fn discrepancy_smoothing_matches_noise_level() {
        let t = grid();
        let clean: Vec<f64> = t.times().iter().map(|s| s * s).collect();
        let noisy: Vec<f64> = clean.iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { 1e-3 } else { -1e-3 }).collect();
        let (y, alpha) = smooth_channel(&noisy, Smoothing::Discrepancy(1e-3)).unwrap();
        assert!(alpha > 0.0);
        let rms = (y.iter().zip(&noisy).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        assert!((rms - 1e-3).abs() < 1e-5, "{rms}");
    }
}
