//! Eigenstructure of the damped generator `[[0, I], [-E, -diag(a₀)]]` in the
//! energy space: perturbed eigenvalues, eigenvectors of the form `(φ, iμφ)`,
//! the biorthogonal family and frame bounds.

use std::io::Write;

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use super::{beam_eigenpairs, budget_with_gap, dirichlet_eigenpairs, gap_statistics, PerturbationBudget};
use crate::banded::SymBand;
use crate::error::{Error, Result};
use crate::grid::{CoefficientField, Grid1D};
use crate::operators::Equation;

/// A state `(u, v)` of the first-order system.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub displacement: Vec<Complex64>,
    pub velocity: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        Self { displacement: vec![Complex64::default(); n], velocity: vec![Complex64::default(); n] }
    }

    pub fn from_real(u: &[f64], v: &[f64]) -> Self {
        Self {
            displacement: u.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            velocity: v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.displacement.len()
    }

    fn axpy(&mut self, c: Complex64, other: &StateVector) {
        for (a, b) in self.displacement.iter_mut().zip(&other.displacement) {
            *a += c * b;
        }
        for (a, b) in self.velocity.iter_mut().zip(&other.velocity) {
            *a += c * b;
        }
    }
}

#[derive(Debug, Clone)]
pub struct RieszMode {
    /// Signed index `k ∈ ℤ*`, paired to `sign(k)·ω_|k|`.
    pub k: i64,
    pub mu: Complex64,
    pub unperturbed: f64,
    /// Unit vector in the energy norm.
    pub state: StateVector,
    pub dual: StateVector,
}

impl RieszMode {
    /// `|μ_k − sign(k) ω_|k||`
    pub fn deviation(&self) -> f64 {
        (self.mu - Complex64::new(self.k.signum() as f64 * self.unperturbed, 0.0)).norm()
    }

    /// Growth rate `Re(iμ_k)`.
    pub fn decay_rate(&self) -> f64 {
        (Complex64::i() * self.mu).re
    }
}

#[derive(Debug, Clone)]
pub struct RieszBasisData {
    equation: Equation,
    grid: Grid1D,
    a0: CoefficientField,
    principal: SymBand,
    budget: PerturbationBudget,
    modes: Vec<RieszMode>,
    alpha_frame: f64,
    beta_frame: f64,
    biorthogonality_residual: f64,
    k_tilde: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RieszSummary {
    pub equation: Equation,
    pub modes: usize,
    pub alpha_frame: f64,
    pub beta_frame: f64,
    pub biorthogonality_residual: f64,
    pub k_tilde: Option<usize>,
    pub budget: PerturbationBudget,
}

impl RieszBasisData {
    pub fn equation(&self) -> Equation {
        self.equation
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn a0(&self) -> &CoefficientField {
        &self.a0
    }

    pub fn budget(&self) -> &PerturbationBudget {
        &self.budget
    }

    pub fn alpha_bar(&self) -> f64 {
        self.budget.alpha_bar
    }

    /// Modes ordered `k = -K, …, -1, 1, …, K`.
    pub fn modes(&self) -> &[RieszMode] {
        &self.modes
    }

    pub fn mode(&self, k: i64) -> Result<&RieszMode> {
        self.modes.iter().find(|m| m.k == k).ok_or(Error::MissingProbes(vec![k]))
    }

    /// Restriction to the pairs `|k| ≤ count`, with the biorthogonal family
    /// and frame bounds recomputed on the smaller span.
    pub fn truncated(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.max_index() {
            return Err(Error::TooManyModes { requested: count, available: self.max_index() });
        }
        let modes = self.modes.iter().filter(|m| m.k.unsigned_abs() as usize <= count).cloned().collect();
        assemble(self.equation, self.grid, self.a0.clone(), self.principal.clone(), self.budget, modes)
    }

    /// Largest `|k|` available.
    pub fn max_index(&self) -> usize {
        self.modes.len() / 2
    }

    pub fn alpha_frame(&self) -> f64 {
        self.alpha_frame
    }

    pub fn beta_frame(&self) -> f64 {
        self.beta_frame
    }

    pub fn biorthogonality_residual(&self) -> f64 {
        self.biorthogonality_residual
    }

    /// Smallest `k̃` such that every computed `|k| ≥ k̃` lies within `ᾱ` of
    /// its unperturbed frequency; `None` if even the top pair fails.
    pub fn k_tilde(&self) -> Option<usize> {
        self.k_tilde
    }

    pub fn summary(&self) -> RieszSummary {
        RieszSummary {
            equation: self.equation,
            modes: self.max_index(),
            alpha_frame: self.alpha_frame,
            beta_frame: self.beta_frame,
            biorthogonality_residual: self.biorthogonality_residual,
            k_tilde: self.k_tilde,
            budget: self.budget,
        }
    }

    /// Energy inner product `⟨x, y⟩_H = h(E x_u, y_u) + h(x_v, y_v)`,
    /// antilinear in `y`.
    pub fn inner(&self, x: &StateVector, y: &StateVector) -> Complex64 {
        energy_inner(&self.principal, self.grid.h(), x, y)
    }

    pub fn norm(&self, x: &StateVector) -> f64 {
        self.inner(x, x).re.max(0.0).sqrt()
    }

    /// `x = Σ_k ⟨x, φ̃_k⟩ φ_k`, exact for `x` in the span of the modes.
    pub fn expand(&self, x: &StateVector) -> Vec<Complex64> {
        self.modes.iter().map(|m| self.inner(x, &m.dual)).collect()
    }

    /// `Σ_k c_k φ̃_k`, the dual synthesis that inverts `x ↦ (⟨x, φ_k⟩)_k`
    /// on the span of the modes.
    pub fn synthesize_dual(&self, coefficients: &[Complex64]) -> Result<StateVector> {
        if coefficients.len() != self.modes.len() {
            return Err(Error::invalid(format!(
                "expected {} coefficients, got {}",
                self.modes.len(),
                coefficients.len()
            )));
        }
        let mut out = StateVector::zeros(self.grid.n());
        for (c, m) in coefficients.iter().zip(&self.modes) {
            out.axpy(*c, &m.dual);
        }
        Ok(out)
    }

    /// CSV with columns `k,eigenvalue,re_mu,im_mu` where `eigenvalue` is the
    /// unperturbed frequency the mode is paired with.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,eigenvalue,re_mu,im_mu")?;
        for m in &self.modes {
            writeln!(w, "{},{},{},{}", m.k, m.k.signum() as f64 * m.unperturbed, m.mu.re, m.mu.im)?;
        }
        Ok(())
    }
}

fn band_matvec_c(a: &SymBand, x: &[Complex64]) -> Vec<Complex64> {
    let re: Vec<f64> = x.iter().map(|z| z.re).collect();
    let im: Vec<f64> = x.iter().map(|z| z.im).collect();
    a.matvec(&re).into_iter().zip(a.matvec(&im)).map(|(r, i)| Complex64::new(r, i)).collect()
}

fn cdot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

pub(crate) fn energy_inner(e: &SymBand, h: f64, x: &StateVector, y: &StateVector) -> Complex64 {
    let ex = band_matvec_c(e, &x.displacement);
    (cdot(&ex, &y.displacement) + cdot(&x.velocity, &y.velocity)) * h
}

/// Perturbed spectrum of the damped generator with `K` pairs `k = ±1..±K`.
///
/// `delta` defaults to the middle of its admissible interval.
pub fn perturbed_spectrum(
    a0: &CoefficientField,
    equation: Equation,
    count: usize,
    delta: Option<f64>,
) -> Result<RieszBasisData> {
    let grid = *a0.grid();
    if count == 0 {
        return Err(Error::invalid("perturbed spectrum needs at least one mode pair"));
    }
    let unperturbed = match equation {
        Equation::Wave => dirichlet_eigenpairs(&CoefficientField::zeros(grid), count + 1)?,
        Equation::Beam => beam_eigenpairs(count + 1, grid)?,
        Equation::Heat => return Err(Error::invalid("the heat generator is selfadjoint")),
    };
    let gap = match equation {
        Equation::Wave => std::f64::consts::PI / grid.length(),
        _ => gap_statistics(&unperturbed.frequencies())?.min_gap,
    };
    let rho = a0.max_abs();
    let threshold = super::alpha_threshold(gap);
    if rho >= threshold {
        return Err(Error::PerturbationTooLarge { rho, threshold });
    }
    let upper = 1.0 - (rho / threshold).powi(2);
    let budget = budget_with_gap(rho, equation, gap, delta.unwrap_or(0.5 * upper))?;

    let n = grid.n();
    let h = grid.h();
    let e = equation.principal_part(&grid);
    let damping = a0.values();

    let mut block = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        block[(i, n + i)] = 1.0;
        block[(n + i, n + i)] = -damping[i];
        let lo = i.saturating_sub(e.bandwidth());
        let hi = (i + e.bandwidth() + 1).min(n);
        for j in lo..hi {
            block[(n + i, j)] = -e.get(i, j);
        }
    }
    let schur = Schur::try_new(block, 1e-14, 100_000)
        .ok_or_else(|| Error::NonConvergence { iterations: 100_000, history: vec![] })?;
    // μ = -i s for every eigenvalue s of the generator
    let spectrum: Vec<Complex64> = schur.complex_eigenvalues().iter().map(|s| -Complex64::i() * s).collect();

    let freqs = unperturbed.frequencies();
    let local_gap = |j: usize| -> f64 {
        let below = if j == 0 { 2.0 * freqs[0] } else { freqs[j] - freqs[j - 1] };
        below.min(freqs[j + 1] - freqs[j])
    };

    let mut used = vec![false; spectrum.len()];
    let mut paired: Vec<(i64, usize)> = Vec::with_capacity(2 * count);
    for j in (0..count).rev() {
        for sign in [1i64, -1] {
            let target = Complex64::new(sign as f64 * freqs[j], 0.0);
            let radius = 0.5 * local_gap(j);
            let mut order: Vec<(f64, usize)> = spectrum
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .map(|(i, m)| ((m - target).norm(), i))
                .collect();
            order.sort_by(|x, y| x.0.total_cmp(&y.0));
            let k = sign * (j as i64 + 1);
            match order.as_slice() {
                [] => return Err(Error::PairingAmbiguity { k, detail: "no eigenvalues left".into() }),
                [(d, _), ..] if *d >= radius => {
                    return Err(Error::PairingAmbiguity {
                        k,
                        detail: format!("nearest eigenvalue at distance {d:.3e} exceeds half gap {radius:.3e}"),
                    })
                }
                [_, (d2, _), ..] if *d2 < radius => {
                    return Err(Error::PairingAmbiguity {
                        k,
                        detail: format!("two eigenvalues within half gap {radius:.3e} (second at {d2:.3e})"),
                    })
                }
                [(_, i), ..] => {
                    used[*i] = true;
                    paired.push((k, *i));
                }
            }
        }
    }
    paired.sort_by_key(|(k, _)| *k);

    let mut modes = Vec::with_capacity(paired.len());
    for (k, idx) in paired {
        let start = unperturbed.modes()[(k.unsigned_abs() - 1) as usize].values();
        let (s, u) = refine_eigenvector(&e, damping, Complex64::i() * spectrum[idx], start)?;
        let v: Vec<Complex64> = u.iter().map(|x| s * x).collect();
        let mut state = StateVector { displacement: u, velocity: v };
        let nrm = energy_inner(&e, h, &state, &state).re.sqrt();
        let pivot = state
            .displacement
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or(Complex64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        let scale = phase / nrm;
        for z in state.displacement.iter_mut().chain(state.velocity.iter_mut()) {
            *z *= scale;
        }
        modes.push(RieszMode {
            k,
            mu: -Complex64::i() * s,
            unperturbed: freqs[(k.unsigned_abs() - 1) as usize],
            state,
            dual: StateVector::zeros(n),
        });
    }

    assemble(equation, grid, a0.clone(), e, budget, modes)
}

fn assemble(
    equation: Equation,
    grid: Grid1D,
    a0: CoefficientField,
    e: SymBand,
    budget: PerturbationBudget,
    mut modes: Vec<RieszMode>,
) -> Result<RieszBasisData> {
    let n = grid.n();
    let h = grid.h();
    let count = modes.len() / 2;
    let m = modes.len();
    let gram = DMatrix::<Complex64>::from_fn(m, m, |i, j| energy_inner(&e, h, &modes[i].state, &modes[j].state));
    let herm = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(herm, 1e-15, 10_000)
        .ok_or_else(|| Error::NonConvergence { iterations: 10_000, history: vec![] })?;
    let smin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if smin < 1e-20 {
        return Err(Error::Defective { sigma_min: smin.max(0.0).sqrt() });
    }
    let inv = gram.clone().try_inverse().ok_or(Error::Defective { sigma_min: smin.sqrt() })?;
    // φ̃_k = Σ_j conj((M⁻¹)_{jk}) φ_j with M_{ij} = ⟨φ_i, φ_j⟩, so ⟨φ_i, φ̃_k⟩ = δ_ik
    for kk in 0..m {
        let mut dual = StateVector::zeros(n);
        for j in 0..m {
            dual.axpy(inv[(j, kk)].conj(), &modes[j].state);
        }
        modes[kk].dual = dual;
    }
    let mut biorth = 0.0_f64;
    for i in 0..m {
        for kk in 0..m {
            let want = if i == kk { 1.0 } else { 0.0 };
            let got = energy_inner(&e, h, &modes[i].state, &modes[kk].dual);
            biorth = biorth.max((got - Complex64::new(want, 0.0)).norm());
        }
    }

    let tol = |w: f64| 1e-9 * (1.0 + w);
    let mut k_tilde = None;
    for kk in (1..=count).rev() {
        let ok = modes
            .iter()
            .filter(|md| md.k.unsigned_abs() as usize == kk)
            .all(|md| md.deviation() <= budget.alpha_bar + tol(md.unperturbed));
        if !ok {
            break;
        }
        k_tilde = Some(kk);
    }

    Ok(RieszBasisData {
        equation,
        grid,
        a0,
        principal: e,
        budget,
        modes,
        alpha_frame: smin.min(1.0 / smax),
        beta_frame: smax,
        biorthogonality_residual: biorth,
        k_tilde,
    })
}

/// Inverse iteration on `P(s) = E + s·diag(a₀) + s²` from an eigenvalue
/// estimate, with Rayleigh updates of `s`.
fn refine_eigenvector(e: &SymBand, damping: &[f64], s0: Complex64, start: &[f64]) -> Result<(Complex64, Vec<Complex64>)> {
    let mut s = s0;
    let mut u: Vec<Complex64> = start.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    for _ in 0..3 {
        let shift: Vec<Complex64> = damping.iter().map(|&d| s * d + s * s).collect();
        let lu = e.lu_with_diag(&shift)?;
        for _ in 0..2 {
            u = lu.solve(&u);
            let nrm = cdot(&u, &u).re.sqrt();
            if !(nrm.is_finite() && nrm > 0.0) {
                return Err(Error::Defective { sigma_min: 0.0 });
            }
            u.iter_mut().for_each(|z| *z /= nrm);
        }
        let a = cdot(&u, &u);
        let du: Vec<Complex64> = u.iter().zip(damping).map(|(z, d)| z * d).collect();
        let b = cdot(&du, &u);
        let c = cdot(&band_matvec_c(e, &u), &u);
        let disc = (b * b - a * c * 4.0).sqrt();
        let r1 = (-b + disc) / (a * 2.0);
        let r2 = (-b - disc) / (a * 2.0);
        s = if (r1 - s).norm() <= (r2 - s).norm() { r1 } else { r2 };
    }
    Ok((s, u))
}
