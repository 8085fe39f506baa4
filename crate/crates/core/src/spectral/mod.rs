//! Probe dictionaries: Dirichlet Sturm–Liouville pairs of `-d²/dx² + q₀`,
//! clamped-beam pairs of `d⁴/dx⁴`, and (in [`riesz`]) the perturbed
//! nonselfadjoint spectrum of the damped first-order system.

mod riesz;

pub use riesz::{perturbed_spectrum, RieszBasisData, RieszMode, RieszSummary, StateVector};

use std::io::Write;

use serde::Serialize;

use crate::banded::lowest_eigenpairs;
use crate::error::{Error, Result};
use crate::grid::{CoefficientField, Grid1D};
use crate::operators::Equation;

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorTag {
    SturmLiouville { q0: CoefficientField },
    Beam,
}

/// Ascending eigenpairs of a discretized selfadjoint operator; modes are
/// orthonormal in the discrete L² pairing.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    grid: Grid1D,
    tag: OperatorTag,
    eigenvalues: Vec<f64>,
    modes: Vec<CoefficientField>,
}

impl SpectralBasis {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn tag(&self) -> &OperatorTag {
        &self.tag
    }

    pub fn equation(&self) -> Equation {
        match self.tag {
            OperatorTag::SturmLiouville { .. } => Equation::Wave,
            OperatorTag::Beam => Equation::Beam,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `√λ_k`: wave frequencies for Sturm–Liouville, `ρ_k` for the beam.
    pub fn frequencies(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect()
    }

    pub fn modes(&self) -> &[CoefficientField] {
        &self.modes
    }

    /// Mode `k` with 1-based indexing, as in `φ_k`.
    pub fn mode(&self, k: usize) -> Result<&CoefficientField> {
        if k == 0 || k > self.len() {
            return Err(Error::TooManyModes { requested: k, available: self.len() });
        }
        Ok(&self.modes[k - 1])
    }

    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.len() {
            return Err(Error::TooManyModes { requested: k, available: self.len() });
        }
        Ok(self.eigenvalues[k - 1])
    }

    /// Keeps only the first `k` pairs.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k > self.len() {
            return Err(Error::TooManyModes { requested: k, available: self.len() });
        }
        Ok(Self {
            grid: self.grid,
            tag: self.tag.clone(),
            eigenvalues: self.eigenvalues[..k].to_vec(),
            modes: self.modes[..k].to_vec(),
        })
    }

    /// Residual `‖A v_k − λ_k v_k‖₂` (discrete L²) for every pair.
    pub fn residuals(&self) -> Vec<f64> {
        let a = match &self.tag {
            OperatorTag::SturmLiouville { q0 } => Equation::Wave.stiffness(&self.grid, Some(q0)),
            OperatorTag::Beam => Equation::Beam.principal_part(&self.grid),
        };
        let h = self.grid.h();
        self.eigenvalues
            .iter()
            .zip(&self.modes)
            .map(|(l, m)| {
                let av = a.matvec(m.values());
                let r: f64 = av.iter().zip(m.values()).map(|(x, v)| (x - l * v).powi(2)).sum();
                (h * r).sqrt()
            })
            .collect()
    }

    /// Coefficients `(f, φ_k)` for every mode.
    pub fn analyze(&self, f: &CoefficientField) -> Result<Vec<f64>> {
        self.modes.iter().map(|m| crate::grid::inner_l2(f, m)).collect()
    }

    pub fn synthesize(&self, coefficients: &[f64]) -> Result<CoefficientField> {
        CoefficientField::synthesize(self.grid, coefficients, &self.modes)
    }

    /// CSV with columns `k,eigenvalue,frequency`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,eigenvalue,frequency")?;
        for (i, (l, f)) in self.eigenvalues.iter().zip(self.frequencies()).enumerate() {
            writeln!(w, "{},{},{}", i + 1, l, f)?;
        }
        Ok(())
    }
}

fn basis_from_matrix(
    grid: Grid1D,
    tag: OperatorTag,
    matrix: &crate::banded::SymBand,
    count: usize,
) -> Result<SpectralBasis> {
    let (values, vectors) = lowest_eigenpairs(matrix, count)?;
    let scale = 1.0 / grid.h().sqrt();
    let modes = vectors
        .into_iter()
        .map(|v| CoefficientField::new(grid, v.into_iter().map(|x| x * scale).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralBasis { grid, tag, eigenvalues: values, modes })
}

/// First `count` Dirichlet eigenpairs of `-d²/dx² + q₀`.
pub fn dirichlet_eigenpairs(q0: &CoefficientField, count: usize) -> Result<SpectralBasis> {
    let grid = *q0.grid();
    if count > grid.n() {
        return Err(Error::TooManyModes { requested: count, available: grid.n() });
    }
    let a = Equation::Wave.stiffness(&grid, Some(q0));
    basis_from_matrix(grid, OperatorTag::SturmLiouville { q0: q0.clone() }, &a, count)
}

/// First `count` clamped-beam eigenpairs of `d⁴/dx⁴`. Eigenvalues are `λ_k`
/// of the fourth-order operator; [`SpectralBasis::frequencies`] gives `ρ_k`.
pub fn beam_eigenpairs(count: usize, grid: Grid1D) -> Result<SpectralBasis> {
    if grid.n() < 16 {
        return Err(Error::GridTooCoarse(format!(
            "beam needs at least 16 interior nodes, got {}",
            grid.n()
        )));
    }
    if count + 2 > grid.n() {
        return Err(Error::TooManyModes { requested: count, available: grid.n() - 2 });
    }
    let a = Equation::Beam.principal_part(&grid);
    basis_from_matrix(grid, OperatorTag::Beam, &a, count)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylCheck {
    pub c: f64,
    pub ok: bool,
    /// Growth exponent used: `2` for second-order, `4` for the beam.
    pub exponent: i32,
}

/// Smallest `c > 1` with `c⁻¹ k^p ≤ λ_k ≤ c k^p` over the computed pairs,
/// `p = 2` for Sturm–Liouville and `p = 4` for the beam.
pub fn weyl_check(basis: &SpectralBasis) -> Result<WeylCheck> {
    if basis.len() < 3 {
        return Err(Error::invalid(format!(
            "Weyl check needs at least 3 eigenvalues, got {}",
            basis.len()
        )));
    }
    let (exponent, nonneg) = match basis.tag() {
        OperatorTag::SturmLiouville { q0 } => (2, q0.is_nonneg()),
        OperatorTag::Beam => (4, true),
    };
    let mut c = 1.0_f64;
    for (i, &l) in basis.eigenvalues().iter().enumerate() {
        if l <= 0.0 {
            if nonneg {
                return Err(Error::NonpositiveEigenvalue { index: i + 1, value: l });
            }
            return Ok(WeylCheck { c: f64::INFINITY, ok: false, exponent });
        }
        let kp = ((i + 1) as f64).powi(exponent);
        c = c.max(l / kp).max(kp / l);
    }
    let c = if c > 1.0 { c } else { 1.0 + f64::EPSILON };
    Ok(WeylCheck { c, ok: c.is_finite(), exponent })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapStatistics {
    pub min_gap: f64,
    /// Smallest gap among the last quarter of consecutive pairs.
    pub asymptotic_gap: f64,
}

pub fn gap_statistics(frequencies: &[f64]) -> Result<GapStatistics> {
    if frequencies.len() < 2 {
        return Err(Error::invalid("gap statistics need at least two frequencies"));
    }
    if frequencies.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("frequencies must be sorted ascending"));
    }
    let gaps: Vec<f64> = frequencies.windows(2).map(|w| w[1] - w[0]).collect();
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let tail = gaps.len().div_ceil(4);
    let asymptotic_gap = gaps[gaps.len() - tail..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GapStatistics { min_gap, asymptotic_gap })
}

/// `Σ_{k≥1} (2k+1)⁻² = π²/8 − 1`.
pub fn varrho() -> f64 {
    std::f64::consts::PI.powi(2) / 8.0 - 1.0
}

/// Constants of the nonselfadjoint perturbation theorem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationBudget {
    pub equation: Equation,
    /// `‖a₀‖_∞`
    pub rho: f64,
    pub varrho: f64,
    /// Unperturbed frequency gap `d` (1 for the wave on `(0, π)`).
    pub gap: f64,
    /// `d / (2√(2(1+ϱ)))`
    pub alpha_threshold: f64,
    pub delta: f64,
    /// `ρ d / √(4ρ² + d² δ)`
    pub alpha_bar: f64,
}

impl PerturbationBudget {
    /// Largest admissible `δ`, i.e. `1 − ρ²/α²`.
    pub fn delta_upper(&self) -> f64 {
        1.0 - (self.rho / self.alpha_threshold).powi(2)
    }
}

/// Unperturbed frequency gap for the equation on the grid's domain: `π/L`
/// for the wave, the smallest computed gap `ρ_{k+1} − ρ_k` for the beam.
pub fn unperturbed_gap(equation: Equation, grid: &Grid1D) -> Result<f64> {
    match equation {
        Equation::Wave => Ok(std::f64::consts::PI / grid.length()),
        Equation::Beam => {
            let count = 6.min(grid.n().saturating_sub(2));
            let basis = beam_eigenpairs(count, *grid)?;
            Ok(gap_statistics(&basis.frequencies())?.min_gap)
        }
        Equation::Heat => Err(Error::invalid("the heat equation has no oscillatory spectrum")),
    }
}

pub fn perturbation_budget(a0: &CoefficientField, equation: Equation, delta: f64) -> Result<PerturbationBudget> {
    let gap = unperturbed_gap(equation, a0.grid())?;
    budget_with_gap(a0.max_abs(), equation, gap, delta)
}

/// `d / (2√(2(1+ϱ)))`
pub fn alpha_threshold(gap: f64) -> f64 {
    gap / (2.0 * (2.0 * (1.0 + varrho())).sqrt())
}

pub(crate) fn budget_with_gap(rho: f64, equation: Equation, gap: f64, delta: f64) -> Result<PerturbationBudget> {
    let varrho = varrho();
    let alpha_threshold = alpha_threshold(gap);
    if rho >= alpha_threshold {
        return Err(Error::PerturbationTooLarge { rho, threshold: alpha_threshold });
    }
    let upper = 1.0 - (rho / alpha_threshold).powi(2);
    if !(delta > 0.0 && delta < upper) {
        return Err(Error::invalid(format!("delta must lie in (0, {upper}), got {delta}")));
    }
    let alpha_bar = if rho == 0.0 { 0.0 } else { rho * gap / (4.0 * rho * rho + gap * gap * delta).sqrt() };
    Ok(PerturbationBudget { equation, rho, varrho, gap, alpha_threshold, delta, alpha_bar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn laplacian_spectrum_on_pi() {
        let g = Grid1D::new(PI, 2000).unwrap();
        let b = dirichlet_eigenpairs(&CoefficientField::zeros(g), 5).unwrap();
        for (k, l) in b.eigenvalues().iter().enumerate() {
            let kk = ((k + 1) * (k + 1)) as f64;
            assert!((l - kk).abs() / kk < 1e-5, "{l}");
        }
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let g = Grid1D::new(PI, 2000).unwrap();
        let b = dirichlet_eigenpairs(&CoefficientField::constant(g, 2.5), 5).unwrap();
        for (k, l) in b.eigenvalues().iter().enumerate() {
            let e = ((k + 1) * (k + 1)) as f64 + 2.5;
            assert!((l - e).abs() / e < 1e-5);
        }
    }

    #[test]
    fn too_many_modes_is_an_error() {
        let g = Grid1D::new(1.0, 10).unwrap();
        assert!(dirichlet_eigenpairs(&CoefficientField::zeros(g), 11).is_err());
        assert!(beam_eigenpairs(2, g).is_err());
        let g = Grid1D::new(1.0, 20).unwrap();
        assert!(beam_eigenpairs(19, g).is_err());
    }

    #[test]
    fn weyl_constant_for_shifted_spectrum() {
        let g = Grid1D::new(PI, 400).unwrap();
        let b = dirichlet_eigenpairs(&CoefficientField::constant(g, 4.0), 10).unwrap();
        let w = weyl_check(&b).unwrap();
        // λ_1 ≈ 5 dominates max(λ_k/k², k²/λ_k)
        assert!(w.ok && w.c <= 5.0 + 1e-3 && w.c > 4.9);
        let one = b.truncated(1).unwrap();
        assert!(weyl_check(&one).is_err());
    }

    #[test]
    fn weyl_rejects_nonpositive_eigenvalue_for_nonneg_potential() {
        let g = Grid1D::new(PI, 50).unwrap();
        let b = SpectralBasis {
            grid: g,
            tag: OperatorTag::SturmLiouville { q0: CoefficientField::zeros(g) },
            eigenvalues: vec![0.0, 1.0, 4.0],
            modes: vec![CoefficientField::zeros(g); 3],
        };
        assert!(matches!(weyl_check(&b), Err(Error::NonpositiveEigenvalue { .. })));
    }

    #[test]
    fn gap_statistics_for_wave_frequencies() {
        let freqs: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let g = gap_statistics(&freqs).unwrap();
        assert_eq!(g.min_gap, 1.0);
        assert_eq!(g.asymptotic_gap, 1.0);
        assert!(gap_statistics(&[2.0, 1.0]).is_err());
        assert!(gap_statistics(&[1.0]).is_err());
    }

    #[test]
    fn budget_values() {
        assert!((varrho() - 0.233_700_550_136_169_8).abs() < 1e-12);
        let b = budget_with_gap(0.1, Equation::Wave, 1.0, 0.5).unwrap();
        assert!((b.alpha_threshold - 1.0 / PI).abs() < 1e-12);
        assert!((b.alpha_bar - 0.1 / 0.54_f64.sqrt()).abs() < 1e-12);
        assert!(b.alpha_bar < b.gap / 2.0);
        let z = budget_with_gap(0.0, Equation::Wave, 1.0, 0.5).unwrap();
        assert_eq!(z.alpha_bar, 0.0);
        assert!(matches!(
            budget_with_gap(0.5, Equation::Wave, 1.0, 0.1),
            Err(Error::PerturbationTooLarge { .. })
        ));
        assert!(budget_with_gap(0.1, Equation::Wave, 1.0, 0.95).is_err());
        assert!(budget_with_gap(0.1, Equation::Wave, 1.0, 0.0).is_err());
    }
}
