//! Observability constants of the discretized pairs on spans of low modes.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{solve, time_l2_inner_stacked, Forcing, ObservationConfig, SolveOptions};
use crate::grid::{dot, CoefficientField, Grid1D, TimeGrid};
use crate::operators::Equation;
use crate::spectral::{beam_eigenpairs, dirichlet_eigenpairs, SpectralBasis};

/// Homogeneous traces of a family of initial states together with the
/// energy Gram matrix of those states.
#[derive(Debug, Clone)]
pub struct ObservationMap {
    pub equation: Equation,
    pub time: TimeGrid,
    /// `(u₀, u₁)` per column; `u₁` is zero for heat.
    pub states: Vec<(Vec<f64>, Vec<f64>)>,
    pub columns: Vec<Vec<f64>>,
    pub domain_gram: DMatrix<f64>,
}

impl ObservationMap {
    /// Stacked trace of `Σ c_j x_j`.
    pub fn trace_of(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.columns[0].len()];
        for (c, col) in coefficients.iter().zip(&self.columns) {
            out.iter_mut().zip(col).for_each(|(o, v)| *o += c * v);
        }
        out
    }

    /// Energy norm of `Σ c_j x_j`.
    pub fn state_norm(&self, coefficients: &[f64]) -> f64 {
        let k = coefficients.len();
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                s += coefficients[i] * self.domain_gram[(i, j)] * coefficients[j];
            }
        }
        s.max(0.0).sqrt()
    }

    pub fn normal_matrix(&self) -> DMatrix<f64> {
        let k = self.columns.len();
        let mut n = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = time_l2_inner_stacked(&self.time, &self.columns[i], &self.columns[j]);
                n[(i, j)] = v;
                n[(j, i)] = v;
            }
        }
        n
    }

    /// Smallest generalized singular value `min ‖Ψx‖ / ‖x‖_H`.
    pub fn kappa(&self) -> Result<f64> {
        Ok(generalized_extremes(&self.normal_matrix(), &self.domain_gram)?.0.max(0.0).sqrt())
    }

    /// States contributed by each mode: two for wave and beam, one for heat.
    fn states_per_mode(&self) -> usize {
        if self.equation == Equation::Heat {
            1
        } else {
            2
        }
    }

    /// `κ` restricted to the first `j` modes, for `j = 1..=count`.
    pub fn kappa_profile(&self) -> Result<Vec<f64>> {
        let n = self.normal_matrix();
        let per = self.states_per_mode();
        (1..=self.columns.len() / per)
            .map(|j| {
                let m = j * per;
                let sub = n.view((0, 0), (m, m)).into_owned();
                let g = self.domain_gram.view((0, 0), (m, m)).into_owned();
                Ok(generalized_extremes(&sub, &g)?.0.max(0.0).sqrt())
            })
            .collect()
    }
}

/// Extreme eigenvalues of the pencil `(N, G)` by Cholesky whitening.
pub(crate) fn generalized_extremes(n: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<(f64, f64)> {
    let chol = Cholesky::new(g.clone()).ok_or_else(|| Error::NotSpd("domain Gram".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::NotSpd("domain Gram".into()))?;
    let w = &linv * n * linv.transpose();
    let sym = (&w + w.transpose()) * 0.5;
    let ev = SymmetricEigen::new(sym).eigenvalues;
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Mode dictionary used for the observability subspace.
pub fn observation_modes(equation: Equation, q: &CoefficientField, count: usize) -> Result<SpectralBasis> {
    match equation {
        Equation::Beam => beam_eigenpairs(count, *q.grid()),
        _ => dirichlet_eigenpairs(q, count),
    }
}

/// Builds the trace map on `{(φ_j, 0), (0, φ_j)}` (wave, beam) or
/// `{φ_j}` (heat) for `j ≤ count`, with the `H¹₀ × L²` (wave), `H²₀ × L²`
/// (beam) or `H¹₀` (heat) Gram matrix.
pub fn observation_map(
    q: &CoefficientField,
    a: &CoefficientField,
    basis: &SpectralBasis,
    count: usize,
    config: &ObservationConfig,
) -> Result<ObservationMap> {
    if count == 0 || count > basis.len() {
        return Err(Error::TooManyModes { requested: count, available: basis.len() });
    }
    let grid = *q.grid();
    let n = grid.n();
    let zero = vec![0.0; n];
    let mut states = Vec::new();
    for m in &basis.modes()[..count] {
        states.push((m.values().to_vec(), zero.clone()));
        if config.equation != Equation::Heat {
            states.push((zero.clone(), m.values().to_vec()));
        }
    }
    let columns: Vec<Vec<f64>> = states
        .par_iter()
        .map(|(u0, u1)| solve(q, a, u0, u1, config, &Forcing::None, SolveOptions::default()).map(|s| s.trace.stacked()))
        .collect::<Result<_>>()?;
    let e = config.equation.principal_part(&grid);
    let h = grid.h();
    let eu: Vec<Vec<f64>> = states.iter().map(|s| e.matvec(&s.0)).collect();
    let k = states.len();
    let domain_gram =
        DMatrix::from_fn(k, k, |i, j| h * (dot(&eu[i], &states[j].0) + dot(&states[i].1, &states[j].1)));
    Ok(ObservationMap { equation: config.equation, time: config.time, states, columns, domain_gram })
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub length: f64,
    pub n_interior: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservabilityEstimate {
    pub equation: Equation,
    pub tau: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub kappa: f64,
    pub grid: GridSummary,
    pub notes: Vec<String>,
}

/// Observability constant of `(q, a)` on the span of the first `count`
/// modes of `-d²/dx² + q` (or the clamped beam).
pub fn estimate_kappa(
    q: &CoefficientField,
    a: &CoefficientField,
    config: &ObservationConfig,
    count: usize,
) -> Result<ObservabilityEstimate> {
    let basis = observation_modes(config.equation, q, count)?;
    estimate_kappa_with_basis(q, a, &basis, config, count)
}

pub fn estimate_kappa_with_basis(
    q: &CoefficientField,
    a: &CoefficientField,
    basis: &SpectralBasis,
    config: &ObservationConfig,
    count: usize,
) -> Result<ObservabilityEstimate> {
    let map = observation_map(q, a, basis, count, config)?;
    ObservabilityEstimate::from_map(&map, q.grid(), config)
}

impl ObservabilityEstimate {
    pub fn from_map(map: &ObservationMap, grid: &Grid1D, config: &ObservationConfig) -> Result<Self> {
        let mut notes = Vec::new();
        if let Some(w) = config.threshold_warning(grid) {
            notes.push(w);
        }
        Ok(Self {
            equation: config.equation,
            tau: config.time.tau(),
            k: map.columns.len() / map.states_per_mode(),
            kappa: map.kappa()?,
            grid: GridSummary { length: grid.length(), n_interior: grid.n() },
            notes,
        })
    }
}

/// Final-time heat constant `min ‖∂_ν u‖_{L²(Υ)} / ‖u(·, τ)‖₂` over the span
/// of the first `count` Dirichlet modes.
pub fn heat_final_time_kappa(q: &CoefficientField, config: &ObservationConfig, count: usize) -> Result<f64> {
    if config.equation != Equation::Heat {
        return Err(Error::invalid("final-time observability applies to the heat equation"));
    }
    let basis = dirichlet_eigenpairs(q, count)?;
    let n = q.grid().n();
    let z = vec![0.0; n];
    let sols: Vec<(Vec<f64>, Vec<f64>)> = basis
        .modes()
        .par_iter()
        .map(|m| solve(q, q, m.values(), &z, config, &Forcing::None, SolveOptions::default()).map(|s| (s.trace.stacked(), s.final_state)))
        .collect::<Result<_>>()?;
    let h = q.grid().h();
    let nrm = DMatrix::from_fn(count, count, |i, j| time_l2_inner_stacked(&config.time, &sols[i].0, &sols[j].0));
    let g = DMatrix::from_fn(count, count, |i, j| h * dot(&sols[i].1, &sols[j].1));
    Ok(generalized_extremes(&nrm, &g)?.0.max(0.0).sqrt())
}

/// Which coefficient a perturbation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationTarget {
    Damping,
    Potential,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginRow {
    pub size: f64,
    pub kappa: f64,
    pub ratio: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginReport {
    pub target: PerturbationTarget,
    pub kappa_base: f64,
    pub rows: Vec<MarginRow>,
    /// Largest tested size with `κ(perturbed) ≥ κ(base)/2`.
    pub largest_passing: Option<f64>,
}

/// Recomputes `κ` with `direction` scaled to each sup-norm size in `sizes`
/// added to the chosen coefficient, on the subspace of the base modes.
pub fn perturbation_margin_check(
    q: &CoefficientField,
    a: &CoefficientField,
    target: PerturbationTarget,
    direction: &CoefficientField,
    sizes: &[f64],
    config: &ObservationConfig,
    count: usize,
) -> Result<MarginReport> {
    let basis = observation_modes(config.equation, q, count)?;
    let kappa_base = observation_map(q, a, &basis, count, config)?.kappa()?;
    let scale = direction.max_abs();
    let unit = if scale > 0.0 { direction.scaled(1.0 / scale) } else { direction.clone() };
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let p = unit.scaled(size);
        let (qp, ap) = match target {
            PerturbationTarget::Damping => (q.clone(), a.add(&p)?),
            PerturbationTarget::Potential => (q.add(&p)?, a.clone()),
        };
        let kappa = observation_map(&qp, &ap, &basis, count, config)?.kappa()?;
        let ratio = if kappa_base > 0.0 { kappa / kappa_base } else { f64::NAN };
        rows.push(MarginRow { size, kappa, ratio, holds: ratio >= 0.5 });
    }
    let largest_passing = rows.iter().filter(|r| r.holds).map(|r| r.size).fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))));
    Ok(MarginReport { target, kappa_base, rows, largest_passing })
}
