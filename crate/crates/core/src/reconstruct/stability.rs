//! Reconstruction error against `‖ΔΛ‖` over a sweep of perturbation sizes
//! or noise levels, and logarithmic-rate fits of the resulting curve.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{reconstruct_field, Coefficients, NoiseModel, PlanChoice, ProbeKind, ProbeSetup, ReconstructionReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SweepMode {
    /// `ε` scales the perturbation direction; data are noiseless.
    PerturbationSize,
    /// `ε` is the noise standard deviation on a fixed perturbation; each
    /// row is the median over `draws` realizations.
    NoiseLevel { draws: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub epsilon: f64,
    pub delta_lambda_norm: f64,
    pub error_l2: f64,
    pub weak_error: Option<f64>,
    /// Envelope `C |ln(‖ΔΛ‖/S)|^{−p}` at the theoretical exponent.
    pub bound_value: f64,
    pub fitted_p: f64,
    pub at_floor: bool,
}

/// Least-squares fit of `err ≈ C |ln(C⁻¹‖ΔΛ‖)|^{−p}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogRateFit {
    pub p: f64,
    pub c: f64,
    /// Two-standard-error band on `p`.
    pub p_low: f64,
    pub p_high: f64,
    pub rss: f64,
    pub points: usize,
}

/// Envelope `err ≤ C |ln(‖ΔΛ‖/S)|^{−p}` calibrated on the larger half of the
/// sweep and checked at every point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnvelopeCheck {
    pub exponent: f64,
    pub scale: f64,
    pub constant: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityTable {
    pub kind: ProbeKind,
    pub mode: SweepMode,
    pub exponent: f64,
    pub rows: Vec<StabilityRow>,
    pub fit: Option<LogRateFit>,
    pub envelope: Option<EnvelopeCheck>,
    pub weak_envelope: Option<EnvelopeCheck>,
    /// Errors are nondecreasing in `ε` away from the floor.
    pub monotone: bool,
    pub warnings: Vec<String>,
}

impl StabilityTable {
    /// CSV with columns
    /// `epsilon,delta_lambda_norm,error_l2,bound_value,fitted_p,at_floor`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,delta_lambda_norm,error_l2,bound_value,fitted_p,at_floor")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.epsilon, r.delta_lambda_norm, r.error_l2, r.bound_value, r.fitted_p, r.at_floor
            )?;
        }
        Ok(())
    }
}

/// Fits `ln err = ln C − p ln ln(C/‖ΔΛ‖)` by scanning `C > max ‖ΔΛ‖` on a
/// logarithmic grid and solving for `p` at each `C`.
pub fn fit_log_rate(points: &[(f64, f64)]) -> Result<LogRateFit> {
    let pts: Vec<(f64, f64)> =
        points.iter().copied().filter(|(d, e)| *d > 0.0 && *e > 0.0 && d.is_finite() && e.is_finite()).collect();
    if pts.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} usable points, need 3", pts.len())));
    }
    let dmax = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for i in 0..=600 {
        let t = 10f64.powf(-3.0 + 6.0 * i as f64 / 600.0);
        let lnc = dmax.ln() + t;
        let xs: Vec<f64> = pts.iter().map(|(d, _)| (lnc - d.ln()).ln()).collect();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        if sxx <= 0.0 {
            continue;
        }
        let p = xs.iter().zip(&pts).map(|(x, (_, e))| x * (lnc - e.ln())).sum::<f64>() / sxx;
        let rss: f64 = xs.iter().zip(&pts).map(|(x, (_, e))| (e.ln() - lnc + p * x).powi(2)).sum();
        if best.is_none_or(|b| rss < b.1) {
            best = Some((p, rss, lnc, sxx));
        }
    }
    let (p, rss, lnc, sxx) = best.ok_or_else(|| Error::DegenerateFit("no admissible constant".into()))?;
    let se = (rss / (pts.len() - 1) as f64 / sxx).sqrt();
    Ok(LogRateFit { p, c: lnc.exp(), p_low: p - 2.0 * se, p_high: p + 2.0 * se, rss, points: pts.len() })
}

fn envelope(pairs: &[(f64, f64)], exponent: f64) -> Option<EnvelopeCheck> {
    let dmax = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    if pairs.len() < 2 || dmax <= 0.0 {
        return None;
    }
    let scale = (std::f64::consts::E * dmax).max(1.0);
    let weight = |d: f64| (d / scale).ln().abs().powf(exponent);
    let calib = &pairs[pairs.len() / 2..];
    let constant = calib.iter().filter(|p| p.0 > 0.0).map(|(d, e)| e * weight(*d)).fold(0.0, f64::max);
    let holds = pairs.iter().all(|(d, e)| if *d > 0.0 { *e <= constant / weight(*d) * (1.0 + 1e-9) } else { *e <= 1e-12 });
    Some(EnvelopeCheck { exponent, scale, constant, holds })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn heat_weak(r: &ReconstructionReport) -> Option<f64> {
    r.error("q").and_then(|e| e.weak)
}

/// Sweeps `epsilons` (at least four, spanning three decades) and tabulates
/// reconstruction error against `‖ΔΛ‖`.
pub fn stability_curve(
    setup: &ProbeSetup,
    direction: &Coefficients,
    epsilons: &[f64],
    mode: SweepMode,
    plan: PlanChoice,
    seed: u64,
) -> Result<StabilityTable> {
    if epsilons.len() < 4 || epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("a sweep needs at least four positive sizes"));
    }
    let lo = epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = epsilons.iter().copied().fold(0.0, f64::max);
    if hi / lo < 1e3 * (1.0 - 1e-12) {
        return Err(Error::invalid("sweep sizes must span at least three decades"));
    }
    let mut eps = epsilons.to_vec();
    eps.sort_by(f64::total_cmp);
    let base = setup.base();
    let truth_at = |s: f64| -> Result<Coefficients> {
        Ok(Coefficients { q: base.q.axpy(s, &direction.q)?, a: base.a.axpy(s, &direction.a)? })
    };
    let mut warnings = Vec::new();
    let (samples, floor): (Vec<(f64, f64, Option<f64>)>, f64) = match mode {
        SweepMode::PerturbationSize => {
            let s = eps
                .par_iter()
                .map(|&e| {
                    let r = reconstruct_field(setup, &truth_at(e)?, plan, None)?;
                    Ok((r.delta_lambda_norm, r.total_error(), heat_weak(&r)))
                })
                .collect::<Result<Vec<_>>>()?;
            (s, 1e-12)
        }
        SweepMode::NoiseLevel { draws } => {
            if draws == 0 {
                return Err(Error::invalid("noise sweeps need at least one draw"));
            }
            let truth = truth_at(1.0)?;
            let clean = reconstruct_field(setup, &truth, plan, None)?;
            let jobs: Vec<(usize, usize)> = (0..eps.len()).flat_map(|i| (0..draws).map(move |d| (i, d))).collect();
            let runs = jobs
                .par_iter()
                .map(|&(i, d)| {
                    let noise = NoiseModel { sigma: eps[i], seed: seed.wrapping_add(d as u64 * 7919 + i as u64) };
                    reconstruct_field(setup, &truth, plan, Some(noise)).map(|r| (i, r))
                })
                .collect::<Result<Vec<_>>>()?;
            let s = (0..eps.len())
                .map(|i| {
                    let mine: Vec<&ReconstructionReport> = runs.iter().filter(|r| r.0 == i).map(|r| &r.1).collect();
                    let mut dl: Vec<f64> = mine.iter().map(|r| r.delta_lambda_norm).collect();
                    let mut er: Vec<f64> = mine.iter().map(|r| r.total_error()).collect();
                    let mut wk: Vec<f64> = mine.iter().filter_map(|r| heat_weak(r)).collect();
                    let weak = (!wk.is_empty()).then(|| median(&mut wk));
                    (median(&mut dl), median(&mut er), weak)
                })
                .collect();
            (s, 1.5 * clean.total_error())
        }
    };
    let exponent = setup.kind.exponent();
    let at_floor: Vec<bool> = samples.iter().map(|s| s.1 <= floor).collect();
    let usable: Vec<(f64, f64)> =
        samples.iter().zip(&at_floor).filter(|(_, f)| !**f).map(|(s, _)| (s.0, s.1)).collect();
    let fit = match fit_log_rate(&usable) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(e.to_string());
            None
        }
    };
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.0, s.1)).collect();
    let env = envelope(&pairs, exponent);
    let weak_pairs: Vec<(f64, f64)> = samples.iter().filter_map(|s| s.2.map(|w| (s.0, w))).collect();
    let weak_envelope = if weak_pairs.len() == samples.len() { envelope(&weak_pairs, exponent) } else { None };
    let errs: Vec<f64> = usable.iter().map(|p| p.1).collect();
    let monotone = errs.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-6));
    let rows = eps
        .iter()
        .zip(&samples)
        .zip(&at_floor)
        .map(|((&epsilon, s), &f)| StabilityRow {
            epsilon,
            delta_lambda_norm: s.0,
            error_l2: s.1,
            weak_error: s.2,
            bound_value: env.map_or(f64::NAN, |e| {
                if s.0 > 0.0 {
                    e.constant / (s.0 / e.scale).ln().abs().powf(exponent)
                } else {
                    0.0
                }
            }),
            fitted_p: fit.map_or(f64::NAN, |f| f.p),
            at_floor: f,
        })
        .collect();
    Ok(StabilityTable {
        kind: setup.kind,
        mode,
        exponent,
        rows,
        fit,
        envelope: env,
        weak_envelope,
        monotone,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_log_law() {
        let (c, p) = (2.0, 0.5);
        let pts: Vec<(f64, f64)> =
            [1e-2, 1e-4, 1e-6, 1e-8, 1e-10].iter().map(|&d: &f64| (d, c * (c / d).ln().powf(-p))).collect();
        let f = fit_log_rate(&pts).unwrap();
        assert!((f.p - p).abs() < 0.05, "{f:?}");
        assert!(f.p_low <= f.p_high);
    }

    #[test]
    fn fit_needs_three_points() {
        assert!(matches!(fit_log_rate(&[(0.1, 0.2), (0.01, 0.1)]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn envelope_holds_for_linear_decay() {
        let pairs: Vec<(f64, f64)> = (0..6).map(|i| (10f64.powi(-2 - i), 10f64.powi(-1 - i))).collect();
        let mut sorted = pairs.clone();
        sorted.reverse();
        assert!(envelope(&sorted, 0.5).unwrap().holds);
    }
}
