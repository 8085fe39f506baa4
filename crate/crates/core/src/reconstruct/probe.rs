//! Single-probe measurement (synthetic data from a ground truth) and
//! coefficient estimation in a given system.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use super::{Coefficients, ProbeKind, ProbeSetup};
use crate::error::{Error, Result};
use crate::forward::{solve, time_h1_inner_stacked, Forcing, SolveOptions};
use crate::grid::{dot, CoefficientField};
use crate::volterra::{ModulationSignal, SourceModel};

/// Additive Gaussian noise on every trace sample of the measured system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

/// Trace difference of one probe between the measured and reference systems.
#[derive(Debug, Clone)]
pub struct ProbeMeasurement {
    pub index: i64,
    pub lambda: ModulationSignal,
    pub data: Vec<Vec<Complex64>>,
    /// Real and imaginary parts of the initial state `(u₀, u₁)`.
    pub init_re: (Vec<f64>, Vec<f64>),
    pub init_im: Option<(Vec<f64>, Vec<f64>)>,
}

impl ProbeMeasurement {
    /// `‖data‖` in `H¹(0,τ)` summed over real and imaginary parts.
    pub fn trace_norm(&self) -> f64 {
        let time = self.lambda.time();
        let re: Vec<f64> = self.data.iter().flat_map(|c| c.iter().map(|z| z.re)).collect();
        let im: Vec<f64> = self.data.iter().flat_map(|c| c.iter().map(|z| z.im)).collect();
        (time_h1_inner_stacked(time, &re, &re) + time_h1_inner_stacked(time, &im, &im)).sqrt()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    pub k: i64,
    pub coefficient: Complex64,
    /// Relative least-squares misfit of the deconvolved trace.
    pub residual: f64,
    /// `H¹(0,τ)` norm of the measured trace difference.
    pub trace_norm: f64,
    /// `‖f̂‖₂` of the recovered source.
    pub source_norm: f64,
    pub condition: f64,
    pub warnings: Vec<String>,
}

/// Exponent `s̃` with `e^{s̃ dt}` equal to the trapezoid (Crank–Nicolson)
/// amplification of the continuous exponent `s`.
pub fn discrete_exponent(s: Complex64, dt: f64) -> Complex64 {
    let half = s * (0.5 * dt);
    ((Complex64::new(1.0, 0.0) + half) / (Complex64::new(1.0, 0.0) - half)).ln() / dt
}

struct ProbeInput {
    u0: Vec<Complex64>,
    u1: Vec<Complex64>,
    lambda: ModulationSignal,
}

fn real(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

fn probe_input(setup: &ProbeSetup, k: i64) -> Result<ProbeInput> {
    let time = setup.config.time;
    let dt = time.dt();
    let n = setup.q0.grid().n();
    let zero = vec![Complex64::default(); n];
    if setup.kind.uses_riesz() {
        let mode = setup.riesz()?.mode(k)?;
        let s = Complex64::i() * mode.mu;
        return Ok(ProbeInput {
            u0: mode.state.displacement.clone(),
            u1: mode.state.velocity.clone(),
            lambda: ModulationSignal::exponential(time, discrete_exponent(s, dt))?,
        });
    }
    if k < 1 || k as usize > setup.basis.len() {
        return Err(Error::MissingProbes(vec![k]));
    }
    let idx = k as usize;
    let phi = real(setup.basis.mode(idx)?.values());
    let lk = setup.basis.eigenvalue(idx)?;
    let omega = lk.max(0.0).sqrt();
    let cos = || -> Result<ModulationSignal> {
        ModulationSignal::cosine(time, discrete_exponent(Complex64::new(0.0, omega), dt).im)
    };
    Ok(match setup.kind {
        ProbeKind::Potential => ProbeInput { u0: phi, u1: zero, lambda: cos()? },
        ProbeKind::DampingZero => ProbeInput { u0: zero, u1: phi, lambda: cos()? },
        ProbeKind::Joint => {
            let u1 = phi.iter().map(|z| z * Complex64::new(0.0, omega)).collect();
            let s = discrete_exponent(Complex64::new(0.0, omega), dt);
            ProbeInput { u0: phi, u1, lambda: ModulationSignal::exponential(time, s)? }
        }
        ProbeKind::Heat => {
            let s = discrete_exponent(Complex64::new(-lk, 0.0), dt);
            ProbeInput { u0: phi, u1: zero, lambda: ModulationSignal::exponential(time, Complex64::new(s.re, 0.0))? }
        }
        ProbeKind::DampingNonzero | ProbeKind::BeamDamping => unreachable!("handled above"),
    })
}

fn split(v: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|z| z.re).collect(), v.iter().map(|z| z.im).collect())
}

fn seed_for(seed: u64, k: i64, part: u64) -> u64 {
    let mut x = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [k as u64, part] {
        x = (x ^ v).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x ^= x >> 31;
    }
    x
}

fn traces(
    setup: &ProbeSetup,
    sys: &Coefficients,
    init: &(Vec<f64>, Vec<f64>),
    noise: Option<(NoiseModel, i64, u64)>,
) -> Result<Vec<Vec<f64>>> {
    let sol = solve(&sys.q, &sys.a, &init.0, &init.1, &setup.config, &Forcing::None, SolveOptions::default())?;
    let mut ch = sol.trace.channels().to_vec();
    if let Some((nm, k, part)) = noise {
        if nm.sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed_for(nm.seed, k, part));
            let dist = Normal::new(0.0, nm.sigma).map_err(|e| Error::invalid(e.to_string()))?;
            for c in ch.iter_mut() {
                c.iter_mut().for_each(|v| *v += dist.sample(&mut rng));
            }
        }
    }
    Ok(ch)
}

/// Runs probe `k` in the measured system `truth` and the reference system,
/// returning the (optionally noisy) trace difference.
pub fn measure_probe(setup: &ProbeSetup, truth: &Coefficients, k: i64, noise: Option<NoiseModel>) -> Result<ProbeMeasurement> {
    let input = probe_input(setup, k)?;
    let measured = setup.kind.system(&setup.base(), truth);
    let reference = setup.base();
    let init_re = (split(&input.u0).0, split(&input.u1).0);
    let im = (split(&input.u0).1, split(&input.u1).1);
    let has_im = im.0.iter().chain(&im.1).any(|v| *v != 0.0);
    let diff = |init: &(Vec<f64>, Vec<f64>), part: u64| -> Result<Vec<Vec<f64>>> {
        let t = traces(setup, &measured, init, noise.map(|n| (n, k, part)))?;
        let r = traces(setup, &reference, init, None)?;
        Ok(t.into_iter().zip(r).map(|(a, b)| a.iter().zip(&b).map(|(x, y)| x - y).collect()).collect())
    };
    let re_data = diff(&init_re, 0)?;
    let im_data = if has_im { Some(diff(&im, 1)?) } else { None };
    let data = re_data
        .iter()
        .enumerate()
        .map(|(c, r)| {
            r.iter()
                .enumerate()
                .map(|(i, &x)| Complex64::new(x, im_data.as_ref().map_or(0.0, |d| d[c][i])))
                .collect()
        })
        .collect();
    Ok(ProbeMeasurement { index: k, lambda: input.lambda, data, init_re, init_im: has_im.then_some(im) })
}

pub fn measure_probes(
    setup: &ProbeSetup,
    truth: &Coefficients,
    indices: &[i64],
    noise: Option<NoiseModel>,
) -> Result<Vec<ProbeMeasurement>> {
    indices.par_iter().map(|&k| measure_probe(setup, truth, k, noise)).collect()
}

/// Source dictionary: the first `M` basis modes, or the products
/// `φ_i φ_k` (`i ≤ M`) for heat probe `k`.
pub(crate) fn dictionary(setup: &ProbeSetup, k: i64) -> Result<Vec<CoefficientField>> {
    let m = setup.dictionary;
    if setup.kind == ProbeKind::Heat {
        let phik = setup.basis.mode(k.unsigned_abs() as usize)?;
        return (1..=m).map(|i| setup.basis.mode(i)?.mul(phik)).collect();
    }
    if m > setup.basis.len() {
        return Err(Error::TooManyModes { requested: m, available: setup.basis.len() });
    }
    Ok(setup.basis.modes()[..m].to_vec())
}

pub(crate) fn source_model(setup: &ProbeSetup, sys: &Coefficients, k: i64) -> Result<SourceModel> {
    let sys = setup.kind.system(&setup.base(), sys);
    SourceModel::new(&sys.q, &sys.a, dictionary(setup, k)?, &setup.config)
}

/// Deconvolves the measurement and fits the dictionary; the coefficient is
/// `−∫f̂` (`−conj ∫f̂` for the nonselfadjoint kinds).
pub fn estimate_probe(setup: &ProbeSetup, meas: &ProbeMeasurement, model: &SourceModel) -> Result<ProbeResult> {
    let rec = model.recover(&meas.lambda, &meas.data, setup.smoothing)?;
    let integral: Complex64 = rec.coefficients.iter().zip(model.shapes()).map(|(c, f)| c * f.integral()).sum();
    let coefficient = if setup.kind.uses_riesz() { -integral.conj() } else { -integral };
    let (re, im) = model.synthesize(&rec.coefficients)?;
    let h = re.grid().h();
    let source_norm = (h * (dot(re.values(), re.values()) + dot(im.values(), im.values()))).sqrt();
    Ok(ProbeResult {
        k: meas.index,
        coefficient,
        residual: rec.residual,
        trace_norm: meas.trace_norm(),
        source_norm,
        condition: rec.condition,
        warnings: rec.warnings,
    })
}

/// Estimates every measurement in the system `sys`, sharing the source
/// dictionary where it does not depend on the probe.
pub(crate) fn estimate_all(setup: &ProbeSetup, meas: &[ProbeMeasurement], sys: &Coefficients) -> Result<Vec<ProbeResult>> {
    if setup.kind == ProbeKind::Heat {
        return meas.par_iter().map(|m| estimate_probe(setup, m, &source_model(setup, sys, m.index)?)).collect();
    }
    let model = source_model(setup, sys, 1)?;
    meas.par_iter().map(|m| estimate_probe(setup, m, &model)).collect()
}
