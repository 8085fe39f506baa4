//! Reduced-resolution invariant suite run by `obslab selftest`.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::forward::{heat_shift_identity_check, operator_norm, solve, Forcing, IBOperatorMatrix, ObservationConfig, RangeMetric, SolveOptions};
use crate::grid::{CoefficientField, Grid1D, TimeGrid};
use crate::observability::estimate_kappa;
use crate::operators::Equation;
use crate::reconstruct::{probe_coefficient, Coefficients, ProbeKind, ProbeSetup};
use crate::spectral::{beam_eigenpairs, dirichlet_eigenpairs, perturbed_spectrum, weyl_check};
use crate::volterra::{apply_s_complex, deconvolve_complex, ModulationSignal, Smoothing};

/// Environment variable that, when set to `weights`, perturbs the
/// quadrature weights used by the suite so that it must fail.
pub const CORRUPT_ENV: &str = "OBSLAB_SELFTEST_CORRUPT";

#[derive(Debug, Clone, Copy, Default)]
pub struct SelftestOptions {
    pub corrupt_weights: bool,
}

impl SelftestOptions {
    pub fn from_env() -> Self {
        Self { corrupt_weights: std::env::var(CORRUPT_ENV).is_ok_and(|v| v == "weights") }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub configs_checked: usize,
}

type Check = fn(&SelftestOptions) -> Result<(bool, String)>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn spectrum(_: &SelftestOptions) -> Result<(bool, String)> {
    let g = Grid1D::new(PI, 400)?;
    let b = dirichlet_eigenpairs(&CoefficientField::zeros(g), 5)?;
    let worst = (1..=5).map(|k| rel(b.eigenvalues()[k - 1], (k * k) as f64)).fold(0.0, f64::max);
    let weyl = weyl_check(&b)?;
    Ok((worst < 1e-3 && weyl.ok, format!("max relative error {worst:.2e}, Weyl constant {:.3}", weyl.c)))
}

/// `cos β cosh β = 1` by bisection on `[4.5, 5]`.
pub fn first_beam_root() -> f64 {
    let f = |b: f64| b.cos() * b.cosh() - 1.0;
    let (mut lo, mut hi) = (4.5, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn beam(_: &SelftestOptions) -> Result<(bool, String)> {
    let b = beam_eigenpairs(3, Grid1D::new(1.0, 300)?)?;
    let exact = first_beam_root().powi(4);
    let e = rel(b.eigenvalues()[0], exact);
    Ok((e < 1e-3, format!("rho_1 = {:.6}, root oracle {exact:.6}", b.eigenvalues()[0])))
}

fn quadrature(opts: &SelftestOptions) -> Result<(bool, String)> {
    let t = TimeGrid::new(1.0, 1000)?;
    let mut w = t.trapezoid_weights();
    if opts.corrupt_weights {
        w[0] *= 1.5;
        w[500] *= 0.5;
    }
    let sum: f64 = w.iter().sum();
    let second: f64 = w.iter().zip(t.times()).map(|(w, t)| w * t * t).sum();
    let ok = (sum - 1.0).abs() < 1e-12 && (second - 1.0 / 3.0).abs() < 1e-6;
    Ok((ok, format!("sum {sum:.3e}, second moment {second:.9}")))
}

fn volterra(_: &SelftestOptions) -> Result<(bool, String)> {
    let t = TimeGrid::new(1.0, 1000)?;
    let lambda = ModulationSignal::cosine(t, 3.0)?;
    let h: Vec<num_complex::Complex64> = t.times().iter().map(|s| (5.0 * s).sin().into()).collect();
    let psi = apply_s_complex(&lambda, std::slice::from_ref(&h));
    let back = deconvolve_complex(&lambda, &psi, Smoothing::Off)?;
    let num: f64 = back.channels[0].iter().zip(&h).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    let e = (num / den).sqrt();
    Ok((e < 1e-4, format!("relative round-trip error {e:.2e}")))
}

fn riesz(_: &SelftestOptions) -> Result<(bool, String)> {
    let g = Grid1D::new(PI, 100)?;
    let r = perturbed_spectrum(&CoefficientField::constant(g, 0.2), Equation::Wave, 4, None)?;
    let ok = r.biorthogonality_residual() < 1e-8 && r.alpha_frame() > 0.0 && r.alpha_frame() <= 1.0 + 1e-12;
    Ok((ok, format!("biorthogonality residual {:.2e}, frame [{:.4}, {:.4}]", r.biorthogonality_residual(), r.alpha_frame(), r.beta_frame())))
}

fn observability(_: &SelftestOptions) -> Result<(bool, String)> {
    let g = Grid1D::new(PI, 100)?;
    let z = CoefficientField::zeros(g);
    let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(2.0 * PI, 1e-2)?);
    let est = estimate_kappa(&z, &z, &cfg, 3)?;
    Ok(((est.kappa - 2f64.sqrt()).abs() < 5e-2, format!("kappa = {:.4}", est.kappa)))
}

fn probe(_: &SelftestOptions) -> Result<(bool, String)> {
    let g = Grid1D::new(PI, 150)?;
    let z = CoefficientField::zeros(g);
    let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(2.0 * PI, 5e-3)?);
    let setup = ProbeSetup::new(ProbeKind::Potential, z.clone(), z.clone(), cfg, 2, 12)?;
    let truth = Coefficients::new(setup.basis.mode(2)?.scaled(0.1), z)?;
    let c = probe_coefficient(&setup, 2, &truth, None)?.coefficient.re;
    Ok(((c - 0.1).abs() < 1e-2, format!("coefficient {c:.5} for 0.1")))
}

fn shift_identity(_: &SelftestOptions) -> Result<(bool, String)> {
    let g = Grid1D::new(PI, 200)?;
    let q = CoefficientField::zeros(g);
    let u0 = CoefficientField::from_fn(g, |x| x.sin()).into_values();
    let r = heat_shift_identity_check(&q, &u0, |x, t| (2.0 * x).sin() * (-t).exp(), TimeGrid::new(0.5, 250)?)?;
    Ok((r.residual <= 1e-2, format!("residual {:.2e}", r.residual)))
}

fn operator_norm_oracle(_: &SelftestOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = DMatrix::from_fn(8, 6, |_, _| rng.random_range(-1.0..1.0));
    let b = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
    let g = &b * b.transpose() + DMatrix::identity(6, 6);
    let op = IBOperatorMatrix::from_parts(a.clone(), g.clone(), RangeMetric::TimeL2)?;
    let norm = operator_norm(&op)?;
    let l = g.clone().cholesky().ok_or_else(|| Error::NotSpd("oracle".into()))?.l();
    let li = l.try_inverse().ok_or(Error::NotInvertible)?;
    let w = li.clone() * a.transpose() * &a * li.transpose();
    let exact = SymmetricEigen::new((&w + w.transpose()) * 0.5).eigenvalues.max().sqrt();
    let e = rel(norm, exact);
    Ok((e < 1e-8, format!("power iteration {norm:.10}, dense {exact:.10}")))
}

fn determinism(_: &SelftestOptions) -> Result<(bool, String)> {
    let g = Grid1D::new(PI, 80)?;
    let z = CoefficientField::zeros(g);
    let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(PI, 1e-2)?);
    let u0 = CoefficientField::from_fn(g, |x| x * (PI - x)).into_values();
    let run = || -> Result<Vec<u8>> {
        let s = solve(&z, &z, &u0, &vec![0.0; 80], &cfg, &Forcing::None, SolveOptions::default())?;
        let mut buf = Vec::new();
        s.trace.write_csv(&mut buf)?;
        Ok(buf)
    };
    Ok((run()? == run()?, "two forward solves compared byte for byte".into()))
}

const CHECKS: [(&str, Check); 10] = [
    ("dirichlet_spectrum", spectrum),
    ("beam_root", beam),
    ("time_quadrature", quadrature),
    ("volterra_round_trip", volterra),
    ("riesz_biorthogonality", riesz),
    ("wave_observability", observability),
    ("potential_probe", probe),
    ("heat_shift_identity", shift_identity),
    ("operator_norm", operator_norm_oracle),
    ("determinism", determinism),
];

/// Validates every `*.toml` under `dir` (or the single file `dir`).
fn check_configs(path: &Path) -> Result<Vec<CheckOutcome>> {
    let files: Vec<std::path::PathBuf> = if path.is_dir() {
        let mut v: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        v.sort();
        v
    } else if path.is_file() {
        vec![path.to_path_buf()]
    } else {
        return Err(Error::Config(format!("{} does not exist", path.display())));
    };
    if files.is_empty() {
        return Err(Error::Config(format!("no *.toml experiment files in {}", path.display())));
    }
    Ok(files
        .iter()
        .map(|f| {
            let start = Instant::now();
            let r = ExperimentConfig::load(f);
            CheckOutcome {
                name: format!("config:{}", f.file_name().unwrap_or_default().to_string_lossy()),
                passed: r.is_ok(),
                detail: r.err().map_or("valid".into(), |e| e.to_string()),
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect())
}

pub fn run_selftest(configs: Option<&Path>, opts: SelftestOptions) -> Result<SelftestReport> {
    let config_checks = match configs {
        Some(p) => check_configs(p)?,
        None => vec![],
    };
    let mut checks: Vec<CheckOutcome> = CHECKS
        .iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let (passed, detail) = match f(&opts) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckOutcome { name: (*name).into(), passed, detail, seconds: start.elapsed().as_secs_f64() }
        })
        .collect();
    let configs_checked = config_checks.len();
    checks.extend(config_checks);
    Ok(SelftestReport { passed: checks.iter().all(|c| c.passed), checks, configs_checked })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beam_root_value() {
        assert!((first_beam_root() - 4.730040744862704).abs() < 1e-12);
    }

    #[test]
    fn corrupted_weights_fail() {
        assert!(quadrature(&SelftestOptions::default()).unwrap().0);
        assert!(!quadrature(&SelftestOptions { corrupt_weights: true }).unwrap().0);
    }

    #[test]
    fn empty_config_dir_is_a_usage_error() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(run_selftest(Some(d.path()), SelftestOptions::default()), Err(Error::Config(_))));
    }
}
