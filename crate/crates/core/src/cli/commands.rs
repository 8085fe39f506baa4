use num_complex::Complex64;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::OutputDir;
use crate::error::{Error, Result};
use crate::forward::{solve, Forcing, SolveOptions};
use crate::grid::{inner_l2, CoefficientField};
use crate::observability::{heat_final_time_kappa, observation_map, observation_modes, ObservabilityEstimate, perturbation_margin_check, MarginReport, PerturbationTarget};
use crate::operators::Equation;
use crate::reconstruct::{reconstruct_field, stability_curve, Coefficients, NoiseModel, PlanChoice, ProbeKind, ProbeSetup};
use crate::spectral::{beam_eigenpairs, dirichlet_eigenpairs, gap_statistics, perturbed_spectrum, weyl_check, SpectralBasis};
use crate::spectral::{GapStatistics, RieszSummary, StateVector, WeylCheck};

/// Shared state of one command invocation.
pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub out: &'a mut OutputDir,
    pub seed: u64,
    pub quiet: bool,
}

impl Context<'_> {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn noise(&self) -> Option<NoiseModel> {
        (self.config.noise.sigma > 0.0).then_some(NoiseModel { sigma: self.config.noise.sigma, seed: self.seed })
    }
}

fn reference_basis(cfg: &ExperimentConfig, q0: &CoefficientField, count: usize) -> Result<SpectralBasis> {
    match cfg.equation {
        Equation::Beam => beam_eigenpairs(count, *q0.grid()),
        _ => dirichlet_eigenpairs(q0, count),
    }
}

/// Truth coefficients, computing reference modes only when the
/// perturbation is given by mode coefficients.
fn truth(cfg: &ExperimentConfig) -> Result<Coefficients> {
    let base = cfg.base()?;
    let p = &cfg.perturbation;
    let count = p.q_modes.as_ref().map_or(0, Vec::len).max(p.a_modes.as_ref().map_or(0, Vec::len));
    if count == 0 {
        return cfg.truth(None);
    }
    cfg.truth(Some(&reference_basis(cfg, &base.q, count)?))
}

#[derive(Serialize)]
struct EigSummary {
    equation: Equation,
    count: usize,
    weyl: Option<WeylCheck>,
    gaps: Option<GapStatistics>,
    perturbed: Option<RieszSummary>,
}

pub fn eig(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config;
    let base = cfg.base()?;
    let basis = reference_basis(cfg, &base.q, cfg.eig.count)?;
    ctx.out.csv("eigenvalues.csv", |w| basis.write_csv(w))?;
    let weyl = if basis.len() >= 3 { Some(weyl_check(&basis)?) } else { None };
    let gaps = if basis.len() >= 2 { Some(gap_statistics(&basis.frequencies())?) } else { None };
    let perturbed = if cfg.eig.perturbed {
        if cfg.equation == Equation::Heat {
            return Err(Error::Config("eig.perturbed applies to wave and beam only".into()));
        }
        let r = perturbed_spectrum(&base.a, cfg.equation, cfg.eig.count, None)?;
        ctx.out.csv("perturbed.csv", |w| r.write_csv(w))?;
        Some(r.summary())
    } else {
        None
    };
    ctx.say(format!("{} eigenvalues; lambda_1 = {}", basis.len(), basis.eigenvalues()[0]));
    ctx.out.json("eig.json", &EigSummary { equation: cfg.equation, count: basis.len(), weyl, gaps, perturbed })
}

#[derive(Serialize)]
struct ForwardSummary {
    equation: Equation,
    trace_l2: f64,
    trace_h1: f64,
    final_energy: Option<f64>,
}

pub fn forward(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config;
    let grid = cfg.grid()?;
    let sys = truth(cfg)?;
    let field = |f: &Option<super::config::FieldInput>| {
        f.as_ref().map_or(Ok(CoefficientField::zeros(grid)), |s| s.field(grid))
    };
    let u0 = field(&cfg.forward.u0)?;
    let u1 = field(&cfg.forward.u1)?;
    let mut opts = SolveOptions::trajectory(cfg.forward.record_stride);
    if cfg.forward.energy {
        opts = opts.with_energy();
    }
    let config = cfg.observation()?;
    if let Some(w) = config.threshold_warning(&grid) {
        ctx.out.warnings.push(w);
    }
    let sol = solve(&sys.q, &sys.a, u0.values(), u1.values(), &config, &Forcing::None, opts)?;
    ctx.out.csv("trace.csv", |w| sol.trace.write_csv(w))?;
    if let Some(t) = &sol.trajectory {
        ctx.out.csv("trajectory.csv", |w| t.write_csv(w, &grid))?;
    }
    if let Some(e) = &sol.energy {
        let times = config.time.times();
        ctx.out.csv("energy.csv", |w| {
            use std::io::Write;
            writeln!(w, "t,energy")?;
            for (t, v) in times.iter().zip(e) {
                writeln!(w, "{t},{v}")?;
            }
            Ok(())
        })?;
    }
    let summary = ForwardSummary {
        equation: cfg.equation,
        trace_l2: sol.trace.l2_norm(),
        trace_h1: sol.trace.h1_norm(),
        final_energy: sol.energy.as_ref().and_then(|e| e.last().copied()),
    };
    ctx.say(format!("trace L2 norm {:.6e}", summary.trace_l2));
    ctx.out.json("forward.json", &summary)
}

#[derive(Serialize)]
struct ObservabilitySummary {
    estimate: ObservabilityEstimate,
    final_time_kappa: Option<f64>,
    margin: Option<MarginReport>,
}

pub fn observability(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config;
    let sys = truth(cfg)?;
    let config = cfg.observation()?;
    let count = cfg.observability.count;
    let basis = observation_modes(cfg.equation, &sys.q, count)?;
    let map = observation_map(&sys.q, &sys.a, &basis, count, &config)?;
    let estimate = ObservabilityEstimate::from_map(&map, &cfg.grid()?, &config)?;
    let profile = map.kappa_profile()?;
    ctx.out.csv("kappa.csv", |w| {
        use std::io::Write;
        writeln!(w, "modes,kappa")?;
        for (j, k) in profile.iter().enumerate() {
            writeln!(w, "{},{k}", j + 1)?;
        }
        Ok(())
    })?;
    ctx.out.warnings.extend(estimate.notes.iter().cloned());
    let final_time_kappa =
        if cfg.equation == Equation::Heat { Some(heat_final_time_kappa(&sys.q, &config, count)?) } else { None };
    let margin = if cfg.observability.margin_sizes.is_empty() {
        None
    } else {
        let grid = cfg.grid()?;
        let direction = cfg.observability.margin_direction.as_ref().map_or(Ok(CoefficientField::constant(grid, 1.0)), |d| d.field(grid))?;
        let target = cfg.observability.margin_target.unwrap_or(PerturbationTarget::Damping);
        let r = perturbation_margin_check(&sys.q, &sys.a, target, &direction, &cfg.observability.margin_sizes, &config, count)?;
        ctx.out.csv("margin.csv", |w| {
            use std::io::Write;
            writeln!(w, "size,kappa,ratio,holds")?;
            for row in &r.rows {
                writeln!(w, "{},{},{},{}", row.size, row.kappa, row.ratio, row.holds)?;
            }
            Ok(())
        })?;
        Some(r)
    };
    ctx.say(format!("kappa = {:.6e} on {} modes", estimate.kappa, count));
    ctx.out.json("observability.json", &ObservabilitySummary { estimate, final_time_kappa, margin })
}

/// Exact coefficient of the truth for probe `k`, in the convention of the
/// estimator.
fn expected_coefficient(setup: &ProbeSetup, truth: &Coefficients, k: i64) -> Result<Complex64> {
    let dq = truth.q.sub(&setup.q0)?;
    let da = truth.a.sub(&setup.a0)?;
    if setup.kind.uses_riesz() {
        let r = setup.riesz()?;
        let zero = vec![0.0; da.grid().n()];
        return Ok(r.inner(&StateVector::from_real(&zero, da.values()), &r.mode(k)?.state));
    }
    let idx = k.unsigned_abs() as usize;
    let phi = setup.basis.mode(idx)?;
    Ok(match setup.kind {
        ProbeKind::DampingZero => Complex64::new(inner_l2(&da, phi)?, 0.0),
        ProbeKind::Joint => {
            Complex64::new(inner_l2(&dq, phi)?, setup.basis.eigenvalue(idx)?.sqrt() * inner_l2(&da, phi)?)
        }
        _ => Complex64::new(inner_l2(&dq, phi)?, 0.0),
    })
}

pub fn probe(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config;
    let setup = cfg.probe_setup()?;
    let truth = truth(cfg)?;
    let noise = ctx.noise();
    let report = reconstruct_field(&setup, &truth, PlanChoice::Modes(setup.probes), noise)?;
    ctx.out.warnings.extend(report.warnings.iter().cloned());
    let rows = report
        .probes
        .into_iter()
        .map(|r| {
            let e = expected_coefficient(&setup, &truth, r.k)?;
            Ok((r, e))
        })
        .collect::<Result<Vec<_>>>()?;
    ctx.out.csv("probes.csv", |w| {
        use std::io::Write;
        writeln!(w, "k,re,im,expected_re,expected_im,trace_norm,source_norm,residual,condition")?;
        for (r, e) in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.k, r.coefficient.re, r.coefficient.im, e.re, e.im, r.trace_norm, r.source_norm, r.residual, r.condition
            )?;
        }
        Ok(())
    })?;
    for (r, e) in &rows {
        ctx.say(format!("k = {:>3}: {:.6e} {:+.6e}i (exact {:.6e} {:+.6e}i)", r.k, r.coefficient.re, r.coefficient.im, e.re, e.im));
    }
    let results: Vec<_> = rows.into_iter().map(|r| r.0).collect();
    ctx.out.json("probes.json", &results)
}

pub fn reconstruct(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config;
    let setup = cfg.probe_setup()?;
    let truth = truth(cfg)?;
    let report = reconstruct_field(&setup, &truth, cfg.plan()?, ctx.noise())?;
    ctx.out.warnings.extend(report.warnings.iter().cloned());
    ctx.out.csv("field.csv", |w| report.write_csv(w))?;
    ctx.out.csv("probes.csv", |w| report.write_probes_csv(w))?;
    for e in &report.errors {
        ctx.say(format!(
            "{}: L2 error {:.3e}, relative {}",
            e.name,
            e.l2,
            e.relative.map_or("n/a".into(), |r| format!("{r:.3e}"))
        ));
    }
    ctx.say(format!("N = {}, ||dLambda|| = {:.3e}, sweeps = {}", report.plan.n, report.delta_lambda_norm, report.iterations));
    ctx.out.json("report.json", &report)
}

pub fn stability(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config;
    let setup = cfg.probe_setup()?;
    let base = setup.base();
    let t = truth(cfg)?;
    let direction = Coefficients::new(t.q.sub(&base.q)?, t.a.sub(&base.a)?)?;
    let (section, mode) = cfg.sweep()?;
    let table = stability_curve(&setup, &direction, &section.epsilons, mode, cfg.plan()?, ctx.seed)?;
    ctx.out.warnings.extend(table.warnings.iter().cloned());
    ctx.out.csv("stability.csv", |w| table.write_csv(w))?;
    if let Some(f) = &table.fit {
        ctx.say(format!("fitted p = {:.3} [{:.3}, {:.3}]", f.p, f.p_low, f.p_high));
    }
    if let Some(e) = &table.envelope {
        ctx.say(format!("envelope with exponent {} holds: {}", e.exponent, e.holds));
    }
    ctx.out.json("stability.json", &table)
}
