//! Recovery of potentials and damping coefficients from probe traces.
//!
//! Each probe launches a (generalized) eigenmode of the reference system,
//! records the boundary trace difference against the measured system and
//! converts it, through the Volterra inversion and a source fit, into one
//! spectral coefficient of the unknown perturbation.

mod probe;
mod stability;

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

pub use probe::{discrete_exponent, estimate_probe, measure_probe, measure_probes, NoiseModel, ProbeMeasurement, ProbeResult};
pub use stability::{fit_log_rate, stability_curve, EnvelopeCheck, LogRateFit, StabilityRow, StabilityTable, SweepMode};

use crate::error::{Error, Result};
use crate::forward::{operator_norm, sobolev_gram, IBOperatorMatrix, ObservationConfig, RangeMetric};
use crate::grid::{norm, weak_norm_star, CoefficientField, NormKind};
use crate::operators::Equation;
use crate::spectral::{beam_eigenpairs, dirichlet_eigenpairs, perturbed_spectrum, RieszBasisData, SpectralBasis};
use crate::volterra::Smoothing;

/// Which coefficient(s) a probe family determines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Wave potential `q` with zero damping.
    Potential,
    /// Wave damping `a` about `a₀ = 0`.
    DampingZero,
    /// Wave potential and damping together.
    Joint,
    /// Wave damping about a nonzero `a₀`, through the perturbed modes.
    DampingNonzero,
    /// Clamped beam damping about `a₀`.
    BeamDamping,
    /// Heat potential.
    Heat,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 6] = [
        ProbeKind::Potential,
        ProbeKind::DampingZero,
        ProbeKind::Joint,
        ProbeKind::DampingNonzero,
        ProbeKind::BeamDamping,
        ProbeKind::Heat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::Potential => "potential",
            ProbeKind::DampingZero => "damping_zero",
            ProbeKind::Joint => "joint",
            ProbeKind::DampingNonzero => "damping_nonzero",
            ProbeKind::BeamDamping => "beam_damping",
            ProbeKind::Heat => "heat",
        }
    }

    pub fn equation(self) -> Equation {
        match self {
            ProbeKind::BeamDamping => Equation::Beam,
            ProbeKind::Heat => Equation::Heat,
            _ => Equation::Wave,
        }
    }

    /// Exponent `p` of the logarithmic stability estimate.
    pub fn exponent(self) -> f64 {
        match self {
            ProbeKind::BeamDamping => 0.25,
            ProbeKind::Heat => 1.0,
            _ => 0.5,
        }
    }

    /// Whether probes are built on the perturbed (nonselfadjoint) modes.
    pub fn uses_riesz(self) -> bool {
        matches!(self, ProbeKind::DampingNonzero | ProbeKind::BeamDamping)
    }

    fn recovers_q(self) -> bool {
        matches!(self, ProbeKind::Potential | ProbeKind::Joint | ProbeKind::Heat)
    }

    fn recovers_a(self) -> bool {
        !matches!(self, ProbeKind::Potential | ProbeKind::Heat)
    }

    /// The system seen by the measurement: the recovered coefficients come
    /// from `truth`, the others stay at `base`.
    pub(crate) fn system(self, base: &Coefficients, truth: &Coefficients) -> Coefficients {
        Coefficients {
            q: if self.recovers_q() { truth.q.clone() } else { base.q.clone() },
            a: if self.recovers_a() { truth.a.clone() } else { base.a.clone() },
        }
    }

    /// Domain Sobolev weights `(L², energy, second)` on `u₀` and `u₁`.
    fn domain_weights(self) -> ([f64; 3], [f64; 3]) {
        match self {
            ProbeKind::Potential | ProbeKind::DampingZero | ProbeKind::Joint => ([1.0, 1.0, 1.0], [0.0, 1.0, 0.0]),
            ProbeKind::Heat => ([0.0, 1.0, 0.0], [0.0; 3]),
            ProbeKind::DampingNonzero | ProbeKind::BeamDamping => ([0.0, 1.0, 0.0], [1.0, 0.0, 0.0]),
        }
    }
}

impl std::fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ProbeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProbeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown probe kind `{s}`")))
    }
}

/// A potential/damping pair on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficients {
    pub q: CoefficientField,
    pub a: CoefficientField,
}

impl Coefficients {
    pub fn new(q: CoefficientField, a: CoefficientField) -> Result<Self> {
        q.grid().check_same(a.grid())?;
        Ok(Self { q, a })
    }
}

/// Reference system, probe family and estimation parameters.
#[derive(Debug, Clone)]
pub struct ProbeSetup {
    pub kind: ProbeKind,
    pub config: ObservationConfig,
    pub q0: CoefficientField,
    pub a0: CoefficientField,
    /// Modes of the reference operator (`max(K, M)` of them).
    pub basis: SpectralBasis,
    riesz: Option<RieszBasisData>,
    /// Number of probes `K`.
    pub probes: usize,
    /// Source dictionary size `M`.
    pub dictionary: usize,
    pub smoothing: Smoothing,
    /// Fixed-point sweeps over the system estimate; one sweep is the
    /// linearization about the reference system.
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Bound `m` on the weighted coefficient sum of the damping
    /// perturbation, when one is assumed.
    pub budget_m: Option<f64>,
}

impl ProbeSetup {
    pub fn new(
        kind: ProbeKind,
        q0: CoefficientField,
        a0: CoefficientField,
        config: ObservationConfig,
        probes: usize,
        dictionary: usize,
    ) -> Result<Self> {
        config.validate()?;
        q0.grid().check_same(a0.grid())?;
        if config.equation != kind.equation() {
            return Err(Error::invalid(format!("{kind} probes need the {} equation", kind.equation())));
        }
        if probes == 0 || dictionary == 0 {
            return Err(Error::invalid("probe and dictionary counts must be positive"));
        }
        if !kind.uses_riesz() && a0.max_abs() != 0.0 {
            return Err(Error::invalid(format!("{kind} probes need a zero reference damping")));
        }
        if kind.uses_riesz() && q0.max_abs() != 0.0 {
            return Err(Error::invalid(format!("{kind} probes need a zero reference potential")));
        }
        let count = probes.max(dictionary);
        let basis = match kind.equation() {
            Equation::Beam => beam_eigenpairs(count, *q0.grid())?,
            _ => dirichlet_eigenpairs(&q0, count)?,
        };
        let riesz = if kind.uses_riesz() { Some(perturbed_spectrum(&a0, kind.equation(), probes, None)?) } else { None };
        Ok(Self {
            kind,
            config,
            q0,
            a0,
            basis,
            riesz,
            probes,
            dictionary,
            smoothing: Smoothing::Off,
            max_iterations: 12,
            tolerance: 1e-6,
            budget_m: None,
        })
    }

    pub fn with_smoothing(mut self, smoothing: Smoothing) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn with_iterations(mut self, max_iterations: usize, tolerance: f64) -> Self {
        self.max_iterations = max_iterations.max(1);
        self.tolerance = tolerance;
        self
    }

    pub fn with_budget(mut self, m: f64) -> Self {
        self.budget_m = Some(m);
        self
    }

    pub fn base(&self) -> Coefficients {
        Coefficients { q: self.q0.clone(), a: self.a0.clone() }
    }

    pub fn riesz(&self) -> Result<&RieszBasisData> {
        self.riesz.as_ref().ok_or_else(|| Error::invalid(format!("{} probes do not use perturbed modes", self.kind)))
    }

    /// Probe indices `1..=n`, or `±1..±n` for the nonselfadjoint kinds.
    pub fn indices(&self, n: usize) -> Vec<i64> {
        let n = n as i64;
        if self.kind.uses_riesz() {
            (-n..=n).filter(|k| *k != 0).collect()
        } else {
            (1..=n).collect()
        }
    }

    fn eigenvalue_of(&self, k: i64) -> Result<f64> {
        match &self.riesz {
            Some(r) => Ok(r.mode(k)?.unperturbed.powi(2)),
            None => self.basis.eigenvalue(k.unsigned_abs() as usize),
        }
    }
}

/// Spectra that a truncation level can be read from.
pub trait TruncationSpectrum {
    /// Ascending eigenvalues `λ₁ ≤ λ₂ ≤ …`.
    fn truncation_eigenvalues(&self) -> Vec<f64>;
}

impl TruncationSpectrum for SpectralBasis {
    fn truncation_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues().to_vec()
    }
}

impl TruncationSpectrum for RieszBasisData {
    fn truncation_eigenvalues(&self) -> Vec<f64> {
        self.modes().iter().filter(|m| m.k > 0).map(|m| m.unperturbed * m.unperturbed).collect()
    }
}

impl TruncationSpectrum for [f64] {
    fn truncation_eigenvalues(&self) -> Vec<f64> {
        self.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationPlan {
    pub cutoff: f64,
    /// `N = #{k : λ_k ≤ λ}`.
    pub n: usize,
    /// Radius `δ` of the a-priori ball, when the cutoff was tuned.
    pub ball_radius: Option<f64>,
    /// Cutoffs scanned by the automatic rule.
    pub candidates: Vec<f64>,
}

fn count_below(eigs: &[f64], cutoff: f64) -> usize {
    let tol = 1e-12 * cutoff.abs().max(1.0);
    eigs.iter().take_while(|&&l| l <= cutoff + tol).count()
}

/// Number of modes retained at frequency cutoff `λ`; eigenvalues within
/// `10⁻¹²·max(1, |λ|)` above the cutoff count as retained.
pub fn choose_truncation<S: TruncationSpectrum + ?Sized>(spectrum: &S, cutoff: f64) -> Result<TruncationPlan> {
    let eigs = spectrum.truncation_eigenvalues();
    if eigs.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    if !cutoff.is_finite() {
        return Err(Error::invalid("cutoff must be finite"));
    }
    let n = count_below(&eigs, cutoff);
    if n == 0 {
        return Err(Error::invalid(format!("cutoff {cutoff} lies below the first eigenvalue {}", eigs[0])));
    }
    Ok(TruncationPlan { cutoff, n, ball_radius: None, candidates: vec![] })
}

/// How many coefficients enter the synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum PlanChoice {
    Modes(usize),
    Cutoff(f64),
    /// Balances the amplified data error `N e^{cλ} ‖ΔΛ‖²` against the
    /// truncation error `δ²/λ`; `δ` defaults to the untruncated estimate.
    Auto { radius: Option<f64> },
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveredField {
    /// `q` or `a`.
    pub name: String,
    pub base: CoefficientField,
    pub delta: CoefficientField,
    /// Real synthesis coefficients in the reference basis; absent for the
    /// nonselfadjoint kinds, which synthesize from the dual family.
    pub coefficients: Option<Vec<f64>>,
}

impl RecoveredField {
    pub fn recovered(&self) -> Result<CoefficientField> {
        self.base.add(&self.delta)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldError {
    pub name: String,
    pub l2: f64,
    pub relative: Option<f64>,
    /// Heat weak norm of the error.
    pub weak: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BudgetCheck {
    pub m: f64,
    pub value: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub kind: ProbeKind,
    pub plan: TruncationPlan,
    pub probes: Vec<ProbeResult>,
    pub fields: Vec<RecoveredField>,
    pub errors: Vec<FieldError>,
    /// `‖Λ − Λ₀‖` on the span of the retained probes.
    pub delta_lambda_norm: f64,
    pub exponent: f64,
    /// `|ln ‖ΔΛ‖|^{−p}` when `0 < ‖ΔΛ‖ < 1`.
    pub bound_value: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub budget: Option<BudgetCheck>,
    pub warnings: Vec<String>,
}

impl ReconstructionReport {
    pub fn field(&self, name: &str) -> Option<&RecoveredField> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn error(&self, name: &str) -> Option<&FieldError> {
        self.errors.iter().find(|f| f.name == name)
    }

    /// Root-sum-square of the field errors.
    pub fn total_error(&self) -> f64 {
        self.errors.iter().map(|e| e.l2 * e.l2).sum::<f64>().sqrt()
    }

    pub fn coefficient(&self, k: i64) -> Option<Complex64> {
        self.probes.iter().find(|p| p.k == k).map(|p| p.coefficient)
    }

    /// CSV with columns `x` and, per field, `<name>_base,<name>_recovered`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["x".to_string()];
        let mut cols = Vec::new();
        for f in &self.fields {
            header.push(format!("{}_base", f.name));
            header.push(format!("{}_recovered", f.name));
            cols.push(f.base.values().to_vec());
            cols.push(f.recovered()?.into_values());
        }
        writeln!(w, "{}", header.join(","))?;
        let Some(first) = self.fields.first() else { return Ok(()) };
        let grid = first.base.grid();
        for j in 0..grid.n() {
            let mut row = vec![format!("{}", grid.x(j))];
            row.extend(cols.iter().map(|c| format!("{}", c[j])));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// CSV with columns `k,re,im,trace_norm,source_norm,residual`.
    pub fn write_probes_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,re,im,trace_norm,source_norm,residual")?;
        for p in &self.probes {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                p.k, p.coefficient.re, p.coefficient.im, p.trace_norm, p.source_norm, p.residual
            )?;
        }
        Ok(())
    }
}

/// Perturbation fields synthesized from the probe coefficients `1..=n`.
fn synthesize(setup: &ProbeSetup, results: &[ProbeResult], n: usize) -> Result<Vec<RecoveredField>> {
    let grid = *setup.q0.grid();
    let coefficient = |k: i64| -> Result<Complex64> {
        results.iter().find(|r| r.k == k).map(|r| r.coefficient).ok_or(Error::MissingProbes(vec![k]))
    };
    let field = |name: &str, base: &CoefficientField, delta: CoefficientField, coeffs: Option<Vec<f64>>| RecoveredField {
        name: name.into(),
        base: base.clone(),
        delta,
        coefficients: coeffs,
    };
    let modes = &setup.basis.modes()[..n];
    if setup.kind.uses_riesz() {
        let riesz = setup.riesz()?.truncated(n)?;
        let c: Vec<Complex64> = riesz.modes().iter().map(|m| coefficient(m.k)).collect::<Result<_>>()?;
        let x = riesz.synthesize_dual(&c)?;
        let delta = CoefficientField::new(grid, x.velocity.iter().map(|z| z.re).collect())?;
        return Ok(vec![field("a", &setup.a0, delta, None)]);
    }
    let c: Vec<Complex64> = (1..=n as i64).map(coefficient).collect::<Result<_>>()?;
    let re: Vec<f64> = c.iter().map(|z| z.re).collect();
    let q_delta = CoefficientField::synthesize(grid, &re, modes)?;
    Ok(match setup.kind {
        ProbeKind::Potential | ProbeKind::Heat => vec![field("q", &setup.q0, q_delta, Some(re))],
        ProbeKind::DampingZero => vec![field("a", &setup.a0, q_delta, Some(re))],
        ProbeKind::Joint => {
            let im: Vec<f64> = c
                .iter()
                .zip(setup.basis.eigenvalues())
                .map(|(z, l)| z.im / l.sqrt())
                .collect();
            let a_delta = CoefficientField::synthesize(grid, &im, modes)?;
            vec![field("q", &setup.q0, q_delta, Some(re)), field("a", &setup.a0, a_delta, Some(im))]
        }
        ProbeKind::DampingNonzero | ProbeKind::BeamDamping => unreachable!("handled above"),
    })
}

fn apply(base: &Coefficients, fields: &[RecoveredField]) -> Result<Coefficients> {
    let mut out = base.clone();
    for f in fields {
        match f.name.as_str() {
            "q" => out.q = out.q.add(&f.delta)?,
            _ => out.a = out.a.add(&f.delta)?,
        }
    }
    Ok(out)
}

/// `‖Λ − Λ₀‖` restricted to the probes `k = 1..=n`, from the measured trace
/// differences.
pub fn measured_delta_lambda(setup: &ProbeSetup, measurements: &[ProbeMeasurement], n: usize) -> Result<f64> {
    let grid = *setup.q0.grid();
    let mut columns = Vec::new();
    let mut u0s = Vec::new();
    let mut u1s = Vec::new();
    for k in 1..=n as i64 {
        let m = measurements.iter().find(|m| m.index == k).ok_or(Error::MissingProbes(vec![k]))?;
        let stack = |f: fn(&Complex64) -> f64| -> Vec<f64> { m.data.iter().flat_map(|c| c.iter().map(f)).collect() };
        columns.push(stack(|z| z.re));
        u0s.push(m.init_re.0.clone());
        u1s.push(m.init_re.1.clone());
        if let Some(im) = &m.init_im {
            columns.push(stack(|z| z.im));
            u0s.push(im.0.clone());
            u1s.push(im.1.clone());
        }
    }
    let e = setup.config.equation.principal_part(&grid);
    let (w0, w1) = setup.kind.domain_weights();
    let h = grid.h();
    let gram: DMatrix<f64> =
        sobolev_gram(&u0s, &e, h, w0[0], w0[1], w0[2]) + sobolev_gram(&u1s, &e, h, w1[0], w1[1], w1[2]);
    let op = IBOperatorMatrix::from_columns(
        setup.config.time,
        setup.config.boundaries.clone(),
        &columns,
        gram,
        RangeMetric::TimeH1,
    )?;
    operator_norm(&op)
}

fn field_errors(setup: &ProbeSetup, fields: &[RecoveredField], truth: &Coefficients) -> Result<Vec<FieldError>> {
    fields
        .iter()
        .map(|f| {
            let t = if f.name == "q" { &truth.q } else { &truth.a };
            let err = f.recovered()?.sub(t)?;
            let l2 = norm(&err, NormKind::L2, None)?;
            let size = norm(&t.sub(&f.base)?, NormKind::L2, None)?;
            let weak = if setup.kind == ProbeKind::Heat {
                Some(weak_norm_star(&err, &setup.basis, setup.config.time.tau())?)
            } else {
                None
            };
            Ok(FieldError { name: f.name.clone(), l2, relative: (size > 0.0).then(|| l2 / size), weak })
        })
        .collect()
}

fn budget_check(setup: &ProbeSetup, results: &[ProbeResult]) -> Result<Option<BudgetCheck>> {
    let (Some(m), true) = (setup.budget_m, setup.kind.uses_riesz()) else { return Ok(None) };
    let mut value = 0.0;
    for r in results {
        let w = match setup.kind {
            ProbeKind::BeamDamping => setup.eigenvalue_of(r.k)?,
            _ => (r.k * r.k) as f64,
        };
        value += w * r.coefficient.norm_sqr();
    }
    Ok(Some(BudgetCheck { m, value, holds: value <= m }))
}

fn ln_rate_slope(setup: &ProbeSetup, results: &[ProbeResult]) -> Result<f64> {
    let mut pts = Vec::new();
    for r in results.iter().filter(|r| r.k > 0 && r.trace_norm > 0.0 && r.source_norm > 0.0) {
        pts.push((setup.eigenvalue_of(r.k)?, (r.source_norm / r.trace_norm).ln()));
    }
    if pts.len() < 2 {
        return Ok(0.0);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 })
}

fn auto_plan(
    setup: &ProbeSetup,
    results: &[ProbeResult],
    full: &[RecoveredField],
    delta_lambda: f64,
    radius: Option<f64>,
) -> Result<TruncationPlan> {
    let eigs: Vec<f64> = (1..=setup.probes as i64).map(|k| setup.eigenvalue_of(k)).collect::<Result<_>>()?;
    let delta = match radius {
        Some(r) => r,
        None => full
            .iter()
            .map(|f| norm(&f.delta, NormKind::H1, None).map(|v| v * v))
            .sum::<Result<f64>>()?
            .sqrt(),
    };
    let c = ln_rate_slope(setup, results)?;
    let mut candidates = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    let mut lambda = eigs[0];
    while count_below(&eigs, lambda) <= setup.probes && candidates.len() < 64 {
        let n = count_below(&eigs, lambda) as f64;
        let proxy = n * (c * lambda).exp() * delta_lambda * delta_lambda + delta * delta / lambda;
        candidates.push(lambda);
        if best.is_none_or(|(_, b)| proxy < b) {
            best = Some((lambda, proxy));
        }
        if count_below(&eigs, lambda) == eigs.len() {
            break;
        }
        lambda *= 2.0;
    }
    let cutoff = best.map_or(eigs[0], |b| b.0);
    let mut plan = choose_truncation(eigs.as_slice(), cutoff)?;
    plan.ball_radius = Some(delta);
    plan.candidates = candidates;
    Ok(plan)
}

/// Reconstructs from given measurements; errors are reported when the
/// truth is known.
pub fn reconstruct_from_measurements(
    setup: &ProbeSetup,
    measurements: &[ProbeMeasurement],
    plan: PlanChoice,
    truth: Option<&Coefficients>,
) -> Result<ReconstructionReport> {
    let eigs: Vec<f64> = (1..=setup.probes as i64).map(|k| setup.eigenvalue_of(k)).collect::<Result<_>>()?;
    let fixed = match plan {
        PlanChoice::Modes(n) => {
            if n == 0 || n > setup.probes {
                return Err(Error::TooManyModes { requested: n, available: setup.probes });
            }
            Some(TruncationPlan { cutoff: eigs[n - 1], n, ball_radius: None, candidates: vec![] })
        }
        PlanChoice::Cutoff(l) => {
            let p = choose_truncation(eigs.as_slice(), l)?;
            Some(p)
        }
        PlanChoice::Auto { .. } => None,
    };
    let n_iter = fixed.as_ref().map_or(setup.probes, |p| p.n);
    let needed = setup.indices(n_iter);
    let missing: Vec<i64> = needed.iter().copied().filter(|k| !measurements.iter().any(|m| m.index == *k)).collect();
    if !missing.is_empty() {
        return Err(Error::MissingProbes(missing));
    }
    let used: Vec<ProbeMeasurement> = measurements.iter().filter(|m| needed.contains(&m.index)).cloned().collect();

    let base = setup.base();
    let mut sys = base.clone();
    let mut prev: Option<Vec<Complex64>> = None;
    let mut results = Vec::new();
    let mut fields = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..setup.max_iterations {
        iterations += 1;
        results = probe::estimate_all(setup, &used, &sys)?;
        fields = synthesize(setup, &results, n_iter)?;
        sys = apply(&base, &fields)?;
        let c: Vec<Complex64> = results.iter().map(|r| r.coefficient).collect();
        if let Some(p) = &prev {
            let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let change = c.iter().zip(p).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            if change <= setup.tolerance * scale.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        prev = Some(c);
    }
    let mut warnings: Vec<String> = Vec::new();
    if !converged && setup.max_iterations > 1 {
        warnings.push(format!("fixed-point iteration stopped after {iterations} sweeps"));
    }
    let plan = match (fixed, plan) {
        (Some(p), _) => p,
        (None, PlanChoice::Auto { radius }) => {
            let dl = measured_delta_lambda(setup, &used, setup.probes)?;
            let p = auto_plan(setup, &results, &fields, dl, radius)?;
            fields = synthesize(setup, &results, p.n)?;
            p
        }
        (None, _) => unreachable!("fixed plans resolved above"),
    };
    let keep = setup.indices(plan.n);
    results.retain(|r| keep.contains(&r.k));
    for r in &results {
        warnings.extend(r.warnings.iter().map(|w| format!("probe {}: {w}", r.k)));
    }
    let delta_lambda_norm = measured_delta_lambda(setup, &used, plan.n)?;
    let budget = budget_check(setup, &results)?;
    if let Some(b) = budget.filter(|b| !b.holds) {
        warnings.push(format!("coefficient budget exceeded: {} > {}", b.value, b.m));
    }
    let errors = match truth {
        Some(t) => field_errors(setup, &fields, t)?,
        None => vec![],
    };
    let exponent = setup.kind.exponent();
    let bound_value =
        (delta_lambda_norm > 0.0 && delta_lambda_norm < 1.0).then(|| delta_lambda_norm.ln().abs().powf(-exponent));
    Ok(ReconstructionReport {
        kind: setup.kind,
        plan,
        probes: results,
        fields,
        errors,
        delta_lambda_norm,
        exponent,
        bound_value,
        iterations,
        converged,
        budget,
        warnings,
    })
}

/// Simulates the probes in the system `truth`, then reconstructs.
pub fn reconstruct_field(
    setup: &ProbeSetup,
    truth: &Coefficients,
    plan: PlanChoice,
    noise: Option<NoiseModel>,
) -> Result<ReconstructionReport> {
    truth.q.grid().check_same(setup.q0.grid())?;
    let n = match plan {
        PlanChoice::Modes(n) => n.min(setup.probes),
        PlanChoice::Cutoff(l) => {
            let eigs: Vec<f64> = (1..=setup.probes as i64).map(|k| setup.eigenvalue_of(k)).collect::<Result<_>>()?;
            choose_truncation(eigs.as_slice(), l)?.n
        }
        PlanChoice::Auto { .. } => setup.probes,
    };
    let meas = measure_probes(setup, truth, &setup.indices(n.max(1)), noise)?;
    reconstruct_from_measurements(setup, &meas, plan, Some(truth))
}

/// Self-consistent estimate of the single coefficient `k`.
pub fn probe_coefficient(
    setup: &ProbeSetup,
    k: i64,
    truth: &Coefficients,
    noise: Option<NoiseModel>,
) -> Result<ProbeResult> {
    let meas = measure_probe(setup, truth, k, noise)?;
    let base = setup.base();
    let grid = *setup.q0.grid();
    let mut sys = base.clone();
    let mut prev: Option<Complex64> = None;
    let mut result = None;
    for _ in 0..setup.max_iterations {
        let model = probe::source_model(setup, &sys, k)?;
        let r = estimate_probe(setup, &meas, &model)?;
        let c = r.coefficient;
        sys = base.clone();
        if setup.kind.uses_riesz() {
            let riesz = setup.riesz()?;
            let mut v = vec![0.0; grid.n()];
            for (idx, coef) in [(k, c), (-k, c.conj())] {
                let dual = &riesz.mode(idx)?.dual.velocity;
                v.iter_mut().zip(dual).for_each(|(o, d)| *o += (coef * d).re);
            }
            sys.a = sys.a.add(&CoefficientField::new(grid, v)?)?;
        } else {
            let idx = k.unsigned_abs() as usize;
            let phi = setup.basis.mode(idx)?;
            match setup.kind {
                ProbeKind::Potential | ProbeKind::Heat => sys.q = sys.q.axpy(c.re, phi)?,
                ProbeKind::DampingZero => sys.a = sys.a.axpy(c.re, phi)?,
                _ => {
                    let omega = setup.basis.eigenvalue(idx)?.sqrt();
                    sys.q = sys.q.axpy(c.re, phi)?;
                    sys.a = sys.a.axpy(c.im / omega, phi)?;
                }
            }
        }
        result = Some(r);
        if let Some(p) = prev {
            if (c - p).norm() <= setup.tolerance * c.norm().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        prev = Some(c);
    }
    result.ok_or_else(|| Error::invalid("no iterations performed"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::ObservationConfig;
    use crate::grid::{Grid1D, TimeGrid};
    use std::f64::consts::PI;

    #[test]
    fn truncation_counts() {
        let eigs = [1.0, 4.0, 9.0, 16.0, 25.0];
        assert_eq!(choose_truncation(&eigs[..], 10.0).unwrap().n, 3);
        assert_eq!(choose_truncation(&eigs[..], 1.0).unwrap().n, 1);
        assert_eq!(choose_truncation(&eigs[..], 16.0 - 1e-15).unwrap().n, 4);
        assert!(choose_truncation(&eigs[..], 0.5).is_err());
    }

    #[test]
    fn discrete_exponent_matches_cn_amplification() {
        let dt = 0.1;
        let s = Complex64::new(0.0, 3.0);
        let st = discrete_exponent(s, dt);
        let amp = (Complex64::new(1.0, 0.0) + s * 0.05) / (Complex64::new(1.0, 0.0) - s * 0.05);
        assert!(((st * dt).exp() - amp).norm() < 1e-14);
        assert!((st.im - 20.0 * (0.15f64).atan()).abs() < 1e-12);
    }

    fn wave_setup(kind: ProbeKind, n: usize, k: usize) -> ProbeSetup {
        let g = Grid1D::new(PI, n).unwrap();
        let z = CoefficientField::zeros(g);
        let cfg = ObservationConfig::left(Equation::Wave, TimeGrid::with_step(2.0 * PI, 2e-3).unwrap());
        ProbeSetup::new(kind, z.clone(), z, cfg, k, 20).unwrap()
    }

    #[test]
    fn potential_mode_coefficient() {
        let setup = wave_setup(ProbeKind::Potential, 300, 3);
        let phi2 = setup.basis.mode(2).unwrap().clone();
        let truth = Coefficients::new(phi2.scaled(0.1), setup.a0.clone()).unwrap();
        let r = probe_coefficient(&setup, 2, &truth, None).unwrap();
        assert!((r.coefficient.re - 0.1).abs() < 5e-3, "{:?}", r.coefficient);
    }

    #[test]
    fn setup_rejects_mismatched_equation() {
        let g = Grid1D::new(PI, 40).unwrap();
        let z = CoefficientField::zeros(g);
        let cfg = ObservationConfig::left(Equation::Heat, TimeGrid::new(1.0, 100).unwrap());
        assert!(ProbeSetup::new(ProbeKind::Potential, z.clone(), z, cfg, 2, 4).is_err());
    }

    #[test]
    fn zero_perturbation_recovers_zero() {
        let setup = wave_setup(ProbeKind::DampingZero, 80, 2);
        let report = reconstruct_field(&setup, &setup.base(), PlanChoice::Modes(2), None).unwrap();
        assert!(report.total_error() < 1e-12);
        assert_eq!(report.delta_lambda_norm, 0.0);
    }
}
