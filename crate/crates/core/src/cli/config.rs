//! TOML experiment files.
//!
//! Every section is optional except `schema_version`, `equation`, `domain`
//! and `time`; unknown keys are rejected. Scalars may be numbers or
//! constant expressions such as `"2*pi"`, and fields may be expressions
//! in `x`, a constant, or an explicit array of interior values.

use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::expr::Expr;
use crate::error::{Error, Result};
use crate::forward::{Boundary, ObservationConfig};
use crate::grid::{CoefficientField, Grid1D, TimeGrid};
use crate::observability::PerturbationTarget;
use crate::operators::Equation;
use crate::reconstruct::{Coefficients, PlanChoice, ProbeKind, ProbeSetup, SweepMode};
use crate::spectral::{alpha_threshold, unperturbed_gap, SpectralBasis};
use crate::volterra::Smoothing;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

impl Scalar {
    pub fn value(&self) -> Result<f64> {
        match self {
            Scalar::Number(v) => Ok(*v),
            Scalar::Expr(s) => Expr::constant(s),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FieldInput {
    Number(f64),
    Expr(String),
    Values(Vec<f64>),
}

impl FieldInput {
    pub fn field(&self, grid: Grid1D) -> Result<CoefficientField> {
        match self {
            FieldInput::Number(v) => Ok(CoefficientField::constant(grid, *v)),
            FieldInput::Expr(s) => {
                let e = Expr::parse(s)?;
                let f = CoefficientField::from_fn(grid, |x| e.eval(x));
                if f.values().iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config(format!("`{s}` is not finite on the grid")));
                }
                Ok(f)
            }
            FieldInput::Values(v) => CoefficientField::new(grid, v.clone())
                .map_err(|e| Error::Config(format!("field array: {e}"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub length: Scalar,
    /// Interior grid points.
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub tau: Scalar,
    pub dt: Option<Scalar>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSection {
    #[serde(default = "default_boundaries")]
    pub boundaries: Vec<Boundary>,
}

fn default_boundaries() -> Vec<Boundary> {
    vec![Boundary::Left]
}

impl Default for ObservationSection {
    fn default() -> Self {
        Self { boundaries: default_boundaries() }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    pub q: Option<FieldInput>,
    pub a: Option<FieldInput>,
}

/// Ground-truth perturbation, given pointwise or as coefficients in the
/// reference modes.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub q: Option<FieldInput>,
    pub a: Option<FieldInput>,
    pub q_modes: Option<Vec<f64>>,
    pub a_modes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigSection {
    #[serde(default = "ten")]
    pub count: usize,
    /// Also compute the damped spectrum about the base damping.
    #[serde(default)]
    pub perturbed: bool,
}

fn ten() -> usize {
    10
}

impl Default for EigSection {
    fn default() -> Self {
        Self { count: 10, perturbed: false }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardSection {
    pub u0: Option<FieldInput>,
    pub u1: Option<FieldInput>,
    /// Keep every `record_stride`-th state (0 disables the trajectory).
    #[serde(default)]
    pub record_stride: usize,
    #[serde(default)]
    pub energy: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservabilitySection {
    #[serde(default = "five")]
    pub count: usize,
    #[serde(default)]
    pub margin_sizes: Vec<f64>,
    pub margin_target: Option<PerturbationTarget>,
    pub margin_direction: Option<FieldInput>,
}

fn five() -> usize {
    5
}

impl Default for ObservabilitySection {
    fn default() -> Self {
        Self { count: 5, margin_sizes: vec![], margin_target: None, margin_direction: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub kind: ProbeKind,
    pub count: usize,
    pub dictionary: Option<usize>,
    /// Number of retained modes `N`.
    pub modes: Option<usize>,
    /// Spectral cutoff `λ`.
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub auto: bool,
    pub radius: Option<f64>,
    pub iterations: Option<usize>,
    pub tolerance: Option<f64>,
    pub budget: Option<f64>,
    /// Fixed Tikhonov weight applied before the Volterra inversion.
    pub smoothing: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Size,
    Noise,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub epsilons: Vec<f64>,
    #[serde(default = "size_sweep")]
    pub mode: SweepKind,
    #[serde(default = "twenty")]
    pub draws: usize,
}

fn size_sweep() -> SweepKind {
    SweepKind::Size
}

fn twenty() -> usize {
    20
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub equation: Equation,
    pub domain: DomainSection,
    pub time: TimeSection,
    #[serde(default)]
    pub observation: ObservationSection,
    #[serde(default)]
    pub coefficients: CoefficientSection,
    #[serde(default)]
    pub perturbation: PerturbationSection,
    #[serde(default)]
    pub eig: EigSection,
    #[serde(default)]
    pub forward: ForwardSection,
    #[serde(default)]
    pub observability: ObservabilitySection,
    pub probes: Option<ProbeSection>,
    #[serde(default)]
    pub noise: NoiseSection,
    pub stability: Option<StabilitySection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// A parsed file together with its content hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
    pub stem: String,
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        let grid = cfg.grid()?;
        cfg.observation()?;
        let base = cfg.base()?;
        if let Some(p) = &cfg.probes {
            if p.kind.equation() != cfg.equation {
                return Err(Error::Config(format!("probes.kind = {} needs equation = {}", p.kind, p.kind.equation())));
            }
            if p.kind.uses_riesz() {
                let threshold = alpha_threshold(unperturbed_gap(cfg.equation, &grid)?);
                let rho = base.a.max_abs();
                if rho >= threshold {
                    return Err(Error::Config(format!(
                        "base damping sup-norm {rho} must stay below the gap threshold {threshold} for {} probes",
                        p.kind
                    )));
                }
            }
        }
        Ok(cfg)
    }

    /// Notes on physically questionable but admissible settings.
    pub fn notes(&self) -> Result<Vec<String>> {
        Ok(self.observation()?.threshold_warning(&self.grid()?).into_iter().collect())
    }

    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Config("config is not UTF-8".into()))?;
        let config = Self::parse(&text)?;
        let stem = path.file_stem().map_or("experiment".into(), |s| s.to_string_lossy().into_owned());
        Ok(LoadedConfig { config, hash: hex_digest(&bytes), stem })
    }

    pub fn grid(&self) -> Result<Grid1D> {
        let length = self.domain.length.value()?;
        Grid1D::new(length, self.domain.n).map_err(|e| Error::Config(format!("domain: {e}")))
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        let tau = self.time.tau.value()?;
        let t = match (&self.time.dt, self.time.steps) {
            (Some(dt), None) => TimeGrid::with_step(tau, dt.value()?),
            (None, Some(steps)) => TimeGrid::new(tau, steps),
            _ => return Err(Error::Config("time: give exactly one of `dt` or `steps`".into())),
        };
        t.map_err(|e| Error::Config(format!("time: {e}")))
    }

    pub fn observation(&self) -> Result<ObservationConfig> {
        ObservationConfig::new(self.equation, self.observation.boundaries.clone(), self.time_grid()?)
            .map_err(|e| Error::Config(format!("observation: {e}")))
    }

    pub fn base(&self) -> Result<Coefficients> {
        let grid = self.grid()?;
        let get = |f: &Option<FieldInput>| f.as_ref().map_or(Ok(CoefficientField::zeros(grid)), |s| s.field(grid));
        let q = get(&self.coefficients.q)?;
        let a = get(&self.coefficients.a)?;
        if self.equation == Equation::Beam && q.max_abs() != 0.0 {
            return Err(Error::Config("the beam model has no potential; drop `coefficients.q`".into()));
        }
        if self.equation == Equation::Heat && a.max_abs() != 0.0 {
            return Err(Error::Config("the heat model has no damping; drop `coefficients.a`".into()));
        }
        if !a.is_nonneg() {
            return Err(Error::Config("damping must be nonnegative".into()));
        }
        Coefficients::new(q, a)
    }

    /// Base coefficients plus the configured perturbation; `basis` supplies
    /// the modes for `*_modes` entries.
    pub fn truth(&self, basis: Option<&SpectralBasis>) -> Result<Coefficients> {
        let base = self.base()?;
        let grid = self.grid()?;
        let p = &self.perturbation;
        let part = |field: &Option<FieldInput>, modes: &Option<Vec<f64>>, name: &str| -> Result<CoefficientField> {
            let mut d = field.as_ref().map_or(Ok(CoefficientField::zeros(grid)), |s| s.field(grid))?;
            if let Some(c) = modes {
                let basis = basis.ok_or_else(|| Error::Config(format!("perturbation.{name}_modes needs reference modes")))?;
                if c.len() > basis.len() {
                    return Err(Error::Config(format!("perturbation.{name}_modes has more entries than computed modes")));
                }
                d = d.add(&CoefficientField::synthesize(grid, c, &basis.modes()[..c.len()])?)?;
            }
            Ok(d)
        };
        Coefficients::new(base.q.add(&part(&p.q, &p.q_modes, "q")?)?, base.a.add(&part(&p.a, &p.a_modes, "a")?)?)
    }

    pub fn probe_section(&self) -> Result<&ProbeSection> {
        self.probes.as_ref().ok_or_else(|| Error::Config("missing [probes] section".into()))
    }

    pub fn probe_setup(&self) -> Result<ProbeSetup> {
        let p = self.probe_section()?;
        let base = self.base()?;
        let dictionary = p.dictionary.unwrap_or(if p.kind == ProbeKind::Heat { p.count } else { 24.max(p.count) });
        let mut setup = ProbeSetup::new(p.kind, base.q, base.a, self.observation()?, p.count, dictionary)?;
        if p.iterations.is_some() || p.tolerance.is_some() {
            let (it, tol) = (p.iterations.unwrap_or(setup.max_iterations), p.tolerance.unwrap_or(setup.tolerance));
            setup = setup.with_iterations(it, tol);
        }
        if let Some(m) = p.budget {
            setup = setup.with_budget(m);
        }
        if let Some(w) = p.smoothing {
            setup = setup.with_smoothing(Smoothing::Fixed(w));
        }
        Ok(setup)
    }

    pub fn plan(&self) -> Result<PlanChoice> {
        let p = self.probe_section()?;
        match (p.modes, p.cutoff, p.auto) {
            (Some(n), None, false) => Ok(PlanChoice::Modes(n)),
            (None, Some(l), false) => Ok(PlanChoice::Cutoff(l)),
            (None, None, true) => Ok(PlanChoice::Auto { radius: p.radius }),
            (None, None, false) => Ok(PlanChoice::Modes(p.count)),
            _ => Err(Error::Config("probes: give at most one of `modes`, `cutoff`, `auto`".into())),
        }
    }

    pub fn sweep(&self) -> Result<(&StabilitySection, SweepMode)> {
        let s = self.stability.as_ref().ok_or_else(|| Error::Config("missing [stability] section".into()))?;
        let mode = match s.mode {
            SweepKind::Size => SweepMode::PerturbationSize,
            SweepKind::Noise => SweepMode::NoiseLevel { draws: s.draws },
        };
        Ok((s, mode))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
equation = "wave"
[domain]
length = "pi"
n = 50
[time]
tau = "2*pi"
dt = 0.01
"#;

    #[test]
    fn minimal_config_loads() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.grid().unwrap().n(), 50);
        assert!((c.time_grid().unwrap().tau() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(c.base().unwrap().q.max_abs(), 0.0);
        assert_eq!(c.eig.count, 10);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}\n[eig]\ncuont = 3\n")).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("schema_version = 1", "schema_version = 9")).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("n = 50", "n = 1")).is_err());
    }

    #[test]
    fn field_specs() {
        let g = Grid1D::new(1.0, 3).unwrap();
        let f = FieldInput::Expr("x^2".into()).field(g).unwrap();
        assert!((f.values()[1] - 0.25).abs() < 1e-15);
        assert!(FieldInput::Values(vec![1.0, 2.0]).field(g).is_err());
        assert_eq!(FieldInput::Number(2.0).field(g).unwrap().values(), &[2.0; 3]);
    }
}
